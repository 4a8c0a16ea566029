#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "eigenclose/mesh.hpp"

namespace eigenclose {

/// Quadrature rule on the reference cell: unit triangle {(0,0),(1,0),(0,1)}
/// (measure 1/2) or unit square [0,1]^2 (measure 1). Weights sum to the
/// reference measure; exact for all monomials of total degree <= exact_degree
/// (triangle) resp. per-axis degree <= exact_degree (rectangle).
struct QuadratureRule {
  CellKind cell_kind;
  std::vector<Eigen::Vector2d> points;
  std::vector<double> weights;
  int exact_degree = 0;

  int size() const { return static_cast<int>(points.size()); }
};

struct Gauss1D {
  std::vector<double> nodes;    // on [0,1]
  std::vector<double> weights;  // sum to the weight-function integral
};

namespace detail {

// Golub-Welsch: nodes/weights of the Gauss rule for a weight function given by
// the Jacobi matrix of its orthogonal-polynomial recurrence.
inline Gauss1D golub_welsch(const std::vector<double>& diag, const std::vector<double>& offdiag,
                            double mu0) {
  const int k = static_cast<int>(diag.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) t(i, i) = diag[static_cast<size_t>(i)];
  for (int i = 0; i + 1 < k; ++i)
    t(i, i + 1) = t(i + 1, i) = offdiag[static_cast<size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  Gauss1D rule;
  rule.nodes.resize(static_cast<size_t>(k));
  rule.weights.resize(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    rule.nodes[static_cast<size_t>(i)] = 0.5 * (es.eigenvalues()(i) + 1.0);  // [-1,1] -> [0,1]
    const double q0 = es.eigenvectors()(0, i);
    rule.weights[static_cast<size_t>(i)] = mu0 * q0 * q0;
  }
  return rule;
}

}  // namespace detail

/// k-point Gauss-Legendre on [0,1]; exact through degree 2k-1, weights sum to 1.
inline Gauss1D gauss_legendre_01(int k) {
  if (k < 1) throw std::invalid_argument("gauss_legendre_01: k must be >= 1");
  std::vector<double> diag(static_cast<size_t>(k), 0.0);
  std::vector<double> off(static_cast<size_t>(k > 0 ? k - 1 : 0));
  for (int n = 1; n < k; ++n)
    off[static_cast<size_t>(n - 1)] = std::sqrt(n * n / (4.0 * n * n - 1.0));
  Gauss1D rule = detail::golub_welsch(diag, off, 2.0);
  for (double& w : rule.weights) w *= 0.5;  // map [-1,1] -> [0,1]
  return rule;
}

/// k-point Gauss rule for the weight (1-x) on [0,1]; weights sum to 1/2.
inline Gauss1D gauss_jacobi10_01(int k) {
  if (k < 1) throw std::invalid_argument("gauss_jacobi10_01: k must be >= 1");
  std::vector<double> diag(static_cast<size_t>(k));
  std::vector<double> off(static_cast<size_t>(k > 0 ? k - 1 : 0));
  for (int n = 0; n < k; ++n)
    diag[static_cast<size_t>(n)] = -1.0 / ((2.0 * n + 1.0) * (2.0 * n + 3.0));
  for (int n = 1; n < k; ++n)
    off[static_cast<size_t>(n - 1)] = std::sqrt(n * (n + 1.0) / ((2.0 * n + 1.0) * (2.0 * n + 1.0)));
  Gauss1D rule = detail::golub_welsch(diag, off, 2.0);
  for (double& w : rule.weights) w *= 0.25;  // (1-x)dx on [-1,1] -> [0,1]
  return rule;
}

namespace detail {

// Two-orbit 6-point degree-4 triangle rule. Orbit (a, b, b) in barycentric
// coordinates, b = (1-a)/2, multiplicity 3. The literature constants are
// polished to machine precision by Newton on the symmetric moment equations
//   sum 3 w_i = 1/2,  sum 3 w_i e2(a_i) = 1/8,
//   sum 3 w_i e3(a_i) = 1/120,  sum 3 w_i e2(a_i)^2 = 1/30,
// where e2, e3 are the elementary symmetric polynomials at (a, b, b).
inline QuadratureRule triangle_rule_degree4() {
  Eigen::Vector4d u;  // (a1, w1, a2, w2)
  u << 0.108103018168070, 0.223381589678011 / 2.0, 0.816847572980459,
      0.109951743655322 / 2.0;
  auto e2 = [](double a) {
    const double b = 0.5 * (1.0 - a);
    return 2.0 * a * b + b * b;
  };
  auto e3 = [](double a) {
    const double b = 0.5 * (1.0 - a);
    return a * b * b;
  };
  for (int it = 0; it < 50; ++it) {
    Eigen::Vector4d f;
    f << 3.0 * (u(1) + u(3)) - 0.5,
        3.0 * (u(1) * e2(u(0)) + u(3) * e2(u(2))) - 1.0 / 8.0,
        3.0 * (u(1) * e3(u(0)) + u(3) * e3(u(2))) - 1.0 / 120.0,
        3.0 * (u(1) * e2(u(0)) * e2(u(0)) + u(3) * e2(u(2)) * e2(u(2))) - 1.0 / 30.0;
    if (f.lpNorm<Eigen::Infinity>() < 1e-15) break;
    Eigen::Matrix4d jac;
    const double eps = 1e-7;
    for (int c = 0; c < 4; ++c) {
      Eigen::Vector4d up = u, um = u;
      up(c) += eps;
      um(c) -= eps;
      auto eval = [&](const Eigen::Vector4d& v) {
        Eigen::Vector4d g;
        g << 3.0 * (v(1) + v(3)) - 0.5,
            3.0 * (v(1) * e2(v(0)) + v(3) * e2(v(2))) - 1.0 / 8.0,
            3.0 * (v(1) * e3(v(0)) + v(3) * e3(v(2))) - 1.0 / 120.0,
            3.0 * (v(1) * e2(v(0)) * e2(v(0)) + v(3) * e2(v(2)) * e2(v(2))) - 1.0 / 30.0;
        return g;
      };
      jac.col(c) = (eval(up) - eval(um)) / (2.0 * eps);
    }
    u -= jac.fullPivLu().solve(f);
  }

  QuadratureRule rule;
  rule.cell_kind = CellKind::Triangle;
  rule.exact_degree = 4;
  for (int orbit = 0; orbit < 2; ++orbit) {
    const double a = u(2 * orbit);
    const double w = u(2 * orbit + 1);
    const double b = 0.5 * (1.0 - a);
    // barycentric (l1,l2,l3) -> (x,y) = (l1, l2) on the reference triangle
    rule.points.emplace_back(a, b);
    rule.points.emplace_back(b, a);
    rule.points.emplace_back(b, b);
    rule.weights.insert(rule.weights.end(), 3, w);
  }
  return rule;
}

// Conical-product rule: k x k points, exact for total degree 2k-1.
inline QuadratureRule triangle_rule_conical(int k) {
  const Gauss1D gx = gauss_jacobi10_01(k);  // weight (1-x)
  const Gauss1D gt = gauss_legendre_01(k);
  QuadratureRule rule;
  rule.cell_kind = CellKind::Triangle;
  rule.exact_degree = 2 * k - 1;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double x = gx.nodes[static_cast<size_t>(i)];
      const double y = (1.0 - x) * gt.nodes[static_cast<size_t>(j)];
      rule.points.emplace_back(x, y);
      rule.weights.push_back(gx.weights[static_cast<size_t>(i)] * gt.weights[static_cast<size_t>(j)]);
    }
  return rule;
}

}  // namespace detail

/// Rule on the reference cell with exact_degree >= degree. Triangle rules are
/// exact in total degree, rectangle tensor-Gauss rules per axis.
inline QuadratureRule rule_for(CellKind cell_kind, int degree) {
  if (degree < 0 || degree > 8) throw std::invalid_argument("rule_for: supported degrees are 0..8");
  if (cell_kind == CellKind::Rectangle) {
    const int k = (degree + 2) / 2;
    const Gauss1D g = gauss_legendre_01(k);
    QuadratureRule rule;
    rule.cell_kind = CellKind::Rectangle;
    rule.exact_degree = 2 * k - 1;
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) {
        rule.points.emplace_back(g.nodes[static_cast<size_t>(i)], g.nodes[static_cast<size_t>(j)]);
        rule.weights.push_back(g.weights[static_cast<size_t>(i)] * g.weights[static_cast<size_t>(j)]);
      }
    return rule;
  }
  if (degree <= 1) {
    QuadratureRule rule;
    rule.cell_kind = CellKind::Triangle;
    rule.exact_degree = 1;
    rule.points.emplace_back(1.0 / 3.0, 1.0 / 3.0);
    rule.weights.push_back(0.5);
    return rule;
  }
  if (degree == 2) {
    QuadratureRule rule;  // edge-midpoint rule
    rule.cell_kind = CellKind::Triangle;
    rule.exact_degree = 2;
    rule.points = {{0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}};
    rule.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    return rule;
  }
  if (degree <= 4) {
    static const QuadratureRule rule = detail::triangle_rule_degree4();
    return rule;
  }
  return detail::triangle_rule_conical((degree + 2) / 2);
}

/// Geometry of a single mesh cell, usable without a full mesh.
struct CellGeometry {
  CellKind kind;
  std::array<Eigen::Vector2d, 4> v;
  int nv = 0;

  double area() const {
    double a2 = 0.0;
    for (int s = 0; s < nv; ++s) {
      const auto& p = v[static_cast<size_t>(s)];
      const auto& q = v[static_cast<size_t>((s + 1) % nv)];
      a2 += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a2;
  }

  Eigen::Vector2d centroid() const {
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int k = 0; k < nv; ++k) s += v[static_cast<size_t>(k)];
    return s / nv;
  }

  /// Reference -> physical map. Triangles are affine; rectangles axis-aligned.
  Eigen::Vector2d map(const Eigen::Vector2d& ref) const {
    if (kind == CellKind::Triangle)
      return v[0] + ref.x() * (v[1] - v[0]) + ref.y() * (v[2] - v[0]);
    return Eigen::Vector2d(v[0].x() + ref.x() * (v[1].x() - v[0].x()),
                           v[0].y() + ref.y() * (v[3].y() - v[0].y()));
  }

  double jacobian() const {
    if (kind == CellKind::Triangle) {
      const Eigen::Vector2d e1 = v[1] - v[0], e2 = v[2] - v[0];
      return e1.x() * e2.y() - e1.y() * e2.x();
    }
    return (v[1].x() - v[0].x()) * (v[3].y() - v[0].y());
  }
};

inline CellGeometry cell_geometry(const Mesh& mesh, int c) {
  const MeshCell& cell = mesh.cells[static_cast<size_t>(c)];
  CellGeometry geom;
  geom.kind = cell.nv == 3 ? CellKind::Triangle : CellKind::Rectangle;
  geom.nv = cell.nv;
  for (int k = 0; k < cell.nv; ++k)
    geom.v[static_cast<size_t>(k)] = mesh.nodes[static_cast<size_t>(cell.v[static_cast<size_t>(k)])];
  return geom;
}

/// Integral of f over the physical cell via the mapped reference rule.
template <typename F>
double integrate(const QuadratureRule& rule, const CellGeometry& geom, F&& f) {
  if (rule.cell_kind != geom.kind)
    throw std::invalid_argument("integrate: rule and cell kind mismatch");
  const double jac = geom.jacobian();
  if (!(jac > 0.0)) throw std::invalid_argument("integrate: degenerate cell");
  double sum = 0.0;
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::Vector2d x = geom.map(rule.points[static_cast<size_t>(q)]);
    sum += rule.weights[static_cast<size_t>(q)] * f(x);
  }
  // triangle reference measure is 1/2: |det J| already accounts for the 2x
  return sum * jac;
}

/// Composite integral of f over the whole mesh.
template <typename F>
double integrate_mesh(const Mesh& mesh, int degree, F&& f) {
  const QuadratureRule rule = rule_for(mesh.cell_kind, degree);
  double sum = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) sum += integrate(rule, cell_geometry(mesh, c), f);
  return sum;
}

}  // namespace eigenclose
