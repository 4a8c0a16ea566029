#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "eigenclose/assembly.hpp"
#include "eigenclose/elements.hpp"
#include "eigenclose/mesh.hpp"
#include "eigenclose/quadrature.hpp"
#include "eigenclose/solve.hpp"

namespace eigenclose {

/// Exact eigenpair where one is known in closed form: on the unit square
/// lambda_{p,q} = (p^2+q^2) pi^2 with L2-normalized u = 2 sin(p pi x) sin(q pi y).
struct ExactSolution {
  bool available = false;
  double eigenvalue = 0.0;
  std::function<double(const Eigen::Vector2d&)> value;
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> gradient;
};

inline std::vector<ExactSolution> exact_solutions(DomainKind domain, int m) {
  std::vector<ExactSolution> out;
  if (domain != DomainKind::UnitSquare) {
    out.resize(static_cast<size_t>(m));
    return out;
  }
  struct Mode {
    int p, q;
    double lambda;
  };
  std::vector<Mode> modes;
  for (int p = 1; p <= m + 2; ++p)
    for (int q = 1; q <= m + 2; ++q)
      modes.push_back({p, q, (p * p + q * q) * std::numbers::pi * std::numbers::pi});
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.p < b.p;  // deterministic order inside clusters
  });
  for (int j = 0; j < m; ++j) {
    const Mode mode = modes[static_cast<size_t>(j)];
    ExactSolution s;
    s.available = true;
    s.eigenvalue = mode.lambda;
    const double pp = mode.p * std::numbers::pi, qq = mode.q * std::numbers::pi;
    s.value = [pp, qq](const Eigen::Vector2d& x) {
      return 2.0 * std::sin(pp * x.x()) * std::sin(qq * x.y());
    };
    s.gradient = [pp, qq](const Eigen::Vector2d& x) {
      return Eigen::Vector2d(2.0 * pp * std::cos(pp * x.x()) * std::sin(qq * x.y()),
                             2.0 * qq * std::sin(pp * x.x()) * std::cos(qq * x.y()));
    };
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// broken bilinear forms (cellwise; exact for the piecewise-polynomial fields)

/// a_h(u, v) and b(u, v) for two discrete fields on the same mesh.
inline std::pair<double, double> broken_products(const FieldVector& u, const FieldVector& v) {
  if (u.mesh != v.mesh) throw std::invalid_argument("broken_products: fields on different meshes");
  const Mesh& mesh = *u.mesh;
  const QuadratureRule rule = rule_for(mesh.cell_kind, 4);
  double energy = 0.0, l2 = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellGeometry geom = cell_geometry(mesh, c);
    const CellField uf(u, c), vf(v, c);
    const double jac = geom.jacobian();
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d x = geom.map(rule.points[static_cast<size_t>(q)]);
      const double w = rule.weights[static_cast<size_t>(q)] * jac;
      energy += w * uf.gradient(x).dot(vf.gradient(x));
      l2 += w * uf.value(x) * vf.value(x);
    }
  }
  return {energy, l2};
}

/// b(f, v) for an analytic f against a discrete field (composite quadrature).
template <typename F>
double l2_product_with(const FieldVector& v, F&& f, int degree = 8) {
  const Mesh& mesh = *v.mesh;
  const QuadratureRule rule = rule_for(mesh.cell_kind, degree);
  double sum = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellField vf(v, c);
    sum += integrate(rule, cell_geometry(mesh, c),
                     [&](const Eigen::Vector2d& x) { return f(x) * vf.value(x); });
  }
  return sum;
}

/// a_h(f, v) for an analytic gradient field against a discrete field.
template <typename G>
double energy_product_with(const FieldVector& v, G&& grad_f, int degree = 8) {
  const Mesh& mesh = *v.mesh;
  const QuadratureRule rule = rule_for(mesh.cell_kind, degree);
  double sum = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellField vf(v, c);
    sum += integrate(rule, cell_geometry(mesh, c),
                     [&](const Eigen::Vector2d& x) { return grad_f(x).dot(vf.gradient(x)); });
  }
  return sum;
}

/// Rayleigh quotient of a discrete field: a_h(v,v) / b(v,v).
inline double rayleigh_quotient(const FieldVector& v) {
  const auto [energy, l2] = broken_products(v, v);
  if (!(l2 > 0.0)) throw std::invalid_argument("rayleigh_quotient: zero b-norm");
  return energy / l2;
}

/// Rayleigh quotient of an analytic function via composite quadrature.
template <typename F, typename G>
double rayleigh_quotient(const Mesh& mesh, F&& f, G&& grad_f, int degree = 8) {
  const double energy = integrate_mesh(mesh, degree, [&](const Eigen::Vector2d& x) {
    return grad_f(x).squaredNorm();
  });
  const double l2 =
      integrate_mesh(mesh, degree, [&](const Eigen::Vector2d& x) { return f(x) * f(x); });
  if (!(l2 > 0.0)) throw std::invalid_argument("rayleigh_quotient: zero b-norm");
  return energy / l2;
}

// ---------------------------------------------------------------------------
// lower bounds

/// Result of the nonconforming eigensolve: the eigenvalues are the certified
/// lower bounds (on meshes fine enough for the asymptotic regime).
struct LowerBoundResult {
  ElementKind kind;
  const Mesh* mesh = nullptr;
  AssembledSystem system;
  EigenResult eig;

  int count() const { return static_cast<int>(eig.eigenvalues.size()); }
  double value(int j) const { return eig.eigenvalues(j); }

  FieldVector field(int j) const {
    return field_from_free(kind, *mesh, system.dofs, eig.eigenvectors.col(j));
  }
};

inline LowerBoundResult lower_bounds(const Mesh& mesh, ElementKind nc_kind, int m,
                                     double tol = 1e-10, std::uint64_t seed = 42) {
  if (nc_kind != ElementKind::ECR && nc_kind != ElementKind::EQ1Rot)
    throw std::invalid_argument("lower_bounds: kind must be ECR or EQ1Rot");
  LowerBoundResult result;
  result.kind = nc_kind;
  result.mesh = &mesh;
  result.system = assemble(mesh, nc_kind);
  result.eig = eigs_smallest(result.system.stiffness, result.system.mass, m, tol, seed);
  return result;
}

// ---------------------------------------------------------------------------
// upper bounds by conforming postprocessing

namespace detail {

inline int thread_cap() {
  if (const char* env = std::getenv("EIGENCLOSE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

// Solves the conforming source problems a(u_hat_j, v) = lambda_j b(u_j, v)
// for all j; returns free-DOF solutions as columns.
inline Eigen::MatrixXd postprocess_solves(const LowerBoundResult& lower,
                                          const AssembledSystem& conforming,
                                          const MixedMass& mixed) {
  const int m = lower.count();
  const SpdFactor factor(conforming.stiffness);
  Eigen::MatrixXd solutions(conforming.dofs.n_free(), m);

  const int threads = std::min(thread_cap(), m);
  auto solve_one = [&](int j) {
    const Eigen::VectorXd rhs = lower.value(j) * (mixed * lower.eig.eigenvectors.col(j));
    Eigen::VectorXd x = factor.solve(rhs);
    const double rhs_norm = rhs.norm();
    if (rhs_norm > 0.0) {
      const Eigen::VectorXd r = rhs - conforming.stiffness * x;
      if (r.norm() > 1e-13 * rhs_norm) x += factor.solve(r);
    }
    if (!(x.norm() > 0.0))
      throw std::runtime_error("postprocess: source solve returned the zero field");
    solutions.col(j) = x;
  };
  if (threads <= 1) {
    for (int j = 0; j < m; ++j) solve_one(j);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (int j = t; j < m; j += threads) solve_one(j);
      });
    for (auto& th : pool) th.join();
  }
  return solutions;
}

}  // namespace detail

/// Postprocessed upper bounds and their fields. Values follow the ordering of
/// the nonconforming input pairs for the lowest-order scheme, and are
/// ascending for the higher-order one.
struct UpperBoundResult {
  ElementKind kind;
  Eigen::VectorXd values;
  std::vector<FieldVector> fields;
  int subspace_dim = 0;  // higher-order scheme: retained span dimension
};

/// Lowest-order postprocessing: one conforming source solve per eigenpair,
/// then the Rayleigh quotient of the solution.
inline UpperBoundResult upper_bound_lowest(const LowerBoundResult& lower, ElementKind c_kind) {
  if (c_kind != ElementKind::P1 && c_kind != ElementKind::Q1)
    throw std::invalid_argument("upper_bound_lowest: kind must be P1 or Q1");
  const Mesh& mesh = *lower.mesh;
  const AssembledSystem conforming = assemble(mesh, c_kind);
  const MixedMass mixed = assemble_mixed_mass(mesh, c_kind, lower.kind);
  const Eigen::MatrixXd solutions = detail::postprocess_solves(lower, conforming, mixed);

  UpperBoundResult result;
  result.kind = c_kind;
  result.subspace_dim = lower.count();
  result.values.resize(lower.count());
  for (int j = 0; j < lower.count(); ++j) {
    const Eigen::VectorXd x = solutions.col(j);
    result.values(j) =
        conforming.stiffness.quadratic_form(x) / conforming.mass.quadratic_form(x);
    result.fields.push_back(field_from_free(c_kind, mesh, conforming.dofs, x));
  }
  return result;
}

/// Higher-order postprocessing: m source solves in the richer conforming
/// space, then the m x m eigenproblem in their span. Fourth-order accurate
/// upper bounds on convex domains.
inline UpperBoundResult upper_bound_higher(const LowerBoundResult& lower, ElementKind hc_kind,
                                           int m) {
  if (hc_kind != ElementKind::P2 && hc_kind != ElementKind::Q2)
    throw std::invalid_argument("upper_bound_higher: kind must be P2 or Q2");
  if (m < 1 || m > lower.count())
    throw std::invalid_argument("upper_bound_higher: need 1 <= m <= available pairs");
  const Mesh& mesh = *lower.mesh;
  const AssembledSystem conforming = assemble(mesh, hc_kind);
  const MixedMass mixed = assemble_mixed_mass(mesh, hc_kind, lower.kind);
  const Eigen::MatrixXd solutions =
      detail::postprocess_solves(lower, conforming, mixed).leftCols(m);

  Eigen::MatrixXd a_small(m, m), b_small(m, m);
  Eigen::MatrixXd a_cols(solutions.rows(), m), b_cols(solutions.rows(), m);
  for (int j = 0; j < m; ++j) {
    a_cols.col(j) = conforming.stiffness * solutions.col(j);
    b_cols.col(j) = conforming.mass * solutions.col(j);
  }
  a_small = solutions.transpose() * a_cols;
  b_small = solutions.transpose() * b_cols;

  const DenseGenEig small = dense_gen_eig(a_small, b_small);

  UpperBoundResult result;
  result.kind = hc_kind;
  result.subspace_dim = small.subspace_dim;
  result.values = small.eigenvalues;
  for (int k = 0; k < small.subspace_dim; ++k) {
    const Eigen::VectorXd x = solutions * small.eigenvectors.col(k);
    result.fields.push_back(field_from_free(hc_kind, mesh, conforming.dofs, x));
  }
  return result;
}

// ---------------------------------------------------------------------------
// identity diagnostics

/// Residual of the eigenvalue-error expansion
///   lambda - lambda_h = ||u-u_h||_{a,h}^2 - lambda_h ||v_h-u_h||_b^2
///                       + lambda_h (||v_h||_b^2 - ||u||_b^2) + 2 a_h(u-v_h, u_h),
/// valid for every v_h in the discrete space. Continuous terms use composite
/// degree-8 quadrature; the residual is bounded by quadrature + solver error.
inline double expansion_residual(const ExactSolution& exact, double lambda_h,
                                 const FieldVector& u_h, const FieldVector& v_h) {
  if (!exact.available)
    throw std::invalid_argument("expansion_residual: exact solution unavailable");
  const Mesh& mesh = *u_h.mesh;

  FieldVector u_h_aligned = u_h;
  if (l2_product_with(u_h, exact.value) < 0.0) u_h_aligned.coeffs *= -1.0;

  const auto [uh_a, uh_b] = broken_products(u_h_aligned, u_h_aligned);
  const auto [vh_a, vh_b] = broken_products(v_h, v_h);
  (void)vh_a;
  const auto [vu_a, vu_b] = broken_products(v_h, u_h_aligned);

  const double u_a = integrate_mesh(mesh, 8, [&](const Eigen::Vector2d& x) {
    return exact.gradient(x).squaredNorm();
  });
  const double u_b = integrate_mesh(mesh, 8, [&](const Eigen::Vector2d& x) {
    const double v = exact.value(x);
    return v * v;
  });
  const double a_u_uh = energy_product_with(u_h_aligned, exact.gradient);

  const double err_energy = u_a - 2.0 * a_u_uh + uh_a;        // ||u - u_h||_{a,h}^2
  const double diff_b = vh_b - 2.0 * vu_b + uh_b;             // ||v_h - u_h||_b^2
  const double mixed_energy = (a_u_uh - vu_a) * 2.0;          // 2 a_h(u - v_h, u_h)
  const double rhs =
      err_energy - lambda_h * diff_b + lambda_h * (vh_b - u_b) + mixed_energy;
  const double lhs = exact.eigenvalue - lambda_h;
  return std::abs(lhs - rhs);
}

/// Residual of the conforming Rayleigh-quotient identity
///   R(w) - lambda = ||w-u||_a^2 / ||w||_b^2 - lambda ||w-u||_b^2 / ||w||_b^2.
inline double rayleigh_identity_residual(const FieldVector& w, const ExactSolution& exact) {
  if (!exact.available)
    throw std::invalid_argument("rayleigh_identity_residual: exact solution unavailable");
  if (!element_info(w.kind).conforming)
    throw std::invalid_argument("rayleigh_identity_residual: w must be conforming");
  const Mesh& mesh = *w.mesh;

  const auto [w_a, w_b] = broken_products(w, w);
  if (!(w_b > 0.0)) throw std::invalid_argument("rayleigh_identity_residual: zero b-norm");
  const double u_a = integrate_mesh(mesh, 8, [&](const Eigen::Vector2d& x) {
    return exact.gradient(x).squaredNorm();
  });
  const double u_b = integrate_mesh(mesh, 8, [&](const Eigen::Vector2d& x) {
    const double v = exact.value(x);
    return v * v;
  });
  const double a_u_w = energy_product_with(w, exact.gradient);
  const double b_u_w = l2_product_with(w, exact.value);

  const double err_a = w_a - 2.0 * a_u_w + u_a;
  const double err_b = w_b - 2.0 * b_u_w + u_b;
  const double lhs = w_a / w_b - exact.eigenvalue;
  const double rhs = err_a / w_b - exact.eigenvalue * err_b / w_b;
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// enclosures

struct EnclosureRow {
  int j = 0;
  double lower = 0.0;
  std::optional<double> upper_lowest;
  std::optional<double> upper_higher;
  double width = 0.0;  // tightest available upper minus lower
  bool inverted = false;
};

/// Certified two-sided record per eigenvalue, with run provenance.
struct EnclosureReport {
  std::vector<EnclosureRow> rows;
  double h = 0.0;
  int n = 0;
  std::string domain;
  std::string nc_element;
  std::string post_lowest;  // empty when not computed
  std::string post_higher;
  double solver_tol = 0.0;
  std::uint64_t seed = 0;
  bool any_inversion = false;
};

/// Pairs lower bounds with the available postprocessed upper bounds. An upper
/// bound below lower - 1e-9 marks the row (and report) as inverted: that
/// signals solver failure or a mesh still outside the asymptotic bound regime.
inline EnclosureReport enclosure(const LowerBoundResult& lower,
                                 const UpperBoundResult* lowest,
                                 const UpperBoundResult* higher) {
  EnclosureReport report;
  report.h = lower.mesh->h;
  report.nc_element = element_name(lower.kind);
  report.domain = lower.mesh->domain == DomainKind::UnitSquare ? "square" : "lshape";
  if (lowest) report.post_lowest = element_name(lowest->kind);
  if (higher) report.post_higher = element_name(higher->kind);

  for (int j = 0; j < lower.count(); ++j) {
    EnclosureRow row;
    row.j = j + 1;
    row.lower = lower.value(j);
    if (lowest && j < lowest->values.size()) row.upper_lowest = lowest->values(j);
    if (higher && j < higher->values.size()) row.upper_higher = higher->values(j);
    std::optional<double> best;
    if (row.upper_lowest) best = *row.upper_lowest;
    if (row.upper_higher && (!best || *row.upper_higher < *best)) best = *row.upper_higher;
    if (best) {
      row.width = *best - row.lower;
      row.inverted = *best < row.lower - 1e-9;
      report.any_inversion = report.any_inversion || row.inverted;
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace eigenclose
