#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <vector>

#include "eigenclose/mesh.hpp"
#include "eigenclose/quadrature.hpp"

namespace eigenclose {

/// ECR (enriched Crouzeix-Raviart, span{1,x,y,x^2+y^2}) and EQ1Rot (extension
/// rotated Q1, span{1,x,y,x^2,y^2}) are the nonconforming kinds carrying the
/// lower-bound property; P1/Q1 drive the lowest-order postprocessing and
/// P2/Q2 the higher-order one.
enum class ElementKind { ECR, EQ1Rot, P1, Q1, P2, Q2 };

enum class DofKind { NodeValue, EdgeMean, CellMean, EdgeMidpointValue };

struct LocalDof {
  DofKind kind;
  int entity;  // vertex index, side index, or 0 for the cell
};

struct ElementInfo {
  ElementKind kind;
  CellKind cell_kind;
  int local_dim;
  bool conforming;
  std::vector<LocalDof> dofs;
};

inline const ElementInfo& element_info(ElementKind kind) {
  static const ElementInfo ecr{ElementKind::ECR,
                               CellKind::Triangle,
                               4,
                               false,
                               {{DofKind::EdgeMean, 0},
                                {DofKind::EdgeMean, 1},
                                {DofKind::EdgeMean, 2},
                                {DofKind::CellMean, 0}}};
  static const ElementInfo eq1rot{ElementKind::EQ1Rot,
                                  CellKind::Rectangle,
                                  5,
                                  false,
                                  {{DofKind::EdgeMean, 0},
                                   {DofKind::EdgeMean, 1},
                                   {DofKind::EdgeMean, 2},
                                   {DofKind::EdgeMean, 3},
                                   {DofKind::CellMean, 0}}};
  static const ElementInfo p1{ElementKind::P1,
                              CellKind::Triangle,
                              3,
                              true,
                              {{DofKind::NodeValue, 0},
                               {DofKind::NodeValue, 1},
                               {DofKind::NodeValue, 2}}};
  static const ElementInfo q1{ElementKind::Q1,
                              CellKind::Rectangle,
                              4,
                              true,
                              {{DofKind::NodeValue, 0},
                               {DofKind::NodeValue, 1},
                               {DofKind::NodeValue, 2},
                               {DofKind::NodeValue, 3}}};
  static const ElementInfo p2{ElementKind::P2,
                              CellKind::Triangle,
                              6,
                              true,
                              {{DofKind::NodeValue, 0},
                               {DofKind::NodeValue, 1},
                               {DofKind::NodeValue, 2},
                               {DofKind::EdgeMidpointValue, 0},
                               {DofKind::EdgeMidpointValue, 1},
                               {DofKind::EdgeMidpointValue, 2}}};
  static const ElementInfo q2{ElementKind::Q2,
                              CellKind::Rectangle,
                              9,
                              true,
                              {{DofKind::NodeValue, 0},
                               {DofKind::NodeValue, 1},
                               {DofKind::NodeValue, 2},
                               {DofKind::NodeValue, 3},
                               {DofKind::EdgeMidpointValue, 0},
                               {DofKind::EdgeMidpointValue, 1},
                               {DofKind::EdgeMidpointValue, 2},
                               {DofKind::EdgeMidpointValue, 3},
                               {DofKind::CellMean, 0}}};
  switch (kind) {
    case ElementKind::ECR: return ecr;
    case ElementKind::EQ1Rot: return eq1rot;
    case ElementKind::P1: return p1;
    case ElementKind::Q1: return q1;
    case ElementKind::P2: return p2;
    case ElementKind::Q2: return q2;
  }
  throw std::logic_error("element_info: unknown kind");
}

inline const char* element_name(ElementKind kind) {
  switch (kind) {
    case ElementKind::ECR: return "ecr";
    case ElementKind::EQ1Rot: return "eq1rot";
    case ElementKind::P1: return "p1";
    case ElementKind::Q1: return "q1";
    case ElementKind::P2: return "p2";
    case ElementKind::Q2: return "q2";
  }
  return "?";
}

namespace detail {

// Monomial values and derivatives in the cell-local frame. Local coordinates
// keep the unisolvence systems well conditioned on O(h) cells; every local
// span here is invariant under the frame change (isotropic for triangles,
// axis-aligned anisotropic for rectangles), so the physical spaces match the
// element definitions exactly.
inline void monomials(ElementKind kind, const Eigen::Vector2d& p, Eigen::VectorXd& m,
                      Eigen::VectorXd* dx = nullptr, Eigen::VectorXd* dy = nullptr) {
  const double x = p.x(), y = p.y();
  const int dim = element_info(kind).local_dim;
  m.resize(dim);
  if (dx) dx->resize(dim);
  if (dy) dy->resize(dim);
  auto set = [&](int i, double v, double gx, double gy) {
    m(i) = v;
    if (dx) (*dx)(i) = gx;
    if (dy) (*dy)(i) = gy;
  };
  switch (kind) {
    case ElementKind::P1:
      set(0, 1.0, 0.0, 0.0);
      set(1, x, 1.0, 0.0);
      set(2, y, 0.0, 1.0);
      return;
    case ElementKind::Q1:
      set(0, 1.0, 0.0, 0.0);
      set(1, x, 1.0, 0.0);
      set(2, y, 0.0, 1.0);
      set(3, x * y, y, x);
      return;
    case ElementKind::ECR:
      set(0, 1.0, 0.0, 0.0);
      set(1, x, 1.0, 0.0);
      set(2, y, 0.0, 1.0);
      set(3, x * x + y * y, 2.0 * x, 2.0 * y);
      return;
    case ElementKind::EQ1Rot:
      set(0, 1.0, 0.0, 0.0);
      set(1, x, 1.0, 0.0);
      set(2, y, 0.0, 1.0);
      set(3, x * x, 2.0 * x, 0.0);
      set(4, y * y, 0.0, 2.0 * y);
      return;
    case ElementKind::P2:
      set(0, 1.0, 0.0, 0.0);
      set(1, x, 1.0, 0.0);
      set(2, y, 0.0, 1.0);
      set(3, x * x, 2.0 * x, 0.0);
      set(4, x * y, y, x);
      set(5, y * y, 0.0, 2.0 * y);
      return;
    case ElementKind::Q2: {
      const double px[3] = {1.0, x, x * x};
      const double py[3] = {1.0, y, y * y};
      const double gx[3] = {0.0, 1.0, 2.0 * x};
      const double gy[3] = {0.0, 1.0, 2.0 * y};
      int i = 0;
      for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 3; ++a, ++i)
          set(i, px[a] * py[b], gx[a] * py[b], px[a] * gy[b]);
      return;
    }
  }
}

}  // namespace detail

/// Applies the i-th DOF functional of `kind` on the given cell to an arbitrary
/// function of physical coordinates. Edge means use 5-point Gauss, cell means
/// a degree-8 rule; both are exact for every local polynomial space here.
template <typename F>
double apply_dof_functional(ElementKind kind, const CellGeometry& geom, int i, F&& f) {
  const LocalDof dof = element_info(kind).dofs[static_cast<size_t>(i)];
  switch (dof.kind) {
    case DofKind::NodeValue:
      return f(geom.v[static_cast<size_t>(dof.entity)]);
    case DofKind::EdgeMidpointValue: {
      const Eigen::Vector2d a = geom.v[static_cast<size_t>(dof.entity)];
      const Eigen::Vector2d b = geom.v[static_cast<size_t>((dof.entity + 1) % geom.nv)];
      return f(0.5 * (a + b));
    }
    case DofKind::EdgeMean: {
      const Eigen::Vector2d a = geom.v[static_cast<size_t>(dof.entity)];
      const Eigen::Vector2d b = geom.v[static_cast<size_t>((dof.entity + 1) % geom.nv)];
      static const Gauss1D g = gauss_legendre_01(5);
      double mean = 0.0;
      for (size_t q = 0; q < g.nodes.size(); ++q)
        mean += g.weights[q] * f(a + g.nodes[q] * (b - a));
      return mean;
    }
    case DofKind::CellMean: {
      static const QuadratureRule tri_rule = rule_for(CellKind::Triangle, 8);
      static const QuadratureRule rect_rule = rule_for(CellKind::Rectangle, 8);
      const QuadratureRule& rule = geom.kind == CellKind::Triangle ? tri_rule : rect_rule;
      return integrate(rule, geom, f) / geom.area();
    }
  }
  throw std::logic_error("apply_dof_functional: unknown dof kind");
}

/// Basis of the local polynomial space on one physical cell, dual to the
/// element's DOF functionals (solved from the unisolvence system).
class LocalBasis {
public:
  static LocalBasis build(ElementKind kind, const CellGeometry& geom) {
    LocalBasis basis;
    basis.kind_ = kind;
    basis.center_ = geom.centroid();
    if (geom.kind == CellKind::Triangle) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i)
        s = std::max(s, (geom.v[static_cast<size_t>(i)] -
                         geom.v[static_cast<size_t>((i + 1) % 3)])
                            .norm());
      basis.scale_ = Eigen::Vector2d(s, s);
    } else {
      basis.scale_ = Eigen::Vector2d(geom.v[1].x() - geom.v[0].x(), geom.v[3].y() - geom.v[0].y());
    }

    const int dim = element_info(kind).local_dim;
    Eigen::MatrixXd vandermonde(dim, dim);
    Eigen::VectorXd m;
    for (int i = 0; i < dim; ++i) {
      for (int k = 0; k < dim; ++k) {
        vandermonde(i, k) = apply_dof_functional(kind, geom, i, [&](const Eigen::Vector2d& x) {
          Eigen::VectorXd mm;
          detail::monomials(kind, basis.local(x), mm);
          return mm(k);
        });
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(vandermonde);
    basis.coeff_ = lu.solve(Eigen::MatrixXd::Identity(dim, dim));
    if (!basis.coeff_.allFinite())
      throw std::runtime_error("LocalBasis: singular unisolvence system");
    return basis;
  }

  int dim() const { return static_cast<int>(coeff_.cols()); }

  /// Basis values at a physical point.
  void eval(const Eigen::Vector2d& x, Eigen::VectorXd& values) const {
    Eigen::VectorXd m;
    detail::monomials(kind_, local(x), m);
    values.noalias() = coeff_.transpose() * m;
  }

  /// Basis values and physical gradients (2 x dim) at a physical point.
  void eval_with_gradients(const Eigen::Vector2d& x, Eigen::VectorXd& values,
                           Eigen::MatrixXd& gradients) const {
    Eigen::VectorXd m, dx, dy;
    detail::monomials(kind_, local(x), m, &dx, &dy);
    values.noalias() = coeff_.transpose() * m;
    gradients.resize(2, dim());
    gradients.row(0).noalias() = (coeff_.transpose() * dx).transpose() / scale_.x();
    gradients.row(1).noalias() = (coeff_.transpose() * dy).transpose() / scale_.y();
  }

private:
  Eigen::Vector2d local(const Eigen::Vector2d& x) const {
    return Eigen::Vector2d((x.x() - center_.x()) / scale_.x(), (x.y() - center_.y()) / scale_.y());
  }

  ElementKind kind_;
  Eigen::Vector2d center_;
  Eigen::Vector2d scale_;
  Eigen::MatrixXd coeff_;  // column j = monomial coefficients of basis function j
};

/// Values/gradients of the DOF-dual basis at a reference-cell point.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> shape_eval(ElementKind kind,
                                                              const Eigen::Vector2d& ref_point) {
  CellGeometry geom;
  geom.kind = element_info(kind).cell_kind;
  if (geom.kind == CellKind::Triangle) {
    geom.nv = 3;
    geom.v = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1),
              Eigen::Vector2d(0, 0)};
  } else {
    geom.nv = 4;
    geom.v = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1),
              Eigen::Vector2d(0, 1)};
  }
  const LocalBasis basis = LocalBasis::build(kind, geom);
  Eigen::VectorXd values;
  Eigen::MatrixXd gradients;
  basis.eval_with_gradients(ref_point, values, gradients);
  return {values, gradients};
}

/// Local stiffness and mass matrices on a physical cell; exact integration
/// (degree-4 triangle rule / 3x3 tensor Gauss cover all products that occur).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> local_matrices(ElementKind kind,
                                                                  const CellGeometry& geom) {
  if (element_info(kind).cell_kind != geom.kind)
    throw std::invalid_argument("local_matrices: element/cell shape mismatch");
  const double jac = geom.jacobian();
  if (!(jac > 0.0)) throw std::invalid_argument("local_matrices: degenerate cell");

  const LocalBasis basis = LocalBasis::build(kind, geom);
  const int dim = basis.dim();
  static const QuadratureRule tri_rule = rule_for(CellKind::Triangle, 4);
  static const QuadratureRule rect_rule = rule_for(CellKind::Rectangle, 4);
  const QuadratureRule& rule = geom.kind == CellKind::Triangle ? tri_rule : rect_rule;

  Eigen::MatrixXd stiffness = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd values;
  Eigen::MatrixXd gradients;
  for (int q = 0; q < rule.size(); ++q) {
    const double w = rule.weights[static_cast<size_t>(q)] * jac;
    basis.eval_with_gradients(geom.map(rule.points[static_cast<size_t>(q)]), values, gradients);
    mass.noalias() += w * values * values.transpose();
    stiffness.noalias() += w * gradients.transpose() * gradients;
  }
  return {stiffness, mass};
}

/// Number of global DOFs for (kind, mesh) before boundary constraints.
inline int total_dofs(ElementKind kind, const Mesh& mesh) {
  switch (kind) {
    case ElementKind::P1:
    case ElementKind::Q1: return mesh.n_nodes();
    case ElementKind::P2: return mesh.n_nodes() + mesh.n_edges();
    case ElementKind::Q2: return mesh.n_nodes() + mesh.n_edges() + mesh.n_cells();
    case ElementKind::ECR:
    case ElementKind::EQ1Rot: return mesh.n_edges() + mesh.n_cells();
  }
  throw std::logic_error("total_dofs: unknown kind");
}

inline void require_compatible(ElementKind kind, const Mesh& mesh) {
  if (element_info(kind).cell_kind != mesh.cell_kind)
    throw std::invalid_argument("element kind incompatible with mesh cell kind");
}

/// Global DOF indices of cell c in local DOF order. Conforming kinds number
/// nodes, then edges, then cells; nonconforming kinds number edges, then
/// cells. Shared entities receive the same index from both sides.
inline std::vector<int> dof_map(ElementKind kind, const Mesh& mesh, int c) {
  require_compatible(kind, mesh);
  const ElementInfo& info = element_info(kind);
  const MeshCell& cell = mesh.cells[static_cast<size_t>(c)];
  const bool conf = info.conforming;
  const int edge_offset = conf ? mesh.n_nodes() : 0;
  const int cell_offset = edge_offset + mesh.n_edges();

  std::vector<int> ids;
  ids.reserve(static_cast<size_t>(info.local_dim));
  for (const LocalDof& dof : info.dofs) {
    switch (dof.kind) {
      case DofKind::NodeValue:
        ids.push_back(cell.v[static_cast<size_t>(dof.entity)]);
        break;
      case DofKind::EdgeMean:
      case DofKind::EdgeMidpointValue: {
        auto [a, b] = mesh.cell_side(c, dof.entity);
        ids.push_back(edge_offset + mesh.edge_index(a, b));
        break;
      }
      case DofKind::CellMean:
        ids.push_back(cell_offset + c);
        break;
    }
  }
  return ids;
}

/// DOFs constrained by the homogeneous Dirichlet condition, sorted ascending.
inline std::vector<int> boundary_dofs(ElementKind kind, const Mesh& mesh) {
  require_compatible(kind, mesh);
  const bool conf = element_info(kind).conforming;
  const int edge_offset = conf ? mesh.n_nodes() : 0;

  std::vector<int> out;
  if (conf)
    out = mesh.boundary_nodes();

  const bool has_edge_dofs =
      kind == ElementKind::P2 || kind == ElementKind::Q2 || !conf;
  if (has_edge_dofs)
    for (int e = 0; e < mesh.n_edges(); ++e)
      if (mesh.is_boundary_edge(e)) out.push_back(edge_offset + e);

  std::sort(out.begin(), out.end());
  return out;
}

/// Free (unconstrained) DOF numbering after Dirichlet elimination.
struct FreeDofMap {
  int total = 0;
  std::vector<int> free_index;  // total entries; -1 for constrained DOFs
  std::vector<int> full_index;  // free count entries

  int n_free() const { return static_cast<int>(full_index.size()); }

  static FreeDofMap build(ElementKind kind, const Mesh& mesh) {
    FreeDofMap map;
    map.total = total_dofs(kind, mesh);
    map.free_index.assign(static_cast<size_t>(map.total), 0);
    for (int d : boundary_dofs(kind, mesh)) map.free_index[static_cast<size_t>(d)] = -1;
    for (int d = 0; d < map.total; ++d) {
      if (map.free_index[static_cast<size_t>(d)] == 0) {
        map.free_index[static_cast<size_t>(d)] = map.n_free();
        map.full_index.push_back(d);
      }
    }
    return map;
  }

  Eigen::VectorXd restrict_full(const Eigen::VectorXd& full) const {
    Eigen::VectorXd out(n_free());
    for (int i = 0; i < n_free(); ++i) out(i) = full(full_index[static_cast<size_t>(i)]);
    return out;
  }

  Eigen::VectorXd embed_free(const Eigen::VectorXd& free) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(total);
    for (int i = 0; i < n_free(); ++i) out(full_index[static_cast<size_t>(i)]) = free(i);
    return out;
  }
};

/// Finite element function: coefficients over all global DOFs of (mesh, kind).
/// Fields living in the Dirichlet-constrained space carry zeros there.
struct FieldVector {
  ElementKind kind;
  const Mesh* mesh = nullptr;
  Eigen::VectorXd coeffs;
};

inline FieldVector field_from_free(ElementKind kind, const Mesh& mesh, const FreeDofMap& dofs,
                                   const Eigen::VectorXd& free) {
  return FieldVector{kind, &mesh, dofs.embed_free(free)};
}

/// Evaluator for one FieldVector restricted to one cell.
class CellField {
public:
  CellField(const FieldVector& field, int c)
      : basis_(LocalBasis::build(field.kind, cell_geometry(*field.mesh, c))) {
    const std::vector<int> ids = dof_map(field.kind, *field.mesh, c);
    local_.resize(static_cast<Eigen::Index>(ids.size()));
    for (size_t i = 0; i < ids.size(); ++i) local_(static_cast<Eigen::Index>(i)) = field.coeffs(ids[i]);
  }

  double value(const Eigen::Vector2d& x) const {
    Eigen::VectorXd v;
    basis_.eval(x, v);
    return v.dot(local_);
  }

  Eigen::Vector2d gradient(const Eigen::Vector2d& x) const {
    Eigen::VectorXd v;
    Eigen::MatrixXd g;
    basis_.eval_with_gradients(x, v, g);
    return g * local_;
  }

private:
  LocalBasis basis_;
  Eigen::VectorXd local_;
};

/// Nonconforming interpolation: edge-mean DOFs get the edge averages of u,
/// cell-mean DOFs the cell averages. Reproduces every function of the local
/// space and satisfies the broken-energy orthogonality used by the bounds.
template <typename F>
FieldVector interpolate_nc(ElementKind kind, const Mesh& mesh, F&& u) {
  if (kind != ElementKind::ECR && kind != ElementKind::EQ1Rot)
    throw std::invalid_argument("interpolate_nc: kind must be ECR or EQ1Rot");
  require_compatible(kind, mesh);

  FieldVector field{kind, &mesh, Eigen::VectorXd::Zero(total_dofs(kind, mesh))};
  static const Gauss1D g = gauss_legendre_01(5);
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Eigen::Vector2d a = mesh.nodes[static_cast<size_t>(mesh.edges[static_cast<size_t>(e)].a)];
    const Eigen::Vector2d b = mesh.nodes[static_cast<size_t>(mesh.edges[static_cast<size_t>(e)].b)];
    double mean = 0.0;
    for (size_t q = 0; q < g.nodes.size(); ++q) mean += g.weights[q] * u(a + g.nodes[q] * (b - a));
    field.coeffs(e) = mean;
  }
  const QuadratureRule rule = rule_for(mesh.cell_kind, 8);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellGeometry geom = cell_geometry(mesh, c);
    field.coeffs(mesh.n_edges() + c) = integrate(rule, geom, u) / geom.area();
  }
  return field;
}

}  // namespace eigenclose
