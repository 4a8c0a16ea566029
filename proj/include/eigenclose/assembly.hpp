#pragma once

#include <Eigen/Sparse>

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "eigenclose/elements.hpp"
#include "eigenclose/mesh.hpp"
#include "eigenclose/quadrature.hpp"

namespace eigenclose {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Symmetric sparse matrix; the upper triangle (incl. diagonal) is stored in
/// CSR. Symmetric by construction — only (row <= col) entries ever exist.
class SymSparseMatrix {
public:
  SymSparseMatrix() = default;

  static SymSparseMatrix from_triplets(int n, std::vector<Triplet> triplets) {
    for (const Triplet& t : triplets)
      if (t.row > t.col) throw std::invalid_argument("SymSparseMatrix: lower-triangle triplet");
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SymSparseMatrix m;
    m.n_ = n;
    m.row_ptr_.assign(static_cast<size_t>(n) + 1, 0);
    for (size_t i = 0; i < triplets.size();) {
      size_t j = i;
      double sum = 0.0;
      while (j < triplets.size() && triplets[j].row == triplets[i].row &&
             triplets[j].col == triplets[i].col)
        sum += triplets[j++].value;
      m.col_.push_back(triplets[i].col);
      m.val_.push_back(sum);
      ++m.row_ptr_[static_cast<size_t>(triplets[i].row) + 1];
      i = j;
    }
    for (int r = 0; r < n; ++r) m.row_ptr_[static_cast<size_t>(r) + 1] += m.row_ptr_[static_cast<size_t>(r)];
    return m;
  }

  int size() const { return n_; }
  int nnz_stored() const { return static_cast<int>(val_.size()); }

  void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.setZero(n_);
    for (int r = 0; r < n_; ++r) {
      for (int k = row_ptr_[static_cast<size_t>(r)]; k < row_ptr_[static_cast<size_t>(r) + 1]; ++k) {
        const int c = col_[static_cast<size_t>(k)];
        const double v = val_[static_cast<size_t>(k)];
        y(r) += v * x(c);
        if (c != r) y(c) += v * x(r);
      }
    }
  }

  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    multiply(x, y);
    return y;
  }

  double quadratic_form(const Eigen::VectorXd& x) const {
    double diag = 0.0, off = 0.0;
    for (int r = 0; r < n_; ++r) {
      for (int k = row_ptr_[static_cast<size_t>(r)]; k < row_ptr_[static_cast<size_t>(r) + 1]; ++k) {
        const int c = col_[static_cast<size_t>(k)];
        const double v = val_[static_cast<size_t>(k)];
        if (c == r)
          diag += v * x(r) * x(r);
        else
          off += v * x(r) * x(c);
      }
    }
    return diag + 2.0 * off;
  }

  double bilinear_form(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    return x.dot((*this) * y);
  }

  /// Upper-triangle view as an Eigen sparse matrix.
  Eigen::SparseMatrix<double> to_eigen_upper() const {
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(val_.size());
    for (int r = 0; r < n_; ++r)
      for (int k = row_ptr_[static_cast<size_t>(r)]; k < row_ptr_[static_cast<size_t>(r) + 1]; ++k)
        ts.emplace_back(r, col_[static_cast<size_t>(k)], val_[static_cast<size_t>(k)]);
    Eigen::SparseMatrix<double> m(n_, n_);
    m.setFromTriplets(ts.begin(), ts.end());
    return m;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
    for (int r = 0; r < n_; ++r)
      for (int k = row_ptr_[static_cast<size_t>(r)]; k < row_ptr_[static_cast<size_t>(r) + 1]; ++k) {
        const int c = col_[static_cast<size_t>(k)];
        m(r, c) = val_[static_cast<size_t>(k)];
        m(c, r) = val_[static_cast<size_t>(k)];
      }
    return m;
  }

  /// Coordinate text dump of the stored (upper) entries, one per line.
  void write_coordinate(std::ostream& os) const {
    char buf[96];
    for (int r = 0; r < n_; ++r)
      for (int k = row_ptr_[static_cast<size_t>(r)]; k < row_ptr_[static_cast<size_t>(r) + 1]; ++k) {
        std::snprintf(buf, sizeof buf, "%d %d %.17g\n", r, col_[static_cast<size_t>(k)],
                      val_[static_cast<size_t>(k)]);
        os << buf;
      }
  }

private:
  int n_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> col_;
  std::vector<double> val_;
};

struct AssembledSystem {
  SymSparseMatrix stiffness;
  SymSparseMatrix mass;
  FreeDofMap dofs;
};

namespace detail {

inline AssembledSystem assemble_impl(const Mesh& mesh, ElementKind kind, bool eliminate_dirichlet,
                                     const std::vector<int>* cell_order) {
  require_compatible(kind, mesh);

  FreeDofMap dofs;
  if (eliminate_dirichlet) {
    dofs = FreeDofMap::build(kind, mesh);
    if (dofs.n_free() == 0)
      throw std::runtime_error("assemble: no free DOFs (mesh too coarse for this element)");
  } else {
    dofs.total = total_dofs(kind, mesh);
    dofs.free_index.resize(static_cast<size_t>(dofs.total));
    dofs.full_index.resize(static_cast<size_t>(dofs.total));
    std::iota(dofs.free_index.begin(), dofs.free_index.end(), 0);
    std::iota(dofs.full_index.begin(), dofs.full_index.end(), 0);
  }

  std::vector<Triplet> ta, tb;
  const size_t ld = static_cast<size_t>(element_info(kind).local_dim);
  ta.reserve(mesh.cells.size() * ld * ld);
  tb.reserve(mesh.cells.size() * ld * ld);

  for (int cc = 0; cc < mesh.n_cells(); ++cc) {
    const int c = cell_order ? (*cell_order)[static_cast<size_t>(cc)] : cc;
    const auto [a_loc, b_loc] = local_matrices(kind, cell_geometry(mesh, c));
    const std::vector<int> ids = dof_map(kind, mesh, c);
    for (size_t i = 0; i < ids.size(); ++i) {
      const int gi = dofs.free_index[static_cast<size_t>(ids[i])];
      if (gi < 0) continue;
      for (size_t j = 0; j < ids.size(); ++j) {
        const int gj = dofs.free_index[static_cast<size_t>(ids[j])];
        if (gj < 0 || gi > gj) continue;
        ta.push_back({gi, gj, a_loc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
        tb.push_back({gi, gj, b_loc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
      }
    }
  }

  AssembledSystem sys;
  sys.stiffness = SymSparseMatrix::from_triplets(dofs.n_free(), std::move(ta));
  sys.mass = SymSparseMatrix::from_triplets(dofs.n_free(), std::move(tb));
  sys.dofs = std::move(dofs);
  return sys;
}

}  // namespace detail

/// Stiffness and mass over free DOFs; Dirichlet DOFs eliminated exactly
/// (row/column deletion, no penalty).
inline AssembledSystem assemble(const Mesh& mesh, ElementKind kind) {
  return detail::assemble_impl(mesh, kind, true, nullptr);
}

/// Unconstrained variant (all DOFs kept); the stiffness kernel is then the
/// constants.
inline AssembledSystem assemble_full(const Mesh& mesh, ElementKind kind) {
  return detail::assemble_impl(mesh, kind, false, nullptr);
}

/// Rectangular sparse coupling M[i][j] = b(phi_i^C, psi_j^NC) over the free
/// DOFs of the conforming (rows) and nonconforming (columns) spaces.
class MixedMass {
public:
  MixedMass() = default;

  static MixedMass from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    MixedMass m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_.assign(static_cast<size_t>(rows) + 1, 0);
    for (size_t i = 0; i < triplets.size();) {
      size_t j = i;
      double sum = 0.0;
      while (j < triplets.size() && triplets[j].row == triplets[i].row &&
             triplets[j].col == triplets[i].col)
        sum += triplets[j++].value;
      m.col_.push_back(triplets[i].col);
      m.val_.push_back(sum);
      ++m.row_ptr_[static_cast<size_t>(triplets[i].row) + 1];
      i = j;
    }
    for (int r = 0; r < rows; ++r)
      m.row_ptr_[static_cast<size_t>(r) + 1] += m.row_ptr_[static_cast<size_t>(r)];
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// y = M x with x over nonconforming free DOFs.
  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(rows_);
    for (int r = 0; r < rows_; ++r)
      for (int k = row_ptr_[static_cast<size_t>(r)]; k < row_ptr_[static_cast<size_t>(r) + 1]; ++k)
        y(r) += val_[static_cast<size_t>(k)] * x(col_[static_cast<size_t>(k)]);
    return y;
  }

private:
  int rows_ = 0, cols_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> col_;
  std::vector<double> val_;
};

inline MixedMass assemble_mixed_mass(const Mesh& mesh, ElementKind c_kind, ElementKind nc_kind,
                                     bool eliminate_dirichlet = true) {
  require_compatible(c_kind, mesh);
  require_compatible(nc_kind, mesh);
  if (!element_info(c_kind).conforming || element_info(nc_kind).conforming)
    throw std::invalid_argument("assemble_mixed_mass: expects (conforming, nonconforming)");

  auto dof_set = [&](ElementKind kind) {
    if (eliminate_dirichlet) return FreeDofMap::build(kind, mesh);
    FreeDofMap map;
    map.total = total_dofs(kind, mesh);
    map.free_index.resize(static_cast<size_t>(map.total));
    map.full_index.resize(static_cast<size_t>(map.total));
    std::iota(map.free_index.begin(), map.free_index.end(), 0);
    std::iota(map.full_index.begin(), map.full_index.end(), 0);
    return map;
  };
  const FreeDofMap cdofs = dof_set(c_kind);
  const FreeDofMap ncdofs = dof_set(nc_kind);
  const QuadratureRule rule = rule_for(mesh.cell_kind, 4);

  std::vector<Triplet> ts;
  Eigen::VectorXd cv, nv;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellGeometry geom = cell_geometry(mesh, c);
    const LocalBasis cb = LocalBasis::build(c_kind, geom);
    const LocalBasis nb = LocalBasis::build(nc_kind, geom);
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(cb.dim(), nb.dim());
    const double jac = geom.jacobian();
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Vector2d x = geom.map(rule.points[static_cast<size_t>(q)]);
      cb.eval(x, cv);
      nb.eval(x, nv);
      local.noalias() += (rule.weights[static_cast<size_t>(q)] * jac) * cv * nv.transpose();
    }
    const std::vector<int> cids = dof_map(c_kind, mesh, c);
    const std::vector<int> nids = dof_map(nc_kind, mesh, c);
    for (size_t i = 0; i < cids.size(); ++i) {
      const int gi = cdofs.free_index[static_cast<size_t>(cids[i])];
      if (gi < 0) continue;
      for (size_t j = 0; j < nids.size(); ++j) {
        const int gj = ncdofs.free_index[static_cast<size_t>(nids[j])];
        if (gj < 0) continue;
        ts.push_back({gi, gj, local(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
      }
    }
  }
  return MixedMass::from_triplets(cdofs.n_free(), ncdofs.n_free(), std::move(ts));
}

}  // namespace eigenclose
