#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eigenclose/assembly.hpp"

namespace eigenclose {

class SpdFactorError : public std::runtime_error {
public:
  SpdFactorError(const std::string& msg, int pivot)
      : std::runtime_error(msg), pivot_index(pivot) {}
  /// First nonpositive pivot, or -1 when the factorization backend does not
  /// expose it (recovered by a dense re-factorization for small systems).
  int pivot_index;
};

class EigsNotConverged : public std::runtime_error {
public:
  EigsNotConverged(const std::string& msg, Eigen::VectorXd residuals)
      : std::runtime_error(msg), best_residuals(std::move(residuals)) {}
  Eigen::VectorXd best_residuals;
};

namespace detail {

inline int locate_bad_pivot_dense(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  for (int j = 0; j < a.cols(); ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) return j;
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < a.rows(); ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  return -1;
}

}  // namespace detail

/// Sparse Cholesky factorization of an SPD matrix, reusable across solves.
class SpdFactor {
public:
  explicit SpdFactor(const SymSparseMatrix& a) : n_(a.size()) {
    const Eigen::SparseMatrix<double> upper = a.to_eigen_upper();
    llt_.compute(upper);
    if (llt_.info() != Eigen::Success) {
      int pivot = -1;
      if (n_ <= 2000) pivot = detail::locate_bad_pivot_dense(a.to_dense());
      throw SpdFactorError(
          "SpdFactor: matrix is not numerically SPD (pivot " + std::to_string(pivot) + ")", pivot);
    }
  }

  int size() const { return n_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

private:
  int n_ = 0;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Upper> llt_;
};

/// Direct solve of A x = rhs for SPD A, with one iterative-refinement step;
/// relative residual <= 1e-12 on the systems this project produces.
inline Eigen::VectorXd solve_spd(const SymSparseMatrix& a, const Eigen::VectorXd& rhs) {
  const SpdFactor factor(a);
  Eigen::VectorXd x = factor.solve(rhs);
  const double rhs_norm = rhs.norm();
  if (rhs_norm > 0.0) {
    const Eigen::VectorXd r = rhs - a * x;
    if (r.norm() > 1e-13 * rhs_norm) x += factor.solve(r);
  }
  return x;
}

/// m smallest generalized eigenpairs, ascending, with B-orthonormal vectors.
struct EigenResult {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // n x m, columns B-orthonormal
  Eigen::VectorXd residuals;     // ||A x - lambda B x|| / ||x||
  int iterations = 0;
};

namespace detail {

// Deterministic portable generator (xorshift64*), uniform on [-1, 1].
class DetRng {
public:
  explicit DetRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double operator()() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    const std::uint64_t r = state_ * 0x2545f4914f6cdd1dull;
    return 2.0 * (static_cast<double>(r >> 11) * 0x1.0p-53) - 1.0;
  }

private:
  std::uint64_t state_;
};

}  // namespace detail

/// Smallest-m eigenpairs of A x = lambda B x (both SPD) by shift-invert block
/// Lanczos at shift 0: the Krylov basis of A^{-1}B is kept B-orthonormal with
/// full reorthogonalization, and Rayleigh-Ritz is applied each block step.
/// Deterministic for a fixed seed.
inline EigenResult eigs_smallest(const SymSparseMatrix& a, const SymSparseMatrix& b, int m,
                                 double tol = 1e-10, std::uint64_t seed = 42) {
  const int n = a.size();
  if (b.size() != n) throw std::invalid_argument("eigs_smallest: dimension mismatch");
  if (m < 1 || m > n) throw std::invalid_argument("eigs_smallest: need 1 <= m <= n");

  const SpdFactor factor(a);
  const int block = std::min(m + 2, n);

  Eigen::MatrixXd basis(n, 0);    // B-orthonormal columns
  Eigen::MatrixXd b_basis(n, 0);  // B * basis
  Eigen::MatrixXd a_basis(n, 0);  // A * basis
  Eigen::MatrixXd interaction(0, 0);

  detail::DetRng rng(seed);
  Eigen::MatrixXd block_vecs(n, block);
  for (int j = 0; j < block; ++j)
    for (int i = 0; i < n; ++i) block_vecs(i, j) = rng();

  EigenResult result;
  const int max_outer = 300;
  for (int outer = 0; outer < max_outer; ++outer) {
    // B-orthogonalize the candidate block against the basis (two passes) and
    // within itself; near-dependent directions are replaced by fresh vectors.
    int accepted = 0;
    Eigen::MatrixXd fresh(n, block_vecs.cols());
    for (int j = 0; j < block_vecs.cols(); ++j) {
      Eigen::VectorXd v = block_vecs.col(j);
      for (int attempt = 0; attempt < 3; ++attempt) {
        for (int pass = 0; pass < 2; ++pass) {
          if (basis.cols() > 0) v.noalias() -= basis * (b_basis.transpose() * v);
          for (int k = 0; k < accepted; ++k)
            v.noalias() -= fresh.col(k) * (b.bilinear_form(fresh.col(k), v));
        }
        const double bn = std::sqrt(std::max(0.0, b.quadratic_form(v)));
        if (bn > 1e-10 * std::sqrt(static_cast<double>(n))) {
          v /= bn;
          fresh.col(accepted++) = v;
          break;
        }
        // breakdown: restart this direction from the generator
        if (basis.cols() + accepted >= n) break;
        for (int i = 0; i < n; ++i) v(i) = rng();
      }
      if (basis.cols() + accepted >= n) break;
    }

    if (accepted > 0) {
      const int k0 = static_cast<int>(basis.cols());
      basis.conservativeResize(Eigen::NoChange, k0 + accepted);
      b_basis.conservativeResize(Eigen::NoChange, k0 + accepted);
      a_basis.conservativeResize(Eigen::NoChange, k0 + accepted);
      for (int j = 0; j < accepted; ++j) {
        basis.col(k0 + j) = fresh.col(j);
        b_basis.col(k0 + j) = b * fresh.col(j);
        a_basis.col(k0 + j) = a * fresh.col(j);
      }
      interaction.conservativeResize(k0 + accepted, k0 + accepted);
      for (int j = 0; j < accepted; ++j) {
        const Eigen::VectorXd col = basis.transpose() * a_basis.col(k0 + j);
        interaction.col(k0 + j) = col;
        interaction.row(k0 + j) = col.transpose();
      }
    }

    const int k = static_cast<int>(basis.cols());
    if (k >= m) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          0.5 * (interaction + interaction.transpose()));
      Eigen::MatrixXd ritz_vecs = basis * es.eigenvectors().leftCols(m);
      Eigen::VectorXd ritz_vals = es.eigenvalues().head(m);
      Eigen::VectorXd res(m);
      for (int j = 0; j < m; ++j) {
        const Eigen::VectorXd x = ritz_vecs.col(j);
        res(j) = (a * x - ritz_vals(j) * (b * x)).norm() / x.norm();
      }
      result.residuals = res;
      if (res.maxCoeff() <= tol || k >= n) {
        if (res.maxCoeff() > tol)
          throw EigsNotConverged("eigs_smallest: subspace exhausted above tolerance", res);
        result.eigenvalues = ritz_vals;
        result.eigenvectors = ritz_vecs;
        result.iterations = outer + 1;
        // sign convention: component of largest magnitude made positive
        for (int j = 0; j < m; ++j) {
          int idx = 0;
          result.eigenvectors.col(j).cwiseAbs().maxCoeff(&idx);
          if (result.eigenvectors(idx, j) < 0.0) result.eigenvectors.col(j) *= -1.0;
        }
        return result;
      }
    }

    if (k >= n) break;

    // next Krylov block: A^{-1} B applied to the newest basis columns
    const int take = std::min(block, k);
    block_vecs.resize(n, take);
    for (int j = 0; j < take; ++j)
      block_vecs.col(j) = factor.solve(b_basis.col(k - take + j));
  }

  throw EigsNotConverged("eigs_smallest: no convergence within iteration cap",
                         result.residuals.size() ? result.residuals : Eigen::VectorXd());
}

/// All eigenpairs of a small dense symmetric pencil A x = lambda B x.
/// Directions where B is numerically singular (eigenvalue <= threshold * max)
/// are dropped; subspace_dim reports the retained dimension.
struct DenseGenEig {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // full-dim coordinates, B-orthonormal
  int subspace_dim = 0;
};

inline DenseGenEig dense_gen_eig(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 double b_threshold = 1e-12) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw std::invalid_argument("dense_gen_eig: shape mismatch");
  const int n = static_cast<int>(a.rows());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> bes(0.5 * (b + b.transpose()));
  const double bmax = bes.eigenvalues().maxCoeff();
  if (!(bmax > 0.0)) throw std::invalid_argument("dense_gen_eig: B is not positive");

  int first_kept = n;
  for (int i = 0; i < n; ++i)
    if (bes.eigenvalues()(i) > b_threshold * bmax) {
      first_kept = i;
      break;
    }
  const int kept = n - first_kept;
  if (kept == 0) throw std::invalid_argument("dense_gen_eig: B numerically zero");

  Eigen::MatrixXd whiten(n, kept);
  for (int i = 0; i < kept; ++i)
    whiten.col(i) =
        bes.eigenvectors().col(first_kept + i) / std::sqrt(bes.eigenvalues()(first_kept + i));

  const Eigen::MatrixXd c = whiten.transpose() * (0.5 * (a + a.transpose())) * whiten;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ces(0.5 * (c + c.transpose()));

  DenseGenEig out;
  out.subspace_dim = kept;
  out.eigenvalues = ces.eigenvalues();
  out.eigenvectors = whiten * ces.eigenvectors();
  return out;
}

}  // namespace eigenclose
