#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "eigenclose/assembly.hpp"
#include "eigenclose/solve.hpp"
#include "test_support.hpp"

using namespace eigenclose;

namespace {

SymSparseMatrix diagonal_matrix(const Eigen::VectorXd& d) {
  std::vector<Triplet> ts;
  for (int i = 0; i < d.size(); ++i) ts.push_back({i, i, d(i)});
  return SymSparseMatrix::from_triplets(static_cast<int>(d.size()), std::move(ts));
}

}  // namespace

TEST(Solve, DiagonalSystem) {
  Eigen::VectorXd d(4);
  d << 2, 3, 5, 7;
  Eigen::VectorXd rhs(4);
  rhs << 2, 6, 10, 21;
  const Eigen::VectorXd x = solve_spd(diagonal_matrix(d), rhs);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(x(i), rhs(i) / d(i), 1e-14);
}

TEST(Solve, OneByOne) {
  Eigen::VectorXd d(1);
  d << 8.0 / 3.0;
  Eigen::VectorXd rhs(1);
  rhs << 1.0;
  EXPECT_NEAR(solve_spd(diagonal_matrix(d), rhs)(0), 3.0 / 8.0, 1e-15);
}

TEST(Solve, AssembledSystemResidual) {
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Rectangle, 8);
  const AssembledSystem sys = assemble(mesh, ElementKind::Q1);
  test_support::Rng rng(37);
  Eigen::VectorXd rhs(sys.stiffness.size());
  for (int i = 0; i < rhs.size(); ++i) rhs(i) = rng.uniform();
  const Eigen::VectorXd x = solve_spd(sys.stiffness, rhs);
  EXPECT_LE((rhs - sys.stiffness * x).norm(), 1e-12 * rhs.norm());
}

TEST(Solve, NonSpdReportsPivot) {
  Eigen::VectorXd d(3);
  d << 1.0, -1.0, 2.0;
  try {
    solve_spd(diagonal_matrix(d), Eigen::VectorXd::Ones(3));
    FAIL() << "expected SpdFactorError";
  } catch (const SpdFactorError& e) {
    EXPECT_EQ(e.pivot_index, 1);
  }
}

TEST(Eigs, CoarsestQ1IsTwentyFour) {
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Rectangle, 2);
  const AssembledSystem sys = assemble(mesh, ElementKind::Q1);
  const EigenResult result = eigs_smallest(sys.stiffness, sys.mass, 1);
  EXPECT_NEAR(result.eigenvalues(0), 24.0, 1e-10);
}

TEST(Eigs, DenseOracleOnSmallSystems) {
  // every square system with <= 200 free DOFs
  struct Case {
    CellKind cells;
    ElementKind kind;
  };
  for (const auto& [cells, kind] : {Case{CellKind::Rectangle, ElementKind::Q1},
                                    Case{CellKind::Rectangle, ElementKind::EQ1Rot},
                                    Case{CellKind::Rectangle, ElementKind::Q2},
                                    Case{CellKind::Triangle, ElementKind::P1},
                                    Case{CellKind::Triangle, ElementKind::P2},
                                    Case{CellKind::Triangle, ElementKind::ECR}}) {
    for (int n = 2; n <= 16; ++n) {
      const Mesh mesh = build_mesh(DomainKind::UnitSquare, cells, n);
      if (FreeDofMap::build(kind, mesh).n_free() > 200) break;
      const AssembledSystem sys = assemble(mesh, kind);
      const int m = std::min(6, sys.stiffness.size());
      const EigenResult result = eigs_smallest(sys.stiffness, sys.mass, m, 1e-11, 42);
      const Eigen::VectorXd oracle = test_support::dense_oracle_eigenvalues(sys.stiffness, sys.mass);
      for (int j = 0; j < m; ++j)
        EXPECT_NEAR(result.eigenvalues(j), oracle(j), 1e-9 * std::abs(oracle(j)))
            << element_name(kind) << " n=" << n << " j=" << j;
    }
  }
}

TEST(Eigs, Invariants) {
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Rectangle, 6);
  const AssembledSystem sys = assemble(mesh, ElementKind::EQ1Rot);
  const int m = 6;
  const EigenResult result = eigs_smallest(sys.stiffness, sys.mass, m);

  for (int j = 1; j < m; ++j) EXPECT_GE(result.eigenvalues(j), result.eigenvalues(j - 1));
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double bij = sys.mass.bilinear_form(result.eigenvectors.col(i), result.eigenvectors.col(j));
      EXPECT_NEAR(bij, i == j ? 1.0 : 0.0, 1e-8);
    }
    EXPECT_LE(result.residuals(i), 1e-10);
    // sign convention: largest-magnitude component positive
    int idx = 0;
    result.eigenvectors.col(i).cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(result.eigenvectors(idx, i), 0.0);
  }
  EXPECT_GT(result.iterations, 0);
}

TEST(Eigs, StableUnderLargerBlock) {
  // asking for more pairs enlarges the block; the shared eigenvalues agree
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Triangle, 6);
  const AssembledSystem sys = assemble(mesh, ElementKind::ECR);
  const EigenResult small = eigs_smallest(sys.stiffness, sys.mass, 3, 1e-11);
  const EigenResult large = eigs_smallest(sys.stiffness, sys.mass, 8, 1e-11);
  for (int j = 0; j < 3; ++j)
    EXPECT_NEAR(small.eigenvalues(j), large.eigenvalues(j), 1e-9 * small.eigenvalues(j));
}

TEST(Eigs, Deterministic) {
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Rectangle, 5);
  const AssembledSystem sys = assemble(mesh, ElementKind::EQ1Rot);
  const EigenResult a = eigs_smallest(sys.stiffness, sys.mass, 4, 1e-10, 123);
  const EigenResult b = eigs_smallest(sys.stiffness, sys.mass, 4, 1e-10, 123);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
}

TEST(Eigs, ConformingMinMaxMonotoneUnderRefinement) {
  for (auto [cells, kind] : {std::pair{CellKind::Rectangle, ElementKind::Q1},
                             std::pair{CellKind::Triangle, ElementKind::P1}}) {
    Mesh mesh = build_mesh(DomainKind::UnitSquare, cells, 4);
    Eigen::VectorXd prev;
    for (int level = 0; level < 3; ++level) {
      const AssembledSystem sys = assemble(mesh, kind);
      const EigenResult result = eigs_smallest(sys.stiffness, sys.mass, 6, 1e-10);
      if (prev.size() > 0) {
        for (int j = 0; j < 6; ++j) EXPECT_GE(prev(j) + 1e-9, result.eigenvalues(j));
      }
      prev = result.eigenvalues;
      mesh = refine_uniform(mesh);
    }
  }
}

TEST(Eigs, NonConvergenceCarriesResiduals) {
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Rectangle, 4);
  const AssembledSystem sys = assemble(mesh, ElementKind::Q1);
  try {
    eigs_smallest(sys.stiffness, sys.mass, 2, 1e-30);
    FAIL() << "expected EigsNotConverged";
  } catch (const EigsNotConverged& e) {
    ASSERT_EQ(e.best_residuals.size(), 2);
    EXPECT_GT(e.best_residuals.maxCoeff(), 0.0);
    EXPECT_LT(e.best_residuals.maxCoeff(), 1e-8);  // it did converge to roundoff
  }
}

TEST(DenseGenEig, OneByOneAndDiagonal) {
  Eigen::MatrixXd a(1, 1), b(1, 1);
  a << 6.0;
  b << 2.0;
  EXPECT_NEAR(dense_gen_eig(a, b).eigenvalues(0), 3.0, 1e-14);

  Eigen::MatrixXd ad = Eigen::Vector3d(6, 2, 12).asDiagonal();
  Eigen::MatrixXd bd = Eigen::Vector3d(2, 1, 3).asDiagonal();
  const DenseGenEig result = dense_gen_eig(ad, bd);
  EXPECT_NEAR(result.eigenvalues(0), 2.0, 1e-13);
  EXPECT_NEAR(result.eigenvalues(1), 3.0, 1e-13);
  EXPECT_NEAR(result.eigenvalues(2), 4.0, 1e-13);
}

TEST(DenseGenEig, CharacteristicPolynomialOracle) {
  // roots of det(A - lambda B) for a random SPD 3x3 pair, via the companion
  // matrix of the cubic (independent of the symmetric solver path)
  test_support::Rng rng(41);
  Eigen::MatrixXd r(3, 3), s(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      r(i, j) = rng.uniform();
      s(i, j) = rng.uniform();
    }
  const Eigen::MatrixXd a = r * r.transpose() + 0.5 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::MatrixXd b = s * s.transpose() + Eigen::MatrixXd::Identity(3, 3);

  // p(t) = det(A - t B) is cubic; sample at 4 points and solve for coefficients
  Eigen::Matrix4d vand;
  Eigen::Vector4d pv;
  const double ts[4] = {0.0, 1.0, -1.0, 2.0};
  for (int k = 0; k < 4; ++k) {
    for (int d = 0; d < 4; ++d) vand(k, d) = std::pow(ts[k], d);
    pv(k) = (a - ts[k] * b).determinant();
  }
  const Eigen::Vector4d coeff = vand.fullPivLu().solve(pv);  // c0 + c1 t + c2 t^2 + c3 t^3
  Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
  companion(1, 0) = companion(2, 1) = 1.0;
  companion(0, 2) = -coeff(0) / coeff(3);
  companion(1, 2) = -coeff(1) / coeff(3);
  companion(2, 2) = -coeff(2) / coeff(3);
  Eigen::EigenSolver<Eigen::Matrix3d> roots(companion);
  std::vector<double> oracle;
  for (int k = 0; k < 3; ++k) oracle.push_back(roots.eigenvalues()(k).real());
  std::sort(oracle.begin(), oracle.end());

  const DenseGenEig result = dense_gen_eig(a, b);
  ASSERT_EQ(result.subspace_dim, 3);
  for (int k = 0; k < 3; ++k)
    EXPECT_NEAR(result.eigenvalues(k), oracle[size_t(k)], 1e-10 * std::abs(oracle[size_t(k)]));

  // B-orthonormal vectors
  const Eigen::MatrixXd gram = result.eigenvectors.transpose() * b * result.eigenvectors;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DenseGenEig, NearSingularBTruncates) {
  Eigen::MatrixXd a = Eigen::Vector3d(2, 3, 4).asDiagonal();
  Eigen::MatrixXd b = Eigen::Vector3d(1, 1, 1e-16).asDiagonal();
  const DenseGenEig result = dense_gen_eig(a, b);
  EXPECT_EQ(result.subspace_dim, 2);
  EXPECT_NEAR(result.eigenvalues(0), 2.0, 1e-13);
  EXPECT_NEAR(result.eigenvalues(1), 3.0, 1e-13);
}
