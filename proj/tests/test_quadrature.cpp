#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "eigenclose/mesh.hpp"
#include "eigenclose/quadrature.hpp"
#include "test_support.hpp"

using namespace eigenclose;

namespace {

double apply(const QuadratureRule& rule, int a, int b) {
  double sum = 0.0;
  for (int q = 0; q < rule.size(); ++q)
    sum += rule.weights[size_t(q)] * std::pow(rule.points[size_t(q)].x(), a) *
           std::pow(rule.points[size_t(q)].y(), b);
  return sum;
}

}  // namespace

TEST(Quadrature, TriangleMonomialExactness) {
  for (int degree : {0, 1, 2, 3, 4, 5, 6, 7, 8}) {
    const QuadratureRule rule = rule_for(CellKind::Triangle, degree);
    ASSERT_GE(rule.exact_degree, degree);
    for (int a = 0; a + 0 <= rule.exact_degree; ++a)
      for (int b = 0; a + b <= rule.exact_degree; ++b) {
        const double exact = test_support::triangle_monomial_integral(a, b);
        EXPECT_NEAR(apply(rule, a, b), exact, 1e-14 * std::max(1.0, std::abs(exact)) + 1e-16)
            << "degree=" << degree << " a=" << a << " b=" << b;
      }
  }
}

TEST(Quadrature, RectangleMonomialExactness) {
  for (int degree : {0, 1, 2, 3, 4, 5, 6, 7, 8}) {
    const QuadratureRule rule = rule_for(CellKind::Rectangle, degree);
    ASSERT_GE(rule.exact_degree, degree);
    for (int a = 0; a <= rule.exact_degree; ++a)
      for (int b = 0; b <= rule.exact_degree; ++b) {
        const double exact = 1.0 / ((a + 1.0) * (b + 1.0));
        EXPECT_NEAR(apply(rule, a, b), exact, 1e-14) << "degree=" << degree << " a=" << a;
      }
  }
}

TEST(Quadrature, WeightsPositiveAndSumToMeasure) {
  for (CellKind kind : {CellKind::Triangle, CellKind::Rectangle})
    for (int degree = 0; degree <= 8; ++degree) {
      const QuadratureRule rule = rule_for(kind, degree);
      double sum = 0.0;
      for (double w : rule.weights) {
        EXPECT_GT(w, 0.0);
        sum += w;
      }
      EXPECT_NEAR(sum, kind == CellKind::Triangle ? 0.5 : 1.0, 1e-14);
    }
}

TEST(Quadrature, RuleShapes) {
  EXPECT_EQ(rule_for(CellKind::Triangle, 1).size(), 1);  // centroid
  EXPECT_EQ(rule_for(CellKind::Triangle, 1).points[0], Eigen::Vector2d(1.0 / 3, 1.0 / 3));
  EXPECT_EQ(rule_for(CellKind::Rectangle, 3).size(), 4);  // 2x2 tensor Gauss
  EXPECT_EQ(rule_for(CellKind::Triangle, 4).size(), 6);
  // x^2 y^2 exactly integrated by the 6-point rule
  EXPECT_NEAR(apply(rule_for(CellKind::Triangle, 4), 2, 2),
              test_support::triangle_monomial_integral(2, 2), 1e-16);
  EXPECT_THROW(rule_for(CellKind::Triangle, 9), std::invalid_argument);
  EXPECT_THROW(rule_for(CellKind::Rectangle, -1), std::invalid_argument);
}

TEST(Quadrature, GaussLegendreExactness) {
  for (int k = 1; k <= 6; ++k) {
    const Gauss1D g = gauss_legendre_01(k);
    for (int d = 0; d <= 2 * k - 1; ++d) {
      double sum = 0.0;
      for (size_t i = 0; i < g.nodes.size(); ++i) sum += g.weights[i] * std::pow(g.nodes[i], d);
      EXPECT_NEAR(sum, 1.0 / (d + 1.0), 1e-14) << "k=" << k << " d=" << d;
    }
  }
}

TEST(Quadrature, IntegrateConstantsAndLinear) {
  test_support::Rng rng(7);
  // arbitrary triangle
  CellGeometry tri;
  tri.kind = CellKind::Triangle;
  tri.nv = 3;
  tri.v = {Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.9, 0.3), Eigen::Vector2d(0.4, 1.1),
           Eigen::Vector2d(0, 0)};
  const QuadratureRule trule = rule_for(CellKind::Triangle, 2);
  EXPECT_NEAR(integrate(trule, tri, [](const Eigen::Vector2d&) { return 1.0; }), tri.area(),
              1e-14);

  CellGeometry sq = test_support::reference_cell(CellKind::Rectangle);
  const QuadratureRule rrule = rule_for(CellKind::Rectangle, 3);
  EXPECT_NEAR(integrate(rrule, sq, [](const Eigen::Vector2d& x) { return x.x(); }), 0.5, 1e-15);
}

TEST(Quadrature, CompositeSineProduct) {
  // int_{(0,1)^2} sin(pi x) sin(pi y) = 4 / pi^2
  const double exact = 4.0 / (std::numbers::pi * std::numbers::pi);
  for (CellKind kind : {CellKind::Rectangle, CellKind::Triangle}) {
    const Mesh mesh = build_mesh(DomainKind::UnitSquare, kind, 8);
    const double value = integrate_mesh(mesh, 4, [](const Eigen::Vector2d& x) {
      return std::sin(std::numbers::pi * x.x()) * std::sin(std::numbers::pi * x.y());
    });
    EXPECT_NEAR(value, exact, 1e-6);
  }
}

TEST(Quadrature, DegenerateCellRejected) {
  CellGeometry bad;
  bad.kind = CellKind::Triangle;
  bad.nv = 3;
  bad.v = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), Eigen::Vector2d(2, 2),
           Eigen::Vector2d(0, 0)};
  const QuadratureRule rule = rule_for(CellKind::Triangle, 2);
  EXPECT_THROW(integrate(rule, bad, [](const Eigen::Vector2d&) { return 1.0; }),
               std::invalid_argument);
}
