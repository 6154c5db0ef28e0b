#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catalog.hpp"
#include "mapest/subriemannian.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace mapest;
using namespace mapest::testing;

namespace {

Vec nodal(const QuadratureGrid& g, const std::function<double(const Vec&)>& f) {
  Vec v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v(i) = f(g.nodes[i].coords);
  return v;
}

}  // namespace

TEST_CASE("riemannian cometric of the identity is the inverse metric") {
  QuadratureGrid g = build_grid(Manifold::torus_of_revolution(2, 1), 12);
  CometricField a = cometric(MapDescriptor::identity(g.manifold), g), b = riemannian_cometric(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK((a.mu[i] - b.mu[i]).norm() < 1e-12);
    CHECK((a.mu[i] - metric_at(g.nodes[i]).inverse()).norm() < 1e-12);
    CHECK(a.rank[i] == 2);
  }
}

TEST_CASE("torus projection has a rank-one cometric") {
  QuadratureGrid g = build_grid(Manifold::flat_torus(1, 1), 12);
  CometricField mu = cometric(MapDescriptor::torus_to_circle(g.manifold, 0), g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(mu.rank[i] == 1);
    CHECK(mu.mu[i](0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(mu.mu[i](1, 1)) < 1e-14);
  }
}

TEST_CASE("sublaplacian is symmetric, semidefinite and kills constants") {
  for (const auto& m : {Manifold::circle(1), Manifold::sphere(1), Manifold::torus_of_revolution(2, 1)}) {
    CAPTURE(m.name());
    QuadratureGrid g = build_grid(m, 16);
    DiscreteOperator D = sublaplacian(riemannian_cometric(g));
    Mat K(D.form);
    CHECK((K - K.transpose()).norm() < 1e-12 * K.norm());
    CHECK((K * Vec::Ones(g.size())).norm() < 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat> es(K);
    CHECK(es.eigenvalues().minCoeff() > -1e-10 * K.norm());
  }
}

TEST_CASE("fiber functions are annihilated under the torus projection") {
  QuadratureGrid g = build_grid(Manifold::flat_torus(1, 1), 24);
  DiscreteOperator D = sublaplacian(cometric(MapDescriptor::torus_to_circle(g.manifold, 0), g));
  Vec f = nodal(g, [](const Vec& x) { return std::cos(x(1)) + 0.3 * std::sin(2 * x(1)); });
  CHECK(D.apply(f).cwiseAbs().maxCoeff() <= 1e-10);
  // horizontal directions are differentiated: Δ cos θ1 = cos θ1 up to O(h²)
  Vec h = nodal(g, [](const Vec& x) { return std::cos(x(0)); });
  CHECK((D.apply(h) - h).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("Dirichlet energy of smooth fields converges at second order") {
  struct Case {
    Manifold m;
    std::function<double(const Vec&)> f;
    double exact;
  };
  // ∫|cos'|² = π on circle(1); ∫|∇ cos u|² = 8π/3 on the unit sphere
  for (const auto& c : {Case{Manifold::circle(1), [](const Vec& x) { return std::cos(x(0)); }, kPi},
                        Case{Manifold::sphere(1), [](const Vec& x) { return std::cos(x(0)); }, 8 * kPi / 3}}) {
    CAPTURE(c.m.name());
    double err[3];
    int n[3] = {16, 32, 64};
    for (int k = 0; k < 3; ++k) {
      QuadratureGrid g = build_grid(c.m, n[k]);
      DiscreteOperator D = sublaplacian(riemannian_cometric(g));
      Vec u = nodal(g, c.f);
      err[k] = std::abs(D.dirichlet(u) - c.exact);
    }
    CAPTURE(err[0]);
    CAPTURE(err[1]);
    CAPTURE(err[2]);
    CHECK(std::log2(err[1] / err[2]) >= 1.8);
  }
}

TEST_CASE("L with constant kappa acts on constants by kappa") {
  QuadratureGrid g = build_grid(Manifold::sphere(1), 12);
  DiscreteOperator L = assemble_L(ScalarField::constant(g, 0.7), riemannian_cometric(g));
  CHECK((L.apply(Vec::Ones(g.size())) - Vec::Constant(g.size(), 0.7)).norm() < 1e-10);
  CHECK(L.kind == OperatorKind::L);
}

TEST_CASE("weighted potential adds |d log a|^2") {
  QuadratureGrid g = build_grid(Manifold::circle(1), 128);
  MapDescriptor iota = MapDescriptor::inclusion(g.manifold);
  ScalarField kappa = ScalarField::from_values(kappa_field(iota, g));
  ScalarField a = ScalarField::from_function(g, [](const Vec& x) { return std::sqrt(1 + 0.5 * std::cos(x(0))); });
  std::vector<double> ka = weighted_potential(kappa, cometric(iota, g), a);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double t = g.nodes[i].coords(0);
    double dlog = -0.25 * std::sin(t) / (1 + 0.5 * std::cos(t));
    CHECK(ka[i] == doctest::Approx(kappa.values[i] + dlog * dlog).epsilon(1e-8).scale(1));
  }
  DiscreteOperator La = assemble_L(kappa, cometric(iota, g), &a);
  CHECK(La.kind == OperatorKind::L_a);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(La.potential(i) == doctest::Approx(ka[i]).epsilon(1e-12));
}

TEST_CASE("H adds the energy density to eps^2 L") {
  QuadratureGrid g = build_grid(Manifold::circle(1), 32);
  MapDescriptor gamma = MapDescriptor::circle_power(g.manifold, 2);
  DiscreteOperator L = assemble_L(ScalarField::from_values(kappa_field(gamma, g)), cometric(gamma, g));
  std::vector<double> e = e_density_field(gamma, g);
  DiscreteOperator H = assemble_H(L, e, 0.1);
  CHECK(H.kind == OperatorKind::H);
  CHECK(*H.epsilon == 0.1);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(H.potential(i) == doctest::Approx(4 + 0.01 * 4).epsilon(1e-8));
  Vec u = Vec::LinSpaced(g.size(), -1, 2);
  CHECK(H.quadratic(u) == doctest::Approx(0.01 * L.quadratic(u) + (u.cwiseProduct(u).cwiseProduct(L.mass)).sum() * 4));
}
