#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catalog.hpp"
#include "mapest/errors.hpp"
#include "mapest/prior.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

using namespace mapest;
using namespace mapest::testing;

namespace {

// independent dense generalized solve: form v = α diag(mass) v
double dense_alpha(const DiscreteOperator& op) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Mat(op.form), Mat(op.mass.asDiagonal()));
  return es.eigenvalues().maxCoeff();
}

DiscreteOperator circle_L(int n, std::function<double(const Vec&)> kappa, const ScalarField* a = nullptr) {
  QuadratureGrid g = build_grid(Manifold::circle(1), n);
  MapDescriptor iota = MapDescriptor::inclusion(g.manifold);
  return assemble_L(ScalarField::from_function(g, std::move(kappa)), cometric(iota, g), a);
}

void check_solution_invariants(const EigenSolution& s, const DiscreteOperator& op) {
  CHECK(s.residual <= 1e-8);
  double norm = 0, integral = 0;
  for (std::size_t i = 0; i < op.size(); ++i) {
    norm += op.grid.weights[i] * s.prior.lambda[i];
    integral += op.grid.weights[i] * s.prior.omega[i];
    CHECK(s.prior.lambda[i] >= 0);
  }
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(integral > 0);
}

}  // namespace

TEST_CASE("constant kappa gives a constant prior") {
  for (double c : {-0.4, 0.5, 3.0}) {
    for (int n : {32, 96}) {
      DiscreteOperator L = circle_L(n, [c](const Vec&) { return c; });
      EigenSolution s = solve_optimal_prior(L);
      CHECK(std::abs(s.alpha - c) <= 1e-10);
      double w0 = 1 / std::sqrt(kTwoPi);
      for (double w : s.prior.omega) CHECK(w == doctest::Approx(w0).epsilon(1e-8));
      check_solution_invariants(s, L);
    }
  }
}

TEST_CASE("sphere identity gives alpha = 2/3") {
  QuadratureGrid g = build_grid(Manifold::sphere(1), 16);
  MapDescriptor id = MapDescriptor::identity(g.manifold);
  DiscreteOperator L = assemble_L(ScalarField::from_values(kappa_field(id, g)), cometric(id, g));
  EigenSolution s = solve_optimal_prior(L);
  CHECK(s.alpha == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  check_solution_invariants(s, L);
  double w0 = 1 / std::sqrt(4 * kPi);
  for (double w : s.prior.omega) CHECK(w == doctest::Approx(w0).epsilon(1e-8));
}

TEST_CASE("perturbed kappa matches the dense oracle") {
  DiscreteOperator L = circle_L(128, [](const Vec& x) { return 0.5 + 0.1 * std::cos(x(0)); });
  EigenSolution s = solve_optimal_prior(L);
  CHECK(std::abs(s.alpha - dense_alpha(L)) <= 1e-8);
  CHECK(s.alpha > 0.5);
  CHECK(s.alpha < 0.6);
  CHECK(s.spectral_gap > 0);
  check_solution_invariants(s, L);
}

TEST_CASE("sparse shift-invert path agrees with the dense path") {
  auto kappa = [](const Vec& x) { return 0.5 + 0.1 * std::cos(x(0)); };
  DiscreteOperator big = circle_L(2048, kappa);
  EigenSolution s = solve_optimal_prior(big);
  CHECK_FALSE(s.dense);
  check_solution_invariants(s, big);
  // Rayleigh quotient of the returned vector is α
  Vec w = Eigen::Map<const Vec>(s.prior.omega.data(), s.prior.omega.size());
  CHECK(big.quadratic(w) / big.inner(w, w) == doctest::Approx(s.alpha).epsilon(1e-10));
  DiscreteOperator small = circle_L(1024, kappa);
  CHECK(solve_optimal_prior(small).dense);
  CHECK(s.alpha == doctest::Approx(solve_optimal_prior(small).alpha).epsilon(1e-6));
}

TEST_CASE("weighted problem with a = 1 reproduces the unweighted one") {
  auto kappa = [](const Vec& x) { return 0.5 + 0.1 * std::cos(x(0)); };
  QuadratureGrid g = build_grid(Manifold::circle(1), 64);
  ScalarField one = ScalarField::constant(g, 1.0);
  DiscreteOperator La = circle_L(64, kappa, &one);
  DiscreteOperator L = circle_L(64, kappa);
  EigenSolution a = solve_weighted_prior(La, one), b = solve_optimal_prior(L);
  CHECK(a.alpha == doctest::Approx(b.alpha).epsilon(1e-12));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(a.prior.lambda[i] == doctest::Approx(b.prior.lambda[i]).epsilon(1e-8));
  CHECK(a.prior.flat_weight.has_value());
}

TEST_CASE("weighted problem matches the dense generalized oracle") {
  QuadratureGrid g = build_grid(Manifold::circle(1), 128);
  ScalarField a = ScalarField::from_function(g, [](const Vec& x) { return std::sqrt(1 + 0.5 * std::cos(x(0))); });
  DiscreteOperator La = circle_L(128, [](const Vec&) { return 0.5; }, &a);
  EigenSolution s = solve_weighted_prior(La, a);
  CHECK(std::abs(s.alpha - dense_alpha(La)) <= 1e-8);
  check_solution_invariants(s, La);
  // ∫a²η² = 1 and λ = a²η²
  double n = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double a2 = a.values[i] * a.values[i];
    CHECK(s.prior.lambda[i] == doctest::Approx(a2 * s.prior.omega[i] * s.prior.omega[i]).epsilon(1e-14));
    n += g.weights[i] * a2 * s.prior.omega[i] * s.prior.omega[i];
  }
  CHECK(n == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("adding a nonnegative bump never lowers alpha") {
  GaussianStream rng(97);
  double base = solve_optimal_prior(circle_L(96, [](const Vec& x) { return 0.5 + 0.1 * std::cos(x(0)); })).alpha;
  for (int k = 0; k < 5; ++k) {
    double c = kTwoPi * rng.uniform(), h = rng.uniform(), w = 0.2 + rng.uniform();
    DiscreteOperator L = circle_L(96, [=](const Vec& x) {
      return 0.5 + 0.1 * std::cos(x(0)) + h * std::exp(-std::pow(wrap_diff(x(0) - c) / w, 2));
    });
    CHECK(solve_optimal_prior(L).alpha >= base - 1e-12);
  }
}

TEST_CASE("alpha converges at second order under grid refinement") {
  auto kappa = [](const Vec& x) { return 0.5 + 0.3 * std::cos(x(0)) + 0.2 * std::sin(2 * x(0)); };
  double a64 = solve_optimal_prior(circle_L(64, kappa)).alpha;
  double a128 = solve_optimal_prior(circle_L(128, kappa)).alpha;
  double a256 = solve_optimal_prior(circle_L(256, kappa)).alpha;
  double a512 = solve_optimal_prior(circle_L(512, kappa)).alpha;
  CAPTURE(a64);
  CAPTURE(a128);
  CAPTURE(a256);
  double order = std::log2(std::abs(a64 - a128) / std::abs(a128 - a256));
  CHECK(order >= 2.0 - 0.1);
  CHECK(std::abs(a256 - a512) < std::abs(a128 - a256));
}

TEST_CASE("minimax report") {
  SUBCASE("circle inclusion is affine in eps^2") {
    QuadratureGrid g = build_grid(Manifold::circle(1), 64);
    MapDescriptor iota = MapDescriptor::inclusion(g.manifold);
    DiscreteOperator L = assemble_L(ScalarField::from_values(kappa_field(iota, g)), cometric(iota, g));
    EigenSolution s = solve_optimal_prior(L);
    MinimaxReport r = minimax_report(s, L, e_density_field(iota, g), {0.1, 0.2});
    CHECK(r.r_theta == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.r_star == r.r_theta);
    CHECK(r.affine);
    CHECK(r.alpha_eps[0] == doctest::Approx(1 + 0.01 * 0.5).epsilon(1e-10));
    CHECK(r.alpha_eps[1] == doctest::Approx(1 + 0.04 * 0.5).epsilon(1e-10));
  }
  SUBCASE("circle power 2") {
    QuadratureGrid g = build_grid(Manifold::circle(1), 64);
    MapDescriptor p2 = MapDescriptor::circle_power(g.manifold, 2);
    DiscreteOperator L = assemble_L(ScalarField::from_values(kappa_field(p2, g)), cometric(p2, g));
    MinimaxReport r = minimax_report(solve_optimal_prior(L), L, e_density_field(p2, g), {0.1});
    CHECK(r.alpha_eps[0] == doctest::Approx(4 + 4 * 0.01).epsilon(1e-9));
  }
  SUBCASE("torus projection has r = 0 under the submersion closed form") {
    QuadratureGrid g = build_grid(Manifold::flat_torus(1, 1), 16);
    MapDescriptor pr = MapDescriptor::torus_to_circle(g.manifold, 0);
    std::vector<double> kz(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) kz[i] = kappa_submersion(pr, g.nodes[i]);
    DiscreteOperator L = assemble_L(ScalarField::from_values(kz), cometric(pr, g));
    EigenSolution s = solve_optimal_prior(L);
    CHECK(std::abs(s.alpha) < 1e-10);
    CHECK(s.integrable_distribution);
  }
  SUBCASE("non-constant energy density uses the H eigensolve") {
    QuadratureGrid g = build_grid(Manifold::torus_of_revolution(2, 1), 12);
    MapDescriptor id = MapDescriptor::identity(g.manifold);
    std::vector<double> e(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) e[i] = 2 + 0.1 * std::cos(g.nodes[i].coords(0));
    DiscreteOperator L = assemble_L(ScalarField::from_values(kappa_field(id, g)), cometric(id, g));
    EigenSolution s = solve_optimal_prior(L);
    MinimaxReport r = minimax_report(s, L, e, {0.1});
    CHECK_FALSE(r.affine);
    CHECK(r.alpha_eps[0] == doctest::Approx(dense_alpha(assemble_H(L, e, 0.1))).epsilon(1e-10));
  }
}

TEST_CASE("prior constructors normalize") {
  QuadratureGrid g = build_grid(Manifold::sphere(1), 12);
  PriorDensity u = uniform_prior(g);
  CHECK(u.lambda_at(g.nodes[3].coords) == doctest::Approx(1 / (4 * kPi)));
  PriorDensity f = prior_from_function(g, [](const Vec& x) { return 2 + std::cos(x(0)); });
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * f.lambda[i];
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(prior_from_function(g, [](const Vec&) { return -1.0; }), PriorError);
  CHECK_THROWS_AS(prior_from_values(g, std::vector<double>(3, 1.0)), GridMismatchError);
  PriorDensity v = prior_from_values(g, std::vector<double>(g.size(), 5.0));
  CHECK(v.lambda[0] == doctest::Approx(1 / (4 * kPi)));
}
