#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "catalog.hpp"
#include "mapest/errors.hpp"

#include <cmath>

using namespace mapest;
using namespace mapest::testing;

TEST_CASE("descriptor validation") {
  CHECK_THROWS_AS(Manifold::circle(0.0), DomainError);
  CHECK_THROWS_AS(Manifold::sphere(-1.0), DomainError);
  CHECK_THROWS_AS(Manifold::torus_of_revolution(1.0, 1.0), DomainError);
  CHECK_THROWS_AS(Manifold::product({}), DomainError);
  CHECK_THROWS_AS(make_point(Manifold::sphere(1), {0.5}), DomainError);
  CHECK_THROWS_AS(make_point(Manifold::sphere(1), {4.0, 0.0}), DomainError);
  CHECK_THROWS_AS(make_point(Manifold::circle(1), {NAN}), DomainError);
}

TEST_CASE("periodic coordinates wrap into [0, 2pi)") {
  ChartPoint p = make_point(Manifold::circle(1), {7.0});
  CHECK(p.coords(0) == doctest::Approx(7.0 - kTwoPi).epsilon(1e-15));
  ChartPoint q = make_point(Manifold::flat_torus(1, 2), {-0.5, 13.0});
  CHECK(q.coords(0) == doctest::Approx(kTwoPi - 0.5));
  CHECK(q.coords(1) == doctest::Approx(13.0 - 2 * kTwoPi));
}

TEST_CASE("dimensions and closed-form volumes") {
  CHECK(Manifold::circle(2).dim() == 1);
  CHECK(Manifold::circle(2).ambient_dim() == 2);
  CHECK(Manifold::sphere(1).ambient_dim() == 3);
  CHECK(Manifold::flat_torus(1, 1).ambient_dim() == 4);
  CHECK(Manifold::torus_of_revolution(2, 1).ambient_dim() == 3);
  CHECK(Manifold::circle(2).volume() == doctest::Approx(4 * kPi));
  CHECK(Manifold::sphere(0.5).volume() == doctest::Approx(kPi));
  CHECK(Manifold::flat_torus(1, 2).volume() == doctest::Approx(8 * kPi * kPi));
  CHECK(Manifold::torus_of_revolution(2, 1).volume() == doctest::Approx(8 * kPi * kPi));
  CHECK(Manifold::circle(1.5).injectivity_radius() == doctest::Approx(1.5 * kPi));
  CHECK(Manifold::sphere(2).injectivity_radius() == doctest::Approx(2 * kPi));
}

TEST_CASE("grid quadrature integrates the volume form") {
  for (const auto& m : catalog()) {
    CAPTURE(m.name());
    QuadratureGrid g = build_grid(m, 32);
    CHECK(g.total_weight() == doctest::Approx(m.volume()).epsilon(1e-12));
  }
  // ∫cos²u dA on the unit sphere = 4π/3
  QuadratureGrid g = build_grid(Manifold::sphere(1), 16);
  double s = 0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * std::pow(std::cos(g.nodes[i].coords(0)), 2);
  CHECK(s == doctest::Approx(4 * kPi / 3).epsilon(1e-12));
  CHECK_THROWS_AS(build_grid(Manifold::circle(1), 4), DomainError);
}

TEST_CASE("flat and multi indices are inverse") {
  QuadratureGrid g = build_grid(Manifold::flat_torus(1, 1), std::vector<int>{8, 12});
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.flat_index(g.multi_index(i)) == i);
}

TEST_CASE("exp/log roundtrip on the catalog") {
  GaussianStream rng(11);
  for (const auto& m : catalog()) {
    CAPTURE(m.name());
    double worst = 0;
    for (int k = 0; k < 40; ++k) {
      ChartPoint p = random_point(m, rng);
      double len = 0.8 * m.injectivity_radius() * rng.uniform();
      TangentVector v = random_tangent(p, len, rng);
      ChartPoint q = exp_map(p, v);
      TangentVector w = log_map(p, q);
      worst = std::max(worst, (w.components - v.components).norm());
    }
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("distance agrees with closed forms") {
  Manifold c = Manifold::circle(2.0);
  CHECK(distance(make_point(c, {0.1}), make_point(c, {6.2})).value ==
        doctest::Approx(2.0 * (kTwoPi - 6.1)).epsilon(1e-14));
  Manifold s = Manifold::sphere(1.5);
  GaussianStream rng(3);
  for (int k = 0; k < 20; ++k) {
    ChartPoint p = random_point(s, rng), q = random_point(s, rng);
    Vec a = embedding_jet(p).value / 1.5, b = embedding_jet(q).value / 1.5;
    double oracle = 1.5 * std::acos(std::clamp(a.dot(b), -1.0, 1.0));
    CHECK(distance(p, q).value == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("distance is a metric on sampled triples") {
  GaussianStream rng(5);
  for (const auto& m : catalog()) {
    CAPTURE(m.name());
    for (int k = 0; k < 10; ++k) {
      ChartPoint p = random_point(m, rng);
      ChartPoint q = exp_map(p, random_tangent(p, 0.3 * m.injectivity_radius(), rng));
      ChartPoint r = exp_map(p, random_tangent(p, 0.3 * m.injectivity_radius(), rng));
      double pq = distance(p, q).value, qp = distance(q, p).value;
      CHECK(pq == doctest::Approx(qp).epsilon(1e-8));
      CHECK(distance(p, r).value <= pq + distance(q, r).value + 1e-8);
      CHECK(pq == doctest::Approx(norm(log_map(p, q))).epsilon(1e-8));
    }
  }
}

TEST_CASE("antipodal log is refused") {
  Manifold s = Manifold::sphere(1);
  CHECK_THROWS_AS(log_map(make_point(s, {1.0, 0.5}), make_point(s, {kPi - 1.0, 0.5 + kPi})), CutLocusError);
  Manifold c = Manifold::circle(1);
  CHECK_THROWS_AS(log_map(make_point(c, {0.0}), make_point(c, {kPi})), CutLocusError);
}

TEST_CASE("christoffel symbols match differentiated metric") {
  GaussianStream rng(17);
  for (const auto& m : catalog()) {
    if (m.dim() < 2) continue;
    CAPTURE(m.name());
    ChartPoint p = random_point(m, rng);
    const int d = m.dim();
    const double h = 1e-5;
    std::vector<Mat> dg(d);
    for (int l = 0; l < d; ++l) {
      Vec a = p.coords, b = p.coords;
      a(l) += h;
      b(l) -= h;
      dg[l] = (metric_at(make_point(m, a)) - metric_at(make_point(m, b))) / (2 * h);
    }
    Mat gi = metric_at(p).inverse();
    Array3 G = christoffel_at(p);
    for (int k = 0; k < d; ++k)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          double v = 0;
          for (int l = 0; l < d; ++l) v += 0.5 * gi(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
          CHECK(G(k, i, j) == doctest::Approx(v).epsilon(1e-7).scale(1));
        }
  }
}

TEST_CASE("Gauss-Bonnet holds for the grid curvature") {
  // ∫K dA = 2πχ
  struct Case {
    Manifold m;
    double chi;
  };
  for (const auto& c : {Case{Manifold::sphere(0.8), 2.0}, Case{Manifold::torus_of_revolution(2, 1), 0.0},
                        Case{Manifold::flat_torus(1, 2), 0.0}}) {
    CAPTURE(c.m.name());
    QuadratureGrid g = build_grid(c.m, 48);
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.weights[i] * curvature_at(g.nodes[i]).gauss;
    CHECK(s == doctest::Approx(kTwoPi * c.chi).epsilon(1e-10).scale(1));
  }
}

TEST_CASE("curvature tensors are consistent") {
  GaussianStream rng(23);
  for (const auto& m : catalog()) {
    CAPTURE(m.name());
    ChartPoint p = random_point(m, rng);
    CurvatureData c = curvature_at(p);
    Mat G = metric_at(p);
    CHECK((c.ricci - c.ricci.transpose()).norm() < 1e-12);
    CHECK(c.scalar == doctest::Approx((G.inverse() * c.ricci).trace()).epsilon(1e-12));
    if (m.kind() == ManifoldKind::sphere)
      CHECK(c.gauss == doctest::Approx(1.0 / (m.params()[0] * m.params()[0])));
    if (m.kind() == ManifoldKind::torus_of_revolution) {
      double R = m.params()[0], r = m.params()[1], u = p.coords(0);
      CHECK(c.gauss == doctest::Approx(std::cos(u) / (r * (R + r * std::cos(u)))).epsilon(1e-12));
    }
  }
}

TEST_CASE("geodesics have constant speed and the right length") {
  Manifold t = Manifold::torus_of_revolution(2, 1);
  ChartPoint p = make_point(t, {0.4, 1.0});
  TangentVector v = make_tangent(p, {0.7, 0.2});
  double len = norm(v);
  ChartPoint q = exp_map(p, v);
  CHECK(distance(p, q).value == doctest::Approx(len).epsilon(1e-8));
}

TEST_CASE("tangent from ambient projects orthogonally") {
  ChartPoint p = make_point(Manifold::sphere(1), {1.0, 0.3});
  EmbeddingJet j = embedding_jet(p);
  Vec normal = j.value.normalized();
  Vec a = j.first.col(0) * 0.4 + j.first.col(1) * -0.2 + 3.0 * normal;
  TangentVector v = tangent_from_ambient(p, a);
  CHECK(v.components(0) == doctest::Approx(0.4));
  CHECK(v.components(1) == doctest::Approx(-0.2));
}
