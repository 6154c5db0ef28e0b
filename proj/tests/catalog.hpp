#pragma once

#include "mapest/manifold.hpp"
#include "mapest/rng.hpp"

#include <vector>

namespace mapest::testing {

inline std::vector<Manifold> catalog() {
  return {Manifold::circle(1.0),       Manifold::circle(2.5),
          Manifold::sphere(1.0),       Manifold::sphere(0.7),
          Manifold::flat_torus(1, 1),  Manifold::flat_torus(1.5, 0.8),
          Manifold::torus_of_revolution(2.0, 1.0), Manifold::torus_of_revolution(3.0, 0.5)};
}

// random chart point away from sphere poles
inline ChartPoint random_point(const Manifold& m, GaussianStream& rng) {
  Vec c(m.dim());
  for (int i = 0; i < m.dim(); ++i) c(i) = kTwoPi * rng.uniform();
  if (m.kind() == ManifoldKind::sphere) c(0) = 0.2 + (kPi - 0.4) * rng.uniform();
  return make_point(m, c);
}

// random tangent vector with metric norm `length`
inline TangentVector random_tangent(const ChartPoint& p, double length, GaussianStream& rng) {
  Vec c(p.manifold.dim());
  for (int i = 0; i < c.size(); ++i) c(i) = rng.normal();
  Mat G = metric_at(p);
  c *= length / std::sqrt(c.dot(G * c));
  return make_tangent(p, c);
}

}  // namespace mapest::testing
