#pragma once

#include "mapest/linalg.hpp"

#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mapest {

enum class ManifoldKind { circle, sphere, flat_torus, torus_of_revolution, product, euclidean };

// Immutable catalog descriptor. Copies share state.
class Manifold {
 public:
  static Manifold circle(double radius);
  static Manifold sphere(double radius);
  static Manifold flat_torus(double r1, double r2);
  // R major radius, r minor radius. Chart (u, v): u around the tube, v around the axis.
  static Manifold torus_of_revolution(double major, double minor);
  static Manifold product(std::vector<Manifold> factors);
  // R^n with the identity chart; used as an ambient codomain.
  static Manifold euclidean(int n);

  ManifoldKind kind() const;
  int dim() const;
  int ambient_dim() const;
  const std::vector<double>& params() const;
  const std::vector<Manifold>& factors() const;
  // coordinate / ambient offsets of factor k within a product
  int coord_offset(int k) const;
  int ambient_offset(int k) const;

  bool periodic(int axis) const;
  bool is_compact() const;
  double injectivity_radius() const;
  // tube radius of the catalog embedding
  double reach() const;
  double volume() const;
  double cut_margin() const { return 1e-3 * injectivity_radius(); }
  std::string name() const;

  bool operator==(const Manifold& o) const;
  bool operator!=(const Manifold& o) const { return !(*this == o); }

  struct Data;

 private:
  explicit Manifold(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  std::shared_ptr<const Data> d_;
};

struct ChartPoint {
  Manifold manifold;
  Vec coords;
  int chart_id = 0;
};

// Validates the chart domain and wraps periodic coordinates into [0, 2π).
ChartPoint make_point(const Manifold& m, const Vec& coords);
ChartPoint make_point(const Manifold& m, std::initializer_list<double> coords);

struct TangentVector {
  ChartPoint base;
  Vec components;
  std::optional<Vec> ambient_rep;
};

TangentVector make_tangent(const ChartPoint& p, const Vec& components);
TangentVector make_tangent(const ChartPoint& p, std::initializer_list<double> components);
// Tangent vector from an ambient vector (orthogonally projected onto T_pM).
TangentVector tangent_from_ambient(const ChartPoint& p, const Vec& ambient);
double norm(const TangentVector& v);

// Chart embedding jet: value (s), first partials (s x m), second partials (s, m, m).
struct EmbeddingJet {
  Vec value;
  Mat first;
  Array3 second;
};
EmbeddingJet embedding_jet(const ChartPoint& p);

Mat metric_at(const ChartPoint& p);
// Gamma(k, i, j) = Γ^k_ij
Array3 christoffel_at(const ChartPoint& p);

ChartPoint exp_map(const ChartPoint& p, const TangentVector& v);
TangentVector log_map(const ChartPoint& p, const ChartPoint& q);

enum class DistanceAccuracy { exact, shooting, graph_estimate };
struct DistanceResult {
  double value;
  DistanceAccuracy accuracy;
};
DistanceResult distance(const ChartPoint& p, const ChartPoint& q);

struct CurvatureData {
  Array4 riemann;  // R^a_bcd
  Mat ricci;
  double scalar = 0;
  double gauss = 0;  // sectional curvature for surfaces, 0 otherwise
};
CurvatureData curvature_at(const ChartPoint& p);

// One tensor-product axis of a quadrature grid.
struct GridAxis {
  std::vector<double> x;
  std::vector<double> w;  // coordinate-measure weights
  bool periodic = true;
  int pole_partner = -1;  // longitude axis reflected across the poles (sphere colatitude axes)
};

struct QuadratureGrid {
  Manifold manifold;
  std::vector<ChartPoint> nodes;
  std::vector<double> weights;
  std::vector<int> resolution;
  std::vector<GridAxis> axes;

  std::size_t size() const { return nodes.size(); }
  double total_weight() const;
  std::size_t flat_index(const std::vector<int>& multi) const;
  std::vector<int> multi_index(std::size_t flat) const;
};

QuadratureGrid build_grid(const Manifold& m, const std::vector<int>& resolution);
// resolution repeated on every axis (sphere longitude gets twice the count)
QuadratureGrid build_grid(const Manifold& m, int per_axis);

}  // namespace mapest
