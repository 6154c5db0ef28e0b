#pragma once

#include "mapest/manifold.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace mapest {

enum class MapKind {
  identity,
  inclusion,
  circle_power,
  torus_to_circle,
  great_circle_into_sphere,
  constant,
  custom,
  composite
};

struct ChartJet {
  Vec value;    // codomain chart coordinates (not wrapped)
  Mat first;    // n x m
  Array3 second;  // (n, m, m)
};

class MapDescriptor {
 public:
  using ChartFn = std::function<Vec(const Vec&)>;

  static MapDescriptor identity(const Manifold& m);
  // ι into the ambient euclidean space of the catalog embedding
  static MapDescriptor inclusion(const Manifold& m);
  static MapDescriptor circle_power(const Manifold& circle, int k);
  // flat-torus -> circle(r_factor), (θ1, θ2) ↦ θ_factor
  static MapDescriptor torus_to_circle(const Manifold& flat_torus, int factor = 0);
  // circle(r) -> sphere(r) along the equator
  static MapDescriptor great_circle_into_sphere(const Manifold& circle);
  static MapDescriptor constant(const Manifold& domain, const ChartPoint& value);
  // chart-level map; derivatives by Richardson-extrapolated central differences
  static MapDescriptor custom(const Manifold& domain, const Manifold& codomain, ChartFn fn, std::string name);
  // second ∘ first
  static MapDescriptor composite(const MapDescriptor& first, const MapDescriptor& second);

  MapKind kind() const;
  const Manifold& domain() const;
  const Manifold& codomain() const;
  std::string name() const;
  int power() const;
  int factor() const;

  bool codomain_is_ambient() const { return codomain().kind() == ManifoldKind::euclidean; }
  bool is_riemannian_immersion() const;
  bool is_riemannian_submersion() const;
  // all covariant derivatives of dγ vanish
  bool is_totally_geodesic() const;

  ChartJet chart_jet(const Vec& x) const;
  Vec chart_value(const Vec& x) const;
  ChartPoint apply(const ChartPoint& theta) const;

  struct Data;

 private:
  explicit MapDescriptor(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  std::shared_ptr<const Data> d_;
};

struct MapJet2 {
  ChartPoint at;
  ChartPoint value;
  Mat differential;  // chart frames, n x m
  Array3 hessian;    // chart frames, (n, m, m)
  Vec tension;       // codomain chart components
  Mat domain_metric;
  Mat codomain_metric;

  double e_density() const;
  double hessian_norm_sq() const;
  double tension_norm_sq() const;
  // orthonormal-frame versions: E = G^{-1/2}, F = H^{1/2}
  Mat differential_orthonormal() const;
  Array3 hessian_orthonormal() const;
};

MapJet2 jet2(const MapDescriptor& gamma, const ChartPoint& theta);

// exp_{γ(x)}^{-1} ∘ γ ∘ exp_x in orthonormal frames at x and γ(x)
Vec normal_coordinate_rep(const MapDescriptor& gamma, const ChartPoint& x, const Vec& w);
// second derivative of the normal-coordinate representative at 0, (n, m, m)
Array3 hessian_normal_fd(const MapDescriptor& gamma, const ChartPoint& x, double h = 1e-3);
// symmetric third-order Maclaurin coefficient ∇²dγ(v,v,v), (n, m, m, m) orthonormal frames
Array4 third_order_term(const MapDescriptor& gamma, const ChartPoint& x, double h = 1e-3);

ChartPoint maclaurin_eval(const MapDescriptor& gamma, const ChartPoint& x, const TangentVector& v, int order);

// Σ_ij <u_i, R^N(u_i, u_j) u_j> for chart-component columns u_i at y
double codomain_ricci_term(const ChartPoint& y, const Mat& U);
// <dγ, Ric dγ> = −<dγ, dγ(Ric^M)> + Σ <u_i, R^N(u_i,u_j)u_j>
double ricci_coupling(const MapDescriptor& gamma, const ChartPoint& theta);
// <dγ, ∇τ(γ)>
double grad_tension_coupling(const MapDescriptor& gamma, const ChartPoint& theta);

struct CurvatureReport {
  ChartPoint at;
  double e_density = 0;
  double hess_gamma_sq = 0;
  double hess_Gamma_sq = 0;
  double ricci_coupling = 0;  // <dΓ, Ric dΓ>
  double grad_tension_coupling = 0;
  double tension_sq = 0;
  double kappa = 0;
};

CurvatureReport kappa_general(const MapDescriptor& gamma, const ChartPoint& theta);
double kappa_from_parts(double hess_Gamma_sq, double ricci_Gamma, double tension_sq, double grad_tension);
double kappa_immersion(const MapDescriptor& gamma, const ChartPoint& theta);
double kappa_submersion(const MapDescriptor& gamma, const ChartPoint& theta);
double kappa_submersion_formula(double scal_codomain, double tension_sq, double grad_tension);

// trace of Ric^Θ over the horizontal space (ker dγ)^⊥
double horizontal_scalar(const MapDescriptor& gamma, const ChartPoint& theta);
// |∇dγ|² − (scal_Λ∘γ − scal_D − <dγ, ∇τ(γ)>), riemannian submersions
double sffsub_residual(const MapDescriptor& gamma, const ChartPoint& theta);

// ∫λ<dσ, dγ>dθ + ∫<σ, λτ(γ) + dγ(∇λ)>dθ with grid differences; sigma holds codomain
// chart components per node.
double ibp_residual(const std::vector<double>& lambda, const MapDescriptor& gamma, const QuadratureGrid& grid,
                    const std::vector<Vec>& sigma);
// smooth test section σ_k along γ
std::vector<Vec> ibp_test_section(const MapDescriptor& gamma, const QuadratureGrid& grid, int k);

struct MomentEstimate {
  double mc = 0;
  double std_error = 0;
  double closed_form = 0;
};
struct MomentReport {
  MomentEstimate first, second, third;
  std::size_t samples = 0;
};
MomentReport gaussian_moment_check(const MapDescriptor& gamma, const ChartPoint& theta, std::size_t n,
                                   std::uint64_t seed);

}  // namespace mapest
