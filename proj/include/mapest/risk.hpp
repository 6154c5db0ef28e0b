#pragma once

#include "mapest/estimator.hpp"
#include "mapest/rng.hpp"

#include <cstdint>
#include <vector>

namespace mapest {

struct RiskEstimate {
  double value = 0;
  double std_error = 0;
  std::size_t samples = 0;
  double epsilon = 0;
  double rejected_mass = 0;
  std::uint64_t seed = 0;
};

struct MonteCarloOptions {
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::size_t shard_size = 1 << 14;
};

// Draws θ ~ λdθ: inverse CDF on one-dimensional domains, rejection from the volume measure otherwise.
class PriorSampler {
 public:
  explicit PriorSampler(const PriorDensity& prior);
  ChartPoint sample(GaussianStream& rng) const;
  // θ uniform in the volume measure
  ChartPoint sample_volume(GaussianStream& rng) const;
  // λ(θ)·Vol(Θ), the importance weight of a volume-uniform draw
  double importance_weight(const ChartPoint& theta) const;

 private:
  const PriorDensity* prior_;
  Manifold m_;
  double volume_;
  double lambda_bound_ = 0;
  std::vector<double> cdf_x_, cdf_;  // one-dimensional tables
  std::vector<double> pdf_;
};

enum class PriorRoute { direct, importance };

// E over z of dist(g(ι(θ) + εz), γ(θ))², tube-restricted
RiskEstimate pointwise_risk(const EstimatorSpec& g, const ChartPoint& theta, const MonteCarloOptions& opt);
RiskEstimate bayes_risk(const EstimatorSpec& g, const PriorDensity& prior, const MonteCarloOptions& opt,
                        PriorRoute route = PriorRoute::direct);
// bayes_risk − ε²A₂
RiskEstimate centered_risk(const EstimatorSpec& g, const PriorDensity& prior, const MonteCarloOptions& opt);

struct ExpansionCoefficients {
  double A2 = 0;
  double A4 = 0;
  // ∫κλdθ − 4∫μ(dω, dω)dθ
  double A4_operator = 0;
  std::vector<double> a2, a4, kappa;
};

ExpansionCoefficients expansion_coefficients(const MapDescriptor& gamma, const PriorDensity& prior,
                                             const QuadratureGrid& grid);

struct ExpansionFit {
  double a2_hat = 0;
  double a4_hat = 0;
  double a6_hat = 0;  // nuisance, zero for two-term fits
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  std::vector<double> epsilon_grid;
  double residual_norm = 0;  // weighted residual norm
  double se_a2() const { return std::sqrt(covariance(0, 0)); }
  double se_a4() const { return std::sqrt(covariance(1, 1)); }
};

// weighted least squares of R(ε) on {ε², ε⁴} (plus ε⁶ when terms = 3) with the full value covariance
ExpansionFit fit_expansion(const std::vector<double>& epsilons, const Vec& values, const Mat& covariance,
                           int terms = 3);
// independent estimates
ExpansionFit fit_expansion(const std::vector<RiskEstimate>& estimates, int terms = 3);

struct RiskSweep {
  std::vector<RiskEstimate> estimates;
  Mat covariance;  // of the estimate values across ε
  ExpansionFit fit;
  bool common_random_numbers = true;
};

// Bayes risk over an ε grid. With common random numbers every ε reuses one (θ, z) bank and the
// fit covariance carries the cross-ε correlation.
RiskSweep risk_sweep(const EstimatorSpec& g, const PriorDensity& prior, const std::vector<double>& epsilons,
                     const MonteCarloOptions& opt, bool common_random_numbers = true, int terms = 3);

// exp(−(r/2ε)²/2)·10
double rejected_mass_bound(double tube_radius, double epsilon);

inline const std::vector<double> kDefaultEpsilons{0.05, 0.075, 0.1, 0.15, 0.2};

}  // namespace mapest
