#pragma once

#include "mapest/embedding.hpp"
#include "mapest/maps.hpp"
#include "mapest/prior.hpp"

#include <functional>

namespace mapest {

enum class EstimatorKind { plugin, second_order, exact_euclidean };

struct EstimatorSpec {
  EstimatorKind kind;
  MapDescriptor map;
  PriorDensity prior;
  double epsilon;
  int quadrature_resolution = 512;
  // codomain chart components added to the exponent as ε⁴·perturbation(θ̂)
  std::function<Vec(const ChartPoint&)> perturbation{};
};

EstimatorSpec make_estimator(EstimatorKind kind, const MapDescriptor& map, const PriorDensity& prior, double epsilon,
                             int quadrature_resolution = 512);

// γ(π(x))
ChartPoint plugin_estimate(const EstimatorSpec& spec, const AmbientPoint& x);

// ½τ(γ) + dγ(∇log λ) at θ̂, codomain chart components
Vec second_order_drift(const EstimatorSpec& spec, const ChartPoint& theta_hat);

// exp_{γ(θ̂)}(ε²(½τ(γ) + dγ(∇log λ)))
ChartPoint second_order_estimate(const EstimatorSpec& spec, const AmbientPoint& x);

struct ExactBayesResult {
  AmbientPoint value;
  bool converged = false;
  int resolution = 0;
};

// posterior mean of γ(θ) under λ(θ)ψ_ε(x − ι(θ)) by grid quadrature; the resolution doubling
// check sets converged when the two results differ by less than 1e-10
ExactBayesResult exact_bayes_euclidean(const EstimatorSpec& spec, const AmbientPoint& x);

// precomputed quadrature for repeated exact evaluations at one resolution
class ExactBayesQuadrature {
 public:
  ExactBayesQuadrature(const EstimatorSpec& spec, int resolution);
  Vec evaluate(const AmbientPoint& x) const;

 private:
  double inv_two_var_;
  std::vector<Vec> embedded_;
  std::vector<Vec> values_;
  std::vector<double> log_weight_;
};

// dispatch on spec.kind; exact results are returned as points of the ambient codomain
ChartPoint estimate(const EstimatorSpec& spec, const AmbientPoint& x);

}  // namespace mapest
