#include "mapest/estimator.hpp"

#include "mapest/errors.hpp"

#include <cmath>
#include <limits>

namespace mapest {

EstimatorSpec make_estimator(EstimatorKind kind, const MapDescriptor& map, const PriorDensity& prior, double epsilon,
                             int quadrature_resolution) {
  if (!(epsilon > 0)) throw DomainError("epsilon must be positive");
  if (kind == EstimatorKind::exact_euclidean && !map.codomain_is_ambient())
    throw MapKindError("exact Bayes estimator requires a euclidean codomain");
  if (prior.grid.manifold != map.domain()) throw GridMismatchError("prior grid is not on the map's domain");
  if (quadrature_resolution < 8) throw DomainError("quadrature resolution must be >= 8");
  return EstimatorSpec{kind, map, prior, epsilon, quadrature_resolution};
}

ChartPoint plugin_estimate(const EstimatorSpec& spec, const AmbientPoint& x) {
  TubePoint t = project(spec.map.domain(), x);
  return spec.map.apply(t.foot);
}

Vec second_order_drift(const EstimatorSpec& spec, const ChartPoint& theta_hat) {
  MapJet2 j = jet2(spec.map, theta_hat);
  Vec dlog = spec.prior.grad_log_lambda_at(theta_hat.coords);
  Vec grad = j.domain_metric.ldlt().solve(dlog);
  return 0.5 * j.tension + j.differential * grad;
}

ChartPoint second_order_estimate(const EstimatorSpec& spec, const AmbientPoint& x) {
  TubePoint t = project(spec.map.domain(), x);
  ChartPoint y = spec.map.apply(t.foot);
  double e2 = spec.epsilon * spec.epsilon;
  Vec v = e2 * second_order_drift(spec, t.foot);
  if (spec.perturbation) v += e2 * e2 * spec.perturbation(t.foot);
  if (spec.map.codomain_is_ambient()) return make_point(spec.map.codomain(), y.coords + v);
  return exp_map(y, make_tangent(y, v));
}

ExactBayesQuadrature::ExactBayesQuadrature(const EstimatorSpec& spec, int resolution) {
  if (!spec.map.codomain_is_ambient()) throw MapKindError("exact Bayes estimator requires a euclidean codomain");
  inv_two_var_ = 1.0 / (2 * spec.epsilon * spec.epsilon);
  QuadratureGrid grid = build_grid(spec.map.domain(), resolution);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const ChartPoint& p = grid.nodes[i];
    double l = spec.prior.lambda_at(p.coords) * grid.weights[i];
    if (!(l > 0)) continue;
    embedded_.push_back(embed(p).coords);
    values_.push_back(spec.map.chart_value(p.coords));
    log_weight_.push_back(std::log(l));
  }
  if (embedded_.empty()) throw PriorError("prior vanishes on the quadrature grid");
}

Vec ExactBayesQuadrature::evaluate(const AmbientPoint& x) const {
  const std::size_t n = embedded_.size();
  std::vector<double> e(n);
  double top = -std::numeric_limits<double>::infinity();
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double q = (x.coords - embedded_[i]).squaredNorm() * inv_two_var_;
    closest = std::min(closest, q);
    e[i] = log_weight_[i] - q;
    top = std::max(top, e[i]);
  }
  // the plain-ratio denominator underflows beyond this exponent
  if (closest > 700) throw UnderflowError("posterior normalizer underflows: observation too far from the manifold");
  double den = 0;
  Vec num = Vec::Zero(values_.front().size());
  for (std::size_t i = 0; i < n; ++i) {
    double w = std::exp(e[i] - top);
    den += w;
    num += w * values_[i];
  }
  return num / den;
}

ExactBayesResult exact_bayes_euclidean(const EstimatorSpec& spec, const AmbientPoint& x) {
  int res = spec.quadrature_resolution;
  Vec a = ExactBayesQuadrature(spec, res).evaluate(x);
  Vec b = ExactBayesQuadrature(spec, 2 * res).evaluate(x);
  return ExactBayesResult{AmbientPoint{b}, (a - b).norm() < 1e-10, 2 * res};
}

ChartPoint estimate(const EstimatorSpec& spec, const AmbientPoint& x) {
  switch (spec.kind) {
    case EstimatorKind::plugin:
      return plugin_estimate(spec, x);
    case EstimatorKind::second_order:
      return second_order_estimate(spec, x);
    case EstimatorKind::exact_euclidean:
      return make_point(spec.map.codomain(), exact_bayes_euclidean(spec, x).value.coords);
  }
  throw DomainError("unknown estimator kind");
}

}  // namespace mapest
