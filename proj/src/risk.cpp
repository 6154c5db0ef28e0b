#include "mapest/risk.hpp"

#include "mapest/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <set>
#include <thread>

namespace mapest {

namespace {

Vec sample_volume_of(const Manifold& m, GaussianStream& rng) {
  const auto& p = m.params();
  switch (m.kind()) {
    case ManifoldKind::circle:
      return Vec::Constant(1, kTwoPi * rng.uniform());
    case ManifoldKind::sphere: {
      Vec c(2);
      c(0) = std::acos(std::clamp(1.0 - 2.0 * rng.uniform(), -1.0, 1.0));
      c(1) = kTwoPi * rng.uniform();
      return c;
    }
    case ManifoldKind::flat_torus: {
      Vec c(2);
      c(0) = kTwoPi * rng.uniform();
      c(1) = kTwoPi * rng.uniform();
      return c;
    }
    case ManifoldKind::torus_of_revolution: {
      double R = p[0], r = p[1];
      Vec c(2);
      for (;;) {
        double u = kTwoPi * rng.uniform();
        if (rng.uniform() * (R + r) <= R + r * std::cos(u)) {
          c(0) = u;
          break;
        }
      }
      c(1) = kTwoPi * rng.uniform();
      return c;
    }
    case ManifoldKind::product: {
      Vec c(m.dim());
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        Vec f = sample_volume_of(m.factors()[k], rng);
        c.segment(m.coord_offset(int(k)), f.size()) = f;
      }
      return c;
    }
    case ManifoldKind::euclidean:
      break;
  }
  throw DomainError("volume sampling needs a compact manifold");
}

double squared_loss(const ChartPoint& est, const ChartPoint& target) {
  if (est.manifold.kind() == ManifoldKind::euclidean) return (est.coords - target.coords).squaredNorm();
  double d = distance(est, target).value;
  return d * d;
}

// estimator with any per-spec precomputation
class Evaluator {
 public:
  explicit Evaluator(const EstimatorSpec& spec) : spec_(spec) {
    if (spec.kind == EstimatorKind::exact_euclidean)
      quad_ = std::make_shared<ExactBayesQuadrature>(spec, spec.quadrature_resolution);
  }
  ChartPoint operator()(const AmbientPoint& x) const {
    if (quad_) {
      project(spec_.map.domain(), x);  // tube restriction
      return make_point(spec_.map.codomain(), quad_->evaluate(x));
    }
    return estimate(spec_, x);
  }
  const EstimatorSpec& spec() const { return spec_; }

 private:
  EstimatorSpec spec_;
  std::shared_ptr<ExactBayesQuadrature> quad_;
};

struct Accum {
  Vec sum;
  Mat cross;
  std::vector<std::size_t> rejected;
  std::size_t count = 0;
};

// draws (θ, weight) for one sample
using ThetaDraw = std::function<std::pair<ChartPoint, double>(GaussianStream&)>;

// Runs n samples in fixed-size shards; shard i draws from stream_seed(seed, i). Shard sums are
// combined in shard order so results do not depend on the thread count.
Accum run_monte_carlo(const std::vector<Evaluator>& evals, const ThetaDraw& draw, const MonteCarloOptions& opt) {
  const std::size_t K = evals.size();
  const std::size_t shard = std::max<std::size_t>(1, opt.shard_size);
  const std::size_t nshards = (opt.samples + shard - 1) / shard;
  const MapDescriptor& gamma = evals.front().spec().map;
  const Manifold& dom = gamma.domain();
  std::vector<Accum> parts(nshards);
  auto work = [&](std::size_t s) {
    Accum a{Vec::Zero(K), Mat::Zero(K, K), std::vector<std::size_t>(K, 0), 0};
    GaussianStream rng(stream_seed(opt.seed, s));
    std::size_t count = std::min(shard, opt.samples - s * shard);
    Vec loss(K);
    Vec z(dom.ambient_dim());
    for (std::size_t i = 0; i < count; ++i) {
      auto [theta, w] = draw(rng);
      for (int k = 0; k < z.size(); ++k) z(k) = rng.normal();
      Vec base = embed(theta).coords;
      ChartPoint target = gamma.apply(theta);
      for (std::size_t k = 0; k < K; ++k) {
        AmbientPoint x{base + evals[k].spec().epsilon * z};
        try {
          loss(k) = w * squared_loss(evals[k](x), target);
        } catch (const OutsideTubeError&) {
          loss(k) = 0;
          ++a.rejected[k];
        }
      }
      a.sum += loss;
      a.cross.noalias() += loss * loss.transpose();
    }
    a.count = count;
    parts[s] = std::move(a);
  };
  int threads = std::max(1, opt.threads);
  if (threads == 1 || nshards == 1) {
    for (std::size_t s = 0; s < nshards; ++s) work(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < nshards; s = next++) work(s);
      });
    for (auto& t : pool) t.join();
  }
  Accum total{Vec::Zero(K), Mat::Zero(K, K), std::vector<std::size_t>(K, 0), 0};
  for (const auto& a : parts) {
    total.sum += a.sum;
    total.cross += a.cross;
    for (std::size_t k = 0; k < K; ++k) total.rejected[k] += a.rejected[k];
    total.count += a.count;
  }
  return total;
}

struct Summary {
  Vec mean;
  Mat cov;  // covariance of the mean
};

Summary summarize(const Accum& a) {
  double n = double(a.count);
  Vec mean = a.sum / n;
  Mat cov = (a.cross / n - mean * mean.transpose()) / std::max(1.0, n - 1);
  for (int k = 0; k < cov.rows(); ++k) cov(k, k) = std::max(0.0, cov(k, k));
  return {mean, cov};
}

RiskEstimate to_estimate(const Summary& s, const Accum& a, int k, double eps, std::uint64_t seed) {
  return RiskEstimate{s.mean(k), std::sqrt(s.cov(k, k)), a.count, eps, double(a.rejected[k]) / double(a.count), seed};
}

void check_samples(const MonteCarloOptions& opt) {
  if (opt.samples < 1000) throw DomainError("Monte Carlo needs at least 1000 samples");
}

ThetaDraw prior_draw(const PriorDensity& prior, PriorRoute route) {
  auto sampler = std::make_shared<PriorSampler>(prior);
  if (route == PriorRoute::direct)
    return [sampler](GaussianStream& rng) { return std::make_pair(sampler->sample(rng), 1.0); };
  return [sampler](GaussianStream& rng) {
    ChartPoint t = sampler->sample_volume(rng);
    double w = sampler->importance_weight(t);
    return std::make_pair(t, w);
  };
}

}  // namespace

PriorSampler::PriorSampler(const PriorDensity& prior)
    : prior_(&prior), m_(prior.grid.manifold), volume_(prior.grid.total_weight()) {
  if (m_.dim() == 1 && !prior.is_uniform()) {
    const int M = std::max<int>(4096, int(prior.grid.size()));
    const double h = kTwoPi / M;
    cdf_x_.resize(M + 1);
    pdf_.resize(M + 1);
    cdf_.assign(M + 1, 0.0);
    for (int k = 0; k <= M; ++k) {
      cdf_x_[k] = k * h;
      pdf_[k] = prior.lambda_at(Vec::Constant(1, k == M ? 0.0 : k * h));
    }
    for (int k = 0; k < M; ++k) cdf_[k + 1] = cdf_[k] + 0.5 * h * (pdf_[k] + pdf_[k + 1]);
    if (!(cdf_.back() > 0)) throw PriorError("prior integrates to zero");
  } else if (!prior.is_uniform()) {
    for (std::size_t i = 0; i < prior.grid.size(); ++i)
      lambda_bound_ = std::max(lambda_bound_, prior.lambda_at(prior.grid.nodes[i].coords));
    lambda_bound_ *= 1.1;
    if (!(lambda_bound_ > 0)) throw PriorError("prior integrates to zero");
  }
}

ChartPoint PriorSampler::sample_volume(GaussianStream& rng) const { return make_point(m_, sample_volume_of(m_, rng)); }

double PriorSampler::importance_weight(const ChartPoint& theta) const {
  return prior_->lambda_at(theta.coords) * volume_;
}

ChartPoint PriorSampler::sample(GaussianStream& rng) const {
  if (prior_->is_uniform()) return sample_volume(rng);
  if (!cdf_.empty()) {
    // piecewise-linear density, exact inversion within the cell
    double target = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    std::size_t k = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - cdf_.begin() - 1, 0), cdf_.size() - 2);
    double h = cdf_x_[k + 1] - cdf_x_[k];
    double p0 = pdf_[k], slope = (pdf_[k + 1] - pdf_[k]) / h;
    double rem = target - cdf_[k];
    double s;
    if (std::abs(slope) < 1e-14 * std::max(1.0, p0)) {
      s = p0 > 0 ? rem / p0 : 0.5 * h;
    } else {
      double disc = std::max(0.0, p0 * p0 + 2 * slope * rem);
      s = 2 * rem / (p0 + std::sqrt(disc));
    }
    return make_point(m_, Vec::Constant(1, cdf_x_[k] + std::clamp(s, 0.0, h)));
  }
  for (;;) {
    ChartPoint t = sample_volume(rng);
    if (rng.uniform() * lambda_bound_ <= prior_->lambda_at(t.coords)) return t;
  }
}

RiskEstimate pointwise_risk(const EstimatorSpec& g, const ChartPoint& theta, const MonteCarloOptions& opt) {
  check_samples(opt);
  std::vector<Evaluator> ev{Evaluator(g)};
  ThetaDraw draw = [theta](GaussianStream&) { return std::make_pair(theta, 1.0); };
  Accum a = run_monte_carlo(ev, draw, opt);
  return to_estimate(summarize(a), a, 0, g.epsilon, opt.seed);
}

RiskEstimate bayes_risk(const EstimatorSpec& g, const PriorDensity& prior, const MonteCarloOptions& opt,
                        PriorRoute route) {
  check_samples(opt);
  std::vector<Evaluator> ev{Evaluator(g)};
  Accum a = run_monte_carlo(ev, prior_draw(prior, route), opt);
  return to_estimate(summarize(a), a, 0, g.epsilon, opt.seed);
}

RiskEstimate centered_risk(const EstimatorSpec& g, const PriorDensity& prior, const MonteCarloOptions& opt) {
  RiskEstimate r = bayes_risk(g, prior, opt);
  double A2 = 0;
  const auto& grid = prior.grid;
  for (std::size_t i = 0; i < grid.size(); ++i)
    A2 += grid.weights[i] * prior.lambda_at(grid.nodes[i].coords) * jet2(g.map, grid.nodes[i]).e_density();
  r.value -= g.epsilon * g.epsilon * A2;
  return r;
}

ExpansionCoefficients expansion_coefficients(const MapDescriptor& gamma, const PriorDensity& prior,
                                             const QuadratureGrid& grid) {
  if (grid.manifold != gamma.domain()) throw GridMismatchError("grid is not on the map's domain");
  ExpansionCoefficients out;
  const std::size_t n = grid.size();
  out.a2.resize(n);
  out.a4.resize(n);
  out.kappa.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ChartPoint& t = grid.nodes[i];
    double l = prior.lambda_at(t.coords);
    if (!(l > 0)) throw PriorError("expansion coefficients need a positive prior");
    CurvatureReport kr = kappa_general(gamma, t);
    MapJet2 j = jet2(gamma, t);
    Vec drift = j.differential * j.domain_metric.ldlt().solve(prior.grad_log_lambda_at(t.coords));
    Vec v = j.tension + drift;
    double vv = v.dot(j.codomain_metric * v);
    double dd = drift.dot(j.codomain_metric * drift);
    out.kappa[i] = kr.kappa;
    out.a2[i] = l * kr.e_density;
    out.a4[i] = l * (0.5 * kr.hess_Gamma_sq - (2.0 / 3.0) * kr.ricci_coupling - vv);
    out.A2 += grid.weights[i] * out.a2[i];
    out.A4 += grid.weights[i] * out.a4[i];
    // λ|dγ(∇log λ)|² = 4μ(dω, dω)
    out.A4_operator += grid.weights[i] * l * (kr.kappa - dd);
  }
  return out;
}

ExpansionFit fit_expansion(const std::vector<double>& epsilons, const Vec& values, const Mat& covariance, int terms) {
  const int K = int(epsilons.size());
  if (terms != 2 && terms != 3) throw DomainError("fit uses two or three terms");
  if (values.size() != K || covariance.rows() != K || covariance.cols() != K)
    throw DomainError("fit inputs have mismatched sizes");
  std::set<double> distinct(epsilons.begin(), epsilons.end());
  if (int(distinct.size()) < 4) throw SingularDesignError("fit needs at least 4 distinct epsilon values");
  double lo = *distinct.begin(), hi = *distinct.rbegin();
  if (!(lo > 0) || hi < 4 * lo * (1 - 1e-12)) throw SingularDesignError("epsilon grid must span a factor of 4");
  Mat X(K, terms);
  for (int k = 0; k < K; ++k) {
    double e2 = epsilons[k] * epsilons[k];
    for (int p = 0; p < terms; ++p) X(k, p) = std::pow(e2, p + 1);
  }
  double min_pos = 0;
  for (int k = 0; k < K; ++k)
    if (covariance(k, k) > 0) min_pos = min_pos == 0 ? covariance(k, k) : std::min(min_pos, covariance(k, k));
  Vec w(K);
  for (int k = 0; k < K; ++k) {
    double v = covariance(k, k) > 0 ? covariance(k, k) : (min_pos > 0 ? min_pos : 1.0);
    w(k) = 1.0 / v;
  }
  // column scaling keeps the normal matrix well conditioned
  Vec scale = X.colwise().norm().transpose().cwiseInverse();
  Mat Xs = X * scale.asDiagonal();
  Mat N = Xs.transpose() * w.asDiagonal() * Xs;
  Eigen::JacobiSVD<Mat> svd(N);
  double cond = svd.singularValues()(0) / svd.singularValues()(terms - 1);
  if (!std::isfinite(cond) || cond > 1e14) throw SingularDesignError("fit design is singular");
  Mat P = scale.asDiagonal() * N.ldlt().solve(Xs.transpose() * w.asDiagonal());
  Vec beta = P * values;
  Mat cb = P * covariance * P.transpose();
  Vec r = values - X * beta;
  ExpansionFit f;
  f.a2_hat = beta(0);
  f.a4_hat = beta(1);
  f.a6_hat = terms == 3 ? beta(2) : 0.0;
  f.covariance = cb.topLeftCorner(2, 2);
  f.covariance = 0.5 * (f.covariance + f.covariance.transpose());
  f.epsilon_grid = epsilons;
  f.residual_norm = std::sqrt(r.dot(w.asDiagonal() * r));
  return f;
}

ExpansionFit fit_expansion(const std::vector<RiskEstimate>& estimates, int terms) {
  const int K = int(estimates.size());
  std::vector<double> eps(K);
  Vec v(K);
  Mat c = Mat::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    eps[k] = estimates[k].epsilon;
    v(k) = estimates[k].value;
    c(k, k) = estimates[k].std_error * estimates[k].std_error;
  }
  return fit_expansion(eps, v, c, terms);
}

RiskSweep risk_sweep(const EstimatorSpec& g, const PriorDensity& prior, const std::vector<double>& epsilons,
                     const MonteCarloOptions& opt, bool common_random_numbers, int terms) {
  check_samples(opt);
  RiskSweep out;
  out.common_random_numbers = common_random_numbers;
  const int K = int(epsilons.size());
  std::vector<Evaluator> evals;
  for (double e : epsilons) {
    EstimatorSpec s = g;
    if (!(e > 0)) throw DomainError("epsilon must be positive");
    s.epsilon = e;
    evals.emplace_back(s);
  }
  ThetaDraw draw = prior_draw(prior, PriorRoute::direct);
  if (common_random_numbers) {
    Accum a = run_monte_carlo(evals, draw, opt);
    Summary s = summarize(a);
    for (int k = 0; k < K; ++k) out.estimates.push_back(to_estimate(s, a, k, epsilons[k], opt.seed));
    out.covariance = s.cov;
  } else {
    out.covariance = Mat::Zero(K, K);
    for (int k = 0; k < K; ++k) {
      MonteCarloOptions o = opt;
      o.seed = stream_seed(opt.seed, 0x10000 + std::uint64_t(k));
      std::vector<Evaluator> one{evals[k]};
      Accum a = run_monte_carlo(one, draw, o);
      Summary s = summarize(a);
      out.estimates.push_back(to_estimate(s, a, 0, epsilons[k], o.seed));
      out.covariance(k, k) = s.cov(0, 0);
    }
  }
  Vec v(K);
  for (int k = 0; k < K; ++k) v(k) = out.estimates[k].value;
  out.fit = fit_expansion(epsilons, v, out.covariance, terms);
  return out;
}

double rejected_mass_bound(double tube_radius, double epsilon) {
  double t = tube_radius / (2 * epsilon);
  return 10.0 * std::exp(-0.5 * t * t);
}

}  // namespace mapest
