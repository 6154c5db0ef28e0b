#include "mapest/prior.hpp"

#include "mapest/errors.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <numeric>

namespace mapest {

namespace {

void fill_glog(PriorDensity& p) {
  const auto& grid = p.grid;
  const int d = int(grid.axes.size());
  p.glog.assign(d, std::vector<double>(grid.size(), 0.0));
  if (p.uniform) return;
  std::vector<double> logl(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    logl[i] = p.lambda[i] > 0 ? std::log(p.lambda[i]) : -std::numeric_limits<double>::infinity();
  auto g = grid_gradient(grid, logl);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (int k = 0; k < d; ++k) p.glog[k][i] = g[i](k);
}

}  // namespace

double PriorDensity::lambda_at(const Vec& coords) const {
  if (uniform) return lambda.front();
  if (density) return density(coords);
  return std::max(0.0, grid_interpolate(grid, lambda, coords));
}

Vec PriorDensity::grad_log_lambda_at(const Vec& coords) const {
  const int d = int(grid.axes.size());
  if (uniform) return Vec::Zero(d);
  if (density) {
    double l = density(coords);
    if (!(l > 0)) throw PriorError("prior vanishes at the estimate");
    auto f = density;
    return fd_gradient([f](const Vec& x) { return std::log(f(x)); }, coords);
  }
  Vec out(d);
  for (int k = 0; k < d; ++k) out(k) = grid_interpolate(grid, glog[k], coords, k);
  if (!out.allFinite()) throw PriorError("prior vanishes near the estimate");
  return out;
}

PriorDensity uniform_prior(const QuadratureGrid& grid) {
  double vol = grid.total_weight();
  PriorDensity p{.grid = grid,
                 .omega = std::vector<double>(grid.size(), 1.0 / std::sqrt(vol)),
                 .lambda = std::vector<double>(grid.size(), 1.0 / vol)};
  double c = 1.0 / vol;
  p.density = [c](const Vec&) { return c; };
  p.uniform = true;
  fill_glog(p);
  return p;
}

PriorDensity prior_from_function(const QuadratureGrid& grid, std::function<double(const Vec&)> f) {
  double z = 0;
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    v[i] = f(grid.nodes[i].coords);
    if (!(v[i] >= 0)) throw PriorError("prior density must be nonnegative");
    z += grid.weights[i] * v[i];
  }
  if (!(z > 0)) throw PriorError("prior density integrates to zero");
  PriorDensity p{.grid = grid};
  p.lambda.resize(grid.size());
  p.omega.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    p.lambda[i] = v[i] / z;
    p.omega[i] = std::sqrt(p.lambda[i]);
  }
  p.density = [f, z](const Vec& x) { return f(x) / z; };
  fill_glog(p);
  return p;
}

PriorDensity prior_from_values(const QuadratureGrid& grid, std::vector<double> lambda) {
  if (lambda.size() != grid.size()) throw GridMismatchError("prior values do not match grid");
  double z = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(lambda[i] >= 0)) throw PriorError("prior density must be nonnegative");
    z += grid.weights[i] * lambda[i];
  }
  if (!(z > 0)) throw PriorError("prior density integrates to zero");
  PriorDensity p{.grid = grid};
  for (auto& v : lambda) v /= z;
  p.omega.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) p.omega[i] = std::sqrt(lambda[i]);
  p.lambda = std::move(lambda);
  fill_glog(p);
  return p;
}

namespace {

struct RawEigen {
  double alpha;
  Vec vec;  // M-normalized
  double gap;
  int iterations;
  bool dense;
};

double residual_of(const DiscreteOperator& op, const Vec& w, double alpha) {
  Vec r = op.apply(w) - alpha * w;
  return std::sqrt(op.inner(r, r) / op.inner(w, w));
}

RawEigen dense_top(const DiscreteOperator& op) {
  const int n = int(op.size());
  Vec s = op.mass.cwiseSqrt().cwiseInverse();
  Mat B = s.asDiagonal() * Mat(op.form) * s.asDiagonal();
  B = 0.5 * (B + B.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(B);
  if (es.info() != Eigen::Success) throw ConvergenceError("dense eigensolver failed");
  const auto& ev = es.eigenvalues();
  double alpha = ev(n - 1);
  double tol = 1e-9 * std::max(1.0, std::abs(alpha));
  int k = n - 1;
  while (k > 0 && alpha - ev(k - 1) < tol) --k;
  Mat top = es.eigenvectors().rightCols(n - k);
  // constant function in the transformed coordinates
  Vec c = op.mass.cwiseSqrt();
  Vec y = top * (top.transpose() * c);
  if (y.norm() < 1e-8 * c.norm()) y = top.col(top.cols() - 1);
  y.normalize();
  Vec w = s.asDiagonal() * y;
  double gap = (k > 0) ? alpha - ev(k - 1) : 0.0;
  return {alpha, w, gap, 1, true};
}

RawEigen sparse_top(const DiscreteOperator& op) {
  const int n = int(op.size());
  double sigma = op.potential.maxCoeff();
  sigma += 1e-2 * std::max(1.0, std::abs(sigma));
  SpMat Mdiag(n, n);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i) t.emplace_back(i, i, op.mass(i));
    Mdiag.setFromTriplets(t.begin(), t.end());
  }
  SpMat A = sigma * Mdiag - op.form;
  Eigen::SimplicialLDLT<SpMat> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw ConvergenceError("shift-invert factorization failed");
  auto mnorm = [&](const Vec& v) { return std::sqrt(op.inner(v, v)); };
  Vec x = Vec::Ones(n);
  x /= mnorm(x);
  double rq = x.dot(op.form * x);
  int it = 0;
  for (; it < 10000; ++it) {
    Vec y = ldlt.solve(op.mass.cwiseProduct(x));
    y /= mnorm(y);
    double rq_new = y.dot(op.form * y);
    x = y;
    bool settled = std::abs(rq_new - rq) <= 1e-14 * std::max(1.0, std::abs(rq_new));
    rq = rq_new;
    if (settled && residual_of(op, x, rq) <= 1e-10) break;
  }
  if (it >= 10000) throw ConvergenceError("inverse iteration hit the iteration cap");
  // second eigenvalue by deflated iteration, for the gap report
  Vec z = Vec::LinSpaced(n, -1.0, 1.0);
  double rq2 = 0;
  for (int k = 0; k < 500; ++k) {
    z -= x * op.inner(x, z);
    Vec y = ldlt.solve(op.mass.cwiseProduct(z));
    y -= x * op.inner(x, y);
    double nz = mnorm(y);
    if (nz == 0) break;
    z = y / nz;
    double r = z.dot(op.form * z);
    if (k > 0 && std::abs(r - rq2) <= 1e-12 * std::max(1.0, std::abs(r))) {
      rq2 = r;
      break;
    }
    rq2 = r;
  }
  return {rq, x, rq - rq2, it + 1, false};
}

EigenSolution finish(const DiscreteOperator& op, RawEigen raw, const ScalarField* a) {
  Vec w = raw.vec;
  double s = w.dot(op.mass);
  if (std::abs(s) < 1e-12) {
    int k = 0;
    w.cwiseAbs().maxCoeff(&k);
    s = w(k);
  }
  if (s < 0) w = -w;
  w /= std::sqrt(op.inner(w, w));
  PriorDensity p{.grid = op.grid};
  p.omega.assign(w.data(), w.data() + w.size());
  p.lambda.resize(w.size());
  for (int i = 0; i < w.size(); ++i) {
    double a2 = a ? a->values[i] * a->values[i] : 1.0;
    p.lambda[i] = a2 * w(i) * w(i);
  }
  if (a) {
    std::vector<double> a2(w.size());
    for (int i = 0; i < w.size(); ++i) a2[i] = a->values[i] * a->values[i];
    p.flat_weight = a2;
  }
  fill_glog(p);
  const int dim = op.grid.manifold.dim();
  return EigenSolution{.alpha = raw.alpha,
                       .prior = std::move(p),
                       .residual = residual_of(op, w, raw.alpha),
                       .iterations = raw.iterations,
                       .spectral_gap = raw.gap,
                       .integrable_distribution = op.distribution_rank == 1 && dim > 1,
                       .dense = raw.dense};
}

}  // namespace

EigenSolution solve_optimal_prior(const DiscreteOperator& L) {
  RawEigen raw = L.size() < kDenseEigenLimit ? dense_top(L) : sparse_top(L);
  return finish(L, raw, nullptr);
}

EigenSolution solve_weighted_prior(const DiscreteOperator& La, const ScalarField& a) {
  if (a.values.size() != La.size()) throw GridMismatchError("weight field does not match operator");
  RawEigen raw = La.size() < kDenseEigenLimit ? dense_top(La) : sparse_top(La);
  return finish(La, raw, &a);
}

MinimaxReport minimax_report(const EigenSolution& sol, const DiscreteOperator& L, const std::vector<double>& e_density,
                             const std::vector<double>& epsilons) {
  MinimaxReport r;
  r.r_theta = sol.alpha;
  r.r_star = sol.alpha;
  r.epsilons = epsilons;
  auto [lo, hi] = std::minmax_element(e_density.begin(), e_density.end());
  r.affine = (*hi - *lo) <= 1e-10 * std::max(1.0, std::abs(*hi));
  for (double eps : epsilons) {
    if (r.affine) {
      r.alpha_eps.push_back(*hi + eps * eps * sol.alpha);
    } else {
      DiscreteOperator H = assemble_H(L, e_density, eps);
      r.alpha_eps.push_back(solve_optimal_prior(H).alpha);
    }
  }
  return r;
}

}  // namespace mapest
