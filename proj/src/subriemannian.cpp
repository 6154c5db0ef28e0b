#include "mapest/subriemannian.hpp"

#include "mapest/errors.hpp"

#include <array>

namespace mapest {

CometricField cometric(const MapDescriptor& gamma, const QuadratureGrid& grid) {
  if (grid.manifold != gamma.domain()) throw GridMismatchError("grid is not on the map's domain");
  CometricField c{grid, {}, {}};
  c.mu.reserve(grid.size());
  for (const auto& node : grid.nodes) {
    MapJet2 j = jet2(gamma, node);
    Mat gi = j.domain_metric.inverse();
    Mat mu = gi * j.differential.transpose() * j.codomain_metric * j.differential * gi;
    mu = 0.5 * (mu + mu.transpose());
    c.mu.push_back(mu);
    Eigen::JacobiSVD<Mat> svd(j.differential_orthonormal());
    const auto& sv = svd.singularValues();
    int r = 0;
    for (int k = 0; k < sv.size(); ++k)
      if (sv(k) > 1e-10 * std::max(1.0, sv(0))) ++r;
    c.rank.push_back(r);
  }
  return c;
}

CometricField riemannian_cometric(const QuadratureGrid& grid) {
  CometricField c{grid, {}, {}};
  for (const auto& node : grid.nodes) {
    c.mu.push_back(metric_at(node).inverse());
    c.rank.push_back(grid.manifold.dim());
  }
  return c;
}

namespace {

int constant_rank(const CometricField& mu) {
  if (mu.rank.empty()) return -1;
  for (int r : mu.rank)
    if (r != mu.rank.front()) return -1;
  return mu.rank.front();
}

// Q1 stiffness ∫ (density μ)(du, dv) dx over the chart cells of the grid.
SpMat q1_stiffness(const QuadratureGrid& grid, const std::vector<Mat>& dmu) {
  const int d = int(grid.axes.size());
  const std::size_t N = grid.size();
  // cells per axis
  std::vector<int> ncell(d);
  for (int a = 0; a < d; ++a) {
    int n = int(grid.axes[a].x.size());
    ncell[a] = grid.axes[a].periodic ? n : n - 1;
  }
  std::size_t total_cells = 1;
  for (int a = 0; a < d; ++a) total_cells *= std::size_t(ncell[a]);
  const int nv = 1 << d;
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(total_cells * nv * nv);
  std::vector<int> cm(d);
  std::vector<std::size_t> vidx(nv);
  std::vector<double> hlen(d);
  for (std::size_t c = 0; c < total_cells; ++c) {
    std::size_t rem = c;
    for (int a = d - 1; a >= 0; --a) {
      cm[a] = int(rem % std::size_t(ncell[a]));
      rem /= std::size_t(ncell[a]);
    }
    for (int a = 0; a < d; ++a) {
      const auto& ax = grid.axes[a];
      int n = int(ax.x.size());
      double x0 = ax.x[cm[a]];
      double x1 = (cm[a] + 1 < n) ? ax.x[cm[a] + 1] : ax.x[0] + kTwoPi;
      hlen[a] = x1 - x0;
    }
    for (int v = 0; v < nv; ++v) {
      std::vector<int> mi(d);
      for (int a = 0; a < d; ++a) {
        int n = int(grid.axes[a].x.size());
        mi[a] = (cm[a] + ((v >> a) & 1)) % n;
      }
      vidx[v] = grid.flat_index(mi);
    }
    Mat Ke = Mat::Zero(nv, nv);
    for (int g = 0; g < nv; ++g) {
      std::vector<double> t(d);
      for (int a = 0; a < d; ++a) t[a] = gp[(g >> a) & 1];
      // shape values and chart gradients at the Gauss point
      Vec phi(nv);
      Mat grad(d, nv);
      for (int v = 0; v < nv; ++v) {
        double val = 1;
        for (int a = 0; a < d; ++a) val *= ((v >> a) & 1) ? t[a] : 1 - t[a];
        phi(v) = val;
        for (int a = 0; a < d; ++a) {
          double gr = (((v >> a) & 1) ? 1.0 : -1.0) / hlen[a];
          for (int b = 0; b < d; ++b)
            if (b != a) gr *= ((v >> b) & 1) ? t[b] : 1 - t[b];
          grad(a, v) = gr;
        }
      }
      Mat m = Mat::Zero(d, d);
      for (int v = 0; v < nv; ++v) m += phi(v) * dmu[vidx[v]];
      double w = 1;
      for (int a = 0; a < d; ++a) w *= 0.5 * hlen[a];
      Ke += w * grad.transpose() * m * grad;
    }
    for (int p = 0; p < nv; ++p)
      for (int q = 0; q < nv; ++q) trip.emplace_back(int(vidx[p]), int(vidx[q]), Ke(p, q));
  }
  SpMat K(static_cast<int>(N), static_cast<int>(N));
  K.setFromTriplets(trip.begin(), trip.end());
  SpMat Kt = K.transpose();
  K = 0.5 * (K + Kt);
  return K;
}

std::vector<Mat> density_times_mu(const CometricField& mu, const ScalarField* a) {
  const auto& grid = mu.grid;
  std::vector<Mat> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double f = std::sqrt(metric_at(grid.nodes[i]).determinant());
    if (a) f *= a->values[i];
    out[i] = f * mu.mu[i];
  }
  return out;
}

void check_weight(const QuadratureGrid& grid, const ScalarField& a) {
  if (a.values.size() != grid.size()) throw GridMismatchError("weight field does not match grid");
  for (double v : a.values)
    if (!(v > 0)) throw DomainError("weight field must be positive");
}

}  // namespace

DiscreteOperator sublaplacian(const CometricField& mu, const ScalarField* a) {
  const auto& grid = mu.grid;
  if (a) check_weight(grid, *a);
  SpMat K = q1_stiffness(grid, density_times_mu(mu, a));
  Vec mass(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mass(i) = grid.weights[i] * (a ? a->values[i] : 1.0);
  return DiscreteOperator{grid, K, mass, OperatorKind::sublaplacian, std::nullopt, Vec::Zero(grid.size()), K,
                          constant_rank(mu)};
}

std::vector<double> weighted_potential(const ScalarField& kappa, const CometricField& mu, const ScalarField& a) {
  const auto& grid = mu.grid;
  check_weight(grid, a);
  ScalarField loga;
  loga.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) loga.values[i] = std::log(a.values[i]);
  if (a.fn) {
    auto f = a.fn;
    loga.fn = [f](const Vec& x) { return std::log(f(x)); };
  }
  auto g = loga.gradient(grid);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = kappa.values[i] + g[i].dot(mu.mu[i] * g[i]);
  return out;
}

DiscreteOperator assemble_L(const ScalarField& kappa, const CometricField& mu, const ScalarField* a) {
  const auto& grid = mu.grid;
  if (kappa.values.size() != grid.size()) throw GridMismatchError("κ field does not match grid");
  SpMat K = q1_stiffness(grid, density_times_mu(mu, nullptr));
  std::vector<double> pot = a ? weighted_potential(kappa, mu, *a) : kappa.values;
  const std::size_t N = grid.size();
  Vec potential(N), mass(N);
  std::vector<Eigen::Triplet<double>> diag;
  for (std::size_t i = 0; i < N; ++i) {
    potential(i) = pot[i];
    double a2 = a ? a->values[i] * a->values[i] : 1.0;
    mass(i) = grid.weights[i] * a2;
    diag.emplace_back(int(i), int(i), pot[i] * grid.weights[i]);
  }
  SpMat D(static_cast<int>(N), static_cast<int>(N));
  D.setFromTriplets(diag.begin(), diag.end());
  SpMat form = D - 4.0 * K;
  return DiscreteOperator{grid,      form, mass, a ? OperatorKind::L_a : OperatorKind::L, std::nullopt,
                          potential, K,    constant_rank(mu)};
}

DiscreteOperator assemble_H(const DiscreteOperator& L, const std::vector<double>& e_density, double epsilon) {
  if (!(epsilon > 0)) throw DomainError("H needs epsilon > 0");
  const std::size_t N = L.size();
  if (e_density.size() != N) throw GridMismatchError("|dγ|² field does not match operator");
  std::vector<Eigen::Triplet<double>> diag;
  Vec potential(N);
  for (std::size_t i = 0; i < N; ++i) {
    diag.emplace_back(int(i), int(i), e_density[i] * L.mass(i));
    potential(i) = e_density[i] + epsilon * epsilon * L.potential(i);
  }
  SpMat D(static_cast<int>(N), static_cast<int>(N));
  D.setFromTriplets(diag.begin(), diag.end());
  SpMat form = epsilon * epsilon * L.form + D;
  return DiscreteOperator{L.grid, form, L.mass, OperatorKind::H, epsilon, potential, L.stiffness, L.distribution_rank};
}

std::vector<double> kappa_field(const MapDescriptor& gamma, const QuadratureGrid& grid) {
  std::vector<double> k(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) k[i] = kappa_general(gamma, grid.nodes[i]).kappa;
  return k;
}

std::vector<double> e_density_field(const MapDescriptor& gamma, const QuadratureGrid& grid) {
  std::vector<double> e(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) e[i] = jet2(gamma, grid.nodes[i]).e_density();
  return e;
}

}  // namespace mapest
