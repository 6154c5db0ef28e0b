#include "mapest/maps.hpp"

#include "mapest/embedding.hpp"
#include "mapest/errors.hpp"
#include "mapest/grid_field.hpp"
#include "mapest/rng.hpp"

#include <sstream>

namespace mapest {

struct MapDescriptor::Data {
  MapKind kind;
  Manifold domain;
  Manifold codomain;
  std::string name;
  int power = 1;
  int factor = 0;
  Vec constant;
  ChartFn fn;
  std::shared_ptr<const Data> first, second;
};

namespace {

Vec codomain_diff(const Manifold& cod, const Vec& a, const Vec& b) {
  Vec d = a - b;
  for (int i = 0; i < d.size(); ++i)
    if (cod.periodic(i)) d(i) = wrap_diff(d(i));
  return d;
}

ChartJet fd_jet_once(const MapDescriptor::ChartFn& fn, const Manifold& cod, const Vec& x, double h) {
  const int m = int(x.size());
  Vec f0 = fn(x);
  const int n = int(f0.size());
  ChartJet j{f0, Mat::Zero(n, m), Array3(n, m, m)};
  auto at = [&](const Vec& dx) { return codomain_diff(cod, fn(x + dx), f0); };
  for (int i = 0; i < m; ++i) {
    Vec e = Vec::Zero(m);
    e(i) = h;
    Vec dp = at(e), dm = at(-e);
    j.first.col(i) = (dp - dm) / (2 * h);
    Vec d2 = (dp + dm) / (h * h);
    for (int a = 0; a < n; ++a) j.second(a, i, i) = d2(a);
    for (int k = i + 1; k < m; ++k) {
      Vec f = Vec::Zero(m);
      f(k) = h;
      Vec mixed = (at(e + f) - at(e - f) - at(-e + f) + at(-e - f)) / (4 * h * h);
      for (int a = 0; a < n; ++a) j.second(a, i, k) = j.second(a, k, i) = mixed(a);
    }
  }
  return j;
}

ChartJet fd_jet(const MapDescriptor::ChartFn& fn, const Manifold& cod, const Vec& x) {
  const double h = 1e-3;
  ChartJet a = fd_jet_once(fn, cod, x, h), b = fd_jet_once(fn, cod, x, h / 2);
  ChartJet r{a.value, (4 * b.first - a.first) / 3, Array3(a.second.dim0(), a.second.dim1(), a.second.dim2())};
  for (int p = 0; p < a.second.dim0(); ++p)
    for (int i = 0; i < a.second.dim1(); ++i)
      for (int k = 0; k < a.second.dim2(); ++k) r.second(p, i, k) = (4 * b.second(p, i, k) - a.second(p, i, k)) / 3;
  return r;
}

ChartJet jet_of(const MapDescriptor::Data& d, const Vec& x) {
  const int m = d.domain.dim(), n = d.codomain.dim();
  ChartJet j{Vec::Zero(n), Mat::Zero(n, m), Array3(n, m, m)};
  switch (d.kind) {
    case MapKind::identity:
      j.value = x;
      j.first = Mat::Identity(m, m);
      break;
    case MapKind::inclusion: {
      EmbeddingJet e = embedding_jet(ChartPoint{d.domain, x, 0});
      j.value = e.value;
      j.first = e.first;
      j.second = e.second;
      break;
    }
    case MapKind::circle_power:
      j.value(0) = d.power * x(0);
      j.first(0, 0) = d.power;
      break;
    case MapKind::torus_to_circle:
      j.value(0) = x(d.factor);
      j.first(0, d.factor) = 1.0;
      break;
    case MapKind::great_circle_into_sphere:
      j.value << kPi / 2, x(0);
      j.first(1, 0) = 1.0;
      break;
    case MapKind::constant:
      j.value = d.constant;
      break;
    case MapKind::custom:
      j = fd_jet(d.fn, d.codomain, x);
      break;
    case MapKind::composite: {
      ChartJet a = jet_of(*d.first, x);
      ChartJet b = jet_of(*d.second, a.value);
      const int k = int(a.value.size());
      j.value = b.value;
      j.first = b.first * a.first;
      for (int c = 0; c < n; ++c)
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < m; ++l) {
            double v = 0;
            for (int p = 0; p < k; ++p) {
              v += b.first(c, p) * a.second(p, i, l);
              for (int q = 0; q < k; ++q) v += b.second(c, p, q) * a.first(p, i) * a.first(q, l);
            }
            j.second(c, i, l) = v;
          }
      break;
    }
  }
  return j;
}

Vec value_of(const MapDescriptor::Data& d, const Vec& x) {
  switch (d.kind) {
    case MapKind::custom:
      return d.fn(x);
    case MapKind::composite:
      return value_of(*d.second, value_of(*d.first, x));
    default:
      return jet_of(d, x).value;
  }
}

// fold a sphere colatitude back into [0, π]; returns true when the chart frame flipped
bool fold_sphere(Vec& c) {
  double u = wrap_angle(c(0));
  if (u > kPi) {
    c(0) = kTwoPi - u;
    c(1) += kPi;
    return true;
  }
  c(0) = u;
  return false;
}

}  // namespace

MapDescriptor MapDescriptor::identity(const Manifold& m) {
  auto d = std::make_shared<Data>(Data{MapKind::identity, m, m, "identity", 1, 0, {}, {}, {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::inclusion(const Manifold& m) {
  if (!m.is_compact()) throw MapKindError("inclusion needs a catalog manifold");
  auto d = std::make_shared<Data>(
      Data{MapKind::inclusion, m, Manifold::euclidean(m.ambient_dim()), "inclusion", 1, 0, {}, {}, {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::circle_power(const Manifold& circle, int k) {
  if (circle.kind() != ManifoldKind::circle) throw MapKindError("circle-power needs a circle domain");
  if (k == 0) throw MapKindError("circle-power exponent must be nonzero");
  auto d = std::make_shared<Data>(
      Data{MapKind::circle_power, circle, circle, "circle-power(" + std::to_string(k) + ")", k, 0, {}, {}, {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::torus_to_circle(const Manifold& flat_torus, int factor) {
  if (flat_torus.kind() != ManifoldKind::flat_torus) throw MapKindError("torus-to-circle needs a flat torus");
  if (factor < 0 || factor > 1) throw MapKindError("torus-to-circle factor must be 0 or 1");
  auto d = std::make_shared<Data>(Data{MapKind::torus_to_circle, flat_torus,
                                       Manifold::circle(flat_torus.params()[factor]), "torus-to-circle", 1, factor,
                                       {}, {}, {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::great_circle_into_sphere(const Manifold& circle) {
  if (circle.kind() != ManifoldKind::circle) throw MapKindError("great-circle map needs a circle domain");
  auto d = std::make_shared<Data>(Data{MapKind::great_circle_into_sphere, circle,
                                       Manifold::sphere(circle.params()[0]), "great-circle-into-sphere", 1, 0, {},
                                       {}, {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::constant(const Manifold& domain, const ChartPoint& value) {
  auto d = std::make_shared<Data>(
      Data{MapKind::constant, domain, value.manifold, "constant", 1, 0, value.coords, {}, {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::custom(const Manifold& domain, const Manifold& codomain, ChartFn fn, std::string name) {
  if (!fn) throw MapKindError("custom map needs a chart function");
  auto d = std::make_shared<Data>(
      Data{MapKind::custom, domain, codomain, std::move(name), 1, 0, {}, std::move(fn), {}, {}});
  return MapDescriptor(d);
}

MapDescriptor MapDescriptor::composite(const MapDescriptor& first, const MapDescriptor& second) {
  if (first.codomain() != second.domain()) throw MapKindError("composite: codomain/domain mismatch");
  auto d = std::make_shared<Data>(Data{MapKind::composite, first.domain(), second.codomain(),
                                       second.name() + "∘" + first.name(), 1, 0, {}, {}, first.d_, second.d_});
  return MapDescriptor(d);
}

MapKind MapDescriptor::kind() const { return d_->kind; }
const Manifold& MapDescriptor::domain() const { return d_->domain; }
const Manifold& MapDescriptor::codomain() const { return d_->codomain; }
std::string MapDescriptor::name() const { return d_->name; }
int MapDescriptor::power() const { return d_->power; }
int MapDescriptor::factor() const { return d_->factor; }

bool MapDescriptor::is_riemannian_immersion() const {
  switch (kind()) {
    case MapKind::identity:
    case MapKind::inclusion:
    case MapKind::great_circle_into_sphere:
      return true;
    case MapKind::circle_power:
      return std::abs(power()) == 1;
    default:
      return false;
  }
}

bool MapDescriptor::is_riemannian_submersion() const {
  switch (kind()) {
    case MapKind::identity:
    case MapKind::torus_to_circle:
      return true;
    case MapKind::circle_power:
      return std::abs(power()) == 1;
    default:
      return false;
  }
}

bool MapDescriptor::is_totally_geodesic() const {
  switch (kind()) {
    case MapKind::identity:
    case MapKind::circle_power:
    case MapKind::torus_to_circle:
    case MapKind::great_circle_into_sphere:
    case MapKind::constant:
      return true;
    case MapKind::inclusion:
      return false;
    default:
      return false;
  }
}

ChartJet MapDescriptor::chart_jet(const Vec& x) const { return jet_of(*d_, x); }
Vec MapDescriptor::chart_value(const Vec& x) const { return value_of(*d_, x); }

ChartPoint MapDescriptor::apply(const ChartPoint& theta) const {
  if (theta.manifold != domain()) throw DomainError("point is not in the map's domain");
  Vec c = chart_value(theta.coords);
  if (codomain().kind() == ManifoldKind::sphere) fold_sphere(c);
  return make_point(codomain(), c);
}

// ---------------------------------------------------------------- jets

double MapJet2::e_density() const {
  return (domain_metric.inverse() * differential.transpose() * codomain_metric * differential).trace();
}

double MapJet2::hessian_norm_sq() const {
  Array3 ho = hessian_orthonormal();
  return ho.squared_norm();
}

double MapJet2::tension_norm_sq() const { return tension.dot(codomain_metric * tension); }

Mat MapJet2::differential_orthonormal() const {
  return sqrt_spd(codomain_metric) * differential * inverse_sqrt_spd(domain_metric);
}

Array3 MapJet2::hessian_orthonormal() const {
  const int n = hessian.dim0(), m = hessian.dim1();
  Mat E = inverse_sqrt_spd(domain_metric), F = sqrt_spd(codomain_metric);
  Array3 out(n, m, m);
  std::vector<Mat> slices(n);
  for (int a = 0; a < n; ++a) slices[a] = E.transpose() * hessian.slice(a) * E;
  for (int b = 0; b < n; ++b)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double v = 0;
        for (int a = 0; a < n; ++a) v += F(b, a) * slices[a](i, j);
        out(b, i, j) = v;
      }
  return out;
}

MapJet2 jet2(const MapDescriptor& gamma, const ChartPoint& theta) {
  if (theta.manifold != gamma.domain()) throw DomainError("point is not in the map's domain");
  const int m = gamma.domain().dim(), n = gamma.codomain().dim();
  ChartJet cj = gamma.chart_jet(theta.coords);
  Vec c = cj.value;
  if (gamma.codomain().kind() == ManifoldKind::sphere && fold_sphere(c)) {
    // (u, v) -> (2π - u, v + π) flips the colatitude frame vector
    cj.first.row(0) *= -1;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) cj.second(0, i, k) *= -1;
  }
  ChartPoint y = make_point(gamma.codomain(), c);
  Array3 GM = christoffel_at(theta), GN = christoffel_at(y);
  Array3 hess(n, m, m);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double v = cj.second(a, i, j);
        for (int k = 0; k < m; ++k) v -= GM(k, i, j) * cj.first(a, k);
        for (int b = 0; b < n; ++b)
          for (int e = 0; e < n; ++e) v += GN(a, b, e) * cj.first(b, i) * cj.first(e, j);
        hess(a, i, j) = v;
      }
  Mat G = metric_at(theta);
  Mat gi = G.inverse();
  Vec tension = Vec::Zero(n);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) tension(a) += gi(i, j) * hess(a, i, j);
  return MapJet2{theta, y, cj.first, hess, tension, G, metric_at(y)};
}

Vec normal_coordinate_rep(const MapDescriptor& gamma, const ChartPoint& x, const Vec& w) {
  Mat E = inverse_sqrt_spd(metric_at(x));
  ChartPoint p = exp_map(x, make_tangent(x, Vec(E * w)));
  ChartPoint y0 = gamma.apply(x), y = gamma.apply(p);
  if (gamma.codomain_is_ambient()) return y.coords - y0.coords;
  TangentVector l = log_map(y0, y);
  return sqrt_spd(metric_at(y0)) * l.components;
}

namespace {

Array3 hessian_fd_once(const MapDescriptor& gamma, const ChartPoint& x, double h) {
  const int m = gamma.domain().dim(), n = gamma.codomain().dim();
  Array3 H(n, m, m);
  auto f = [&](const Vec& w) { return normal_coordinate_rep(gamma, x, w); };
  Vec f0 = f(Vec::Zero(m));
  for (int i = 0; i < m; ++i) {
    Vec e = Vec::Zero(m);
    e(i) = h;
    Vec d2 = (f(e) - 2 * f0 + f(-e)) / (h * h);
    for (int a = 0; a < n; ++a) H(a, i, i) = d2(a);
    for (int k = i + 1; k < m; ++k) {
      Vec g = Vec::Zero(m);
      g(k) = h;
      Vec mixed = (f(e + g) - f(e - g) - f(-e + g) + f(-e - g)) / (4 * h * h);
      for (int a = 0; a < n; ++a) H(a, i, k) = H(a, k, i) = mixed(a);
    }
  }
  return H;
}

Array4 third_fd_once(const MapDescriptor& gamma, const ChartPoint& x, double h) {
  const int m = gamma.domain().dim(), n = gamma.codomain().dim();
  Array4 T(n, m);
  auto f = [&](const Vec& w) { return normal_coordinate_rep(gamma, x, w); };
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j)
      for (int k = j; k < m; ++k) {
        Vec acc = Vec::Zero(n);
        for (int s = 0; s < 8; ++s) {
          double s1 = (s & 1) ? -1 : 1, s2 = (s & 2) ? -1 : 1, s3 = (s & 4) ? -1 : 1;
          Vec w = Vec::Zero(m);
          w(i) += s1 * h;
          w(j) += s2 * h;
          w(k) += s3 * h;
          acc += s1 * s2 * s3 * f(w);
        }
        acc /= 8 * h * h * h;
        int idx[3] = {i, j, k};
        // all permutations
        int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (auto& p : perm)
          for (int a = 0; a < n; ++a) T(a, idx[p[0]], idx[p[1]], idx[p[2]]) = acc(a);
      }
  return T;
}

}  // namespace

Array3 hessian_normal_fd(const MapDescriptor& gamma, const ChartPoint& x, double h) {
  Array3 a = hessian_fd_once(gamma, x, h), b = hessian_fd_once(gamma, x, h / 2);
  Array3 r(a.dim0(), a.dim1(), a.dim2());
  for (int p = 0; p < a.dim0(); ++p)
    for (int i = 0; i < a.dim1(); ++i)
      for (int k = 0; k < a.dim2(); ++k) r(p, i, k) = (4 * b(p, i, k) - a(p, i, k)) / 3;
  return r;
}

Array4 third_order_term(const MapDescriptor& gamma, const ChartPoint& x, double h) {
  const int m = gamma.domain().dim(), n = gamma.codomain().dim();
  if (gamma.is_totally_geodesic()) return Array4(n, m);
  Array4 a = third_fd_once(gamma, x, h), b = third_fd_once(gamma, x, h / 2);
  Array4 r(n, m);
  for (int p = 0; p < n; ++p)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) r(p, i, j, k) = (4 * b(p, i, j, k) - a(p, i, j, k)) / 3;
  return r;
}

ChartPoint maclaurin_eval(const MapDescriptor& gamma, const ChartPoint& x, const TangentVector& v, int order) {
  if (order < 1 || order > 3) throw DomainError("maclaurin order must be 1, 2 or 3");
  if (norm(v) >= gamma.domain().injectivity_radius()) throw DomainError("maclaurin radius violation");
  const int m = gamma.domain().dim(), n = gamma.codomain().dim();
  MapJet2 j = jet2(gamma, x);
  Vec w = sqrt_spd(j.domain_metric) * v.components;
  Vec c = j.differential_orthonormal() * w;
  if (order >= 2 && !gamma.is_totally_geodesic()) c += 0.5 * j.hessian_orthonormal().contract(w, w);
  if (order >= 3 && !gamma.is_totally_geodesic()) {
    Array4 T = third_order_term(gamma, x);
    for (int a = 0; a < n; ++a) {
      double s = 0;
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) s += T(a, i, k, l) * w(i) * w(k) * w(l);
      c(a) += s / 6.0;
    }
  }
  if (gamma.codomain_is_ambient()) return make_point(gamma.codomain(), Vec(j.value.coords + c));
  Vec chart = inverse_sqrt_spd(j.codomain_metric) * c;
  return exp_map(j.value, make_tangent(j.value, chart));
}

// ---------------------------------------------------------------- curvature couplings

double codomain_ricci_term(const ChartPoint& y, const Mat& U) {
  if (y.manifold.kind() == ManifoldKind::euclidean || y.manifold.kind() == ManifoldKind::circle ||
      y.manifold.kind() == ManifoldKind::flat_torus)
    return 0.0;
  CurvatureData cd = curvature_at(y);
  Mat H = metric_at(y);
  const int n = int(U.rows()), k = int(U.cols());
  double s = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      // R(u_i, u_j) u_j
      Vec r = Vec::Zero(n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d) r(a) += cd.riemann(a, b, c, d) * U(b, j) * U(c, i) * U(d, j);
      s += U.col(i).dot(H * r);
    }
  return s;
}

double ricci_coupling(const MapDescriptor& gamma, const ChartPoint& theta) {
  MapJet2 j = jet2(gamma, theta);
  Mat E = inverse_sqrt_spd(j.domain_metric);
  CurvatureData cm = curvature_at(theta);
  Mat ric_endo = j.domain_metric.inverse() * cm.ricci;
  double t1 = 0;
  for (int i = 0; i < E.cols(); ++i) {
    Vec ui = j.differential * E.col(i);
    Vec ri = j.differential * (ric_endo * E.col(i));
    t1 += ui.dot(j.codomain_metric * ri);
  }
  return -t1 + codomain_ricci_term(j.value, j.differential * E);
}

double grad_tension_coupling(const MapDescriptor& gamma, const ChartPoint& theta) {
  if (gamma.is_totally_geodesic()) return 0.0;
  const int m = gamma.domain().dim(), n = gamma.codomain().dim();
  MapJet2 j0 = jet2(gamma, theta);
  auto tension_at = [&](const Vec& dx) { return jet2(gamma, make_point(gamma.domain(), Vec(theta.coords + dx))).tension; };
  Mat dtau(n, m);
  for (int i = 0; i < m; ++i) {
    auto central = [&](double h) {
      Vec e = Vec::Zero(m);
      e(i) = h;
      return Vec((tension_at(e) - tension_at(-e)) / (2 * h));
    };
    double h = 1e-3;
    dtau.col(i) = (4 * central(h / 2) - central(h)) / 3;
  }
  Array3 GN = christoffel_at(j0.value);
  Mat cov = dtau;  // (∇_i τ)^a
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < m; ++i)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) cov(a, i) += GN(a, b, c) * j0.differential(b, i) * j0.tension(c);
  Mat gi = j0.domain_metric.inverse();
  double s = 0;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) s += gi(i, k) * j0.differential.col(i).dot(j0.codomain_metric * cov.col(k));
  return s;
}

double kappa_from_parts(double hess_Gamma_sq, double ricci_Gamma, double tension_sq, double grad_tension) {
  return 0.5 * hess_Gamma_sq - (2.0 / 3.0) * ricci_Gamma + tension_sq + 2.0 * grad_tension;
}

CurvatureReport kappa_general(const MapDescriptor& gamma, const ChartPoint& theta) {
  MapJet2 j = jet2(gamma, theta);
  CurvatureReport r{.at = theta};
  r.e_density = j.e_density();
  r.hess_gamma_sq = j.hessian_norm_sq();
  r.tension_sq = j.tension_norm_sq();
  // Γ = γ∘π: the mixed tangent/normal blocks of ∇dπ feed dγ(B'_{e_i} n_α)
  Mat E = inverse_sqrt_spd(j.domain_metric);
  Array3 Bo = sff_orthonormal(theta);
  Frames fr = tangent_normal_frames(theta);
  const int m = theta.manifold.dim(), s = theta.manifold.ambient_dim();
  Mat U = j.differential * E;  // dγ(e_i), chart components
  double mixed = 0;
  for (int al = 0; al < fr.normal.cols(); ++al)
    for (int i = 0; i < m; ++i) {
      Vec w = Vec::Zero(U.rows());
      for (int k = 0; k < m; ++k) {
        double S = 0;
        for (int a = 0; a < s; ++a) S += Bo(a, i, k) * fr.normal(a, al);
        w += S * U.col(k);
      }
      mixed += w.dot(j.codomain_metric * w);
    }
  r.hess_Gamma_sq = r.hess_gamma_sq + 2.0 * mixed;
  r.ricci_coupling = codomain_ricci_term(j.value, U);
  r.grad_tension_coupling = grad_tension_coupling(gamma, theta);
  r.kappa = kappa_from_parts(r.hess_Gamma_sq, r.ricci_coupling, r.tension_sq, r.grad_tension_coupling);
  return r;
}

double kappa_immersion(const MapDescriptor& gamma, const ChartPoint& theta) {
  if (!gamma.is_riemannian_immersion()) throw MapKindError(gamma.name() + " is not a catalog riemannian immersion");
  SecondFundamentalForm sff = second_fundamental_form(theta);
  MapJet2 j = jet2(gamma, theta);
  return (5.0 / 3.0) * sff.norm_sq - (2.0 / 3.0) * sff.tension.squaredNorm() - j.hessian_norm_sq() / 6.0 -
         j.tension_norm_sq() / 3.0;
}

double kappa_submersion_formula(double scal_codomain, double tension_sq, double grad_tension) {
  return -scal_codomain / 6.0 + tension_sq + 1.5 * grad_tension;
}

double kappa_submersion(const MapDescriptor& gamma, const ChartPoint& theta) {
  if (!gamma.is_riemannian_submersion())
    throw MapKindError(gamma.name() + " is not a catalog riemannian submersion");
  MapJet2 j = jet2(gamma, theta);
  double scal = curvature_at(j.value).scalar;
  return kappa_submersion_formula(scal, j.tension_norm_sq(), grad_tension_coupling(gamma, theta));
}

double horizontal_scalar(const MapDescriptor& gamma, const ChartPoint& theta) {
  MapJet2 j = jet2(gamma, theta);
  Mat E = inverse_sqrt_spd(j.domain_metric);
  Mat Jo = j.differential_orthonormal();
  Mat ric_o = E.transpose() * curvature_at(theta).ricci * E;
  Eigen::JacobiSVD<Mat> svd(Jo, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double tol = 1e-10 * std::max(1.0, sv.size() ? sv(0) : 0.0);
  double s = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) > tol) s += svd.matrixV().col(k).dot(ric_o * svd.matrixV().col(k));
  return s;
}

double sffsub_residual(const MapDescriptor& gamma, const ChartPoint& theta) {
  if (!gamma.is_riemannian_submersion())
    throw MapKindError(gamma.name() + " is not a catalog riemannian submersion");
  MapJet2 j = jet2(gamma, theta);
  double rhs = curvature_at(j.value).scalar - horizontal_scalar(gamma, theta) - grad_tension_coupling(gamma, theta);
  return j.hessian_norm_sq() - rhs;
}

// ---------------------------------------------------------------- integration by parts

std::vector<Vec> ibp_test_section(const MapDescriptor& gamma, const QuadratureGrid& grid, int k) {
  const int n = gamma.codomain().dim();
  std::vector<Vec> out(grid.size(), Vec::Zero(n));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec& c = grid.nodes[i].coords;
    for (int a = 0; a < n; ++a) {
      double v = std::cos(k * c(0) + 0.7 * a);
      if (c.size() > 1) v += 0.5 * std::sin(c(c.size() - 1) + a);
      out[i](a) = v;
    }
  }
  return out;
}

double ibp_residual(const std::vector<double>& lambda, const MapDescriptor& gamma, const QuadratureGrid& grid,
                    const std::vector<Vec>& sigma) {
  if (lambda.size() != grid.size() || sigma.size() != grid.size())
    throw GridMismatchError("ibp fields do not match the grid");
  if (grid.manifold != gamma.domain()) throw GridMismatchError("grid is not on the map's domain");
  const int n = gamma.codomain().dim();
  auto dl = grid_gradient(grid, lambda);
  std::vector<std::vector<Vec>> dsig(n);
  for (int a = 0; a < n; ++a) {
    std::vector<double> comp(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) comp[i] = sigma[i](a);
    dsig[a] = grid_gradient(grid, comp);
  }
  double total = 0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    MapJet2 j = jet2(gamma, grid.nodes[node]);
    const int m = int(j.differential.cols());
    Array3 GN = christoffel_at(j.value);
    Mat cov(n, m);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < m; ++i) {
        double v = dsig[a][node](i);
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) v += GN(a, b, c) * j.differential(b, i) * sigma[node](c);
        cov(a, i) = v;
      }
    Mat gi = j.domain_metric.inverse();
    double dsdg = 0;
    for (int i = 0; i < m; ++i)
      for (int k = 0; k < m; ++k) dsdg += gi(i, k) * cov.col(i).dot(j.codomain_metric * j.differential.col(k));
    Vec drift = lambda[node] * j.tension + j.differential * (gi * dl[node]);
    double t2 = sigma[node].dot(j.codomain_metric * drift);
    total += grid.weights[node] * (lambda[node] * dsdg + t2);
  }
  return total;
}

// ---------------------------------------------------------------- moments

MomentReport gaussian_moment_check(const MapDescriptor& gamma, const ChartPoint& theta, std::size_t n,
                                   std::uint64_t seed) {
  if (n < 10000) throw DomainError("moment check needs at least 1e4 samples");
  const int m = gamma.domain().dim(), k = gamma.codomain().dim();
  MapJet2 j = jet2(gamma, theta);
  Mat Jo = j.differential_orthonormal();
  Array3 Ho = j.hessian_orthonormal();
  Array4 T = third_order_term(gamma, theta);
  GaussianStream rng(stream_seed(seed, 0));
  double s[3] = {0, 0, 0}, q[3] = {0, 0, 0};
  Vec v(m);
  for (std::size_t t = 0; t < n; ++t) {
    for (int i = 0; i < m; ++i) v(i) = rng.normal();
    Vec d = Jo * v;
    Vec h = Ho.contract(v, v);
    Vec c = Vec::Zero(k);
    for (int a = 0; a < k; ++a)
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < m; ++l)
          for (int p = 0; p < m; ++p) c(a) += T(a, i, l, p) * v(i) * v(l) * v(p);
    double x[3] = {d.squaredNorm(), h.squaredNorm(), d.dot(c)};
    for (int r = 0; r < 3; ++r) {
      s[r] += x[r];
      q[r] += x[r] * x[r];
    }
  }
  MomentReport rep;
  rep.samples = n;
  MomentEstimate* out[3] = {&rep.first, &rep.second, &rep.third};
  for (int r = 0; r < 3; ++r) {
    double mean = s[r] / double(n);
    double var = std::max(0.0, q[r] / double(n) - mean * mean) * double(n) / double(n - 1);
    out[r]->mc = mean;
    out[r]->std_error = std::sqrt(var / double(n));
  }
  rep.first.closed_form = j.e_density();
  rep.second.closed_form = j.tension_norm_sq() + 2.0 * j.hessian_norm_sq();
  rep.third.closed_form = 3.0 * grad_tension_coupling(gamma, theta) - 2.0 * ricci_coupling(gamma, theta);
  return rep;
}

}  // namespace mapest
