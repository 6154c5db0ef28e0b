#include "mapest/manifold.hpp"

#include "mapest/errors.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

namespace mapest {

struct Manifold::Data {
  ManifoldKind kind;
  int dim = 0;
  int ambient = 0;
  std::vector<double> params;
  std::vector<Manifold> factors;
  std::vector<int> coord_off;
  std::vector<int> amb_off;
};

namespace {

void require_positive(double r, const char* what) {
  if (!(r > 0) || !std::isfinite(r)) throw DomainError(std::string(what) + " must be positive and finite");
}

ChartPoint factor_point(const ChartPoint& p, int k) {
  const Manifold& f = p.manifold.factors()[k];
  ChartPoint q{f, p.coords.segment(p.manifold.coord_offset(k), f.dim()), 0};
  return q;
}

double sphere_u_from_ambient(const Vec& x) {
  return std::atan2(std::hypot(x(0), x(1)), x(2));
}

}  // namespace

Manifold Manifold::circle(double radius) {
  require_positive(radius, "circle radius");
  auto d = std::make_shared<Data>();
  d->kind = ManifoldKind::circle;
  d->dim = 1;
  d->ambient = 2;
  d->params = {radius};
  return Manifold(d);
}

Manifold Manifold::sphere(double radius) {
  require_positive(radius, "sphere radius");
  auto d = std::make_shared<Data>();
  d->kind = ManifoldKind::sphere;
  d->dim = 2;
  d->ambient = 3;
  d->params = {radius};
  return Manifold(d);
}

Manifold Manifold::flat_torus(double r1, double r2) {
  require_positive(r1, "flat torus radius");
  require_positive(r2, "flat torus radius");
  auto d = std::make_shared<Data>();
  d->kind = ManifoldKind::flat_torus;
  d->dim = 2;
  d->ambient = 4;
  d->params = {r1, r2};
  return Manifold(d);
}

Manifold Manifold::torus_of_revolution(double major, double minor) {
  require_positive(major, "torus major radius");
  require_positive(minor, "torus minor radius");
  if (!(major > minor)) throw DomainError("torus of revolution needs R > r");
  auto d = std::make_shared<Data>();
  d->kind = ManifoldKind::torus_of_revolution;
  d->dim = 2;
  d->ambient = 3;
  d->params = {major, minor};
  return Manifold(d);
}

Manifold Manifold::product(std::vector<Manifold> factors) {
  if (factors.empty()) throw DomainError("product of zero factors");
  auto d = std::make_shared<Data>();
  d->kind = ManifoldKind::product;
  for (const auto& f : factors) {
    if (f.kind() == ManifoldKind::euclidean) throw DomainError("product factors must be compact");
    d->coord_off.push_back(d->dim);
    d->amb_off.push_back(d->ambient);
    d->dim += f.dim();
    d->ambient += f.ambient_dim();
  }
  d->factors = std::move(factors);
  return Manifold(d);
}

Manifold Manifold::euclidean(int n) {
  if (n < 1) throw DomainError("euclidean dimension must be >= 1");
  auto d = std::make_shared<Data>();
  d->kind = ManifoldKind::euclidean;
  d->dim = n;
  d->ambient = n;
  return Manifold(d);
}

ManifoldKind Manifold::kind() const { return d_->kind; }
int Manifold::dim() const { return d_->dim; }
int Manifold::ambient_dim() const { return d_->ambient; }
const std::vector<double>& Manifold::params() const { return d_->params; }
const std::vector<Manifold>& Manifold::factors() const { return d_->factors; }
int Manifold::coord_offset(int k) const { return d_->coord_off.at(k); }
int Manifold::ambient_offset(int k) const { return d_->amb_off.at(k); }

bool Manifold::periodic(int axis) const {
  switch (kind()) {
    case ManifoldKind::circle:
    case ManifoldKind::flat_torus:
    case ManifoldKind::torus_of_revolution:
      return true;
    case ManifoldKind::sphere:
      return axis == 1;
    case ManifoldKind::euclidean:
      return false;
    case ManifoldKind::product:
      for (std::size_t k = 0; k < factors().size(); ++k) {
        int off = coord_offset(int(k));
        if (axis < off + factors()[k].dim()) return factors()[k].periodic(axis - off);
      }
  }
  return false;
}

bool Manifold::is_compact() const { return kind() != ManifoldKind::euclidean; }

double Manifold::injectivity_radius() const {
  const auto& p = params();
  switch (kind()) {
    case ManifoldKind::circle:
    case ManifoldKind::sphere:
      return kPi * p[0];
    case ManifoldKind::flat_torus:
      return kPi * std::min(p[0], p[1]);
    case ManifoldKind::torus_of_revolution:
      return std::min(kPi * p[1], 2.0 * reach());
    case ManifoldKind::product: {
      double r = std::numeric_limits<double>::infinity();
      for (const auto& f : factors()) r = std::min(r, f.injectivity_radius());
      return r;
    }
    case ManifoldKind::euclidean:
      return std::numeric_limits<double>::infinity();
  }
  return 0;
}

double Manifold::reach() const {
  const auto& p = params();
  switch (kind()) {
    case ManifoldKind::circle:
    case ManifoldKind::sphere:
      return p[0];
    case ManifoldKind::flat_torus:
      return std::min(p[0], p[1]);
    case ManifoldKind::torus_of_revolution:
      return std::min(p[1], p[0] - p[1]);
    case ManifoldKind::product: {
      double r = std::numeric_limits<double>::infinity();
      for (const auto& f : factors()) r = std::min(r, f.reach());
      return r;
    }
    case ManifoldKind::euclidean:
      return std::numeric_limits<double>::infinity();
  }
  return 0;
}

double Manifold::volume() const {
  const auto& p = params();
  switch (kind()) {
    case ManifoldKind::circle:
      return kTwoPi * p[0];
    case ManifoldKind::sphere:
      return 4 * kPi * p[0] * p[0];
    case ManifoldKind::flat_torus:
      return kTwoPi * kTwoPi * p[0] * p[1];
    case ManifoldKind::torus_of_revolution:
      return kTwoPi * kTwoPi * p[0] * p[1];
    case ManifoldKind::product: {
      double v = 1;
      for (const auto& f : factors()) v *= f.volume();
      return v;
    }
    case ManifoldKind::euclidean:
      return std::numeric_limits<double>::infinity();
  }
  return 0;
}

std::string Manifold::name() const {
  std::ostringstream os;
  const auto& p = params();
  switch (kind()) {
    case ManifoldKind::circle:
      os << "circle(" << p[0] << ")";
      break;
    case ManifoldKind::sphere:
      os << "sphere(" << p[0] << ")";
      break;
    case ManifoldKind::flat_torus:
      os << "flat-torus(" << p[0] << "," << p[1] << ")";
      break;
    case ManifoldKind::torus_of_revolution:
      os << "torus-of-revolution(" << p[0] << "," << p[1] << ")";
      break;
    case ManifoldKind::product:
      os << "product(";
      for (std::size_t k = 0; k < factors().size(); ++k) os << (k ? "," : "") << factors()[k].name();
      os << ")";
      break;
    case ManifoldKind::euclidean:
      os << "euclidean(" << dim() << ")";
      break;
  }
  return os.str();
}

bool Manifold::operator==(const Manifold& o) const {
  if (d_ == o.d_) return true;
  if (kind() != o.kind() || dim() != o.dim() || params() != o.params()) return false;
  if (factors().size() != o.factors().size()) return false;
  for (std::size_t k = 0; k < factors().size(); ++k)
    if (factors()[k] != o.factors()[k]) return false;
  return true;
}

// ---------------------------------------------------------------- points

ChartPoint make_point(const Manifold& m, const Vec& coords) {
  if (coords.size() != m.dim()) throw DomainError("coordinate count does not match " + m.name());
  Vec c = coords;
  for (int i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c(i))) throw DomainError("non-finite coordinate");
    if (m.periodic(i)) c(i) = wrap_angle(c(i));
  }
  auto check_colatitude = [](double& u) {
    if (u < -1e-12 || u > kPi + 1e-12) throw DomainError("colatitude outside [0, pi]");
    u = std::clamp(u, 0.0, kPi);
  };
  if (m.kind() == ManifoldKind::sphere) check_colatitude(c(0));
  if (m.kind() == ManifoldKind::product) {
    for (std::size_t k = 0; k < m.factors().size(); ++k)
      if (m.factors()[k].kind() == ManifoldKind::sphere) check_colatitude(c(m.coord_offset(int(k))));
  }
  return ChartPoint{m, c, 0};
}

ChartPoint make_point(const Manifold& m, std::initializer_list<double> coords) {
  Vec c(static_cast<int>(coords.size()));
  int i = 0;
  for (double x : coords) c(i++) = x;
  return make_point(m, c);
}

TangentVector make_tangent(const ChartPoint& p, const Vec& components) {
  if (components.size() != p.manifold.dim()) throw DomainError("tangent component count mismatch");
  EmbeddingJet j = embedding_jet(p);
  return TangentVector{p, components, Vec(j.first * components)};
}

TangentVector make_tangent(const ChartPoint& p, std::initializer_list<double> components) {
  Vec c(static_cast<int>(components.size()));
  int i = 0;
  for (double x : components) c(i++) = x;
  return make_tangent(p, c);
}

TangentVector tangent_from_ambient(const ChartPoint& p, const Vec& ambient) {
  EmbeddingJet j = embedding_jet(p);
  // least squares keeps the chart-singular directions (sphere poles) harmless
  Vec c = j.first.completeOrthogonalDecomposition().solve(ambient);
  Vec tangential = j.first * c;
  if (p.manifold.kind() == ManifoldKind::sphere) {
    // at a pole the chart frame is rank one; keep the true tangential part
    Vec n = j.value.normalized();
    tangential = ambient - n * n.dot(ambient);
  }
  return TangentVector{p, c, tangential};
}

double norm(const TangentVector& v) {
  if (v.ambient_rep) return v.ambient_rep->norm();
  return std::sqrt(std::max(0.0, v.components.dot(metric_at(v.base) * v.components)));
}

// ---------------------------------------------------------------- jets

EmbeddingJet embedding_jet(const ChartPoint& p) {
  const Manifold& m = p.manifold;
  const int n = m.dim(), s = m.ambient_dim();
  EmbeddingJet j{Vec::Zero(s), Mat::Zero(s, n), Array3(s, n, n)};
  const auto& par = m.params();
  switch (m.kind()) {
    case ManifoldKind::circle: {
      double r = par[0], c = std::cos(p.coords(0)), sn = std::sin(p.coords(0));
      j.value << r * c, r * sn;
      j.first << -r * sn, r * c;
      j.second(0, 0, 0) = -r * c;
      j.second(1, 0, 0) = -r * sn;
      break;
    }
    case ManifoldKind::sphere: {
      double r = par[0], u = p.coords(0), v = p.coords(1);
      double su = std::sin(u), cu = std::cos(u), sv = std::sin(v), cv = std::cos(v);
      j.value << r * su * cv, r * su * sv, r * cu;
      j.first << r * cu * cv, -r * su * sv, r * cu * sv, r * su * cv, -r * su, 0.0;
      for (int a = 0; a < 3; ++a) j.second(a, 0, 0) = -j.value(a);
      j.second(0, 0, 1) = j.second(0, 1, 0) = -r * cu * sv;
      j.second(1, 0, 1) = j.second(1, 1, 0) = r * cu * cv;
      j.second(0, 1, 1) = -r * su * cv;
      j.second(1, 1, 1) = -r * su * sv;
      break;
    }
    case ManifoldKind::flat_torus: {
      for (int k = 0; k < 2; ++k) {
        double r = par[k], c = std::cos(p.coords(k)), sn = std::sin(p.coords(k));
        j.value(2 * k) = r * c;
        j.value(2 * k + 1) = r * sn;
        j.first(2 * k, k) = -r * sn;
        j.first(2 * k + 1, k) = r * c;
        j.second(2 * k, k, k) = -r * c;
        j.second(2 * k + 1, k, k) = -r * sn;
      }
      break;
    }
    case ManifoldKind::torus_of_revolution: {
      double R = par[0], r = par[1], u = p.coords(0), v = p.coords(1);
      double su = std::sin(u), cu = std::cos(u), sv = std::sin(v), cv = std::cos(v);
      double rho = R + r * cu;
      j.value << rho * cv, rho * sv, r * su;
      j.first << -r * su * cv, -rho * sv, -r * su * sv, rho * cv, r * cu, 0.0;
      j.second(0, 0, 0) = -r * cu * cv;
      j.second(1, 0, 0) = -r * cu * sv;
      j.second(2, 0, 0) = -r * su;
      j.second(0, 0, 1) = j.second(0, 1, 0) = r * su * sv;
      j.second(1, 0, 1) = j.second(1, 1, 0) = -r * su * cv;
      j.second(0, 1, 1) = -rho * cv;
      j.second(1, 1, 1) = -rho * sv;
      break;
    }
    case ManifoldKind::product: {
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        EmbeddingJet f = embedding_jet(factor_point(p, int(k)));
        int co = m.coord_offset(int(k)), ao = m.ambient_offset(int(k));
        int fn = f.first.cols(), fs = f.first.rows();
        j.value.segment(ao, fs) = f.value;
        j.first.block(ao, co, fs, fn) = f.first;
        for (int a = 0; a < fs; ++a)
          for (int i = 0; i < fn; ++i)
            for (int b = 0; b < fn; ++b) j.second(ao + a, co + i, co + b) = f.second(a, i, b);
      }
      break;
    }
    case ManifoldKind::euclidean:
      j.value = p.coords;
      j.first = Mat::Identity(n, n);
      break;
  }
  return j;
}

Mat metric_at(const ChartPoint& p) {
  const Manifold& m = p.manifold;
  const auto& par = m.params();
  switch (m.kind()) {
    case ManifoldKind::circle:
      return Mat::Constant(1, 1, par[0] * par[0]);
    case ManifoldKind::sphere: {
      double r = par[0], su = std::sin(p.coords(0));
      Mat g = Mat::Zero(2, 2);
      g(0, 0) = r * r;
      g(1, 1) = r * r * su * su;
      return g;
    }
    case ManifoldKind::flat_torus: {
      Mat g = Mat::Zero(2, 2);
      g(0, 0) = par[0] * par[0];
      g(1, 1) = par[1] * par[1];
      return g;
    }
    case ManifoldKind::torus_of_revolution: {
      double rho = par[0] + par[1] * std::cos(p.coords(0));
      Mat g = Mat::Zero(2, 2);
      g(0, 0) = par[1] * par[1];
      g(1, 1) = rho * rho;
      return g;
    }
    case ManifoldKind::product: {
      Mat g = Mat::Zero(m.dim(), m.dim());
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        int co = m.coord_offset(int(k)), fn = m.factors()[k].dim();
        g.block(co, co, fn, fn) = metric_at(factor_point(p, int(k)));
      }
      return g;
    }
    case ManifoldKind::euclidean:
      return Mat::Identity(m.dim(), m.dim());
  }
  return {};
}

Array3 christoffel_at(const ChartPoint& p) {
  const Manifold& m = p.manifold;
  const int n = m.dim();
  Array3 G(n, n, n);
  const auto& par = m.params();
  switch (m.kind()) {
    case ManifoldKind::sphere: {
      double u = p.coords(0), su = std::sin(u), cu = std::cos(u);
      G(0, 1, 1) = -su * cu;
      if (su != 0.0) G(1, 0, 1) = G(1, 1, 0) = cu / su;
      break;
    }
    case ManifoldKind::torus_of_revolution: {
      double R = par[0], r = par[1], su = std::sin(p.coords(0)), cu = std::cos(p.coords(0));
      double rho = R + r * cu;
      G(0, 1, 1) = rho * su / r;
      G(1, 0, 1) = G(1, 1, 0) = -r * su / rho;
      break;
    }
    case ManifoldKind::product: {
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        Array3 f = christoffel_at(factor_point(p, int(k)));
        int co = m.coord_offset(int(k)), fn = m.factors()[k].dim();
        for (int a = 0; a < fn; ++a)
          for (int i = 0; i < fn; ++i)
            for (int j = 0; j < fn; ++j) G(co + a, co + i, co + j) = f(a, i, j);
      }
      break;
    }
    default:
      break;
  }
  return G;
}

// ---------------------------------------------------------------- geodesics

namespace {

Vec sphere_chart_from_ambient(const Vec& x) {
  Vec c(2);
  c(0) = sphere_u_from_ambient(x);
  double h = std::hypot(x(0), x(1));
  c(1) = h > 0 ? wrap_angle(std::atan2(x(1), x(0))) : 0.0;
  return c;
}

// geodesic ODE on the torus of revolution, state (u, v, u', v')
Eigen::Vector4d torus_rhs(const Eigen::Vector4d& s, double R, double r) {
  double su = std::sin(s(0)), cu = std::cos(s(0));
  double rho = R + r * cu;
  Eigen::Vector4d d;
  d(0) = s(2);
  d(1) = s(3);
  d(2) = -(rho * su / r) * s(3) * s(3);
  d(3) = 2.0 * (r * su / rho) * s(2) * s(3);
  return d;
}

Vec torus_exp_coords(const Manifold& m, const Vec& p, const Vec& w) {
  const double R = m.params()[0], r = m.params()[1];
  double rho = R + r * std::cos(p(0));
  double speed = std::sqrt(r * r * w(0) * w(0) + rho * rho * w(1) * w(1));
  double hmax = m.injectivity_radius() / 64.0;
  int steps = std::max(8, int(std::ceil(speed / hmax)));
  double dt = 1.0 / steps;
  Eigen::Vector4d s(p(0), p(1), w(0), w(1));
  for (int k = 0; k < steps; ++k) {
    Eigen::Vector4d k1 = torus_rhs(s, R, r);
    Eigen::Vector4d k2 = torus_rhs(s + 0.5 * dt * k1, R, r);
    Eigen::Vector4d k3 = torus_rhs(s + 0.5 * dt * k2, R, r);
    Eigen::Vector4d k4 = torus_rhs(s + dt * k3, R, r);
    s += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  if (!s.allFinite()) throw IntegrationError("geodesic integration produced non-finite state");
  Vec out(2);
  out << s(0), s(1);
  return out;
}

Vec chart_residual(const Vec& a, const Vec& b) {
  Vec d(a.size());
  for (int i = 0; i < a.size(); ++i) d(i) = wrap_diff(a(i) - b(i));
  return d;
}

struct ShootResult {
  Vec w;
  bool ok;
};

ShootResult torus_newton(const Manifold& m, const Vec& p, const Vec& q, Vec w) {
  auto F = [&](const Vec& x) { return chart_residual(torus_exp_coords(m, p, x), q); };
  Vec f = F(w);
  for (int it = 0; it < 50; ++it) {
    if (f.lpNorm<Eigen::Infinity>() < 1e-13) return {w, true};
    Mat J(2, 2);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Vec e = Vec::Zero(2);
      e(k) = h;
      J.col(k) = (chart_residual(torus_exp_coords(m, p, w + e), torus_exp_coords(m, p, w - e))) / (2 * h);
    }
    Vec step = J.fullPivLu().solve(f);
    if (!step.allFinite()) return {w, false};
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
      Vec wn = w - t * step;
      Vec fn = F(wn);
      if (fn.norm() < f.norm()) {
        w = wn;
        f = fn;
        improved = true;
        break;
      }
    }
    if (!improved) return {w, f.lpNorm<Eigen::Infinity>() < 1e-11};
  }
  return {w, f.lpNorm<Eigen::Infinity>() < 1e-11};
}

double chart_speed(const Manifold& m, const Vec& p, const Vec& w) {
  ChartPoint cp{m, p, 0};
  return std::sqrt(std::max(0.0, w.dot(metric_at(cp) * w)));
}

Vec torus_log_coords(const Manifold& m, const Vec& p, const Vec& q) {
  const double inj = m.injectivity_radius();
  Vec guess = chart_residual(q, p);
  ShootResult res = torus_newton(m, p, q, guess);
  if (!res.ok || chart_speed(m, p, res.w) >= inj) {
    // continuation along the chart segment
    Vec w = Vec::Zero(2);
    const int stages = 16;
    bool ok = true;
    for (int k = 1; k <= stages && ok; ++k) {
      Vec target = p + guess * (double(k) / stages);
      for (int i = 0; i < 2; ++i) target(i) = wrap_angle(target(i));
      ShootResult st = torus_newton(m, p, target, w);
      ok = st.ok;
      w = st.w;
    }
    if (!ok) throw ShootingError("torus log shooting did not converge");
    res = {w, true};
  }
  if (chart_speed(m, p, res.w) > inj - m.cut_margin())
    throw CutLocusError("target within cut margin of the injectivity radius");
  return res.w;
}

double torus_graph_distance(const Manifold& m, const Vec& p, const Vec& q) {
  const int n = 128;
  const double h = kTwoPi / n;
  auto node_of = [&](const Vec& c) {
    int i = int(std::lround(c(0) / h)) % n, j = int(std::lround(c(1) / h)) % n;
    return std::pair<int, int>{i, j};
  };
  auto coords_of = [&](int i, int j) {
    Vec c(2);
    c << i * h, j * h;
    return c;
  };
  auto seg = [&](const Vec& a, const Vec& d) {
    Vec mid = a + 0.5 * d;
    ChartPoint cp{m, mid, 0};
    return std::sqrt(d.dot(metric_at(cp) * d));
  };
  auto [pi, pj] = node_of(p);
  auto [qi, qj] = node_of(q);
  std::vector<double> dist(n * n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  dist[pi * n + pj] = 0;
  pq.push({0.0, pi * n + pj});
  static const int moves[16][2] = {{1, 0}, {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1}, {-1, 1}, {-1, -1},
                                   {2, 1}, {2, -1}, {-2, 1}, {-2, -1}, {1, 2}, {1, -2}, {-1, 2}, {-1, -2}};
  while (!pq.empty()) {
    auto [d, idx] = pq.top();
    pq.pop();
    if (d > dist[idx]) continue;
    int i = idx / n, j = idx % n;
    if (i == qi && j == qj) break;
    for (const auto& mv : moves) {
      int ni = ((i + mv[0]) % n + n) % n, nj = ((j + mv[1]) % n + n) % n;
      Vec dv(2);
      dv << mv[0] * h, mv[1] * h;
      double nd = d + seg(coords_of(i, j), dv);
      if (nd < dist[ni * n + nj]) {
        dist[ni * n + nj] = nd;
        pq.push({nd, ni * n + nj});
      }
    }
  }
  double base = dist[qi * n + qj];
  base += seg(p, chart_residual(coords_of(pi, pj), p)) + seg(q, chart_residual(coords_of(qi, qj), q));
  return base;
}

}  // namespace

ChartPoint exp_map(const ChartPoint& p, const TangentVector& v) {
  const Manifold& m = p.manifold;
  if (v.components.size() != m.dim()) throw DomainError("tangent vector dimension mismatch");
  switch (m.kind()) {
    case ManifoldKind::circle:
    case ManifoldKind::flat_torus:
    case ManifoldKind::euclidean:
      return make_point(m, Vec(p.coords + v.components));
    case ManifoldKind::sphere: {
      const double r = m.params()[0];
      EmbeddingJet j = embedding_jet(p);
      Vec x = j.value / r;
      Vec w = v.ambient_rep ? *v.ambient_rep : Vec(j.first * v.components);
      w -= x * x.dot(w);
      double len = w.norm();
      if (len == 0.0) return p;
      double t = len / r;
      Vec y = r * (std::cos(t) * x + std::sin(t) * (w / len));
      return make_point(m, sphere_chart_from_ambient(y));
    }
    case ManifoldKind::torus_of_revolution:
      return make_point(m, torus_exp_coords(m, p.coords, v.components));
    case ManifoldKind::product: {
      Vec c(m.dim());
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        ChartPoint fp = factor_point(p, int(k));
        int co = m.coord_offset(int(k)), fn = m.factors()[k].dim();
        TangentVector fv{fp, v.components.segment(co, fn), std::nullopt};
        if (v.ambient_rep)
          fv.ambient_rep = v.ambient_rep->segment(m.ambient_offset(int(k)), m.factors()[k].ambient_dim());
        c.segment(co, fn) = exp_map(fp, fv).coords;
      }
      return make_point(m, c);
    }
  }
  return p;
}

TangentVector log_map(const ChartPoint& p, const ChartPoint& q) {
  const Manifold& m = p.manifold;
  if (q.manifold != m) throw DomainError("log_map across different manifolds");
  const double margin = m.cut_margin();
  switch (m.kind()) {
    case ManifoldKind::circle:
    case ManifoldKind::flat_torus: {
      Vec d = chart_residual(q.coords, p.coords);
      for (int i = 0; i < d.size(); ++i) {
        double r = m.params()[i];
        if (r * (kPi - std::abs(d(i))) < margin) throw CutLocusError("target within cut margin of the cut locus");
      }
      return make_tangent(p, d);
    }
    case ManifoldKind::euclidean:
      return make_tangent(p, Vec(q.coords - p.coords));
    case ManifoldKind::sphere: {
      const double r = m.params()[0];
      EmbeddingJet jp = embedding_jet(p);
      Vec x = jp.value / r, y = embedding_jet(q).value / r;
      double c = std::clamp(x.dot(y), -1.0, 1.0);
      Vec perp = y - c * x;
      double psi = std::atan2(perp.norm(), c);
      if (r * (kPi - psi) < margin) throw CutLocusError("target within cut margin of the antipode");
      Vec w = Vec::Zero(3);
      if (perp.norm() > 0) w = perp.normalized() * (psi * r);
      return tangent_from_ambient(p, w);
    }
    case ManifoldKind::torus_of_revolution:
      return make_tangent(p, torus_log_coords(m, p.coords, q.coords));
    case ManifoldKind::product: {
      Vec comps(m.dim());
      Vec amb(m.ambient_dim());
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        TangentVector f = log_map(factor_point(p, int(k)), factor_point(q, int(k)));
        comps.segment(m.coord_offset(int(k)), f.components.size()) = f.components;
        amb.segment(m.ambient_offset(int(k)), f.ambient_rep->size()) = *f.ambient_rep;
      }
      return TangentVector{p, comps, amb};
    }
  }
  return make_tangent(p, Vec::Zero(m.dim()));
}

DistanceResult distance(const ChartPoint& p, const ChartPoint& q) {
  const Manifold& m = p.manifold;
  if (q.manifold != m) throw DomainError("distance across different manifolds");
  switch (m.kind()) {
    case ManifoldKind::circle:
    case ManifoldKind::flat_torus: {
      Vec d = chart_residual(q.coords, p.coords);
      double s = 0;
      for (int i = 0; i < d.size(); ++i) s += std::pow(m.params()[i] * d(i), 2);
      return {std::sqrt(s), DistanceAccuracy::exact};
    }
    case ManifoldKind::euclidean:
      return {(q.coords - p.coords).norm(), DistanceAccuracy::exact};
    case ManifoldKind::sphere: {
      const double r = m.params()[0];
      Eigen::Vector3d x = embedding_jet(p).value, y = embedding_jet(q).value;
      double s = x.cross(y).norm() / (r * r);
      double c = x.dot(y) / (r * r);
      return {r * std::atan2(s, c), DistanceAccuracy::exact};
    }
    case ManifoldKind::torus_of_revolution: {
      if (chart_residual(q.coords, p.coords).norm() == 0.0) return {0.0, DistanceAccuracy::exact};
      try {
        Vec w = torus_log_coords(m, p.coords, q.coords);
        return {chart_speed(m, p.coords, w), DistanceAccuracy::shooting};
      } catch (const Error&) {
        return {torus_graph_distance(m, p.coords, q.coords), DistanceAccuracy::graph_estimate};
      }
    }
    case ManifoldKind::product: {
      double s = 0;
      DistanceAccuracy acc = DistanceAccuracy::exact;
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        DistanceResult f = distance(factor_point(p, int(k)), factor_point(q, int(k)));
        s += f.value * f.value;
        if (f.accuracy != DistanceAccuracy::exact) acc = f.accuracy;
      }
      return {std::sqrt(s), acc};
    }
  }
  return {0.0, DistanceAccuracy::exact};
}

CurvatureData curvature_at(const ChartPoint& p) {
  const Manifold& m = p.manifold;
  const int n = m.dim();
  CurvatureData cd{Array4(n), Mat::Zero(n, n), 0.0, 0.0};
  double K = 0;
  bool surface = false;
  if (m.kind() == ManifoldKind::sphere) {
    K = 1.0 / (m.params()[0] * m.params()[0]);
    surface = true;
  } else if (m.kind() == ManifoldKind::torus_of_revolution) {
    double R = m.params()[0], r = m.params()[1], cu = std::cos(p.coords(0));
    K = cu / (r * (R + r * cu));
    surface = true;
  }
  if (surface) {
    Mat g = metric_at(p);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d)
            cd.riemann(a, b, c, d) = K * ((a == c ? g(b, d) : 0.0) - (a == d ? g(b, c) : 0.0));
    cd.ricci = K * g;
    cd.scalar = 2 * K;
    cd.gauss = K;
  } else if (m.kind() == ManifoldKind::product) {
    for (std::size_t k = 0; k < m.factors().size(); ++k) {
      CurvatureData f = curvature_at(factor_point(p, int(k)));
      int co = m.coord_offset(int(k)), fn = m.factors()[k].dim();
      for (int a = 0; a < fn; ++a)
        for (int b = 0; b < fn; ++b)
          for (int c = 0; c < fn; ++c)
            for (int d = 0; d < fn; ++d) cd.riemann(co + a, co + b, co + c, co + d) = f.riemann(a, b, c, d);
      cd.ricci.block(co, co, fn, fn) = f.ricci;
      cd.scalar += f.scalar;
    }
  }
  return cd;
}

// ---------------------------------------------------------------- grids

double QuadratureGrid::total_weight() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

std::size_t QuadratureGrid::flat_index(const std::vector<int>& multi) const {
  std::size_t idx = 0;
  for (std::size_t a = 0; a < axes.size(); ++a) idx = idx * axes[a].x.size() + std::size_t(multi[a]);
  return idx;
}

std::vector<int> QuadratureGrid::multi_index(std::size_t flat) const {
  std::vector<int> mi(axes.size());
  for (int a = int(axes.size()) - 1; a >= 0; --a) {
    std::size_t n = axes[a].x.size();
    mi[a] = int(flat % n);
    flat /= n;
  }
  return mi;
}

namespace {

// Gauss-Legendre nodes/weights on (-1, 1), ascending nodes.
void gauss_legendre(int n, std::vector<double>& t, std::vector<double>& w) {
  t.assign(n, 0);
  w.assign(n, 0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1, p2 = 0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1);
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p1 = 1, p2 = 0;
    for (int j = 1; j <= n; ++j) {
      double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1) * z * p2 - (j - 1.0) * p3) / j;
    }
    pp = n * (z * p1 - p2) / (z * z - 1);
    t[i] = -z;
    t[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1 - z * z) * pp * pp);
  }
}

GridAxis periodic_axis(int n) {
  GridAxis ax;
  ax.periodic = true;
  for (int k = 0; k < n; ++k) {
    ax.x.push_back(kTwoPi * k / n);
    ax.w.push_back(kTwoPi / n);
  }
  return ax;
}

void append_axes(const Manifold& m, const std::vector<int>& res, std::size_t& pos, std::vector<GridAxis>& axes) {
  auto take = [&]() {
    if (pos >= res.size()) throw DomainError("resolution has too few entries for " + m.name());
    int n = res[pos++];
    if (n < 8) throw DomainError("grid resolution must be >= 8 per axis");
    return n;
  };
  switch (m.kind()) {
    case ManifoldKind::circle:
      axes.push_back(periodic_axis(take()));
      break;
    case ManifoldKind::flat_torus:
    case ManifoldKind::torus_of_revolution:
      axes.push_back(periodic_axis(take()));
      axes.push_back(periodic_axis(take()));
      break;
    case ManifoldKind::sphere: {
      int nu = take(), nv = take();
      if (nv % 2 != 0) throw DomainError("sphere longitude count must be even for pole reflection");
      std::vector<double> t, w;
      gauss_legendre(nu, t, w);
      GridAxis au;
      au.periodic = false;
      // ascending colatitude: cos u descending
      for (int k = nu - 1; k >= 0; --k) {
        double u = std::acos(t[k]);
        au.x.push_back(u);
        au.w.push_back(w[k] / std::sin(u));
      }
      au.pole_partner = int(axes.size()) + 1;
      axes.push_back(au);
      axes.push_back(periodic_axis(nv));
      break;
    }
    case ManifoldKind::product:
      for (const auto& f : m.factors()) append_axes(f, res, pos, axes);
      break;
    case ManifoldKind::euclidean:
      throw DomainError("cannot build a quadrature grid on a non-compact space");
  }
}

}  // namespace

QuadratureGrid build_grid(const Manifold& m, const std::vector<int>& resolution) {
  QuadratureGrid g{m, {}, {}, resolution, {}};
  std::size_t pos = 0;
  append_axes(m, resolution, pos, g.axes);
  if (pos != resolution.size()) throw DomainError("resolution has too many entries for " + m.name());
  std::size_t total = 1;
  for (const auto& ax : g.axes) total *= ax.x.size();
  g.nodes.reserve(total);
  g.weights.reserve(total);
  for (std::size_t f = 0; f < total; ++f) {
    auto mi = g.multi_index(f);
    Vec c(m.dim());
    double w = 1;
    for (std::size_t a = 0; a < g.axes.size(); ++a) {
      c(a) = g.axes[a].x[mi[a]];
      w *= g.axes[a].w[mi[a]];
    }
    ChartPoint p = make_point(m, c);
    w *= std::sqrt(metric_at(p).determinant());
    g.nodes.push_back(p);
    g.weights.push_back(w);
  }
  return g;
}

QuadratureGrid build_grid(const Manifold& m, int per_axis) {
  std::vector<int> res;
  std::function<void(const Manifold&)> add = [&](const Manifold& f) {
    switch (f.kind()) {
      case ManifoldKind::circle:
        res.push_back(per_axis);
        break;
      case ManifoldKind::sphere:
        res.push_back(per_axis);
        res.push_back(2 * per_axis);
        break;
      case ManifoldKind::flat_torus:
      case ManifoldKind::torus_of_revolution:
        res.push_back(per_axis);
        res.push_back(per_axis);
        break;
      case ManifoldKind::product:
        for (const auto& g : f.factors()) add(g);
        break;
      case ManifoldKind::euclidean:
        throw DomainError("cannot build a quadrature grid on a non-compact space");
    }
  };
  add(m);
  return build_grid(m, res);
}

}  // namespace mapest
