#include "mapest/embedding.hpp"

#include "mapest/errors.hpp"

namespace mapest {

AmbientPoint embed(const ChartPoint& theta) { return {embedding_jet(theta).value}; }

namespace {

struct Foot {
  Vec coords;
  bool on_medial_axis;
};

Foot foot_of(const Manifold& m, const Vec& x) {
  const auto& p = m.params();
  switch (m.kind()) {
    case ManifoldKind::circle: {
      Vec c(1);
      c(0) = std::atan2(x(1), x(0));
      return {c, std::hypot(x(0), x(1)) == 0.0};
    }
    case ManifoldKind::sphere: {
      Vec c(2);
      c(0) = std::atan2(std::hypot(x(0), x(1)), x(2));
      c(1) = std::hypot(x(0), x(1)) > 0 ? std::atan2(x(1), x(0)) : 0.0;
      return {c, x.norm() == 0.0};
    }
    case ManifoldKind::flat_torus: {
      Vec c(2);
      c(0) = std::atan2(x(1), x(0));
      c(1) = std::atan2(x(3), x(2));
      return {c, std::hypot(x(0), x(1)) == 0.0 || std::hypot(x(2), x(3)) == 0.0};
    }
    case ManifoldKind::torus_of_revolution: {
      double rho = std::hypot(x(0), x(1));
      Vec c(2);
      c(1) = rho > 0 ? std::atan2(x(1), x(0)) : 0.0;
      c(0) = std::atan2(x(2), rho - p[0]);
      return {c, rho == 0.0 || std::hypot(rho - p[0], x(2)) == 0.0};
    }
    case ManifoldKind::product: {
      Vec c(m.dim());
      bool medial = false;
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        const Manifold& f = m.factors()[k];
        Foot ff = foot_of(f, x.segment(m.ambient_offset(int(k)), f.ambient_dim()));
        c.segment(m.coord_offset(int(k)), f.dim()) = ff.coords;
        medial = medial || ff.on_medial_axis;
      }
      return {c, medial};
    }
    case ManifoldKind::euclidean:
      return {x, false};
  }
  return {x, true};
}

}  // namespace

TubePoint project(const Manifold& m, const AmbientPoint& x) {
  if (x.coords.size() != m.ambient_dim()) throw DomainError("ambient dimension mismatch");
  if (!x.coords.allFinite()) throw DomainError("non-finite ambient point");
  const double reach = m.reach();
  Foot f = foot_of(m, x.coords);
  if (f.on_medial_axis) throw OutsideTubeError(reach, reach);
  ChartPoint foot = make_point(m, f.coords);
  Vec offset = x.coords - embedding_jet(foot).value;
  double dist = offset.norm();
  if (dist > reach) throw OutsideTubeError(dist, reach);
  return TubePoint{x, foot, offset, reach};
}

namespace {

Mat analytic_normals(const ChartPoint& theta) {
  const Manifold& m = theta.manifold;
  const int s = m.ambient_dim(), n = m.dim();
  Mat N = Mat::Zero(s, s - n);
  switch (m.kind()) {
    case ManifoldKind::circle:
      N << std::cos(theta.coords(0)), std::sin(theta.coords(0));
      break;
    case ManifoldKind::sphere: {
      double u = theta.coords(0), v = theta.coords(1);
      N << std::sin(u) * std::cos(v), std::sin(u) * std::sin(v), std::cos(u);
      break;
    }
    case ManifoldKind::flat_torus:
      N(0, 0) = std::cos(theta.coords(0));
      N(1, 0) = std::sin(theta.coords(0));
      N(2, 1) = std::cos(theta.coords(1));
      N(3, 1) = std::sin(theta.coords(1));
      break;
    case ManifoldKind::torus_of_revolution: {
      double u = theta.coords(0), v = theta.coords(1);
      N << std::cos(u) * std::cos(v), std::cos(u) * std::sin(v), std::sin(u);
      break;
    }
    case ManifoldKind::product: {
      int col = 0;
      for (std::size_t k = 0; k < m.factors().size(); ++k) {
        const Manifold& f = m.factors()[k];
        ChartPoint fp{f, theta.coords.segment(m.coord_offset(int(k)), f.dim()), 0};
        Mat fn = analytic_normals(fp);
        N.block(m.ambient_offset(int(k)), col, fn.rows(), fn.cols()) = fn;
        col += int(fn.cols());
      }
      break;
    }
    case ManifoldKind::euclidean:
      break;
  }
  return N;
}

}  // namespace

Frames tangent_normal_frames(const ChartPoint& theta) {
  const Manifold& m = theta.manifold;
  Mat N = analytic_normals(theta);
  EmbeddingJet j = embedding_jet(theta);
  Mat G = j.first.transpose() * j.first;
  Mat T;
  if (G.determinant() > 1e-14 * std::pow(G.trace(), m.dim())) {
    T = j.first * inverse_sqrt_spd(G);
  } else {
    // chart singularity (sphere pole): complement of the normal frame
    Eigen::HouseholderQR<Mat> qr(N);
    Mat Q = qr.householderQ() * Mat::Identity(m.ambient_dim(), m.ambient_dim());
    T = Q.rightCols(m.dim());
  }
  return {T, N};
}

SecondFundamentalForm second_fundamental_form(const ChartPoint& theta) {
  const Manifold& m = theta.manifold;
  const int s = m.ambient_dim(), n = m.dim();
  EmbeddingJet j = embedding_jet(theta);
  Array3 G = christoffel_at(theta);
  Array3 B(s, n, n);
  for (int a = 0; a < s; ++a)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        double v = j.second(a, i, k);
        for (int l = 0; l < n; ++l) v -= G(l, i, k) * j.first(a, l);
        B(a, i, k) = v;
      }
  Mat gi = metric_at(theta).inverse();
  Vec tension = Vec::Zero(s);
  double nsq = 0;
  for (int a = 0; a < s; ++a)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        tension(a) += gi(i, k) * B(a, i, k);
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q) nsq += gi(i, p) * gi(k, q) * B(a, i, k) * B(a, p, q);
      }
  return {theta, B, tension, nsq};
}

Array3 sff_orthonormal(const ChartPoint& theta) {
  const int n = theta.manifold.dim(), s = theta.manifold.ambient_dim();
  SecondFundamentalForm sff = second_fundamental_form(theta);
  Mat E = inverse_sqrt_spd(metric_at(theta));  // columns: orthonormal frame in chart components
  Array3 out(s, n, n);
  for (int a = 0; a < s; ++a) {
    Mat Ba = sff.values.slice(a);
    Mat Bo = E.transpose() * Ba * E;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) out(a, i, k) = Bo(i, k);
  }
  return out;
}

Array3 normal_projection_hessian(const ChartPoint& theta) {
  const int n = theta.manifold.dim(), s = theta.manifold.ambient_dim();
  Array3 Bo = sff_orthonormal(theta);
  // orthonormal tangent frame matching the frame used for Bo
  EmbeddingJet j = embedding_jet(theta);
  Mat T = j.first * inverse_sqrt_spd(metric_at(theta));
  Array3 H(s, s, s);
  for (int b = 0; b < s; ++b)
    for (int c = 0; c < s; ++c) {
      // p = E_b, q = E_c
      Vec out = Vec::Zero(s);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          double bq = 0, bp = 0;
          for (int a = 0; a < s; ++a) {
            bq += Bo(a, i, k) * (a == c ? 1.0 : 0.0);
            bp += Bo(a, i, k) * (a == b ? 1.0 : 0.0);
          }
          out += (T(b, i) * bq + T(c, i) * bp) * T.col(k);
        }
      for (int a = 0; a < s; ++a) H(a, b, c) = out(a);
    }
  return H;
}

std::pair<double, double> scal_check(const ChartPoint& theta) {
  SecondFundamentalForm sff = second_fundamental_form(theta);
  return {curvature_at(theta).scalar, sff.tension.squaredNorm() - sff.norm_sq};
}

}  // namespace mapest
