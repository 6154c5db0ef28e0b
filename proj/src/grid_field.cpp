#include "mapest/grid_field.hpp"

#include "mapest/errors.hpp"

#include <algorithm>
#include <array>

namespace mapest {

GhostSample grid_ghost(const QuadratureGrid& grid, const std::vector<double>& f, std::vector<int> multi,
                       int odd_axis) {
  const auto& axes = grid.axes;
  std::vector<double> coords(axes.size());
  double sign = 1.0;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const auto& ax = axes[a];
    const int n = int(ax.x.size());
    int i = multi[a];
    if (ax.periodic) {
      int wraps = (i >= 0) ? i / n : -((-i + n - 1) / n);
      int k = i - wraps * n;
      coords[a] = ax.x[k] + wraps * kTwoPi;
      multi[a] = k;
      continue;
    }
    if (i >= 0 && i < n) {
      coords[a] = ax.x[i];
      continue;
    }
    if (ax.pole_partner < 0) throw DomainError("index outside a non-periodic axis");
    int k;
    if (i < 0) {
      k = -1 - i;
      coords[a] = -ax.x[k];
    } else {
      k = 2 * n - 1 - i;
      coords[a] = kTwoPi - ax.x[k];
    }
    if (k < 0 || k >= n) throw DomainError("ghost index too far outside the grid");
    multi[a] = k;
    const int np = int(axes[ax.pole_partner].x.size());
    multi[ax.pole_partner] += np / 2;
    if (int(a) == odd_axis) sign = -sign;
  }
  // partner shifts may have left the periodic range
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const int n = int(axes[a].x.size());
    if (axes[a].periodic) multi[a] = ((multi[a] % n) + n) % n;
  }
  return {sign * f[grid.flat_index(multi)], coords};
}

std::vector<Vec> grid_gradient(const QuadratureGrid& grid, const std::vector<double>& f) {
  if (f.size() != grid.size()) throw GridMismatchError("field size does not match grid");
  const int d = int(grid.axes.size());
  std::vector<Vec> out(grid.size(), Vec::Zero(d));
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    auto mi = grid.multi_index(idx);
    for (int a = 0; a < d; ++a) {
      auto lo = mi, hi = mi;
      lo[a] -= 1;
      hi[a] += 1;
      GhostSample sl = grid_ghost(grid, f, lo), sh = grid_ghost(grid, f, hi);
      double x0 = grid.axes[a].x[mi[a]];
      double h0 = x0 - sl.coords[a], h1 = sh.coords[a] - x0;
      double f0 = f[idx];
      out[idx](a) = -h1 / (h0 * (h0 + h1)) * sl.value + (h1 - h0) / (h0 * h1) * f0 + h0 / (h1 * (h0 + h1)) * sh.value;
    }
  }
  return out;
}

namespace {

// locate t on axis a: base index i with x_i <= t < x_{i+1} (ghost-extended)
int bracket(const GridAxis& ax, double t) {
  const int n = int(ax.x.size());
  if (ax.periodic) {
    double h = kTwoPi / n;
    return int(std::floor(t / h));
  }
  auto it = std::upper_bound(ax.x.begin(), ax.x.end(), t);
  return int(it - ax.x.begin()) - 1;  // may be -1 or n-1
}

}  // namespace

double grid_interpolate(const QuadratureGrid& grid, const std::vector<double>& f, const Vec& coords, int odd_axis) {
  if (f.size() != grid.size()) throw GridMismatchError("field size does not match grid");
  const int d = int(grid.axes.size());
  std::vector<int> base(d);
  std::vector<std::array<double, 4>> w(d);
  for (int a = 0; a < d; ++a) {
    const auto& ax = grid.axes[a];
    double t = coords(a);
    if (ax.periodic) t = wrap_angle(t);
    base[a] = bracket(ax, t) - 1;
    // node coordinates of the 4-point stencil
    std::array<double, 4> xs;
    for (int k = 0; k < 4; ++k) {
      std::vector<int> probe(d, 0);
      probe[a] = base[a] + k;
      // coordinate along axis a does not depend on other indices
      if (ax.periodic) {
        int n = int(ax.x.size());
        int i = probe[a];
        int wraps = (i >= 0) ? i / n : -((-i + n - 1) / n);
        xs[k] = ax.x[i - wraps * n] + wraps * kTwoPi;
      } else {
        int n = int(ax.x.size());
        int i = probe[a];
        if (i < 0)
          xs[k] = -ax.x[-1 - i];
        else if (i >= n)
          xs[k] = kTwoPi - ax.x[2 * n - 1 - i];
        else
          xs[k] = ax.x[i];
      }
    }
    for (int k = 0; k < 4; ++k) {
      double l = 1;
      for (int m = 0; m < 4; ++m)
        if (m != k) l *= (t - xs[m]) / (xs[k] - xs[m]);
      w[a][k] = l;
    }
  }
  int combos = 1;
  for (int a = 0; a < d; ++a) combos *= 4;
  double acc = 0;
  std::vector<int> mi(d);
  for (int c = 0; c < combos; ++c) {
    int rem = c;
    double wt = 1;
    for (int a = 0; a < d; ++a) {
      int k = rem % 4;
      rem /= 4;
      mi[a] = base[a] + k;
      wt *= w[a][k];
    }
    if (wt == 0.0) continue;
    acc += wt * grid_ghost(grid, f, mi, odd_axis).value;
  }
  return acc;
}

}  // namespace mapest

namespace mapest {

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    auto central = [&](double s) {
      Vec e = Vec::Zero(x.size());
      e(i) = s;
      return (f(x + e) - f(x - e)) / (2 * s);
    };
    g(i) = (4 * central(h / 2) - central(h)) / 3;
  }
  return g;
}

ScalarField ScalarField::constant(const QuadratureGrid& grid, double c) {
  ScalarField s;
  s.values.assign(grid.size(), c);
  s.fn = [c](const Vec&) { return c; };
  return s;
}

ScalarField ScalarField::from_values(std::vector<double> v) {
  ScalarField s;
  s.values = std::move(v);
  return s;
}

ScalarField ScalarField::from_function(const QuadratureGrid& grid, std::function<double(const Vec&)> f) {
  ScalarField s;
  s.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) s.values[i] = f(grid.nodes[i].coords);
  s.fn = std::move(f);
  return s;
}

double ScalarField::at(const QuadratureGrid& grid, const Vec& coords) const {
  if (fn) return fn(coords);
  return grid_interpolate(grid, values, coords);
}

Vec ScalarField::gradient_at(const QuadratureGrid& grid, const Vec& coords) const {
  if (fn) return fd_gradient(fn, coords);
  auto g = grid_gradient(grid, values);
  Vec out(coords.size());
  for (int k = 0; k < coords.size(); ++k) {
    std::vector<double> comp(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) comp[i] = g[i](k);
    out(k) = grid_interpolate(grid, comp, coords, k);
  }
  return out;
}

std::vector<Vec> ScalarField::gradient(const QuadratureGrid& grid) const {
  if (values.size() != grid.size()) throw GridMismatchError("field size does not match grid");
  if (!fn) return grid_gradient(grid, values);
  std::vector<Vec> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = fd_gradient(fn, grid.nodes[i].coords);
  return out;
}

}  // namespace mapest
