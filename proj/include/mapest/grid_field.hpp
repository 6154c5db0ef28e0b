#pragma once

#include "mapest/manifold.hpp"

#include <vector>

namespace mapest {

// Chart partial derivatives of a nodal scalar field by centered
// (non-uniform on Gauss-Legendre axes) three-point differences.
// Periodic axes wrap; colatitude axes are extended across the poles.
std::vector<Vec> grid_gradient(const QuadratureGrid& grid, const std::vector<double>& f);

// Tensor-product cubic Lagrange interpolation of a nodal field.
// odd_axis marks a field that changes sign under pole reflection of that axis
// (chart component along a colatitude axis); -1 for scalars.
double grid_interpolate(const QuadratureGrid& grid, const std::vector<double>& f, const Vec& coords,
                        int odd_axis = -1);

// Value of a nodal field at a possibly out-of-range multi-index, together with the
// ghost coordinate along each axis.
struct GhostSample {
  double value;
  std::vector<double> coords;
};
GhostSample grid_ghost(const QuadratureGrid& grid, const std::vector<double>& f, std::vector<int> multi,
                       int odd_axis = -1);

}  // namespace mapest

#include <functional>

namespace mapest {

// Nodal values with an optional smooth source. Derivatives use the source
// (Richardson central differences) when present, grid differences otherwise.
struct ScalarField {
  std::vector<double> values;
  std::function<double(const Vec&)> fn;

  static ScalarField constant(const QuadratureGrid& grid, double c);
  static ScalarField from_values(std::vector<double> v);
  static ScalarField from_function(const QuadratureGrid& grid, std::function<double(const Vec&)> f);

  std::size_t size() const { return values.size(); }
  double at(const QuadratureGrid& grid, const Vec& coords) const;
  Vec gradient_at(const QuadratureGrid& grid, const Vec& coords) const;
  std::vector<Vec> gradient(const QuadratureGrid& grid) const;
};

// chart gradient of a smooth function by Richardson-extrapolated central differences
Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-3);

}  // namespace mapest
