#pragma once

#include "mapest/grid_field.hpp"
#include "mapest/maps.hpp"

#include <Eigen/Sparse>

#include <optional>
#include <vector>

namespace mapest {

using SpMat = Eigen::SparseMatrix<double>;

struct CometricField {
  QuadratureGrid grid;
  std::vector<Mat> mu;  // G^{-1} J^T H J G^{-1} per node
  std::vector<int> rank;
};

CometricField cometric(const MapDescriptor& gamma, const QuadratureGrid& grid);
// μ = G^{-1}: the riemannian structure of the grid's manifold
CometricField riemannian_cometric(const QuadratureGrid& grid);

enum class OperatorKind { sublaplacian, L, L_a, H };

// Symmetric bilinear form on nodal vectors together with its quadrature measure.
// The operator is A u = form u ./ mass; the quadratic form is u^T form u.
struct DiscreteOperator {
  QuadratureGrid grid;
  SpMat form;
  Vec mass;
  OperatorKind kind;
  std::optional<double> epsilon;
  Vec potential;   // per-node multiplication part (κ, κ_a, or |dγ|² + ε²κ)
  SpMat stiffness;  // Dirichlet part ∫μ(du, dv) dν
  int distribution_rank = -1;  // rank of μ when constant over the grid, -1 otherwise

  Vec apply(const Vec& u) const { return (form * u).cwiseQuotient(mass); }
  double quadratic(const Vec& u) const { return u.dot(form * u); }
  double inner(const Vec& u, const Vec& v) const { return (u.cwiseProduct(mass)).dot(v); }
  double dirichlet(const Vec& u) const { return u.dot(stiffness * u); }
  std::size_t size() const { return std::size_t(mass.size()); }
};

// Δ with density a·dν (a = 1 when absent); positive semidefinite.
DiscreteOperator sublaplacian(const CometricField& mu, const ScalarField* a = nullptr);

// Sign-resolved L: quadratic form ∫κ_a ω² dν − 4∫μ(dω, dω) dθ with mass a²·dθ.
DiscreteOperator assemble_L(const ScalarField& kappa, const CometricField& mu, const ScalarField* a = nullptr);

// H = ε²L + |dγ|²
DiscreteOperator assemble_H(const DiscreteOperator& L, const std::vector<double>& e_density, double epsilon);

// κ_a = κ + μ(d log a, d log a) per node
std::vector<double> weighted_potential(const ScalarField& kappa, const CometricField& mu, const ScalarField& a);

// nodal κ and |dγ|² fields of a map
std::vector<double> kappa_field(const MapDescriptor& gamma, const QuadratureGrid& grid);
std::vector<double> e_density_field(const MapDescriptor& gamma, const QuadratureGrid& grid);

}  // namespace mapest
