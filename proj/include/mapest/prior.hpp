#pragma once

#include "mapest/grid_field.hpp"
#include "mapest/subriemannian.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace mapest {

// λ = ω² on a grid (λ = a²η² with omega holding η in the weighted case).
struct PriorDensity {
  QuadratureGrid grid;
  std::vector<double> omega{};
  std::vector<double> lambda{};
  std::optional<std::vector<double>> flat_weight{};  // a² per node
  std::function<double(const Vec&)> density{};       // normalized smooth λ when known

  double lambda_at(const Vec& coords) const;
  // chart components of d log λ at coords
  Vec grad_log_lambda_at(const Vec& coords) const;
  bool is_uniform() const { return uniform; }

  bool uniform = false;
  std::vector<std::vector<double>> glog{};  // nodal d log λ components, one field per axis
};

PriorDensity uniform_prior(const QuadratureGrid& grid);
// λ ∝ f, normalized by the grid quadrature
PriorDensity prior_from_function(const QuadratureGrid& grid, std::function<double(const Vec&)> f);
// nodal λ values, normalized by the grid quadrature
PriorDensity prior_from_values(const QuadratureGrid& grid, std::vector<double> lambda);

struct EigenSolution {
  double alpha = 0;
  PriorDensity prior;
  double residual = 0;
  int iterations = 0;
  double spectral_gap = 0;
  bool integrable_distribution = false;
  bool dense = false;
};

// Largest eigenpair of form ω = α mass ω; ω normalized in the mass inner product, ∫ω > 0.
EigenSolution solve_optimal_prior(const DiscreteOperator& L);
// L_a η = α a² η with λ = a²η²
EigenSolution solve_weighted_prior(const DiscreteOperator& La, const ScalarField& a);

struct MinimaxReport {
  double r_theta = 0;
  double r_star = 0;
  std::vector<double> epsilons;
  std::vector<double> alpha_eps;
  bool affine = false;  // α_ε = |dγ|² + ε²α applied
};

MinimaxReport minimax_report(const EigenSolution& sol, const DiscreteOperator& L, const std::vector<double>& e_density,
                             const std::vector<double>& epsilons);

// dense below this many unknowns
inline constexpr std::size_t kDenseEigenLimit = 2000;

}  // namespace mapest
