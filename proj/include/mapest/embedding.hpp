#pragma once

#include "mapest/manifold.hpp"

#include <utility>

namespace mapest {

struct AmbientPoint {
  Vec coords;
};

struct TubePoint {
  AmbientPoint x;
  ChartPoint foot;
  Vec offset;
  double tube_radius;
};

// Chart-frame second fundamental form B_ij = ∂_i∂_j ι − Γ^k_ij ∂_k ι, stored as (s, m, m).
struct SecondFundamentalForm {
  ChartPoint base;
  Array3 values;
  Vec tension;     // g^ij B_ij
  double norm_sq;  // g^ik g^jl <B_ij, B_kl>
};

struct Frames {
  Mat tangent;  // s x m, orthonormal columns
  Mat normal;   // s x (s - m)
};

AmbientPoint embed(const ChartPoint& theta);

// Closest-point projection onto the catalog embedding. Throws OutsideTubeError when
// the distance to Θ exceeds the reach or x sits on the medial axis.
TubePoint project(const Manifold& m, const AmbientPoint& x);

Frames tangent_normal_frames(const ChartPoint& theta);

SecondFundamentalForm second_fundamental_form(const ChartPoint& theta);

// Orthonormal-frame version: entry (a, i, j) is the ambient component a of B(e_i, e_j).
Array3 sff_orthonormal(const ChartPoint& theta);

// ∇dπ at ι(θ) on T_ι(θ)E: entry (a, b, c) is component a of ∇dπ(E_b, E_c),
// E_b the standard ambient basis.
Array3 normal_projection_hessian(const ChartPoint& theta);

// (scal_Θ, |τ(ι)|² − |∇dι|²)
std::pair<double, double> scal_check(const ChartPoint& theta);

}  // namespace mapest
