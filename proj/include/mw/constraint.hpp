#pragma once

#include <cmath>
#include <limits>

#include "mw/nn/tensor.hpp"
#include "mw/types.hpp"

namespace mw {

// Zero-displacement cutoff: the constraint's direction is undefined at
// ||raw|| = 0, so steps shorter than this stay in place.
inline constexpr double kStepEpsilon = 1e-8;

/// Step-constraint layer: move from prev_loc by raw_dis rescaled so the
/// realized step length is Sigmoid(||raw_dis||) * max_step, strictly below
/// max_step. Raw displacements below kStepEpsilon keep the unit in place.
inline Eigen::Vector2d apply_step_constraint(const Eigen::Vector2d& prev_loc,
                                             const Eigen::Vector2d& raw_dis,
                                             double max_step,
                                             double eps = kStepEpsilon) {
  if (!(max_step > 0.0))
    throw InvalidInputError("apply_step_constraint: max_step must be > 0");
  if (!prev_loc.allFinite() || !raw_dis.allFinite())
    throw InvalidInputError("apply_step_constraint: non-finite input");
  const double n = raw_dis.norm();
  if (n < eps) return prev_loc;
  constexpr double kCap = 1.0 - 1e-12;
  const double sig = std::min(1.0 / (1.0 + std::exp(-n)), kCap);
  const double scale = sig * max_step / n;
  return prev_loc + scale * raw_dis;
}

/// Differentiable form of the constraint chain: converts raw per-step
/// displacements (LY x 2) into locations (LY x 2) by rescaling each step and
/// accumulating from the start location.
inline nn::Var constrain_and_accumulate(nn::Tape& t, nn::Var raw_dis,
                                        const Eigen::Vector2d& start,
                                        double max_step,
                                        double eps = kStepEpsilon) {
  nn::Var norms = nn::row_norms(raw_dis);
  nn::Var scales = nn::step_scale(norms, max_step, eps);
  nn::Var realized = nn::mul_colvec(raw_dis, scales);
  nn::Var cumulative = nn::cumsum_rows(realized);
  Mat start_rows(raw_dis.rows(), 2);
  start_rows.col(0).setConstant(start.x());
  start_rows.col(1).setConstant(start.y());
  return nn::add_const(cumulative, start_rows);
}

}  // namespace mw
