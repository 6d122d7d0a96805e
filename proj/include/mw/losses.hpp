#pragma once

#include "mw/nn/tensor.hpp"
#include "mw/types.hpp"

namespace mw {

namespace detail {
inline void check_aligned(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInputError(std::string(op) + ": length mismatch");
  if (a.rows() < 1) throw InvalidInputError(std::string(op) + ": empty input");
}
}  // namespace detail

/// Average displacement error: mean Euclidean distance over aligned points.
inline double ade(const Mat& ty, const Mat& ty_hat) {
  detail::check_aligned(ty, ty_hat, "ade");
  return (ty_hat - ty).rowwise().norm().mean();
}

/// Final displacement error: Euclidean distance of the last aligned pair.
inline double fde(const Mat& ty, const Mat& ty_hat) {
  detail::check_aligned(ty, ty_hat, "fde");
  return (ty_hat.row(ty.rows() - 1) - ty.row(ty.rows() - 1)).norm();
}

/// Mean squared error over aligned scalar entries.
inline double mse(const Mat& y, const Mat& y_hat) {
  detail::check_aligned(y, y_hat, "mse");
  return (y_hat - y).array().square().mean();
}

inline double trajectory_loss(LossKind kind, const Mat& ty,
                              const Mat& ty_hat) {
  switch (kind) {
    case LossKind::kAde: return ade(ty, ty_hat);
    case LossKind::kFde: return fde(ty, ty_hat);
    case LossKind::kMse: return mse(ty, ty_hat);
  }
  throw InvalidInputError("trajectory_loss: bad kind");
}

// Tape-side counterparts, used inside training graphs. Targets are constants.

inline nn::Var ade_var(nn::Tape& t, nn::Var pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw InvalidInputError("ade_var: length mismatch");
  nn::Var diff = nn::add_const(pred, -target);
  return nn::mean_all(nn::row_norms(diff));
}

inline nn::Var fde_var(nn::Tape& t, nn::Var pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw InvalidInputError("fde_var: length mismatch");
  nn::Var last = nn::slice_rows(pred, static_cast<int>(pred.rows()) - 1, 1);
  nn::Var diff = nn::add_const(last, -target.bottomRows(1));
  return nn::mean_all(nn::row_norms(diff));
}

inline nn::Var mse_var(nn::Tape& t, nn::Var pred, const Mat& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw InvalidInputError("mse_var: length mismatch");
  nn::Var diff = nn::add_const(pred, -target);
  return nn::mean_all(nn::hadamard(diff, diff));
}

inline nn::Var trajectory_loss_var(nn::Tape& t, LossKind kind, nn::Var pred,
                                   const Mat& target) {
  switch (kind) {
    case LossKind::kAde: return ade_var(t, pred, target);
    case LossKind::kFde: return fde_var(t, pred, target);
    case LossKind::kMse: return mse_var(t, pred, target);
  }
  throw InvalidInputError("trajectory_loss_var: bad kind");
}

/// Per-sample, per-worker prediction losses: batch x K, entry (j, i) is the
/// configured loss of worker i on sample j.
struct PredictionLossReport {
  Mat per_sample;  // batch x K
  LossKind loss_kind = LossKind::kAde;

  void validate() const {
    if (!per_sample.allFinite() || (per_sample.array() < 0.0).any())
      throw InvalidInputError(
          "prediction losses must be finite and non-negative");
  }
};

}  // namespace mw
