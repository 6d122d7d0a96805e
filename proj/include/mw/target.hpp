#pragma once

#include <cmath>

#include "mw/nn/tensor.hpp"
#include "mw/types.hpp"

namespace mw {

// Losses are floored here before any division or log so a perfect worker
// (loss 0) cannot produce infinities.
inline constexpr double kLossFloor = 1e-12;

inline Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  const Vec e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

/// A selection target over the K workers together with the rule that
/// produced it.
struct TargetDistribution {
  Vec probs;
  TargetRule rule = TargetRule::kSimple;

  void validate(double tol = 1e-6) const {
    if ((probs.array() < 0.0).any() || !probs.allFinite() ||
        std::abs(probs.sum() - 1.0) > tol)
      throw InvalidInputError("target distribution is not a distribution");
  }
};

namespace detail {
inline Vec floored(const Vec& losses) {
  if (!losses.allFinite())
    throw InvalidInputError("target distribution: non-finite losses");
  return losses.cwiseMax(kLossFloor);
}
inline void check_volumes(const Vec& volumes, Eigen::Index k) {
  if (volumes.size() != k)
    throw InvalidInputError("target distribution: volume length mismatch");
  if ((volumes.array() < 0.0).any() || !volumes.allFinite())
    throw InvalidInputError("target distribution: volumes must be >= 0");
}
}  // namespace detail

/// Softmax(MaxL / L): workers with lower loss get higher selection
/// probability; no training-volume term.
inline TargetDistribution target_distribution_simple(const Vec& losses) {
  const Vec l = detail::floored(losses);
  const double max_l = l.maxCoeff();
  return {softmax((max_l / l.array()).matrix()), TargetRule::kSimple};
}

/// Softmax(e^{-L/MaxL} + beta * (MaxV - V)/MaxV): the loss term is squashed
/// into [1/e, 1] so the volume regularizer can compete with it. With no
/// training volume yet (MaxV = 0) the regularizer is 1 for every worker.
inline TargetDistribution target_distribution_regularized(const Vec& losses,
                                                          const Vec& volumes,
                                                          double beta) {
  if (!(beta >= 0.0))
    throw InvalidInputError("target distribution: beta must be >= 0");
  const Vec l = detail::floored(losses);
  detail::check_volumes(volumes, l.size());
  const double max_l = l.maxCoeff();
  const double max_v = volumes.maxCoeff();
  Vec reg = Vec::Ones(l.size());
  if (max_v > 0.0) reg = ((max_v - volumes.array()) / max_v).matrix();
  const Vec logits = (-l.array() / max_l).exp().matrix() + beta * reg;
  return {softmax(logits), TargetRule::kRegularized};
}

/// Softmax(MaxL / L + beta * (MaxV - V)/MaxV): volume regularizer added to
/// the unsquashed loss ratio, which lets the loss term overwhelm it.
inline TargetDistribution target_distribution_unnormalized(const Vec& losses,
                                                           const Vec& volumes,
                                                           double beta) {
  if (!(beta >= 0.0))
    throw InvalidInputError("target distribution: beta must be >= 0");
  const Vec l = detail::floored(losses);
  detail::check_volumes(volumes, l.size());
  const double max_l = l.maxCoeff();
  const double max_v = volumes.maxCoeff();
  Vec reg = Vec::Ones(l.size());
  if (max_v > 0.0) reg = ((max_v - volumes.array()) / max_v).matrix();
  const Vec logits = (max_l / l.array()).matrix() + beta * reg;
  return {softmax(logits), TargetRule::kUnnormalized};
}

inline TargetDistribution make_target(TargetRule rule, const Vec& losses,
                                      const Vec& volumes, double beta) {
  switch (rule) {
    case TargetRule::kSimple: return target_distribution_simple(losses);
    case TargetRule::kRegularized:
      return target_distribution_regularized(losses, volumes, beta);
    case TargetRule::kUnnormalized:
      return target_distribution_unnormalized(losses, volumes, beta);
  }
  throw InvalidInputError("make_target: bad rule");
}

namespace detail {
inline void check_distributions(const Vec& p_hat, const Vec& p,
                                const char* op) {
  if (p_hat.size() != p.size())
    throw InvalidInputError(std::string(op) + ": length mismatch");
  if (p_hat.size() < 1) throw InvalidInputError(std::string(op) + ": empty");
}
}  // namespace detail

/// Order-1 Wasserstein distance between two distributions over worker
/// indices with unit ground spacing: sum_j |CDF(p_hat)_j - CDF(p)_j|.
/// Symmetric, zero iff equal, and a metric on the simplex.
inline double wasserstein_loss(const Vec& p_hat, const Vec& p) {
  detail::check_distributions(p_hat, p, "wasserstein_loss");
  double cum = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < p_hat.size(); ++i) {
    cum += p_hat(i) - p(i);
    total += std::abs(cum);
  }
  return total;
}

/// Total-variation distance, the W1 distance under the discrete 0/1 ground
/// metric: 0.5 * sum |p_hat - p|.
inline double total_variation_loss(const Vec& p_hat, const Vec& p) {
  detail::check_distributions(p_hat, p, "total_variation_loss");
  return 0.5 * (p_hat - p).cwiseAbs().sum();
}

/// Cross entropy -sum p log p_hat, with p_hat floored at 1e-12 in the log.
inline double cross_entropy_loss(const Vec& p_hat, const Vec& p) {
  detail::check_distributions(p_hat, p, "cross_entropy_loss");
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    total -= p(i) * std::log(std::max(p_hat(i), kLossFloor));
  return total;
}

inline double manager_loss(ManagerLossKind kind, const Vec& p_hat,
                           const Vec& p) {
  switch (kind) {
    case ManagerLossKind::kWasserstein: return wasserstein_loss(p_hat, p);
    case ManagerLossKind::kCrossEntropy: return cross_entropy_loss(p_hat, p);
    case ManagerLossKind::kTotalVariation:
      return total_variation_loss(p_hat, p);
  }
  throw InvalidInputError("manager_loss: bad kind");
}

// Tape-side manager losses; p_hat is a 1 x K probability row, p a constant.

inline nn::Var wasserstein_loss_var(nn::Tape& t, nn::Var p_hat, const Vec& p) {
  if (p_hat.rows() != 1 || p_hat.cols() != p.size())
    throw InvalidInputError("wasserstein_loss_var: shape mismatch");
  nn::Var diff = nn::add_const(p_hat, -p.transpose());
  return nn::sum_all(nn::abs_v(nn::cumsum_cols(diff)));
}

inline nn::Var total_variation_loss_var(nn::Tape& t, nn::Var p_hat,
                                        const Vec& p) {
  if (p_hat.rows() != 1 || p_hat.cols() != p.size())
    throw InvalidInputError("total_variation_loss_var: shape mismatch");
  nn::Var diff = nn::add_const(p_hat, -p.transpose());
  return nn::affine(nn::sum_all(nn::abs_v(diff)), 0.5, 0.0);
}

inline nn::Var cross_entropy_loss_var(nn::Tape& t, nn::Var p_hat,
                                      const Vec& p) {
  if (p_hat.rows() != 1 || p_hat.cols() != p.size())
    throw InvalidInputError("cross_entropy_loss_var: shape mismatch");
  nn::Var logs = nn::log_v(nn::clamp_min(p_hat, kLossFloor));
  Mat neg_p = -p.transpose();
  nn::Var weighted = nn::hadamard(logs, nn::make_leaf(t, neg_p));
  return nn::sum_all(weighted);
}

inline nn::Var manager_loss_var(nn::Tape& t, ManagerLossKind kind,
                                nn::Var p_hat, const Vec& p) {
  switch (kind) {
    case ManagerLossKind::kWasserstein:
      return wasserstein_loss_var(t, p_hat, p);
    case ManagerLossKind::kCrossEntropy:
      return cross_entropy_loss_var(t, p_hat, p);
    case ManagerLossKind::kTotalVariation:
      return total_variation_loss_var(t, p_hat, p);
  }
  throw InvalidInputError("manager_loss_var: bad kind");
}

}  // namespace mw
