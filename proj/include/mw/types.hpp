#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mw/common.hpp"
#include "mw/schema.hpp"

namespace mw {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class LossKind { kAde, kFde, kMse };
enum class ManagerLossKind { kWasserstein, kCrossEntropy, kTotalVariation };
enum class TargetRule { kSimple, kRegularized, kUnnormalized };

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kAde: return "ade";
    case LossKind::kFde: return "fde";
    case LossKind::kMse: return "mse";
  }
  return "?";
}
inline std::string to_string(ManagerLossKind k) {
  switch (k) {
    case ManagerLossKind::kWasserstein: return "wasserstein";
    case ManagerLossKind::kCrossEntropy: return "cross_entropy";
    case ManagerLossKind::kTotalVariation: return "total_variation";
  }
  return "?";
}
inline std::string to_string(TargetRule r) {
  switch (r) {
    case TargetRule::kSimple: return "simple";
    case TargetRule::kRegularized: return "regularized";
    case TargetRule::kUnnormalized: return "unnormalized";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "ade") return LossKind::kAde;
  if (s == "fde") return LossKind::kFde;
  if (s == "mse") return LossKind::kMse;
  throw InvalidInputError("unknown worker loss: " + s);
}
inline ManagerLossKind manager_loss_from_string(const std::string& s) {
  if (s == "wasserstein") return ManagerLossKind::kWasserstein;
  if (s == "cross_entropy") return ManagerLossKind::kCrossEntropy;
  if (s == "total_variation") return ManagerLossKind::kTotalVariation;
  throw InvalidInputError("unknown manager loss: " + s);
}
inline TargetRule target_rule_from_string(const std::string& s) {
  if (s == "simple") return TargetRule::kSimple;
  if (s == "regularized") return TargetRule::kRegularized;
  if (s == "unnormalized") return TargetRule::kUnnormalized;
  throw InvalidInputError("unknown target rule: " + s);
}

/// Ordered 2D locations of one moving unit, sampled every dt seconds.
struct Trajectory {
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;
  double dt = 1.0;
  std::string unit_id;

  int length() const { return static_cast<int>(points.rows()); }

  void validate() const {
    if (points.rows() < 1)
      throw InvalidInputError("trajectory must have at least one point");
    if (!(dt > 0.0)) throw InvalidInputError("trajectory dt must be > 0");
    if (!points.allFinite())
      throw InvalidInputError("trajectory has non-finite coordinates");
  }
};

/// The last LC observed data frames. Each frame holds the N raw data-state
/// values in schema order; categorical states store their category index.
struct ContextWindow {
  Mat frames;  // LC x N raw values
  std::shared_ptr<const ContextSpec> schema;

  int num_frames() const { return static_cast<int>(frames.rows()); }

  void validate() const {
    if (!schema) throw InvalidInputError("context window has no schema");
    if (frames.rows() < 1)
      throw InvalidInputError("context window has no frames");
    if (frames.cols() != schema->num_states())
      throw InvalidInputError(
          "context frame width does not match schema state count");
    if (!frames.allFinite())
      throw InvalidInputError("context window has non-finite values");
  }
};

/// One training/evaluation unit: context window C, past trajectories TX of
/// all |U| units (LX x 2|U|), and the target object's future TY (LY x 2).
/// TX's last row is the step immediately preceding TY's first row.
struct DataSample {
  ContextWindow context;
  Mat past;                                     // LX x 2|U|
  Eigen::Matrix<double, Eigen::Dynamic, 2> target;  // LY x 2
  int target_id = 0;
  // Ground-truth motion pattern for synthetic corpora; hidden from models,
  // used only by evaluation oracles. -1 when unknown.
  int pattern_id = -1;

  int num_units() const { return static_cast<int>(past.cols()) / 2; }
  int past_len() const { return static_cast<int>(past.rows()); }
  int target_len() const { return static_cast<int>(target.rows()); }

  Eigen::Vector2d last_location() const {
    return past.row(past.rows() - 1).segment<2>(2 * target_id);
  }

  void validate() const {
    context.validate();
    if (past.rows() < 1 || past.cols() < 2 || past.cols() % 2 != 0)
      throw InvalidInputError("past trajectories must be LX x 2|U|");
    if (target.rows() < 1)
      throw InvalidInputError("target trajectory must be LY x 2");
    if (target_id < 0 || target_id >= num_units())
      throw InvalidInputError("target_id out of range");
    if (!past.allFinite() || !target.allFinite())
      throw InvalidInputError("sample has non-finite coordinates");
  }
};

/// Optional per-axis affine map for raw coordinates. Identity by default;
/// the step constraint works in world units, so scaling is off unless a
/// corpus explicitly asks for it.
struct AffineScaler {
  double scale = 1.0;
  double offset_x = 0.0;
  double offset_y = 0.0;

  bool is_identity() const {
    return scale == 1.0 && offset_x == 0.0 && offset_y == 0.0;
  }

  /// Applies to a coordinate matrix with (x, y) column pairs.
  void apply(Mat& coords) const {
    if (is_identity()) return;
    for (Eigen::Index c = 0; c + 1 < coords.cols(); c += 2) {
      coords.col(c) = ((coords.col(c).array() + offset_x) * scale).matrix();
      coords.col(c + 1) =
          ((coords.col(c + 1).array() + offset_y) * scale).matrix();
    }
  }
};

enum class AlphaDecay { kNone, kLinearHalf };

inline std::string to_string(AlphaDecay d) {
  return d == AlphaDecay::kNone ? "none" : "linear_half";
}
inline AlphaDecay alpha_decay_from_string(const std::string& s) {
  if (s == "none") return AlphaDecay::kNone;
  if (s == "linear_half") return AlphaDecay::kLinearHalf;
  throw InvalidInputError("unknown alpha decay schedule: " + s);
}

/// Core knobs of the manager-worker model and its training loop.
struct Hyperparameters {
  int num_workers = 20;  // K
  int top_k = 3;         // k used at evaluation time

  double alpha0 = 4.0;   // worker steps per iteration at the start
  AlphaDecay alpha_decay = AlphaDecay::kLinearHalf;
  double beta = 0.5;     // weight of the training-volume regularizer

  int batch_size = 64;
  int iterations = 100;

  int context_len = 5;   // LC
  int past_len = 30;     // LX
  int future_len = 10;   // LY
  double dt = 1.0;

  double max_step = 1.0;  // MaxMS, world units per dt

  ManagerLossKind manager_loss = ManagerLossKind::kWasserstein;
  LossKind worker_loss = LossKind::kAde;
  TargetRule target_rule = TargetRule::kRegularized;

  void validate() const {
    if (num_workers < 1) throw InvalidInputError("K must be >= 1");
    if (top_k < 1 || top_k > num_workers)
      throw InvalidInputError("requires 1 <= k <= K");
    if (!(alpha0 >= 1.0)) throw InvalidInputError("alpha must be >= 1");
    if (!(beta >= 0.0)) throw InvalidInputError("beta must be >= 0");
    if (!(max_step > 0.0)) throw InvalidInputError("MaxMS must be > 0");
    if (batch_size < 1) throw InvalidInputError("batch_size must be >= 1");
    if (iterations < 1) throw InvalidInputError("iterations must be >= 1");
    if (context_len < 1 || past_len < 1 || future_len < 1)
      throw InvalidInputError("window lengths must be >= 1");
    if (!(dt > 0.0)) throw InvalidInputError("dt must be > 0");
  }
};

inline nlohmann::json to_json(const Hyperparameters& hp) {
  nlohmann::json j;
  j["K"] = hp.num_workers;
  j["k"] = hp.top_k;
  j["alpha0"] = hp.alpha0;
  j["alpha_decay"] = to_string(hp.alpha_decay);
  j["beta"] = hp.beta;
  j["batch_size"] = hp.batch_size;
  j["iterations"] = hp.iterations;
  j["LC"] = hp.context_len;
  j["LX"] = hp.past_len;
  j["LY"] = hp.future_len;
  j["dt"] = hp.dt;
  j["max_ms"] = hp.max_step;
  j["manager_loss"] = to_string(hp.manager_loss);
  j["worker_loss"] = to_string(hp.worker_loss);
  j["target_rule"] = to_string(hp.target_rule);
  return j;
}

inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
  Hyperparameters hp;
  if (j.contains("K")) hp.num_workers = j["K"].get<int>();
  if (j.contains("k")) hp.top_k = j["k"].get<int>();
  if (j.contains("alpha0")) hp.alpha0 = j["alpha0"].get<double>();
  if (j.contains("alpha_decay"))
    hp.alpha_decay = alpha_decay_from_string(j["alpha_decay"].get<std::string>());
  if (j.contains("beta")) hp.beta = j["beta"].get<double>();
  if (j.contains("batch_size")) hp.batch_size = j["batch_size"].get<int>();
  if (j.contains("iterations")) hp.iterations = j["iterations"].get<int>();
  if (j.contains("LC")) hp.context_len = j["LC"].get<int>();
  if (j.contains("LX")) hp.past_len = j["LX"].get<int>();
  if (j.contains("LY")) hp.future_len = j["LY"].get<int>();
  if (j.contains("dt")) hp.dt = j["dt"].get<double>();
  if (j.contains("max_ms")) hp.max_step = j["max_ms"].get<double>();
  if (j.contains("manager_loss"))
    hp.manager_loss = manager_loss_from_string(j["manager_loss"].get<std::string>());
  if (j.contains("worker_loss"))
    hp.worker_loss = loss_kind_from_string(j["worker_loss"].get<std::string>());
  if (j.contains("target_rule"))
    hp.target_rule = target_rule_from_string(j["target_rule"].get<std::string>());
  hp.validate();
  return hp;
}

/// Number of worker steps at a given iteration under the decay schedule:
/// linear from alpha0 down to 1 over the first half of training.
inline int alpha_at(const Hyperparameters& hp, int iteration) {
  if (hp.alpha_decay == AlphaDecay::kNone)
    return std::max(1, static_cast<int>(std::lround(hp.alpha0)));
  const double half = std::max(1.0, hp.iterations / 2.0);
  const double t = std::min(1.0, iteration / half);
  const double a = hp.alpha0 + (1.0 - hp.alpha0) * t;
  return std::max(1, static_cast<int>(std::lround(a)));
}

}  // namespace mw
