#pragma once

#include <algorithm>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "mw/manager.hpp"
#include "mw/worker.hpp"

namespace mw {

struct EvalSummary {
  double top1 = 0.0;
  double topk = 0.0;
  double accuracy = 0.0;
  int k = 1;
};

/// Worker indices ranked by manager probability, descending; ties keep the
/// lower index first.
inline std::vector<int> rank_workers(const Vec& probs) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return probs(a) > probs(b); });
  return order;
}

/// Index of the per-sample best (argmin-loss) worker, ties to lowest index.
inline int argmin_loss_worker(
    const std::vector<std::unique_ptr<WorkerModel>>& workers,
    const DataSample& sample, LossKind kind, Vec* losses_out = nullptr) {
  int best = 0;
  double best_loss = 0.0;
  Vec losses(static_cast<Eigen::Index>(workers.size()));
  for (std::size_t i = 0; i < workers.size(); ++i) {
    const Mat pred = workers[i]->predict(sample.past, sample.target_id);
    losses(static_cast<Eigen::Index>(i)) =
        trajectory_loss(kind, sample.target, pred);
    if (i == 0 || losses(static_cast<Eigen::Index>(i)) < best_loss) {
      best_loss = losses(static_cast<Eigen::Index>(i));
      best = static_cast<int>(i);
    }
  }
  if (losses_out) *losses_out = std::move(losses);
  return best;
}

/// Minimum prediction loss among the k workers the manager ranks highest.
inline double top_k_loss(const ManagerModel& manager,
                         const std::vector<std::unique_ptr<WorkerModel>>& workers,
                         const DataSample& sample, int k,
                         LossKind kind = LossKind::kAde) {
  if (k < 1 || k > static_cast<int>(workers.size()))
    throw InvalidInputError("top_k_loss: requires 1 <= k <= K");
  const Vec probs = manager.predict_probs(sample.context);
  const auto order = rank_workers(probs);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const Mat pred =
        workers[order[i]]->predict(sample.past, sample.target_id);
    best = std::min(best, trajectory_loss(kind, sample.target, pred));
  }
  return best;
}

/// Fraction of samples where the manager's argmax worker is the per-sample
/// argmin-loss worker.
inline double manager_accuracy(
    const ManagerModel& manager,
    const std::vector<std::unique_ptr<WorkerModel>>& workers,
    std::span<const DataSample> split, LossKind kind = LossKind::kAde) {
  if (split.empty())
    throw InvalidInputError("manager_accuracy: empty split");
  int correct = 0;
  for (const DataSample& s : split) {
    const int chosen = manager.select_worker(s.context);
    if (chosen == argmin_loss_worker(workers, s, kind)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

/// Mean top-1 and top-k losses plus manager accuracy over a split. Worker
/// predictions are computed once per sample and shared across the metrics,
/// so the result equals averaging the single-sample operations.
inline EvalSummary evaluate_split(
    const ManagerModel& manager,
    const std::vector<std::unique_ptr<WorkerModel>>& workers,
    std::span<const DataSample> split, int k,
    LossKind kind = LossKind::kAde) {
  if (split.empty()) throw InvalidInputError("evaluate_split: empty split");
  if (k < 1 || k > static_cast<int>(workers.size()))
    throw InvalidInputError("evaluate_split: requires 1 <= k <= K");
  EvalSummary out;
  out.k = k;
  int correct = 0;
  for (const DataSample& s : split) {
    Vec losses;
    const int best_worker = argmin_loss_worker(workers, s, kind, &losses);
    const Vec probs = manager.predict_probs(s.context);
    const auto order = rank_workers(probs);
    out.top1 += losses(order[0]);
    double topk = losses(order[0]);
    for (int i = 1; i < k; ++i) topk = std::min(topk, losses(order[i]));
    out.topk += topk;
    if (order[0] == best_worker) ++correct;
  }
  const double n = static_cast<double>(split.size());
  out.top1 /= n;
  out.topk /= n;
  out.accuracy = correct / n;
  return out;
}

}  // namespace mw
