#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mw/dataset.hpp"
#include "mw/evaluate.hpp"
#include "mw/manager.hpp"
#include "mw/target.hpp"
#include "mw/worker.hpp"

namespace mw {

enum class TrapFlag { kNone, kT1, kT2 };

inline std::string to_string(TrapFlag f) {
  switch (f) {
    case TrapFlag::kNone: return "none";
    case TrapFlag::kT1: return "T1";
    case TrapFlag::kT2: return "T2";
  }
  return "?";
}

struct TrapThresholds {
  double t1_share = 0.9;        // max selection share above this flags T1
  double t2_accuracy = 0.2;     // accuracy below this (with spread shares)
  double t2_entropy_frac = 0.9; // ... and entropy above this fraction of log K
};

/// Routing behavior of the trained manager on held-out data: where samples
/// go, how often the choice matches the per-sample best worker, and how
/// spread the selection is.
struct TrapDiagnostics {
  Vec selection_shares;
  double manager_accuracy = 0.0;
  double selection_entropy = 0.0;
  TrapFlag flag = TrapFlag::kNone;
};

struct TrainOptions {
  Hyperparameters hp;
  ManagerConfig manager;  // num_workers is overwritten from hp
  WorkerConfig worker;    // lengths/max_step are overwritten from hp

  double lr_manager = 1e-3;
  double lr_workers = 1e-3;
  int manager_steps = 1;   // manager gradient steps per iteration

  int eval_every = 10;     // validation/diagnostics cadence (iterations)
  int patience = 5;        // evaluations without improvement; <= 0 disables
  int eval_cap = 256;      // max validation samples per evaluation
  int stop_after = -1;     // pause after this iteration (resume later); -1 off

  bool competition = true;           // false: the no-competition control
  std::string route_by = "manager";  // or "oracle_loss"

  TrapThresholds traps;
  std::uint64_t seed = 1;
  bool verify_invariants = false;  // phase-isolation hash checks

  void validate() const {
    hp.validate();
    if (lr_manager <= 0.0 || lr_workers <= 0.0)
      throw ConfigError("train: learning rates must be > 0");
    if (manager_steps < 1)
      throw ConfigError("train: manager_steps must be >= 1");
    if (eval_every < 1) throw ConfigError("train: eval_every must be >= 1");
    if (eval_cap < 1) throw ConfigError("train: eval_cap must be >= 1");
    if (route_by != "manager" && route_by != "oracle_loss")
      throw ConfigError("train: route_by must be manager or oracle_loss");
  }
};

/// One metrics-log record per iteration.
struct IterationRecord {
  int iteration = 0;
  int alpha = 1;
  double manager_loss =
      std::numeric_limits<double>::quiet_NaN();
  std::vector<double> worker_mean_loss;  // NaN when a worker got no data
  std::vector<long long> volumes;
  std::vector<double> selection_shares;  // routed fraction this iteration
  std::string trap = "none";             // latest evaluated flag
  double val_top1 = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingState {
  std::vector<long long> volumes;
  int iteration = 0;
  std::vector<IterationRecord> records;
  std::uint64_t rng_seed = 0;
  std::string data_rng_state;  // serialized engine, for exact resumption
  double best_val = std::numeric_limits<double>::infinity();
  int evals_since_best = 0;
};

struct TrainResult {
  std::unique_ptr<ManagerModel> manager;
  std::vector<std::unique_ptr<WorkerModel>> workers;
  TrainingState state;
  std::vector<std::pair<int, TrapDiagnostics>> diagnostics;
  TrapDiagnostics final_diagnostics;
  bool stopped_early = false;
};

/// Everything needed to continue a run exactly where a checkpoint left off.
struct ResumePayload {
  TrainingState state;
  nn::ParamStore::Snapshot manager_params;
  std::vector<nn::ParamStore::Snapshot> worker_params;
};

/// Hooks for invariant-checking tests; every callback is optional.
struct TrainProbe {
  virtual ~TrainProbe() = default;
  virtual void worker_step(int iteration, int step,
                           const std::vector<std::vector<int>>& parts,
                           int batch_size) {
    (void)iteration; (void)step; (void)parts; (void)batch_size;
  }
  virtual void worker_phase_done(int iteration, int alpha,
                                 const std::vector<long long>& delta_v) {
    (void)iteration; (void)alpha; (void)delta_v;
  }
  virtual void isolation(int iteration, bool manager_untouched,
                         bool workers_untouched) {
    (void)iteration; (void)manager_untouched; (void)workers_untouched;
  }
};

/// Argmax routing of a batch: sample j goes to exactly one sub-batch, the
/// worker with the highest probability in row j (ties to the lowest index).
/// Empty sub-batches are fine.
inline std::vector<std::vector<int>> split_batch(const Mat& p_hat) {
  const int k = static_cast<int>(p_hat.cols());
  if (k < 1) throw InvalidInputError("split_batch: no workers");
  std::vector<std::vector<int>> parts(k);
  for (Eigen::Index j = 0; j < p_hat.rows(); ++j) {
    const Vec row = p_hat.row(j).transpose();
    if (!row.allFinite() || std::abs(row.sum() - 1.0) > 1e-6 ||
        (row.array() < 0.0).any())
      throw InvalidInputError("split_batch: row is not a distribution");
    parts[ManagerModel::argmax_lowest(row)].push_back(static_cast<int>(j));
  }
  return parts;
}

inline double selection_entropy(const Vec& shares) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < shares.size(); ++i)
    if (shares(i) > 0.0) h -= shares(i) * std::log(shares(i));
  return h;
}

/// The two degenerate training outcomes:
///   T1 "one dominant worker" - max selection share above the T1 threshold;
///   T2 "all workers trained equally" - near-chance accuracy together with
///   near-uniform selection.
inline TrapFlag classify_trap(const Vec& shares, double accuracy,
                              const TrapThresholds& thresholds = {}) {
  const int k = static_cast<int>(shares.size());
  if (shares.maxCoeff() > thresholds.t1_share) return TrapFlag::kT1;
  if (k > 1 && accuracy < thresholds.t2_accuracy &&
      selection_entropy(shares) >
          thresholds.t2_entropy_frac * std::log(static_cast<double>(k)))
    return TrapFlag::kT2;
  return TrapFlag::kNone;
}

/// Selection shares / accuracy / entropy of the manager on a held-out split,
/// plus the trap flag.
inline TrapDiagnostics diagnose_traps(
    const ManagerModel& manager,
    const std::vector<std::unique_ptr<WorkerModel>>& workers,
    std::span<const DataSample> split, const TrapThresholds& thresholds = {},
    LossKind loss_kind = LossKind::kAde,
    int cap = std::numeric_limits<int>::max()) {
  if (split.empty()) throw InvalidInputError("diagnose_traps: empty split");
  const std::size_t n =
      std::min<std::size_t>(split.size(), static_cast<std::size_t>(cap));
  const int k = static_cast<int>(workers.size());
  Vec counts = Vec::Zero(k);
  int correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const DataSample& s = split[i];
    const int chosen = manager.select_worker(s.context);
    counts(chosen) += 1.0;
    if (chosen == argmin_loss_worker(workers, s, loss_kind)) ++correct;
  }
  TrapDiagnostics d;
  d.selection_shares = counts / static_cast<double>(n);
  d.manager_accuracy = correct / static_cast<double>(n);
  d.selection_entropy = selection_entropy(d.selection_shares);
  d.flag = classify_trap(d.selection_shares, d.manager_accuracy, thresholds);
  return d;
}

namespace detail {

/// Distinct random indices in [0, n), in draw order.
inline std::vector<int> sample_indices(std::mt19937_64& rng, std::size_t n,
                                       int count) {
  const int take = std::min<int>(count, static_cast<int>(n));
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> out;
  out.reserve(take);
  for (int i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> dist(i, n - 1);
    const std::size_t j = dist(rng);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

inline std::vector<const DataSample*> gather(
    const std::vector<DataSample>& data, const std::vector<int>& idx) {
  std::vector<const DataSample*> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(&data[i]);
  return out;
}

inline std::string divergence_snapshot(const TrainingState& state,
                                       const std::string& where) {
  nlohmann::json j;
  j["aborted_in"] = where;
  j["iteration"] = state.iteration;
  j["volumes"] = state.volumes;
  if (!state.records.empty()) {
    const auto& r = state.records.back();
    j["last_manager_loss"] = r.manager_loss;
    j["last_worker_mean_loss"] = r.worker_mean_loss;
  }
  return j.dump(2);
}

struct ModelSnapshots {
  nn::ParamStore::Snapshot manager;
  std::vector<nn::ParamStore::Snapshot> workers;
};

}  // namespace detail

/// One worker phase: alpha times, sample a batch, route it with the frozen
/// manager (argmax per sample), and take one gradient step per non-empty
/// sub-batch. V_i grows by |sub-batch_i| at every step.
inline void worker_phase(const ManagerModel& manager,
                         std::vector<std::unique_ptr<WorkerModel>>& workers,
                         const std::vector<DataSample>& train_split,
                         int alpha, const TrainOptions& opts,
                         TrainingState& state, std::mt19937_64& rng,
                         IterationRecord& record, TrainProbe* probe) {
  if (train_split.empty()) throw ConfigError("worker_phase: empty dataset");
  const int k = static_cast<int>(workers.size());
  std::vector<double> loss_sums(k, 0.0);
  std::vector<long long> loss_counts(k, 0), delta_v(k, 0);

  for (int step = 0; step < alpha; ++step) {
    const auto idx =
        detail::sample_indices(rng, train_split.size(), opts.hp.batch_size);
    const auto batch = detail::gather(train_split, idx);

    Mat p_hat(static_cast<Eigen::Index>(batch.size()), k);
    if (opts.route_by == "oracle_loss") {
      // Detail-#3 reading: route each sample to its argmin-loss worker
      const auto report =
          per_worker_losses(workers, batch, opts.hp.worker_loss);
      for (Eigen::Index j = 0; j < p_hat.rows(); ++j) {
        int best = 0;
        report.per_sample.row(j).minCoeff(&best);
        p_hat.row(j).setZero();
        p_hat(j, best) = 1.0;
      }
    } else {
      for (std::size_t j = 0; j < batch.size(); ++j)
        p_hat.row(static_cast<Eigen::Index>(j)) =
            manager.predict_probs(batch[j]->context).transpose();
    }

    const auto parts = split_batch(p_hat);
    if (probe)
      probe->worker_step(state.iteration, step, parts,
                         static_cast<int>(batch.size()));

    for (int i = 0; i < k; ++i) {
      if (parts[i].empty()) continue;
      std::vector<const DataSample*> sub;
      sub.reserve(parts[i].size());
      for (int j : parts[i]) sub.push_back(batch[j]);
      const double loss =
          workers[i]->train_step(sub, opts.hp.worker_loss, opts.lr_workers);
      if (!std::isfinite(loss))
        throw DivergenceError(
            "non-finite worker loss",
            detail::divergence_snapshot(state, "worker_phase"));
      loss_sums[i] += loss * static_cast<double>(sub.size());
      loss_counts[i] += static_cast<long long>(sub.size());
      state.volumes[i] += static_cast<long long>(sub.size());
      delta_v[i] += static_cast<long long>(sub.size());
    }
  }

  record.worker_mean_loss.assign(k,
                                 std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < k; ++i)
    if (loss_counts[i] > 0)
      record.worker_mean_loss[i] =
          loss_sums[i] / static_cast<double>(loss_counts[i]);
  long long total = 0;
  for (long long d : delta_v) total += d;
  record.selection_shares.assign(k, 0.0);
  if (total > 0)
    for (int i = 0; i < k; ++i)
      record.selection_shares[i] =
          static_cast<double>(delta_v[i]) / static_cast<double>(total);
  if (probe) probe->worker_phase_done(state.iteration, alpha, delta_v);
}

/// One manager phase: fresh batch, per-sample worker losses with frozen
/// workers (rollout decoding), per-sample target distributions under the
/// configured rule, then gradient steps on the configured manager loss.
inline double manager_phase(ManagerModel& manager,
                            const std::vector<std::unique_ptr<WorkerModel>>& workers,
                            const std::vector<DataSample>& train_split,
                            const TrainOptions& opts, TrainingState& state,
                            std::mt19937_64& rng) {
  if (train_split.empty()) throw ConfigError("manager_phase: empty dataset");
  const auto idx =
      detail::sample_indices(rng, train_split.size(), opts.hp.batch_size);
  const auto batch = detail::gather(train_split, idx);

  const auto report = per_worker_losses(workers, batch, opts.hp.worker_loss);
  if (!report.per_sample.allFinite())
    throw DivergenceError(
        "non-finite worker prediction losses",
        detail::divergence_snapshot(state, "manager_phase"));
  Vec volumes(static_cast<Eigen::Index>(state.volumes.size()));
  for (std::size_t i = 0; i < state.volumes.size(); ++i)
    volumes(static_cast<Eigen::Index>(i)) =
        static_cast<double>(state.volumes[i]);

  std::vector<Vec> targets;
  targets.reserve(batch.size());
  for (Eigen::Index j = 0; j < report.per_sample.rows(); ++j) {
    const TargetDistribution target =
        make_target(opts.hp.target_rule, report.per_sample.row(j).transpose(),
                    volumes, opts.hp.beta);
    target.validate();
    targets.push_back(target.probs);
  }

  double first_loss = std::numeric_limits<double>::quiet_NaN();
  for (int step = 0; step < opts.manager_steps; ++step) {
    nn::Tape t;
    auto leased = manager.params().lease(t);
    std::vector<nn::Var> losses;
    losses.reserve(batch.size());
    for (std::size_t j = 0; j < batch.size(); ++j) {
      nn::Var probs = manager.forward(t, leased, batch[j]->context);
      losses.push_back(
          manager_loss_var(t, opts.hp.manager_loss, probs, targets[j]));
    }
    nn::Var total = losses[0];
    for (std::size_t j = 1; j < losses.size(); ++j)
      total = nn::add(total, losses[j]);
    nn::Var mean =
        nn::affine(total, 1.0 / static_cast<double>(losses.size()), 0.0);
    const double value = mean.val()(0, 0);
    if (step == 0) first_loss = value;
    if (!std::isfinite(value))
      throw DivergenceError(
          "non-finite manager loss",
          detail::divergence_snapshot(state, "manager_phase"));
    t.backward(mean.id);
    manager.params().adam_step(t, leased, opts.lr_manager);
  }
  return first_loss;
}

namespace detail {

inline double validation_top1(
    const ManagerModel& manager,
    const std::vector<std::unique_ptr<WorkerModel>>& workers,
    const std::vector<DataSample>& val, int cap, LossKind kind) {
  const std::size_t n =
      std::min<std::size_t>(val.size(), static_cast<std::size_t>(cap));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const DataSample& s = val[i];
    const int chosen = manager.select_worker(s.context);
    const Mat pred = workers[chosen]->predict(s.past, s.target_id);
    total += trajectory_loss(kind, s.target, pred);
  }
  return total / static_cast<double>(n);
}

}  // namespace detail

/// The iterative competition-symbiosis loop: each iteration runs a worker
/// phase (alpha steps, decaying schedule) then a manager phase, evaluates
/// the validation split every eval_every iterations, early-stops on the
/// validation top-1 loss, and restores the best checkpoint. Deterministic
/// given the seed.
///
/// With competition disabled (the control trainer), the train split is dealt
/// into K fixed random shards, each worker trains only on its own shard, and
/// the manager is fitted after the workers are done.
inline TrainResult train(const TrainOptions& opts, const CorpusSplit& corpus,
                         TrainProbe* probe = nullptr,
                         const ResumePayload* resume = nullptr) {
  opts.validate();
  if (corpus.train.empty()) throw ConfigError("train: empty dataset");
  if (corpus.val.empty()) throw ConfigError("train: empty validation split");

  const int k = opts.hp.num_workers;
  std::mt19937_64 init_rng(mix_seed(opts.seed, 0));
  std::mt19937_64 data_rng(mix_seed(opts.seed, 1));

  ManagerConfig mcfg = opts.manager;
  mcfg.num_workers = k;
  WorkerConfig wcfg = opts.worker;
  wcfg.past_len = opts.hp.past_len;
  wcfg.future_len = opts.hp.future_len;
  wcfg.num_units = corpus.train[0].num_units();
  wcfg.max_step = opts.hp.max_step;

  TrainResult result;
  result.manager =
      std::make_unique<ManagerModel>(mcfg, corpus.schema, init_rng);
  for (int i = 0; i < k; ++i) {
    result.workers.push_back(make_worker(wcfg, init_rng));
    result.workers.back()->set_id(i);
  }

  TrainingState& state = result.state;
  state.volumes.assign(k, 0);
  state.rng_seed = opts.seed;
  int start_iteration = 0;
  if (resume) {
    state = resume->state;
    if (static_cast<int>(state.volumes.size()) != k)
      throw ConfigError("train: resume state does not match K");
    if (resume->worker_params.size() != static_cast<std::size_t>(k))
      throw ConfigError("train: resume params do not match K");
    result.manager->params().restore(resume->manager_params);
    for (int i = 0; i < k; ++i)
      result.workers[i]->params().restore(resume->worker_params[i]);
    start_iteration = state.iteration;
    std::istringstream in(state.data_rng_state);
    in >> data_rng;
    if (!in) throw ConfigError("train: bad rng state in resume payload");
  }

  // The no-competition control deals the train split into K fixed shards.
  // A dedicated rng stream keeps the shards identical across resumption.
  std::vector<std::vector<int>> shards;
  if (!opts.competition) {
    std::mt19937_64 shard_rng(mix_seed(opts.seed, 2));
    std::vector<int> perm(corpus.train.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), shard_rng);
    shards.resize(k);
    for (std::size_t i = 0; i < perm.size(); ++i)
      shards[i % k].push_back(perm[i]);
  }

  detail::ModelSnapshots best;
  bool have_best = false;

  auto snapshot_models = [&]() {
    best.manager = result.manager->params().snapshot();
    best.workers.clear();
    for (const auto& w : result.workers)
      best.workers.push_back(w->params().snapshot());
    have_best = true;
  };
  auto restore_models = [&]() {
    result.manager->params().restore(best.manager);
    for (std::size_t i = 0; i < result.workers.size(); ++i)
      result.workers[i]->params().restore(best.workers[i]);
  };

  const int end_iteration =
      opts.stop_after > 0 ? std::min(opts.hp.iterations, opts.stop_after)
                          : opts.hp.iterations;
  std::string last_trap =
      state.records.empty() ? "none" : state.records.back().trap;
  bool stop = false;
  for (int it = start_iteration; it < end_iteration && !stop; ++it) {
    state.iteration = it;
    IterationRecord record;
    record.iteration = it;
    record.alpha = alpha_at(opts.hp, it);

    const std::uint64_t manager_hash_before =
        opts.verify_invariants ? result.manager->params().content_hash() : 0;

    if (opts.competition) {
      worker_phase(*result.manager, result.workers, corpus.train,
                   record.alpha, opts, state, data_rng, record, probe);
    } else {
      // control: each worker trains on its own shard, budget-matched
      const int per_worker =
          std::max(1, opts.hp.batch_size / std::max(1, k));
      const int kk = k;
      std::vector<long long> delta_v(kk, 0);
      record.worker_mean_loss.assign(
          kk, std::numeric_limits<double>::quiet_NaN());
      std::vector<double> sums(kk, 0.0);
      std::vector<long long> counts(kk, 0);
      for (int step = 0; step < record.alpha; ++step) {
        for (int i = 0; i < kk; ++i) {
          if (shards[i].empty()) continue;
          const auto pick =
              detail::sample_indices(data_rng, shards[i].size(), per_worker);
          std::vector<const DataSample*> sub;
          for (int j : pick) sub.push_back(&corpus.train[shards[i][j]]);
          const double loss = result.workers[i]->train_step(
              sub, opts.hp.worker_loss, opts.lr_workers);
          if (!std::isfinite(loss))
            throw DivergenceError(
                "non-finite worker loss",
                detail::divergence_snapshot(state, "control_worker_phase"));
          sums[i] += loss * static_cast<double>(sub.size());
          counts[i] += static_cast<long long>(sub.size());
          state.volumes[i] += static_cast<long long>(sub.size());
          delta_v[i] += static_cast<long long>(sub.size());
        }
      }
      long long total = 0;
      for (long long d : delta_v) total += d;
      record.selection_shares.assign(kk, 0.0);
      for (int i = 0; i < kk; ++i) {
        if (counts[i] > 0)
          record.worker_mean_loss[i] =
              sums[i] / static_cast<double>(counts[i]);
        if (total > 0)
          record.selection_shares[i] =
              static_cast<double>(delta_v[i]) / static_cast<double>(total);
      }
      if (probe) probe->worker_phase_done(it, record.alpha, delta_v);
    }

    if (opts.verify_invariants && probe) {
      const bool manager_untouched =
          result.manager->params().content_hash() == manager_hash_before;
      probe->isolation(it, manager_untouched, true);
    }

    std::vector<std::uint64_t> worker_hashes;
    if (opts.verify_invariants)
      for (const auto& w : result.workers)
        worker_hashes.push_back(w->params().content_hash());

    if (opts.competition) {
      record.manager_loss = manager_phase(*result.manager, result.workers,
                                          corpus.train, opts, state, data_rng);
    }

    if (opts.verify_invariants && probe) {
      bool workers_untouched = true;
      for (std::size_t i = 0; i < result.workers.size(); ++i)
        workers_untouched = workers_untouched &&
                            result.workers[i]->params().content_hash() ==
                                worker_hashes[i];
      probe->isolation(it, true, workers_untouched);
    }

    if ((it + 1) % opts.eval_every == 0) {
      record.val_top1 = detail::validation_top1(
          *result.manager, result.workers, corpus.val, opts.eval_cap,
          opts.hp.worker_loss);
      const TrapDiagnostics diag = diagnose_traps(
          *result.manager, result.workers,
          std::span<const DataSample>(corpus.val), opts.traps,
          opts.hp.worker_loss, opts.eval_cap);
      result.diagnostics.push_back({it, diag});
      last_trap = to_string(diag.flag);

      if (record.val_top1 < state.best_val - 1e-12) {
        state.best_val = record.val_top1;
        state.evals_since_best = 0;
        if (opts.patience > 0) snapshot_models();
      } else {
        ++state.evals_since_best;
        if (opts.patience > 0 && state.evals_since_best >= opts.patience)
          stop = true;
      }
    }
    record.trap = last_trap;
    record.volumes = state.volumes;
    state.records.push_back(std::move(record));
    state.iteration = it + 1;
    if (stop) result.stopped_early = true;
  }

  // the control trainer fits the manager only after the workers are done
  if (!opts.competition && end_iteration == opts.hp.iterations) {
    for (int it = 0; it < opts.hp.iterations; ++it)
      manager_phase(*result.manager, result.workers, corpus.train, opts,
                    state, data_rng);
  }

  if (have_best) restore_models();  // proper early stopping keeps the best

  result.final_diagnostics = diagnose_traps(
      *result.manager, result.workers,
      std::span<const DataSample>(corpus.val), opts.traps,
      opts.hp.worker_loss, opts.eval_cap);

  std::ostringstream rng_out;
  rng_out << data_rng;
  state.data_rng_state = rng_out.str();
  return result;
}

/// Canonical metrics-log serialization: one JSON object per iteration, keys
/// in lexicographic order, non-finite values as null. Byte-identical across
/// runs with equal config and seed.
inline std::vector<std::string> metrics_log_lines(const TrainingState& state) {
  std::vector<std::string> lines;
  lines.reserve(state.records.size());
  for (const auto& r : state.records) {
    nlohmann::json j;
    j["iteration"] = r.iteration;
    j["alpha"] = r.alpha;
    j["manager_loss"] = r.manager_loss;
    j["worker_mean_loss"] = r.worker_mean_loss;
    j["volumes"] = r.volumes;
    j["selection_shares"] = r.selection_shares;
    j["trap"] = r.trap;
    j["val_top1"] = r.val_top1;
    lines.push_back(j.dump());
  }
  return lines;
}

inline nlohmann::json to_json(const TrainOptions& o) {
  nlohmann::json j;
  j["hp"] = to_json(o.hp);
  j["manager"] = to_json(o.manager);
  j["worker"] = to_json(o.worker);
  j["lr_manager"] = o.lr_manager;
  j["lr_workers"] = o.lr_workers;
  j["manager_steps"] = o.manager_steps;
  j["eval_every"] = o.eval_every;
  j["patience"] = o.patience;
  j["eval_cap"] = o.eval_cap;
  j["stop_after"] = o.stop_after;
  j["competition"] = o.competition;
  j["route_by"] = o.route_by;
  j["traps"] = {{"t1_share", o.traps.t1_share},
                {"t2_accuracy", o.traps.t2_accuracy},
                {"t2_entropy_frac", o.traps.t2_entropy_frac}};
  j["seed"] = o.seed;
  return j;
}

inline TrainOptions train_options_from_json(const nlohmann::json& j) {
  TrainOptions o;
  if (j.contains("hp")) o.hp = hyperparameters_from_json(j["hp"]);
  if (j.contains("manager")) o.manager = manager_config_from_json(j["manager"]);
  if (j.contains("worker")) o.worker = worker_config_from_json(j["worker"]);
  if (j.contains("lr_manager")) o.lr_manager = j["lr_manager"].get<double>();
  if (j.contains("lr_workers")) o.lr_workers = j["lr_workers"].get<double>();
  if (j.contains("manager_steps"))
    o.manager_steps = j["manager_steps"].get<int>();
  if (j.contains("eval_every")) o.eval_every = j["eval_every"].get<int>();
  if (j.contains("patience")) o.patience = j["patience"].get<int>();
  if (j.contains("eval_cap")) o.eval_cap = j["eval_cap"].get<int>();
  if (j.contains("stop_after")) o.stop_after = j["stop_after"].get<int>();
  if (j.contains("competition")) o.competition = j["competition"].get<bool>();
  if (j.contains("route_by")) o.route_by = j["route_by"].get<std::string>();
  if (j.contains("traps")) {
    const auto& t = j["traps"];
    if (t.contains("t1_share")) o.traps.t1_share = t["t1_share"].get<double>();
    if (t.contains("t2_accuracy"))
      o.traps.t2_accuracy = t["t2_accuracy"].get<double>();
    if (t.contains("t2_entropy_frac"))
      o.traps.t2_entropy_frac = t["t2_entropy_frac"].get<double>();
  }
  if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
  o.validate();
  return o;
}

inline std::uint64_t config_hash(const TrainOptions& o) {
  return fnv1a_str(to_json(o).dump());
}

inline nlohmann::json to_json(const TrainingState& s) {
  nlohmann::json j;
  j["volumes"] = s.volumes;
  j["iteration"] = s.iteration;
  j["rng_seed"] = s.rng_seed;
  j["data_rng_state"] = s.data_rng_state;
  j["best_val"] = s.best_val;
  j["evals_since_best"] = s.evals_since_best;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& line : metrics_log_lines(s))
    records.push_back(nlohmann::json::parse(line));
  j["records"] = std::move(records);
  return j;
}

inline TrainingState training_state_from_json(const nlohmann::json& j) {
  TrainingState s;
  s.volumes = j.at("volumes").get<std::vector<long long>>();
  s.iteration = j.at("iteration").get<int>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  s.data_rng_state = j.at("data_rng_state").get<std::string>();
  s.best_val = j.at("best_val").is_null()
                   ? std::numeric_limits<double>::infinity()
                   : j.at("best_val").get<double>();
  s.evals_since_best = j.at("evals_since_best").get<int>();
  for (const auto& r : j.at("records")) {
    IterationRecord rec;
    rec.iteration = r.at("iteration").get<int>();
    rec.alpha = r.at("alpha").get<int>();
    rec.manager_loss = r.at("manager_loss").is_null()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : r.at("manager_loss").get<double>();
    for (const auto& x : r.at("worker_mean_loss"))
      rec.worker_mean_loss.push_back(
          x.is_null() ? std::numeric_limits<double>::quiet_NaN()
                      : x.get<double>());
    rec.volumes = r.at("volumes").get<std::vector<long long>>();
    rec.selection_shares =
        r.at("selection_shares").get<std::vector<double>>();
    rec.trap = r.at("trap").get<std::string>();
    rec.val_top1 = r.at("val_top1").is_null()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : r.at("val_top1").get<double>();
    s.records.push_back(std::move(rec));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ablation grid
// ---------------------------------------------------------------------------

/// Axes of the ablation grid; empty axes keep the base value.
struct AblationGrid {
  std::vector<int> num_workers;
  std::vector<double> alpha0;
  std::vector<double> beta;
  std::vector<TargetRule> target_rule;
  std::vector<ManagerLossKind> manager_loss;
  std::vector<LossKind> worker_loss;
  std::vector<bool> competition;  // includes the Group-B control when false
};

struct AblationCell {
  std::string label;
  TrainOptions options;
  EvalSummary eval;
  TrapFlag trap = TrapFlag::kNone;
};

struct AblationReport {
  std::vector<AblationCell> cells;
};

/// Trains every grid configuration under identical seeds and data, and
/// evaluates each on the shared test split.
inline AblationReport ablation_matrix(const TrainOptions& base,
                                      const CorpusSplit& corpus,
                                      const AblationGrid& grid) {
  auto axis_or = [](auto values, auto fallback) {
    if (values.empty()) values.push_back(fallback);
    return values;
  };
  const auto ks = axis_or(grid.num_workers, base.hp.num_workers);
  const auto alphas = axis_or(grid.alpha0, base.hp.alpha0);
  const auto betas = axis_or(grid.beta, base.hp.beta);
  const auto rules = axis_or(grid.target_rule, base.hp.target_rule);
  const auto mlosses = axis_or(grid.manager_loss, base.hp.manager_loss);
  const auto wlosses = axis_or(grid.worker_loss, base.hp.worker_loss);
  const auto comps = axis_or(grid.competition, base.competition);

  AblationReport report;
  for (int k : ks)
    for (double a : alphas)
      for (double b : betas)
        for (TargetRule rule : rules)
          for (ManagerLossKind ml : mlosses)
            for (LossKind wl : wlosses)
              for (bool comp : comps) {
                TrainOptions opts = base;
                opts.hp.num_workers = k;
                opts.hp.top_k = std::min(base.hp.top_k, k);
                opts.hp.alpha0 = a;
                opts.hp.beta = b;
                opts.hp.target_rule = rule;
                opts.hp.manager_loss = ml;
                opts.hp.worker_loss = wl;
                opts.competition = comp;

                AblationCell cell;
                std::ostringstream label;
                label << "K=" << k << " alpha0=" << a << " beta=" << b
                      << " rule=" << to_string(rule) << " mloss="
                      << to_string(ml) << " wloss=" << to_string(wl)
                      << " competition=" << (comp ? "on" : "off");
                cell.label = label.str();
                cell.options = opts;

                TrainResult r = train(opts, corpus);
                cell.eval = evaluate_split(
                    *r.manager, r.workers,
                    std::span<const DataSample>(corpus.test),
                    opts.hp.top_k, opts.hp.worker_loss);
                cell.trap = r.final_diagnostics.flag;
                report.cells.push_back(std::move(cell));
              }
  return report;
}

/// Text rendering of the ablation table: one row per configuration with the
/// losses, the manager accuracy, and the trap flag column.
inline std::string render_ablation_table(const AblationReport& report) {
  std::ostringstream out;
  out << "configuration | top-1 | top-k | accuracy | trap\n";
  for (const auto& cell : report.cells) {
    out << cell.label << " | ";
    out.precision(6);
    out << cell.eval.top1 << " | " << cell.eval.topk << " | "
        << cell.eval.accuracy << " | " << to_string(cell.trap) << "\n";
  }
  return out.str();
}

}  // namespace mw
