#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "mw/training.hpp"

using namespace mw;

namespace {

SyntheticSpec tiny_corpus_spec(int samples = 120, std::uint64_t seed = 7) {
  SyntheticSpec spec;
  spec.num_samples = samples;
  spec.past_len = 10;
  spec.future_len = 4;
  spec.context_len = 3;
  spec.seed = seed;
  return spec;
}

TrainOptions tiny_options(const SyntheticSpec& spec, int k, int iterations,
                          std::uint64_t seed = 1) {
  TrainOptions opts;
  opts.hp.num_workers = k;
  opts.hp.top_k = std::min(2, k);
  opts.hp.alpha0 = 2.0;
  opts.hp.beta = 0.5;
  opts.hp.batch_size = 16;
  opts.hp.iterations = iterations;
  opts.hp.context_len = spec.context_len;
  opts.hp.past_len = spec.past_len;
  opts.hp.future_len = spec.future_len;
  opts.hp.max_step = spec.max_step();
  opts.manager.d_model = 8;
  opts.manager.heads = 2;
  opts.manager.blocks = 1;
  opts.manager.ffn_mult = 2;
  opts.worker.d_model = 8;
  opts.worker.heads = 2;
  opts.worker.enc_blocks = 1;
  opts.worker.dec_blocks = 1;
  opts.worker.ffn_mult = 2;
  opts.eval_every = 3;
  opts.patience = 0;  // keep runs deterministic in length
  opts.eval_cap = 32;
  opts.seed = seed;
  return opts;
}

struct RecordingProbe : TrainProbe {
  int steps = 0;
  bool partitions_ok = true;
  bool volumes_ok = true;
  bool isolation_ok = true;
  std::vector<std::pair<int, long long>> phase_totals;  // (alpha, sum dV)

  void worker_step(int, int, const std::vector<std::vector<int>>& parts,
                   int batch_size) override {
    ++steps;
    std::set<int> seen;
    int total = 0;
    for (const auto& part : parts) {
      total += static_cast<int>(part.size());
      for (int j : part) {
        if (seen.count(j)) partitions_ok = false;
        seen.insert(j);
      }
    }
    if (total != batch_size ||
        static_cast<int>(seen.size()) != batch_size)
      partitions_ok = false;
  }

  void worker_phase_done(int, int alpha,
                         const std::vector<long long>& delta_v) override {
    long long total = 0;
    for (long long d : delta_v) total += d;
    phase_totals.push_back({alpha, total});
  }

  void isolation(int, bool manager_untouched,
                 bool workers_untouched) override {
    if (!manager_untouched || !workers_untouched) isolation_ok = false;
  }
};

}  // namespace

TEST_CASE("split_batch routes each sample to its argmax worker") {
  Mat p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const auto parts = split_batch(p);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == std::vector<int>{0});
  CHECK(parts[1] == std::vector<int>{1});
}

TEST_CASE("split_batch ties go to the lowest index") {
  Mat p = Mat::Constant(4, 3, 1.0 / 3.0);
  const auto parts = split_batch(p);
  CHECK(parts[0].size() == 4);
  CHECK(parts[1].empty());
  CHECK(parts[2].empty());
}

TEST_CASE("split_batch partitions every batch") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int b = 1 + static_cast<int>(rng() % 12);
    const int k = 1 + static_cast<int>(rng() % 6);
    Mat p(b, k);
    for (int j = 0; j < b; ++j) {
      Vec row(k);
      for (int i = 0; i < k; ++i)
        row(i) = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
      p.row(j) = (row / row.sum()).transpose();
    }
    const auto parts = split_batch(p);
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto& part : parts) {
      total += part.size();
      seen.insert(part.begin(), part.end());
    }
    CHECK(total == static_cast<std::size_t>(b));
    CHECK(seen.size() == static_cast<std::size_t>(b));
  }
}

TEST_CASE("split_batch rejects non-distributions") {
  Mat p(1, 2);
  p << 0.9, 0.9;
  CHECK_THROWS_AS(split_batch(p), InvalidInputError);
}

TEST_CASE("alpha schedule decays linearly to one over the first half") {
  Hyperparameters hp;
  hp.alpha0 = 4.0;
  hp.iterations = 100;
  hp.alpha_decay = AlphaDecay::kLinearHalf;
  CHECK(alpha_at(hp, 0) == 4);
  CHECK(alpha_at(hp, 25) == 3);  // 4 - 3 * 0.5 = 2.5, rounds away from zero
  CHECK(alpha_at(hp, 50) == 1);
  CHECK(alpha_at(hp, 99) == 1);
  hp.alpha_decay = AlphaDecay::kNone;
  CHECK(alpha_at(hp, 99) == 4);
}

TEST_CASE("trap classification thresholds") {
  TrapThresholds th;
  Vec dominant(4);
  dominant << 0.95, 0.03, 0.01, 0.01;
  CHECK(classify_trap(dominant, 0.99, th) == TrapFlag::kT1);

  Vec uniform = Vec::Constant(4, 0.25);
  CHECK(classify_trap(uniform, 0.1, th) == TrapFlag::kT2);
  CHECK(classify_trap(uniform, 0.5, th) == TrapFlag::kNone);

  Vec spread(4);
  spread << 0.5, 0.3, 0.15, 0.05;  // entropy below 0.9 log 4
  CHECK(classify_trap(spread, 0.1, th) == TrapFlag::kNone);

  // K = 1: never T2, T1 only through the share threshold
  Vec single(1);
  single << 1.0;
  CHECK(classify_trap(single, 1.0, th) == TrapFlag::kT1);
  CHECK(selection_entropy(single) == 0.0);
  CHECK(selection_entropy(uniform) ==
        Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("training keeps routing partitions, volumes, and phase isolation") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions opts = tiny_options(spec, 3, 4);
  opts.verify_invariants = true;

  RecordingProbe probe;
  const TrainResult result = train(opts, corpus, &probe);

  CHECK(probe.partitions_ok);
  CHECK(probe.isolation_ok);
  REQUIRE(probe.phase_totals.size() == 4);
  for (const auto& [alpha, total] : probe.phase_totals)
    CHECK(total == static_cast<long long>(alpha) * opts.hp.batch_size);

  // volumes are non-negative and monotone across records
  long long prev_total = 0;
  for (const auto& r : result.state.records) {
    long long total = 0;
    for (long long v : r.volumes) {
      CHECK(v >= 0);
      total += v;
    }
    CHECK(total >= prev_total);
    prev_total = total;
  }
  CHECK(result.state.records.size() == 4);
}

TEST_CASE("training is deterministic given the seed") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  const TrainOptions opts = tiny_options(spec, 2, 4);

  const TrainResult a = train(opts, corpus);
  const TrainResult b = train(opts, corpus);

  CHECK(a.state.volumes == b.state.volumes);
  CHECK(a.manager->params().content_hash() ==
        b.manager->params().content_hash());
  for (std::size_t i = 0; i < a.workers.size(); ++i)
    CHECK(a.workers[i]->params().content_hash() ==
          b.workers[i]->params().content_hash());
  CHECK(metrics_log_lines(a.state) == metrics_log_lines(b.state));
}

TEST_CASE("different seeds give different trajectories") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  const TrainResult a = train(tiny_options(spec, 2, 3, 1), corpus);
  const TrainResult b = train(tiny_options(spec, 2, 3, 2), corpus);
  CHECK(a.manager->params().content_hash() !=
        b.manager->params().content_hash());
}

TEST_CASE("K=1 degenerates to plain worker training") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  const TrainResult result = train(tiny_options(spec, 1, 3), corpus);
  const Vec p = result.manager->predict_probs(corpus.val[0].context);
  REQUIRE(p.size() == 1);
  CHECK(p(0) == Catch::Approx(1.0));
  CHECK(result.state.volumes[0] > 0);
  CHECK(result.final_diagnostics.manager_accuracy == 1.0);
}

TEST_CASE("divergence aborts with a diagnostic snapshot") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions opts = tiny_options(spec, 2, 10);
  opts.lr_workers = 1e300;  // guaranteed blow-up
  try {
    train(opts, corpus);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(!e.snapshot.empty());
    const auto j = nlohmann::json::parse(e.snapshot);
    CHECK(j.contains("iteration"));
    CHECK(j.contains("volumes"));
  }
}

TEST_CASE("training resumes exactly from a checkpointed state") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions full_opts = tiny_options(spec, 2, 6);

  const TrainResult full = train(full_opts, corpus);

  TrainOptions half_opts = full_opts;
  half_opts.stop_after = 3;  // same schedule, paused mid-run
  TrainResult half = train(half_opts, corpus);

  ResumePayload payload;
  payload.state = half.state;
  payload.manager_params = half.manager->params().snapshot();
  for (const auto& w : half.workers)
    payload.worker_params.push_back(w->params().snapshot());

  const TrainResult resumed = train(full_opts, corpus, nullptr, &payload);

  CHECK(resumed.state.volumes == full.state.volumes);
  CHECK(resumed.manager->params().content_hash() ==
        full.manager->params().content_hash());
  for (std::size_t i = 0; i < full.workers.size(); ++i)
    CHECK(resumed.workers[i]->params().content_hash() ==
          full.workers[i]->params().content_hash());
  CHECK(metrics_log_lines(resumed.state) == metrics_log_lines(full.state));
}

TEST_CASE("oracle-loss routing is accepted as a config switch") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions opts = tiny_options(spec, 2, 2);
  opts.route_by = "oracle_loss";
  const TrainResult result = train(opts, corpus);
  CHECK(result.state.records.size() == 2);

  opts.route_by = "nonsense";
  CHECK_THROWS_AS(train(opts, corpus), ConfigError);
}

TEST_CASE("the no-competition control trains workers equally") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions opts = tiny_options(spec, 3, 4);
  opts.competition = false;
  const TrainResult result = train(opts, corpus);

  // equal shards and budgets: volumes within one batch of each other
  const auto& v = result.state.volumes;
  const long long vmin = *std::min_element(v.begin(), v.end());
  const long long vmax = *std::max_element(v.begin(), v.end());
  CHECK(vmax - vmin <= opts.hp.batch_size);
  CHECK(vmin > 0);

  // training shares uniform by construction
  for (const auto& r : result.state.records)
    for (double share : r.selection_shares)
      CHECK(share == Catch::Approx(1.0 / 3.0).margin(0.05));
}

TEST_CASE("metrics log lines are valid JSON records") {
  const auto spec = tiny_corpus_spec();
  const CorpusSplit corpus = generate_synthetic(spec);
  const TrainResult result = train(tiny_options(spec, 2, 3), corpus);
  const auto lines = metrics_log_lines(result.state);
  REQUIRE(lines.size() == 3);
  for (const auto& line : lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("iteration"));
    CHECK(j.contains("manager_loss"));
    CHECK(j.contains("worker_mean_loss"));
    CHECK(j.contains("volumes"));
    CHECK(j.contains("selection_shares"));
    CHECK(j.contains("trap"));
  }
}

TEST_CASE("ablation grid covers the product of axes") {
  const auto spec = tiny_corpus_spec(100);
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions base = tiny_options(spec, 2, 2);

  AblationGrid grid;
  grid.beta = {0.0, 0.5};
  grid.competition = {true, false};
  const AblationReport report = ablation_matrix(base, corpus, grid);
  REQUIRE(report.cells.size() == 4);
  for (const auto& cell : report.cells) {
    CHECK(cell.eval.top1 >= 0.0);
    CHECK(cell.eval.topk <= cell.eval.top1 + 1e-12);
  }
  const std::string table = render_ablation_table(report);
  CHECK(table.find("beta=0.5") != std::string::npos);
  CHECK(table.find("competition=off") != std::string::npos);
  CHECK(table.find("trap") != std::string::npos);
}

TEST_CASE("single-cell ablation equals a direct train call") {
  const auto spec = tiny_corpus_spec(100);
  const CorpusSplit corpus = generate_synthetic(spec);
  TrainOptions base = tiny_options(spec, 2, 2);

  const AblationReport report = ablation_matrix(base, corpus, {});
  REQUIRE(report.cells.size() == 1);
  const TrainResult direct = train(base, corpus);
  const EvalSummary direct_eval = evaluate_split(
      *direct.manager, direct.workers,
      std::span<const DataSample>(corpus.test), base.hp.top_k,
      base.hp.worker_loss);
  CHECK(report.cells[0].eval.top1 == Catch::Approx(direct_eval.top1));
  CHECK(report.cells[0].eval.accuracy ==
        Catch::Approx(direct_eval.accuracy));
}
