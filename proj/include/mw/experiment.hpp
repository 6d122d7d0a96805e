#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mw/training.hpp"

namespace mw {

struct RoundRecord {
  int round = 0;
  double top1 = 0.0;
  double topk = 0.0;
  double accuracy = 0.0;
  TrapFlag trap = TrapFlag::kNone;
};

/// Per-round metrics of the re-sample/re-train protocol plus their MEAN and
/// population SD. The summary fields are computed from the emitted per-round
/// values, in round order, with no other inputs.
struct EvaluationReport {
  std::string model;
  std::vector<RoundRecord> rounds;
  double mean_top1 = 0.0, sd_top1 = 0.0;
  double mean_topk = 0.0, sd_topk = 0.0;
  double mean_accuracy = 0.0, sd_accuracy = 0.0;
  std::uint64_t config_hash = 0;
  int k = 1;
};

/// Population mean/SD (divides by n), in input order.
inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) throw InvalidInputError("mean_sd: empty input");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

inline void finalize_report(EvaluationReport& report) {
  std::vector<double> top1, topk, acc;
  for (const auto& r : report.rounds) {
    top1.push_back(r.top1);
    topk.push_back(r.topk);
    acc.push_back(r.accuracy);
  }
  std::tie(report.mean_top1, report.sd_top1) = mean_sd(top1);
  std::tie(report.mean_topk, report.sd_topk) = mean_sd(topk);
  std::tie(report.mean_accuracy, report.sd_accuracy) = mean_sd(acc);
}

/// The multi-round protocol: for every round, re-sample the corpus under a
/// round seed, re-train from scratch under a round-specific training seed,
/// and evaluate the test split. Rounds are independent given their seeds.
inline EvaluationReport run_rounds(const TrainOptions& base,
                                   const CorpusSource& source,
                                   int rounds = 10,
                                   const std::string& model_name = "model") {
  if (rounds < 1) throw InvalidInputError("run_rounds: rounds must be >= 1");
  EvaluationReport report;
  report.model = model_name;
  report.k = base.hp.top_k;
  report.config_hash = config_hash(base);
  for (int r = 0; r < rounds; ++r) {
    const CorpusSplit corpus = resample(source, static_cast<std::uint64_t>(r));
    TrainOptions opts = base;
    opts.seed = mix_seed(base.seed, 1000 + static_cast<std::uint64_t>(r));
    const TrainResult trained = train(opts, corpus);
    const EvalSummary eval = evaluate_split(
        *trained.manager, trained.workers,
        std::span<const DataSample>(corpus.test), opts.hp.top_k,
        opts.hp.worker_loss);
    RoundRecord rec;
    rec.round = r;
    rec.top1 = eval.top1;
    rec.topk = eval.topk;
    rec.accuracy = eval.accuracy;
    rec.trap = trained.final_diagnostics.flag;
    report.rounds.push_back(rec);
  }
  finalize_report(report);
  return report;
}

/// Context-blind control: a single worker of identical capacity trained on
/// all data (the whole model degenerates to its K=1 case).
inline EvalSummary baseline_single_worker(const TrainOptions& base,
                                          const CorpusSplit& corpus,
                                          TrainResult* out = nullptr) {
  TrainOptions opts = base;
  opts.hp.num_workers = 1;
  opts.hp.top_k = 1;
  TrainResult trained = train(opts, corpus);
  const EvalSummary eval = evaluate_split(
      *trained.manager, trained.workers,
      std::span<const DataSample>(corpus.test), 1, opts.hp.worker_loss);
  if (out) *out = std::move(trained);
  return eval;
}

/// Ten-round table layout: one row per model, a column per round, then MEAN
/// and SD.
inline std::string render_rounds_table(
    const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) throw InvalidInputError("render_rounds_table: empty");
  std::ostringstream out;
  out << "Model";
  for (std::size_t r = 0; r < reports[0].rounds.size(); ++r)
    out << " | Round " << r;
  out << " | MEAN | SD\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& report : reports) {
    out << report.model;
    for (const auto& r : report.rounds) out << " | " << r.top1;
    out << " | " << report.mean_top1 << " | " << report.sd_top1 << "\n";
  }
  return out.str();
}

inline nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json j;
  j["model"] = report.model;
  j["k"] = report.k;
  j["config_hash"] = report.config_hash;
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : report.rounds)
    rounds.push_back({{"round", r.round},
                      {"top1", r.top1},
                      {"topk", r.topk},
                      {"accuracy", r.accuracy},
                      {"trap", to_string(r.trap)}});
  j["rounds"] = std::move(rounds);
  j["mean_top1"] = report.mean_top1;
  j["sd_top1"] = report.sd_top1;
  j["mean_topk"] = report.mean_topk;
  j["sd_topk"] = report.sd_topk;
  j["mean_accuracy"] = report.mean_accuracy;
  j["sd_accuracy"] = report.sd_accuracy;
  return j;
}

inline EvaluationReport evaluation_report_from_json(const nlohmann::json& j) {
  EvaluationReport report;
  report.model = j.at("model").get<std::string>();
  report.k = j.at("k").get<int>();
  report.config_hash = j.at("config_hash").get<std::uint64_t>();
  for (const auto& r : j.at("rounds")) {
    RoundRecord rec;
    rec.round = r.at("round").get<int>();
    rec.top1 = r.at("top1").get<double>();
    rec.topk = r.at("topk").get<double>();
    rec.accuracy = r.at("accuracy").get<double>();
    const std::string trap = r.at("trap").get<std::string>();
    rec.trap = trap == "T1" ? TrapFlag::kT1
                            : (trap == "T2" ? TrapFlag::kT2 : TrapFlag::kNone);
    report.rounds.push_back(rec);
  }
  report.mean_top1 = j.at("mean_top1").get<double>();
  report.sd_top1 = j.at("sd_top1").get<double>();
  report.mean_topk = j.at("mean_topk").get<double>();
  report.sd_topk = j.at("sd_topk").get<double>();
  report.mean_accuracy = j.at("mean_accuracy").get<double>();
  report.sd_accuracy = j.at("sd_accuracy").get<double>();
  return report;
}

}  // namespace mw
