#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mw/constraint.hpp"
#include "mw/losses.hpp"
#include "mw/nn/layers.hpp"
#include "mw/types.hpp"

namespace mw {

struct WorkerConfig {
  std::string kind = "transformer";  // or "gru"
  int d_model = 32;
  int heads = 4;
  int enc_blocks = 2;
  int dec_blocks = 2;
  int ffn_mult = 4;
  int past_len = 30;    // LX
  int future_len = 10;  // LY
  int num_units = 1;    // |U|
  double max_step = 1.0;

  void validate() const {
    if (kind != "transformer" && kind != "gru")
      throw InvalidInputError("worker: unknown kind '" + kind + "'");
    if (d_model < 1 || heads < 1 || enc_blocks < 1 || dec_blocks < 1 ||
        ffn_mult < 1)
      throw InvalidInputError("worker: bad architecture sizes");
    if (d_model % heads != 0)
      throw InvalidInputError("worker: d_model must be divisible by heads");
    if (past_len < 1 || future_len < 1 || num_units < 1)
      throw InvalidInputError("worker: bad sequence lengths");
    if (!(max_step > 0.0)) throw InvalidInputError("worker: MaxMS must be > 0");
  }
};

inline nlohmann::json to_json(const WorkerConfig& c) {
  return nlohmann::json{{"kind", c.kind},
                        {"d_model", c.d_model},
                        {"heads", c.heads},
                        {"enc_blocks", c.enc_blocks},
                        {"dec_blocks", c.dec_blocks},
                        {"ffn_mult", c.ffn_mult},
                        {"LX", c.past_len},
                        {"LY", c.future_len},
                        {"num_units", c.num_units},
                        {"max_ms", c.max_step}};
}

inline WorkerConfig worker_config_from_json(const nlohmann::json& j) {
  WorkerConfig c;
  if (j.contains("kind")) c.kind = j["kind"].get<std::string>();
  if (j.contains("d_model")) c.d_model = j["d_model"].get<int>();
  if (j.contains("heads")) c.heads = j["heads"].get<int>();
  if (j.contains("enc_blocks")) c.enc_blocks = j["enc_blocks"].get<int>();
  if (j.contains("dec_blocks")) c.dec_blocks = j["dec_blocks"].get<int>();
  if (j.contains("ffn_mult")) c.ffn_mult = j["ffn_mult"].get<int>();
  if (j.contains("LX")) c.past_len = j["LX"].get<int>();
  if (j.contains("LY")) c.future_len = j["LY"].get<int>();
  if (j.contains("num_units")) c.num_units = j["num_units"].get<int>();
  if (j.contains("max_ms")) c.max_step = j["max_ms"].get<double>();
  c.validate();
  return c;
}

/// Per-step input features for the predictors: for each unit, the offset
/// from that unit's final observed position plus the step displacement.
/// Translation-invariant, so raw world coordinates stay unscaled.
inline Mat worker_input_features(const Mat& tx) {
  const Eigen::Index lx = tx.rows();
  const Eigen::Index units = tx.cols() / 2;
  Mat f(lx, 4 * units);
  for (Eigen::Index u = 0; u < units; ++u) {
    const Eigen::Index c = 2 * u;
    const double ref_x = tx(lx - 1, c), ref_y = tx(lx - 1, c + 1);
    for (Eigen::Index r = 0; r < lx; ++r) {
      f(r, 4 * u + 0) = tx(r, c) - ref_x;
      f(r, 4 * u + 1) = tx(r, c + 1) - ref_y;
      f(r, 4 * u + 2) = r == 0 ? 0.0 : tx(r, c) - tx(r - 1, c);
      f(r, 4 * u + 3) = r == 0 ? 0.0 : tx(r, c + 1) - tx(r - 1, c + 1);
    }
  }
  return f;
}

/// A worker is any parameterized sequence predictor mapping the past
/// trajectories TX to a future trajectory of `future_len` locations, every
/// consecutive step constrained below MaxMS.
class WorkerModel {
 public:
  virtual ~WorkerModel() = default;

  int id() const { return id_; }
  void set_id(int id) { id_ = id; }

  virtual const WorkerConfig& config() const = 0;
  virtual std::string kind() const = 0;
  virtual nn::ParamStore& params() = 0;
  virtual const nn::ParamStore& params() const = 0;

  double max_step() const { return config().max_step; }

  /// Teacher-forced prediction graph: decoder inputs are the ground-truth
  /// previous locations. Used for training steps.
  virtual nn::Var forward_teacher(nn::Tape& t, const std::vector<nn::Var>& p,
                                  const Mat& tx, const Mat& ty,
                                  int target_unit) const = 0;

  /// Autoregressive prediction graph: each step conditions on the start
  /// location and the previously predicted locations.
  virtual nn::Var forward_rollout(nn::Tape& t, const std::vector<nn::Var>& p,
                                  const Mat& tx, int steps,
                                  int target_unit) const = 0;

  /// Deterministic rollout prediction (no gradients): future_len locations.
  Mat predict(const Mat& tx, int target_unit = 0) const {
    nn::Tape t(false);
    auto leased = params().lease(t);
    return forward_rollout(t, leased, tx, config().future_len, target_unit)
        .val();
  }

  /// One teacher-forced gradient step on a sub-batch; returns the mean loss.
  double train_step(const std::vector<const DataSample*>& batch,
                    LossKind loss_kind, double lr) {
    if (batch.empty())
      throw InvalidInputError("worker train_step: empty batch");
    nn::Tape t;
    auto leased = params().lease(t);
    std::vector<nn::Var> losses;
    losses.reserve(batch.size());
    for (const DataSample* s : batch) {
      nn::Var pred =
          forward_teacher(t, leased, s->past, s->target, s->target_id);
      losses.push_back(trajectory_loss_var(t, loss_kind, pred, s->target));
    }
    nn::Var total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i)
      total = nn::add(total, losses[i]);
    nn::Var mean =
        nn::affine(total, 1.0 / static_cast<double>(losses.size()), 0.0);
    const double value = mean.val()(0, 0);
    if (!std::isfinite(value)) return value;  // caller handles divergence
    t.backward(mean.id);
    params().adam_step(t, leased, lr);
    return value;
  }

 protected:
  void check_tx(const Mat& tx, int target_unit) const {
    const auto& cfg = config();
    if (tx.rows() != cfg.past_len || tx.cols() != 2 * cfg.num_units)
      throw InvalidInputError("worker: TX must be LX x 2|U|");
    if (target_unit < 0 || target_unit >= cfg.num_units)
      throw InvalidInputError("worker: target unit out of range");
    if (!tx.allFinite())
      throw InvalidInputError("worker: non-finite TX");
  }

 private:
  int id_ = 0;
};

/// Encoder-decoder attention worker. Encoders learn the motion in TX; the
/// decoder emits one raw displacement per future step, each constrained by
/// the step-limit layer and accumulated from the last observed location.
/// Note the constraint's dead zone: a displacement head that is exactly zero
/// keeps the unit in place and receives no gradient, so heads are
/// random-initialized like every other layer.
class TransformerWorker final : public WorkerModel {
 public:
  TransformerWorker(WorkerConfig cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg_.validate();
    enc_proj_ =
        nn::Linear(params_, "enc_proj", 4 * cfg_.num_units, cfg_.d_model, rng);
    for (int b = 0; b < cfg_.enc_blocks; ++b)
      enc_blocks_.emplace_back(params_, "enc" + std::to_string(b),
                               cfg_.d_model, cfg_.heads, cfg_.ffn_mult, rng);
    dec_proj_ = nn::Linear(params_, "dec_proj", 2, cfg_.d_model, rng);
    for (int b = 0; b < cfg_.dec_blocks; ++b)
      dec_blocks_.emplace_back(params_, "dec" + std::to_string(b),
                               cfg_.d_model, cfg_.heads, cfg_.ffn_mult, rng);
    head_ = nn::Linear(params_, "head", cfg_.d_model, 2, rng);
  }

  const WorkerConfig& config() const override { return cfg_; }
  std::string kind() const override { return "transformer"; }
  nn::ParamStore& params() override { return params_; }
  const nn::ParamStore& params() const override { return params_; }

  nn::Var forward_teacher(nn::Tape& t, const std::vector<nn::Var>& p,
                          const Mat& tx, const Mat& ty,
                          int target_unit) const override {
    check_tx(tx, target_unit);
    if (ty.rows() != cfg_.future_len || ty.cols() != 2)
      throw InvalidInputError("worker: TY must be LY x 2");
    const Eigen::Vector2d start =
        tx.row(tx.rows() - 1).segment<2>(2 * target_unit);
    nn::Var memory = encode(t, p, tx);
    // decoder inputs: offsets of the previous ground-truth location
    Mat dec_in(cfg_.future_len, 2);
    dec_in.row(0).setZero();
    for (int i = 1; i < cfg_.future_len; ++i)
      dec_in.row(i) = ty.row(i - 1) - start.transpose();
    nn::Var x = dec_proj_(t, p, nn::make_leaf(t, dec_in));
    x = nn::add_const(x, nn::sinusoidal_encoding(cfg_.future_len, cfg_.d_model));
    for (const auto& b : dec_blocks_) x = b(t, p, x, memory);
    nn::Var raw = head_(t, p, x);
    return constrain_and_accumulate(t, raw, start, cfg_.max_step);
  }

  nn::Var forward_rollout(nn::Tape& t, const std::vector<nn::Var>& p,
                          const Mat& tx, int steps,
                          int target_unit) const override {
    check_tx(tx, target_unit);
    if (steps < 1) throw InvalidInputError("worker: steps must be >= 1");
    const Eigen::Vector2d start =
        tx.row(tx.rows() - 1).segment<2>(2 * target_unit);
    const Mat start_row = start.transpose();
    nn::Var memory = encode(t, p, tx);
    const Mat pe = nn::sinusoidal_encoding(steps, cfg_.d_model);

    std::vector<nn::Var> offsets;  // decoder inputs seen so far
    offsets.push_back(nn::make_leaf(t, Mat::Zero(1, 2)));
    std::vector<nn::Var> locations;
    nn::Var prev = nn::make_leaf(t, start_row);
    for (int i = 0; i < steps; ++i) {
      nn::Var dec_in = offsets.size() == 1 ? offsets[0]
                                           : nn::concat_rows(t, offsets);
      nn::Var x = dec_proj_(t, p, dec_in);
      x = nn::add_const(x, pe.topRows(i + 1));
      for (const auto& b : dec_blocks_) x = b(t, p, x, memory);
      nn::Var raw = head_(t, p, nn::slice_rows(x, i, 1));
      nn::Var scale = nn::step_scale(nn::row_norms(raw), cfg_.max_step);
      nn::Var loc = nn::add(prev, nn::mul_colvec(raw, scale));
      locations.push_back(loc);
      prev = loc;
      if (i + 1 < steps) offsets.push_back(nn::add_const(loc, -start_row));
    }
    return locations.size() == 1 ? locations[0]
                                 : nn::concat_rows(t, locations);
  }

 private:
  nn::Var encode(nn::Tape& t, const std::vector<nn::Var>& p,
                 const Mat& tx) const {
    nn::Var x =
        enc_proj_(t, p, nn::make_leaf(t, worker_input_features(tx)));
    x = nn::add_const(x, nn::sinusoidal_encoding(cfg_.past_len, cfg_.d_model));
    for (const auto& b : enc_blocks_) x = b(t, p, x);
    return x;
  }

  WorkerConfig cfg_;
  nn::ParamStore params_;
  nn::Linear enc_proj_;
  std::vector<nn::EncoderBlock> enc_blocks_;
  nn::Linear dec_proj_;
  std::vector<nn::DecoderBlock> dec_blocks_;
  nn::Linear head_;
};

/// Lightweight recurrent worker, demonstrating that any sequence predictor
/// can sit behind the worker interface. A GRU encoder folds the past
/// features; a GRU cell decodes one constrained displacement per step.
class GruWorker final : public WorkerModel {
 public:
  GruWorker(WorkerConfig cfg, std::mt19937_64& rng) : cfg_(cfg) {
    cfg_.kind = "gru";
    cfg_.validate();
    const int in = 4 * cfg_.num_units;
    const int d = cfg_.d_model;
    enc_ = GruParams(params_, "enc", in, d, rng);
    dec_ = GruParams(params_, "dec", 2, d, rng);
    head_ = nn::Linear(params_, "head", d, 2, rng);
  }

  const WorkerConfig& config() const override { return cfg_; }
  std::string kind() const override { return "gru"; }
  nn::ParamStore& params() override { return params_; }
  const nn::ParamStore& params() const override { return params_; }

  nn::Var forward_teacher(nn::Tape& t, const std::vector<nn::Var>& p,
                          const Mat& tx, const Mat& ty,
                          int target_unit) const override {
    check_tx(tx, target_unit);
    if (ty.rows() != cfg_.future_len || ty.cols() != 2)
      throw InvalidInputError("worker: TY must be LY x 2");
    const Eigen::Vector2d start =
        tx.row(tx.rows() - 1).segment<2>(2 * target_unit);
    nn::Var h = encode(t, p, tx);
    std::vector<nn::Var> raws;
    for (int i = 0; i < cfg_.future_len; ++i) {
      Mat in_row = i == 0 ? Mat(Mat::Zero(1, 2))
                          : Mat(ty.row(i - 1) - start.transpose());
      h = cell(t, p, dec_, nn::make_leaf(t, in_row), h);
      raws.push_back(head_(t, p, h));
    }
    nn::Var raw = raws.size() == 1 ? raws[0] : nn::concat_rows(t, raws);
    return constrain_and_accumulate(t, raw, start, cfg_.max_step);
  }

  nn::Var forward_rollout(nn::Tape& t, const std::vector<nn::Var>& p,
                          const Mat& tx, int steps,
                          int target_unit) const override {
    check_tx(tx, target_unit);
    if (steps < 1) throw InvalidInputError("worker: steps must be >= 1");
    const Eigen::Vector2d start =
        tx.row(tx.rows() - 1).segment<2>(2 * target_unit);
    const Mat start_row = start.transpose();
    nn::Var h = encode(t, p, tx);
    nn::Var prev = nn::make_leaf(t, start_row);
    nn::Var offset = nn::make_leaf(t, Mat::Zero(1, 2));
    std::vector<nn::Var> locations;
    for (int i = 0; i < steps; ++i) {
      h = cell(t, p, dec_, offset, h);
      nn::Var raw = head_(t, p, h);
      nn::Var scale = nn::step_scale(nn::row_norms(raw), cfg_.max_step);
      nn::Var loc = nn::add(prev, nn::mul_colvec(raw, scale));
      locations.push_back(loc);
      prev = loc;
      offset = nn::add_const(loc, -start_row);
    }
    return locations.size() == 1 ? locations[0]
                                 : nn::concat_rows(t, locations);
  }

 private:
  struct GruParams {
    int wz = -1, uz = -1, bz = -1;
    int wr = -1, ur = -1, br = -1;
    int wh = -1, uh = -1, bh = -1;

    GruParams() = default;
    GruParams(nn::ParamStore& ps, const std::string& prefix, int in, int d,
              std::mt19937_64& rng) {
      auto mat = [&](const std::string& name, int r, int c) {
        const int idx = ps.add(prefix + "." + name, r, c);
        nn::init_xavier(ps.value(idx), rng);
        return idx;
      };
      wz = mat("wz", in, d);
      uz = mat("uz", d, d);
      bz = ps.add(prefix + ".bz", 1, d);
      wr = mat("wr", in, d);
      ur = mat("ur", d, d);
      br = ps.add(prefix + ".br", 1, d);
      wh = mat("wh", in, d);
      uh = mat("uh", d, d);
      bh = ps.add(prefix + ".bh", 1, d);
    }
  };

  static nn::Var cell(nn::Tape& t, const std::vector<nn::Var>& p,
                      const GruParams& g, nn::Var x, nn::Var h) {
    nn::Var z = nn::sigmoid(nn::add_rowvec(
        nn::add(nn::matmul(x, p[g.wz]), nn::matmul(h, p[g.uz])), p[g.bz]));
    nn::Var r = nn::sigmoid(nn::add_rowvec(
        nn::add(nn::matmul(x, p[g.wr]), nn::matmul(h, p[g.ur])), p[g.br]));
    nn::Var hh = nn::tanh_v(nn::add_rowvec(
        nn::add(nn::matmul(x, p[g.wh]),
                nn::matmul(nn::hadamard(r, h), p[g.uh])),
        p[g.bh]));
    // h' = (1 - z) * h + z * hh
    return nn::add(nn::sub(h, nn::hadamard(z, h)), nn::hadamard(z, hh));
  }

  nn::Var encode(nn::Tape& t, const std::vector<nn::Var>& p,
                 const Mat& tx) const {
    const Mat features = worker_input_features(tx);
    nn::Var h = nn::make_leaf(t, Mat::Zero(1, cfg_.d_model));
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
      nn::Var x = nn::make_leaf(t, Mat(features.row(r)));
      h = cell(t, p, enc_, x, h);
    }
    return h;
  }

  WorkerConfig cfg_;
  nn::ParamStore params_;
  GruParams enc_, dec_;
  nn::Linear head_;
};

inline std::unique_ptr<WorkerModel> make_worker(const WorkerConfig& cfg,
                                                std::mt19937_64& rng) {
  cfg.validate();
  if (cfg.kind == "gru") return std::make_unique<GruWorker>(cfg, rng);
  return std::make_unique<TransformerWorker>(cfg, rng);
}

/// Batch x K loss matrix: entry (j, i) is the configured per-sample loss of
/// worker i's rollout prediction on sample j.
inline PredictionLossReport per_worker_losses(
    const std::vector<std::unique_ptr<WorkerModel>>& workers,
    const std::vector<const DataSample*>& batch, LossKind kind) {
  if (batch.empty())
    throw InvalidInputError("per_worker_losses: empty batch");
  PredictionLossReport report;
  report.loss_kind = kind;
  report.per_sample.resize(static_cast<Eigen::Index>(batch.size()),
                           static_cast<Eigen::Index>(workers.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const DataSample* s = batch[j];
    for (std::size_t i = 0; i < workers.size(); ++i) {
      const Mat pred = workers[i]->predict(s->past, s->target_id);
      report.per_sample(static_cast<Eigen::Index>(j),
                        static_cast<Eigen::Index>(i)) =
          trajectory_loss(kind, s->target, pred);
    }
  }
  return report;
}

}  // namespace mw
