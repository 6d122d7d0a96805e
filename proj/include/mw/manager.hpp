#pragma once

#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mw/encode.hpp"
#include "mw/nn/layers.hpp"
#include "mw/types.hpp"

namespace mw {

struct ManagerConfig {
  int num_workers = 1;  // K
  int d_model = 32;
  int heads = 4;
  int blocks = 2;
  int ffn_mult = 4;

  void validate() const {
    if (num_workers < 1) throw InvalidInputError("manager: K must be >= 1");
    if (d_model < 1 || heads < 1 || blocks < 1 || ffn_mult < 1)
      throw InvalidInputError("manager: bad architecture sizes");
    if (d_model % heads != 0)
      throw InvalidInputError("manager: d_model must be divisible by heads");
  }
};

inline nlohmann::json to_json(const ManagerConfig& c) {
  return nlohmann::json{{"K", c.num_workers},
                        {"d_model", c.d_model},
                        {"heads", c.heads},
                        {"blocks", c.blocks},
                        {"ffn_mult", c.ffn_mult}};
}

inline ManagerConfig manager_config_from_json(const nlohmann::json& j) {
  ManagerConfig c;
  if (j.contains("K")) c.num_workers = j["K"].get<int>();
  if (j.contains("d_model")) c.d_model = j["d_model"].get<int>();
  if (j.contains("heads")) c.heads = j["heads"].get<int>();
  if (j.contains("blocks")) c.blocks = j["blocks"].get<int>();
  if (j.contains("ffn_mult")) c.ffn_mult = j["ffn_mult"].get<int>();
  c.validate();
  return c;
}

/// Per-layer, per-head attention weights of the manager encoder. Every row
/// is a distribution over context frame positions.
struct AttentionMaps {
  int layers = 0;
  int heads = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Mat> maps;  // layer-major, then head

  const Mat& at(int layer, int head) const {
    return maps[static_cast<std::size_t>(layer) * heads + head];
  }
};

/// Context classifier: positional-embedded attention encoder over the LC
/// context frames, global average pooling, and a softmax head over the K
/// workers. Owns the trainable embedding tables for large enumerated states,
/// which is the one model that consumes them.
class ManagerModel {
 public:
  ManagerModel(ManagerConfig cfg, std::shared_ptr<const ContextSpec> schema,
               std::mt19937_64& rng)
      : cfg_(cfg), schema_(std::move(schema)) {
    cfg_.validate();
    if (!schema_) throw InvalidInputError("manager: null schema");
    schema_->validate();
    const int width = schema_->encoded_width();
    input_proj_ = nn::Linear(params_, "input", width, cfg_.d_model, rng);
    blocks_.reserve(cfg_.blocks);
    for (int b = 0; b < cfg_.blocks; ++b)
      blocks_.emplace_back(params_, "enc" + std::to_string(b), cfg_.d_model,
                           cfg_.heads, cfg_.ffn_mult, rng);
    head_ = nn::Linear(params_, "head", cfg_.d_model, cfg_.num_workers, rng);
    for (int s = 0; s < schema_->num_states(); ++s) {
      const auto& st = schema_->states[s];
      if (!st.uses_trainable_embedding()) continue;
      const int idx = params_.add("embed." + st.name,
                                  st.category_count() + 1, st.embedding_len);
      std::normal_distribution<double> dist(0.0, 0.1);
      Mat& table = params_.value(idx);
      for (Eigen::Index i = 0; i < table.size(); ++i) table(i) = dist(rng);
      embeddings_.push_back({s, idx});
    }
  }

  const ManagerConfig& config() const { return cfg_; }
  const ContextSpec& schema() const { return *schema_; }
  std::shared_ptr<const ContextSpec> schema_ptr() const { return schema_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Differentiable forward pass: 1 x K probability row.
  nn::Var forward(nn::Tape& t, const std::vector<nn::Var>& p,
                  const ContextWindow& window,
                  std::vector<Mat>* attn_out = nullptr) const {
    nn::Var x = encode_window(t, p, window);
    x = input_proj_(t, p, x);
    x = nn::add_const(
        x, nn::sinusoidal_encoding(static_cast<int>(x.rows()), cfg_.d_model));
    for (const auto& b : blocks_) x = b(t, p, x, attn_out);
    nn::Var pooled = nn::mean_over_rows(x);
    return nn::softmax_rows(head_(t, p, pooled));
  }

  /// Probability vector over workers for one context window (no gradients).
  Vec predict_probs(const ContextWindow& window) const {
    nn::Tape t(false);
    auto leased = params_.lease(t);
    return forward(t, leased, window).val().row(0).transpose();
  }

  /// Argmax worker for a context; ties resolve to the lowest index.
  int select_worker(const ContextWindow& window) const {
    return argmax_lowest(predict_probs(window));
  }

  static int argmax_lowest(const Vec& probs) {
    int best = 0;
    for (int i = 1; i < probs.size(); ++i)
      if (probs(i) > probs(best)) best = i;
    return best;
  }

  /// Attention weights of every encoder layer and head for one context.
  AttentionMaps extract_attention(const ContextWindow& window) const {
    nn::Tape t(false);
    auto leased = params_.lease(t);
    std::vector<Mat> collected;
    forward(t, leased, window, &collected);
    AttentionMaps out;
    out.layers = cfg_.blocks;
    out.heads = cfg_.heads;
    out.rows = window.num_frames();
    out.cols = window.num_frames();
    out.maps = std::move(collected);
    return out;
  }

  /// Snapshot of the trainable embedding tables, in the shape expected by
  /// encode_context.
  EmbeddingSet embedding_snapshot() const {
    EmbeddingSet set;
    for (const auto& [state_idx, param_idx] : embeddings_) {
      EmbeddingTable table;
      table.rows = params_.value(param_idx);
      set.tables.emplace(schema_->states[state_idx].name, std::move(table));
    }
    return set;
  }

  /// Rejects windows that do not match the schema this manager was built on.
  void check_window(const ContextWindow& window) const {
    window.validate();
    if (window.schema->num_states() != schema_->num_states() ||
        window.schema->encoded_width() != schema_->encoded_width())
      throw InvalidInputError(
          "context window width does not match the trained schema");
  }

 private:
  /// Differentiable version of encode_context: static state columns are
  /// constants, trainable embedding rows are gathered from this model's
  /// parameter tables so they receive gradients.
  nn::Var encode_window(nn::Tape& t, const std::vector<nn::Var>& p,
                        const ContextWindow& window) const {
    check_window(window);
    if (embeddings_.empty())
      return nn::make_leaf(t, encode_context(window));

    const int lc = window.num_frames();
    std::vector<nn::Var> frame_rows;
    frame_rows.reserve(lc);
    for (int f = 0; f < lc; ++f) {
      std::vector<nn::Var> segments;
      Mat pending(1, 0);  // accumulates adjacent constant columns
      auto flush = [&]() {
        if (pending.cols() > 0) {
          segments.push_back(nn::make_leaf(t, pending));
          pending.resize(1, 0);
        }
      };
      std::size_t embed_cursor = 0;
      for (int s = 0; s < schema_->num_states(); ++s) {
        const auto& st = schema_->states[s];
        if (embed_cursor < embeddings_.size() &&
            embeddings_[embed_cursor].first == s) {
          flush();
          const int param_idx = embeddings_[embed_cursor].second;
          const int raw =
              static_cast<int>(std::lround(window.frames(f, s)));
          const int n = st.category_count();
          const int row = (raw < 0 || raw >= n) ? n : raw;
          segments.push_back(nn::gather_rows(p[param_idx], {row}));
          ++embed_cursor;
        } else {
          const Vec v = encode_state(window.frames(f, s), st, nullptr);
          const Eigen::Index c0 = pending.cols();
          pending.conservativeResize(1, c0 + v.size());
          pending.row(0).segment(c0, v.size()) = v.transpose();
        }
      }
      flush();
      frame_rows.push_back(segments.size() == 1 ? segments[0]
                                                : nn::concat_cols(t, segments));
    }
    return lc == 1 ? frame_rows[0] : nn::concat_rows(t, frame_rows);
  }

  ManagerConfig cfg_;
  std::shared_ptr<const ContextSpec> schema_;
  nn::ParamStore params_;
  nn::Linear input_proj_;
  std::vector<nn::EncoderBlock> blocks_;
  nn::Linear head_;
  std::vector<std::pair<int, int>> embeddings_;  // (state idx, param idx)
};

/// Attention export format: a dimensions header line, then one record per
/// (layer, head) with the weight rows.
inline void save_attention(const std::string& path,
                           const AttentionMaps& maps) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write attention file: " + path);
  out.precision(17);
  out << "layers " << maps.layers << " heads " << maps.heads << " rows "
      << maps.rows << " cols " << maps.cols << "\n";
  for (int l = 0; l < maps.layers; ++l)
    for (int h = 0; h < maps.heads; ++h) {
      out << "layer " << l << " head " << h << "\n";
      const Mat& m = maps.at(l, h);
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
          out << m(r, c) << (c + 1 == m.cols() ? "" : " ");
        out << "\n";
      }
    }
}

inline AttentionMaps load_attention(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open attention file: " + path);
  AttentionMaps maps;
  std::string word;
  if (!(in >> word >> maps.layers >> word >> maps.heads >> word >>
        maps.rows >> word >> maps.cols))
    throw DataError("malformed attention header in " + path);
  maps.maps.resize(static_cast<std::size_t>(maps.layers) * maps.heads);
  for (int i = 0; i < maps.layers * maps.heads; ++i) {
    int l = 0, h = 0;
    if (!(in >> word >> l >> word >> h))
      throw DataError("malformed attention record in " + path);
    Mat m(maps.rows, maps.cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!(in >> m(r, c)))
          throw DataError("truncated attention record in " + path);
    maps.maps[static_cast<std::size_t>(l) * maps.heads + h] = std::move(m);
  }
  return maps;
}

}  // namespace mw
