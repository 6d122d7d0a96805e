#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mw/nn/tensor.hpp"

namespace mw::nn {

/// Named parameter matrices of one model, with Adam moments. Parameters are
/// leased onto a tape once per training step; gradients are read back by
/// index after backward().
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat value;
    Mat m, v;  // Adam moments
  };

  int add(std::string name, int rows, int cols) {
    Entry e;
    e.name = std::move(name);
    e.value = Mat::Zero(rows, cols);
    e.m = Mat::Zero(rows, cols);
    e.v = Mat::Zero(rows, cols);
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  Mat& value(int i) { return entries_[i].value; }
  const Mat& value(int i) const { return entries_[i].value; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  /// Pushes every parameter onto the tape, in store order.
  std::vector<Var> lease(Tape& t) const {
    std::vector<Var> vars;
    vars.reserve(entries_.size());
    for (const auto& e : entries_) vars.push_back(make_leaf(t, e.value));
    return vars;
  }

  /// One Adam step from the gradients accumulated on the tape for the
  /// leased parameter handles.
  void adam_step(Tape& t, const std::vector<Var>& leased, double lr,
                 double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8) {
    ++adam_t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      Entry& e = entries_[i];
      const Mat g = t.grad_or_zero(leased[i].id);
      e.m = beta1 * e.m + (1.0 - beta1) * g;
      e.v = beta2 * e.v + (1.0 - beta2) * g.cwiseProduct(g);
      const Mat mhat = e.m / bc1;
      const Mat vhat = e.v / bc2;
      e.value -=
          lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
    }
  }

  long long adam_t() const { return adam_t_; }
  void set_adam_t(long long t) { adam_t_ = t; }

  /// Content hash over parameter values; used by the training engine to
  /// assert phase isolation (manager untouched in worker phases and vice
  /// versa).
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : entries_) {
      h = fnv1a(e.name.data(), e.name.size(), h);
      h = fnv1a(e.value.data(),
                static_cast<std::size_t>(e.value.size()) * sizeof(double), h);
    }
    return h;
  }

  /// Snapshot/restore of parameter values (Adam moments included), used for
  /// best-checkpoint restoration by early stopping.
  struct Snapshot {
    std::vector<Mat> values, m, v;
    long long adam_t = 0;
  };

  Snapshot snapshot() const {
    Snapshot s;
    s.adam_t = adam_t_;
    for (const auto& e : entries_) {
      s.values.push_back(e.value);
      s.m.push_back(e.m);
      s.v.push_back(e.v);
    }
    return s;
  }

  void restore(const Snapshot& s) {
    if (s.values.size() != entries_.size())
      throw InvalidInputError("ParamStore::restore: size mismatch");
    adam_t_ = s.adam_t;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      entries_[i].value = s.values[i];
      entries_[i].m = s.m[i];
      entries_[i].v = s.v[i];
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["adam_t"] = adam_t_;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& e : entries_) {
      nlohmann::json m;
      m["rows"] = e.value.rows();
      m["cols"] = e.value.cols();
      auto dump = [](const Mat& x) {
        std::vector<double> flat(x.data(), x.data() + x.size());
        return flat;
      };
      m["value"] = dump(e.value);
      m["adam_m"] = dump(e.m);
      m["adam_v"] = dump(e.v);
      params[e.name] = std::move(m);
    }
    j["params"] = std::move(params);
    return j;
  }

  void from_json(const nlohmann::json& j) {
    adam_t_ = j.at("adam_t").get<long long>();
    const auto& params = j.at("params");
    for (auto& e : entries_) {
      if (!params.contains(e.name))
        throw DataError("checkpoint missing parameter: " + e.name);
      const auto& m = params.at(e.name);
      const auto rows = m.at("rows").get<Eigen::Index>();
      const auto cols = m.at("cols").get<Eigen::Index>();
      if (rows != e.value.rows() || cols != e.value.cols())
        throw DataError("checkpoint shape mismatch for parameter: " + e.name);
      auto load = [&](const char* key, Mat& dst) {
        const auto flat = m.at(key).get<std::vector<double>>();
        if (static_cast<Eigen::Index>(flat.size()) != dst.size())
          throw DataError("checkpoint size mismatch for parameter: " + e.name);
        std::copy(flat.begin(), flat.end(), dst.data());
      };
      load("value", e.value);
      load("adam_m", e.m);
      load("adam_v", e.v);
    }
  }

 private:
  std::vector<Entry> entries_;
  long long adam_t_ = 0;
};

inline void init_xavier(Mat& w, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / (w.rows() + w.cols()));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = dist(rng);
}

/// Sinusoidal positional encoding matrix, len x d.
inline Mat sinusoidal_encoding(int len, int d) {
  Mat pe(len, d);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; ++i) {
      const double angle =
          pos / std::pow(10000.0, 2.0 * (i / 2) / static_cast<double>(d));
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

/// y = x W + b with W: in x out, b: 1 x out.
struct Linear {
  int w = -1, b = -1;

  Linear() = default;
  Linear(ParamStore& ps, const std::string& prefix, int in, int out,
         std::mt19937_64& rng, bool zero_init = false) {
    w = ps.add(prefix + ".w", in, out);
    b = ps.add(prefix + ".b", 1, out);
    if (!zero_init) init_xavier(ps.value(w), rng);
  }

  Var operator()(Tape& t, const std::vector<Var>& p, Var x) const {
    (void)t;
    return add_rowvec(matmul(x, p[w]), p[b]);
  }
};

struct LayerNorm {
  int gain = -1, bias = -1;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& prefix, int d) {
    gain = ps.add(prefix + ".gain", 1, d);
    bias = ps.add(prefix + ".bias", 1, d);
    ps.value(gain).setOnes();
  }

  Var operator()(Tape& t, const std::vector<Var>& p, Var x) const {
    (void)t;
    return layernorm_rows(x, p[gain], p[bias], eps);
  }
};

/// Multi-head scaled dot-product attention. When `attn_out` is non-null the
/// per-head softmax weights are appended to it (rows are distributions over
/// key positions).
struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  int d_model = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& prefix, int d,
                     int num_heads, std::mt19937_64& rng)
      : q(ps, prefix + ".q", d, d, rng),
        k(ps, prefix + ".k", d, d, rng),
        v(ps, prefix + ".v", d, d, rng),
        o(ps, prefix + ".o", d, d, rng),
        heads(num_heads),
        d_model(d) {
    if (d % num_heads != 0)
      throw InvalidInputError("attention: d_model must be divisible by heads");
  }

  Var operator()(Tape& t, const std::vector<Var>& p, Var x_q, Var x_kv,
                 bool causal = false,
                 std::vector<Mat>* attn_out = nullptr) const {
    const int dh = d_model / heads;
    Var qs = q(t, p, x_q);
    Var ks = k(t, p, x_kv);
    Var vs = v(t, p, x_kv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat mask;
    if (causal) {
      const Eigen::Index n = x_q.rows(), m = x_kv.rows();
      mask = Mat::Zero(n, m);
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = r + 1; c < m; ++c) mask(r, c) = -1e30;
    }
    std::vector<Var> head_outs;
    head_outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Var qh = slice_cols(qs, h * dh, dh);
      Var kh = slice_cols(ks, h * dh, dh);
      Var vh = slice_cols(vs, h * dh, dh);
      Var scores = affine(matmul_nt(qh, kh), scale, 0.0);
      if (causal) scores = add_const(scores, mask);
      Var attn = softmax_rows(scores);
      if (attn_out) attn_out->push_back(attn.val());
      head_outs.push_back(matmul(attn, vh));
    }
    Var merged = concat_cols(t, head_outs);
    return o(t, p, merged);
  }
};

/// Post-norm transformer encoder block: x = LN(x + Att(x)); x = LN(x + FF(x)).
struct EncoderBlock {
  MultiHeadAttention att;
  LayerNorm ln1, ln2;
  Linear ff1, ff2;

  EncoderBlock() = default;
  EncoderBlock(ParamStore& ps, const std::string& prefix, int d, int heads,
               int ffn_mult, std::mt19937_64& rng)
      : att(ps, prefix + ".att", d, heads, rng),
        ln1(ps, prefix + ".ln1", d),
        ln2(ps, prefix + ".ln2", d),
        ff1(ps, prefix + ".ff1", d, d * ffn_mult, rng),
        ff2(ps, prefix + ".ff2", d * ffn_mult, d, rng) {}

  Var operator()(Tape& t, const std::vector<Var>& p, Var x,
                 std::vector<Mat>* attn_out = nullptr) const {
    Var a = att(t, p, x, x, /*causal=*/false, attn_out);
    x = ln1(t, p, add(x, a));
    Var f = ff2(t, p, gelu(ff1(t, p, x)));
    return ln2(t, p, add(x, f));
  }
};

/// Post-norm transformer decoder block with causal self-attention and
/// cross-attention over the encoder memory.
struct DecoderBlock {
  MultiHeadAttention self_att, cross_att;
  LayerNorm ln1, ln2, ln3;
  Linear ff1, ff2;

  DecoderBlock() = default;
  DecoderBlock(ParamStore& ps, const std::string& prefix, int d, int heads,
               int ffn_mult, std::mt19937_64& rng)
      : self_att(ps, prefix + ".self", d, heads, rng),
        cross_att(ps, prefix + ".cross", d, heads, rng),
        ln1(ps, prefix + ".ln1", d),
        ln2(ps, prefix + ".ln2", d),
        ln3(ps, prefix + ".ln3", d),
        ff1(ps, prefix + ".ff1", d, d * ffn_mult, rng),
        ff2(ps, prefix + ".ff2", d * ffn_mult, d, rng) {}

  Var operator()(Tape& t, const std::vector<Var>& p, Var x, Var memory) const {
    Var a = self_att(t, p, x, x, /*causal=*/true);
    x = ln1(t, p, add(x, a));
    Var c = cross_att(t, p, x, memory, /*causal=*/false);
    x = ln2(t, p, add(x, c));
    Var f = ff2(t, p, gelu(ff1(t, p, x)));
    return ln3(t, p, add(x, f));
  }
};

}  // namespace mw::nn
