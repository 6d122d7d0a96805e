#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mw/encode.hpp"
#include "mw/types.hpp"

namespace mw {

/// One parametric motion rule. The past leg is always straight; the maneuver
/// (turn or weave) begins at the forecast boundary, so the pattern is
/// invisible in TX and identifiable only through the context.
struct PatternSpec {
  std::string kind = "straight";  // straight | arc | zigzag
  double turn_rate = 0.0;         // rad per step, arc
  double zig_turn = 0.0;          // rad heading offset, zigzag
  int zig_half_period = 3;        // steps between zigzag flips

  void validate() const {
    if (kind != "straight" && kind != "arc" && kind != "zigzag")
      throw InvalidInputError("pattern: unknown kind '" + kind + "'");
    if (kind == "zigzag" && zig_half_period < 1)
      throw InvalidInputError("pattern: zig_half_period must be >= 1");
  }
};

inline std::vector<PatternSpec> make_default_patterns(int count) {
  std::vector<PatternSpec> base = {
      {"straight", 0.0, 0.0, 3},
      {"arc", 0.18, 0.0, 3},
      {"zigzag", 0.0, 0.8, 3},
      {"arc", -0.18, 0.0, 3},
      {"arc", 0.36, 0.0, 3},
      {"zigzag", 0.0, 1.2, 2},
      {"arc", -0.36, 0.0, 3},
  };
  std::vector<PatternSpec> out;
  for (int i = 0; i < count; ++i) {
    PatternSpec p = base[i % base.size()];
    if (i >= static_cast<int>(base.size()))
      p.turn_rate *= 1.0 + 0.5 * (i / static_cast<double>(base.size()));
    out.push_back(p);
  }
  return out;
}

/// Generator spec for the synthetic context-dependent trajectory corpus.
/// A latent regime value drawn per sample determines the motion pattern via
/// the context rule; the regime (plus distractor states) is what the models
/// observe as C.
///
/// Note on speeds: the step-constraint layer realizes lengths in
/// (MaxMS/2, MaxMS), so pattern speeds must stay inside that band to be
/// representable. MaxMS is derived from the generator's own speed cap.
struct SyntheticSpec {
  int num_patterns = 3;
  std::vector<PatternSpec> patterns;  // defaults when empty

  double speed_min = 0.7;
  double speed_max = 1.1;

  double heading_noise = 0.02;  // rad, per-step jitter on the past+future
  double context_noise = 0.0;   // jitter on the observed regime state
  double label_noise = 0.0;     // prob. the pattern id is resampled

  int num_samples = 1000;  // total; split 80/10/10
  int num_units = 1;
  int context_len = 5;
  int past_len = 30;
  int future_len = 10;
  double dt = 1.0;
  std::uint64_t seed = 1;

  /// MaxMS derived from the speed cap: the cap sits at 80% of the limit.
  double max_step() const { return speed_max / 0.8; }

  std::vector<PatternSpec> effective_patterns() const {
    auto p = patterns.empty() ? make_default_patterns(num_patterns) : patterns;
    if (static_cast<int>(p.size()) != num_patterns)
      throw InvalidInputError(
          "synthetic spec: patterns list does not match num_patterns");
    for (const auto& ps : p) ps.validate();
    return p;
  }

  void validate() const {
    if (num_patterns < 1)
      throw ConfigError("synthetic spec: needs at least one pattern");
    if (!(speed_min > 0.0) || !(speed_max >= speed_min))
      throw ConfigError("synthetic spec: bad speed range");
    if (num_samples < 10) throw ConfigError("synthetic spec: too few samples");
    if (num_units < 1 || context_len < 1 || past_len < 2 || future_len < 1)
      throw ConfigError("synthetic spec: bad window sizes");
    if (!(dt > 0.0)) throw ConfigError("synthetic spec: dt must be > 0");
    if (label_noise < 0.0 || label_noise > 1.0)
      throw ConfigError("synthetic spec: label_noise must be in [0, 1]");
    effective_patterns();
  }

  std::uint64_t content_hash() const;
};

/// Context schema used by the synthetic generator: one informative ranged
/// state plus two distractors covering the other normalization kinds.
inline std::shared_ptr<const ContextSpec> synthetic_schema() {
  auto schema = std::make_shared<ContextSpec>();
  DataStateSpec regime;
  regime.name = "regime";
  regime.kind = StateKind::kRanged;
  regime.min = 0.0;
  regime.max = 1.0;
  DataStateSpec gust;
  gust.name = "gust";
  gust.kind = StateKind::kUnlimited;
  gust.soft_max = 2.0;
  DataStateSpec flag;
  flag.name = "flag";
  flag.kind = StateKind::kBoolean;
  flag.categories = {"off", "on"};
  schema->states = {regime, gust, flag};
  return schema;
}

/// The synthetic context rule: pattern id from the observed regime value.
inline int synthetic_context_rule(double regime, int num_patterns) {
  const double r = std::min(std::max(regime, 0.0), 1.0);
  return std::min(num_patterns - 1, static_cast<int>(r * num_patterns));
}

/// An 80/10/10 split of data samples plus the provenance needed to
/// reproduce it.
struct CorpusSplit {
  std::vector<DataSample> train, val, test;
  std::shared_ptr<const ContextSpec> schema;
  std::uint64_t seed = 0;
  std::uint64_t spec_hash = 0;
  double max_step = 1.0;
  long long skipped_rows = 0;

  std::size_t total() const {
    return train.size() + val.size() + test.size();
  }

  void validate() const {
    const double n = static_cast<double>(total());
    if (n < 1) throw DataError("corpus is empty");
    if (std::abs(train.size() - 0.8 * n) > 1.0 + 0.5 ||
        std::abs(val.size() - 0.1 * n) > 1.0 + 0.5 ||
        std::abs(test.size() - 0.1 * n) > 1.0 + 0.5)
      throw DataError("corpus split is not 80/10/10 within rounding");
  }
};

namespace detail {

inline void split_80_10_10(std::vector<DataSample>&& samples,
                           CorpusSplit& out) {
  const std::size_t n = samples.size();
  const std::size_t n_val = static_cast<std::size_t>(std::lround(0.1 * n));
  const std::size_t n_test = static_cast<std::size_t>(std::lround(0.1 * n));
  const std::size_t n_train = n - n_val - n_test;
  out.train.assign(std::make_move_iterator(samples.begin()),
                   std::make_move_iterator(samples.begin() + n_train));
  out.val.assign(std::make_move_iterator(samples.begin() + n_train),
                 std::make_move_iterator(samples.begin() + n_train + n_val));
  out.test.assign(std::make_move_iterator(samples.begin() + n_train + n_val),
                  std::make_move_iterator(samples.end()));
}

}  // namespace detail

inline std::uint64_t SyntheticSpec::content_hash() const {
  nlohmann::json j;
  j["num_patterns"] = num_patterns;
  j["speed"] = {speed_min, speed_max};
  j["noise"] = {heading_noise, context_noise, label_noise};
  j["sizes"] = {num_samples, num_units, context_len, past_len, future_len};
  j["dt"] = dt;
  for (const auto& p : effective_patterns())
    j["patterns"].push_back({p.kind, p.turn_rate, p.zig_turn,
                             static_cast<double>(p.zig_half_period)});
  return fnv1a_str(j.dump());
}

/// Generates the synthetic corpus. Each sample: draw a latent regime, apply
/// the context rule (optionally label-noised) to pick the pattern, simulate
/// the full trajectory, and cut it into TX and TY. Deterministic given
/// (spec.seed, round_seed).
inline CorpusSplit generate_synthetic(const SyntheticSpec& spec,
                                      std::uint64_t round_seed = 0) {
  spec.validate();
  if (!(spec.speed_max <= spec.max_step()))
    throw ConfigError("synthetic spec: speed cap exceeds MaxMS");
  const auto patterns = spec.effective_patterns();
  std::mt19937_64 rng(mix_seed(spec.seed, round_seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> speed(spec.speed_min, spec.speed_max);
  std::uniform_real_distribution<double> box(-20.0, 20.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto schema = synthetic_schema();
  const int total_len = spec.past_len + spec.future_len;

  std::vector<DataSample> samples;
  samples.reserve(spec.num_samples);
  for (int n = 0; n < spec.num_samples; ++n) {
    const double regime = unit(rng);
    int pattern = synthetic_context_rule(regime, spec.num_patterns);
    if (spec.label_noise > 0.0 && unit(rng) < spec.label_noise)
      pattern = static_cast<int>(rng() % spec.num_patterns);
    const PatternSpec& ps = patterns[pattern];

    const double base_heading = angle(rng);
    const double s = speed(rng);

    auto roll_unit = [&](const PatternSpec* maneuver) {
      Mat points(total_len, 2);
      points(0, 0) = box(rng);
      points(0, 1) = box(rng);
      const double theta0 = maneuver ? base_heading : angle(rng);
      const double sp = maneuver ? s : speed(rng);
      for (int t = 1; t < total_len; ++t) {
        double heading = theta0;
        if (maneuver && t >= spec.past_len) {
          const int k = t - spec.past_len;  // 0-based forecast step index
          if (maneuver->kind == "arc") {
            heading += maneuver->turn_rate * (k + 1);
          } else if (maneuver->kind == "zigzag") {
            const int phase = k / maneuver->zig_half_period;
            heading += (phase % 2 == 0 ? 1.0 : -1.0) * maneuver->zig_turn;
          }
        }
        heading += spec.heading_noise * gauss(rng);
        points(t, 0) = points(t - 1, 0) + sp * std::cos(heading);
        points(t, 1) = points(t - 1, 1) + sp * std::sin(heading);
      }
      return points;
    };

    const Mat target_path = roll_unit(&ps);

    DataSample sample;
    sample.past.resize(spec.past_len, 2 * spec.num_units);
    sample.past.leftCols(2) = target_path.topRows(spec.past_len);
    for (int u = 1; u < spec.num_units; ++u)
      sample.past.middleCols(2 * u, 2) =
          roll_unit(nullptr).topRows(spec.past_len);
    sample.target = target_path.bottomRows(spec.future_len);
    sample.target_id = 0;
    sample.pattern_id = pattern;

    sample.context.schema = schema;
    sample.context.frames.resize(spec.context_len, schema->num_states());
    for (int f = 0; f < spec.context_len; ++f) {
      double observed = regime;
      if (spec.context_noise > 0.0)
        observed = std::min(
            1.0, std::max(0.0, regime + spec.context_noise * gauss(rng)));
      sample.context.frames(f, 0) = observed;
      sample.context.frames(f, 1) = std::abs(gauss(rng));
      sample.context.frames(f, 2) = static_cast<double>(rng() % 2);
    }
    sample.validate();
    samples.push_back(std::move(sample));
  }

  CorpusSplit corpus;
  corpus.schema = schema;
  corpus.seed = mix_seed(spec.seed, round_seed);
  corpus.spec_hash = spec.content_hash();
  corpus.max_step = spec.max_step();
  detail::split_80_10_10(std::move(samples), corpus);
  corpus.validate();
  return corpus;
}

/// CSV ingestion: one row per timestep, columns = unit coordinate pairs
/// (<unit>_x, <unit>_y) followed by the context state columns named exactly
/// as in the schema file. Rows with missing/unparseable values are skipped
/// and counted.
struct CsvIngestSpec {
  std::vector<std::string> paths;
  std::string schema_path;
  int stride = 1;
  int context_len = 5;
  int past_len = 30;
  int future_len = 10;
  int target_unit = 0;
  double max_step = 1.0;
  AffineScaler scaler;  // optional affine coordinate map, identity by default
  std::uint64_t seed = 1;

  void validate() const {
    if (paths.empty()) throw ConfigError("csv ingest: no input paths");
    if (schema_path.empty()) throw ConfigError("csv ingest: no schema file");
    if (stride < 1) throw ConfigError("csv ingest: stride must be >= 1");
    if (context_len < 1 || past_len < 1 || future_len < 1)
      throw ConfigError("csv ingest: bad window lengths");
    if (!(max_step > 0.0)) throw ConfigError("csv ingest: MaxMS must be > 0");
  }

  std::uint64_t content_hash() const {
    nlohmann::json j;
    j["paths"] = paths;
    j["windows"] = {stride, context_len, past_len, future_len, target_unit};
    j["max_step"] = max_step;
    return fnv1a_str(j.dump());
  }
};

namespace detail {

struct CsvSeries {
  Mat coords;   // T x 2|U|
  Mat context;  // T x N raw values
  long long skipped = 0;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? ""
                                         : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline CsvSeries read_csv_series(const std::string& path,
                                 const ContextSpec& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty csv file: " + path);
  const auto header = split_csv_line(line);

  // coordinate columns: pairs named <unit>_x, <unit>_y, in order
  std::vector<std::pair<int, int>> unit_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (h.size() > 2 && h.substr(h.size() - 2) == "_x") {
      const std::string unit = h.substr(0, h.size() - 2);
      for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == unit + "_y") {
          unit_cols.push_back({static_cast<int>(i), static_cast<int>(j)});
          break;
        }
    }
  }
  if (unit_cols.empty())
    throw DataError("csv file has no <unit>_x/<unit>_y coordinate columns: " +
                    path);

  std::vector<int> state_cols;
  for (const auto& st : schema.states) {
    int col = -1;
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == st.name) col = static_cast<int>(j);
    if (col < 0)
      throw DataError("csv file is missing schema column '" + st.name +
                      "': " + path);
    state_cols.push_back(col);
  }

  CsvSeries series;
  std::vector<std::vector<double>> coord_rows, ctx_rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      ++series.skipped;
      continue;
    }
    bool ok = true;
    std::vector<double> coords(2 * unit_cols.size());
    auto parse_num = [&](const std::string& s, double& out_val) {
      if (s.empty() || s == "nan" || s == "NaN" || s == "NA") return false;
      try {
        std::size_t pos = 0;
        out_val = std::stod(s, &pos);
        return pos == s.size() && std::isfinite(out_val);
      } catch (...) {
        return false;
      }
    };
    for (std::size_t u = 0; u < unit_cols.size() && ok; ++u) {
      ok = parse_num(cells[unit_cols[u].first], coords[2 * u]) &&
           parse_num(cells[unit_cols[u].second], coords[2 * u + 1]);
    }
    std::vector<double> ctx(schema.num_states());
    for (int s = 0; s < schema.num_states() && ok; ++s) {
      const std::string& cell = cells[state_cols[s]];
      const auto& st = schema.states[s];
      double v = 0.0;
      if (parse_num(cell, v)) {
        ctx[s] = v;
      } else if (st.kind == StateKind::kBoolean ||
                 st.kind == StateKind::kEnumerated) {
        const int idx = st.category_index(cell);
        if (cell.empty() || (idx < 0 && st.kind == StateKind::kBoolean)) {
          ok = false;
        } else {
          // unseen enumerated categories take the reserved unknown index
          ctx[s] = idx < 0 ? st.category_count() : idx;
        }
      } else {
        ok = false;
      }
    }
    if (!ok) {
      ++series.skipped;
      continue;
    }
    coord_rows.push_back(std::move(coords));
    ctx_rows.push_back(std::move(ctx));
  }

  const auto t = static_cast<Eigen::Index>(coord_rows.size());
  series.coords.resize(t, static_cast<Eigen::Index>(2 * unit_cols.size()));
  series.context.resize(t, schema.num_states());
  for (Eigen::Index r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < coord_rows[r].size(); ++c)
      series.coords(r, static_cast<Eigen::Index>(c)) = coord_rows[r][c];
    for (int c = 0; c < schema.num_states(); ++c)
      series.context(r, c) = ctx_rows[r][c];
  }
  return series;
}

}  // namespace detail

/// Sliding-window extraction of (C, TX, TY) triples, then a contiguous-block
/// 80/10/10 split (time-ordered data leaks across random splits). The
/// round_seed rotates the window sequence before splitting so re-sampled
/// rounds see different validation/test membership.
inline CorpusSplit ingest_csv(const CsvIngestSpec& spec,
                              std::uint64_t round_seed = 0) {
  spec.validate();
  auto schema =
      std::make_shared<const ContextSpec>(load_schema_file(spec.schema_path));

  std::vector<DataSample> samples;
  long long skipped = 0;
  for (const auto& path : spec.paths) {
    auto series = detail::read_csv_series(path, *schema);
    skipped += series.skipped;
    if (!spec.scaler.is_identity()) spec.scaler.apply(series.coords);
    const Eigen::Index t_total = series.coords.rows();
    const int window = spec.past_len + spec.future_len;
    if (t_total < window) continue;
    const int num_units = static_cast<int>(series.coords.cols()) / 2;
    if (spec.target_unit < 0 || spec.target_unit >= num_units)
      throw ConfigError("csv ingest: target unit out of range");
    const int start_min = std::max(0, spec.context_len - spec.past_len);
    for (Eigen::Index w = start_min; w + window <= t_total;
         w += spec.stride) {
      DataSample s;
      s.past = series.coords.middleRows(w, spec.past_len);
      s.target = series.coords
                     .middleRows(w + spec.past_len, spec.future_len)
                     .middleCols(2 * spec.target_unit, 2);
      s.target_id = spec.target_unit;
      s.context.schema = schema;
      s.context.frames = series.context.middleRows(
          w + spec.past_len - spec.context_len, spec.context_len);
      s.validate();
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty())
    throw DataError("csv ingest produced no samples (series too short?)");

  if (round_seed != 0) {
    const std::size_t offset =
        static_cast<std::size_t>(mix_seed(spec.seed, round_seed) %
                                 samples.size());
    std::rotate(samples.begin(), samples.begin() + offset, samples.end());
  }

  CorpusSplit corpus;
  corpus.schema = schema;
  corpus.seed = mix_seed(spec.seed, round_seed);
  corpus.spec_hash = spec.content_hash();
  corpus.max_step = spec.max_step;
  corpus.skipped_rows = skipped;
  detail::split_80_10_10(std::move(samples), corpus);
  corpus.validate();
  return corpus;
}

/// A corpus source that can be re-materialized per evaluation round.
using CorpusSource = std::variant<SyntheticSpec, CsvIngestSpec>;

inline CorpusSplit materialize(const CorpusSource& source,
                               std::uint64_t round_seed = 0) {
  if (std::holds_alternative<SyntheticSpec>(source))
    return generate_synthetic(std::get<SyntheticSpec>(source), round_seed);
  return ingest_csv(std::get<CsvIngestSpec>(source), round_seed);
}

/// Fresh split under a round-specific seed (the re-sample step of the
/// 10-round protocol).
inline CorpusSplit resample(const CorpusSource& source,
                            std::uint64_t round_seed) {
  return materialize(source, round_seed);
}

// --------------------------------------------------------------------------
// Corpus archive: manifest + one JSONL file per split.
// --------------------------------------------------------------------------

namespace detail {

inline nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty())
    throw DataError("corpus archive: bad matrix");
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows[0].size());
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

inline void write_split(const std::filesystem::path& path,
                        const std::vector<DataSample>& samples) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write split file: " + path.string());
  for (const auto& s : samples) {
    nlohmann::json j;
    j["c"] = mat_to_json(s.context.frames);
    j["tx"] = mat_to_json(s.past);
    j["ty"] = mat_to_json(s.target);
    j["target_id"] = s.target_id;
    j["pattern_id"] = s.pattern_id;
    out << j.dump() << "\n";
  }
}

inline std::vector<DataSample> read_split(
    const std::filesystem::path& path,
    std::shared_ptr<const ContextSpec> schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file: " + path.string());
  std::vector<DataSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus archive: bad sample line: " +
                      std::string(e.what()));
    }
    DataSample s;
    s.context.schema = schema;
    s.context.frames = mat_from_json(j.at("c"));
    s.past = mat_from_json(j.at("tx"));
    s.target = mat_from_json(j.at("ty"));
    s.target_id = j.at("target_id").get<int>();
    s.pattern_id = j.at("pattern_id").get<int>();
    s.validate();
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace detail

inline void save_corpus(const std::string& dir, const CorpusSplit& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["seed"] = corpus.seed;
  manifest["spec_hash"] = corpus.spec_hash;
  manifest["max_step"] = corpus.max_step;
  manifest["skipped_rows"] = corpus.skipped_rows;
  manifest["counts"] = {{"train", corpus.train.size()},
                        {"val", corpus.val.size()},
                        {"test", corpus.test.size()}};
  manifest["schema"] = to_json(*corpus.schema);
  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("cannot write corpus manifest in " + dir);
  mf << manifest.dump(2) << "\n";
  mf.close();
  detail::write_split(fs::path(dir) / "train.jsonl", corpus.train);
  detail::write_split(fs::path(dir) / "val.jsonl", corpus.val);
  detail::write_split(fs::path(dir) / "test.jsonl", corpus.test);
}

inline CorpusSplit load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("cannot open corpus manifest in " + dir);
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corpus manifest is malformed: " + std::string(e.what()));
  }
  CorpusSplit corpus;
  corpus.schema = std::make_shared<const ContextSpec>(
      context_spec_from_json(manifest.at("schema")));
  corpus.seed = manifest.at("seed").get<std::uint64_t>();
  corpus.spec_hash = manifest.at("spec_hash").get<std::uint64_t>();
  corpus.max_step = manifest.at("max_step").get<double>();
  corpus.skipped_rows = manifest.at("skipped_rows").get<long long>();
  corpus.train =
      detail::read_split(fs::path(dir) / "train.jsonl", corpus.schema);
  corpus.val = detail::read_split(fs::path(dir) / "val.jsonl", corpus.schema);
  corpus.test =
      detail::read_split(fs::path(dir) / "test.jsonl", corpus.schema);
  corpus.validate();
  return corpus;
}

}  // namespace mw
