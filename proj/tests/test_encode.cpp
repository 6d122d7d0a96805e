#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mw/encode.hpp"

using namespace mw;

namespace {

DataStateSpec ranged_spec(double lo, double hi) {
  DataStateSpec s;
  s.name = "building_health";
  s.kind = StateKind::kRanged;
  s.min = lo;
  s.max = hi;
  return s;
}

DataStateSpec unlimited_spec(double soft_max) {
  DataStateSpec s;
  s.name = "respawn_time";
  s.kind = StateKind::kUnlimited;
  s.soft_max = soft_max;
  return s;
}

DataStateSpec boolean_spec() {
  DataStateSpec s;
  s.name = "circadian";
  s.kind = StateKind::kBoolean;
  s.categories = {"daytime", "nighttime"};
  return s;
}

DataStateSpec enumerated_spec(int count, int embedding_len) {
  DataStateSpec s;
  s.name = "pick";
  s.kind = StateKind::kEnumerated;
  for (int i = 0; i < count; ++i) s.categories.push_back("cat" + std::to_string(i));
  s.embedding_len = embedding_len;
  return s;
}

}  // namespace

TEST_CASE("ranged normalization is a clamped linear projection") {
  const auto spec = ranged_spec(0.0, 3000.0);
  CHECK(normalize_ranged(1500.0, spec) == Catch::Approx(0.5));
  CHECK(normalize_ranged(0.0, spec) == Catch::Approx(0.0));
  CHECK(normalize_ranged(2250.0, spec) == Catch::Approx(0.75));
  CHECK(normalize_ranged(3000.0, spec) == Catch::Approx(1.0));
  // out-of-range input clamps instead of leaving [0, 1]
  CHECK(normalize_ranged(-50.0, spec) == Catch::Approx(0.0));
  CHECK(normalize_ranged(1e9, spec) == Catch::Approx(1.0));
  CHECK_THROWS_AS(normalize_ranged(std::nan(""), spec), InvalidInputError);
}

TEST_CASE("ranged normalization is monotone non-decreasing") {
  const auto spec = ranged_spec(-7.0, 13.0);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-20.0, 26.0);
  for (int i = 0; i < 300; ++i) {
    double a = dist(rng), b = dist(rng);
    if (a > b) std::swap(a, b);
    CHECK(normalize_ranged(a, spec) <= normalize_ranged(b, spec));
  }
}

TEST_CASE("unlimited normalization is tanh against the soft maximum") {
  const auto spec = unlimited_spec(60.0);
  CHECK(normalize_unlimited(0.0, spec) == Catch::Approx(0.0));
  CHECK(normalize_unlimited(60.0, spec) ==
        Catch::Approx(0.7615941559557649).epsilon(1e-9));
  CHECK(std::abs(normalize_unlimited(600.0, spec) - 1.0) < 1e-8);
  CHECK_THROWS_AS(normalize_unlimited(-1.0, spec), InvalidInputError);
}

TEST_CASE("unlimited normalization is strictly increasing") {
  const auto spec = unlimited_spec(3.0);
  double prev = -1.0;
  for (double v = 0.0; v < 20.0; v += 0.37) {
    const double y = normalize_unlimited(v, spec);
    CHECK(y > prev);
    CHECK(y >= 0.0);
    CHECK(y < 1.0);
    prev = y;
  }
}

TEST_CASE("boolean normalization follows schema order") {
  const auto spec = boolean_spec();
  CHECK(normalize_boolean(std::string("daytime"), spec) == 0.0);
  CHECK(normalize_boolean(std::string("nighttime"), spec) == 1.0);
  CHECK(normalize_boolean(std::string("daytime"), spec) ==
        normalize_boolean(std::string("daytime"), spec));
  CHECK_THROWS_AS(normalize_boolean(std::string("dusk"), spec),
                  InvalidInputError);
  CHECK_THROWS_AS(normalize_boolean(2, spec), InvalidInputError);
}

TEST_CASE("small enumerated sets are one-hot encoded") {
  const auto spec = enumerated_spec(3, 3);
  const Vec v = encode_enumerated(1, spec);
  REQUIRE(v.size() == 3);
  CHECK(v(0) == 0.0);
  CHECK(v(1) == 1.0);
  CHECK(v(2) == 0.0);

  // distinct categories give distinct vectors
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      CHECK(encode_enumerated(a, spec) != encode_enumerated(b, spec));
}

TEST_CASE("large enumerated sets use trainable embedding rows") {
  const auto spec = enumerated_spec(12, 5);
  spec.validate();
  std::mt19937_64 rng(3);
  const auto table = EmbeddingTable::make(spec, rng);
  const Vec v = encode_enumerated(4, spec, &table);
  REQUIRE(v.size() == 5);
  CHECK(v == table.rows.row(4).transpose());
  CHECK_THROWS_AS(encode_enumerated(4, spec, nullptr), InvalidInputError);
}

TEST_CASE("unknown categories map to the reserved row or raise") {
  const auto small = enumerated_spec(3, 3);
  CHECK(encode_enumerated(7, small).isZero());
  CHECK_THROWS_AS(
      encode_enumerated(7, small, nullptr, UnknownCategoryPolicy::kError),
      InvalidInputError);

  const auto big = enumerated_spec(12, 5);
  std::mt19937_64 rng(3);
  const auto table = EmbeddingTable::make(big, rng);
  CHECK(encode_enumerated(-1, big, &table) ==
        table.rows.row(12).transpose());
}

TEST_CASE("data state spec invariants are enforced") {
  CHECK_THROWS_AS(ranged_spec(5.0, 5.0).validate(), InvalidInputError);
  CHECK_THROWS_AS(unlimited_spec(0.0).validate(), InvalidInputError);
  auto bad_onehot = enumerated_spec(3, 2);  // LE must equal count below 10
  CHECK_THROWS_AS(bad_onehot.validate(), InvalidInputError);
  auto bad_embed = enumerated_spec(12, 12);  // needs 1 < LE < count
  CHECK_THROWS_AS(bad_embed.validate(), InvalidInputError);
  CHECK_NOTHROW(enumerated_spec(12, 5).validate());
}

namespace {

std::shared_ptr<ContextSpec> two_state_schema() {
  auto schema = std::make_shared<ContextSpec>();
  schema->states = {ranged_spec(0.0, 10.0), unlimited_spec(2.0)};
  return schema;
}

}  // namespace

TEST_CASE("encode_context produces the LC x (N + sum(LE-1)) matrix") {
  auto schema = two_state_schema();
  ContextWindow w;
  w.schema = schema;
  w.frames.resize(5, 2);
  w.frames << 1, 0.5, 2, 1.0, 3, 1.5, 4, 2.0, 5, 2.5;
  const Mat enc = encode_context(w);
  REQUIRE(enc.rows() == 5);
  REQUIRE(enc.cols() == 2);
  CHECK(enc(0, 0) == Catch::Approx(0.1));
  CHECK(enc(0, 1) == Catch::Approx(std::tanh(0.25)));
  CHECK(enc.allFinite());
}

TEST_CASE("enumerated states widen encoded frames") {
  auto schema = std::make_shared<ContextSpec>();
  schema->states = {ranged_spec(0.0, 1.0), boolean_spec(),
                    enumerated_spec(4, 4)};
  REQUIRE(schema->encoded_width() == 3 + (4 - 1));

  ContextWindow w;
  w.schema = schema;
  w.frames.resize(2, 3);
  w.frames << 0.5, 0, 2, 0.25, 1, 0;
  const Mat enc = encode_context(w);
  REQUIRE(enc.cols() == 6);
  CHECK(enc(0, 2 + 2) == 1.0);  // one-hot slot for category 2
  CHECK(enc(1, 2 + 0) == 1.0);
}

TEST_CASE("encode_context rejects schema mismatches and empty windows") {
  auto schema = two_state_schema();
  ContextWindow w;
  w.schema = schema;
  w.frames.resize(0, 2);
  CHECK_THROWS_AS(encode_context(w), InvalidInputError);

  w.frames.resize(3, 1);  // wrong state count
  CHECK_THROWS_AS(encode_context(w), InvalidInputError);

  w.schema = nullptr;
  w.frames.resize(3, 2);
  CHECK_THROWS_AS(encode_context(w), InvalidInputError);
}

TEST_CASE("encoded width matches the shape contract over random schemas") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> nstates(1, 8);
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<int> small_count(2, 9);
  std::uniform_int_distribution<int> big_count(10, 20);

  for (int trial = 0; trial < 200; ++trial) {
    ContextSpec schema;
    int expected = 0;
    const int n = nstates(rng);
    for (int i = 0; i < n; ++i) {
      DataStateSpec s;
      s.name = "s" + std::to_string(i);
      switch (kind(rng)) {
        case 0:
          s.kind = StateKind::kRanged;
          s.min = 0;
          s.max = 1;
          expected += 1;
          break;
        case 1:
          s.kind = StateKind::kUnlimited;
          s.soft_max = 1.0;
          expected += 1;
          break;
        case 2:
          s.kind = StateKind::kBoolean;
          s.categories = {"a", "b"};
          expected += 1;
          break;
        default: {
          s.kind = StateKind::kEnumerated;
          const bool small = (trial % 2) == 0;
          const int count = small ? small_count(rng) : big_count(rng);
          for (int c = 0; c < count; ++c)
            s.categories.push_back("c" + std::to_string(c));
          s.embedding_len =
              small ? count
                    : std::uniform_int_distribution<int>(2, count - 1)(rng);
          expected += s.embedding_len;
          break;
        }
      }
      schema.states.push_back(std::move(s));
    }
    schema.validate();
    CHECK(schema.encoded_width() == expected);

    // encode a random valid window and confirm the realized shape + finiteness
    auto shared = std::make_shared<ContextSpec>(schema);
    std::mt19937_64 erng(7);
    EmbeddingSet embeddings = EmbeddingSet::make(*shared, erng);
    ContextWindow w;
    w.schema = shared;
    const int lc = 1 + static_cast<int>(trial % 4);
    w.frames.resize(lc, shared->num_states());
    for (int f = 0; f < lc; ++f)
      for (int s = 0; s < shared->num_states(); ++s) {
        const auto& st = shared->states[s];
        switch (st.kind) {
          case StateKind::kRanged:
            w.frames(f, s) =
                std::uniform_real_distribution<double>(0, 1)(rng);
            break;
          case StateKind::kUnlimited:
            w.frames(f, s) =
                std::uniform_real_distribution<double>(0, 5)(rng);
            break;
          case StateKind::kBoolean:
            w.frames(f, s) = rng() % 2;
            break;
          case StateKind::kEnumerated:
            w.frames(f, s) =
                static_cast<double>(rng() % st.category_count());
            break;
        }
      }
    const Mat enc = encode_context(w, &embeddings);
    CHECK(enc.rows() == lc);
    CHECK(enc.cols() == expected);
    CHECK(enc.allFinite());
  }
}

TEST_CASE("schema files round-trip with the documented field names") {
  ContextSpec schema;
  schema.states = {ranged_spec(0.0, 3000.0), unlimited_spec(60.0),
                   boolean_spec(), enumerated_spec(12, 5)};
  const auto j = to_json(schema);
  CHECK(j["states"][0].contains("min"));
  CHECK(j["states"][0].contains("max"));
  CHECK(j["states"][1].contains("soft_max"));
  CHECK(j["states"][3].contains("categories"));
  CHECK(j["states"][3].contains("embedding_len"));
  const ContextSpec back = context_spec_from_json(j);
  REQUIRE(back.num_states() == 4);
  CHECK(back.states[0].max == 3000.0);
  CHECK(back.states[1].soft_max == 60.0);
  CHECK(back.states[3].embedding_len == 5);
  CHECK(back.encoded_width() == schema.encoded_width());
}
