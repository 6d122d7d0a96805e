#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "mw/target.hpp"

using namespace mw;

namespace {

Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// hand-chained softmax on std:: math only
std::vector<double> softmax_bruteforce(const std::vector<double>& logits) {
  double m = logits[0];
  for (double x : logits) m = std::max(m, x);
  std::vector<double> e;
  double sum = 0.0;
  for (double x : logits) {
    e.push_back(std::exp(x - m));
    sum += e.back();
  }
  for (double& x : e) x /= sum;
  return e;
}

void check_is_distribution(const Vec& p, double tol = 1e-9) {
  CHECK(p.allFinite());
  CHECK((p.array() >= 0.0).all());
  CHECK(std::abs(p.sum() - 1.0) < tol);
}

// Greedy earth-mover on the line: push surplus mass to the next bin,
// accumulating |carried mass| as cost. Independent route to W1.
double wasserstein_bruteforce(const Vec& a, const Vec& b) {
  double carry = 0.0, cost = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    carry += a(i) - b(i);
    cost += std::abs(carry);
  }
  return cost;
}

}  // namespace

TEST_CASE("simple target matches the loss-ratio softmax") {
  const auto t = target_distribution_simple(make_vec({1.0, 2.0}));
  t.validate();
  const auto expect = softmax_bruteforce({2.0, 1.0});
  CHECK(t.probs(0) == Catch::Approx(expect[0]).epsilon(1e-12));
  CHECK(t.probs(1) == Catch::Approx(expect[1]).epsilon(1e-12));
  CHECK(t.probs(0) == Catch::Approx(0.73106).margin(1e-5));
  CHECK(t.probs(1) == Catch::Approx(0.26894).margin(1e-5));
}

TEST_CASE("simple target gives uniform for equal losses") {
  const auto t = target_distribution_simple(make_vec({3.0, 3.0, 3.0, 3.0}));
  for (int i = 0; i < 4; ++i) CHECK(t.probs(i) == Catch::Approx(0.25));
}

TEST_CASE("simple target three-worker worked example") {
  const auto t = target_distribution_simple(make_vec({1.0, 1.0, 2.0}));
  const auto expect = softmax_bruteforce({2.0, 2.0, 1.0});
  for (int i = 0; i < 3; ++i)
    CHECK(t.probs(i) == Catch::Approx(expect[i]).epsilon(1e-12));
  CHECK(t.probs(0) == Catch::Approx(0.42232).margin(1e-5));
  CHECK(t.probs(2) == Catch::Approx(0.15536).margin(1e-5));
}

TEST_CASE("simple target is invariant to loss rescaling") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> dist(0.1, 9.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec losses(5);
    for (int i = 0; i < 5; ++i) losses(i) = dist(rng);
    const double c = dist(rng);
    const auto a = target_distribution_simple(losses);
    const auto b = target_distribution_simple(c * losses);
    CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("regularized target matches the hand-chained oracle") {
  const auto t = target_distribution_regularized(make_vec({1.0, 2.0}),
                                                 make_vec({10.0, 0.0}), 0.5);
  t.validate();
  // MaxL = 2, MaxV = 10
  const double l0 = std::exp(-1.0 / 2.0) + 0.5 * (10.0 - 10.0) / 10.0;
  const double l1 = std::exp(-2.0 / 2.0) + 0.5 * (10.0 - 0.0) / 10.0;
  const auto expect = softmax_bruteforce({l0, l1});
  CHECK(t.probs(0) == Catch::Approx(expect[0]).epsilon(1e-12));
  CHECK(t.probs(1) == Catch::Approx(expect[1]).epsilon(1e-12));
  CHECK(t.probs(0) == Catch::Approx(0.43503).margin(1e-5));
  CHECK(t.probs(1) == Catch::Approx(0.56497).margin(1e-5));
}

TEST_CASE("regularized target with beta 0 ranks by loss") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(0.05, 4.0);
  for (int trial = 0; trial < 50; ++trial) {
    Vec losses(6), volumes(6);
    for (int i = 0; i < 6; ++i) {
      losses(i) = dist(rng);
      volumes(i) = std::floor(dist(rng) * 10);
    }
    const auto t = target_distribution_regularized(losses, volumes, 0.0);
    int argmax = 0, argmin = 0;
    t.probs.maxCoeff(&argmax);
    losses.minCoeff(&argmin);
    CHECK(argmax == argmin);

    // beta = 0 equals Softmax(e^{-L/MaxL})
    std::vector<double> logits;
    for (int i = 0; i < 6; ++i)
      logits.push_back(std::exp(-losses(i) / losses.maxCoeff()));
    const auto expect = softmax_bruteforce(logits);
    for (int i = 0; i < 6; ++i)
      CHECK(t.probs(i) == Catch::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("regularized target degenerate volume rule") {
  // with MaxV = 0 the regularizer is 1 for every worker
  const Vec losses = make_vec({1.0, 3.0});
  const auto t =
      target_distribution_regularized(losses, make_vec({0.0, 0.0}), 0.7);
  const auto expect = softmax_bruteforce(
      {std::exp(-1.0 / 3.0) + 0.7, std::exp(-1.0) + 0.7});
  CHECK(t.probs(0) == Catch::Approx(expect[0]).epsilon(1e-12));
  CHECK(t.probs(1) == Catch::Approx(expect[1]).epsilon(1e-12));
}

TEST_CASE("regularized target uniform under full symmetry") {
  const auto t = target_distribution_regularized(
      make_vec({2.0, 2.0, 2.0}), make_vec({5.0, 5.0, 5.0}), 1.0);
  for (int i = 0; i < 3; ++i)
    CHECK(t.probs(i) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("regularized target rejects negative beta") {
  CHECK_THROWS_AS(target_distribution_regularized(make_vec({1.0, 2.0}),
                                                  make_vec({1.0, 1.0}), -0.1),
                  InvalidInputError);
}

TEST_CASE("regularized target monotonicity") {
  const Vec losses = make_vec({1.0, 2.0, 3.0});
  const Vec volumes = make_vec({4.0, 9.0, 2.0});
  const double beta = 0.8;
  const auto base = target_distribution_regularized(losses, volumes, beta);

  Vec better_loss = losses;
  better_loss(1) = 1.2;  // decrease L_1
  const auto t1 = target_distribution_regularized(better_loss, volumes, beta);
  CHECK(t1.probs(1) >= base.probs(1));

  Vec less_volume = volumes;
  less_volume(1) = 3.0;  // decrease V_1
  const auto t2 = target_distribution_regularized(losses, less_volume, beta);
  CHECK(t2.probs(1) >= base.probs(1));
}

TEST_CASE("unnormalized target reduces to the simple rule at beta 0") {
  const Vec losses = make_vec({0.4, 1.7, 0.9});
  const Vec volumes = make_vec({10.0, 3.0, 0.0});
  const auto a = target_distribution_unnormalized(losses, volumes, 0.0);
  const auto b = target_distribution_simple(losses);
  CHECK((a.probs - b.probs).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("unnormalized target lets the loss term dominate") {
  const auto t = target_distribution_unnormalized(make_vec({1.0, 10.0}),
                                                  make_vec({100.0, 0.0}), 1.0);
  const auto expect = softmax_bruteforce({10.0, 2.0});
  CHECK(t.probs(0) == Catch::Approx(expect[0]).epsilon(1e-12));
  CHECK(t.probs(1) == Catch::Approx(expect[1]).epsilon(1e-12));
  CHECK(t.probs(0) == Catch::Approx(0.99966).margin(1e-5));
  CHECK(t.probs(1) == Catch::Approx(0.00034).margin(1e-5));

  const auto u = target_distribution_unnormalized(
      make_vec({2.0, 2.0}), make_vec({7.0, 7.0}), 0.3);
  CHECK(u.probs(0) == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("all target rules emit valid distributions on random draws") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> loss_dist(1e-6, 50.0);
  std::uniform_real_distribution<double> beta_dist(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 8);
    Vec losses(k), volumes(k);
    for (int i = 0; i < k; ++i) {
      losses(i) = loss_dist(rng);
      volumes(i) = static_cast<double>(rng() % 100);
    }
    const double beta = beta_dist(rng);
    check_is_distribution(target_distribution_simple(losses).probs);
    check_is_distribution(
        target_distribution_regularized(losses, volumes, beta).probs);
    check_is_distribution(
        target_distribution_unnormalized(losses, volumes, beta).probs);
  }
}

TEST_CASE("zero or negative losses are floored, not fatal") {
  const auto t = target_distribution_simple(make_vec({0.0, 1.0}));
  check_is_distribution(t.probs);
  CHECK(t.probs(0) > t.probs(1));  // perfect worker gets the mass
}

TEST_CASE("wasserstein loss matches CDF-difference oracles") {
  CHECK(wasserstein_loss(make_vec({0.2, 0.3, 0.5}),
                         make_vec({0.2, 0.3, 0.5})) == 0.0);
  CHECK(wasserstein_loss(make_vec({1.0, 0.0}), make_vec({0.0, 1.0})) ==
        Catch::Approx(1.0));
  CHECK(wasserstein_loss(make_vec({1.0, 0.0, 0.0}),
                         make_vec({0.0, 0.0, 1.0})) == Catch::Approx(2.0));
  CHECK_THROWS_AS(
      wasserstein_loss(make_vec({1.0, 0.0}), make_vec({1.0, 0.0, 0.0})),
      InvalidInputError);
}

TEST_CASE("wasserstein loss satisfies metric axioms on random triples") {
  std::mt19937_64 rng(13);
  auto random_dist = [&](int k) {
    Vec v(k);
    for (int i = 0; i < k; ++i)
      v(i) = -std::log(std::uniform_real_distribution<double>(1e-9, 1.0)(rng));
    return Vec(v / v.sum());
  };
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const Vec a = random_dist(k), b = random_dist(k), c = random_dist(k);
    const double ab = wasserstein_loss(a, b);
    const double ba = wasserstein_loss(b, a);
    const double ac = wasserstein_loss(a, c);
    const double cb = wasserstein_loss(c, b);
    CHECK(ab >= 0.0);
    CHECK(ab == Catch::Approx(ba).epsilon(1e-12));
    CHECK(ab <= ac + cb + 1e-12);
    CHECK(wasserstein_loss(a, a) == 0.0);
    // agreement with the greedy transport oracle
    CHECK(ab == Catch::Approx(wasserstein_bruteforce(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("cross entropy matches direct evaluation") {
  CHECK(cross_entropy_loss(make_vec({0.5, 0.5}), make_vec({1.0, 0.0})) ==
        Catch::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy_loss(make_vec({1.0, 0.0}), make_vec({1.0, 0.0})) ==
        0.0);

  // Gibbs: over p_hat, the loss is minimized at p_hat = p
  std::mt19937_64 rng(3);
  const Vec p = make_vec({0.2, 0.5, 0.3});
  const double at_p = cross_entropy_loss(p, p);
  for (int i = 0; i < 200; ++i) {
    Vec q(3);
    for (int j = 0; j < 3; ++j)
      q(j) = std::uniform_real_distribution<double>(1e-6, 1.0)(rng);
    q /= q.sum();
    CHECK(cross_entropy_loss(q, p) >= at_p - 1e-12);
  }
}

TEST_CASE("total variation equals W1 under the discrete metric") {
  const Vec a = make_vec({0.7, 0.2, 0.1});
  const Vec b = make_vec({0.1, 0.3, 0.6});
  CHECK(total_variation_loss(a, b) ==
        Catch::Approx(0.5 * ((a - b).cwiseAbs().sum())).epsilon(1e-12));
  CHECK(total_variation_loss(a, a) == 0.0);
}
