#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "aroid/errors.hpp"
#include "aroid/policy.hpp"

using namespace aroid;

namespace {

Batch random_batch(int n, int c, int h, int w, Rng& rng) {
  Batch b(n, c, h, w);
  for (auto& v : b.v) v = static_cast<float>(rng.uniform());
  return b;
}

}  // namespace

TEST_CASE("softmax produces valid simplices and matches a reference") {
  SUBCASE("uniform zero logits") {
    const auto p = softmax({0, 0, 0, 0});
    for (double v : p) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("two equal logits") {
    const auto p = softmax({1, 1});
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }
  SUBCASE("random logits vs independent recomputation") {
    Rng rng(3);
    std::vector<double> logits(7);
    for (auto& l : logits) l = rng.uniform(-4, 4);
    const auto p = softmax(logits);
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    double sum = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
      CHECK(p[i] == doctest::Approx(std::exp(logits[i]) / z).epsilon(1e-6));
      sum += p[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("log_prob_of: uniform, degenerate, random, and zero-probability cases") {
  SUBCASE("all-uniform standard space") {
    PolicyOutput out = policy_output_from_logits(
        {std::vector<double>(2, 0.0), std::vector<double>(16, 0.0),
         std::vector<double>(108, 0.0), std::vector<double>(11, 0.0)});
    const double lp = log_prob_of(out, {{0, 0, 0, 0}});
    CHECK(lp == doctest::Approx(std::log(1.0 / 2) + std::log(1.0 / 16) +
                                std::log(1.0 / 108) + std::log(1.0 / 11)));
  }
  SUBCASE("degenerate head contributes zero") {
    PolicyOutput out;
    out.probs = {{1.0, 0.0}, {0.25, 0.75}};
    out.logits = {{0, 0}, {0, 0}};
    CHECK(log_prob_of(out, {{0, 1}}) == doctest::Approx(std::log(0.75)));
    CHECK(std::isinf(log_prob_of(out, {{1, 1}})));  // zero-probability sentinel
  }
  SUBCASE("random case matches brute-force product") {
    Rng rng(5);
    std::vector<std::vector<double>> logits(3);
    for (auto& head : logits) {
      head.resize(5);
      for (auto& l : head) l = rng.uniform(-2, 2);
    }
    PolicyOutput out = policy_output_from_logits(logits);
    TrajectoryCode code{{1, 4, 2}};
    double prod = 1.0;
    for (int h = 0; h < 3; ++h) prod *= out.probs[h][code.idx[h]];
    CHECK(std::exp(log_prob_of(out, code)) == doctest::Approx(prod).epsilon(1e-9));
  }
}

TEST_CASE("log-prob gradient w.r.t. logits matches central finite differences") {
  Rng rng(7);
  std::vector<std::vector<double>> logits(2);
  logits[0] = {0.3, -1.2, 0.7};
  logits[1] = {1.5, 0.1, -0.4, 0.9};
  const TrajectoryCode code{{2, 1}};

  for (size_t h = 0; h < logits.size(); ++h) {
    for (size_t k = 0; k < logits[h].size(); ++k) {
      // analytic: one_hot - p
      const auto out = policy_output_from_logits(logits);
      const double analytic =
          (static_cast<int>(k) == code.idx[h] ? 1.0 : 0.0) - out.probs[h][k];
      const double step = 1e-5;
      auto bumped = logits;
      bumped[h][k] += step;
      const double up = log_prob_of(policy_output_from_logits(bumped), code);
      bumped[h][k] -= 2 * step;
      const double dn = log_prob_of(policy_output_from_logits(bumped), code);
      const double fd = (up - dn) / (2 * step);
      CHECK(analytic == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("sampling: degenerate distributions and empirical frequencies") {
  SUBCASE("degenerate -> identical trajectories, log_prob 0") {
    PolicyOutput out;
    out.probs = {{1.0, 0.0, 0.0}, {0.0, 1.0}};
    out.logits = {{0, 0, 0}, {0, 0}};
    Rng rng(9);
    const auto trajs = sample_trajectories(out, 5, rng);
    for (const auto& t : trajs) {
      CHECK(t.code.idx == std::vector<int>{0, 1});
      CHECK(t.log_prob == doctest::Approx(0.0));
    }
  }
  SUBCASE("uniform 2-logit head frequency 0.5 +- 0.02") {
    PolicyOutput out = policy_output_from_logits({{0.0, 0.0}});
    Rng rng(11);
    const auto trajs = sample_trajectories(out, 10000, rng);
    int ones = 0;
    for (const auto& t : trajs) ones += t.code.idx[0];
    CHECK(std::abs(ones / 10000.0 - 0.5) < 0.02);
  }
  SUBCASE("exp(log_prob) equals product of selected probs") {
    PolicyOutput out = policy_output_from_logits({{0.2, -0.7, 1.1}, {0.5, -0.5}});
    Rng rng(13);
    for (const auto& t : sample_trajectories(out, 50, rng)) {
      const double prod = out.probs[0][t.code.idx[0]] * out.probs[1][t.code.idx[1]];
      CHECK(std::exp(t.log_prob) == doctest::Approx(prod).epsilon(1e-6));
    }
  }
}

TEST_CASE("sampling is unbiased: chi-square on a 2x2 toy space") {
  PolicyOutput out = policy_output_from_logits({{0.4, -0.3}, {1.0, 0.2}});
  Rng rng(17);
  const int T = 100000;
  std::map<std::pair<int, int>, int> counts;
  const auto trajs = sample_trajectories(out, T, rng);
  for (const auto& t : trajs) counts[{t.code.idx[0], t.code.idx[1]}]++;
  double chi2 = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double expected = T * out.probs[0][a] * out.probs[1][b];
      const double diff = counts[{a, b}] - expected;
      chi2 += diff * diff / expected;
    }
  // 3 dof; 11.34 is the ltr 1% critical value
  CHECK(chi2 < 11.34);
}

TEST_CASE("policy model forward produces valid per-head simplices") {
  const auto space = build_space(SpaceKind::standard);
  Rng init(19);
  PolicyModel model(space, 4, 3, init);
  Rng xr(23);
  const Batch x = random_batch(3, 3, 32, 32, xr);
  const auto outs = model.forward(x);
  REQUIRE(outs.size() == 3);
  for (const auto& out : outs) {
    REQUIRE(out.probs.size() == 4);
    for (size_t h = 0; h < out.probs.size(); ++h) {
      CHECK(static_cast<int>(out.probs[h].size()) == space.heads[h].size());
      double sum = 0.0;
      for (double p : out.probs[h]) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  // deterministic forward
  const auto outs2 = model.forward(x);
  CHECK(outs2[0].logits[2] == outs[0].logits[2]);
}

TEST_CASE("no-flip space gives a 3-head policy") {
  const auto space = build_space(SpaceKind::no_flip);
  Rng init(29);
  PolicyModel model(space, 4, 3, init);
  CHECK(model.head_sizes() == std::vector<int>{16, 108, 11});
}

TEST_CASE("policy checkpoints refuse a space-signature mismatch") {
  const auto space = build_space(SpaceKind::standard);
  Rng init(31);
  PolicyModel model(space, 4, 3, init);
  const std::string path =
      (std::filesystem::temp_directory_path() / "aroid_test_policy.ckpt").string();
  save_policy_checkpoint(path, model, model.get_params(), 7, "fp");
  const auto ck = load_policy_checkpoint(path, space.head_sizes());
  CHECK(ck.epoch == 7);
  CHECK(ck.head_sizes == space.head_sizes());
  const auto wrong = build_space(SpaceKind::no_flip).head_sizes();
  CHECK_THROWS_AS(load_policy_checkpoint(path, wrong), ConfigError);
  std::filesystem::remove(path);
}
