#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aroid/errors.hpp"
#include "aroid/pg_estimator.hpp"

using namespace aroid;

namespace {

/// Toy 2-head x 2-sub-policy space with a fixed reward table.
struct ToyBandit {
  PolicyOutput out;
  double reward[2][2];

  explicit ToyBandit(std::vector<std::vector<double>> logits,
                     std::array<double, 4> r) {
    out = policy_output_from_logits(std::move(logits));
    reward[0][0] = r[0];
    reward[0][1] = r[1];
    reward[1][0] = r[2];
    reward[1][1] = r[3];
  }

  double expected_reward() const {
    double e = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        e += out.probs[0][a] * out.probs[1][b] * reward[a][b];
    return e;
  }

  /// Exact gradient of E[reward] w.r.t. the logits, by enumeration.
  std::vector<std::vector<double>> exact_grad() const {
    std::vector<std::vector<double>> g{{0, 0}, {0, 0}};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const double p = out.probs[0][a] * out.probs[1][b];
        const double r = reward[a][b];
        for (int k = 0; k < 2; ++k) {
          g[0][k] += p * r * ((k == a) - out.probs[0][k]);
          g[1][k] += p * r * ((k == b) - out.probs[1][k]);
        }
      }
    return g;
  }

  std::vector<std::vector<Trajectory>> sample(int T, Rng& rng) const {
    std::vector<std::vector<Trajectory>> trajs(1);
    trajs[0] = sample_trajectories(out, T, rng);
    for (auto& t : trajs[0])
      t.hardness = reward[t.code.idx[0]][t.code.idx[1]];
    return trajs;
  }
};

AugmentationSpace tiny_space() {
  // Flip head (2) + Dropout head (Identity + 2 erasing magnitudes)
  AugmentationSpace s = build_space(SpaceKind::standard);
  s.heads.erase(s.heads.begin() + 1, s.heads.begin() + 3);  // keep Flip, Dropout
  Head& drop = s.heads[1];
  drop.entries.resize(3);
  drop.groups.clear();
  drop.groups.push_back({"Identity", {0}});
  drop.groups.push_back({"Erasing", {1, 2}});
  return s;
}

}  // namespace

TEST_CASE("surrogate loss: baseline cancellation and shift invariance") {
  PolicyOutput out = policy_output_from_logits({{0.3, -0.2}, {0.8, 0.1}});
  Rng rng(3);

  SUBCASE("equal hardness per sample contributes exactly zero") {
    auto trajs = std::vector<std::vector<Trajectory>>{
        sample_trajectories(out, 4, rng)};
    for (auto& t : trajs[0]) t.hardness = 0.625;
    CHECK(surrogate_loss({out}, trajs) == 0.0);
    const auto g = surrogate_logit_grads({out}, trajs);
    for (const auto& head : g[0])
      for (double v : head) CHECK(v == 0.0);
  }

  SUBCASE("adding a constant to every hardness leaves the surrogate unchanged") {
    // values exactly representable so the fp mean shift is exact
    auto trajs = std::vector<std::vector<Trajectory>>{
        sample_trajectories(out, 4, rng)};
    const double vals[4] = {0.25, 0.5, 0.75, 1.0};
    for (int t = 0; t < 4; ++t) trajs[0][t].hardness = vals[t];
    const double base = surrogate_loss({out}, trajs);
    for (int t = 0; t < 4; ++t) trajs[0][t].hardness = vals[t] + 2.0;
    CHECK(surrogate_loss({out}, trajs) == base);
  }

  SUBCASE("T < 2 is a config error") {
    auto trajs = std::vector<std::vector<Trajectory>>{
        sample_trajectories(out, 1, rng)};
    CHECK_THROWS_AS(surrogate_loss({out}, trajs), ConfigError);
  }
}

TEST_CASE("surrogate gradient matches finite differences on a frozen instance") {
  std::vector<std::vector<double>> logits{{0.4, -0.6}, {1.1, 0.0}};
  PolicyOutput out = policy_output_from_logits(logits);
  Rng rng(7);
  auto trajs = std::vector<std::vector<Trajectory>>{sample_trajectories(out, 6, rng)};
  const double rewards[6] = {0.9, -0.3, 0.4, 1.2, 0.0, -0.7};
  for (int t = 0; t < 6; ++t) trajs[0][t].hardness = rewards[t];

  const auto grads = surrogate_logit_grads({out}, trajs);
  for (size_t h = 0; h < logits.size(); ++h)
    for (size_t k = 0; k < logits[h].size(); ++k) {
      const double step = 1e-6;
      auto recompute = [&](double delta) {
        auto bumped = logits;
        bumped[h][k] += delta;
        PolicyOutput o2 = policy_output_from_logits(bumped);
        auto t2 = trajs;
        for (auto& t : t2[0]) t.log_prob = log_prob_of(o2, t.code);
        return surrogate_loss({o2}, t2);
      };
      const double fd = (recompute(step) - recompute(-step)) / (2 * step);
      CHECK(grads[0][h][k] == doctest::Approx(fd).epsilon(1e-4).scale(1e-7));
    }
}

TEST_CASE("Monte-Carlo estimator matches the enumerated gradient within 2%") {
  ToyBandit bandit({{0.6, -0.2}, {0.1, 0.5}}, {1.0, 0.2, -0.4, 0.7});
  const auto exact = bandit.exact_grad();

  Rng rng(11);
  const int N = 100000;
  auto trajs = bandit.sample(N, rng);
  // plain REINFORCE (no baseline): (1/N) sum grad logP * r
  const auto mc = surrogate_logit_grads({bandit.out}, trajs, /*use_baseline=*/false);

  double max_rel = 0.0;
  for (int h = 0; h < 2; ++h)
    for (int k = 0; k < 2; ++k) {
      const double rel = std::abs(mc[0][h][k] - exact[h][k]) /
                         std::max(1e-12, std::abs(exact[h][k]));
      max_rel = std::max(max_rel, rel);
    }
  CHECK(max_rel < 0.02);
}

TEST_CASE("the per-sample mean baseline reduces gradient variance") {
  ToyBandit bandit({{0.3, -0.1}, {0.2, 0.6}}, {1.0, 0.0, 0.3, 0.8});
  Rng rng(13);
  const int groups = 2000, T = 8;

  double var_plain = 0.0, var_base = 0.0;
  double mean_plain[2][2] = {}, mean_base[2][2] = {};
  std::vector<std::array<std::array<double, 2>, 2>> gp(groups), gb(groups);
  for (int g = 0; g < groups; ++g) {
    auto trajs = bandit.sample(T, rng);
    const auto plain =
        surrogate_logit_grads({bandit.out}, trajs, /*use_baseline=*/false);
    const auto with_base =
        surrogate_logit_grads({bandit.out}, trajs, /*use_baseline=*/true);
    for (int h = 0; h < 2; ++h)
      for (int k = 0; k < 2; ++k) {
        gp[g][h][k] = plain[0][h][k];
        gb[g][h][k] = with_base[0][h][k];
        mean_plain[h][k] += plain[0][h][k] / groups;
        mean_base[h][k] += with_base[0][h][k] / groups;
      }
  }
  for (int g = 0; g < groups; ++g)
    for (int h = 0; h < 2; ++h)
      for (int k = 0; k < 2; ++k) {
        var_plain += std::pow(gp[g][h][k] - mean_plain[h][k], 2) / groups;
        var_base += std::pow(gb[g][h][k] - mean_base[h][k], 2) / groups;
      }
  CHECK(var_base < var_plain);
}

TEST_CASE("policy_update_step: stop-gradient, zero-gradient, and bandit convergence") {
  const auto space = tiny_space();
  Rng init(17);
  PolicyModel policy(space, 1, 3, init);
  Sgd opt(0.25, 0.9, 0.0);

  Batch x(4, 3, 16, 16);
  Rng xr(19);
  for (auto& v : x.v) v = static_cast<float>(xr.uniform());
  const std::vector<int> labels{0, 1, 0, 1};

  PolicyUpdateConfig cfg;
  cfg.T = 8;
  cfg.beta = 0.0;
  cfg.diversity_on = false;

  SUBCASE("constant rewards leave parameters unchanged") {
    const auto before = policy.params_checksum();
    HardnessFn constant = [](const Batch& b, const std::vector<int>&,
                             const std::vector<TrajectoryCode>&) {
      return std::vector<double>(b.n, 1.0);
    };
    Rng srng(23), arng(29);
    const auto bd = policy_update_step(policy, opt, x, labels, space, cfg,
                                       constant, srng, arng);
    CHECK(bd.applied);
    CHECK(bd.surrogate == 0.0);
    CHECK(policy.params_checksum() == before);
  }

  SUBCASE("target and affinity stay frozen through a production update") {
    Rng tinit(31), ainit(37);
    Net target = make_small_cnn(2, 3, 2, tinit);
    Net affinity_model = make_small_cnn(2, 3, 2, ainit);
    const auto t_before = target.params_checksum();
    const auto a_before = affinity_model.params_checksum();
    const auto p_before = policy.params_checksum();
    AttackConfig vul;
    vul.steps = 2;
    vul.step_size = 2.0 / 255.0;
    Rng vrng(41);
    const HardnessFn fn = make_hardness_fn(target, affinity_model, x, 0.3, vul, vrng);
    PolicyUpdateConfig cfg2 = cfg;
    cfg2.lambda = 0.3;
    cfg2.diversity_on = true;
    cfg2.beta = 0.8;
    Rng srng(43), arng(47);
    const auto bd = policy_update_step(policy, opt, x, labels, space, cfg2, fn,
                                       srng, arng);
    CHECK(bd.applied);
    CHECK(bd.total == -bd.surrogate + cfg2.beta * bd.diversity);
    CHECK(target.params_checksum() == t_before);
    CHECK(affinity_model.params_checksum() == a_before);
    CHECK(policy.params_checksum() != p_before);
  }

  SUBCASE("bandit convergence: favored indices become the argmax") {
    const std::vector<int> favored{1, 2};
    HardnessFn fav = [&](const Batch&, const std::vector<int>&,
                         const std::vector<TrajectoryCode>& codes) {
      std::vector<double> r(codes.size(), 0.0);
      for (size_t i = 0; i < codes.size(); ++i)
        for (size_t h = 0; h < favored.size(); ++h)
          r[i] += (codes[i].idx[h] == favored[h]) ? 1.0 : 0.0;
      return r;
    };
    Rng srng(53), arng(59);
    for (int step = 0; step < 500; ++step)
      (void)policy_update_step(policy, opt, x, labels, space, cfg, fav, srng, arng);
    const auto outs = policy.forward(x);
    std::vector<double> q0(2, 0.0), q1(3, 0.0);
    for (const auto& o : outs) {
      for (int k = 0; k < 2; ++k) q0[k] += o.probs[0][k] / outs.size();
      for (int k = 0; k < 3; ++k) q1[k] += o.probs[1][k] / outs.size();
    }
    CHECK(std::max_element(q0.begin(), q0.end()) - q0.begin() == favored[0]);
    CHECK(std::max_element(q1.begin(), q1.end()) - q1.begin() == favored[1]);
  }

  SUBCASE("non-finite rewards skip the step and keep parameters") {
    const auto before = policy.params_checksum();
    HardnessFn bad = [](const Batch& b, const std::vector<int>&,
                        const std::vector<TrajectoryCode>&) {
      return std::vector<double>(b.n, std::nan(""));
    };
    Rng srng(61), arng(67);
    const auto bd = policy_update_step(policy, opt, x, labels, space, cfg, bad,
                                       srng, arng);
    CHECK_FALSE(bd.applied);
    CHECK(policy.params_checksum() == before);
  }
}
