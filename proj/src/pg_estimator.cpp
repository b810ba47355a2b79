#include "aroid/pg_estimator.hpp"

#include <cmath>
#include <cstdio>

#include "aroid/errors.hpp"

namespace aroid {

namespace {

void check_traj_shape(const std::vector<PolicyOutput>& outputs,
                      const std::vector<std::vector<Trajectory>>& trajs) {
  if (outputs.size() != trajs.size())
    throw Error("surrogate: outputs/trajectories batch mismatch");
  if (trajs.empty()) throw Error("surrogate: empty batch");
  const size_t T = trajs[0].size();
  if (T < 2)
    throw ConfigError("surrogate needs T >= 2 trajectories for the baseline");
  for (const auto& per_sample : trajs)
    if (per_sample.size() != T)
      throw Error("surrogate: ragged trajectory array");
}

}  // namespace

double surrogate_loss(const std::vector<PolicyOutput>& outputs,
                      const std::vector<std::vector<Trajectory>>& trajs) {
  check_traj_shape(outputs, trajs);
  const size_t B = trajs.size();
  const size_t T = trajs[0].size();
  double acc = 0.0;
  for (size_t i = 0; i < B; ++i) {
    double baseline = 0.0;
    for (const auto& t : trajs[i]) baseline += t.hardness;
    baseline /= static_cast<double>(T);
    for (const auto& t : trajs[i])
      acc += t.log_prob * (t.hardness - baseline);
  }
  return acc / static_cast<double>(B * T);
}

std::vector<std::vector<std::vector<double>>> surrogate_logit_grads(
    const std::vector<PolicyOutput>& outputs,
    const std::vector<std::vector<Trajectory>>& trajs, bool use_baseline) {
  if (!use_baseline) {
    if (outputs.size() != trajs.size() || trajs.empty())
      throw Error("surrogate: outputs/trajectories batch mismatch");
  } else {
    check_traj_shape(outputs, trajs);
  }
  const size_t B = trajs.size();
  const size_t T = trajs[0].size();
  const double scale = 1.0 / static_cast<double>(B * T);

  std::vector<std::vector<std::vector<double>>> grads(B);
  for (size_t i = 0; i < B; ++i) {
    const auto& out = outputs[i];
    grads[i].resize(out.probs.size());
    for (size_t h = 0; h < out.probs.size(); ++h)
      grads[i][h].assign(out.probs[h].size(), 0.0);

    double baseline = 0.0;
    if (use_baseline) {
      for (const auto& t : trajs[i]) baseline += t.hardness;
      baseline /= static_cast<double>(T);
    }
    for (const auto& t : trajs[i]) {
      const double adv = t.hardness - baseline;
      if (adv == 0.0) continue;
      for (size_t h = 0; h < out.probs.size(); ++h) {
        const int pick = t.code.idx[h];
        const auto& p = out.probs[h];
        // d log p[pick] / d logit[k] = delta(k, pick) - p[k]
        for (size_t k = 0; k < p.size(); ++k)
          grads[i][h][k] += scale * adv * ((static_cast<int>(k) == pick) - p[k]);
      }
    }
  }
  return grads;
}

HardnessFn make_hardness_fn(Net& target, Net& affinity_model, const Batch& orig,
                            double lambda, const AttackConfig& vul_attack,
                            Rng& attack_rng) {
  return [&target, &affinity_model, &orig, lambda, vul_attack, &attack_rng](
             const Batch& aug_batch, const std::vector<int>& labels,
             const std::vector<TrajectoryCode>&) {
    const std::vector<double> vul =
        vulnerability(target, aug_batch, labels, vul_attack, attack_rng);
    if (lambda == 0.0) return vul;
    const std::vector<double> aft =
        affinity(affinity_model, orig, aug_batch, labels);
    return hardness(vul, aft, lambda);
  };
}

PolicyLossBreakdown policy_update_step(PolicyModel& policy, Sgd& opt,
                                       const Batch& x,
                                       const std::vector<int>& labels,
                                       const AugmentationSpace& space,
                                       const PolicyUpdateConfig& cfg,
                                       const HardnessFn& hardness_fn,
                                       Rng& sample_rng, Rng& aug_rng) {
  if (cfg.T < 2) throw ConfigError("policy update needs T >= 2");
  const int B = x.n;
  std::vector<PolicyOutput> outputs = policy.forward(x);

  // Sample T trajectories per sample, augment, and score their hardness.
  std::vector<std::vector<Trajectory>> trajs(B);
  for (int i = 0; i < B; ++i) trajs[i].resize(cfg.T);
  Batch aug(B, x.c, x.h, x.w);
  for (int t = 0; t < cfg.T; ++t) {
    std::vector<TrajectoryCode> codes(B);
    for (int i = 0; i < B; ++i) {
      auto sampled = sample_trajectories(outputs[i], 1, sample_rng);
      codes[i] = sampled[0].code;
      trajs[i][t].code = sampled[0].code;
      trajs[i][t].log_prob = sampled[0].log_prob;
    }
    for (int i = 0; i < B; ++i)
      aug.set_image(i, apply_trajectory(x.image(i), codes[i], space, aug_rng));
    const std::vector<double> hrd = hardness_fn(aug, labels, codes);
    for (int i = 0; i < B; ++i) trajs[i][t].hardness = hrd[i];
  }

  PolicyLossBreakdown out;
  out.surrogate = surrogate_loss(outputs, trajs);
  auto dlogits = surrogate_logit_grads(outputs, trajs, /*use_baseline=*/true);
  // Minimized loss is -surrogate (+ beta * diversity): flip the sign.
  for (auto& per_sample : dlogits)
    for (auto& head : per_sample)
      for (auto& g : head) g = -g;

  if (cfg.diversity_on && cfg.beta != 0.0) {
    const DiversityEval div = diversity(outputs, cfg.limits, space);
    out.diversity = div.mean();
    const double H = static_cast<double>(space.head_count());
    const double w = cfg.beta / (H * static_cast<double>(B));
    for (int i = 0; i < B; ++i) {
      for (int h = 0; h < space.head_count(); ++h) {
        const auto& p = outputs[i].probs[h];
        const auto& gq = div.grad_q[h];
        // chain rule through softmax: dL/dlogit_k = p_k (g_k - sum_j g_j p_j)
        double dot = 0.0;
        for (size_t j = 0; j < p.size(); ++j) dot += gq[j] * p[j];
        for (size_t k = 0; k < p.size(); ++k)
          dlogits[i][h][k] += w * p[k] * (gq[k] - dot);
      }
    }
  }
  out.total = -out.surrogate + cfg.beta * out.diversity;

  if (!std::isfinite(out.total)) {
    std::fprintf(stderr,
                 "policy update skipped: non-finite loss (surrogate=%g, "
                 "diversity=%g)\n",
                 out.surrogate, out.diversity);
    out.applied = false;
    return out;
  }

  policy.zero_grad();
  policy.backward(dlogits);
  auto params = policy.params();
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) {
    std::fprintf(stderr, "policy update skipped: non-finite gradient norm\n");
    policy.zero_grad();
    out.applied = false;
    return out;
  }
  clip_grad_norm(params, cfg.clip_norm);
  opt.step(params);
  return out;
}

}  // namespace aroid
