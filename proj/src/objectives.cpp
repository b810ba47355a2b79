#include "aroid/objectives.hpp"

#include <cmath>

#include "aroid/errors.hpp"

namespace aroid {

std::vector<double> vulnerability(Net& target, const Batch& aug_batch,
                                  const std::vector<int>& labels,
                                  const AttackConfig& vul_attack, Rng& rng) {
  const std::vector<double> clean = ce_losses(target, aug_batch, labels);
  const Batch adv = pgd(target, aug_batch, labels, vul_attack, rng);
  const std::vector<double> attacked = ce_losses(target, adv, labels);
  std::vector<double> out(clean.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = attacked[i] - clean[i];
  return out;
}

std::vector<double> affinity(Net& affinity_model, const Batch& orig_batch,
                             const Batch& aug_batch,
                             const std::vector<int>& labels) {
  const std::vector<double> on_aug = ce_losses(affinity_model, aug_batch, labels);
  const std::vector<double> on_orig = ce_losses(affinity_model, orig_batch, labels);
  std::vector<double> out(on_aug.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = on_aug[i] - on_orig[i];
  return out;
}

std::vector<double> hardness(const std::vector<double>& vul,
                             const std::vector<double>& aft, double lambda) {
  if (vul.size() != aft.size())
    throw Error("hardness: vulnerability/affinity length mismatch");
  std::vector<double> out(vul.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = vul[i] - lambda * aft[i];
  return out;
}

double DiversityEval::mean() const {
  if (per_head.empty()) return 0.0;
  double acc = 0.0;
  for (double v : per_head) acc += v;
  return acc / static_cast<double>(per_head.size());
}

namespace {

constexpr double kProbFloor = 1e-12;

/// Plain Diversity on one distribution q against p~ = 1/|q|.
/// Adds d(loss)/dq into grad (same length as q) scaled by `scale`.
double plain_diversity(const std::vector<double>& q, const DiversityLimits& lim,
                       std::vector<double>* grad, double scale) {
  const double ptilde = 1.0 / static_cast<double>(q.size());
  const double lo = lim.l * ptilde;
  const double hi = lim.u * ptilde;
  int count = 0;
  for (double v : q) count += (v < lo) + (v > hi);
  if (count == 0) return 0.0;
  double loss = 0.0;
  const double inv_c = 1.0 / count;
  for (size_t i = 0; i < q.size(); ++i) {
    const double v = std::max(q[i], kProbFloor);
    if (q[i] < lo) {
      loss -= std::log(v) * inv_c;
      if (grad) (*grad)[i] += scale * (-inv_c / v);
    } else if (q[i] > hi) {
      loss += std::log(v) * inv_c;
      if (grad) (*grad)[i] += scale * (inv_c / v);
    }
  }
  return loss;
}

/// Hierarchical Diversity for the ColorShape head: the plain loss over the 14
/// type sums, plus the mean over multi-magnitude types of the plain loss on
/// the within-type renormalized distribution.
double hierarchical_diversity(const std::vector<double>& q, const Head& head,
                              const DiversityLimits& lim,
                              std::vector<double>* grad) {
  // Type level.
  std::vector<double> type_q(head.groups.size(), 0.0);
  for (size_t g = 0; g < head.groups.size(); ++g)
    for (int idx : head.groups[g].indices) type_q[g] += q[idx];
  std::vector<double> type_grad(type_q.size(), 0.0);
  const double type_loss =
      plain_diversity(type_q, lim, grad ? &type_grad : nullptr, 1.0);
  if (grad)
    for (size_t g = 0; g < head.groups.size(); ++g)
      for (int idx : head.groups[g].indices) (*grad)[idx] += type_grad[g];

  // Strength level: renormalize magnitudes within each multi-magnitude type.
  int multi = 0;
  for (const auto& g : head.groups) multi += g.indices.size() > 1;
  if (multi == 0) return type_loss;
  double strength_loss = 0.0;
  for (size_t g = 0; g < head.groups.size(); ++g) {
    const auto& idxs = head.groups[g].indices;
    if (idxs.size() < 2) continue;
    const double total = std::max(type_q[g], kProbFloor);
    std::vector<double> r(idxs.size());
    for (size_t k = 0; k < idxs.size(); ++k) r[k] = q[idxs[k]] / total;
    std::vector<double> r_grad(r.size(), 0.0);
    strength_loss +=
        plain_diversity(r, lim, grad ? &r_grad : nullptr, 1.0) / multi;
    if (grad) {
      // dr_k/dq_j = (delta_kj * total - q_k) / total^2 for j in the type.
      for (size_t k = 0; k < idxs.size(); ++k) {
        if (r_grad[k] == 0.0) continue;
        const double gk = r_grad[k] / multi;
        for (size_t j = 0; j < idxs.size(); ++j) {
          const double d = ((k == j ? total : 0.0) - q[idxs[k]]) / (total * total);
          (*grad)[idxs[j]] += gk * d;
        }
      }
    }
  }
  return type_loss + strength_loss;
}

}  // namespace

DiversityEval diversity_on_mean(const std::vector<std::vector<double>>& q,
                                const DiversityLimits& limits,
                                const AugmentationSpace& space) {
  if (static_cast<int>(q.size()) != space.head_count())
    throw Error("diversity: head count mismatch");
  DiversityEval ev;
  ev.per_head.resize(q.size());
  ev.grad_q.resize(q.size());
  for (size_t h = 0; h < q.size(); ++h) {
    ev.grad_q[h].assign(q[h].size(), 0.0);
    if (space.heads[h].kind == HeadKind::ColorShape) {
      ev.per_head[h] =
          hierarchical_diversity(q[h], space.heads[h], limits, &ev.grad_q[h]);
    } else {
      ev.per_head[h] = plain_diversity(q[h], limits, &ev.grad_q[h], 1.0);
    }
  }
  return ev;
}

std::vector<std::vector<double>> mean_probs(
    const std::vector<PolicyOutput>& batch_outputs) {
  if (batch_outputs.empty()) throw Error("diversity: empty batch");
  const size_t H = batch_outputs[0].probs.size();
  std::vector<std::vector<double>> q(H);
  for (size_t h = 0; h < H; ++h)
    q[h].assign(batch_outputs[0].probs[h].size(), 0.0);
  for (const auto& out : batch_outputs)
    for (size_t h = 0; h < H; ++h)
      for (size_t i = 0; i < q[h].size(); ++i) q[h][i] += out.probs[h][i];
  const double inv = 1.0 / static_cast<double>(batch_outputs.size());
  for (auto& head : q)
    for (auto& v : head) v *= inv;
  return q;
}

DiversityEval diversity(const std::vector<PolicyOutput>& batch_outputs,
                        const DiversityLimits& limits,
                        const AugmentationSpace& space) {
  return diversity_on_mean(mean_probs(batch_outputs), limits, space);
}

}  // namespace aroid
