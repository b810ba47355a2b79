#include "aroid/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aroid/errors.hpp"

namespace aroid {

namespace {

void project(const Batch& x, Batch& adv, float eps) {
  for (size_t i = 0; i < adv.v.size(); ++i) {
    const float lo = std::max(0.0f, x.v[i] - eps);
    const float hi = std::min(1.0f, x.v[i] + eps);
    adv.v[i] = std::clamp(adv.v[i], lo, hi);
  }
}

void check_projection(const Batch& x, const Batch& adv, double eps, int step) {
  for (size_t i = 0; i < adv.v.size(); ++i) {
    const double d = std::abs(static_cast<double>(adv.v[i]) - x.v[i]);
    if (d > eps + 1e-6 || adv.v[i] < -1e-6f || adv.v[i] > 1.0f + 1e-6f) {
      std::ostringstream s;
      s << "projection violated at step " << step << ": |delta|=" << d
        << " value=" << adv.v[i];
      throw AttackError(s.str());
    }
  }
}

}  // namespace

Batch pgd(Net& model, const Batch& x, const std::vector<int>& labels,
          const AttackConfig& cfg, Rng& rng) {
  if (cfg.epsilon < 0) throw AttackError("negative epsilon");
  if (cfg.steps > 0 && cfg.step_size <= 0)
    throw AttackError("step_size must be positive when steps > 0");

  Batch adv = x;
  const float eps = static_cast<float>(cfg.epsilon);
  if (cfg.random_start && eps > 0.f) {
    for (auto& v : adv.v)
      v = std::clamp(v + static_cast<float>(rng.uniform(-cfg.epsilon, cfg.epsilon)),
                     0.0f, 1.0f);
  }
  if (eps == 0.f) return x;

  for (int step = 0; step < cfg.steps; ++step) {
    InputGrad g = ce_input_grad(model, adv, labels);
    for (double l : g.loss)
      if (!std::isfinite(l)) {
        std::ostringstream s;
        s << "non-finite attack loss at step " << step << " (eps=" << cfg.epsilon
          << ", step_size=" << cfg.step_size << ")";
        throw AttackError(s.str());
      }
    const float a = static_cast<float>(cfg.step_size);
    for (size_t i = 0; i < adv.v.size(); ++i) {
      const float gi = g.dx.v[i];
      adv.v[i] += a * static_cast<float>((gi > 0.f) - (gi < 0.f));
    }
    project(x, adv, eps);
    if (cfg.debug_projection) check_projection(x, adv, cfg.epsilon, step);
  }
  return adv;
}

}  // namespace aroid
