#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aroid/nn.hpp"

using namespace aroid;

namespace {

Batch random_batch(int n, int c, int h, int w, Rng& rng) {
  Batch b(n, c, h, w);
  for (auto& v : b.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return b;
}

double scalar_loss(Net& net, const Batch& x, const std::vector<int>& labels) {
  const Batch logits = net.forward(x);
  return softmax_ce(logits, labels).mean_loss;
}

// Central finite difference of the mean CE w.r.t. one parameter entry.
double fd_param(Net& net, const Batch& x, const std::vector<int>& labels,
                float* slot, double h) {
  const float orig = *slot;
  *slot = static_cast<float>(orig + h);
  const double up = scalar_loss(net, x, labels);
  *slot = static_cast<float>(orig - h);
  const double dn = scalar_loss(net, x, labels);
  *slot = orig;
  return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("parameter gradients match finite differences") {
  Rng init(5);
  Net net = make_small_cnn(4, 3, 5, init);
  Rng xr(9);
  const Batch x = random_batch(6, 3, 16, 16, xr);
  const std::vector<int> labels = {0, 1, 2, 3, 4, 0};

  const Batch logits = net.forward(x);
  const CeResult ce = softmax_ce(logits, labels, 1.0 / x.n);
  net.zero_grad();
  net.backward(ce.dlogits, false, true);

  Rng pick(13);
  int checked = 0;
  for (auto& p : net.params()) {
    for (int k = 0; k < 6; ++k) {
      const size_t j = pick.below(p.n);
      const double fd_a = fd_param(net, x, labels, p.w + j, 5e-3);
      const double fd_b = fd_param(net, x, labels, p.w + j, 2.5e-3);
      // a ReLU kink inside the stencil makes the FD itself unstable; skip those
      if (std::abs(fd_a - fd_b) > 0.02 * std::max(1e-3, std::abs(fd_a))) continue;
      const double an = p.g[j];
      CHECK(an == doctest::Approx(fd_b).epsilon(0.05).scale(0.02));
      ++checked;
    }
  }
  CHECK(checked >= 12);
}

TEST_CASE("input gradients match finite differences") {
  Rng init(7);
  Net net = make_small_cnn(4, 3, 4, init);
  Rng xr(11);
  Batch x = random_batch(3, 3, 16, 16, xr);
  for (auto& v : x.v) v = std::abs(v);  // keep off the ReLU kinks a bit
  const std::vector<int> labels = {0, 1, 2};

  const InputGrad g = ce_input_grad(net, x, labels);
  Rng pick(17);
  int checked = 0;
  for (int k = 0; k < 40 && checked < 12; ++k) {
    const size_t j = pick.below(x.v.size());
    const float orig = x.v[j];
    const double h = 1e-2;
    x.v[j] = static_cast<float>(orig + h);
    double up = 0.0;
    for (double l : ce_losses(net, x, labels)) up += l;
    x.v[j] = static_cast<float>(orig - h);
    double dn = 0.0;
    for (double l : ce_losses(net, x, labels)) dn += l;
    x.v[j] = orig;
    const double fd = (up - dn) / (2 * h);
    if (std::abs(fd) < 1e-4) continue;  // dead ReLU path, FD uninformative
    CHECK(g.dx.v[j] == doctest::Approx(fd).epsilon(0.08).scale(1e-3));
    ++checked;
  }
  CHECK(checked >= 6);
}

TEST_CASE("softmax cross-entropy basics") {
  Batch logits(2, 3, 1, 1);
  logits.v = {0.f, 0.f, 0.f, 2.f, 1.f, -1.f};
  const CeResult ce = softmax_ce(logits, {1, 0});
  CHECK(ce.loss[0] == doctest::Approx(std::log(3.0)));
  // manual: lse = log(e^2 + e^1 + e^-1)
  const double lse = std::log(std::exp(2.0) + std::exp(1.0) + std::exp(-1.0));
  CHECK(ce.loss[1] == doctest::Approx(lse - 2.0));
  // gradient rows sum to zero
  for (int i = 0; i < 2; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += ce.dlogits.v[3 * i + j];
    CHECK(s == doctest::Approx(0.0).epsilon(1e-6));
  }
}

TEST_CASE("sgd momentum and weight decay step") {
  std::vector<float> w{1.0f}, g{0.5f};
  std::vector<ParamView> ps{{w.data(), g.data(), 1, "w"}};
  Sgd opt(0.1, 0.9, 0.0);
  opt.step(ps);
  CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.5));
  g[0] = 0.5f;
  opt.step(ps);
  // v = 0.9*0.5 + 0.5 = 0.95
  CHECK(w[0] == doctest::Approx(0.95 - 0.1 * 0.95));

  std::vector<float> w2{2.0f}, g2{0.0f};
  std::vector<ParamView> ps2{{w2.data(), g2.data(), 1, "w"}};
  Sgd opt2(0.1, 0.0, 0.01);
  opt2.step(ps2);
  CHECK(w2[0] == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0));
}

TEST_CASE("gradient clipping scales to the requested norm") {
  std::vector<float> w{0.f, 0.f}, g{3.0f, 4.0f};
  std::vector<ParamView> ps{{w.data(), g.data(), 2, "w"}};
  const double pre = clip_grad_norm(ps, 1.0);
  CHECK(pre == doctest::Approx(5.0));
  CHECK(global_grad_norm(ps) == doctest::Approx(1.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
}

TEST_CASE("get/set roundtrip and checksum stability") {
  Rng init(21);
  Net a = make_small_cnn(4, 3, 10, init);
  const auto flat = a.get_params();
  const auto ck = a.params_checksum();
  Rng init2(22);
  Net b = make_small_cnn(4, 3, 10, init2);
  CHECK(b.params_checksum() != ck);
  b.set_params(flat);
  CHECK(b.params_checksum() == ck);
  CHECK_THROWS(b.set_params(std::vector<float>(3, 0.f)));
}

TEST_CASE("policy backbone shapes") {
  Rng init(23);
  Net bb = make_policy_backbone(8, 3, init);
  Rng xr(29);
  const Batch x = random_batch(2, 3, 32, 32, xr);
  const Batch f = bb.forward(x);
  CHECK(f.n == 2);
  CHECK(f.c == policy_feature_dim(8));
  CHECK(f.h == 1);
  CHECK(f.w == 1);
}

TEST_CASE("forward is deterministic") {
  Rng init(31);
  Net net = make_small_cnn(8, 3, 10, init);
  Rng xr(37);
  const Batch x = random_batch(4, 3, 32, 32, xr);
  const Batch y1 = net.forward(x);
  const Batch y2 = net.forward(x);
  CHECK(y1.v == y2.v);
}
