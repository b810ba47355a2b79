#include "aroid/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "aroid/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aroid {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXf;
using MapRow = Eigen::Map<RowMat>;
using MapCol = Eigen::Map<ColMat>;
using CMapRow = Eigen::Map<const RowMat>;
using CMapCol = Eigen::Map<const ColMat>;

namespace {

void he_normal(std::vector<float>& w, int fan_in, Rng& rng) {
  const double std = std::sqrt(2.0 / fan_in);
  for (auto& x : w) x = static_cast<float>(rng.normal() * std);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d: 3x3, stride 1, pad 1, via per-image im2col + GEMM. Images within a
// batch are processed in a static-schedule parallel loop; parameter gradients
// are accumulated per thread and reduced in thread order, which keeps results
// identical across runs for a fixed thread count.
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_ch, int out_ch, Rng& rng, const std::string& name)
    : in_ch_(in_ch), out_ch_(out_ch), name_(name),
      w_(static_cast<size_t>(out_ch) * in_ch * 9),
      b_(out_ch, 0.f),
      gw_(w_.size(), 0.f),
      gb_(out_ch, 0.f) {
  he_normal(w_, in_ch * 9, rng);
}

namespace {

// cols is (in_ch*9) x (h*w), column-major: one column per output pixel.
void im2col3x3(const float* x, int c, int h, int w, float* cols) {
  const int K = c * 9;
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      float* col = cols + (static_cast<size_t>(y) * w + xx) * K;
      int r = 0;
      for (int ci = 0; ci < c; ++ci) {
        const float* plane = x + static_cast<size_t>(ci) * h * w;
        for (int ky = -1; ky <= 1; ++ky) {
          const int sy = y + ky;
          for (int kx = -1; kx <= 1; ++kx, ++r) {
            const int sx = xx + kx;
            col[r] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                         ? plane[sy * w + sx]
                         : 0.f;
          }
        }
      }
    }
}

void col2im3x3(const float* cols, int c, int h, int w, float* dx) {
  const int K = c * 9;
  std::memset(dx, 0, sizeof(float) * c * h * w);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const float* col = cols + (static_cast<size_t>(y) * w + xx) * K;
      int r = 0;
      for (int ci = 0; ci < c; ++ci) {
        float* plane = dx + static_cast<size_t>(ci) * h * w;
        for (int ky = -1; ky <= 1; ++ky) {
          const int sy = y + ky;
          for (int kx = -1; kx <= 1; ++kx, ++r) {
            const int sx = xx + kx;
            if (sy >= 0 && sy < h && sx >= 0 && sx < w)
              plane[sy * w + sx] += col[r];
          }
        }
      }
    }
}

}  // namespace

Batch Conv2d::forward(const Batch& x) {
  if (x.c != in_ch_) throw Error(name_ + ": channel mismatch");
  x_ = x;
  Batch y(x.n, out_ch_, x.h, x.w);
  const int K = in_ch_ * 9;
  const int P = x.h * x.w;
  CMapRow W(w_.data(), out_ch_, K);
#pragma omp parallel
  {
    std::vector<float> cols(static_cast<size_t>(K) * P);
#pragma omp for schedule(static)
    for (int i = 0; i < x.n; ++i) {
      im2col3x3(x.item(i), in_ch_, x.h, x.w, cols.data());
      MapCol C(cols.data(), K, P);
      MapRow Y(y.item(i), out_ch_, P);
      Y.noalias() = W * C;
      for (int oc = 0; oc < out_ch_; ++oc) Y.row(oc).array() += b_[oc];
    }
  }
  return y;
}

Batch Conv2d::backward(const Batch& dy, bool need_dx, bool need_pg) {
  const int K = in_ch_ * 9;
  const int P = x_.h * x_.w;
  Batch dx;
  if (need_dx) dx = Batch(x_.n, x_.c, x_.h, x_.w);
  CMapRow W(w_.data(), out_ch_, K);

  int nthreads = 1;
#ifdef _OPENMP
  nthreads = omp_get_max_threads();
#endif
  std::vector<std::vector<float>> tgw, tgb;
  if (need_pg) {
    tgw.assign(nthreads, std::vector<float>(w_.size(), 0.f));
    tgb.assign(nthreads, std::vector<float>(b_.size(), 0.f));
  }

#pragma omp parallel
  {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    std::vector<float> cols(static_cast<size_t>(K) * P);
    std::vector<float> dcols(static_cast<size_t>(K) * P);
#pragma omp for schedule(static)
    for (int i = 0; i < x_.n; ++i) {
      CMapRow DY(dy.item(i), out_ch_, P);
      if (need_pg) {
        im2col3x3(x_.item(i), in_ch_, x_.h, x_.w, cols.data());
        MapCol C(cols.data(), K, P);
        MapRow GW(tgw[tid].data(), out_ch_, K);
        GW.noalias() += DY * C.transpose();
        // fixed-order reduction; Eigen's .sum() peels by pointer alignment
        // and would make reruns diverge in the last bits
        const float* dyp = dy.item(i);
        for (int oc = 0; oc < out_ch_; ++oc) {
          float acc = 0.f;
          for (int p = 0; p < P; ++p) acc += dyp[static_cast<size_t>(oc) * P + p];
          tgb[tid][oc] += acc;
        }
      }
      if (need_dx) {
        MapCol DC(dcols.data(), K, P);
        DC.noalias() = W.transpose() * DY;
        col2im3x3(dcols.data(), in_ch_, x_.h, x_.w, dx.item(i));
      }
    }
  }
  if (need_pg) {
    for (int t = 0; t < nthreads; ++t) {
      for (size_t j = 0; j < gw_.size(); ++j) gw_[j] += tgw[t][j];
      for (size_t j = 0; j < gb_.size(); ++j) gb_[j] += tgb[t][j];
    }
  }
  return dx;
}

std::vector<ParamView> Conv2d::params() {
  return {{w_.data(), gw_.data(), w_.size(), name_ + ".w"},
          {b_.data(), gb_.data(), b_.size(), name_ + ".b"}};
}

std::string Conv2d::desc() const {
  std::ostringstream s;
  s << "conv3x3(" << in_ch_ << "->" << out_ch_ << ")";
  return s.str();
}

// ---------------------------------------------------------------------------

Batch ReLU::forward(const Batch& x) {
  x_ = x;
  Batch y = x;
  for (auto& v : y.v) v = v > 0.f ? v : 0.f;
  return y;
}

Batch ReLU::backward(const Batch& dy, bool need_dx, bool) {
  if (!need_dx) return {};
  Batch dx = dy;
  for (size_t i = 0; i < dx.v.size(); ++i)
    if (x_.v[i] <= 0.f) dx.v[i] = 0.f;
  return dx;
}

Batch MaxPool2::forward(const Batch& x) {
  n_ = x.n;
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  const int oh = x.h / 2, ow = x.w / 2;
  Batch y(x.n, x.c, oh, ow);
  argmax_.assign(y.size(), 0);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c)
      for (int y0 = 0; y0 < oh; ++y0)
        for (int x0 = 0; x0 < ow; ++x0) {
          float best = -1e30f;
          int besti = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const int yy = 2 * y0 + dy, xx = 2 * x0 + dx;
              const float v = x.at(i, c, yy, xx);
              if (v > best) {
                best = v;
                besti = yy * x.w + xx;
              }
            }
          const size_t oidx = ((static_cast<size_t>(i) * x.c + c) * oh + y0) * ow + x0;
          y.v[oidx] = best;
          argmax_[oidx] = besti;
        }
  return y;
}

Batch MaxPool2::backward(const Batch& dy, bool need_dx, bool) {
  if (!need_dx) return {};
  Batch dx(n_, c_, h_, w_);
  const int oh = h_ / 2, ow = w_ / 2;
  for (int i = 0; i < n_; ++i)
    for (int c = 0; c < c_; ++c) {
      float* plane = dx.v.data() + (static_cast<size_t>(i) * c_ + c) * h_ * w_;
      for (int y0 = 0; y0 < oh; ++y0)
        for (int x0 = 0; x0 < ow; ++x0) {
          const size_t oidx = ((static_cast<size_t>(i) * c_ + c) * oh + y0) * ow + x0;
          plane[argmax_[oidx]] += dy.v[oidx];
        }
    }
  return dx;
}

Batch GlobalAvgPool::forward(const Batch& x) {
  n_ = x.n;
  c_ = x.c;
  h_ = x.h;
  w_ = x.w;
  Batch y(x.n, x.c, 1, 1);
  const double inv = 1.0 / (static_cast<double>(x.h) * x.w);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c) {
      const float* plane = x.v.data() + (static_cast<size_t>(i) * x.c + c) * x.h * x.w;
      double acc = 0.0;
      for (int k = 0; k < x.h * x.w; ++k) acc += plane[k];
      y.v[static_cast<size_t>(i) * x.c + c] = static_cast<float>(acc * inv);
    }
  return y;
}

Batch GlobalAvgPool::backward(const Batch& dy, bool need_dx, bool) {
  if (!need_dx) return {};
  Batch dx(n_, c_, h_, w_);
  const float inv = 1.0f / (h_ * w_);
  for (int i = 0; i < n_; ++i)
    for (int c = 0; c < c_; ++c) {
      const float g = dy.v[static_cast<size_t>(i) * c_ + c] * inv;
      float* plane = dx.v.data() + (static_cast<size_t>(i) * c_ + c) * h_ * w_;
      for (int k = 0; k < h_ * w_; ++k) plane[k] = g;
    }
  return dx;
}

// ---------------------------------------------------------------------------

Linear::Linear(int in_dim, int out_dim, Rng& rng, const std::string& name)
    : in_dim_(in_dim), out_dim_(out_dim), name_(name),
      w_(static_cast<size_t>(out_dim) * in_dim),
      b_(out_dim, 0.f),
      gw_(w_.size(), 0.f),
      gb_(out_dim, 0.f) {
  he_normal(w_, in_dim, rng);
}

Batch Linear::forward(const Batch& x) {
  const int F = x.c * x.h * x.w;
  if (F != in_dim_) throw Error(name_ + ": feature dim mismatch");
  x_ = x;
  x_n_ = x.n;
  x_c_ = x.c;
  x_h_ = x.h;
  x_w_ = x.w;
  Batch y(x.n, out_dim_, 1, 1);
  CMapRow X(x.v.data(), x.n, F);
  CMapRow W(w_.data(), out_dim_, F);
  MapRow Y(y.v.data(), x.n, out_dim_);
  Y.noalias() = X * W.transpose();
  for (int i = 0; i < x.n; ++i)
    for (int o = 0; o < out_dim_; ++o) y.v[static_cast<size_t>(i) * out_dim_ + o] += b_[o];
  return y;
}

Batch Linear::backward(const Batch& dy, bool need_dx, bool need_pg) {
  const int F = in_dim_;
  CMapRow DY(dy.v.data(), x_n_, out_dim_);
  CMapRow X(x_.v.data(), x_n_, F);
  if (need_pg) {
    MapRow GW(gw_.data(), out_dim_, F);
    GW.noalias() += DY.transpose() * X;
    for (int i = 0; i < x_n_; ++i)
      for (int o = 0; o < out_dim_; ++o)
        gb_[o] += dy.v[static_cast<size_t>(i) * out_dim_ + o];
  }
  if (!need_dx) return {};
  Batch dx(x_n_, x_c_, x_h_, x_w_);
  CMapRow W(w_.data(), out_dim_, F);
  MapRow DX(dx.v.data(), x_n_, F);
  DX.noalias() = DY * W;
  return dx;
}

std::vector<ParamView> Linear::params() {
  return {{w_.data(), gw_.data(), w_.size(), name_ + ".w"},
          {b_.data(), gb_.data(), b_.size(), name_ + ".b"}};
}

std::string Linear::desc() const {
  std::ostringstream s;
  s << "linear(" << in_dim_ << "->" << out_dim_ << ")";
  return s.str();
}

// ---------------------------------------------------------------------------

Batch Net::forward(const Batch& x) {
  Batch cur = x;
  for (auto& l : layers_) cur = l->forward(cur);
  return cur;
}

Batch Net::backward(const Batch& dy, bool need_dx, bool need_pg) {
  Batch cur = dy;
  for (size_t i = layers_.size(); i-- > 0;) {
    const bool dx_here = need_dx || i > 0;
    cur = layers_[i]->backward(cur, dx_here, need_pg);
  }
  return cur;
}

std::vector<ParamView> Net::params() {
  std::vector<ParamView> out;
  for (auto& l : layers_)
    for (auto& p : l->params()) out.push_back(p);
  return out;
}

void Net::zero_grad() {
  for (auto& p : params()) std::fill(p.g, p.g + p.n, 0.f);
}

size_t Net::num_params() {
  size_t n = 0;
  for (auto& p : params()) n += p.n;
  return n;
}

std::vector<float> Net::get_params() {
  std::vector<float> flat;
  flat.reserve(num_params());
  for (auto& p : params()) flat.insert(flat.end(), p.w, p.w + p.n);
  return flat;
}

void Net::set_params(const std::vector<float>& flat) {
  size_t off = 0;
  auto ps = params();
  size_t total = 0;
  for (auto& p : ps) total += p.n;
  if (flat.size() != total)
    throw Error("parameter blob size " + std::to_string(flat.size()) +
                " does not match model size " + std::to_string(total));
  for (auto& p : ps) {
    std::copy(flat.begin() + off, flat.begin() + off + p.n, p.w);
    off += p.n;
  }
}

std::uint64_t Net::params_checksum() {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto& p : params()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.w);
    for (size_t i = 0; i < p.n * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string Net::arch() const {
  std::ostringstream s;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (i) s << '|';
    s << layers_[i]->desc();
  }
  return s.str();
}

// ---------------------------------------------------------------------------

CeResult softmax_ce(const Batch& logits, const std::vector<int>& labels,
                    double grad_scale) {
  const int n = logits.n;
  const int k = logits.c;
  if (static_cast<int>(labels.size()) != n)
    throw Error("labels size does not match batch");
  CeResult r;
  r.loss.resize(n);
  r.dlogits = Batch(n, k, 1, 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const float* l = logits.v.data() + static_cast<size_t>(i) * k;
    double m = l[0];
    for (int j = 1; j < k; ++j) m = std::max<double>(m, l[j]);
    double se = 0.0;
    for (int j = 0; j < k; ++j) se += std::exp(static_cast<double>(l[j]) - m);
    const double lse = m + std::log(se);
    const int y = labels[i];
    if (y < 0 || y >= k) throw Error("label out of range");
    r.loss[i] = lse - l[y];
    total += r.loss[i];
    for (int j = 0; j < k; ++j) {
      const double p = std::exp(static_cast<double>(l[j]) - lse);
      r.dlogits.v[static_cast<size_t>(i) * k + j] =
          static_cast<float>(grad_scale * (p - (j == y ? 1.0 : 0.0)));
    }
  }
  r.mean_loss = total / n;
  return r;
}

std::vector<int> predict_classes(const Batch& logits) {
  std::vector<int> out(logits.n);
  for (int i = 0; i < logits.n; ++i) {
    const float* l = logits.v.data() + static_cast<size_t>(i) * logits.c;
    out[i] = static_cast<int>(std::max_element(l, l + logits.c) - l);
  }
  return out;
}

std::vector<double> ce_losses(Net& net, const Batch& x,
                              const std::vector<int>& labels) {
  const Batch logits = net.forward(x);
  return softmax_ce(logits, labels).loss;
}

InputGrad ce_input_grad(Net& net, const Batch& x, const std::vector<int>& labels) {
  const Batch logits = net.forward(x);
  CeResult ce = softmax_ce(logits, labels);
  InputGrad r;
  r.loss = std::move(ce.loss);
  r.dx = net.backward(ce.dlogits, /*need_dx=*/true, /*need_pg=*/false);
  return r;
}

// ---------------------------------------------------------------------------

void Sgd::step(const std::vector<ParamView>& ps) {
  if (vel_.size() != ps.size()) {
    vel_.clear();
    for (auto& p : ps) vel_.emplace_back(p.n, 0.f);
  }
  for (size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    auto& v = vel_[i];
    for (size_t j = 0; j < p.n; ++j) {
      const float g = p.g[j] + static_cast<float>(weight_decay) * p.w[j];
      v[j] = static_cast<float>(momentum) * v[j] + g;
      p.w[j] -= static_cast<float>(lr) * v[j];
    }
  }
}

double global_grad_norm(const std::vector<ParamView>& ps) {
  double acc = 0.0;
  for (auto& p : ps)
    for (size_t j = 0; j < p.n; ++j) acc += static_cast<double>(p.g[j]) * p.g[j];
  return std::sqrt(acc);
}

double clip_grad_norm(const std::vector<ParamView>& ps, double max_norm) {
  const double norm = global_grad_norm(ps);
  if (norm > max_norm && norm > 0.0) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto& p : ps)
      for (size_t j = 0; j < p.n; ++j) p.g[j] *= scale;
  }
  return norm;
}

// ---------------------------------------------------------------------------

Net make_small_cnn(int width, int in_ch, int classes, Rng& rng) {
  Net net;
  net.add(std::make_unique<Conv2d>(in_ch, width, rng, "c1"));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<MaxPool2>());
  net.add(std::make_unique<Conv2d>(width, 2 * width, rng, "c2"));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<MaxPool2>());
  net.add(std::make_unique<Conv2d>(2 * width, 4 * width, rng, "c3"));
  net.add(std::make_unique<ReLU>());
  net.add(std::make_unique<GlobalAvgPool>());
  net.add(std::make_unique<Linear>(4 * width, classes, rng, "head"));
  return net;
}

Net make_linear_model(int in_dim, int classes, Rng& rng) {
  Net net;
  net.add(std::make_unique<Linear>(in_dim, classes, rng, "lin"));
  return net;
}

Net make_policy_backbone(int width, int in_ch, Rng& rng) {
  Net net;
  int c = width;
  int prev = in_ch;
  for (int b = 0; b < 4; ++b) {
    net.add(std::make_unique<Conv2d>(prev, c, rng, "b" + std::to_string(b + 1)));
    net.add(std::make_unique<ReLU>());
    net.add(std::make_unique<MaxPool2>());
    prev = c;
    if (b < 3) c *= 2;
  }
  net.add(std::make_unique<GlobalAvgPool>());
  return net;
}

int policy_feature_dim(int width) { return 8 * width; }

Net make_model(const std::string& spec, int in_ch, int in_h, int in_w,
               int classes, Rng& rng) {
  if (spec == "linear") return make_linear_model(in_ch * in_h * in_w, classes, rng);
  if (spec.rfind("cnn:", 0) == 0) {
    const int width = std::stoi(spec.substr(4));
    if (width < 1) throw ConfigError("model width must be >= 1, got " + spec);
    return make_small_cnn(width, in_ch, classes, rng);
  }
  throw ConfigError("unknown model spec '" + spec + "' (expected cnn:<width>|linear)");
}

}  // namespace aroid
