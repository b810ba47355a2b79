#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aroid/rng.hpp"
#include "aroid/tensor.hpp"

namespace aroid {

/// Mutable view over one parameter blob and its gradient accumulator.
struct ParamView {
  float* w = nullptr;
  float* g = nullptr;
  size_t n = 0;
  std::string name;
};

class Layer {
 public:
  virtual ~Layer() = default;
  /// Runs the layer; caches whatever backward() needs.
  virtual Batch forward(const Batch& x) = 0;
  /// Propagates dy from the last forward(). Accumulates parameter gradients
  /// when need_pg is set; returns dx only when need_dx is set.
  virtual Batch backward(const Batch& dy, bool need_dx, bool need_pg) = 0;
  virtual std::vector<ParamView> params() { return {}; }
  virtual std::string desc() const = 0;
};

class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, Rng& rng, const std::string& name = "conv");
  Batch forward(const Batch& x) override;
  Batch backward(const Batch& dy, bool need_dx, bool need_pg) override;
  std::vector<ParamView> params() override;
  std::string desc() const override;

 private:
  int in_ch_, out_ch_;
  std::string name_;
  std::vector<float> w_, b_, gw_, gb_;
  Batch x_;  // cached input
};

class ReLU : public Layer {
 public:
  Batch forward(const Batch& x) override;
  Batch backward(const Batch& dy, bool need_dx, bool need_pg) override;
  std::string desc() const override { return "relu"; }

 private:
  Batch x_;
};

class MaxPool2 : public Layer {
 public:
  Batch forward(const Batch& x) override;
  Batch backward(const Batch& dy, bool need_dx, bool need_pg) override;
  std::string desc() const override { return "maxpool2"; }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<int> argmax_;
};

class GlobalAvgPool : public Layer {
 public:
  Batch forward(const Batch& x) override;
  Batch backward(const Batch& dy, bool need_dx, bool need_pg) override;
  std::string desc() const override { return "gap"; }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

/// Fully connected layer; flattens whatever comes in to n x (c*h*w).
class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, Rng& rng, const std::string& name = "fc");
  Batch forward(const Batch& x) override;
  Batch backward(const Batch& dy, bool need_dx, bool need_pg) override;
  std::vector<ParamView> params() override;
  std::string desc() const override;
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

 private:
  int in_dim_, out_dim_;
  std::string name_;
  std::vector<float> w_, b_, gw_, gb_;
  Batch x_;
  int x_n_ = 0, x_c_ = 0, x_h_ = 0, x_w_ = 0;
};

/// A plain feed-forward stack.
class Net {
 public:
  Net() = default;
  Net(Net&&) = default;
  Net& operator=(Net&&) = default;

  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }
  Batch forward(const Batch& x);
  Batch backward(const Batch& dy, bool need_dx, bool need_pg);
  std::vector<ParamView> params();
  void zero_grad();
  size_t num_params();

  std::vector<float> get_params();
  void set_params(const std::vector<float>& flat);
  std::uint64_t params_checksum();
  std::string arch() const;
  bool empty() const { return layers_.empty(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Per-sample softmax cross-entropy. dlogits = grad_scale * (softmax - onehot).
struct CeResult {
  std::vector<double> loss;
  double mean_loss = 0.0;
  Batch dlogits;
};
CeResult softmax_ce(const Batch& logits, const std::vector<int>& labels,
                    double grad_scale = 1.0);

std::vector<int> predict_classes(const Batch& logits);

/// Cross-entropy losses only (no gradient buffer).
std::vector<double> ce_losses(Net& net, const Batch& x,
                              const std::vector<int>& labels);

/// Gradient of the per-sample cross-entropy w.r.t. the input pixels. Parameter
/// gradients are not touched.
struct InputGrad {
  std::vector<double> loss;
  Batch dx;
};
InputGrad ce_input_grad(Net& net, const Batch& x, const std::vector<int>& labels);

/// SGD with momentum and weight decay (v = mu*v + g + wd*w; w -= lr*v).
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay)
      : lr(lr), momentum(momentum), weight_decay(weight_decay) {}
  void step(const std::vector<ParamView>& ps);
  double lr;
  double momentum;
  double weight_decay;

 private:
  std::vector<std::vector<float>> vel_;
};

double global_grad_norm(const std::vector<ParamView>& ps);
/// Scales gradients so their global L2 norm is at most max_norm. Returns the
/// pre-clip norm.
double clip_grad_norm(const std::vector<ParamView>& ps, double max_norm);

// Model factories. Widths refer to first-stage channels.
Net make_small_cnn(int width, int in_ch, int classes, Rng& rng);
Net make_linear_model(int in_dim, int classes, Rng& rng);
/// 4 conv blocks + global average pool; feature width is 8*width.
Net make_policy_backbone(int width, int in_ch, Rng& rng);
int policy_feature_dim(int width);

/// Builds a model from a spec string: "cnn:<width>" or "linear".
Net make_model(const std::string& spec, int in_ch, int in_h, int in_w,
               int classes, Rng& rng);

}  // namespace aroid
