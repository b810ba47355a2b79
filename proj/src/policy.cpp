#include "aroid/policy.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "aroid/errors.hpp"

namespace aroid {

std::vector<double> softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double l : logits) m = std::max(m, l);
  double se = 0.0;
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    se += p[i];
  }
  for (auto& v : p) v /= se;
  return p;
}

PolicyOutput policy_output_from_logits(std::vector<std::vector<double>> logits) {
  PolicyOutput out;
  out.probs.reserve(logits.size());
  for (const auto& l : logits) out.probs.push_back(softmax(l));
  out.logits = std::move(logits);
  return out;
}

double log_prob_of(const PolicyOutput& out, const TrajectoryCode& code) {
  if (code.idx.size() != out.probs.size())
    throw CatalogError("code/head count mismatch in log_prob_of");
  double lp = 0.0;
  for (size_t h = 0; h < code.idx.size(); ++h) {
    const int i = code.idx[h];
    if (i < 0 || i >= static_cast<int>(out.probs[h].size()))
      throw CatalogError("sub-policy index out of range in log_prob_of");
    const double p = out.probs[h][i];
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    lp += std::log(p);
  }
  return lp;
}

std::vector<Trajectory> sample_trajectories(const PolicyOutput& out, int T,
                                            Rng& rng) {
  std::vector<Trajectory> trajs(T);
  for (int t = 0; t < T; ++t) {
    TrajectoryCode code;
    code.idx.resize(out.probs.size());
    for (size_t h = 0; h < out.probs.size(); ++h) {
      const auto& p = out.probs[h];
      const double u = rng.uniform();
      double cum = 0.0;
      int pick = static_cast<int>(p.size()) - 1;
      for (size_t i = 0; i < p.size(); ++i) {
        cum += p[i];
        if (u < cum) {
          pick = static_cast<int>(i);
          break;
        }
      }
      code.idx[h] = pick;
    }
    trajs[t].log_prob = log_prob_of(out, code);
    trajs[t].code = std::move(code);
  }
  return trajs;
}

// ---------------------------------------------------------------------------

PolicyModel::PolicyModel(const AugmentationSpace& space, int width, int in_ch,
                         Rng& rng)
    : head_sizes_(space.head_sizes()), width_(width), in_ch_(in_ch),
      backbone_(make_policy_backbone(width, in_ch, rng)) {
  const int feat = policy_feature_dim(width);
  heads_.reserve(head_sizes_.size());
  for (size_t h = 0; h < head_sizes_.size(); ++h) {
    heads_.emplace_back(feat, head_sizes_[h], rng, "head" + std::to_string(h));
    // zero-init head projections: the fresh policy is exactly uniform per
    // head, and early backbone drift cannot scramble the big heads
    for (auto& p : heads_.back().params()) std::fill(p.w, p.w + p.n, 0.f);
  }
}

std::vector<PolicyOutput> PolicyModel::forward(const Batch& x) {
  if (x.n < 1) throw Error("policy forward: empty batch");
  const Batch feat = backbone_.forward(x);
  last_n_ = x.n;
  std::vector<Batch> head_logits;
  head_logits.reserve(heads_.size());
  for (auto& head : heads_) head_logits.push_back(head.forward(feat));
  std::vector<PolicyOutput> outs(x.n);
  for (int i = 0; i < x.n; ++i) {
    std::vector<std::vector<double>> logits(heads_.size());
    for (size_t h = 0; h < heads_.size(); ++h) {
      const Batch& hl = head_logits[h];
      logits[h].assign(hl.v.begin() + static_cast<size_t>(i) * hl.c,
                       hl.v.begin() + static_cast<size_t>(i + 1) * hl.c);
    }
    outs[i] = policy_output_from_logits(std::move(logits));
  }
  return outs;
}

void PolicyModel::backward(
    const std::vector<std::vector<std::vector<double>>>& dlogits) {
  if (static_cast<int>(dlogits.size()) != last_n_)
    throw Error("policy backward: batch size mismatch");
  const int feat = policy_feature_dim(width_);
  Batch dfeat(last_n_, feat, 1, 1);
  for (size_t h = 0; h < heads_.size(); ++h) {
    Batch dy(last_n_, head_sizes_[h], 1, 1);
    for (int i = 0; i < last_n_; ++i)
      for (int k = 0; k < head_sizes_[h]; ++k)
        dy.v[static_cast<size_t>(i) * head_sizes_[h] + k] =
            static_cast<float>(dlogits[i][h][k]);
    const Batch dh = heads_[h].backward(dy, /*need_dx=*/true, /*need_pg=*/true);
    for (size_t j = 0; j < dfeat.v.size(); ++j) dfeat.v[j] += dh.v[j];
  }
  backbone_.backward(dfeat, /*need_dx=*/false, /*need_pg=*/true);
}

std::vector<ParamView> PolicyModel::params() {
  std::vector<ParamView> out = backbone_.params();
  for (auto& h : heads_)
    for (auto& p : h.params()) out.push_back(p);
  return out;
}

void PolicyModel::zero_grad() {
  for (auto& p : params()) std::fill(p.g, p.g + p.n, 0.f);
}

std::vector<float> PolicyModel::get_params() {
  std::vector<float> flat;
  for (auto& p : params()) flat.insert(flat.end(), p.w, p.w + p.n);
  return flat;
}

void PolicyModel::set_params(const std::vector<float>& flat) {
  auto ps = params();
  size_t total = 0;
  for (auto& p : ps) total += p.n;
  if (flat.size() != total)
    throw Error("policy parameter blob size mismatch");
  size_t off = 0;
  for (auto& p : ps) {
    std::copy(flat.begin() + off, flat.begin() + off + p.n, p.w);
    off += p.n;
  }
}

std::uint64_t PolicyModel::params_checksum() {
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

// ---------------------------------------------------------------------------

namespace {
constexpr char kPolicyMagic[8] = {'A', 'R', 'P', 'C', '1', '\n', 0, 0};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_policy_checkpoint(const std::string& path, const PolicyModel& model,
                            const std::vector<float>& params, int epoch,
                            const std::string& fingerprint) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write policy checkpoint: " + path);
  os.write(kPolicyMagic, sizeof(kPolicyMagic));
  const std::int32_t heads = static_cast<std::int32_t>(model.head_sizes().size());
  write_pod(os, heads);
  for (int s : model.head_sizes()) write_pod(os, static_cast<std::int32_t>(s));
  write_pod(os, static_cast<std::int32_t>(model.width()));
  write_pod(os, static_cast<std::int32_t>(model.in_ch()));
  write_pod(os, static_cast<std::int32_t>(epoch));
  const std::int32_t flen = static_cast<std::int32_t>(fingerprint.size());
  write_pod(os, flen);
  os.write(fingerprint.data(), flen);
  const std::int64_t n = static_cast<std::int64_t>(params.size());
  write_pod(os, n);
  os.write(reinterpret_cast<const char*>(params.data()),
           static_cast<std::streamsize>(params.size() * sizeof(float)));
}

PolicyCheckpoint load_policy_checkpoint(const std::string& path,
                                        const std::vector<int>& expect_head_sizes) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read policy checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kPolicyMagic, sizeof(magic)) != 0)
    throw Error("not a policy checkpoint: " + path);
  PolicyCheckpoint ck;
  std::int32_t heads = 0;
  read_pod(is, heads);
  ck.head_sizes.resize(heads);
  for (auto& s : ck.head_sizes) {
    std::int32_t v;
    read_pod(is, v);
    s = v;
  }
  std::int32_t width, in_ch, epoch, flen;
  read_pod(is, width);
  read_pod(is, in_ch);
  read_pod(is, epoch);
  read_pod(is, flen);
  ck.width = width;
  ck.in_ch = in_ch;
  ck.epoch = epoch;
  ck.fingerprint.resize(flen);
  is.read(ck.fingerprint.data(), flen);
  std::int64_t n = 0;
  read_pod(is, n);
  ck.params.resize(n);
  is.read(reinterpret_cast<char*>(ck.params.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!is) throw Error("truncated policy checkpoint: " + path);
  if (!expect_head_sizes.empty() && ck.head_sizes != expect_head_sizes)
    throw ConfigError("policy checkpoint space signature mismatch for " + path);
  return ck;
}

}  // namespace aroid
