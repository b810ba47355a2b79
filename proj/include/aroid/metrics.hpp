#pragma once

#include <string>
#include <vector>

namespace aroid {

/// Append-only metrics table with deterministic formatting, so identical runs
/// produce byte-identical CSVs. Row kinds: "target" (per-iteration loss),
/// "policy" (per-update loss breakdown), "epoch" (end-of-epoch evaluation).
class Metrics {
 public:
  explicit Metrics(std::string fingerprint = "", std::uint64_t seed = 0)
      : fingerprint_(std::move(fingerprint)), seed_(seed) {}

  void target_row(int epoch, int iter, double lr, double lambda, double eps,
                  double loss);
  void policy_row(int epoch, int iter, double surrogate, double diversity,
                  double total);
  void epoch_row(int epoch, double lambda, double eps, double clean_acc,
                 double robust_acc);

  std::string csv() const;
  void save(const std::string& path) const;
  size_t rows() const { return rows_.size(); }

 private:
  std::string fingerprint_;
  std::uint64_t seed_;
  std::vector<std::string> rows_;
};

std::string format_g(double v);

}  // namespace aroid
