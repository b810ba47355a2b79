#include "aroid/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "aroid/errors.hpp"

namespace aroid {

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void Metrics::target_row(int epoch, int iter, double lr, double lambda,
                         double eps, double loss) {
  std::ostringstream s;
  s << "target," << epoch << ',' << iter << ',' << format_g(lr) << ','
    << format_g(lambda) << ',' << format_g(eps) << ',' << format_g(loss)
    << ",,,,,";
  rows_.push_back(s.str());
}

void Metrics::policy_row(int epoch, int iter, double surrogate,
                         double diversity, double total) {
  std::ostringstream s;
  s << "policy," << epoch << ',' << iter << ",,,,,,," << format_g(surrogate)
    << ',' << format_g(diversity) << ',' << format_g(total);
  rows_.push_back(s.str());
}

void Metrics::epoch_row(int epoch, double lambda, double eps, double clean_acc,
                        double robust_acc) {
  std::ostringstream s;
  s << "epoch," << epoch << ",,," << format_g(lambda) << ',' << format_g(eps)
    << ",," << format_g(clean_acc) << ',' << format_g(robust_acc) << ",,,";
  rows_.push_back(s.str());
}

std::string Metrics::csv() const {
  std::ostringstream s;
  s << "# config_fingerprint=" << fingerprint_ << " seed=" << seed_ << '\n';
  s << "kind,epoch,iter,lr,lambda,eps,target_loss,clean_acc,robust_acc,"
       "plc_surrogate,plc_diversity,plc_total\n";
  for (const auto& r : rows_) s << r << '\n';
  return s.str();
}

void Metrics::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write metrics CSV: " + path);
  os << csv();
}

}  // namespace aroid
