#include "aroid/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "aroid/errors.hpp"
#include "aroid/metrics.hpp"
#include "aroid/policy.hpp"

namespace aroid {

EvalResult evaluate(Net& model, const Dataset& ds, const AttackConfig& attack,
                    Rng& rng, int batch_size, int subset) {
  if (ds.images.empty()) throw Error("evaluate: empty split");
  const size_t n = subset > 0 ? std::min<size_t>(subset, ds.size()) : ds.size();
  size_t clean_ok = 0, robust_ok = 0;
  for (size_t b = 0; b < n; b += batch_size) {
    const size_t e = std::min(n, b + batch_size);
    const Batch x = make_batch(ds.images, b, e);
    std::vector<int> labels(ds.labels.begin() + b, ds.labels.begin() + e);
    const auto clean_pred = predict_classes(model.forward(x));
    const Batch adv = pgd(model, x, labels, attack, rng);
    const auto adv_pred = predict_classes(model.forward(adv));
    for (size_t i = 0; i < labels.size(); ++i) {
      clean_ok += (clean_pred[i] == labels[i]);
      robust_ok += (adv_pred[i] == labels[i]);
    }
  }
  return {static_cast<double>(clean_ok) / n, static_cast<double>(robust_ok) / n};
}

std::vector<PolicyDistRow> export_policy_distributions(
    const PolicyCheckpointLog& log, const AugmentationSpace& space,
    const std::vector<Image>& images, const std::vector<int>& epochs) {
  if (log.head_sizes != space.head_sizes())
    throw ConfigError("policy log space signature does not match space");
  if (images.empty()) throw Error("export: no probe images");

  Rng dummy(0);
  PolicyModel model(space, log.policy_width, log.in_ch, dummy);

  std::vector<int> all_idx(images.size());
  for (size_t i = 0; i < images.size(); ++i) all_idx[i] = static_cast<int>(i);
  const Batch x = make_batch(images, all_idx);

  std::vector<PolicyDistRow> rows;
  for (int epoch : epochs) {
    model.set_params(log.at_epoch(epoch));
    const auto outs = model.forward(x);
    for (size_t img = 0; img < images.size(); ++img) {
      for (int h = 0; h < space.head_count(); ++h) {
        const Head& head = space.heads[h];
        const auto& p = outs[img].probs[h];
        if (head.kind == HeadKind::ColorShape) {
          for (const auto& g : head.groups) {
            double sum = 0.0;
            for (int idx : g.indices) sum += p[idx];
            rows.push_back({epoch, static_cast<int>(img), head.name, g.name, sum});
          }
        } else {
          for (int idx = 0; idx < head.size(); ++idx)
            rows.push_back({epoch, static_cast<int>(img), head.name,
                            head.entries[idx].label(), p[idx]});
        }
      }
    }
  }
  return rows;
}

void write_policy_dist_csv(const std::vector<PolicyDistRow>& rows,
                           std::ostream& os) {
  os << "epoch,image_id,head,op_type,probability\n";
  for (const auto& r : rows)
    os << r.epoch << ',' << r.image_id << ',' << r.head << ',' << r.op_type
       << ',' << format_g(r.probability) << '\n';
}

namespace {

std::string bar_color(size_t i, size_t total) {
  const double hue = 360.0 * i / std::max<size_t>(total, 1);
  std::ostringstream s;
  s << "hsl(" << static_cast<int>(hue) << ",65%,55%)";
  return s.str();
}

}  // namespace

void write_policy_dist_svg(const std::vector<PolicyDistRow>& rows,
                           std::ostream& os) {
  // Group rows per head, one stacked bar per (epoch, image).
  std::map<std::string, std::vector<const PolicyDistRow*>> by_head;
  for (const auto& r : rows) by_head[r.head].push_back(&r);

  const int bar_w = 14, bar_h = 160, gap = 4, label_h = 28, chart_gap = 40;
  int chart_y = 10;
  std::ostringstream body;
  int width_needed = 0;

  for (auto& [head, hrows] : by_head) {
    std::vector<std::pair<int, int>> bars;  // (epoch, image)
    std::vector<std::string> types;
    for (auto* r : hrows) {
      if (bars.empty() || bars.back() != std::make_pair(r->epoch, r->image_id))
        bars.emplace_back(r->epoch, r->image_id);
      if (std::find(types.begin(), types.end(), r->op_type) == types.end())
        types.push_back(r->op_type);
    }
    body << "<text x='4' y='" << chart_y + 12 << "' font-size='12'>" << head
         << "</text>\n";
    size_t bar_i = 0;
    double y_acc = 0.0;
    std::pair<int, int> cur{-1, -1};
    for (auto* r : hrows) {
      if (std::make_pair(r->epoch, r->image_id) != cur) {
        cur = {r->epoch, r->image_id};
        y_acc = 0.0;
        if (bar_i || cur != bars.front()) bar_i = static_cast<size_t>(
            std::find(bars.begin(), bars.end(), cur) - bars.begin());
      }
      const double hpx = r->probability * bar_h;
      const size_t type_i = static_cast<size_t>(
          std::find(types.begin(), types.end(), r->op_type) - types.begin());
      body << "<rect x='" << 4 + bar_i * (bar_w + gap) << "' y='"
           << chart_y + label_h + (bar_h - y_acc - hpx) << "' width='" << bar_w
           << "' height='" << hpx << "' fill='" << bar_color(type_i, types.size())
           << "'><title>" << r->op_type << " p=" << r->probability
           << " (epoch " << r->epoch << ", image " << r->image_id
           << ")</title></rect>\n";
      y_acc += hpx;
    }
    width_needed = std::max(
        width_needed, static_cast<int>(8 + bars.size() * (bar_w + gap)));
    chart_y += label_h + bar_h + chart_gap;
  }
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='"
     << std::max(width_needed, 200) << "' height='" << chart_y
     << "' font-family='sans-serif'>\n"
     << body.str() << "</svg>\n";
}

}  // namespace aroid
