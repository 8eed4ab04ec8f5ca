#include "patchprint/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "json.hpp"

#include "patchprint/errors.hpp"

namespace patchprint {

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size())
    throw ShapeMismatch("average_precision: score/label count mismatch");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  int tp = 0;
  int npos = 0;
  double acc = 0;
  for (size_t rank = 0; rank < order.size(); ++rank) {
    if (positive[order[rank]]) {
      ++tp;
      ++npos;
      acc += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return npos == 0 ? 0.0 : acc / npos;
}

Metrics compute_metrics(const std::vector<ScoredSample>& scored) {
  if (scored.empty()) throw EmptyInput("compute_metrics: no samples");
  Metrics m;
  int correct = 0;
  for (const auto& s : scored) {
    const Label pred = s.score >= 0.5 ? Label::real : Label::fake;
    if (pred == s.label) ++correct;
    if (s.label == Label::real) {
      ++m.n_real;
    } else {
      ++m.n_fake;
    }
  }
  m.acc = static_cast<double>(correct) / static_cast<double>(scored.size());

  std::vector<std::string> tags;
  for (const auto& s : scored)
    if (s.label == Label::fake) tags.push_back(s.generator);
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());

  double ap_sum = 0;
  for (const auto& tag : tags) {
    std::vector<double> fake_scores;
    std::vector<bool> positive;
    int sub_correct = 0, sub_n = 0;
    for (const auto& s : scored) {
      const bool member = s.label == Label::real || s.generator == tag;
      if (!member) continue;
      fake_scores.push_back(1.0 - s.score);
      positive.push_back(s.label == Label::fake);
      const Label pred = s.score >= 0.5 ? Label::real : Label::fake;
      if (pred == s.label) ++sub_correct;
      ++sub_n;
    }
    SubsetMetrics sm;
    sm.ap = average_precision(fake_scores, positive);
    sm.acc = static_cast<double>(sub_correct) / static_cast<double>(sub_n);
    sm.n = sub_n;
    m.per_subset.emplace(tag, sm);
    ap_sum += sm.ap;
  }
  m.map = tags.empty() ? 0.0 : ap_sum / static_cast<double>(tags.size());
  return m;
}

std::string metrics_to_json(const Metrics& m, const std::map<std::string, std::string>& extra) {
  nlohmann::json j;
  j["acc"] = m.acc;
  j["map"] = m.map;
  j["n_real"] = m.n_real;
  j["n_fake"] = m.n_fake;
  nlohmann::json subsets = nlohmann::json::object();
  for (const auto& [tag, sm] : m.per_subset) {
    subsets[tag] = {{"acc", sm.acc}, {"ap", sm.ap}, {"n", sm.n}};
  }
  j["per_subset"] = subsets;
  for (const auto& [k, v] : extra) j[k] = v;
  return j.dump(2) + "\n";
}

}  // namespace patchprint
