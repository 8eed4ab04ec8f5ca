#pragma once

#include <map>
#include <string>
#include <vector>

#include "patchprint/dataset.hpp"

namespace patchprint {

struct ScoredSample {
  double score = 0.5;  // P(real)
  Label label = Label::real;
  std::string generator;
};

struct SubsetMetrics {
  double acc = 0.0;
  double ap = 0.0;
  int n = 0;
};

struct Metrics {
  double acc = 0.0;
  double map = 0.0;
  std::map<std::string, SubsetMetrics> per_subset;
  int n_real = 0;
  int n_fake = 0;
};

// Average precision with the given positive flags against descending
// scores: sort by score (ties keep input order), then mean of
// precision-at-rank over the positives. Returns 0 when there are none.
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);

// ACC at threshold 0.5 on P(real): predicted real iff score >= 0.5. AP is
// computed on fake-scores (1 - score) with positive class = fake, per
// generator tag of the fake samples; every real sample joins each tag's
// pool. mAP averages the per-tag APs; tags without fakes are skipped.
Metrics compute_metrics(const std::vector<ScoredSample>& scored);

// Deterministic JSON rendering of a Metrics value (sorted keys).
std::string metrics_to_json(const Metrics& m,
                            const std::map<std::string, std::string>& extra = {});

}  // namespace patchprint
