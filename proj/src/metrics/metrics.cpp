#include "mgcrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgcrack {

std::size_t ScoredPatches::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

void ScoredPatches::add(double score, std::uint8_t label) {
  scores.push_back(score);
  labels.push_back(label);
}

void ScoredPatches::validate() const {
  if (scores.empty()) throw std::invalid_argument("metrics: no scored patches");
  if (scores.size() != labels.size())
    throw std::invalid_argument("metrics: " + std::to_string(scores.size()) + " scores but " +
                                std::to_string(labels.size()) + " labels");
  for (double s : scores)
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("metrics: score outside [0, 1]");
  for (auto l : labels)
    if (l > 1) throw std::invalid_argument("metrics: labels must be 0 or 1");
}

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0 ? 2 * precision * recall / denom : 0.0;
}

PrecisionRecall precision_recall_f1(const ScoredPatches& s, double threshold) {
  s.validate();
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("metrics: threshold outside [0, 1]");
  PrecisionRecall r;
  Counts& c = r.counts;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool predicted = s.scores[i] > threshold;
    if (s.labels[i]) predicted ? ++c.tp : ++c.fn;
    else predicted ? ++c.fp : ++c.tn;
  }
  r.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

double average_precision(const ScoredPatches& s) {
  s.validate();
  const std::size_t total = s.positives();
  if (total == 0) throw NoPositivesError("average_precision: no positive labels, AP is undefined");
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  // Tied scores form one block: every positive in it gets the precision
  // measured after the whole block.
  double acc = 0;
  std::size_t hits = 0;
  for (std::size_t begin = 0; begin < order.size();) {
    std::size_t end = begin, block_hits = 0;
    while (end < order.size() && s.scores[order[end]] == s.scores[order[begin]]) block_hits += s.labels[order[end++]];
    hits += block_hits;
    acc += static_cast<double>(block_hits) * static_cast<double>(hits) / static_cast<double>(end);
    begin = end;
  }
  return acc / static_cast<double>(total);
}

std::vector<CurvePoint> pr_curve(const ScoredPatches& s, std::size_t n_points) {
  if (n_points < 2) throw std::invalid_argument("pr_curve: need at least 2 points");
  s.validate();
  std::vector<CurvePoint> out;
  out.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_points - 1);
    const PrecisionRecall pr = precision_recall_f1(s, t);
    out.push_back({t, pr.precision, pr.recall});
  }
  return out;
}

}  // namespace mgcrack
