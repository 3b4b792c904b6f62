#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgcrack {

// Parallel lists: a probability in [0, 1] and a 0/1 label per patch.
struct ScoredPatches {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return scores.size(); }
  std::size_t positives() const;
  void add(double score, std::uint8_t label);
  // Throws std::invalid_argument on empty input, unequal lengths,
  // scores outside [0, 1] or labels other than 0/1.
  void validate() const;
};

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct PrecisionRecall {
  double precision = 0, recall = 0, f1 = 0;
  Counts counts;
};

// Harmonic mean; 0 when both are 0.
double f1_score(double precision, double recall);

// A score counts as positive when strictly greater than the threshold.
// Precision is 0 when nothing is predicted positive.
PrecisionRecall precision_recall_f1(const ScoredPatches& s, double threshold = 0.5);

// AP is undefined without a positive label.
class NoPositivesError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Mean over positives of the precision at their rank, ranking by descending
// score. Equal scores share one rank block (the precision after the block),
// so the value does not depend on input order and equals the step-wise area
// under the curve swept at every distinct score.
double average_precision(const ScoredPatches& s);

struct CurvePoint {
  double threshold = 0, precision = 0, recall = 0;
};

// n_points thresholds evenly spaced over [0, 1], ascending.
std::vector<CurvePoint> pr_curve(const ScoredPatches& s, std::size_t n_points = 101);

// ---------------------------------------------------------------------------
// Export

std::string curve_csv(const std::vector<CurvePoint>& curve);
std::string curve_svg(const std::vector<CurvePoint>& curve, const std::string& title);

// Round-trip exact decimal form of a double.
std::string format_number(double v);

// Ordered "key = value" lines.
class MetricsReport {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value) { set(key, format_number(value)); }
  void add_prf(const std::string& prefix, const PrecisionRecall& prf);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  // Throws std::out_of_range for a missing key.
  const std::string& get(const std::string& key) const;
  std::string text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace mgcrack
