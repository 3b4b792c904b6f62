#include <fstream>

#include "mgcrack/harness.hpp"

namespace mgcrack {

namespace {

void append(ScoredPatches& dst, const PredictionGrid& grid, const std::vector<const PatchLabelGrid*>& labels) {
  const auto values = grid.value.values();
  const std::size_t per = values.size() / labels.size();
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n]->cells.size() != per) throw std::invalid_argument("score_samples: label grid does not match output");
    for (std::size_t i = 0; i < per; ++i) dst.add(values[n * per + i], labels[n]->cells[i]);
  }
}

}  // namespace

GridScores score_samples(const MGCrackNet& net, const std::vector<LabeledSample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw DataError("evaluation split is empty");
  if (batch_size == 0) throw std::invalid_argument("score_samples: batch_size must be >= 1");
  NoGradGuard no_grad;
  GridScores out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const Image*> images;
    std::vector<const PatchLabelGrid*> labels;
    for (std::size_t i = start; i < end; ++i) {
      images.push_back(&samples[i].image);
      labels.push_back(&samples[i].labels);
    }
    const NetworkOutput y = net.forward(to_batch(images));
    if (y.y3) append(out["y3"], *y.y3, labels);
    if (y.y4) append(out["y4"], *y.y4, labels);
    if (y.y5) append(out["y5"], *y.y5, labels);
    append(out["final"], y.final_grid, labels);
  }
  return out;
}

MetricsReport build_report(const GridScores& scores) {
  MetricsReport r;
  const auto final_it = scores.find("final");
  if (final_it == scores.end()) throw std::invalid_argument("build_report: no final grid");
  r.set("patches", static_cast<double>(final_it->second.size()));
  r.set("positives", static_cast<double>(final_it->second.positives()));
  r.set("threshold", 0.5);
  for (const auto& [name, s] : scores) {
    r.add_prf(name, precision_recall_f1(s, 0.5));
    if (s.positives() == 0)
      r.set(name + ".ap", "nan");
    else
      r.set(name + ".ap", average_precision(s));
  }
  return r;
}

EvalResult evaluate(const MGCrackNet& net, const std::vector<LabeledSample>& samples, std::size_t batch_size) {
  EvalResult result;
  result.scores = score_samples(net, samples, batch_size);
  result.report = build_report(result.scores);
  return result;
}

void write_eval(const std::filesystem::path& dir, const EvalResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  auto put = [&](const std::string& file, const std::string& text) {
    std::ofstream f(dir / file, std::ios::binary);
    if (!f || !(f << text)) throw std::runtime_error("cannot write " + (dir / file).string());
  };
  put("metrics.txt", result.report.text());
  for (const auto& [name, s] : result.scores) {
    if (s.positives() == 0) continue;
    const auto curve = pr_curve(s);
    put("pr_" + name + ".csv", curve_csv(curve));
    put("pr_" + name + ".svg", curve_svg(curve, name));
  }
}

}  // namespace mgcrack
