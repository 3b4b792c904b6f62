#include <array>
#include <charconv>
#include <sstream>
#include <stdexcept>

#include "mgcrack/metrics.hpp"

namespace mgcrack {

std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : curve)
    out += format_number(p.threshold) + "," + format_number(p.precision) + "," + format_number(p.recall) + "\n";
  return out;
}

std::string curve_svg(const std::vector<CurvePoint>& curve, const std::string& title) {
  constexpr double size = 320, margin = 40;
  auto px = [&](double recall) { return margin + recall * size; };
  auto py = [&](double precision) { return margin + (1.0 - precision) * size; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
     << size + 2 * margin << "\">\n"
     << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
     << "\" fill=\"none\" stroke=\"#888\"/>\n"
     << "<text x=\"" << margin << "\" y=\"" << margin / 2 << "\" font-size=\"14\">" << title << "</text>\n"
     << "<text x=\"" << margin + size / 2 << "\" y=\"" << size + 1.75 * margin
     << "\" font-size=\"12\" text-anchor=\"middle\">recall</text>\n"
     << "<text x=\"" << margin / 3 << "\" y=\"" << margin + size / 2
     << "\" font-size=\"12\" transform=\"rotate(-90 " << margin / 3 << " " << margin + size / 2
     << ")\" text-anchor=\"middle\">precision</text>\n"
     << "<polyline fill=\"none\" stroke=\"#c03\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.size(); ++i)
    os << (i ? " " : "") << format_number(px(curve[i].recall)) << "," << format_number(py(curve[i].precision));
  os << "\"/>\n</svg>\n";
  return os.str();
}

void MetricsReport::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void MetricsReport::add_prf(const std::string& prefix, const PrecisionRecall& prf) {
  set(prefix + ".precision", prf.precision);
  set(prefix + ".recall", prf.recall);
  set(prefix + ".f1", prf.f1);
  set(prefix + ".tp", std::to_string(prf.counts.tp));
  set(prefix + ".fp", std::to_string(prf.counts.fp));
  set(prefix + ".fn", std::to_string(prf.counts.fn));
  set(prefix + ".tn", std::to_string(prf.counts.tn));
}

const std::string& MetricsReport::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw std::out_of_range("metrics report has no key '" + key + "'");
}

std::string MetricsReport::text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

}  // namespace mgcrack
