#include "subcr/eval.hpp"

#include "subcr/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace subcr {

namespace {

void check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores (" + std::to_string(scores.size()) + ") and labels (" +
                         std::to_string(labels.size()) + ") differ in length");
  }
  std::size_t positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  if (positives == 0 || positives == labels.size()) {
    throw UndefinedMetric("AUC needs at least one positive and one negative label");
  }
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  return order;
}

std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

double compute_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of (doubled) average ranks of the positives; doubling keeps it integral.
  std::uint64_t doubled_rank_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t doubled_avg = static_cast<std::uint64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) doubled_rank_sum += doubled_avg;
    }
    i = j;
  }
  std::uint64_t positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  const std::uint64_t negatives = labels.size() - positives;
  const std::uint64_t doubled_u = doubled_rank_sum - positives * (positives + 1);
  return static_cast<double>(doubled_u) / (2.0 * static_cast<double>(positives * negatives));
}

double trapezoid_area(std::span<const double> fpr, std::span<const double> tpr) {
  double area = 0.0;
  for (std::size_t i = 1; i < fpr.size(); ++i) area += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) * 0.5;
  return area;
}

RocResult compute_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_inputs(scores, labels);
  double positives = 0.0;
  for (auto l : labels) positives += l ? 1.0 : 0.0;
  const double negatives = static_cast<double>(labels.size()) - positives;

  RocResult roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);
  const auto order = descending_order(scores);
  double tp = 0.0;
  double fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    roc.thresholds.push_back(threshold);
    roc.tpr.push_back(tp / positives);
    roc.fpr.push_back(fp / negatives);
  }
  roc.auc = trapezoid_area(roc.fpr, roc.tpr);
  return roc;
}

std::string render_roc_svg(const RocResult& roc) {
  constexpr double kLeft = 60.0, kTop = 40.0, kSize = 400.0;
  auto x = [&](double fpr) { return fixed(kLeft + fpr * kSize); };
  auto y = [&](double tpr) { return fixed(kTop + (1.0 - tpr) * kSize); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"500\" viewBox=\"0 0 500 500\">\n"
      << "<rect width=\"500\" height=\"500\" fill=\"white\"/>\n"
      << "<text x=\"260\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << "ROC (AUC = " << fixed(roc.auc, 4) << ")</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kSize << "\" height=\"" << kSize
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    svg << "<line x1=\"" << x(v) << "\" y1=\"" << y(0) << "\" x2=\"" << x(v) << "\" y2=\"" << fixed(kTop + kSize + 5)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << x(v) << "\" y=\"" << fixed(kTop + kSize + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(v, 1) << "</text>\n"
        << "<line x1=\"" << fixed(kLeft - 5) << "\" y1=\"" << y(v) << "\" x2=\"" << x(0) << "\" y2=\"" << y(v)
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(kTop + (1.0 - v) * kSize + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(v, 1) << "</text>\n";
  }
  svg << "<text x=\"" << fixed(kLeft + kSize / 2) << "\" y=\"" << fixed(kTop + kSize + 42)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">False positive rate</text>\n"
      << "<text x=\"18\" y=\"" << fixed(kTop + kSize / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"13\" transform=\"rotate(-90 18 " << fixed(kTop + kSize / 2) << ")\">True positive rate</text>\n"
      << "<line x1=\"" << x(0) << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\"" << y(1)
      << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n"
      << "<polyline fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
    if (i) svg << ' ';
    svg << x(roc.fpr[i]) << ',' << y(roc.tpr[i]);
  }
  svg << "\"/>\n</svg>\n";
  return svg.str();
}

void emit_report(const RocResult& roc, const ScoreReport& report, const std::filesystem::path& out_dir,
                 const nlohmann::json& extra) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::ostringstream csv;
  csv << "fpr,tpr,threshold\n";
  for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
    csv << format_double(roc.fpr[i]) << ',' << format_double(roc.tpr[i]) << ','
        << (std::isinf(roc.thresholds[i]) ? std::string("inf") : format_double(roc.thresholds[i])) << '\n';
  }
  write_file(out_dir / "roc.csv", csv.str());

  nlohmann::json summary = extra;
  summary["auc"] = report.labels ? compute_auc(report.combined, *report.labels) : roc.auc;
  summary["roc_auc_trapezoid"] = roc.auc;
  summary["config_hash"] = report.config_hash;
  summary["seed"] = report.seed;
  summary["rounds"] = report.rounds;
  summary["low_round"] = report.low_round;
  summary["variant"] = to_string(report.variant);
  summary["num_nodes"] = report.combined.size();
  write_file(out_dir / "summary.json", summary.dump(2) + "\n");
  write_file(out_dir / "roc.svg", render_roc_svg(roc));
}

}  // namespace subcr
