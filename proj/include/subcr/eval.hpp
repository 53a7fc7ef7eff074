#pragma once

#include "subcr/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace subcr {

struct RocResult {
  /// Descending; the first entry is +infinity (nothing flagged).
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

/// Rank-based (Mann-Whitney) AUC with tied scores credited one half. Throws
/// UndefinedMetric unless both classes are present.
double compute_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// ROC over every distinct score threshold; `auc` is the trapezoidal area.
RocResult compute_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

double trapezoid_area(std::span<const double> fpr, std::span<const double> tpr);

/// Writes roc.csv (fpr,tpr,threshold), summary.json and roc.svg into `out_dir`.
/// `extra` entries are merged into summary.json (e.g. the effective config).
void emit_report(const RocResult& roc, const ScoreReport& report, const std::filesystem::path& out_dir,
                 const nlohmann::json& extra = nlohmann::json::object());

std::string render_roc_svg(const RocResult& roc);

}  // namespace subcr
