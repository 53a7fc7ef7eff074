#include "subcr/error.hpp"
#include "subcr/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

using namespace subcr;
using namespace subcr::testing;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

Instance random_instance(Rng& rng, std::size_t max_size, bool ties) {
  Instance inst;
  const auto n = 2 + rng.below(max_size - 1);
  for (std::size_t i = 0; i < n; ++i) {
    inst.scores.push_back(ties ? static_cast<double>(rng.below(6)) : rng.uniform());
    inst.labels.push_back(static_cast<std::uint8_t>(rng.below(2)));
  }
  inst.labels[0] = 0;
  inst.labels[1] = 1;
  return inst;
}

}  // namespace

TEST_CASE("auc examples") {
  const std::vector<std::uint8_t> labels{0, 0, 1, 1};
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9};
  CHECK(compute_auc(perfect, labels) == 1.0);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  CHECK(compute_auc(flat, labels) == 0.5);
  const std::vector<std::uint8_t> one_class{1, 1, 1, 1};
  CHECK_THROWS_AS(compute_auc(perfect, one_class), UndefinedMetric);
  CHECK_THROWS_AS(compute_roc(perfect, one_class), UndefinedMetric);
}

TEST_CASE("auc equals the pairwise oracle exactly") {
  Rng rng(30);
  for (int i = 0; i < 300; ++i) {
    const auto inst = random_instance(rng, 30, i % 2 == 0);
    CHECK(compute_auc(inst.scores, inst.labels) == brute_force_auc(inst.scores, inst.labels));
  }
}

TEST_CASE("roc properties") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const auto inst = random_instance(rng, 50, i % 3 == 0);
    const auto roc = compute_roc(inst.scores, inst.labels);
    CHECK(std::abs(roc.auc - compute_auc(inst.scores, inst.labels)) < 1e-9);
    CHECK(std::abs(roc.auc - trapezoid_area(roc.fpr, roc.tpr)) < 1e-12);
    CHECK(roc.fpr.front() == 0.0);
    CHECK(roc.tpr.front() == 0.0);
    CHECK(roc.fpr.back() == 1.0);
    CHECK(roc.tpr.back() == 1.0);
    CHECK(std::isinf(roc.thresholds.front()));
    for (std::size_t k = 1; k < roc.fpr.size(); ++k) {
      CHECK(roc.fpr[k] >= roc.fpr[k - 1]);
      CHECK(roc.tpr[k] >= roc.tpr[k - 1]);
      CHECK(roc.thresholds[k] < roc.thresholds[k - 1]);
    }
  }
}

TEST_CASE("roc examples") {
  const std::vector<std::uint8_t> labels{0, 0, 1, 1};
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9};
  const auto roc = compute_roc(perfect, labels);
  bool corner = false;
  for (std::size_t k = 0; k < roc.fpr.size(); ++k) corner |= roc.fpr[k] == 0.0 && roc.tpr[k] == 1.0;
  CHECK(corner);

  const std::vector<double> reversed{0.9, 0.8, 0.2, 0.1};
  const std::vector<double> mixed{0.1, 0.85, 0.8, 0.9};
  std::vector<double> neg;
  for (double s : mixed) neg.push_back(-s);
  CHECK(compute_roc(neg, labels).auc == doctest::Approx(1.0 - compute_roc(mixed, labels).auc));
  CHECK(compute_auc(reversed, labels) == 0.0);

  const std::vector<double> dup{0.5, 0.5, 0.5, 0.9};
  CHECK(compute_roc(dup, labels).thresholds.size() == 3);  // +inf, 0.9, 0.5
}

TEST_CASE("auc is invariant under monotone transforms") {
  Rng rng(32);
  for (int i = 0; i < 50; ++i) {
    const auto inst = random_instance(rng, 40, false);
    std::vector<double> t;
    for (double s : inst.scores) t.push_back(std::exp(3.0 * s) - 7.0);
    CHECK(compute_auc(t, inst.labels) == compute_auc(inst.scores, inst.labels));
    std::vector<double> neg;
    for (double s : inst.scores) neg.push_back(-s);
    CHECK(compute_auc(inst.scores, inst.labels) + compute_auc(neg, inst.labels) == doctest::Approx(1.0));
  }
}

TEST_CASE("emit_report writes three deterministic files") {
  const auto dir = temp_dir("emit");
  ScoreReport report;
  report.combined = {0.1, 0.7, 0.4, 0.9};
  report.contrastive = report.combined;
  report.reconstruction = report.combined;
  report.labels = std::vector<std::uint8_t>{0, 1, 0, 1};
  report.config_hash = "abc";
  report.seed = 3;
  report.rounds = 300;
  const auto roc = compute_roc(report.combined, *report.labels);
  emit_report(roc, report, dir / "a");
  emit_report(roc, report, dir / "b");
  for (const char* f : {"roc.csv", "summary.json", "roc.svg"}) {
    CHECK(std::filesystem::exists(dir / "a" / f));
    CHECK(read_text(dir / "a" / f) == read_text(dir / "b" / f));
  }
  const auto summary = nlohmann::json::parse(read_text(dir / "a" / "summary.json"));
  CHECK(summary["auc"].get<double>() == compute_auc(report.combined, *report.labels));
  CHECK(summary["config_hash"] == "abc");
  CHECK(summary["seed"] == 3);
  CHECK(summary["rounds"] == 300);
  CHECK(read_text(dir / "a" / "roc.csv").rfind("fpr,tpr,threshold\n", 0) == 0);
  const auto svg = read_text(dir / "a" / "roc.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("False positive rate") != std::string::npos);
}
