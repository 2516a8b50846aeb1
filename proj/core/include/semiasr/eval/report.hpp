// semiasr/eval/report.hpp
//
// Paired with-LM / no-LM evaluation and result tables.
//
// CSV header (fixed):
//   arm,labeled,unlabeled,ratio,dev_wer_lm,dev_wer_nolm,test_wer_lm,test_wer_nolm,baseline,dev_change_lm,test_change_lm,config_hash
// WERs are fractions (not percent) written with 17 significant digits so the
// change columns can be recomputed exactly. A missing arm has "absent" in every
// measured column. Changes are (base - new) / base against the row named in
// `baseline` (same labeled size); empty when there is no baseline.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semiasr/eval/wer.hpp"
#include "semiasr/json_util.hpp"

namespace semiasr::eval {

struct PairedWer {
  WerBreakdown with_lm;
  WerBreakdown no_lm;
  std::vector<std::string> hyps_with_lm;
  std::vector<std::string> hyps_no_lm;
};

/// Decodes every utterance both ways; `with_lm(i)` and `no_lm(i)` return the
/// transcript of utterance i. Both rows cover the same utterances.
PairedWer evaluate_arm(const std::vector<std::string>& references, const std::function<std::string(std::size_t)>& with_lm,
                       const std::function<std::string(std::size_t)>& no_lm, std::size_t threads = 1);

/// (base - now) / base. NaN when base is 0.
double relative_change(double base, double now);

struct ReportRow {
  std::string arm;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  double ratio = 0.0;
  bool absent = false;
  double dev_wer_lm = 0.0;
  double dev_wer_nolm = 0.0;
  double test_wer_lm = 0.0;
  double test_wer_nolm = 0.0;
  std::string baseline;  ///< arm name of the paired base row, or empty
  std::string config_hash;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  /// Base row of `row` (same labeled size, arm == row.baseline), or null.
  const ReportRow* baseline_of(const ReportRow& row) const;
};

std::string report_csv(const ExperimentReport& report);
Json report_json(const ExperimentReport& report);
/// Writes `<stem>.csv` and `<stem>.json`.
void emit_report(const ExperimentReport& report, const std::filesystem::path& stem);

/// Two-column whitespace-separated data (labeled size, WER) per arm, for plotting.
void write_gnuplot_data(const ExperimentReport& report, const std::filesystem::path& path);

}  // namespace semiasr::eval
