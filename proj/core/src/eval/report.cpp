// eval/report.cpp
#include "semiasr/eval/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "semiasr/error.hpp"
#include "semiasr/util.hpp"

namespace semiasr::eval {

PairedWer evaluate_arm(const std::vector<std::string>& references, const std::function<std::string(std::size_t)>& with_lm,
                       const std::function<std::string(std::size_t)>& no_lm, std::size_t threads) {
  PairedWer out;
  out.hyps_with_lm.resize(references.size());
  out.hyps_no_lm.resize(references.size());
  parallel_for(references.size(), threads, [&](std::size_t i) {
    out.hyps_with_lm[i] = with_lm(i);
    out.hyps_no_lm[i] = no_lm(i);
  });
  out.with_lm = corpus_wer(references, out.hyps_with_lm);
  out.no_lm = corpus_wer(references, out.hyps_no_lm);
  return out;
}

double relative_change(double base, double now) {
  if (base == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (base - now) / base;
}

const ReportRow* ExperimentReport::baseline_of(const ReportRow& row) const {
  if (row.baseline.empty()) return nullptr;
  for (const auto& r : rows)
    if (r.arm == row.baseline && r.labeled == row.labeled) return &r;
  return nullptr;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

struct Changes {
  std::optional<double> dev;
  std::optional<double> test;
};

Changes changes_of(const ExperimentReport& report, const ReportRow& row) {
  Changes c;
  const ReportRow* base = report.baseline_of(row);
  if (!base || base->absent || row.absent) return c;
  c.dev = relative_change(base->dev_wer_lm, row.dev_wer_lm);
  c.test = relative_change(base->test_wer_lm, row.test_wer_lm);
  return c;
}

}  // namespace

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "arm,labeled,unlabeled,ratio,dev_wer_lm,dev_wer_nolm,test_wer_lm,test_wer_nolm,baseline,dev_change_lm,"
         "test_change_lm,config_hash\n";
  for (const auto& r : report.rows) {
    out << r.arm << ',' << r.labeled << ',' << r.unlabeled << ',' << num(r.ratio) << ',';
    if (r.absent) {
      out << "absent,absent,absent,absent," << r.baseline << ",absent,absent,";
    } else {
      const Changes c = changes_of(report, r);
      out << num(r.dev_wer_lm) << ',' << num(r.dev_wer_nolm) << ',' << num(r.test_wer_lm) << ','
          << num(r.test_wer_nolm) << ',' << r.baseline << ',' << (c.dev ? num(*c.dev) : "") << ','
          << (c.test ? num(*c.test) : "") << ',';
    }
    out << r.config_hash << '\n';
  }
  return out.str();
}

Json report_json(const ExperimentReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json j{{"arm", r.arm}, {"labeled", r.labeled}, {"unlabeled", r.unlabeled}, {"ratio", r.ratio},
           {"baseline", r.baseline}, {"config_hash", r.config_hash}};
    if (r.absent) {
      j["status"] = "absent";
    } else {
      j["status"] = "ok";
      j["dev_wer_lm"] = r.dev_wer_lm;
      j["dev_wer_nolm"] = r.dev_wer_nolm;
      j["test_wer_lm"] = r.test_wer_lm;
      j["test_wer_nolm"] = r.test_wer_nolm;
      const Changes c = changes_of(report, r);
      if (c.dev && !std::isnan(*c.dev)) j["dev_change_lm"] = *c.dev;
      if (c.test && !std::isnan(*c.test)) j["test_change_lm"] = *c.test;
    }
    rows.push_back(std::move(j));
  }
  return {{"rows", rows}};
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& stem) {
  const std::filesystem::path csv = stem.string() + ".csv";
  std::ofstream out(csv);
  if (!out) throw IoError("cannot write " + csv.string());
  out << report_csv(report);
  if (!out) throw IoError("failed writing " + csv.string());
  write_json_file(stem.string() + ".json", report_json(report));
}

void write_gnuplot_data(const ExperimentReport& report, const std::filesystem::path& path) {
  std::map<std::string, std::vector<const ReportRow*>> by_arm;
  std::vector<std::string> order;
  for (const auto& r : report.rows) {
    if (r.absent) continue;
    if (!by_arm.count(r.arm)) order.push_back(r.arm);
    by_arm[r.arm].push_back(&r);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (const auto& arm : order) {
    out << "# " << arm << "\n# labeled dev_wer_lm test_wer_lm\n";
    for (const ReportRow* r : by_arm[arm]) out << r->labeled << ' ' << r->dev_wer_lm << ' ' << r->test_wer_lm << '\n';
    out << "\n\n";
  }
}

}  // namespace semiasr::eval
