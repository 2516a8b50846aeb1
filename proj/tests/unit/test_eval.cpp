// tests/unit/test_eval.cpp
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "semiasr/error.hpp"
#include "semiasr/eval/report.hpp"
#include "semiasr/eval/wer.hpp"
#include "semiasr/json_util.hpp"
#include "semiasr/util.hpp"
#include "test_util.hpp"

namespace semiasr::eval {
namespace {

using Words = std::vector<std::string>;

/// Edit distance straight from its recursive definition.
std::size_t edit_distance(const Words& a, std::size_t i, const Words& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = edit_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  const std::size_t del = edit_distance(a, i + 1, b, j) + 1;
  const std::size_t ins = edit_distance(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

TEST(Wer, IdenticalIsZero) {
  const auto w = wer("a b c d", "a b c d");
  EXPECT_EQ(w.errors(), 0u);
  EXPECT_EQ(w.wer(), 0.0);
  EXPECT_EQ(w.reference_words, 4u);
}

TEST(Wer, SingleDeletion) {
  const auto w = wer("a b c", "a c");
  EXPECT_EQ(w.deletions, 1u);
  EXPECT_EQ(w.substitutions + w.insertions, 0u);
  EXPECT_DOUBLE_EQ(w.wer(), 1.0 / 3.0);
}

TEST(Wer, TieBreakPrefersSubstitution) {
  const auto a = wer("a b", "c");
  EXPECT_EQ(a.substitutions, 1u);
  EXPECT_EQ(a.deletions, 1u);
  const auto b = wer("a", "b c");
  EXPECT_EQ(b.substitutions, 1u);
  EXPECT_EQ(b.insertions, 1u);
  EXPECT_DOUBLE_EQ(wer("a", "").wer(), 1.0);
  EXPECT_DOUBLE_EQ(wer("a", "b c d").wer(), 3.0);
}

TEST(Wer, RandomPairsMatchBruteForce) {
  std::mt19937_64 rng(42);
  const Words alphabet{"x", "y", "z"};
  std::uniform_int_distribution<std::size_t> len(0, 6), pick(0, 2);
  for (int trial = 0; trial < 500; ++trial) {
    Words ref(std::max<std::size_t>(1, len(rng))), hyp(len(rng));
    for (auto& w : ref) w = alphabet[pick(rng)];
    for (auto& w : hyp) w = alphabet[pick(rng)];
    const auto b = wer(ref, hyp);
    ASSERT_EQ(b.errors(), edit_distance(ref, 0, hyp, 0)) << join_words(ref) << " | " << join_words(hyp);
    // the breakdown is a consistent alignment
    EXPECT_EQ(static_cast<long>(b.deletions) - static_cast<long>(b.insertions),
              static_cast<long>(ref.size()) - static_cast<long>(hyp.size()));
    EXPECT_LE(b.substitutions + b.deletions, ref.size());
    EXPECT_EQ(b.reference_words, ref.size());
  }
}

TEST(Wer, EmptyReferenceRejected) {
  EXPECT_THROW(wer("", "a"), Error);
  EXPECT_THROW(wer(Words{}, Words{}), Error);
}

TEST(Wer, CorpusWerPoolsCounts) {
  const auto c = corpus_wer({"a b c", "d"}, {"a c", "e"});
  EXPECT_EQ(c.errors(), 2u);
  EXPECT_EQ(c.reference_words, 4u);
  EXPECT_DOUBLE_EQ(c.wer(), 0.5);
  EXPECT_THROW(corpus_wer({"a"}, {}), Error);
}

TEST(Report, RelativeChangeHandCase) {
  EXPECT_NEAR(relative_change(5.7, 5.3), 0.07, 0.0005);
  EXPECT_DOUBLE_EQ(relative_change(0.25, 0.25), 0.0);
  EXPECT_TRUE(std::isnan(relative_change(0.0, 0.1)));
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string join_cells(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
  return out;
}

ReportRow row(std::string arm, double test_lm, std::string baseline = "") {
  ReportRow r;
  r.arm = std::move(arm);
  r.labeled = 50;
  r.unlabeled = 430;
  r.ratio = 8.6;
  r.dev_wer_lm = test_lm + 0.01;
  r.dev_wer_nolm = test_lm + 0.2;
  r.test_wer_lm = test_lm;
  r.test_wer_nolm = test_lm + 0.15;
  r.baseline = std::move(baseline);
  r.config_hash = "abc";
  return r;
}

TEST(Report, TableArithmeticIsRecomputable) {
  ExperimentReport rep;
  rep.rows = {row("pretrain", 0.057), row("combined", 0.053, "pretrain")};
  const auto t = parse_csv(report_csv(rep));
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(join_cells(t[0]),
            "arm,labeled,unlabeled,ratio,dev_wer_lm,dev_wer_nolm,test_wer_lm,test_wer_nolm,baseline,dev_change_lm,"
            "test_change_lm,config_hash");
  ASSERT_EQ(t[2].size(), 12u);
  const double base = std::stod(t[1][6]), now = std::stod(t[2][6]);
  EXPECT_EQ(base, 0.057);
  EXPECT_EQ(now, 0.053);
  EXPECT_EQ(std::stod(t[2][10]), (base - now) / base);
  EXPECT_NEAR(std::stod(t[2][10]), 0.07, 0.0005);
  EXPECT_EQ(t[1][10], "");  // no baseline
}

TEST(Report, IdenticalWerGivesZeroChange) {
  ExperimentReport rep;
  rep.rows = {row("pretrain", 0.1), row("combined", 0.1, "pretrain")};
  const auto t = parse_csv(report_csv(rep));
  EXPECT_EQ(std::stod(t[2][10]), 0.0);
  EXPECT_EQ(report_json(rep)["rows"][1]["test_change_lm"].get<double>(), 0.0);
}

TEST(Report, AbsentArmIsMarked) {
  ExperimentReport rep;
  auto missing = row("selftrain", 0.0, "supervised");
  missing.absent = true;
  rep.rows = {row("supervised", 0.2), missing};
  const auto t = parse_csv(report_csv(rep));
  for (std::size_t c : {4u, 5u, 6u, 7u}) EXPECT_EQ(t[2][c], "absent");
  EXPECT_EQ(t[2][0], "selftrain");
  EXPECT_EQ(t[1][4].find("absent"), std::string::npos);
}

TEST(Report, SingleRowAndFiles) {
  ExperimentReport rep;
  rep.rows = {row("supervised", 0.3)};
  const auto dir = semiasr::testing::temp_dir("report");
  emit_report(rep, dir / "report");
  std::ifstream csv(dir / "report.csv");
  std::stringstream ss;
  ss << csv.rdbuf();
  EXPECT_EQ(ss.str(), report_csv(rep));
  EXPECT_EQ(parse_csv(ss.str()).size(), 2u);
  EXPECT_EQ(read_json_file(dir / "report.json"), report_json(rep));
  EXPECT_EQ(rep.baseline_of(rep.rows[0]), nullptr);
}

TEST(EvaluateArm, OracleHypotheses) {
  const std::vector<std::string> refs{"a b", "c d e", "f"};
  const auto p = evaluate_arm(
      refs, [&](std::size_t i) { return refs[i]; }, [](std::size_t) { return std::string(); });
  EXPECT_EQ(p.with_lm.wer(), 0.0);
  EXPECT_EQ(p.no_lm.wer(), 1.0);
  EXPECT_EQ(p.no_lm.deletions, 6u);
  EXPECT_EQ(p.hyps_with_lm, refs);
}

TEST(EvaluateArm, ThreadCountDoesNotChangeResult) {
  std::vector<std::string> refs;
  for (int i = 0; i < 40; ++i) refs.push_back("w" + std::to_string(i % 7) + " x y");
  auto hyp = [&](std::size_t i) { return i % 3 ? refs[i] : std::string("x"); };
  const auto a = evaluate_arm(refs, hyp, hyp, 1);
  const auto b = evaluate_arm(refs, hyp, hyp, 4);
  EXPECT_EQ(a.with_lm.errors(), b.with_lm.errors());
  EXPECT_EQ(a.hyps_no_lm, b.hyps_no_lm);
}

}  // namespace
}  // namespace semiasr::eval
