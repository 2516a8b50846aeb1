// semiasr/selftrain/pipeline.hpp
//
// Pre-train -> fine-tune -> pseudo-label -> final-train, run for every
// requested arm of the 2x2 (pre-training x self-training) grid. Arms share
// stage artifacts: the pre-trained checkpoint is written once and loaded by
// every arm that uses it, and each teacher labels the unlabeled split once.
//
// Run directory:
//   config.snapshot          verbatim config text
//   stage-N-<name>/          artifacts of stage N
//   metrics.jsonl            deterministic metrics, one JSON object per line
//   stages.jsonl             stage names and wall-clock seconds
//   report.csv, report.json  final table
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "semiasr/corpus/synth.hpp"
#include "semiasr/corpus/utterance.hpp"
#include "semiasr/ctc/model.hpp"
#include "semiasr/decode/tune.hpp"
#include "semiasr/error.hpp"
#include "semiasr/eval/report.hpp"
#include "semiasr/selftrain/config.hpp"

namespace semiasr::selftrain {

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + " failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PseudoLabel {
  std::string id;
  std::string text;  ///< top-1 after rescoring; may be empty
  double am = 0.0;
  double lm = 0.0;
  double lm2 = 0.0;  ///< NaN without rescoring
  double score = 0.0;
};

struct PseudoLabeledSet {
  std::vector<PseudoLabel> labels;  ///< input order

  std::size_t empty_count() const;
  void write_jsonl(const std::filesystem::path& path) const;
};

/// Two-pass decode of every utterance; one label per input, none dropped.
PseudoLabeledSet pseudo_label(const std::vector<std::string>& ids, const std::vector<nn::Tensor>& emissions,
                              const corpus::Vocabulary& vocab, const lm::LmScorer* lm, const lm::LmScorer* lm2,
                              const decode::TwoPassConfig& config, std::size_t threads = 1);
PseudoLabeledSet pseudo_label(const ctc::CtcModel& model, const std::vector<const corpus::Utterance*>& unlabeled,
                              const lm::LmScorer* lm, const lm::LmScorer* lm2, const decode::TwoPassConfig& config,
                              std::size_t threads = 1);

/// Copies of the unlabeled utterances carrying their pseudo transcripts (origin
/// pseudo). Throws unless the set labels exactly these utterances.
corpus::Corpus apply_pseudo_labels(const std::vector<const corpus::Utterance*>& unlabeled,
                                   const PseudoLabeledSet& labels);

/// Union of gold and pseudo examples, gold first. Throws on an id collision.
corpus::Corpus combine_sets(const corpus::Corpus& labeled, const corpus::Corpus& pseudo);

struct DeskData {
  corpus::SyntheticGrammar grammar;
  corpus::Corpus corpus;  ///< split into labeled / unlabeled / dev / test
  std::vector<std::string> lm_text;
};

/// Grammar, split corpus and LM text from the corpus config (independent of the master seed).
DeskData make_desk_data(const CorpusConfig& config);

struct StageRecord {
  std::size_t index = 0;
  std::string name;
  std::filesystem::path dir;
  double seconds = 0.0;
};

struct ArmResult {
  Arm arm = Arm::kSupervised;
  double dev_wer_lm = 0.0;
  double dev_wer_nolm = 0.0;
  double test_wer_lm = 0.0;
  double test_wer_nolm = 0.0;
  decode::TrialWeights weights;
  std::filesystem::path final_checkpoint;
  /// FNV-1a of the pre-trained checkpoint bytes this arm started from; empty without pre-training.
  std::string pretrained_hash;
};

struct PipelineRun {
  std::filesystem::path dir;
  std::vector<StageRecord> stages;
  std::vector<ArmResult> arms;
  std::size_t pseudo_label_invocations = 0;
  eval::ExperimentReport report;

  const ArmResult* find(Arm arm) const;
};

struct PipelineOptions {
  std::size_t threads = 1;
  /// Written verbatim as config.snapshot; the canonical JSON of the config when empty.
  std::string snapshot;
  std::function<void(const std::string&)> log;
};

/// Requires config.seed. Stage failures are rethrown as StageError; artifacts of
/// completed stages stay on disk.
PipelineRun run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir,
                         const PipelineOptions& options = {});

/// For each labeled size: split with the fixed ratio, run the pretrain-only and
/// combined arms, and report dev/test WER with the relative change.
eval::ExperimentReport ratio_experiment(const PipelineConfig& config, const std::vector<std::size_t>& labeled_sizes,
                                        double ratio, const std::filesystem::path& run_dir,
                                        const PipelineOptions& options = {});

/// Arm whose WER the report compares `arm` against; empty for the supervised arm.
std::string baseline_arm(Arm arm);

/// Word pieces for the seq2seq model, trained on the gold transcripts. Every
/// letter of `symbols` is guaranteed a piece so pseudo-labels always encode.
corpus::Vocabulary word_piece_vocab(const std::vector<std::string>& transcripts, const std::string& symbols,
                                    std::size_t size);

/// FNV-1a 64 of a file's bytes, hex encoded.
std::string file_hash(const std::filesystem::path& path);

}  // namespace semiasr::selftrain
