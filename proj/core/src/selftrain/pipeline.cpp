// selftrain/pipeline.cpp
#include "semiasr/selftrain/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "semiasr/corpus/manifest.hpp"
#include "semiasr/corpus/split.hpp"
#include "semiasr/ctc/ctc.hpp"
#include "semiasr/eval/wer.hpp"
#include "semiasr/lm/neural.hpp"
#include "semiasr/lm/ngram.hpp"
#include "semiasr/pretrain/pretrain.hpp"
#include "semiasr/selftrain/recognizer.hpp"
#include "semiasr/seq2seq/model.hpp"
#include "semiasr/util.hpp"
#include "semiasr/wav2vec/config_io.hpp"

namespace semiasr::selftrain {

namespace fs = std::filesystem;
using corpus::Utterance;

std::size_t PseudoLabeledSet::empty_count() const {
  std::size_t n = 0;
  for (const auto& l : labels) n += l.text.empty() ? 1 : 0;
  return n;
}

void PseudoLabeledSet::write_jsonl(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : labels) {
    Json j{{"id", l.id}, {"text", l.text}, {"am", l.am}, {"lm", l.lm}, {"score", l.score}};
    if (!std::isnan(l.lm2)) j["lm2"] = l.lm2;
    out << j.dump() << "\n";
  }
}

PseudoLabeledSet pseudo_label(const std::vector<std::string>& ids, const std::vector<nn::Tensor>& emissions,
                              const corpus::Vocabulary& vocab, const lm::LmScorer* lm, const lm::LmScorer* lm2,
                              const decode::TwoPassConfig& config, std::size_t threads) {
  if (ids.size() != emissions.size()) throw Error("pseudo_label: ids and emissions differ in length");
  PseudoLabeledSet out;
  out.labels.resize(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    const auto list = decode::two_pass(
        [&](const decode::FusionConfig& f) { return decode::fused_beam_search(emissions[i], vocab, lm, f); }, lm2,
        config);
    PseudoLabel& l = out.labels[i];
    l.id = ids[i];
    l.lm2 = std::numeric_limits<double>::quiet_NaN();
    if (list.hyps.empty()) return;
    const auto& best = list.best();
    l.text = best.text;
    l.am = best.am;
    l.lm = best.lm;
    l.lm2 = best.lm2;
    l.score = best.score;
  });
  return out;
}

PseudoLabeledSet pseudo_label(const ctc::CtcModel& model, const std::vector<const Utterance*>& unlabeled,
                              const lm::LmScorer* lm, const lm::LmScorer* lm2, const decode::TwoPassConfig& config,
                              std::size_t threads) {
  std::vector<std::string> ids;
  std::vector<nn::Tensor> emissions(unlabeled.size());
  for (const Utterance* u : unlabeled) ids.push_back(u->id);
  parallel_for(unlabeled.size(), threads, [&](std::size_t i) { emissions[i] = model.emissions(unlabeled[i]->samples); });
  return pseudo_label(ids, emissions, model.vocab(), lm, lm2, config, threads);
}

corpus::Corpus apply_pseudo_labels(const std::vector<const Utterance*>& unlabeled, const PseudoLabeledSet& labels) {
  std::map<std::string, const PseudoLabel*> by_id;
  for (const auto& l : labels.labels)
    if (!by_id.emplace(l.id, &l).second) throw Error("pseudo labels: duplicate id " + l.id);
  if (by_id.size() != unlabeled.size()) {
    throw Error("pseudo labels: " + std::to_string(by_id.size()) + " labels for " + std::to_string(unlabeled.size()) +
                " unlabeled utterances");
  }
  corpus::Corpus out;
  for (const Utterance* u : unlabeled) {
    auto it = by_id.find(u->id);
    if (it == by_id.end()) throw Error("pseudo labels: no label for " + u->id);
    Utterance p = *u;
    p.transcript = it->second->text;
    p.origin = corpus::Origin::kPseudo;
    out.utterances.push_back(std::move(p));
  }
  return out;
}

corpus::Corpus combine_sets(const corpus::Corpus& labeled, const corpus::Corpus& pseudo) {
  corpus::Corpus out;
  std::set<std::string> ids;
  for (const auto* part : {&labeled, &pseudo}) {
    for (const Utterance& u : part->utterances) {
      if (!ids.insert(u.id).second) throw Error("combine_sets: id collision on " + u.id);
      out.utterances.push_back(u);
    }
  }
  for (auto& u : out.utterances) {
    if (u.origin == corpus::Origin::kGold && !u.transcript) throw Error("combine_sets: gold utterance " + u.id + " has no transcript");
  }
  return out;
}

DeskData make_desk_data(const CorpusConfig& config) {
  DeskData d;
  d.grammar = corpus::make_grammar(config.grammar, config.grammar_seed);
  const corpus::Corpus pool =
      corpus::synth_generate(d.grammar, config.corpus_seed, corpus::required_count(config.split), {1.0, 0.0, 0.0, 0.0});
  d.corpus = corpus::split_corpus(pool, config.split, derive_seed(config.corpus_seed, "split"));
  d.lm_text = corpus::generate_text(d.grammar, derive_seed(config.corpus_seed, "lm-text"), config.lm_sentences);
  return d;
}

std::string baseline_arm(Arm arm) {
  switch (arm) {
    case Arm::kSupervised: return "";
    case Arm::kPretrainOnly:
    case Arm::kSelfTrainOnly: return "supervised";
    case Arm::kCombined: return "pretrain";
  }
  return "";
}

corpus::Vocabulary word_piece_vocab(const std::vector<std::string>& transcripts, const std::string& symbols,
                                    std::size_t size) {
  // the alphabet is appended once as a sentence of one-letter words
  std::vector<std::string> texts = transcripts;
  std::string alphabet;
  for (char c : symbols)
    if (c != ' ') alphabet += std::string(alphabet.empty() ? "" : " ") + c;
  texts.push_back(alphabet);
  return corpus::bpe_train(texts, size);
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(bytes));
}

const ArmResult* PipelineRun::find(Arm arm) const {
  for (const auto& a : arms)
    if (a.arm == arm) return &a;
  return nullptr;
}

namespace {

class Runner {
 public:
  Runner(const PipelineConfig& config, fs::path dir, const PipelineOptions& options)
      : config_(config), dir_(std::move(dir)), options_(options), seed_(*config.seed) {
    fs::create_directories(dir_);
    write_text(dir_ / "config.snapshot", options.snapshot.empty() ? to_json(config).dump(2) + "\n" : options.snapshot);
    metrics_.open(dir_ / "metrics.jsonl");
    stages_.open(dir_ / "stages.jsonl");
    if (!metrics_ || !stages_) throw IoError("cannot write logs under " + dir_.string());
    run_.dir = dir_;
  }

  PipelineRun run();

 private:
  struct Teacher {
    std::string name;
    std::shared_ptr<ctc::CtcModel> model;
    fs::path checkpoint;
    decode::TuneResult tune;
    std::optional<corpus::Corpus> pseudo;
  };

  static void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
  }

  void log(const std::string& line) const {
    if (options_.log) options_.log(line);
  }

  void metric(Json j) {
    metrics_ << j.dump() << "\n";
    metrics_.flush();
  }

  template <class F>
  void stage(const std::string& name, F&& body) {
    StageRecord rec;
    rec.index = run_.stages.size() + 1;
    rec.name = name;
    rec.dir = dir_ / ("stage-" + std::to_string(rec.index) + "-" + name);
    fs::create_directories(rec.dir);
    log("[stage " + std::to_string(rec.index) + "] " + name);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body(rec.dir);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stages_ << Json{{"index", rec.index}, {"name", name}, {"seconds", rec.seconds}}.dump() << "\n";
    stages_.flush();
    run_.stages.push_back(std::move(rec));
  }

  bool wants(Arm a) const {
    for (Arm x : config_.arms)
      if (x == a) return true;
    return false;
  }

  const lm::LmScorer* lm2() const { return config_.lm.rescore ? neural_.get() : nullptr; }

  decode::TuneResult tune(Recognizer& rec, const std::string& tag, const fs::path& dir) {
    decode::TuneConfig tc = config_.decode.tune;
    tc.fusion = config_.decode.fusion;
    tc.seed = derive_seed(seed_, "tune-" + tag);
    auto result = tune_recognizer(rec, dev_, lm2(), tc, options_.threads);
    decode::write_tune_csv(dir / "tune.csv", result);
    const auto& w = result.best.weights;
    metric({{"stage", "tune"}, {"model", tag}, {"trial", result.best.trial}, {"alpha", w.alpha}, {"beta", w.beta},
            {"alpha2", w.alpha2}, {"beta2", w.beta2}, {"dev_wer", result.best.dev_wer}});
    return result;
  }

  ArmResult evaluate(Recognizer& rec, Arm arm, const decode::TuneResult& tuned) {
    ArmResult r;
    r.arm = arm;
    r.weights = tuned.best.weights;
    const decode::TwoPassConfig c = tuned.decode_config(config_.decode.fusion);
    const auto dev = evaluate_recognizer(rec, dev_, lm2(), c, options_.threads);
    const auto test = evaluate_recognizer(rec, test_, lm2(), c, options_.threads);
    r.dev_wer_lm = dev.with_lm.wer();
    r.dev_wer_nolm = dev.no_lm.wer();
    r.test_wer_lm = test.with_lm.wer();
    r.test_wer_nolm = test.no_lm.wer();
    return r;
  }

  void train_teacher(Teacher& t, bool pretrained, const fs::path& dir);
  void label(Teacher& t, const fs::path& dir);

  const PipelineConfig& config_;
  fs::path dir_;
  const PipelineOptions& options_;
  std::uint64_t seed_;
  std::ofstream metrics_;
  std::ofstream stages_;
  PipelineRun run_;

  DeskData data_;
  corpus::Vocabulary letters_;
  std::vector<const Utterance*> labeled_, unlabeled_, dev_, test_;
  std::vector<std::string> dev_refs_, test_refs_;
  std::unique_ptr<lm::NGramModel> ngram_;
  std::unique_ptr<lm::NeuralLm> neural_;
  fs::path pretrained_ckpt_;
};

void Runner::train_teacher(Teacher& t, bool pretrained, const fs::path& dir) {
  if (pretrained) {
    const auto backbone = wav2vec::load_model(pretrained_ckpt_);
    t.model = std::make_shared<ctc::CtcModel>(
        ctc::CtcModel::from_pretrained(backbone, letters_, derive_seed(seed_, "ctc-head")));
  } else {
    t.model = std::make_shared<ctc::CtcModel>(config_.wav2vec, letters_, derive_seed(seed_, "ctc-scratch"));
  }
  ctc::FinetuneConfig fc = config_.finetune;
  fc.seed = derive_seed(seed_, "finetune-" + t.name);
  ctc::finetune_run(*t.model, labeled_, dev_, fc, [&](const ctc::FinetuneEpochMetrics& m) {
    metric({{"stage", "finetune"}, {"model", t.name}, {"epoch", m.epoch}, {"train_loss", m.train_loss},
            {"dev_wer_greedy", m.dev_wer}});
  });
  t.checkpoint = dir / "ctc.ckpt";
  t.model->save(t.checkpoint);
}

void Runner::label(Teacher& t, const fs::path& dir) {
  decode::TwoPassConfig c = t.tune.decode_config(config_.decode.fusion);
  c.fusion.beam = config_.decode.pseudo_label_beam;
  const PseudoLabeledSet labels = pseudo_label(*t.model, unlabeled_, ngram_.get(), lm2(), c, options_.threads);
  ++run_.pseudo_label_invocations;
  labels.write_jsonl(dir / "labels.jsonl");
  t.pseudo = apply_pseudo_labels(unlabeled_, labels);
  corpus::write_manifest(dir / "pseudo.jsonl", *t.pseudo);

  // quality against the hidden references, with and without the LM
  std::vector<std::string> refs, fused, plain;
  for (std::size_t i = 0; i < unlabeled_.size(); ++i) {
    if (!unlabeled_[i]->reference) continue;
    refs.push_back(*unlabeled_[i]->reference);
    fused.push_back(labels.labels[i].text);
    plain.push_back(normalize_spaces(ctc::ctc_greedy_text(t.model->emissions(unlabeled_[i]->samples), letters_)));
  }
  Json m{{"stage", "pseudo-label"}, {"model", t.name}, {"count", labels.labels.size()}, {"empty", labels.empty_count()}};
  if (!refs.empty()) {
    m["wer_with_lm"] = eval::corpus_wer(refs, fused).wer();
    m["wer_no_lm"] = eval::corpus_wer(refs, plain).wer();
  }
  metric(m);
  if (labels.empty_count() > 0) log("pseudo-label: " + std::to_string(labels.empty_count()) + " empty transcripts kept");
}

PipelineRun Runner::run() {
  stage("synth", [&](const fs::path& dir) {
    data_ = make_desk_data(config_.corpus);
    corpus::write_manifest(dir / "corpus.jsonl", data_.corpus);
    write_text(dir / "lm_text.txt", [&] {
      std::string s;
      for (const auto& l : data_.lm_text) s += l + "\n";
      return s;
    }());
    letters_ = corpus::Vocabulary::letters(data_.grammar.symbols());
    labeled_ = data_.corpus.select(corpus::Split::kLabeled);
    unlabeled_ = data_.corpus.select(corpus::Split::kUnlabeled);
    dev_ = data_.corpus.select(corpus::Split::kDev);
    test_ = data_.corpus.select(corpus::Split::kTest);
    dev_refs_ = references_of(dev_);
    test_refs_ = references_of(test_);
    metric({{"stage", "synth"}, {"labeled", labeled_.size()}, {"unlabeled", unlabeled_.size()}, {"dev", dev_.size()},
            {"test", test_.size()}, {"lm_sentences", data_.lm_text.size()}});
  });

  stage("lm-train", [&](const fs::path& dir) {
    ngram_ = std::make_unique<lm::NGramModel>(lm::NGramModel::train_text(data_.lm_text, config_.lm.ngram));
    ngram_->save(dir / "ngram.lm");
    std::vector<std::vector<std::string>> dev_sentences;
    for (const auto& r : dev_refs_) dev_sentences.push_back(split_words(r));
    Json m{{"stage", "lm-train"}, {"ngram_dev_perplexity", lm::perplexity(*ngram_, dev_sentences)}};
    if (config_.lm.rescore) {
      std::vector<std::vector<std::string>> sentences;
      for (const auto& l : data_.lm_text) sentences.push_back(split_words(l));
      lm::NeuralLmConfig nc = config_.lm.neural;
      nc.seed = derive_seed(seed_, "neural-lm");
      neural_ = std::make_unique<lm::NeuralLm>(lm::NeuralLm::train(sentences, nc, [&](std::size_t e, double loss) {
        metric({{"stage", "lm-train"}, {"model", "neural"}, {"epoch", e}, {"loss", loss}});
      }));
      neural_->save(dir / "neural.lm");
      m["neural_dev_perplexity"] = lm::perplexity(*neural_, dev_sentences);
    }
    metric(m);
  });

  const bool need_pretrained = wants(Arm::kPretrainOnly) || wants(Arm::kCombined);
  const bool need_scratch = wants(Arm::kSupervised) || wants(Arm::kSelfTrainOnly);

  if (need_pretrained) {
    stage("pretrain", [&](const fs::path& dir) {
      wav2vec::Wav2VecModel model(config_.wav2vec, derive_seed(seed_, "wav2vec-init"));
      pretrain::PretrainConfig pc = config_.pretrain;
      pc.seed = derive_seed(seed_, "pretrain");
      pretrain::pretrain_run(unlabeled_, model, pc, [&](const pretrain::PretrainEpochMetrics& m) {
        metric({{"stage", "pretrain"}, {"epoch", m.epoch}, {"loss", m.loss}, {"accuracy", m.contrastive_accuracy},
                {"diversity", m.diversity}});
      });
      pretrained_ckpt_ = dir / "wav2vec.ckpt";
      wav2vec::save_model(pretrained_ckpt_, model);
      metric({{"stage", "pretrain"}, {"checkpoint_hash", file_hash(pretrained_ckpt_)}});
    });
  }

  std::map<bool, Teacher> teachers;  // keyed by "pre-trained"
  for (const bool pre : {true, false}) {
    if (pre ? !need_pretrained : !need_scratch) continue;
    Teacher& t = teachers[pre];
    t.name = pre ? "pretrained" : "scratch";
    stage(pre ? "finetune" : "finetune-scratch", [&](const fs::path& dir) { train_teacher(t, pre, dir); });
    stage("tune-" + t.name, [&](const fs::path& dir) {
      CtcRecognizer rec(t.model, ngram_.get());
      t.tune = tune(rec, t.name, dir);
    });
    if (wants(pre ? Arm::kCombined : Arm::kSelfTrainOnly)) {
      stage("pseudo-label-" + t.name, [&](const fs::path& dir) { label(t, dir); });
    }
  }

  std::map<Arm, ArmResult> results;
  for (Arm arm : config_.arms) {
    const bool pre = uses_pretraining(arm);
    Teacher& t = teachers.at(pre);
    const std::string name(to_string(arm));
    if (!uses_selftraining(arm)) {
      stage("evaluate-" + name, [&](const fs::path&) {
        CtcRecognizer rec(t.model, ngram_.get());
        ArmResult r = evaluate(rec, arm, t.tune);
        r.final_checkpoint = t.checkpoint;
        if (pre) r.pretrained_hash = file_hash(pretrained_ckpt_);
        results[arm] = r;
      });
      continue;
    }
    const corpus::Corpus gold = data_.corpus.subset(corpus::Split::kLabeled);
    const corpus::Corpus train = combine_sets(gold, *t.pseudo);
    std::vector<const Utterance*> train_ptrs;
    for (const auto& u : train.utterances) train_ptrs.push_back(&u);
    std::shared_ptr<ctc::CtcModel> ctc_model;
    std::shared_ptr<seq2seq::S2SModel> s2s_model;
    fs::path checkpoint;
    std::string pretrained_hash;
    stage("final-train-" + name, [&](const fs::path& dir) {
      const auto& fm = config_.final_model;
      if (fm.variant == Variant::kCtcFt) {
        if (fm.ctc_init == CtcInit::kFinetuned) {
          ctc_model = std::make_shared<ctc::CtcModel>(ctc::CtcModel::load(t.checkpoint));
        } else if (pre) {
          const auto backbone = wav2vec::load_model(pretrained_ckpt_);
          ctc_model = std::make_shared<ctc::CtcModel>(
              ctc::CtcModel::from_pretrained(backbone, letters_, derive_seed(seed_, "final-head-" + name)));
        } else {
          ctc_model = std::make_shared<ctc::CtcModel>(config_.wav2vec, letters_, derive_seed(seed_, "final-init-" + name));
        }
        if (pre) pretrained_hash = file_hash(pretrained_ckpt_);
        ctc::FinetuneConfig fc = fm.finetune;
        fc.seed = derive_seed(seed_, "final-" + name);
        ctc::finetune_run(*ctc_model, train_ptrs, dev_, fc, [&](const ctc::FinetuneEpochMetrics& m) {
          metric({{"stage", "final-train"}, {"arm", name}, {"epoch", m.epoch}, {"train_loss", m.train_loss},
                  {"dev_wer_greedy", m.dev_wer}});
        });
        checkpoint = dir / "ctc.ckpt";
        ctc_model->save(checkpoint);
      } else {
        const auto pieces = word_piece_vocab(data_.corpus.transcripts(corpus::Split::kLabeled),
                                             data_.grammar.symbols(), fm.word_pieces);
        s2s_model = std::make_shared<seq2seq::S2SModel>(fm.s2s, pieces, derive_seed(seed_, "s2s-init-" + name));
        seq2seq::S2STrainConfig sc = fm.s2s_train;
        sc.seed = derive_seed(seed_, "final-" + name);
        seq2seq::s2s_train_run(*s2s_model, train_ptrs, dev_, sc, [&](const seq2seq::S2SEpochMetrics& m) {
          metric({{"stage", "final-train"}, {"arm", name}, {"epoch", m.epoch}, {"train_loss", m.train_loss},
                  {"dev_loss", m.dev_loss}});
        });
        checkpoint = dir / "s2s.ckpt";
        s2s_model->save(checkpoint);
      }
    });
    std::unique_ptr<Recognizer> rec;
    if (ctc_model) rec = std::make_unique<CtcRecognizer>(ctc_model, ngram_.get());
    else rec = std::make_unique<S2SRecognizer>(s2s_model, ngram_.get(), config_.decode.fusion.nbest);
    decode::TuneResult tuned;
    stage("tune-" + name, [&](const fs::path& dir) { tuned = tune(*rec, name, dir); });
    stage("evaluate-" + name, [&](const fs::path&) {
      ArmResult r = evaluate(*rec, arm, tuned);
      r.final_checkpoint = checkpoint;
      r.pretrained_hash = pretrained_hash;
      results[arm] = r;
    });
  }

  stage("report", [&](const fs::path& dir) {
    const std::string hash = hex64(fnv1a64(to_json(config_).dump()));
    for (Arm arm : {Arm::kSupervised, Arm::kPretrainOnly, Arm::kSelfTrainOnly, Arm::kCombined}) {
      eval::ReportRow row;
      row.arm = std::string(to_string(arm));
      row.labeled = labeled_.size();
      row.unlabeled = unlabeled_.size();
      row.ratio = config_.corpus.split.ratio;
      row.baseline = baseline_arm(arm);
      row.config_hash = hash;
      auto it = results.find(arm);
      if (it == results.end()) {
        row.absent = true;
      } else {
        const ArmResult& r = it->second;
        row.dev_wer_lm = r.dev_wer_lm;
        row.dev_wer_nolm = r.dev_wer_nolm;
        row.test_wer_lm = r.test_wer_lm;
        row.test_wer_nolm = r.test_wer_nolm;
        Json m{{"stage", "evaluate"},          {"arm", row.arm},
               {"dev_wer_lm", r.dev_wer_lm},   {"dev_wer_nolm", r.dev_wer_nolm},
               {"test_wer_lm", r.test_wer_lm}, {"test_wer_nolm", r.test_wer_nolm}};
        if (!r.pretrained_hash.empty()) m["pretrained_hash"] = r.pretrained_hash;
        metric(m);
        run_.arms.push_back(r);
      }
      run_.report.rows.push_back(row);
    }
    eval::emit_report(run_.report, dir / "report");
    eval::emit_report(run_.report, dir_ / "report");
  });
  return run_;
}

}  // namespace

PipelineRun run_pipeline(const PipelineConfig& config, const fs::path& run_dir, const PipelineOptions& options) {
  config.validate();
  if (!config.seed) throw ConfigError("seed", "a master seed is required for the pipeline");
  Runner runner(config, run_dir, options);
  return runner.run();
}

eval::ExperimentReport ratio_experiment(const PipelineConfig& config, const std::vector<std::size_t>& labeled_sizes,
                                        double ratio, const fs::path& run_dir, const PipelineOptions& options) {
  if (labeled_sizes.empty()) throw ConfigError("ratio.labeled_sizes", "at least one size is required");
  if (!(ratio > 0.0)) throw ConfigError("ratio.ratio", "must be positive");
  eval::ExperimentReport report;
  for (std::size_t n : labeled_sizes) {
    PipelineConfig c = config;
    c.corpus.split.labeled = n;
    c.corpus.split.ratio = ratio;
    c.arms = {Arm::kPretrainOnly, Arm::kCombined};
    const PipelineRun run = run_pipeline(c, run_dir / ("labeled-" + std::to_string(n)), options);
    for (const auto& row : run.report.rows) {
      if (row.arm != "pretrain" && row.arm != "combined") continue;
      eval::ReportRow r = row;
      r.baseline = row.arm == "combined" ? "pretrain" : "";
      report.rows.push_back(r);
    }
  }
  fs::create_directories(run_dir);
  eval::emit_report(report, run_dir / "ratio");
  eval::write_gnuplot_data(report, run_dir / "ratio.dat");
  return report;
}

}  // namespace semiasr::selftrain
