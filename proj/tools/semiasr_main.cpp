// tools/semiasr_main.cpp
//
// Command-line entry point. Every subcommand reads the JSON pipeline config
// (--config, then --set overrides by dotted path), writes its artifacts and a
// config.snapshot under the output directory, and prints one summary line.
// Exit status: 0 success, 1 runtime or config error (one JSON line on stderr),
// 2 usage error.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "semiasr/corpus/manifest.hpp"
#include "semiasr/corpus/synth.hpp"
#include "semiasr/ctc/model.hpp"
#include "semiasr/grad_suite.hpp"
#include "semiasr/lm/neural.hpp"
#include "semiasr/lm/ngram.hpp"
#include "semiasr/selftrain/pipeline.hpp"
#include "semiasr/selftrain/recognizer.hpp"
#include "semiasr/util.hpp"
#include "semiasr/wav2vec/config_io.hpp"

namespace fs = std::filesystem;
using namespace semiasr;
using selftrain::PipelineConfig;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::size_t threads = 1;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override a config field: dotted.path=value (repeatable)");
  app->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "master seed");
  app->add_flag("--quiet", c.quiet, "no progress lines on stderr");
}

struct Loaded {
  PipelineConfig config;
  std::string snapshot;
  std::uint64_t seed = 1;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Config file plus --set overrides (then `extra`, which come from dedicated flags).
Loaded load_config(const Common& c, const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  std::string text = c.config.empty() ? "{}\n" : read_text(c.config);
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  bool changed = false;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(s, "expected --set dotted.path=value");
    selftrain::set_dotted(root, s.substr(0, eq), s.substr(eq + 1));
    changed = true;
  }
  for (const auto& [k, v] : extra) {
    selftrain::set_dotted(root, k, v);
    changed = true;
  }
  if (c.seed) {
    root["seed"] = *c.seed;
    changed = true;
  }
  Loaded l;
  l.config = selftrain::pipeline_config_from_json(root);
  l.snapshot = changed ? root.dump(2) + "\n" : text;
  l.seed = l.config.seed.value_or(1);
  return l;
}

fs::path output_dir(const Common& c, const std::string& name) {
  fs::path dir;
  if (!c.out.empty()) dir = c.out;
  else if (const char* root = std::getenv("SEMIASR_OUTPUT_ROOT"); root && *root) dir = fs::path(root) / name;
  else dir = fs::path("runs") / name;
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::function<void(const std::string&)> logger(const Common& c) {
  if (c.quiet) return {};
  return [](const std::string& line) { std::cerr << line << std::endl; };
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::pair<double, double> parse_range(const std::string& text, const std::string& path) {
  const auto colon = text.find(':', text[0] == '-' ? 1 : 0);
  if (colon == std::string::npos) throw ConfigError(path, "expected lo:hi, got \"" + text + "\"");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError(path, "expected lo:hi, got \"" + text + "\"");
  }
}

corpus::Vocabulary letter_vocab(const PipelineConfig& config) {
  const auto grammar = corpus::make_grammar(config.corpus.grammar, config.corpus.grammar_seed);
  return corpus::Vocabulary::letters(grammar.symbols());
}

std::unique_ptr<lm::LmScorer> maybe_lm(const std::string& path) {
  if (path.empty()) return nullptr;
  return lm::load_lm(path);
}

decode::TrialWeights read_weights(const std::string& path, const PipelineConfig& config) {
  decode::TrialWeights w;
  w.alpha = config.decode.fusion.alpha;
  w.beta = config.decode.fusion.beta;
  if (path.empty()) return w;
  const Json j = read_json_file(path);
  w.alpha = j.at("alpha").get<double>();
  w.beta = j.at("beta").get<double>();
  w.alpha2 = j.value("alpha2", 0.0);
  w.beta2 = j.value("beta2", 0.0);
  return w;
}

decode::TwoPassConfig two_pass_config(const decode::TrialWeights& w, const decode::FusionConfig& base) {
  decode::TwoPassConfig c;
  c.fusion = base;
  c.fusion.alpha = w.alpha;
  c.fusion.beta = w.beta;
  c.alpha2 = w.alpha2;
  c.beta2 = w.beta2;
  return c;
}

std::vector<const corpus::Utterance*> require_split(const corpus::Corpus& c, corpus::Split split,
                                                    const std::string& path) {
  auto out = c.select(split);
  if (out.empty()) throw Error(path + " has no " + std::string(corpus::to_string(split)) + " utterances");
  return out;
}

// ---- subcommands ----------------------------------------------------------

struct SynthArgs {
  Common common;
  std::optional<long long> utterances;
};

int run_synth(const SynthArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "synth");
  write_text(dir / "config.snapshot", l.snapshot);
  selftrain::DeskData data;
  if (a.utterances) {
    if (*a.utterances < 1) throw ConfigError("synth.utterances", "must be >= 1");
    data.grammar = corpus::make_grammar(l.config.corpus.grammar, l.config.corpus.grammar_seed);
    data.corpus = corpus::synth_generate(data.grammar, l.config.corpus.corpus_seed,
                                         static_cast<std::size_t>(*a.utterances));
    data.lm_text = corpus::generate_text(data.grammar, derive_seed(l.config.corpus.corpus_seed, "lm-text"),
                                         l.config.corpus.lm_sentences);
  } else {
    data = selftrain::make_desk_data(l.config.corpus);
  }
  corpus::write_manifest(dir / "corpus.jsonl", data.corpus);
  std::string text;
  for (const auto& s : data.lm_text) text += s + "\n";
  write_text(dir / "lm_text.txt", text);
  corpus::Vocabulary::letters(data.grammar.symbols()).save(dir / "letters.vocab");
  std::cout << "synth: " << data.corpus.size() << " utterances (labeled "
            << data.corpus.select(corpus::Split::kLabeled).size() << ", unlabeled "
            << data.corpus.select(corpus::Split::kUnlabeled).size() << ", dev "
            << data.corpus.select(corpus::Split::kDev).size() << ", test "
            << data.corpus.select(corpus::Split::kTest).size() << ") -> " << (dir / "corpus.jsonl").string() << "\n";
  return 0;
}

struct LmArgs {
  Common common;
  std::string text;
  std::string dev;
  std::optional<bool> neural;
};

int run_lm_train(const LmArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "lm-train");
  write_text(dir / "config.snapshot", l.snapshot);
  std::vector<std::string> lines;
  if (a.text.empty()) {
    lines = selftrain::make_desk_data(l.config.corpus).lm_text;
  } else {
    std::istringstream in(read_text(a.text));
    for (std::string line; std::getline(in, line);)
      if (!normalize_spaces(line).empty()) lines.push_back(normalize_spaces(line));
  }
  if (lines.empty()) throw Error("lm-train: no training sentences");
  const auto ngram = lm::NGramModel::train_text(lines, l.config.lm.ngram);
  ngram.save(dir / "ngram.lm");
  std::string summary = "lm-train: ngram (" + std::to_string(ngram.vocabulary().size()) + " words)";
  std::vector<std::vector<std::string>> dev;
  if (!a.dev.empty()) {
    const corpus::Corpus c = corpus::read_manifest(a.dev);
    for (const auto& r : selftrain::references_of(require_split(c, corpus::Split::kDev, a.dev))) dev.push_back(split_words(r));
    summary += " dev perplexity " + fmt(lm::perplexity(ngram, dev));
  }
  if (a.neural.value_or(l.config.lm.rescore)) {
    std::vector<std::vector<std::string>> sentences;
    for (const auto& s : lines) sentences.push_back(split_words(s));
    lm::NeuralLmConfig nc = l.config.lm.neural;
    nc.seed = derive_seed(l.seed, "neural-lm");
    const auto log = logger(a.common);
    const auto neural = lm::NeuralLm::train(sentences, nc, [&](std::size_t e, double loss) {
      if (log) log("neural-lm epoch " + std::to_string(e) + " loss " + fmt(loss));
    });
    neural.save(dir / "neural.lm");
    summary += ", neural";
    if (!dev.empty()) summary += " dev perplexity " + fmt(lm::perplexity(neural, dev));
  }
  std::cout << summary << " -> " << dir.string() << "\n";
  return 0;
}

struct CorpusArgs {
  Common common;
  std::string corpus;
  std::string init;
};

int run_pretrain(const CorpusArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "pretrain");
  write_text(dir / "config.snapshot", l.snapshot);
  const corpus::Corpus c = corpus::read_manifest(a.corpus);
  const auto unlabeled = require_split(c, corpus::Split::kUnlabeled, a.corpus);
  wav2vec::Wav2VecModel model(l.config.wav2vec, derive_seed(l.seed, "wav2vec-init"));
  pretrain::PretrainConfig pc = l.config.pretrain;
  pc.seed = derive_seed(l.seed, "pretrain");
  std::ofstream metrics(dir / "metrics.jsonl");
  const auto log = logger(a.common);
  pretrain::PretrainEpochMetrics last;
  pretrain::pretrain_run(unlabeled, model, pc, [&](const pretrain::PretrainEpochMetrics& m) {
    last = m;
    metrics << Json{{"epoch", m.epoch}, {"loss", m.loss}, {"accuracy", m.contrastive_accuracy},
                    {"diversity", m.diversity}}.dump()
            << "\n";
    if (log) log("pretrain epoch " + std::to_string(m.epoch) + " loss " + fmt(m.loss));
  });
  wav2vec::save_model(dir / "wav2vec.ckpt", model);
  std::cout << "pretrain: loss " << fmt(last.loss) << " contrastive accuracy " << fmt(last.contrastive_accuracy)
            << " -> " << (dir / "wav2vec.ckpt").string() << "\n";
  return 0;
}

void write_finetune_metric(std::ofstream& out, const ctc::FinetuneEpochMetrics& m) {
  Json j{{"epoch", m.epoch}, {"train_loss", m.train_loss}};
  if (!std::isnan(m.dev_wer)) j["dev_wer_greedy"] = m.dev_wer;
  out << j.dump() << "\n";
}

int run_finetune(const CorpusArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "finetune");
  write_text(dir / "config.snapshot", l.snapshot);
  const corpus::Corpus c = corpus::read_manifest(a.corpus);
  const auto labeled = require_split(c, corpus::Split::kLabeled, a.corpus);
  const auto dev = c.select(corpus::Split::kDev);
  const auto vocab = letter_vocab(l.config);
  ctc::CtcModel model = a.init.empty()
                            ? ctc::CtcModel(l.config.wav2vec, vocab, derive_seed(l.seed, "ctc-scratch"))
                            : ctc::CtcModel::from_pretrained(wav2vec::load_model(a.init), vocab,
                                                             derive_seed(l.seed, "ctc-head"));
  ctc::FinetuneConfig fc = l.config.finetune;
  fc.seed = derive_seed(l.seed, a.init.empty() ? "finetune-scratch" : "finetune-pretrained");
  std::ofstream metrics(dir / "metrics.jsonl");
  const auto log = logger(a.common);
  ctc::FinetuneEpochMetrics last;
  ctc::finetune_run(model, labeled, dev, fc, [&](const ctc::FinetuneEpochMetrics& m) {
    last = m;
    write_finetune_metric(metrics, m);
    if (log) log("finetune epoch " + std::to_string(m.epoch) + " loss " + fmt(m.train_loss));
  });
  model.save(dir / "ctc.ckpt");
  std::cout << "finetune: train loss " << fmt(last.train_loss);
  if (!std::isnan(last.dev_wer)) std::cout << " dev greedy WER " << fmt(last.dev_wer);
  std::cout << " -> " << (dir / "ctc.ckpt").string() << "\n";
  return 0;
}

struct DecodeArgs {
  Common common;
  std::string model;
  std::string corpus;
  std::string lm;
  std::string lm2;
  std::string weights;
  std::string split = "test";
  std::optional<std::size_t> trials;
  std::string alpha_range;
  std::string beta_range;
  std::optional<std::size_t> beam;
};

int run_tune(const DecodeArgs& a) {
  std::vector<std::pair<std::string, std::string>> extra;
  if (a.trials) extra.emplace_back("decode.tune.trials", std::to_string(*a.trials));
  for (const auto& [flag, key] : {std::pair{a.alpha_range, "alpha_range"}, std::pair{a.beta_range, "beta_range"}}) {
    if (flag.empty()) continue;
    const auto [lo, hi] = parse_range(flag, std::string("decode.tune.") + key);
    extra.emplace_back(std::string("decode.tune.") + key, Json::array({lo, hi}).dump());
  }
  const Loaded l = load_config(a.common, extra);
  const fs::path dir = output_dir(a.common, "tune");
  write_text(dir / "config.snapshot", l.snapshot);
  const corpus::Corpus c = corpus::read_manifest(a.corpus);
  const auto dev = require_split(c, corpus::Split::kDev, a.corpus);
  const auto lm = lm::load_lm(a.lm);
  const auto lm2 = maybe_lm(a.lm2);
  auto rec = selftrain::load_recognizer(a.model, lm.get(), l.config.decode.fusion.nbest);
  decode::TuneConfig tc = l.config.decode.tune;
  tc.fusion = l.config.decode.fusion;
  tc.seed = derive_seed(l.seed, "tune");
  const auto result = selftrain::tune_recognizer(*rec, dev, lm2.get(), tc, a.common.threads);
  decode::write_tune_csv(dir / "tune.csv", result);
  const auto& b = result.best;
  Json best{{"trial", b.trial}, {"alpha", b.weights.alpha}, {"beta", b.weights.beta}, {"dev_wer", b.dev_wer}};
  if (b.rescored) {
    best["alpha2"] = b.weights.alpha2;
    best["beta2"] = b.weights.beta2;
  }
  write_json_file(dir / "tune.json", best);
  std::cout << "tune: " << result.table.size() << " trials, best trial " << b.trial << " alpha "
            << fmt(b.weights.alpha) << " beta " << fmt(b.weights.beta) << " dev WER " << fmt(b.dev_wer) << " -> "
            << (dir / "tune.csv").string() << "\n";
  return 0;
}

int run_pseudo_label(const DecodeArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "pseudo-label");
  write_text(dir / "config.snapshot", l.snapshot);
  const corpus::Corpus c = corpus::read_manifest(a.corpus);
  const auto unlabeled = require_split(c, corpus::Split::kUnlabeled, a.corpus);
  const auto lm = lm::load_lm(a.lm);
  const auto lm2 = maybe_lm(a.lm2);
  const ctc::CtcModel model = ctc::CtcModel::load(a.model);
  decode::TwoPassConfig cfg = two_pass_config(read_weights(a.weights, l.config), l.config.decode.fusion);
  cfg.fusion.beam = a.beam.value_or(l.config.decode.pseudo_label_beam);
  cfg.fusion.validate();
  const auto labels = selftrain::pseudo_label(model, unlabeled, lm.get(), lm2.get(), cfg, a.common.threads);
  labels.write_jsonl(dir / "labels.jsonl");
  corpus::write_manifest(dir / "pseudo.jsonl", selftrain::apply_pseudo_labels(unlabeled, labels));
  std::cout << "pseudo-label: " << labels.labels.size() << " utterances, " << labels.empty_count()
            << " empty -> " << (dir / "pseudo.jsonl").string() << "\n";
  return 0;
}

struct FinalArgs {
  Common common;
  std::string corpus;
  std::string pseudo;
  std::string init;
};

int run_final_train(const FinalArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "final-train");
  write_text(dir / "config.snapshot", l.snapshot);
  const corpus::Corpus c = corpus::read_manifest(a.corpus);
  const corpus::Corpus gold = c.subset(corpus::Split::kLabeled);
  if (gold.size() == 0) throw Error(a.corpus + " has no labeled utterances");
  const corpus::Corpus train = selftrain::combine_sets(gold, corpus::read_manifest(a.pseudo));
  std::vector<const corpus::Utterance*> train_ptrs;
  for (const auto& u : train.utterances) train_ptrs.push_back(&u);
  const auto dev = c.select(corpus::Split::kDev);
  const auto& fm = l.config.final_model;
  std::ofstream metrics(dir / "metrics.jsonl");
  const auto log = logger(a.common);
  fs::path ckpt;
  if (fm.variant == selftrain::Variant::kCtcFt) {
    const auto vocab = letter_vocab(l.config);
    std::optional<ctc::CtcModel> model;
    if (a.init.empty()) {
      model.emplace(l.config.wav2vec, vocab, derive_seed(l.seed, "final-init"));
    } else if (read_json_file(sidecar_path(a.init)).value("kind", "") == "ctc") {
      model.emplace(ctc::CtcModel::load(a.init));
    } else {
      model.emplace(ctc::CtcModel::from_pretrained(wav2vec::load_model(a.init), vocab, derive_seed(l.seed, "final-head")));
    }
    ctc::FinetuneConfig fc = fm.finetune;
    fc.seed = derive_seed(l.seed, "final");
    ctc::finetune_run(*model, train_ptrs, dev, fc, [&](const ctc::FinetuneEpochMetrics& m) {
      write_finetune_metric(metrics, m);
      if (log) log("final-train epoch " + std::to_string(m.epoch) + " loss " + fmt(m.train_loss));
    });
    ckpt = dir / "ctc.ckpt";
    model->save(ckpt);
  } else {
    if (!a.init.empty()) throw ConfigError("final.variant", "s2s-scratch trains from scratch; drop --init");
    const auto grammar = corpus::make_grammar(l.config.corpus.grammar, l.config.corpus.grammar_seed);
    const auto pieces = selftrain::word_piece_vocab(c.transcripts(corpus::Split::kLabeled), grammar.symbols(),
                                                    fm.word_pieces);
    seq2seq::S2SModel model(fm.s2s, pieces, derive_seed(l.seed, "s2s-init"));
    seq2seq::S2STrainConfig sc = fm.s2s_train;
    sc.seed = derive_seed(l.seed, "final");
    seq2seq::s2s_train_run(model, train_ptrs, dev, sc, [&](const seq2seq::S2SEpochMetrics& m) {
      metrics << Json{{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"dev_loss", m.dev_loss}}.dump() << "\n";
      if (log) log("final-train epoch " + std::to_string(m.epoch) + " loss " + fmt(m.train_loss));
    });
    ckpt = dir / "s2s.ckpt";
    model.save(ckpt);
  }
  std::cout << "final-train: " << selftrain::to_string(fm.variant) << " on " << train.size() << " utterances ("
            << gold.size() << " gold) -> " << ckpt.string() << "\n";
  return 0;
}

int run_evaluate(const DecodeArgs& a) {
  const Loaded l = load_config(a.common);
  const fs::path dir = output_dir(a.common, "evaluate");
  write_text(dir / "config.snapshot", l.snapshot);
  const corpus::Split split = corpus::parse_split(a.split);
  const corpus::Corpus c = corpus::read_manifest(a.corpus);
  const auto utts = require_split(c, split, a.corpus);
  const auto lm = lm::load_lm(a.lm);
  const auto lm2 = maybe_lm(a.lm2);
  auto rec = selftrain::load_recognizer(a.model, lm.get(), l.config.decode.fusion.nbest);
  const auto w = read_weights(a.weights, l.config);
  const auto paired =
      selftrain::evaluate_recognizer(*rec, utts, lm2.get(), two_pass_config(w, l.config.decode.fusion), a.common.threads);
  std::ofstream hyps(dir / "hyps.jsonl");
  for (std::size_t i = 0; i < utts.size(); ++i) {
    hyps << Json{{"id", utts[i]->id}, {"ref", *utts[i]->transcript}, {"with_lm", paired.hyps_with_lm[i]},
                 {"no_lm", paired.hyps_no_lm[i]}}.dump()
         << "\n";
  }
  auto breakdown = [](const eval::WerBreakdown& b) {
    return Json{{"wer", b.wer()}, {"substitutions", b.substitutions}, {"deletions", b.deletions},
                {"insertions", b.insertions}, {"reference_words", b.reference_words}};
  };
  write_json_file(dir / "wer.json", {{"split", a.split}, {"utterances", utts.size()},
                                     {"with_lm", breakdown(paired.with_lm)}, {"no_lm", breakdown(paired.no_lm)}});
  std::cout << "evaluate: " << a.split << " WER with LM " << fmt(paired.with_lm.wer()) << ", without LM "
            << fmt(paired.no_lm.wer()) << " -> " << (dir / "wer.json").string() << "\n";
  return 0;
}

struct ReportArgs {
  Common common;
  std::string run;
};

int run_report(const ReportArgs& a) {
  const fs::path run(a.run);
  const PipelineConfig config = selftrain::pipeline_config_from_json(Json::parse(read_text(run / "config.snapshot")));
  const fs::path dir = output_dir(a.common, "report");
  std::ifstream in(run / "metrics.jsonl");
  if (!in) throw IoError("cannot open " + (run / "metrics.jsonl").string());
  std::map<std::string, Json> evaluated;
  Json synth;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    const std::string stage = j.value("stage", "");
    if (stage == "synth") synth = j;
    if (stage == "evaluate" && j.contains("arm")) evaluated[j["arm"].get<std::string>()] = j;
  }
  if (synth.is_null()) throw Error(run.string() + ": metrics.jsonl has no synth record");
  eval::ExperimentReport report;
  for (auto arm : {selftrain::Arm::kSupervised, selftrain::Arm::kPretrainOnly, selftrain::Arm::kSelfTrainOnly,
                   selftrain::Arm::kCombined}) {
    eval::ReportRow row;
    row.arm = std::string(selftrain::to_string(arm));
    row.labeled = synth.at("labeled").get<std::size_t>();
    row.unlabeled = synth.at("unlabeled").get<std::size_t>();
    row.ratio = config.corpus.split.ratio;
    row.baseline = selftrain::baseline_arm(arm);
    row.config_hash = hex64(fnv1a64(selftrain::to_json(config).dump()));
    auto it = evaluated.find(row.arm);
    row.absent = it == evaluated.end();
    if (!row.absent) {
      row.dev_wer_lm = it->second.at("dev_wer_lm").get<double>();
      row.dev_wer_nolm = it->second.at("dev_wer_nolm").get<double>();
      row.test_wer_lm = it->second.at("test_wer_lm").get<double>();
      row.test_wer_nolm = it->second.at("test_wer_nolm").get<double>();
    }
    report.rows.push_back(row);
  }
  eval::emit_report(report, dir / "report");
  std::cout << "report: " << evaluated.size() << " of 4 arms present -> " << (dir / "report.csv").string() << "\n";
  return 0;
}

struct PipelineArgs {
  Common common;
  bool no_pretrain = false;
  bool no_selftrain = false;
  std::vector<std::string> arms;
};

selftrain::PipelineOptions pipeline_options(const Common& c, const Loaded& l) {
  selftrain::PipelineOptions o;
  o.threads = c.threads;
  o.snapshot = l.snapshot;
  o.log = logger(c);
  return o;
}

int run_pipeline_cmd(const PipelineArgs& a) {
  std::vector<std::pair<std::string, std::string>> extra;
  if (a.no_pretrain || a.no_selftrain) {
    extra.emplace_back("ablation", Json{{"no_pretrain", a.no_pretrain}, {"no_selftrain", a.no_selftrain}}.dump());
  }
  if (!a.arms.empty()) extra.emplace_back("arms", Json(a.arms).dump());
  const Loaded l = load_config(a.common, extra);
  if (!l.config.seed) throw ConfigError("seed", "the pipeline needs a master seed (--seed or \"seed\" in the config)");
  const fs::path dir = output_dir(a.common, "pipeline-seed" + std::to_string(*l.config.seed));
  const auto run = selftrain::run_pipeline(l.config, dir, pipeline_options(a.common, l));
  std::cout << "pipeline:";
  for (const auto& r : run.arms) std::cout << " " << selftrain::to_string(r.arm) << " test WER " << fmt(r.test_wer_lm) << ";";
  std::cout << " -> " << (dir / "report.csv").string() << "\n";
  return 0;
}

struct RatioArgs {
  Common common;
  std::vector<std::size_t> sizes{25, 50, 100};
  double ratio = 8.6;
};

int run_ratio(const RatioArgs& a) {
  const Loaded l = load_config(a.common);
  if (!l.config.seed) throw ConfigError("seed", "ratio-experiment needs a master seed (--seed or \"seed\" in the config)");
  const fs::path dir = output_dir(a.common, "ratio-seed" + std::to_string(*l.config.seed));
  write_text(dir / "config.snapshot", l.snapshot);
  const auto report = selftrain::ratio_experiment(l.config, a.sizes, a.ratio, dir, pipeline_options(a.common, l));
  std::cout << "ratio-experiment: " << a.sizes.size() << " labeled sizes at ratio " << fmt(a.ratio) << " -> "
            << (dir / "ratio.csv").string() << "\n";
  return 0;
}

struct GradArgs {
  double tolerance = 1e-4;
  std::string filter;
  bool quiet = false;
};

int run_grad_check(const GradArgs& a) {
  std::size_t failed = 0;
  GradSuiteEntry worst;
  const auto entries = run_gradient_suite(a.tolerance, a.filter, [&](const GradSuiteEntry& e) {
    if (!a.quiet) {
      std::cerr << (e.passed ? "ok   " : "FAIL ") << e.name << " max rel " << e.result.max_relative_error << " ("
                << e.result.entries_checked << " entries)\n";
    }
    failed += e.passed ? 0 : 1;
    if (e.result.max_relative_error >= worst.result.max_relative_error) worst = e;
  });
  if (entries.empty()) throw Error("grad-check: no case matches \"" + a.filter + "\"");
  std::cout << "grad-check: " << entries.size() - failed << "/" << entries.size() << " passed, max relative error "
            << worst.result.max_relative_error << " (" << worst.name << ")\n";
  return failed == 0 ? 0 : 1;
}

void print_error(const std::string& kind, const std::string& message, const Json& extra = Json::object()) {
  Json j{{"error", kind}, {"message", message}};
  j.update(extra);
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semiasr: pre-training and self-training for speech recognition at desk scale"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate the synthetic corpus and LM text");
  add_common(s, synth.common);
  s->add_option("--utterances", synth.utterances, "pool size with the default 10/70/10/10 split");

  LmArgs lmargs;
  s = app.add_subcommand("lm-train", "train the n-gram and (optionally) neural LM");
  add_common(s, lmargs.common);
  s->add_option("--text", lmargs.text, "training text, one sentence per line (default: generated)");
  s->add_option("--dev", lmargs.dev, "manifest whose dev split is used for perplexity");
  s->add_option("--neural", lmargs.neural, "also train the neural LM (default: lm.rescore)");

  CorpusArgs pre;
  s = app.add_subcommand("pretrain", "contrastive pre-training on the unlabeled split");
  add_common(s, pre.common);
  s->add_option("--corpus", pre.corpus, "corpus manifest")->required();

  CorpusArgs fine;
  s = app.add_subcommand("finetune", "CTC fine-tuning on the labeled split");
  add_common(s, fine.common);
  s->add_option("--corpus", fine.corpus, "corpus manifest")->required();
  s->add_option("--init", fine.init, "pre-trained wav2vec checkpoint (default: random init)");

  DecodeArgs tune;
  s = app.add_subcommand("tune", "random search over LM weight and word insertion penalty");
  add_common(s, tune.common);
  s->add_option("--model", tune.model, "CTC or seq2seq checkpoint")->required();
  s->add_option("--corpus", tune.corpus, "manifest with a dev split")->required();
  s->add_option("--lm", tune.lm, "first-pass LM")->required();
  s->add_option("--lm2", tune.lm2, "second-pass rescoring LM");
  s->add_option("--trials", tune.trials, "number of trials");
  s->add_option("--alpha-range", tune.alpha_range, "lo:hi");
  s->add_option("--beta-range", tune.beta_range, "lo:hi");

  DecodeArgs label;
  s = app.add_subcommand("pseudo-label", "transcribe the unlabeled split with a tuned model and LM");
  add_common(s, label.common);
  s->add_option("--model", label.model, "CTC checkpoint")->required();
  s->add_option("--corpus", label.corpus, "corpus manifest")->required();
  s->add_option("--lm", label.lm, "first-pass LM")->required();
  s->add_option("--lm2", label.lm2, "second-pass rescoring LM");
  s->add_option("--weights", label.weights, "tune.json from the tune subcommand");
  s->add_option("--beam", label.beam, "beam size (default: decode.pseudo_label_beam)");

  FinalArgs fin;
  s = app.add_subcommand("final-train", "train the final model on gold plus pseudo-labeled data");
  add_common(s, fin.common);
  s->add_option("--corpus", fin.corpus, "corpus manifest (labeled and dev splits)")->required();
  s->add_option("--pseudo", fin.pseudo, "pseudo-labeled manifest")->required();
  s->add_option("--init", fin.init, "wav2vec or CTC checkpoint to start from (ctc-ft only)");

  DecodeArgs ev;
  s = app.add_subcommand("evaluate", "WER with and without the LM");
  add_common(s, ev.common);
  s->add_option("--model", ev.model, "CTC or seq2seq checkpoint")->required();
  s->add_option("--corpus", ev.corpus, "corpus manifest")->required();
  s->add_option("--split", ev.split, "dev or test")->check(CLI::IsMember({"dev", "test"}));
  s->add_option("--lm", ev.lm, "first-pass LM")->required();
  s->add_option("--lm2", ev.lm2, "second-pass rescoring LM");
  s->add_option("--weights", ev.weights, "tune.json from the tune subcommand");

  ReportArgs rep;
  s = app.add_subcommand("report", "rebuild the result table of a pipeline run");
  add_common(s, rep.common);
  s->add_option("--run", rep.run, "pipeline run directory")->required()->check(CLI::ExistingDirectory);

  PipelineArgs pipe;
  s = app.add_subcommand("pipeline", "run every stage for the requested arms");
  add_common(s, pipe.common);
  s->add_flag("--no-pretrain", pipe.no_pretrain, "ablation: skip pre-training");
  s->add_flag("--no-selftrain", pipe.no_selftrain, "ablation: skip self-training");
  s->add_option("--arms", pipe.arms, "subset of supervised, pretrain, selftrain, combined")->delimiter(',');

  RatioArgs ratio;
  s = app.add_subcommand("ratio-experiment", "pretrain vs combined across labeled sizes at a fixed ratio");
  add_common(s, ratio.common);
  s->add_option("--sizes", ratio.sizes, "labeled sizes")->delimiter(',');
  s->add_option("--ratio", ratio.ratio, "unlabeled / labeled")->check(CLI::PositiveNumber);

  GradArgs grad;
  s = app.add_subcommand("grad-check", "finite-difference check of every op and model");
  s->add_option("--tolerance", grad.tolerance, "maximum relative error")->check(CLI::PositiveNumber);
  s->add_option("--filter", grad.filter, "only cases whose name contains this");
  s->add_flag("--quiet", grad.quiet, "summary line only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synth") return run_synth(synth);
    if (cmd == "lm-train") return run_lm_train(lmargs);
    if (cmd == "pretrain") return run_pretrain(pre);
    if (cmd == "finetune") return run_finetune(fine);
    if (cmd == "tune") return run_tune(tune);
    if (cmd == "pseudo-label") return run_pseudo_label(label);
    if (cmd == "final-train") return run_final_train(fin);
    if (cmd == "evaluate") return run_evaluate(ev);
    if (cmd == "report") return run_report(rep);
    if (cmd == "pipeline") return run_pipeline_cmd(pipe);
    if (cmd == "ratio-experiment") return run_ratio(ratio);
    if (cmd == "grad-check") return run_grad_check(grad);
    return 2;
  } catch (const ConfigError& e) {
    print_error("config", e.message(), {{"path", e.path()}});
  } catch (const selftrain::StageError& e) {
    print_error("stage", e.what(), {{"stage", e.stage()}});
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
  }
  return 1;
}
