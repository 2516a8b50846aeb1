// selftrain/recognizer.cpp
#include "semiasr/selftrain/recognizer.hpp"

#include "semiasr/ctc/ctc.hpp"
#include "semiasr/error.hpp"
#include "semiasr/json_util.hpp"
#include "semiasr/util.hpp"

namespace semiasr::selftrain {

using corpus::Utterance;

CtcRecognizer::CtcRecognizer(std::shared_ptr<const ctc::CtcModel> model, const lm::LmScorer* lm)
    : model_(std::move(model)), lm_(lm) {}

void CtcRecognizer::prepare(const std::vector<const Utterance*>& utts, std::size_t threads) {
  emissions_.assign(utts.size(), {});
  parallel_for(utts.size(), threads, [&](std::size_t i) { emissions_[i] = model_->emissions(utts[i]->samples); });
  prepared_ = utts.size();
}

decode::NBestList CtcRecognizer::tune_pass(std::size_t i, const decode::FusionConfig& f) { return first_pass(i, f); }

decode::NBestList CtcRecognizer::first_pass(std::size_t i, const decode::FusionConfig& f) {
  return decode::fused_beam_search(emissions_.at(i), model_->vocab(), lm_, f);
}

std::string CtcRecognizer::no_lm(std::size_t i) {
  return normalize_spaces(ctc::ctc_greedy_text(emissions_.at(i), model_->vocab()));
}

S2SRecognizer::S2SRecognizer(std::shared_ptr<const seq2seq::S2SModel> model, const lm::LmScorer* lm,
                             std::size_t nbest)
    : model_(std::move(model)), lm_(lm), nbest_(nbest) {}

void S2SRecognizer::prepare(const std::vector<const Utterance*>& utts, std::size_t threads) {
  features_.assign(utts.size(), {});
  cached_.assign(utts.size(), std::nullopt);
  parallel_for(utts.size(), threads, [&](std::size_t i) { features_[i] = model_->features(utts[i]->samples); });
  prepared_ = utts.size();
}

decode::NBestList S2SRecognizer::tune_pass(std::size_t i, const decode::FusionConfig& f) {
  if (!cached_.at(i)) {
    seq2seq::S2SDecodeConfig c;
    c.fusion.beam = nbest_;
    c.fusion.nbest = nbest_;
    cached_[i] = seq2seq::s2s_beam_decode(*model_, features_[i], lm_, c);
  }
  decode::NBestList list = *cached_[i];
  list.alpha = f.alpha;
  list.beta = f.beta;
  for (auto& h : list.hyps) {
    h.score = h.am;
    if (f.alpha != 0.0) h.score += f.alpha * h.lm;
    if (f.beta != 0.0) h.score += f.beta * static_cast<double>(h.words);
  }
  return decode::nbest_prune(list, f.nbest);
}

decode::NBestList S2SRecognizer::first_pass(std::size_t i, const decode::FusionConfig& f) {
  seq2seq::S2SDecodeConfig c;
  c.fusion = f;
  return seq2seq::s2s_beam_decode(*model_, features_.at(i), lm_, c);
}

std::string S2SRecognizer::no_lm(std::size_t i) {
  seq2seq::S2SDecodeConfig c;
  c.fusion.beam = 1;
  c.fusion.nbest = 1;
  const auto list = seq2seq::s2s_beam_decode(*model_, features_.at(i), nullptr, c);
  return list.hyps.empty() ? std::string() : list.best().text;
}

std::unique_ptr<Recognizer> load_recognizer(const std::filesystem::path& checkpoint, const lm::LmScorer* lm,
                                            std::size_t nbest) {
  const Json meta = read_json_file(sidecar_path(checkpoint));
  const std::string kind = meta.value("kind", "");
  if (kind == "ctc") {
    return std::make_unique<CtcRecognizer>(std::make_shared<const ctc::CtcModel>(ctc::CtcModel::load(checkpoint)), lm);
  }
  if (kind == "s2s") {
    return std::make_unique<S2SRecognizer>(
        std::make_shared<const seq2seq::S2SModel>(seq2seq::S2SModel::load(checkpoint)), lm, nbest);
  }
  throw IoError(checkpoint.string() + ": expected a \"ctc\" or \"s2s\" checkpoint, sidecar kind is \"" + kind + "\"");
}

std::vector<std::string> references_of(const std::vector<const Utterance*>& utts) {
  std::vector<std::string> refs;
  for (const Utterance* u : utts) {
    if (!u->transcript) throw Error("utterance " + u->id + " has no reference transcript");
    refs.push_back(*u->transcript);
  }
  return refs;
}

decode::TuneResult tune_recognizer(Recognizer& rec, const std::vector<const Utterance*>& dev,
                                   const lm::LmScorer* lm2, const decode::TuneConfig& config, std::size_t threads) {
  const auto refs = references_of(dev);
  rec.prepare(dev, threads);
  return decode::tune_random_search(
      refs, [&](std::size_t i, const decode::FusionConfig& f) { return rec.tune_pass(i, f); }, lm2, config);
}

eval::PairedWer evaluate_recognizer(Recognizer& rec, const std::vector<const Utterance*>& utts,
                                    const lm::LmScorer* lm2, const decode::TwoPassConfig& config,
                                    std::size_t threads) {
  const auto refs = references_of(utts);
  rec.prepare(utts, threads);
  return eval::evaluate_arm(
      refs,
      [&](std::size_t i) {
        const auto list =
            decode::two_pass([&](const decode::FusionConfig& f) { return rec.first_pass(i, f); }, lm2, config);
        return list.hyps.empty() ? std::string() : list.best().text;
      },
      [&](std::size_t i) { return rec.no_lm(i); }, threads);
}

}  // namespace semiasr::selftrain
