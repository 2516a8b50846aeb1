// corpus/synth.cpp
#include "semiasr/corpus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "semiasr/error.hpp"
#include "semiasr/util.hpp"

namespace semiasr::corpus {

namespace {

std::size_t draw(const std::vector<double>& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    x -= probs[i];
    if (x < 0.0) return i;
  }
  // rounding residue: last non-zero entry
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return 0;
}

float to_pcm16_grid(double v) {
  const double clipped = std::clamp(v, -1.0, 32767.0 / 32768.0);
  return static_cast<float>(std::round(clipped * 32768.0) / 32768.0);
}

}  // namespace

void SyntheticGrammar::validate() const {
  if (lexicon.empty()) throw ConfigError("grammar.lexicon", "lexicon is empty");
  if (templates.empty()) throw ConfigError("grammar.templates", "no symbol templates");
  if (start.size() != lexicon.size()) throw ConfigError("grammar.start", "size differs from lexicon");
  if (transitions.size() != lexicon.size()) throw ConfigError("grammar.transitions", "row count differs from lexicon");
  auto check_row = [&](const std::vector<double>& row, const std::string& path) {
    if (row.size() != lexicon.size()) throw ConfigError(path, "row size differs from lexicon");
    double s = 0.0;
    for (double p : row) {
      if (p < 0.0) throw ConfigError(path, "negative probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError(path, "row sums to " + std::to_string(s));
  };
  check_row(start, "grammar.start");
  for (std::size_t i = 0; i < transitions.size(); ++i)
    check_row(transitions[i], "grammar.transitions[" + std::to_string(i) + "]");
  const std::string syms = symbols();
  for (const auto& w : lexicon) {
    if (w.empty()) throw ConfigError("grammar.lexicon", "empty word");
    for (char c : w)
      if (c == ' ' || syms.find(c) == std::string::npos)
        throw ConfigError("grammar.lexicon", "word '" + w + "' is not spellable from the symbol set");
  }
  if (symbols().find(' ') == std::string::npos) throw ConfigError("grammar.templates", "no word separator template");
  if (min_words < 1 || max_words < min_words) throw ConfigError("grammar.min_words", "invalid sentence length range");
}

const SymbolTemplate& SyntheticGrammar::template_for(char c) const {
  for (const auto& t : templates)
    if (t.symbol == c) return t;
  throw Error(std::string("no acoustic template for symbol '") + c + "'");
}

std::string SyntheticGrammar::symbols() const {
  std::string s;
  for (const auto& t : templates) s += t.symbol;
  return s;
}

SyntheticGrammar make_grammar(const GrammarOptions& o, std::uint64_t seed) {
  if (o.lexicon_size == 0) throw ConfigError("grammar.lexicon_size", "lexicon is empty");
  if (o.letters.empty()) throw ConfigError("grammar.letters", "no letters");
  std::mt19937_64 rng(seed);
  SyntheticGrammar g;
  for (std::size_t i = 0; i < o.letters.size(); ++i) {
    g.templates.push_back({o.letters[i], o.low_hz + o.step_hz * static_cast<double>(i), o.duration_ms});
  }
  g.templates.push_back({' ', o.separator_hz, o.duration_ms});

  std::set<std::string> seen;
  std::uniform_int_distribution<std::size_t> len(o.min_word_length, o.max_word_length);
  std::uniform_int_distribution<std::size_t> letter(0, o.letters.size() - 1);
  std::size_t attempts = 0;
  while (g.lexicon.size() < o.lexicon_size) {
    if (++attempts > 100000) throw ConfigError("grammar.lexicon_size", "cannot draw enough distinct words");
    std::string w;
    const std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) w += o.letters[letter(rng)];
    if (seen.insert(w).second) g.lexicon.push_back(w);
  }

  const std::size_t v = g.lexicon.size();
  g.start.assign(v, 1.0 / static_cast<double>(v));
  std::uniform_real_distribution<double> weight(0.2, 1.0);
  const std::size_t k = std::clamp<std::size_t>(o.successors, 1, v);
  std::vector<std::size_t> order(v);
  for (std::size_t i = 0; i < v; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> row(v, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += (row[order[j]] = weight(rng));
    for (double& p : row) p /= total;
    g.transitions.push_back(std::move(row));
  }
  g.min_words = o.min_words;
  g.max_words = o.max_words;
  g.noise_sigma = o.noise_sigma;
  g.amplitude = o.amplitude;
  g.pitch_jitter = o.pitch_jitter;
  g.amplitude_jitter = o.amplitude_jitter;
  g.validate();
  return g;
}

std::vector<std::string> sample_sentence(const SyntheticGrammar& g, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(g.min_words, g.max_words);
  const std::size_t n = len(rng);
  std::vector<std::string> words;
  std::size_t w = draw(g.start, rng);
  words.push_back(g.lexicon[w]);
  while (words.size() < n) {
    w = draw(g.transitions[w], rng);
    words.push_back(g.lexicon[w]);
  }
  return words;
}

std::vector<std::string> generate_text(const SyntheticGrammar& grammar, std::uint64_t seed, std::size_t count) {
  grammar.validate();
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(join_words(sample_sentence(grammar, rng)));
  return out;
}

std::size_t samples_per_symbol(const SymbolTemplate& t) {
  return static_cast<std::size_t>(std::llround(t.duration_ms * kSampleRate / 1000.0));
}

std::vector<float> render(const SyntheticGrammar& g, const std::string& transcript, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double pitch = 1.0 + g.pitch_jitter * jitter(rng);
  const double amp = g.amplitude * (1.0 + g.amplitude_jitter * jitter(rng));
  std::vector<float> out;
  for (char c : transcript) {
    const SymbolTemplate& t = g.template_for(c);
    const std::size_t n = samples_per_symbol(t);
    const double f = t.frequency_hz * pitch;
    const double phi = phase(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      if (f > 0.0) s = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / kSampleRate + phi);
      s += g.noise_sigma * noise(rng);
      out.push_back(to_pcm16_grid(s));
    }
  }
  return out;
}

Corpus synth_generate(const SyntheticGrammar& grammar, std::uint64_t seed, std::size_t count, const SplitPlan& plan) {
  grammar.validate();
  if (count == 0) throw ConfigError("synth.utterances", "must be at least 1");
  const double total = plan.labeled + plan.unlabeled + plan.dev + plan.test;
  if (std::abs(total - 1.0) > 1e-9 || plan.labeled < 0 || plan.unlabeled < 0 || plan.dev < 0 || plan.test < 0) {
    throw ConfigError("synth.split_plan", "fractions must be non-negative and sum to 1");
  }
  std::mt19937_64 rng(seed);
  const auto n = static_cast<double>(count);
  std::vector<std::size_t> counts = {static_cast<std::size_t>(std::llround(plan.labeled * n)),
                                     static_cast<std::size_t>(std::llround(plan.unlabeled * n)),
                                     static_cast<std::size_t>(std::llround(plan.dev * n)), 0};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    counts[i] = std::min(counts[i], count - used);
    used += counts[i];
  }
  counts[3] = count - used;
  std::vector<Split> splits;
  const Split kinds[] = {Split::kLabeled, Split::kUnlabeled, Split::kDev, Split::kTest};
  for (std::size_t i = 0; i < 4; ++i) splits.insert(splits.end(), counts[i], kinds[i]);
  std::shuffle(splits.begin(), splits.end(), rng);

  Corpus corpus;
  corpus.utterances.reserve(count);
  char id[32];
  for (std::size_t i = 0; i < count; ++i) {
    Utterance u;
    std::snprintf(id, sizeof id, "utt-%05zu", i);
    u.id = id;
    const std::string text = join_words(sample_sentence(grammar, rng));
    u.samples = render(grammar, text, rng);
    u.split = splits[i];
    if (u.split == Split::kUnlabeled) {
      u.reference = text;
    } else {
      u.transcript = text;
    }
    corpus.utterances.push_back(std::move(u));
  }
  return corpus;
}

}  // namespace semiasr::corpus
