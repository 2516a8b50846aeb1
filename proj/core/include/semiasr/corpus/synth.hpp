// semiasr/corpus/synth.hpp
//
// Synthetic speech-like corpus: every symbol of a transcript is rendered as a
// fixed-length sine segment at the symbol's frequency plus white Gaussian noise.
// Transcripts follow a sparse bigram grammar over a fixed lexicon, so a language
// model has real structure to learn.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semiasr/corpus/utterance.hpp"

namespace semiasr::corpus {

struct SymbolTemplate {
  char symbol = 'a';
  double frequency_hz = 0.0;  ///< 0 renders noise only
  double duration_ms = 50.0;
};

struct SyntheticGrammar {
  std::vector<SymbolTemplate> templates;           ///< letters plus ' ' (word separator)
  std::vector<std::string> lexicon;
  std::vector<double> start;                       ///< first-word distribution
  std::vector<std::vector<double>> transitions;    ///< row i: next-word distribution after lexicon[i]
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  double noise_sigma = 0.3;
  double amplitude = 0.5;
  /// Per-utterance relative spread of all template frequencies (uniform in [-j, j]).
  double pitch_jitter = 0.0;
  /// Per-utterance relative spread of the amplitude.
  double amplitude_jitter = 0.0;

  /// Throws when a transition row does not sum to 1 or a word is not spellable.
  void validate() const;
  const SymbolTemplate& template_for(char c) const;
  std::string symbols() const;
};

struct GrammarOptions {
  std::string letters = "abcdefghij";
  std::size_t lexicon_size = 50;
  std::size_t min_word_length = 2;
  std::size_t max_word_length = 4;
  std::size_t successors = 4;       ///< non-zero entries per transition row
  double low_hz = 400.0;
  double step_hz = 200.0;
  double separator_hz = 0.0;
  double duration_ms = 50.0;
  std::size_t min_words = 2;
  std::size_t max_words = 4;
  double noise_sigma = 0.3;
  double amplitude = 0.5;
  double pitch_jitter = 0.0;
  double amplitude_jitter = 0.0;
};

/// Builds a grammar with a random lexicon and sparse random bigram table.
SyntheticGrammar make_grammar(const GrammarOptions& options, std::uint64_t seed);

struct SplitPlan {
  double labeled = 0.1;
  double unlabeled = 0.7;
  double dev = 0.1;
  double test = 0.1;
};

/// Draws a word sequence from the bigram grammar.
std::vector<std::string> sample_sentence(const SyntheticGrammar& grammar, std::mt19937_64& rng);
/// Text-only corpus of `count` sentences (for language-model training).
std::vector<std::string> generate_text(const SyntheticGrammar& grammar, std::uint64_t seed, std::size_t count);
/// Renders a transcript to PCM16-grid samples.
std::vector<float> render(const SyntheticGrammar& grammar, const std::string& transcript, std::mt19937_64& rng);
std::size_t samples_per_symbol(const SymbolTemplate& t);

/// Deterministic corpus of `count` utterances. Unlabeled utterances keep their
/// text only as a hidden reference.
Corpus synth_generate(const SyntheticGrammar& grammar, std::uint64_t seed, std::size_t count,
                      const SplitPlan& plan = {});

}  // namespace semiasr::corpus
