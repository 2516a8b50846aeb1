// tests/unit/test_corpus.cpp
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "semiasr/corpus/logmel.hpp"
#include "semiasr/corpus/manifest.hpp"
#include "semiasr/corpus/split.hpp"
#include "semiasr/corpus/synth.hpp"
#include "semiasr/corpus/vocab.hpp"
#include "semiasr/error.hpp"
#include "semiasr/util.hpp"
#include "test_util.hpp"

namespace semiasr::corpus {
namespace {

SyntheticGrammar small_grammar() { return make_grammar(GrammarOptions{}, 1); }

TEST(Synth, SameSeedGivesBitIdenticalCorpora) {
  const auto g = small_grammar();
  const Corpus a = synth_generate(g, 5, 20);
  const Corpus b = synth_generate(g, 5, 20);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.utterances[i].samples, b.utterances[i].samples);
    EXPECT_EQ(a.utterances[i].transcript, b.utterances[i].transcript);
    EXPECT_EQ(a.utterances[i].split, b.utterances[i].split);
  }
  const Corpus c = synth_generate(g, 6, 20);
  EXPECT_NE(a.utterances[0].samples, c.utterances[0].samples);
}

TEST(Synth, WaveformLengthIsSymbolCountTimes800) {
  const auto g = small_grammar();
  std::mt19937_64 rng(3);
  for (const std::string text : {"ab", "abc de", "j"}) {
    EXPECT_EQ(render(g, text, rng).size(), text.size() * 800);
  }
  const Corpus c = synth_generate(g, 1, 10);
  for (const auto& u : c.utterances) {
    const std::string& t = u.transcript ? *u.transcript : *u.reference;
    EXPECT_EQ(u.samples.size(), t.size() * 800);
  }
}

TEST(Synth, TranscriptPresentExactlyForSupervisedSplits) {
  const Corpus c = synth_generate(small_grammar(), 2, 100);
  for (const auto& u : c.utterances) {
    EXPECT_EQ(u.transcript.has_value(), u.split != Split::kUnlabeled) << u.id;
    EXPECT_FALSE(u.samples.empty());
  }
}

TEST(Synth, GrammarInvariants) {
  const auto g = small_grammar();
  EXPECT_EQ(g.lexicon.size(), 50u);
  for (const auto& row : g.transitions) {
    double s = 0.0;
    for (double p : row) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  GrammarOptions o;
  o.lexicon_size = 0;
  EXPECT_THROW(make_grammar(o, 1), Error);
  SyntheticGrammar empty = g;
  empty.lexicon.clear();
  EXPECT_THROW(synth_generate(empty, 1, 5), Error);
}

TEST(Synth, BigramFrequenciesMatchTransitionTable) {
  const auto g = small_grammar();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < g.lexicon.size(); ++i) index[g.lexicon[i]] = i;
  std::vector<std::vector<double>> counts(g.lexicon.size(), std::vector<double>(g.lexicon.size(), 0.0));
  std::size_t words = 0, sentences = 0;
  std::mt19937_64 rng(99);
  while (words < 10000) {
    const auto s = sample_sentence(g, rng);
    words += s.size();
    ++sentences;
    for (std::size_t i = 1; i < s.size(); ++i) counts[index[s[i - 1]]][index[s[i]]] += 1.0;
  }
  std::size_t cells = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double n = 0.0;
    for (double c : counts[i]) n += c;
    for (std::size_t j = 0; j < counts.size(); ++j) {
      const double p = g.transitions[i][j];
      if (p == 0.0) {
        EXPECT_EQ(counts[i][j], 0.0);
        continue;
      }
      const double sd = std::sqrt(n * p * (1.0 - p));
      EXPECT_LE(std::abs(counts[i][j] - n * p), 3.0 * sd + 1e-9) << "row " << i << " col " << j;
      ++cells;
    }
  }
  EXPECT_GT(cells, 100u);
}

TEST(LogMel, FrameCountFromFramingLoop) {
  LogMelConfig c;
  std::size_t frames = 0;
  for (std::size_t start = 0; start + c.window <= 1600; start += c.hop) ++frames;
  EXPECT_EQ(frames, 8u);
  EXPECT_EQ(frame_count(1600, c), 8u);
  const std::vector<float> x(1600, 0.1f);
  const auto f = logmel(x, c);
  EXPECT_EQ(f.rows(), 8u);
  EXPECT_EQ(f.cols(), 40u);
}

TEST(LogMel, SilenceIsLogFloor) {
  LogMelConfig c;
  const std::vector<float> x(2000, 0.0f);
  const auto f = logmel(x, c);
  for (double v : f.values()) EXPECT_EQ(v, std::log(c.floor));
}

TEST(LogMel, SineAtBinCentreIsArgmax) {
  LogMelConfig c;
  for (std::size_t bin : {5u, 12u, 20u, 33u}) {
    const double hz = mel_center_hz(c, bin);
    std::vector<float> x(4000);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / 16000.0));
    const auto f = logmel(x, c);
    for (std::size_t r = 0; r < f.rows(); ++r) {
      std::size_t best = 0;
      for (std::size_t b = 1; b < f.cols(); ++b)
        if (f(r, b) > f(r, best)) best = b;
      EXPECT_EQ(best, bin) << "frame " << r << " at " << hz << " Hz";
    }
  }
}

TEST(LogMel, ShiftByOneHopShiftsFramesByOne) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 0.2);
  LogMelConfig c;
  std::vector<float> x(3000);
  for (float& v : x) v = static_cast<float>(n(rng));
  const std::vector<float> shifted(x.begin() + static_cast<std::ptrdiff_t>(c.hop), x.end());
  const auto a = logmel(x, c);
  const auto b = logmel(shifted, c);
  ASSERT_EQ(b.rows() + 1, a.rows());
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t k = 0; k < c.bins; ++k) EXPECT_NEAR(b(r, k), a(r + 1, k), 1e-9);
}

TEST(LogMel, TooShortInputThrows) {
  const std::vector<float> x(399, 0.0f);
  EXPECT_THROW(logmel(x), Error);
}

TEST(Vocab, LettersEncodeOnePerCharacter) {
  const auto v = Vocabulary::letters("ab ");
  EXPECT_EQ(v.encode("ab a"), (std::vector<int>{0, 1, 2, 0}));
  EXPECT_EQ(v.decode(v.encode("ab a")), "ab a");
  try {
    v.encode("abz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'z'"), std::string::npos);
  }
}

TEST(Vocab, BpeFirstMergeFromPairCounts) {
  const auto v = bpe_train({"ab ab ab"}, 4);
  ASSERT_EQ(v.merges().size(), 1u);
  EXPECT_EQ(v.merges()[0], (std::pair<std::string, std::string>{"a", "b"}));
  EXPECT_EQ(v.encode("ab").size(), 1u);
}

TEST(Vocab, BpeMergeTiesBrokenLexicographically) {
  // every adjacent pair occurs once; ("b","c") < ("c","d") < ...
  const auto v = bpe_train({"dcba bcd"}, 6);
  ASSERT_FALSE(v.merges().empty());
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const std::string w : {"dcba", "bcd"})
    for (std::size_t i = 0; i + 1 < w.size(); ++i) counts[{std::string(1, w[i]), std::string(1, w[i + 1])}]++;
  int best = 0;
  std::pair<std::string, std::string> expected;
  for (const auto& [pair, n] : counts)
    if (n > best) best = n, expected = pair;
  EXPECT_EQ(v.merges()[0], expected);
}

TEST(Vocab, AlphabetSizedTargetGivesLetters) {
  const auto v = bpe_train({"abc cab"}, 4);
  EXPECT_TRUE(v.merges().empty());
  EXPECT_EQ(v.size(), 4u);
  EXPECT_THROW(bpe_train({}, 10), Error);
}

TEST(Vocab, RoundTripOnTrainingTranscripts) {
  const auto g = small_grammar();
  const auto text = generate_text(g, 3, 300);
  for (std::size_t size : {11u, 40u, 120u}) {
    const auto v = bpe_train(text, size);
    for (const auto& t : text) EXPECT_EQ(v.decode(v.encode(t)), t);
  }
}

TEST(Vocab, RandomInDomainRoundTrip) {
  const auto g = small_grammar();
  const auto v = bpe_train(generate_text(g, 3, 300), 60);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 20), sym(0, 10);
  const std::string alphabet = "abcdefghij ";
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (int k = len(rng); k > 0; --k) s += alphabet[static_cast<std::size_t>(sym(rng))];
    EXPECT_EQ(v.decode(v.encode(s)), s);
  }
}

TEST(Vocab, FileRoundTrip) {
  const auto dir = semiasr::testing::temp_dir("vocab");
  const auto v = bpe_train(generate_text(small_grammar(), 3, 100), 30);
  v.save(dir / "wp.vocab");
  const auto w = Vocabulary::load(dir / "wp.vocab");
  EXPECT_EQ(w.tokens(), v.tokens());
  EXPECT_EQ(w.merges(), v.merges());
  EXPECT_EQ(w.kind(), VocabKind::kWordPiece);
}

Corpus pool(std::size_t n) { return synth_generate(small_grammar(), 11, n, {1.0, 0.0, 0.0, 0.0}); }

TEST(Split, RatioRoundingAndDisjointness) {
  SplitRequest r{10, 8.6, 5, 5};
  EXPECT_EQ(unlabeled_count(r), 86u);
  const Corpus base = pool(120);
  const Corpus c = split_corpus(base, r, 3);
  std::map<Split, std::size_t> sizes;
  std::set<std::string> ids;
  std::set<std::string> base_ids;
  for (const auto& u : base.utterances) base_ids.insert(u.id);
  for (const auto& u : c.utterances) {
    sizes[u.split]++;
    EXPECT_TRUE(ids.insert(u.id).second) << "duplicate " << u.id;
    EXPECT_TRUE(base_ids.count(u.id));
    if (u.split == Split::kUnlabeled) {
      EXPECT_FALSE(u.transcript.has_value());
      EXPECT_TRUE(u.reference.has_value());
    }
  }
  EXPECT_EQ(sizes[Split::kLabeled], 10u);
  EXPECT_EQ(sizes[Split::kUnlabeled], 86u);
  EXPECT_EQ(sizes[Split::kDev], 5u);
  EXPECT_EQ(sizes[Split::kTest], 5u);
  const Corpus again = split_corpus(base, r, 3);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c.utterances[i].id, again.utterances[i].id);
}

TEST(Split, ZeroRatioAndInsufficientData) {
  const Corpus base = pool(30);
  const Corpus c = split_corpus(base, {10, 0.0, 5, 5}, 1);
  EXPECT_TRUE(c.select(Split::kUnlabeled).empty());
  try {
    split_corpus(base, {10, 8.6, 5, 5}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("106"), std::string::npos) << e.what();
  }
}

TEST(Manifest, RoundTripInlineAndWav) {
  const auto dir = semiasr::testing::temp_dir("manifest");
  Corpus c = synth_generate(small_grammar(), 4, 6);
  c.utterances[0].origin = Origin::kPseudo;
  for (bool inline_audio : {true, false}) {
    const auto path = dir / (inline_audio ? "inline.jsonl" : "wav.jsonl");
    ManifestOptions o;
    o.inline_audio = inline_audio;
    write_manifest(path, c, o);
    const Corpus r = read_manifest(path);
    ASSERT_EQ(r.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_EQ(r.utterances[i].id, c.utterances[i].id);
      EXPECT_EQ(r.utterances[i].samples, c.utterances[i].samples);
      EXPECT_EQ(r.utterances[i].transcript, c.utterances[i].transcript);
      EXPECT_EQ(r.utterances[i].reference, c.utterances[i].reference);
      EXPECT_EQ(r.utterances[i].split, c.utterances[i].split);
      EXPECT_EQ(r.utterances[i].origin, c.utterances[i].origin);
    }
  }
}

TEST(Manifest, Base64KnownVectors) {
  const std::string s = "foobar";
  const std::vector<unsigned char> bytes(s.begin(), s.end());
  EXPECT_EQ(base64_encode(bytes), "Zm9vYmFy");
  EXPECT_EQ(base64_encode(std::span(bytes).first(4)), "Zm9vYg==");
  EXPECT_EQ(base64_decode("Zm9vYg=="), std::vector<unsigned char>(bytes.begin(), bytes.begin() + 4));
}

}  // namespace
}  // namespace semiasr::corpus
