// semiasr/corpus/utterance.hpp
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semiasr::corpus {

enum class Split { kLabeled, kUnlabeled, kDev, kTest };
enum class Origin { kGold, kPseudo };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);
std::string_view to_string(Origin o);
Origin parse_origin(std::string_view s);

inline constexpr int kSampleRate = 16000;

struct Utterance {
  std::string id;
  std::vector<float> samples;  ///< mono, 16 kHz, values on the PCM16 grid in [-1, 1)
  std::optional<std::string> transcript;
  Split split = Split::kLabeled;
  Origin origin = Origin::kGold;
  /// Held-out reference text of an unlabeled utterance. Never used for training;
  /// only for measuring pseudo-label quality.
  std::optional<std::string> reference;
};

struct Corpus {
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  std::vector<const Utterance*> select(Split split) const;
  /// Copy of the utterances in `split`, in corpus order.
  Corpus subset(Split split) const;
  std::vector<std::string> transcripts(Split split) const;
};

}  // namespace semiasr::corpus
