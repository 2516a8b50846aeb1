// corpus/utterance.cpp
#include "semiasr/corpus/utterance.hpp"

#include "semiasr/error.hpp"

namespace semiasr::corpus {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kLabeled: return "labeled";
    case Split::kUnlabeled: return "unlabeled";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "labeled") return Split::kLabeled;
  if (s == "unlabeled") return Split::kUnlabeled;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw Error("unknown split '" + std::string(s) + "'");
}

std::string_view to_string(Origin o) { return o == Origin::kGold ? "gold" : "pseudo"; }

Origin parse_origin(std::string_view s) {
  if (s == "gold") return Origin::kGold;
  if (s == "pseudo") return Origin::kPseudo;
  throw Error("unknown origin '" + std::string(s) + "'");
}

std::vector<const Utterance*> Corpus::select(Split split) const {
  std::vector<const Utterance*> out;
  for (const auto& u : utterances)
    if (u.split == split) out.push_back(&u);
  return out;
}

Corpus Corpus::subset(Split split) const {
  Corpus out;
  for (const auto& u : utterances)
    if (u.split == split) out.utterances.push_back(u);
  return out;
}

std::vector<std::string> Corpus::transcripts(Split split) const {
  std::vector<std::string> out;
  for (const auto& u : utterances)
    if (u.split == split && u.transcript) out.push_back(*u.transcript);
  return out;
}

}  // namespace semiasr::corpus
