// corpus/vocab_json.cpp
#include "semiasr/corpus/vocab_json.hpp"

namespace semiasr::corpus {

Json to_json(const Vocabulary& v) {
  Json merges = Json::array();
  for (const auto& [l, r] : v.merges()) merges.push_back({l, r});
  return {{"kind", v.kind() == VocabKind::kLetter ? "letter" : "word-piece"}, {"tokens", v.tokens()}, {"merges", merges}};
}

Vocabulary vocabulary_from_json(const Json& j, const std::string& path) {
  require_keys(j, path, {"kind", "tokens", "merges"});
  std::string kind = "letter";
  std::vector<std::string> tokens;
  read_field(j, path, "kind", kind);
  read_field(j, path, "tokens", tokens);
  if (kind == "letter") {
    std::string alphabet;
    for (const auto& t : tokens) {
      if (t.size() != 1) throw ConfigError(path + ".tokens", "letter tokens must be single characters");
      alphabet += t;
    }
    return Vocabulary::letters(alphabet);
  }
  if (kind != "word-piece") throw ConfigError(path + ".kind", "expected \"letter\" or \"word-piece\"");
  std::vector<std::pair<std::string, std::string>> merges;
  if (auto it = j.find("merges"); it != j.end()) {
    for (const auto& m : *it) {
      if (!m.is_array() || m.size() != 2) throw ConfigError(path + ".merges", "expected [left, right] pairs");
      merges.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
    }
  }
  return Vocabulary::word_pieces(std::move(tokens), std::move(merges));
}

}  // namespace semiasr::corpus
