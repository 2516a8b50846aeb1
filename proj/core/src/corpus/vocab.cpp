// corpus/vocab.cpp
#include "semiasr/corpus/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "semiasr/error.hpp"
#include "semiasr/util.hpp"

namespace semiasr::corpus {

namespace {
std::string file_token(const std::string& t) { return t == " " ? "|" : t; }
std::string memory_token(const std::string& t) { return t == "|" ? " " : t; }
}  // namespace

Vocabulary Vocabulary::letters(std::string_view alphabet) {
  Vocabulary v;
  v.kind_ = VocabKind::kLetter;
  for (char c : alphabet) v.tokens_.emplace_back(1, c);
  v.index();
  return v;
}

Vocabulary Vocabulary::word_pieces(std::vector<std::string> tokens,
                                   std::vector<std::pair<std::string, std::string>> merges) {
  Vocabulary v;
  v.kind_ = VocabKind::kWordPiece;
  v.tokens_ = std::move(tokens);
  v.merges_ = std::move(merges);
  v.index();
  return v;
}

void Vocabulary::index() {
  ids_.clear();
  max_token_length_ = 1;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw Error("vocabulary: empty token");
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) throw Error("vocabulary: duplicate token '" + tokens_[i] + "'");
    max_token_length_ = std::max(max_token_length_, tokens_[i].size());
  }
}

int Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
  std::set<char> bad;
  for (char c : text)
    if (find(std::string_view(&c, 1)) < 0) bad.insert(c);
  if (!bad.empty()) {
    std::string list;
    for (char c : bad) list += std::string(list.empty() ? "" : ", ") + "'" + c + "'";
    throw Error("out-of-domain characters in text: " + list);
  }
  std::vector<int> ids;
  if (kind_ == VocabKind::kLetter) {
    for (char c : text) ids.push_back(find(std::string_view(&c, 1)));
    return ids;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ') {
      ids.push_back(find(" "));
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < text.size() && text[end] != ' ') ++end;
    // longest token starting at i that stays inside the word
    std::size_t len = std::min(max_token_length_, end - i);
    for (; len > 0; --len) {
      const int id = find(text.substr(i, len));
      if (id >= 0) {
        ids.push_back(id);
        break;
      }
    }
    i += len;  // len >= 1: every single character is a token
  }
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) out += token(id);
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary '" + path.string() + "'");
  out << "#kind " << (kind_ == VocabKind::kLetter ? "letter" : "word-piece") << "\n";
  for (const auto& t : tokens_) out << file_token(t) << "\n";
  out << "#merges\n";
  for (const auto& [l, r] : merges_) out << file_token(l) << " " << file_token(r) << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary '" + path.string() + "'");
  std::string line;
  VocabKind kind = VocabKind::kLetter;
  std::vector<std::string> tokens;
  std::vector<std::pair<std::string, std::string>> merges;
  bool in_merges = false;
  while (std::getline(in, line)) {
    if (line.rfind("#kind ", 0) == 0) {
      kind = line.substr(6) == "letter" ? VocabKind::kLetter : VocabKind::kWordPiece;
    } else if (line == "#merges") {
      in_merges = true;
    } else if (in_merges) {
      const auto sp = line.find(' ');
      if (sp == std::string::npos) throw IoError("vocabulary: malformed merge line '" + line + "'");
      merges.emplace_back(memory_token(line.substr(0, sp)), memory_token(line.substr(sp + 1)));
    } else if (!line.empty()) {
      tokens.push_back(memory_token(line));
    }
  }
  Vocabulary v = kind == VocabKind::kLetter ? letters("") : word_pieces({}, {});
  v.kind_ = kind;
  v.tokens_ = std::move(tokens);
  v.merges_ = std::move(merges);
  v.index();
  return v;
}

Vocabulary bpe_train(const std::vector<std::string>& transcripts, std::size_t target_size) {
  if (transcripts.empty()) throw Error("bpe_train: empty corpus");
  std::set<std::string> alphabet;
  std::map<std::string, std::size_t> word_freq;
  for (const auto& t : transcripts) {
    for (char c : t) alphabet.emplace(1, c);
    for (const auto& w : split_words(t)) ++word_freq[w];
  }
  if (alphabet.empty()) throw Error("bpe_train: corpus has no characters");
  if (target_size < alphabet.size()) {
    throw Error("bpe_train: target size " + std::to_string(target_size) + " is below the alphabet size " +
                std::to_string(alphabet.size()));
  }
  std::vector<std::string> tokens(alphabet.begin(), alphabet.end());
  std::set<std::string> token_set(alphabet.begin(), alphabet.end());
  std::vector<std::pair<std::string, std::string>> merges;

  struct Word {
    std::vector<std::string> pieces;
    std::size_t freq;
  };
  std::vector<Word> words;
  for (const auto& [w, f] : word_freq) {
    Word word{{}, f};
    for (char c : w) word.pieces.emplace_back(1, c);
    words.push_back(std::move(word));
  }

  while (tokens.size() < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.pieces.size(); ++i) counts[{w.pieces[i], w.pieces[i + 1]}] += w.freq;
    if (counts.empty()) break;
    // ordered map: the first maximum is the lexicographically smallest pair
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto [left, right] = best->first;
    const std::string merged = left + right;
    merges.emplace_back(left, right);
    if (token_set.insert(merged).second) tokens.push_back(merged);
    for (auto& w : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < w.pieces.size(); ++i) {
        if (i + 1 < w.pieces.size() && w.pieces[i] == left && w.pieces[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(w.pieces[i]);
        }
      }
      w.pieces = std::move(next);
    }
  }
  return Vocabulary::word_pieces(std::move(tokens), std::move(merges));
}

}  // namespace semiasr::corpus
