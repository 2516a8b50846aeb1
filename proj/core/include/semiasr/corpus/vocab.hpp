// semiasr/corpus/vocab.hpp
//
// Letter and word-piece vocabularies. The word separator ' ' is always a token
// of its own; word pieces never span it.
//
// File format: one token per line (the separator is written as "|"), then a
// line "#merges" followed by one "left right" merge per line in training order.
// The first line is "#kind letter" or "#kind word-piece".
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace semiasr::corpus {

enum class VocabKind { kLetter, kWordPiece };

class Vocabulary {
 public:
  Vocabulary() = default;
  static Vocabulary letters(std::string_view alphabet);
  static Vocabulary word_pieces(std::vector<std::string> tokens, std::vector<std::pair<std::string, std::string>> merges);

  VocabKind kind() const { return kind_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  /// -1 when absent.
  int find(std::string_view token) const;
  int space_id() const { return find(" "); }

  /// Letters: one id per character. Word pieces: greedy longest match inside each word.
  /// Throws listing every out-of-domain character.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void index();

  VocabKind kind_ = VocabKind::kLetter;
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, int> ids_;
  std::size_t max_token_length_ = 1;
};

/// Frequency-greedy pair merging inside words. Ties between equally frequent
/// pairs go to the lexicographically smallest (left, right). Stops at
/// `target_size` tokens or when no pair remains.
Vocabulary bpe_train(const std::vector<std::string>& transcripts, std::size_t target_size);

}  // namespace semiasr::corpus
