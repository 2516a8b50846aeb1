// lm/ngram.cpp
#include "semiasr/lm/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "semiasr/error.hpp"
#include "semiasr/util.hpp"

namespace semiasr::lm {

std::string to_string(Smoothing s) {
  switch (s) {
    case Smoothing::kMle: return "mle";
    case Smoothing::kAddK: return "add-k";
    case Smoothing::kStupidBackoff: break;
  }
  return "stupid-backoff";
}

Smoothing parse_smoothing(const std::string& s) {
  if (s == "mle") return Smoothing::kMle;
  if (s == "add-k") return Smoothing::kAddK;
  if (s == "stupid-backoff") return Smoothing::kStupidBackoff;
  throw ConfigError("lm.smoothing", "unknown smoothing '" + s + "' (expected mle, add-k or stupid-backoff)");
}

void NGramConfig::validate() const {
  if (order < 1) throw ConfigError("lm.order", "must be >= 1");
  if (!(k > 0.0) && smoothing != Smoothing::kMle) throw ConfigError("lm.k", "must be positive");
  if (!(backoff > 0.0) || backoff > 1.0) throw ConfigError("lm.backoff", "must be in (0, 1]");
}

NGramModel NGramModel::train(const std::vector<std::vector<std::string>>& sentences, const NGramConfig& config) {
  config.validate();
  if (sentences.empty()) throw Error("ngram_train: empty corpus");
  NGramModel m;
  m.config_ = config;
  std::set<std::string> vocab;
  for (const auto& s : sentences)
    for (const auto& w : s) vocab.insert(w);
  vocab.erase(kUnk);
  vocab.erase(kEos);
  vocab.erase(kBos);
  m.words_.assign(vocab.begin(), vocab.end());
  for (std::size_t i = 0; i < m.words_.size(); ++i) m.ids_[m.words_[i]] = static_cast<int>(i);

  const std::size_t n = config.order;
  for (const auto& s : sentences) {
    std::vector<int> ids(n - 1, m.bos_id());
    for (const auto& w : s) ids.push_back(m.word_id(w));
    if (config.sentence_end) ids.push_back(m.eos_id());
    for (std::size_t i = n - 1; i < ids.size(); ++i) {
      for (std::size_t len = 0; len < n; ++len) {
        ContextStats& st = m.contexts_[Key(ids.begin() + static_cast<std::ptrdiff_t>(i - len),
                                           ids.begin() + static_cast<std::ptrdiff_t>(i))];
        st.total += 1.0;
        st.successors[ids[i]] += 1.0;
      }
    }
  }
  if (m.contexts_.empty()) m.contexts_[Key{}];  // only empty sentences without sentence ends
  m.finalize();
  return m;
}

NGramModel NGramModel::train_text(const std::vector<std::string>& transcripts, const NGramConfig& config) {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(transcripts.size());
  for (const auto& t : transcripts) sentences.push_back(split_words(t));
  return train(sentences, config);
}

int NGramModel::word_id(const std::string& word) const {
  if (word == kEos) return eos_id();
  auto it = ids_.find(word);
  return it == ids_.end() ? unk_id() : it->second;
}

std::string NGramModel::token(int id) const {
  if (id == unk_id()) return kUnk;
  if (id == eos_id()) return kEos;
  if (id == bos_id()) return kBos;
  return words_.at(static_cast<std::size_t>(id));
}

std::vector<int> NGramModel::outcomes() const {
  std::vector<int> out;
  for (int i = 0; i <= unk_id(); ++i) out.push_back(i);
  if (config_.sentence_end) out.push_back(eos_id());
  return out;
}

const NGramModel::ContextStats* NGramModel::find(const Key& context) const {
  auto it = contexts_.find(context);
  return it == contexts_.end() ? nullptr : &it->second;
}

double NGramModel::raw_score(const Key& h, int o) const {
  const ContextStats* root = find(Key{});
  const double n_total = root ? root->total : 0.0;
  const double outcomes = static_cast<double>(outcome_count());
  if (h.empty()) {
    double c = 0.0;
    if (root) {
      auto it = root->successors.find(o);
      if (it != root->successors.end()) c = it->second;
    }
    return (c + config_.k) / (n_total + config_.k * outcomes);
  }
  const ContextStats* st = find(h);
  if (st) {
    auto it = st->successors.find(o);
    if (it != st->successors.end()) return it->second / st->total;
  }
  return config_.backoff * raw_score(Key(h.begin() + 1, h.end()), o);
}

void NGramModel::finalize() {
  raw_totals_.clear();
  if (config_.smoothing != Smoothing::kStupidBackoff) return;
  // contexts_ is ordered lexicographically, not by length; process shortest first
  std::vector<const Key*> keys;
  for (const auto& [k, st] : contexts_) keys.push_back(&k);
  std::stable_sort(keys.begin(), keys.end(), [](const Key* a, const Key* b) { return a->size() < b->size(); });
  for (const Key* k : keys) {
    if (k->empty()) {
      raw_totals_[*k] = 1.0;
      continue;
    }
    const Key suffix(k->begin() + 1, k->end());
    const double suffix_total = raw_totals_.at(suffix);
    const ContextStats& st = contexts_.at(*k);
    double seen_mass = 0.0;
    double suffix_seen = 0.0;
    for (const auto& [o, c] : st.successors) {
      seen_mass += c / st.total;
      suffix_seen += raw_score(suffix, o);
    }
    raw_totals_[*k] = seen_mass + config_.backoff * (suffix_total - suffix_seen);
  }
}

double NGramModel::prob_at(const Key& h, int o) const {
  const ContextStats* st = find(h);
  switch (config_.smoothing) {
    case Smoothing::kMle: {
      if (!st || st->total == 0.0) return 0.0;
      auto it = st->successors.find(o);
      return it == st->successors.end() ? 0.0 : it->second / st->total;
    }
    case Smoothing::kAddK: {
      const double total = st ? st->total : 0.0;
      double c = 0.0;
      if (st) {
        auto it = st->successors.find(o);
        if (it != st->successors.end()) c = it->second;
      }
      return (c + config_.k) / (total + config_.k * static_cast<double>(outcome_count()));
    }
    case Smoothing::kStupidBackoff: break;
  }
  return raw_score(h, o) / raw_totals_.at(h);
}

double NGramModel::log_prob(const std::vector<int>& context, int outcome) const {
  if (outcome == eos_id() && !config_.sentence_end) return 0.0;
  const std::size_t n = config_.order;
  Key h(n - 1, bos_id());
  const std::size_t take = std::min(context.size(), n - 1);
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(), h.end() - static_cast<std::ptrdiff_t>(take));
  if (config_.smoothing != Smoothing::kAddK) {
    while (!h.empty() && !find(h)) h.erase(h.begin());
  }
  const double p = prob_at(h, outcome);
  return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity();
}

LmState NGramModel::initial() const { return {std::vector<int>(config_.order - 1, bos_id())}; }

double NGramModel::score(const LmState& state, const std::string& word, LmState* next) const {
  const int id = word_id(word);
  const double lp = log_prob(state.history, id);
  if (next) {
    LmState s = state;
    s.history.push_back(id);
    if (s.history.size() > config_.order - 1) {
      s.history.erase(s.history.begin(), s.history.end() - static_cast<std::ptrdiff_t>(config_.order - 1));
    }
    *next = std::move(s);
  }
  return lp;
}

double NGramModel::end_score(const LmState& state) const {
  return config_.sentence_end ? log_prob(state.history, eos_id()) : 0.0;
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "\\semiasr-ngram\\\n";
  out << "order\t" << config_.order << "\n";
  out << "smoothing\t" << to_string(config_.smoothing) << "\n";
  out << std::setprecision(17);
  out << "k\t" << config_.k << "\n";
  out << "backoff\t" << config_.backoff << "\n";
  out << "sentence_end\t" << (config_.sentence_end ? 1 : 0) << "\n";
  out << "vocab\t" << words_.size() << "\n";
  for (const auto& w : words_) out << w << "\n";
  for (std::size_t m = 1; m <= config_.order; ++m) {
    std::vector<std::pair<std::string, std::string>> lines;
    for (const auto& [h, st] : contexts_) {
      if (h.size() != m - 1) continue;
      for (const auto& [o, c] : st.successors) {
        std::string tokens;
        for (int id : h) tokens += token(id) + " ";
        tokens += token(o);
        std::ostringstream line;
        line << std::setprecision(10) << std::log10(prob_at(h, o)) << "\t" << tokens << "\t"
             << std::setprecision(17) << c;
        lines.emplace_back(tokens, line.str());
      }
    }
    std::sort(lines.begin(), lines.end());
    out << "\n\\" << m << "-grams:\n";
    for (const auto& l : lines) out << l.second << "\n";
  }
  out << "\n\\end\\\n";
  if (!out) throw IoError("write failed: " + path.string());
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  auto fail = [&](const std::string& what) { return IoError(path.string() + ": " + what); };
  std::string line;
  if (!std::getline(in, line) || line != "\\semiasr-ngram\\") throw fail("missing \\semiasr-ngram\\ header");
  NGramModel m;
  auto field = [&](const char* name) {
    if (!std::getline(in, line)) throw fail(std::string("missing field ") + name);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != name) throw fail(std::string("expected field ") + name);
    return line.substr(tab + 1);
  };
  try {
    m.config_.order = std::stoul(field("order"));
    m.config_.smoothing = parse_smoothing(field("smoothing"));
    m.config_.k = std::stod(field("k"));
    m.config_.backoff = std::stod(field("backoff"));
    m.config_.sentence_end = field("sentence_end") == "1";
    const std::size_t v = std::stoul(field("vocab"));
    for (std::size_t i = 0; i < v; ++i) {
      if (!std::getline(in, line)) throw fail("truncated vocabulary");
      m.ids_[line] = static_cast<int>(m.words_.size());
      m.words_.push_back(line);
    }
  } catch (const std::logic_error&) {
    throw fail("malformed header field");
  }
  m.config_.validate();
  auto id_of = [&](const std::string& t) {
    if (t == kUnk) return m.unk_id();
    if (t == kEos) return m.eos_id();
    if (t == kBos) return m.bos_id();
    auto it = m.ids_.find(t);
    if (it == m.ids_.end()) throw fail("token '" + t + "' not in vocabulary");
    return it->second;
  };
  std::size_t section = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "\\end\\") {
      ended = true;
      break;
    }
    if (line.front() == '\\') {
      section = std::stoul(line.substr(1));
      continue;
    }
    if (section == 0) throw fail("n-gram line outside a section");
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) throw fail("malformed n-gram line: " + line);
    Key ids;
    for (const auto& t : split_words(line.substr(t1 + 1, t2 - t1 - 1))) ids.push_back(id_of(t));
    if (ids.size() != section) throw fail("n-gram of wrong order in section " + std::to_string(section));
    const double count = std::stod(line.substr(t2 + 1));
    const int o = ids.back();
    ids.pop_back();
    ContextStats& st = m.contexts_[ids];
    st.total += count;
    st.successors[o] += count;
  }
  if (!ended) throw fail("missing \\end\\ marker");
  m.finalize();
  return m;
}

}  // namespace semiasr::lm
