// decode/beam.cpp
#include "semiasr/decode/beam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "semiasr/error.hpp"
#include "semiasr/json_util.hpp"
#include "semiasr/util.hpp"

namespace semiasr::decode {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double combine(double am, double lm, std::size_t words, double alpha, double beta) {
  double s = am;
  if (alpha != 0.0) s += alpha * lm;
  if (beta != 0.0) s += beta * static_cast<double>(words);
  return s;
}

struct Node {
  int parent = -1;
  int label = -1;  ///< vocabulary id, -1 at the root
  std::vector<int> children;
  lm::LmState state;
  double lm = 0.0;
  std::size_t words = 0;
  std::string partial;
};

class Trie {
 public:
  Trie(const corpus::Vocabulary& vocab, const lm::LmScorer* lm) : vocab_(vocab), lm_(lm), space_(vocab.space_id()) {
    Node root;
    if (lm_) root.state = lm_->initial();
    nodes_.push_back(std::move(root));
  }

  int child(int n, int label) {
    if (nodes_[n].children.empty()) nodes_[n].children.assign(vocab_.size(), -1);
    int& slot = nodes_[n].children[static_cast<std::size_t>(label)];
    if (slot >= 0) return slot;
    Node c;
    const Node& p = nodes_[n];
    c.parent = n;
    c.label = label;
    c.state = p.state;
    c.lm = p.lm;
    c.words = p.words;
    if (label == space_) {
      if (!p.partial.empty()) {
        if (lm_) c.lm += lm_->score(p.state, p.partial, &c.state);
        ++c.words;
      }
    } else {
      c.partial = p.partial + vocab_.token(label);
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(c));
    nodes_[n].children[static_cast<std::size_t>(label)] = id;  // `slot` may dangle after push_back
    return id;
  }

  const Node& operator[](int n) const { return nodes_[n]; }

  std::vector<int> tokens(int n) const {
    std::vector<int> out;
    for (; nodes_[n].parent >= 0; n = nodes_[n].parent) out.push_back(nodes_[n].label);
    std::reverse(out.begin(), out.end());
    return out;
  }

  /// LM total and word count once the utterance ends after node n.
  std::pair<double, std::size_t> finish(int n) const {
    const Node& node = nodes_[n];
    double lm = node.lm;
    std::size_t words = node.words;
    lm::LmState state = node.state;
    if (!node.partial.empty()) {
      lm::LmState next;
      if (lm_) lm += lm_->score(state, node.partial, &next);
      state = std::move(next);
      ++words;
    }
    if (lm_) lm += lm_->end_score(state);
    return {lm, words};
  }

 private:
  const corpus::Vocabulary& vocab_;
  const lm::LmScorer* lm_;
  int space_;
  std::vector<Node> nodes_;
};

struct Probs {
  double blank = kNegInf;
  double nonblank = kNegInf;
  double total() const { return lse(blank, nonblank); }
};

}  // namespace

void FusionConfig::validate() const {
  if (beam < 1) throw ConfigError("decode.beam", "must be >= 1");
  if (nbest < 1) throw ConfigError("decode.nbest", "must be >= 1");
  if (nbest > beam && !exhaustive) throw ConfigError("decode.nbest", "must not exceed the beam size");
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ConfigError("decode.alpha", "weights must be finite");
}

const Hypothesis& NBestList::best() const {
  if (hyps.empty()) throw Error("n-best list " + id + " is empty");
  return hyps.front();
}

bool ranks_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

NBestList fused_beam_search(const nn::Tensor& emissions, const corpus::Vocabulary& vocab, const lm::LmScorer* lm,
                            const FusionConfig& config) {
  config.validate();
  const std::size_t T = emissions.rows();
  const std::size_t V = vocab.size();
  if (emissions.cols() != V + 1) {
    throw ShapeError("fused_beam_search: emissions have " + std::to_string(emissions.cols()) +
                     " columns, vocabulary needs " + std::to_string(V + 1));
  }
  Trie trie(vocab, lm);
  std::map<int, Probs> beams;
  beams[0].blank = 0.0;
  std::vector<std::pair<double, int>> ranked;
  for (std::size_t t = 0; t < T; ++t) {
    auto y = emissions.row_span(t);
    std::map<int, Probs> next;
    for (const auto& [n, p] : beams) {
      const double total = p.total();
      if (total == kNegInf) continue;
      Probs& same = next[n];
      same.blank = lse(same.blank, total + y[0]);
      const int last = trie[n].label;
      if (last >= 0) same.nonblank = lse(same.nonblank, p.nonblank + y[static_cast<std::size_t>(last) + 1]);
      for (std::size_t c = 0; c < V; ++c) {
        const double yc = y[c + 1];
        if (yc == kNegInf) continue;
        const int ch = trie.child(n, static_cast<int>(c));
        Probs& q = next[ch];
        q.nonblank = lse(q.nonblank, (static_cast<int>(c) == last ? p.blank : total) + yc);
      }
    }
    if (!config.exhaustive && next.size() > config.beam) {
      ranked.clear();
      for (const auto& [n, p] : next) {
        ranked.emplace_back(combine(p.total(), trie[n].lm, trie[n].words, config.alpha, config.beta), n);
      }
      std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(config.beam), ranked.end(),
                        [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
      std::map<int, Probs> kept;
      for (std::size_t i = 0; i < config.beam; ++i) kept.emplace(ranked[i].second, next.at(ranked[i].second));
      next.swap(kept);
    }
    beams.swap(next);
  }

  NBestList out;
  out.alpha = config.alpha;
  out.beta = config.beta;
  for (const auto& [n, p] : beams) {
    const double am = p.total();
    if (am == kNegInf) continue;
    Hypothesis h;
    h.tokens = trie.tokens(n);
    h.text = normalize_spaces(vocab.decode(h.tokens));
    h.am = am;
    std::tie(h.lm, h.words) = trie.finish(n);
    h.score = combine(h.am, h.lm, h.words, config.alpha, config.beta);
    out.hyps.push_back(std::move(h));
  }
  std::sort(out.hyps.begin(), out.hyps.end(), ranks_before);
  if (out.hyps.size() > config.nbest) out.hyps.resize(config.nbest);
  return out;
}

NBestList nbest_prune(const NBestList& list, std::size_t k) {
  if (k < 1) throw ConfigError("decode.nbest", "must be >= 1");
  NBestList out = list;
  std::stable_sort(out.hyps.begin(), out.hyps.end(), ranks_before);
  if (out.hyps.size() > k) out.hyps.resize(k);
  return out;
}

NBestList rescore(const NBestList& list, const lm::LmScorer& strong, double alpha2, double beta2) {
  NBestList out = list;
  out.alpha2 = alpha2;
  out.beta2 = beta2;
  for (Hypothesis& h : out.hyps) {
    h.lm2 = lm::lm_logprob(strong, split_words(h.text));
    h.score = combine(h.am, h.lm2, h.words, alpha2, beta2);
  }
  std::sort(out.hyps.begin(), out.hyps.end(), ranks_before);
  return out;
}

void write_nbest_line(std::ostream& out, const NBestList& list) {
  Json hyps = Json::array();
  for (const Hypothesis& h : list.hyps) {
    hyps.push_back({{"text", h.text}, {"am", h.am}, {"lm", h.lm}, {"words", h.words}, {"score", h.score}});
  }
  out << Json{{"id", list.id}, {"hyps", hyps}}.dump() << "\n";
}

std::vector<NBestList> read_nbest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<NBestList> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      NBestList l;
      l.id = j.at("id").get<std::string>();
      for (const auto& h : j.at("hyps")) {
        Hypothesis hyp;
        hyp.text = h.at("text").get<std::string>();
        hyp.am = h.at("am").get<double>();
        hyp.lm = h.at("lm").get<double>();
        hyp.words = h.at("words").get<std::size_t>();
        hyp.score = h.at("score").get<double>();
        l.hyps.push_back(std::move(hyp));
      }
      out.push_back(std::move(l));
    } catch (const Json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace semiasr::decode
