#include "cslot/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "cslot/error.hpp"
#include "cslot/rng.hpp"

namespace cslot {

std::optional<std::pair<char, std::string_view>> split_tag(std::string_view tag) {
  if (tag == "O") return std::pair<char, std::string_view>{'O', {}};
  if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I')) return std::nullopt;
  return std::pair<char, std::string_view>{tag[0], tag.substr(2)};
}

std::vector<SlotSpan> TaggedUtterance::spans() const { return iob_to_spans(tags); }

std::string TaggedUtterance::value(const SlotSpan& s) const {
  std::string out;
  for (std::size_t i = s.start; i < s.end; ++i) {
    if (i > s.start) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> Corpus::slots() const {
  std::set<std::string> seen;
  for (const auto& u : utterances)
    for (const auto& t : u.tags)
      if (auto parts = split_tag(t); parts && parts->first != 'O') seen.emplace(parts->second);
  return {seen.begin(), seen.end()};
}

Corpus parse_corpus(std::istream& in, CorpusRole role) {
  Corpus corpus;
  corpus.role = role;
  TaggedUtterance current;
  std::string line;
  std::size_t lineno = 0;
  std::size_t stray_blank = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (current.tokens.empty()) {
        if (stray_blank == 0) stray_blank = lineno;
      } else {
        corpus.utterances.push_back(std::move(current));
        current = {};
      }
      continue;
    }
    if (stray_blank != 0) throw ParseError("empty utterance", stray_blank);
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError("expected 'token<TAB>tag'", lineno);
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    if (!split_tag(tag)) throw ParseError("malformed tag '" + tag + "'", lineno);
    current.tokens.push_back(std::move(token));
    current.tags.push_back(std::move(tag));
  }
  if (!current.tokens.empty()) corpus.utterances.push_back(std::move(current));
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path, CorpusRole role) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return parse_corpus(in, role);
}

void write_corpus(const Corpus& c, std::ostream& out) {
  for (const auto& u : c.utterances) {
    for (std::size_t i = 0; i < u.size(); ++i) out << u.tokens[i] << '\t' << u.tags[i] << '\n';
    out << '\n';
  }
}

void write_corpus(const Corpus& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus '" + path.string() + "'");
  write_corpus(c, out);
}

std::vector<std::string> spans_to_iob(std::size_t n_tokens, std::span<const SlotSpan> spans) {
  std::vector<std::string> tags(n_tokens, "O");
  std::vector<bool> covered(n_tokens, false);
  for (const auto& s : spans) {
    if (s.start >= s.end || s.end > n_tokens)
      throw OverlapError("span [" + std::to_string(s.start) + ", " + std::to_string(s.end) + ") out of range");
    if (s.slot.empty()) throw OverlapError("span without a slot name");
    for (std::size_t i = s.start; i < s.end; ++i) {
      if (covered[i]) throw OverlapError("spans overlap at token " + std::to_string(i));
      covered[i] = true;
      tags[i] = (i == s.start ? "B-" : "I-") + s.slot;
    }
  }
  return tags;
}

namespace {

bool chunk_ends(char prev, char cur, std::string_view prev_type, std::string_view type) {
  if (prev == 'B' && (cur == 'B' || cur == 'O')) return true;
  if (prev == 'I' && (cur == 'B' || cur == 'O')) return true;
  return prev != 'O' && prev_type != type;
}

bool chunk_starts(char prev, char cur, std::string_view prev_type, std::string_view type) {
  if (cur == 'B') return true;
  if (prev == 'O' && cur == 'I') return true;
  return cur != 'O' && prev_type != type;
}

}  // namespace

std::vector<SlotSpan> iob_to_spans(std::span<const std::string> tags) {
  std::vector<SlotSpan> spans;
  char prev = 'O';
  std::string_view prev_type;
  bool open = false;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    char cur = 'O';
    std::string_view type;
    if (auto parts = split_tag(tags[i])) {
      cur = parts->first;
      type = parts->second;
    }
    if (open && chunk_ends(prev, cur, prev_type, type)) {
      spans.back().end = i;
      open = false;
    }
    if (chunk_starts(prev, cur, prev_type, type)) {
      spans.push_back({std::string(type), i, i});
      open = true;
    }
    prev = cur;
    prev_type = type;
  }
  if (open) spans.back().end = tags.size();
  return spans;
}

TokenVocabulary::TokenVocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

TokenVocabulary::TokenVocabulary(std::span<const std::string> tokens) : TokenVocabulary() {
  for (const auto& t : tokens) add(t);
}

bool TokenVocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

std::size_t TokenVocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::size_t TokenVocabulary::add(const std::string& token) {
  auto [it, fresh] = index_.emplace(token, tokens_.size());
  if (fresh) tokens_.push_back(token);
  return it->second;
}

std::uint64_t TokenVocabulary::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& t : tokens_) {
    h = fnv1a(t.data(), t.size(), h);
    h = fnv1a("\n", 1, h);
  }
  return h;
}

void write_vocabulary(const TokenVocabulary& v, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary '" + path.string() + "'");
  for (const auto& t : v.tokens()) out << t << '\n';
}

TokenVocabulary read_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  if (tokens.size() < 2 || tokens[0] != TokenVocabulary::kPadToken || tokens[1] != TokenVocabulary::kUnkToken)
    throw ParseError("vocabulary must start with <pad> and <unk>", 1);
  return TokenVocabulary(tokens);
}

std::string normalize_digits(std::string_view token) {
  if (token.empty()) return std::string(token);
  for (char c : token)
    if (c < '0' || c > '9') return std::string(token);
  return "DIGIT*" + std::to_string(token.size());
}

std::pair<Corpus, TokenVocabulary> preprocess(const Corpus& corpus, const std::optional<TokenVocabulary>& vocab) {
  Corpus out = corpus;
  for (auto& u : out.utterances)
    for (auto& t : u.tokens) t = normalize_digits(t);

  if (vocab) {
    for (auto& u : out.utterances)
      for (auto& t : u.tokens)
        if (!vocab->contains(t)) t = std::string(TokenVocabulary::kUnkToken);
    return {std::move(out), *vocab};
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& u : out.utterances)
    for (const auto& t : u.tokens) ++counts[t];
  std::vector<std::string> kept;
  for (const auto& [t, n] : counts)
    if (n > 1) kept.push_back(t);
  TokenVocabulary built(kept);
  for (auto& u : out.utterances)
    for (auto& t : u.tokens)
      if (counts[t] == 1) t = std::string(TokenVocabulary::kUnkToken);
  return {std::move(out), std::move(built)};
}

Corpus relabel_collapse(const Corpus& corpus, const std::map<std::string, std::string>& mapping) {
  Corpus out = corpus;
  for (auto& u : out.utterances) {
    for (auto& tag : u.tags) {
      auto parts = split_tag(tag);
      if (!parts || parts->first == 'O') continue;
      auto it = mapping.find(std::string(parts->second));
      if (it == mapping.end()) throw UnknownSlot("no collapse mapping for slot '" + std::string(parts->second) + "'");
      tag = std::string(1, parts->first) + "-" + it->second;
    }
  }
  return out;
}

Corpus perturb_test_set(const Corpus& train, const Corpus& test, const Ontology& ontology, std::uint64_t seed) {
  using Value = std::vector<std::string>;
  std::map<std::string, std::set<Value>> seen;     // joint slot -> values
  std::map<std::string, std::set<Value>> by_atom;  // dimension-1 atom -> values

  for (const auto& u : train.utterances) {
    for (const auto& s : u.spans()) {
      const auto& branch = ontology.slot_to_branch(s.slot);
      Value v(u.tokens.begin() + static_cast<std::ptrdiff_t>(s.start),
              u.tokens.begin() + static_cast<std::ptrdiff_t>(s.end));
      seen[s.slot].insert(v);
      by_atom[branch[0]].insert(std::move(v));
    }
  }

  std::map<std::string, std::vector<Value>> unseen_cache;
  auto unseen_for = [&](const std::string& slot) -> const std::vector<Value>& {
    auto it = unseen_cache.find(slot);
    if (it != unseen_cache.end()) return it->second;
    const auto& branch = ontology.slot_to_branch(slot);
    std::vector<Value> pool;
    const auto& own = seen[slot];
    for (const auto& v : by_atom[branch[0]])
      if (!own.contains(v)) pool.push_back(v);
    return unseen_cache.emplace(slot, std::move(pool)).first->second;
  };

  Rng rng(seed);
  Corpus out;
  out.role = test.role;
  out.utterances.reserve(test.size());
  for (const auto& u : test.utterances) {
    TaggedUtterance fresh;
    std::size_t pos = 0;
    for (const auto& s : u.spans()) {
      for (; pos < s.start; ++pos) {
        fresh.tokens.push_back(u.tokens[pos]);
        fresh.tags.push_back("O");
      }
      const auto& pool = unseen_for(s.slot);
      Value value(u.tokens.begin() + static_cast<std::ptrdiff_t>(s.start),
                  u.tokens.begin() + static_cast<std::ptrdiff_t>(s.end));
      if (!pool.empty()) value = pool[rng.index(pool.size())];
      for (std::size_t i = 0; i < value.size(); ++i) {
        fresh.tokens.push_back(value[i]);
        fresh.tags.push_back((i == 0 ? "B-" : "I-") + s.slot);
      }
      pos = s.end;
    }
    for (; pos < u.size(); ++pos) {
      fresh.tokens.push_back(u.tokens[pos]);
      fresh.tags.push_back("O");
    }
    out.utterances.push_back(std::move(fresh));
  }
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::vector<SlotSpan> align_values(std::span<const std::string> tokens,
                                   std::span<const std::pair<std::string, std::string>> tuples) {
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const auto& t : tokens) lowered.push_back(lower(t));
  std::vector<bool> covered(tokens.size(), false);
  std::vector<SlotSpan> spans;

  for (const auto& [slot, value] : tuples) {
    auto words = split_words(lower(value));
    if (words.empty() || words.size() > tokens.size()) continue;
    for (std::size_t start = 0; start + words.size() <= tokens.size(); ++start) {
      bool ok = true;
      for (std::size_t k = 0; k < words.size() && ok; ++k)
        ok = !covered[start + k] && lowered[start + k] == words[k];
      if (!ok) continue;
      for (std::size_t k = 0; k < words.size(); ++k) covered[start + k] = true;
      spans.push_back({slot, start, start + words.size()});
      break;
    }
  }
  std::sort(spans.begin(), spans.end(), [](const SlotSpan& a, const SlotSpan& b) { return a.start < b.start; });
  return spans;
}

Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size())
    throw ConfigError("subset of " + std::to_string(n) + " exceeds corpus size " + std::to_string(corpus.size()));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  Corpus out;
  out.role = corpus.role;
  for (std::size_t i = 0; i < n; ++i) out.utterances.push_back(corpus.utterances[order[i]]);
  return out;
}

}  // namespace cslot
