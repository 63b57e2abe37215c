#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cslot/ontology.hpp"

namespace cslot {

struct SlotSpan {
  std::string slot;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive

  friend bool operator==(const SlotSpan&, const SlotSpan&) = default;
};

struct TaggedUtterance {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;

  std::size_t size() const noexcept { return tokens.size(); }
  // Chunks under conlleval semantics.
  std::vector<SlotSpan> spans() const;
  // Space-joined tokens covered by a span.
  std::string value(const SlotSpan& s) const;

  friend bool operator==(const TaggedUtterance&, const TaggedUtterance&) = default;
};

enum class CorpusRole { source, target, validation, test };

struct Corpus {
  std::vector<TaggedUtterance> utterances;
  CorpusRole role = CorpusRole::target;

  std::size_t size() const noexcept { return utterances.size(); }
  bool empty() const noexcept { return utterances.empty(); }
  // Slot names that occur in any tag.
  std::vector<std::string> slots() const;

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.utterances == b.utterances; }
};

// Splits "B-fromloc.city_name" into ('B', "fromloc.city_name"); "O" gives
// ('O', ""). Returns nullopt for anything else.
std::optional<std::pair<char, std::string_view>> split_tag(std::string_view tag);

// ---- corpus file: token<TAB>tag per line, blank line between utterances ----

Corpus parse_corpus(std::istream& in, CorpusRole role = CorpusRole::target);
Corpus read_corpus(const std::filesystem::path& path, CorpusRole role = CorpusRole::target);
void write_corpus(const Corpus& c, std::ostream& out);
void write_corpus(const Corpus& c, const std::filesystem::path& path);

// ---- IOB codec ----

// Throws OverlapError for overlapping or out-of-range spans.
std::vector<std::string> spans_to_iob(std::size_t n_tokens, std::span<const SlotSpan> spans);
// conlleval chunking: a chunk starts at B-X, or at I-X following O or a
// different type.
std::vector<SlotSpan> iob_to_spans(std::span<const std::string> tags);

// ---- vocabulary ----

class TokenVocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  TokenVocabulary();
  explicit TokenVocabulary(std::span<const std::string> tokens);  // reserved entries added if missing

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(std::string_view token) const;
  std::size_t id(std::string_view token) const;  // kUnk when absent
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t add(const std::string& token);

  std::uint64_t fingerprint() const;

  friend bool operator==(const TokenVocabulary& a, const TokenVocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

void write_vocabulary(const TokenVocabulary& v, const std::filesystem::path& path);
TokenVocabulary read_vocabulary(const std::filesystem::path& path);

// ---- preprocessing ----

// All-digit tokens of length N become "DIGIT*N"; other tokens unchanged.
std::string normalize_digits(std::string_view token);

// Without a vocabulary: rewrites digits, replaces frequency-1 tokens by
// <unk>, and returns the vocabulary built from the result. With one: rewrites
// digits and maps out-of-vocabulary tokens to <unk>.
std::pair<Corpus, TokenVocabulary> preprocess(const Corpus& corpus,
                                              const std::optional<TokenVocabulary>& vocab = std::nullopt);

// ---- refinement simulation ----

// Rewrites slot names through `mapping`; throws UnknownSlot for unmapped slots.
Corpus relabel_collapse(const Corpus& corpus, const std::map<std::string, std::string>& mapping);

// Builds an unmatched test set: each test value is replaced by a value that
// was seen in `train` with another slot sharing the same dimension-1 concept
// but never with its own slot.
Corpus perturb_test_set(const Corpus& train, const Corpus& test, const Ontology& ontology, std::uint64_t seed);

// Leftmost case-insensitive exact match for each (slot, value); tuples whose
// value cannot be placed on uncovered tokens are dropped. Sorted by start.
std::vector<SlotSpan> align_values(std::span<const std::string> tokens,
                                   std::span<const std::pair<std::string, std::string>> tuples);

// Deterministic subset: the first n utterances after a seeded shuffle.
Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed);

std::vector<std::string> split_words(std::string_view text);

}  // namespace cslot
