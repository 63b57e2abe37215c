#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cslot {

// Reserved atom shared by every dimension.
inline constexpr std::string_view kNullAtom = "null";

// Ordered atoms identifying one slot, lowest (least context-aware) dimension
// first: "fromloc.city_name" is [city_name, fromloc].
class ConceptBranch {
 public:
  ConceptBranch() = default;
  explicit ConceptBranch(std::vector<std::string> atoms) : atoms_(std::move(atoms)) {}

  std::size_t depth() const noexcept { return atoms_.size(); }
  const std::string& operator[](std::size_t i) const { return atoms_[i]; }
  const std::vector<std::string>& atoms() const noexcept { return atoms_; }

  bool is_null(std::size_t i) const { return atoms_[i] == kNullAtom; }
  bool all_null() const;

  // Non-null atoms joined highest dimension first with '.'.
  std::string canonical_name() const;

  ConceptBranch prefix(std::size_t d) const;

  friend auto operator<=>(const ConceptBranch&, const ConceptBranch&) = default;
  friend bool operator==(const ConceptBranch&, const ConceptBranch&) = default;

 private:
  std::vector<std::string> atoms_;
};

std::ostream& operator<<(std::ostream& os, const ConceptBranch& b);

struct DimensionVocabulary {
  std::size_t index = 1;  // 1-based
  std::set<std::string> atoms;

  // "null" first, then the remaining atoms in lexical order. Head class
  // lists for fresh models use this order.
  std::vector<std::string> ordered() const;
};

struct SlotEntry {
  std::string slot;
  std::vector<std::string> atoms;
};

class Ontology {
 public:
  Ontology() = default;

  // Validates and builds. Throws DisjointnessViolation, DuplicateSlot,
  // InvalidAtom (empty, whitespace or '.' in an atom), InvalidBranch (wrong
  // length or all-null).
  static Ontology build(std::size_t depth, std::span<const SlotEntry> entries);

  std::size_t depth() const noexcept { return dimensions_.size(); }
  const std::vector<DimensionVocabulary>& dimensions() const noexcept { return dimensions_; }
  const DimensionVocabulary& dimension(std::size_t i) const { return dimensions_.at(i); }
  std::size_t size() const noexcept { return branches_.size(); }

  bool has_slot(std::string_view slot) const;
  bool has_branch(const ConceptBranch& b) const { return reverse_.contains(b); }

  // Throws UnknownSlot.
  const ConceptBranch& slot_to_branch(std::string_view slot) const;

  // Registered name, or the canonical name for unseen branches.
  std::string branch_to_slot(const ConceptBranch& b) const;

  // Registered slot names in lexical order.
  std::vector<std::string> slots() const;
  std::vector<SlotEntry> entries() const;

  std::uint64_t fingerprint() const;

  friend bool operator==(const Ontology& a, const Ontology& b) {
    return a.branches_ == b.branches_ && a.dimensions_.size() == b.dimensions_.size();
  }

 private:
  std::vector<DimensionVocabulary> dimensions_;
  std::map<std::string, ConceptBranch, std::less<>> branches_;
  std::map<ConceptBranch, std::string> reverse_;
};

struct CollapsedOntology {
  Ontology ontology;
  // original slot name -> collapsed slot name
  std::map<std::string, std::string> mapping;
};

// Keeps the first keep_dims dimensions. Requires 1 <= keep_dims < depth;
// throws DepthMismatch otherwise, InvalidBranch when a prefix is all-null.
CollapsedOntology collapse_ontology(const Ontology& o, std::size_t keep_dims);

struct OntologyDiff {
  std::vector<std::set<std::string>> new_atoms;  // one set per target dimension
  std::set<ConceptBranch> new_branches;          // target branches absent from source

  bool empty() const;
};

// Throws DepthMismatch when target is shallower than source. Source branches
// are compared null-padded to the target depth.
OntologyDiff ontology_diff(const Ontology& source, const Ontology& target);

Ontology parse_ontology(std::istream& in);
Ontology read_ontology(const std::filesystem::path& path);
void write_ontology(const Ontology& o, std::ostream& out);
void write_ontology(const Ontology& o, const std::filesystem::path& path);

}  // namespace cslot
