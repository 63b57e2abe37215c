#include "cslot/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cslot/error.hpp"
#include "cslot/rng.hpp"

namespace cslot {

bool ConceptBranch::all_null() const {
  return std::all_of(atoms_.begin(), atoms_.end(), [](const std::string& a) { return a == kNullAtom; });
}

std::string ConceptBranch::canonical_name() const {
  std::string name;
  for (auto it = atoms_.rbegin(); it != atoms_.rend(); ++it) {
    if (*it == kNullAtom) continue;
    if (!name.empty()) name += '.';
    name += *it;
  }
  return name;
}

ConceptBranch ConceptBranch::prefix(std::size_t d) const {
  return ConceptBranch({atoms_.begin(), atoms_.begin() + static_cast<std::ptrdiff_t>(std::min(d, atoms_.size()))});
}

std::ostream& operator<<(std::ostream& os, const ConceptBranch& b) {
  os << '[';
  for (std::size_t i = 0; i < b.depth(); ++i) os << (i ? ", " : "") << b[i];
  return os << ']';
}

std::vector<std::string> DimensionVocabulary::ordered() const {
  std::vector<std::string> out{std::string(kNullAtom)};
  for (const auto& a : atoms)
    if (a != kNullAtom) out.push_back(a);
  return out;
}

namespace {

void check_atom(const std::string& atom) {
  if (atom.empty()) throw InvalidAtom("empty atom");
  for (char c : atom) {
    if (c == '.' || c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw InvalidAtom("atom '" + atom + "' contains '.' or whitespace");
  }
}

}  // namespace

Ontology Ontology::build(std::size_t depth, std::span<const SlotEntry> entries) {
  if (depth == 0) throw DepthMismatch("ontology depth must be positive");
  Ontology o;
  o.dimensions_.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    o.dimensions_[i].index = i + 1;
    o.dimensions_[i].atoms.insert(std::string(kNullAtom));
  }

  // atom -> dimension it was first seen in
  std::map<std::string, std::size_t> home;
  for (const auto& e : entries) {
    if (e.slot.empty()) throw InvalidAtom("empty slot name");
    if (e.atoms.size() != depth)
      throw InvalidBranch("slot '" + e.slot + "' has " + std::to_string(e.atoms.size()) +
                          " atoms, expected " + std::to_string(depth));
    for (std::size_t i = 0; i < depth; ++i) {
      const auto& atom = e.atoms[i];
      check_atom(atom);
      if (atom == kNullAtom) continue;
      auto [it, fresh] = home.emplace(atom, i);
      if (!fresh && it->second != i)
        throw DisjointnessViolation("atom '" + atom + "' appears in dimensions " +
                                    std::to_string(it->second + 1) + " and " + std::to_string(i + 1));
      o.dimensions_[i].atoms.insert(atom);
    }
    ConceptBranch branch(e.atoms);
    if (branch.all_null()) throw InvalidBranch("slot '" + e.slot + "' maps to the all-null branch");
    if (o.branches_.contains(e.slot)) throw DuplicateSlot("slot '" + e.slot + "' registered twice");
    if (o.reverse_.contains(branch))
      throw DuplicateSlot("slots '" + o.reverse_.at(branch) + "' and '" + e.slot + "' share a branch");
    o.branches_.emplace(e.slot, branch);
    o.reverse_.emplace(std::move(branch), e.slot);
  }
  return o;
}

bool Ontology::has_slot(std::string_view slot) const { return branches_.find(slot) != branches_.end(); }

const ConceptBranch& Ontology::slot_to_branch(std::string_view slot) const {
  auto it = branches_.find(slot);
  if (it == branches_.end()) throw UnknownSlot("unknown slot '" + std::string(slot) + "'");
  return it->second;
}

std::string Ontology::branch_to_slot(const ConceptBranch& b) const {
  if (auto it = reverse_.find(b); it != reverse_.end()) return it->second;
  return b.canonical_name();
}

std::vector<std::string> Ontology::slots() const {
  std::vector<std::string> out;
  out.reserve(branches_.size());
  for (const auto& [name, _] : branches_) out.push_back(name);
  return out;
}

std::vector<SlotEntry> Ontology::entries() const {
  std::vector<SlotEntry> out;
  for (const auto& [name, b] : branches_) out.push_back({name, b.atoms()});
  return out;
}

std::uint64_t Ontology::fingerprint() const {
  std::ostringstream os;
  write_ontology(*this, os);
  const std::string text = os.str();
  return fnv1a(text.data(), text.size());
}

CollapsedOntology collapse_ontology(const Ontology& o, std::size_t keep_dims) {
  if (keep_dims < 1 || keep_dims >= o.depth())
    throw DepthMismatch("collapse needs 1 <= keep_dims < " + std::to_string(o.depth()));
  CollapsedOntology out;
  std::vector<SlotEntry> entries;
  std::set<ConceptBranch> seen;
  for (const auto& [slot, branch] : o.entries()) {
    ConceptBranch p = ConceptBranch(branch).prefix(keep_dims);
    if (p.all_null()) throw InvalidBranch("slot '" + slot + "' collapses to the all-null branch");
    const std::string name = p.canonical_name();
    out.mapping.emplace(slot, name);
    if (seen.insert(p).second) entries.push_back({name, p.atoms()});
  }
  out.ontology = Ontology::build(keep_dims, entries);
  return out;
}

bool OntologyDiff::empty() const {
  return new_branches.empty() &&
         std::all_of(new_atoms.begin(), new_atoms.end(), [](const auto& s) { return s.empty(); });
}

OntologyDiff ontology_diff(const Ontology& source, const Ontology& target) {
  if (target.depth() < source.depth())
    throw DepthMismatch("target depth " + std::to_string(target.depth()) + " < source depth " +
                        std::to_string(source.depth()));
  OntologyDiff diff;
  diff.new_atoms.resize(target.depth());
  for (std::size_t i = 0; i < target.depth(); ++i) {
    for (const auto& atom : target.dimension(i).atoms) {
      if (atom == kNullAtom) continue;
      if (i >= source.depth() || !source.dimension(i).atoms.contains(atom)) diff.new_atoms[i].insert(atom);
    }
  }
  std::set<ConceptBranch> padded;
  for (const auto& e : source.entries()) {
    auto atoms = e.atoms;
    atoms.resize(target.depth(), std::string(kNullAtom));
    padded.emplace(std::move(atoms));
  }
  for (const auto& e : target.entries()) {
    ConceptBranch b(e.atoms);
    if (!padded.contains(b)) diff.new_branches.insert(std::move(b));
  }
  return diff;
}

Ontology parse_ontology(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::size_t depth = 0;
  std::vector<SlotEntry> entries;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (depth == 0) {
      if (line.rfind("dims=", 0) != 0) throw ParseError("expected 'dims=<k>' header", lineno);
      try {
        std::size_t used = 0;
        const long k = std::stol(line.substr(5), &used);
        if (k <= 0 || used != line.size() - 5) throw std::invalid_argument("dims");
        depth = static_cast<std::size_t>(k);
      } catch (const std::exception&) {
        throw ParseError("bad dims value '" + line.substr(5) + "'", lineno);
      }
      continue;
    }
    SlotEntry e;
    std::istringstream fields(line);
    std::string field;
    bool first = true;
    while (std::getline(fields, field, '\t')) {
      if (first) {
        e.slot = field;
        first = false;
      } else {
        e.atoms.push_back(field);
      }
    }
    if (e.atoms.size() != depth)
      throw ParseError("slot line needs " + std::to_string(depth) + " atoms", lineno);
    entries.push_back(std::move(e));
  }
  if (depth == 0) throw ParseError("missing 'dims=<k>' header", lineno);
  return Ontology::build(depth, entries);
}

Ontology read_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ontology '" + path.string() + "'");
  return parse_ontology(in);
}

void write_ontology(const Ontology& o, std::ostream& out) {
  out << "dims=" << o.depth() << '\n';
  for (const auto& e : o.entries()) {
    out << e.slot;
    for (const auto& a : e.atoms) out << '\t' << a;
    out << '\n';
  }
}

void write_ontology(const Ontology& o, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ontology '" + path.string() + "'");
  write_ontology(o, out);
}

}  // namespace cslot
