#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cslot/corpus.hpp"
#include "cslot/ontology.hpp"

namespace cslot {

// One sentence pattern. Words of the form "$NAME" are placeholders; each is
// bound to a registered slot and filled from the lexicon of that slot's
// dimension-1 concept.
struct SentenceTemplate {
  std::vector<std::string> words;
  std::map<std::string, std::string> bindings;  // placeholder name (no '$') -> slot
};

// Text format, one directive per line, '#' comments:
//   template<TAB>words with $A and $B<TAB>A=slot_a,B=slot_b
//   lexicon<TAB>concept<TAB>value words
struct GrammarConfig {
  std::vector<SentenceTemplate> templates;
  std::map<std::string, std::vector<std::string>> lexicon;  // concept -> values
};

GrammarConfig parse_grammar(std::istream& in);
GrammarConfig read_grammar(const std::filesystem::path& path);
void write_grammar(const GrammarConfig& g, std::ostream& out);

// Samples n sentences, each from a uniformly chosen template with uniformly
// chosen lexicon values. Throws ConfigError for placeholders without a
// binding, bindings to unregistered slots, or concepts without a lexicon.
Corpus generate_synthetic(const GrammarConfig& grammar, const Ontology& ontology, std::size_t n,
                          std::uint64_t seed);

// Built-in flight-booking domain: depth 2, 12 bottom concepts, 8 top concepts.
const GrammarConfig& default_flight_grammar();
const Ontology& default_flight_ontology();

}  // namespace cslot
