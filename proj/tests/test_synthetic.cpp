#include <gtest/gtest.h>

#include <sstream>

#include "cslot/error.hpp"
#include "cslot/synthetic.hpp"

using namespace cslot;

namespace {

Ontology two_cities() {
  const std::vector<SlotEntry> entries = {{"fromloc.city_name", {"city_name", "fromloc"}},
                                          {"toloc.city_name", {"city_name", "toloc"}}};
  return Ontology::build(2, entries);
}

GrammarConfig fly_grammar() {
  std::istringstream in(
      "template\ti want to fly from $A to $B\tA=fromloc.city_name,B=toloc.city_name\n"
      "lexicon\tcity_name\tboston\n"
      "lexicon\tcity_name\tnew york\n");
  return parse_grammar(in);
}

}  // namespace

TEST(Synthetic, ExpandsTemplateIntoTwoSpans) {
  const auto c = generate_synthetic(fly_grammar(), two_cities(), 5, 1);
  ASSERT_EQ(c.size(), 5u);
  for (const auto& u : c.utterances) {
    const auto spans = u.spans();
    ASSERT_EQ(spans.size(), 2u);
    EXPECT_EQ(spans[0].slot, "fromloc.city_name");
    EXPECT_EQ(spans[1].slot, "toloc.city_name");
    EXPECT_EQ(u.tokens[0], "i");
  }
}

TEST(Synthetic, ZeroSentencesGiveEmptyCorpus) {
  EXPECT_TRUE(generate_synthetic(fly_grammar(), two_cities(), 0, 1).empty());
}

TEST(Synthetic, SameSeedSameCorpus) {
  const auto& g = default_flight_grammar();
  const auto& o = default_flight_ontology();
  EXPECT_EQ(generate_synthetic(g, o, 50, 3), generate_synthetic(g, o, 50, 3));
  EXPECT_NE(generate_synthetic(g, o, 50, 3), generate_synthetic(g, o, 50, 4));
}

TEST(Synthetic, ConfigErrors) {
  std::istringstream unknown("template\tfly to $A\tA=stoploc.city_name\nlexicon\tcity_name\tboston\n");
  EXPECT_THROW(generate_synthetic(parse_grammar(unknown), two_cities(), 1, 1), ConfigError);
  std::istringstream unbound("template\tfly to $A\t\nlexicon\tcity_name\tboston\n");
  EXPECT_THROW(generate_synthetic(parse_grammar(unbound), two_cities(), 1, 1), ConfigError);
  std::istringstream no_lexicon("template\tfly to $A\tA=toloc.city_name\n");
  EXPECT_THROW(generate_synthetic(parse_grammar(no_lexicon), two_cities(), 1, 1), ConfigError);
}

TEST(Synthetic, GrammarRoundTrip) {
  std::stringstream buf;
  write_grammar(default_flight_grammar(), buf);
  const auto g = parse_grammar(buf);
  const auto& o = default_flight_ontology();
  EXPECT_EQ(generate_synthetic(g, o, 40, 8), generate_synthetic(default_flight_grammar(), o, 40, 8));
}

TEST(Synthetic, DefaultDomainSize) {
  const auto& g = default_flight_grammar();
  const auto& o = default_flight_ontology();
  EXPECT_GE(g.templates.size(), 20u);
  EXPECT_EQ(o.depth(), 2u);
  EXPECT_GE(o.dimension(0).atoms.size() - 1, 8u);
  EXPECT_GE(o.dimension(1).atoms.size() - 1, 5u);
  // Every slot is produced somewhere in a large sample.
  const auto c = generate_synthetic(g, o, 3000, 1);
  const auto produced = c.slots();
  for (const auto& s : o.slots()) EXPECT_NE(std::find(produced.begin(), produced.end(), s), produced.end()) << s;
}
