#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "cslot/corpus.hpp"
#include "cslot/error.hpp"
#include "cslot/synthetic.hpp"

using namespace cslot;

namespace {

TaggedUtterance utt(const std::string& words, const std::vector<std::string>& tags) {
  return {split_words(words), tags};
}

Corpus random_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::vector<std::string> slots = {"a", "b.c", "fromloc.city_name"};
  Corpus c;
  for (std::size_t u = 0; u < n; ++u) {
    const std::size_t len = 1 + gen() % 9;
    std::vector<SlotSpan> spans;
    std::size_t pos = 0;
    while (pos < len) {
      if (gen() % 2) {
        const std::size_t end = std::min(len, pos + 1 + gen() % 3);
        spans.push_back({slots[gen() % slots.size()], pos, end});
        pos = end;
      } else {
        ++pos;
      }
    }
    TaggedUtterance t;
    for (std::size_t i = 0; i < len; ++i) t.tokens.push_back("w" + std::to_string(gen() % 20));
    t.tags = spans_to_iob(len, spans);
    c.utterances.push_back(std::move(t));
  }
  return c;
}

}  // namespace

TEST(CorpusFile, SingleTokenUtterance) {
  std::istringstream in("boston\tB-city_name\n");
  const auto c = parse_corpus(in);
  ASSERT_EQ(c.size(), 1u);
  ASSERT_EQ(c.utterances[0].spans().size(), 1u);
  EXPECT_EQ(c.utterances[0].spans()[0], (SlotSpan{"city_name", 0, 1}));
}

TEST(CorpusFile, RoundTripOnRandomCorpus) {
  const auto c = random_corpus(100, 3);
  std::stringstream buf;
  write_corpus(c, buf);
  EXPECT_EQ(parse_corpus(buf), c);
}

TEST(CorpusFile, MalformedInputReportsLine) {
  std::istringstream bad_tag("a\tO\nb\tX-foo\n");
  try {
    parse_corpus(bad_tag);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream empty_utt("a\tO\n\n\nb\tO\n");
  EXPECT_THROW(parse_corpus(empty_utt), ParseError);
  std::istringstream no_tab("a O\n");
  EXPECT_THROW(parse_corpus(no_tab), ParseError);
}

TEST(Iob, EncodesSpans) {
  const auto tokens = split_words("show me flights from boston to new york");
  const std::vector<SlotSpan> spans = {{"fromloc.city_name", 4, 5}, {"toloc.city_name", 6, 8}};
  const std::vector<std::string> expected = {"O", "O", "O", "O", "B-fromloc.city_name",
                                             "O", "B-toloc.city_name", "I-toloc.city_name"};
  EXPECT_EQ(spans_to_iob(tokens.size(), spans), expected);
}

TEST(Iob, AllOutsideHasNoSpans) {
  const std::vector<std::string> tags(4, "O");
  EXPECT_TRUE(iob_to_spans(tags).empty());
}

TEST(Iob, InsideAfterOutsideStartsChunk) {
  const std::vector<std::string> tags = {"O", "I-x", "I-x"};
  EXPECT_EQ(iob_to_spans(tags), (std::vector<SlotSpan>{{"x", 1, 3}}));
}

TEST(Iob, TypeSwitchStartsChunk) {
  const std::vector<std::string> tags = {"B-x", "I-y", "B-y", "B-y"};
  EXPECT_EQ(iob_to_spans(tags), (std::vector<SlotSpan>{{"x", 0, 1}, {"y", 1, 2}, {"y", 2, 3}, {"y", 3, 4}}));
}

TEST(Iob, OverlapsAreRejected) {
  const std::vector<SlotSpan> overlapping = {{"a", 0, 2}, {"b", 1, 3}};
  EXPECT_THROW(spans_to_iob(4, overlapping), OverlapError);
  const std::vector<SlotSpan> out_of_range = {{"a", 2, 5}};
  EXPECT_THROW(spans_to_iob(4, out_of_range), OverlapError);
}

TEST(Iob, RandomSpanSetsRoundTrip) {
  const auto c = random_corpus(300, 11);
  for (const auto& u : c.utterances) EXPECT_EQ(spans_to_iob(u.size(), iob_to_spans(u.tags)), u.tags);
}

TEST(Preprocess, RewritesDigitSequences) {
  EXPECT_EQ(normalize_digits("1990"), "DIGIT*4");
  EXPECT_EQ(normalize_digits("7"), "DIGIT*1");
  EXPECT_EQ(normalize_digits("10:30"), "10:30");
  EXPECT_EQ(normalize_digits("a1"), "a1");
}

TEST(Preprocess, SingletonsBecomeUnknown) {
  Corpus c;
  c.utterances = {utt("flights from boston", {"O", "O", "B-city_name"}),
                  utt("flights from denver 1990", {"O", "O", "B-city_name", "O"}),
                  utt("2001", {"O"})};
  const auto [pp, vocab] = preprocess(c);
  EXPECT_EQ(pp.utterances[0].tokens, (std::vector<std::string>{"flights", "from", "<unk>"}));
  EXPECT_EQ(pp.utterances[1].tokens[3], "DIGIT*4");
  EXPECT_TRUE(vocab.contains("DIGIT*4"));
  EXPECT_FALSE(vocab.contains("boston"));
  EXPECT_EQ(pp.utterances[0].tags, c.utterances[0].tags);

  Corpus test;
  test.utterances = {utt("flights to paris", {"O", "O", "B-city_name"})};
  const auto applied = preprocess(test, vocab).first;
  EXPECT_EQ(applied.utterances[0].tokens, (std::vector<std::string>{"flights", "<unk>", "<unk>"}));
  EXPECT_EQ(preprocess(applied, vocab).first, applied);
}

TEST(Vocabulary, ReservedIds) {
  TokenVocabulary v;
  EXPECT_EQ(v.id("<pad>"), TokenVocabulary::kPad);
  EXPECT_EQ(v.id("<unk>"), TokenVocabulary::kUnk);
  EXPECT_EQ(v.id("never"), TokenVocabulary::kUnk);
  const auto id = v.add("boston");
  EXPECT_EQ(id, 2u);
  EXPECT_EQ(v.add("boston"), id);
}

TEST(Relabel, CollapsesSlotsAndKeepsBoundaries) {
  Corpus c;
  c.utterances = {utt("from boston on monday", {"O", "B-fromloc.city_name", "O", "B-depart_date.day_name"})};
  const std::map<std::string, std::string> mapping = {{"fromloc.city_name", "city_name"},
                                                      {"depart_date.day_name", "day_name"}};
  const auto r = relabel_collapse(c, mapping);
  EXPECT_EQ(r.utterances[0].tags, (std::vector<std::string>{"O", "B-city_name", "O", "B-day_name"}));
  EXPECT_EQ(r.utterances[0].tokens, c.utterances[0].tokens);
  const std::map<std::string, std::string> identity = {{"fromloc.city_name", "fromloc.city_name"},
                                                       {"depart_date.day_name", "depart_date.day_name"}};
  EXPECT_EQ(relabel_collapse(c, identity), c);
  EXPECT_THROW(relabel_collapse(c, {{"fromloc.city_name", "city_name"}}), UnknownSlot);
}

TEST(Perturb, DrawsOnlyValuesUnseenForTheSlot) {
  const std::vector<SlotEntry> entries = {{"fromloc.city_name", {"city_name", "fromloc"}},
                                          {"toloc.city_name", {"city_name", "toloc"}}};
  const auto o = Ontology::build(2, entries);
  Corpus train;
  train.utterances = {utt("from new york to boston", {"O", "B-fromloc.city_name", "I-fromloc.city_name", "O",
                                                      "B-toloc.city_name"}),
                      utt("from boston", {"O", "B-fromloc.city_name"})};
  Corpus test;
  test.utterances = {utt("flights to xx", {"O", "O", "B-toloc.city_name"})};
  const auto p = perturb_test_set(train, test, o, 5);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p.utterances[0].tokens, (std::vector<std::string>{"flights", "to", "new", "york"}));
  EXPECT_EQ(p.utterances[0].tags,
            (std::vector<std::string>{"O", "O", "B-toloc.city_name", "I-toloc.city_name"}));
}

TEST(Perturb, FullyCoveredTrainingLeavesTestIntact) {
  const std::vector<SlotEntry> entries = {{"fromloc.city_name", {"city_name", "fromloc"}},
                                          {"toloc.city_name", {"city_name", "toloc"}}};
  const auto o = Ontology::build(2, entries);
  Corpus train;
  train.utterances = {utt("from boston to denver", {"O", "B-fromloc.city_name", "O", "B-toloc.city_name"}),
                      utt("from denver to boston", {"O", "B-fromloc.city_name", "O", "B-toloc.city_name"})};
  EXPECT_EQ(perturb_test_set(train, train, o, 1), train);
}

TEST(Perturb, SyntheticPropertiesAndDeterminism) {
  const auto& o = default_flight_ontology();
  const auto& g = default_flight_grammar();
  const auto train = generate_synthetic(g, o, 60, 1);
  const auto test = generate_synthetic(g, o, 200, 2);
  const auto a = perturb_test_set(train, test, o, 9);
  EXPECT_EQ(a, perturb_test_set(train, test, o, 9));
  ASSERT_EQ(a.size(), test.size());
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& u : train.utterances)
    for (const auto& s : u.spans()) seen[s.slot].insert(u.value(s));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto before = test.utterances[i].spans();
    const auto after = a.utterances[i].spans();
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t k = 0; k < after.size(); ++k) {
      EXPECT_EQ(before[k].slot, after[k].slot);
      const auto v = a.utterances[i].value(after[k]);
      if (v != test.utterances[i].value(before[k])) {
        ++changed;
        EXPECT_FALSE(seen[after[k].slot].contains(v));
      }
    }
  }
  EXPECT_GT(changed, 0u);
}

TEST(Align, MatchesValuesLeftmost) {
  const auto tokens = split_words("does it have internet");
  const std::vector<std::pair<std::string, std::string>> tuples = {{"confirm.hasinternet", "internet"},
                                                                   {"request.phone", "phone"}};
  EXPECT_EQ(align_values(tokens, tuples), (std::vector<SlotSpan>{{"confirm.hasinternet", 3, 4}}));
}

TEST(Align, CaseInsensitiveAndSkipsCoveredTokens) {
  const auto tokens = split_words("From Boston to boston");
  const std::vector<std::pair<std::string, std::string>> tuples = {{"toloc.city_name", "boston"},
                                                                   {"fromloc.city_name", "BOSTON"}};
  EXPECT_EQ(align_values(tokens, tuples),
            (std::vector<SlotSpan>{{"toloc.city_name", 1, 2}, {"fromloc.city_name", 3, 4}}));
}

TEST(Align, ExhaustiveThreeTokenCases) {
  // Every 3-token sentence over {a,b} against tuples for "a" and "b": each
  // tuple lands on the leftmost free occurrence, or is dropped.
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<std::string> tokens;
    for (int i = 0; i < 3; ++i) tokens.push_back(mask >> i & 1 ? "b" : "a");
    const std::vector<std::pair<std::string, std::string>> tuples = {{"x", "a"}, {"y", "a"}, {"z", "b"}};
    std::vector<bool> used(3, false);
    std::vector<SlotSpan> expected;
    for (const auto& [slot, value] : tuples)
      for (std::size_t i = 0; i < 3; ++i)
        if (!used[i] && tokens[i] == value) {
          used[i] = true;
          expected.push_back({slot, i, i + 1});
          break;
        }
    std::sort(expected.begin(), expected.end(), [](const SlotSpan& l, const SlotSpan& r) { return l.start < r.start; });
    EXPECT_EQ(align_values(tokens, tuples), expected) << "mask " << mask;
  }
}

TEST(Subset, DeterministicPrefixesOfOneShuffle) {
  const auto c = random_corpus(50, 1);
  const auto a = sample_subset(c, 10, 4);
  const auto b = sample_subset(c, 20, 4);
  EXPECT_EQ(a, sample_subset(c, 10, 4));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.utterances[i], b.utterances[i]);
  EXPECT_THROW(sample_subset(c, 51, 4), ConfigError);
}
