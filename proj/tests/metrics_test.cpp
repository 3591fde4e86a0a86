#include <gtest/gtest.h>

#include <fstream>

#include "capenrich/corpus.hpp"
#include "capenrich/error.hpp"
#include "capenrich/metrics.hpp"
#include "capenrich/random.hpp"
#include "capenrich/synthetic.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace capenrich;

namespace {

std::vector<TokenSeq> toks(std::initializer_list<const char*> xs) {
  std::vector<TokenSeq> out;
  for (const char* x : xs) out.push_back(tokenize(x));
  return out;
}

double f1(const std::set<std::string>& cand, const std::set<std::string>& ref) {
  std::size_t m = 0;
  for (const auto& t : cand) m += ref.count(t);
  if (m == 0) return 0.0;
  double p = static_cast<double>(m) / cand.size(), r = static_cast<double>(m) / ref.size();
  return 2 * p * r / (p + r);
}

}  // namespace

TEST(Bleu, IdentityAndDisjoint) {
  TokenSeq c = tokenize("a man rides a red bike down a hill");
  EXPECT_NEAR(bleu(c, std::vector<TokenSeq>{c}), 1.0, 1e-12);
  EXPECT_LT(bleu(c, toks({"two cats sleep on warm stoves today"})), 1e-6);
}

TEST(Bleu, HandComputedFiveTokens) {
  // candidate "the cat sat on mat", reference "the cat sat on the mat"
  // p1 = 5/5, p2 = 3/4, p3 = 2/3, p4 = 1/2; c = 5, r = 6 -> BP = exp(1 - 6/5)
  TokenSeq c = tokenize("the cat sat on mat");
  double expected = std::exp(1.0 - 6.0 / 5.0) * std::pow(1.0 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
  EXPECT_NEAR(bleu(c, toks({"the cat sat on the mat"})), expected, 1e-12);
}

TEST(Bleu, ClipsCounts) {
  // "the the the" vs "the cat": p1 = 1/3
  TokenSeq c = tokenize("the the the");
  double bp = 1.0;
  double p1 = 1.0 / 3.0;
  EXPECT_NEAR(bleu(c, toks({"the cat"}), 1), bp * p1, 1e-12);
}

TEST(Cider, MatchesDirectImplementation) {
  std::vector<std::vector<TokenSeq>> refs = {toks({"a man riding a wave", "a surfer on a big wave"}),
                                             toks({"a cat on a couch", "a grey cat sleeping"})};
  CiderStats stats = CiderStats::from_references(refs);
  std::vector<std::vector<oracle::Tokens>> oref(refs.begin(), refs.end());
  oracle::Cider brute(oref);
  for (const auto& c : toks({"a man riding a big wave", "a cat", "a wave on a couch", "dog"}))
    for (std::size_t i = 0; i < refs.size(); ++i)
      EXPECT_NEAR(cider(c, refs[i], stats), brute.score(c, refs[i]), 1e-9);
}

TEST(Cider, SoleReferenceAndDisjoint) {
  std::vector<std::vector<TokenSeq>> refs = {toks({"a red bus on the street"})};
  CiderStats stats = CiderStats::from_references(refs);
  oracle::Cider brute(std::vector<std::vector<oracle::Tokens>>(refs.begin(), refs.end()));
  EXPECT_NEAR(cider(refs[0][0], refs[0], stats), brute.score(refs[0][0], refs[0]), 1e-9);
  auto uniform = CiderStats::uniform_weights();
  EXPECT_NEAR(cider(refs[0][0], refs[0], uniform), 10.0, 1e-9);
  EXPECT_EQ(cider(tokenize("green kites fly"), refs[0], uniform), 0.0);
}

TEST(Cider, RandomCorporaMatchDirectImplementation) {
  auto corpus = random_caption_sets(30, 71);
  std::vector<std::vector<TokenSeq>> refs;
  for (const auto& s : corpus) {
    refs.emplace_back();
    for (std::size_t i = 1; i < s.captions.size(); ++i) refs.back().push_back(tokenize(s.captions[i]));
  }
  CiderStats stats = CiderStats::from_references(refs);
  oracle::Cider brute(std::vector<std::vector<oracle::Tokens>>(refs.begin(), refs.end()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    TokenSeq c = tokenize(corpus[i].captions[0]);
    EXPECT_NEAR(cider(c, refs[i], stats), brute.score(c, refs[i]), 1e-9);
  }
}

TEST(Spice, Basics) {
  TokenSeq c = tokenize("a man wears a red shirt");
  EXPECT_NEAR(spice_lite(c, std::vector<TokenSeq>{c}), 1.0, 1e-12);
  EXPECT_EQ(spice_lite(c, toks({"two dogs"})), 0.0);
}

TEST(Spice, ThreeOfFourMatched) {
  // candidate tuples: obj:man, obj:shirt, attr:shirt|red, rel:man|wear|shirt
  // reference tuples add rel:man|in|shirt, obj:hat, attr:hat|blue
  TokenSeq c = tokenize("the man wears a red shirt");
  auto refs = toks({"a man in a red shirt", "a blue hat"});
  std::set<std::string> ct = spice_tuples(c);
  ASSERT_EQ(ct.size(), 4u);
  double p = 3.0 / 4.0;
  std::set<std::string> rt;
  for (const auto& x : refs) {
    auto t = spice_tuples(x);
    rt.insert(t.begin(), t.end());
  }
  ASSERT_EQ(rt.size(), 6u);
  double r = 3.0 / 6.0;
  EXPECT_NEAR(spice_lite(c, refs), 2 * p * r / (p + r), 1e-12);
}

TEST(Spice, MatchesHandTuplesOnFixture) {
  std::vector<std::pair<TokenSeq, std::set<std::string>>> fx;
  std::ifstream in(std::string(FIXTURE_DIR) + "/parser_captions.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    fx.emplace_back(tokenize(j["caption"].get<std::string>()),
                    std::set<std::string>(j["tuples"].begin(), j["tuples"].end()));
  }
  ASSERT_EQ(fx.size(), 50u);
  for (std::size_t i = 0; i < fx.size(); ++i) {
    EXPECT_EQ(spice_tuples(fx[i].first), fx[i].second);
    const auto& a = fx[(i + 1) % fx.size()];
    const auto& b = fx[(i + 2) % fx.size()];
    std::set<std::string> u = a.second;
    u.insert(b.second.begin(), b.second.end());
    EXPECT_NEAR(spice_lite(fx[i].first, std::vector<TokenSeq>{a.first, b.first}), f1(fx[i].second, u), 1e-12);
  }
}

TEST(DivN, HandCounts) {
  std::vector<TokenSeq> same(5, tokenize("a b c d e f g h i j"));
  EXPECT_EQ(div_n(same, 1), 0.2);
  EXPECT_EQ(div_n(toks({"a b", "c d", "e f"}), 1), 1.0);
  EXPECT_EQ(div_n(toks({"a b c"}), 1), 1.0);
  int skipped = 0;
  EXPECT_EQ(div_n(toks({"a", "b c d"}), 2, &skipped), 1.0);
  EXPECT_EQ(skipped, 1);
  EXPECT_THROW(div_n(toks({"a", "b"}), 2), Error);
}

TEST(MBleu, Endpoints) {
  std::vector<TokenSeq> same(3, tokenize("a man rides a red bike down the hill"));
  EXPECT_NEAR(mbleu4(same), 1.0, 1e-12);
  EXPECT_LT(mbleu4(toks({"a red bus on a street", "two cats sleep near warm stoves"})), 1e-6);
  EXPECT_THROW(mbleu4(toks({"one caption"})), Error);
}

TEST(MBleu, MeanOfLeaveOneOut) {
  auto caps = toks({"a man riding a wave", "a man riding a big wave", "a surfer riding a wave"});
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<TokenSeq> others;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) others.push_back(caps[j]);
    expected += bleu(caps[i], others) / 3.0;
  }
  EXPECT_NEAR(mbleu4(caps), expected, 1e-12);
}

TEST(SelfCider, EndpointsAndOracle) {
  std::vector<TokenSeq> same(4, tokenize("a man riding a wave"));
  EXPECT_NEAR(self_cider(same), 0.0, 1e-6);
  EXPECT_NEAR(self_cider(toks({"a red bus", "two cats sleep", "green kites fly"})), 1.0, 1e-6);
  auto caps = toks({"a man riding a wave", "a man riding a big wave", "a surfer on a wave"});
  EXPECT_NEAR(self_cider(caps), oracle::self_cider(caps), 1e-9);
  EXPECT_THROW(self_cider(toks({"alone"})), Error);
}

TEST(Diversity, DuplicatesNeverIncreaseDiversity) {
  Rng rng(19);
  for (const auto& set : random_caption_sets(60, 5)) {
    std::vector<TokenSeq> caps;
    for (const auto& c : set.captions) caps.push_back(tokenize(c));
    auto more = caps;
    more.push_back(caps[rng.below(caps.size())]);
    EXPECT_LE(div_n(more, 1), div_n(caps, 1) + 1e-12);
    EXPECT_LE(div_n(more, 2), div_n(caps, 2) + 1e-12);
    EXPECT_LE(self_cider(more), self_cider(caps) + 1e-9);
    EXPECT_GE(mbleu4(more), mbleu4(caps) - 1e-12);
    double s = self_cider(caps);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Metrics, OrderInsensitive) {
  auto caps = toks({"a man riding a wave", "a surfer on a wave", "the ocean is blue"});
  auto rev = std::vector<TokenSeq>(caps.rbegin(), caps.rend());
  EXPECT_NEAR(self_cider(caps), self_cider(rev), 1e-12);
  EXPECT_NEAR(mbleu4(caps), mbleu4(rev), 1e-12);
  EXPECT_EQ(div_n(caps, 2), div_n(rev, 2));
}
