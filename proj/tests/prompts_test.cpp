#include <gtest/gtest.h>

#include <set>

#include "capenrich/prompts.hpp"
#include "capenrich/sgparse.hpp"
#include "capenrich/synthetic.hpp"
#include "oracles.hpp"

using namespace capenrich;

namespace {

bool has_pattern(const std::vector<PromptTemplate>& ts, const std::string& p) {
  return std::any_of(ts.begin(), ts.end(), [&](const PromptTemplate& t) { return t.pattern == p; });
}

}  // namespace

TEST(Templates, BaseSet) {
  auto base = builtin_templates(TemplateSet::base);
  ASSERT_EQ(base.size(), 1u);
  EXPECT_EQ(base[0].pattern, "the X");
  EXPECT_EQ(base[0].category, TemplateCategory::BASE);
}

TEST(Templates, DiverseSet) {
  auto d = builtin_templates(TemplateSet::diverse);
  EXPECT_EQ(d.size(), 10u);
  for (const char* p : {"the color of X is", "the number of X is", "on the right of X", "on the left of X",
                        "on the top of X", "the weather is", "it is", "there is", "there are"})
    EXPECT_TRUE(has_pattern(d, p)) << p;
  std::set<std::string> names;
  for (const auto& t : d) names.insert(t.name);
  EXPECT_EQ(names.size(), d.size());
}

TEST(Instantiate, EveryNoun) {
  auto base = builtin_templates(TemplateSet::base)[0];
  auto out = instantiate(base, "a street sign on the side of a road");
  EXPECT_NE(std::find(out.begin(), out.end(), "a street sign on the side of a road, the road"), out.end());
}

TEST(Instantiate, Substitution) {
  PromptTemplate t{"color", "the color of X is", TemplateCategory::ATTRIBUTE};
  EXPECT_EQ(instantiate(t, "a cat"), std::vector<std::string>{"a cat, the color of cat is"});
}

TEST(Instantiate, PersonGate) {
  auto d = builtin_templates(TemplateSet::diverse);
  auto wears = *std::find_if(d.begin(), d.end(), [](const PromptTemplate& t) { return t.is_person_gated(); });
  EXPECT_TRUE(instantiate(wears, "a dog on grass").empty());
  EXPECT_FALSE(instantiate(wears, "a woman on grass").empty());
}

TEST(Instantiate, PlaceholderFreeOnce) {
  PromptTemplate t{"weather", "the weather is", TemplateCategory::WEATHER};
  EXPECT_EQ(instantiate(t, "a dog on grass"), std::vector<std::string>{"a dog on grass, the weather is"});
}

TEST(Instantiate, Properties) {
  auto d = builtin_templates(TemplateSet::diverse);
  d.push_back(builtin_templates(TemplateSet::base)[0]);
  for (const auto& set : random_caption_sets(200, 21)) {
    std::string g = normalize_caption(set.captions.front());
    auto heads = parse(tokenize(g)).entities;
    for (const auto& t : d) {
      auto out = instantiate(t, g);
      std::set<std::string> uniq(out.begin(), out.end());
      EXPECT_EQ(uniq.size(), out.size());
      for (const auto& s : out) EXPECT_EQ(s.rfind(g + ", ", 0), 0u) << s;
      if (t.has_placeholder()) EXPECT_LE(out.size(), heads.size());
      EXPECT_EQ(fill_template(t, g).size() >= out.size(), true);
    }
  }
}

TEST(Templates, LoadFromFile) {
  auto dir = oracle::scratch_dir("templates");
  oracle::write_file(dir / "t.json", R"([{"name":"size","pattern":"the size of X is","category":"ATTRIBUTE"}])");
  auto ts = load_templates(dir / "t.json");
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].category, TemplateCategory::ATTRIBUTE);
  oracle::write_file(dir / "bad.json", R"([{"name":"x","pattern":"","category":"OTHER"}])");
  EXPECT_ANY_THROW(load_templates(dir / "bad.json"));
  std::filesystem::remove_all(dir);
}
