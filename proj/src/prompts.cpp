#include "capenrich/prompts.hpp"

#include <algorithm>
#include <fstream>

#include "capenrich/corpus.hpp"
#include "capenrich/error.hpp"
#include "capenrich/sgparse.hpp"
#include "json.hpp"

namespace capenrich {

namespace {

constexpr std::string_view kPersonSlot = "man/woman";

bool is_person_noun(std::string_view head) {
  return head == "man" || head == "woman" || head == "boy" || head == "girl" || head == "person" ||
         head == "people";
}

// Whitespace-split, so the placeholder survives without lowercasing.
std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string substitute(const std::vector<std::string>& ws, std::string_view slot, std::string_view value) {
  std::string out;
  for (const auto& w : ws) {
    if (!out.empty()) out.push_back(' ');
    out += (w == slot) ? std::string(value) : w;
  }
  return out;
}

std::vector<std::string> distinct_heads(std::string_view generic) {
  TokenSeq toks = tokenize(generic);
  std::vector<std::string> heads;
  for (const auto& e : parse(toks).entities)
    if (std::find(heads.begin(), heads.end(), e.head) == heads.end()) heads.push_back(e.head);
  return heads;
}

}  // namespace

std::string_view to_string(TemplateCategory c) {
  switch (c) {
    case TemplateCategory::BASE: return "BASE";
    case TemplateCategory::ATTRIBUTE: return "ATTRIBUTE";
    case TemplateCategory::NUMBER: return "NUMBER";
    case TemplateCategory::ORIENTATION: return "ORIENTATION";
    case TemplateCategory::WEATHER: return "WEATHER";
    case TemplateCategory::OTHER: return "OTHER";
  }
  return "OTHER";
}

TemplateCategory parse_template_category(std::string_view text) {
  if (text == "BASE") return TemplateCategory::BASE;
  if (text == "ATTRIBUTE") return TemplateCategory::ATTRIBUTE;
  if (text == "NUMBER") return TemplateCategory::NUMBER;
  if (text == "ORIENTATION") return TemplateCategory::ORIENTATION;
  if (text == "WEATHER") return TemplateCategory::WEATHER;
  if (text == "OTHER") return TemplateCategory::OTHER;
  throw ValidationError("unknown template category '" + std::string(text) + "'");
}

bool PromptTemplate::has_placeholder() const {
  auto ws = words(pattern);
  return std::find(ws.begin(), ws.end(), "X") != ws.end();
}

bool PromptTemplate::is_person_gated() const {
  auto ws = words(pattern);
  return std::find(ws.begin(), ws.end(), kPersonSlot) != ws.end();
}

TemplateSet parse_template_set(std::string_view text) {
  if (text == "base") return TemplateSet::base;
  if (text == "diverse") return TemplateSet::diverse;
  throw ValidationError("unknown template set '" + std::string(text) + "' (expected base|diverse)");
}

std::vector<PromptTemplate> builtin_templates(TemplateSet set) {
  using C = TemplateCategory;
  if (set == TemplateSet::base) return {{"base", "the X", C::BASE}};
  return {
      {"attr-wears", "the man/woman wears", C::ATTRIBUTE},
      {"attr-color", "the color of X is", C::ATTRIBUTE},
      {"number", "the number of X is", C::NUMBER},
      {"orient-right", "on the right of X", C::ORIENTATION},
      {"orient-left", "on the left of X", C::ORIENTATION},
      {"orient-top", "on the top of X", C::ORIENTATION},
      {"weather", "the weather is", C::WEATHER},
      {"it-is", "it is", C::OTHER},
      {"there-is", "there is", C::OTHER},
      {"there-are", "there are", C::OTHER},
  };
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(path.string() + ": expected a JSON list of templates");
  std::vector<PromptTemplate> out;
  for (const auto& t : doc) {
    PromptTemplate p;
    try {
      p.name = t.at("name").get<std::string>();
      p.pattern = t.at("pattern").get<std::string>();
      p.category = parse_template_category(t.at("category").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
    if (p.pattern.find_first_not_of(' ') == std::string::npos)
      throw ValidationError("template '" + p.name + "' has an empty pattern");
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::string> fill_template(const PromptTemplate& tmpl, std::string_view generic) {
  std::vector<std::string> ws = words(tmpl.pattern);
  std::vector<std::string> out;
  auto push_unique = [&](std::string s) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  };
  bool gated = tmpl.is_person_gated();
  bool placeholder = tmpl.has_placeholder();
  if (!gated && !placeholder) {
    push_unique(tmpl.pattern);
    return out;
  }
  std::vector<std::string> heads = distinct_heads(generic);
  for (const auto& head : heads) {
    if (gated) {
      if (!is_person_noun(head)) continue;
      std::string filled = substitute(ws, kPersonSlot, head);
      if (placeholder) filled = substitute(words(filled), "X", head);
      push_unique(std::move(filled));
    } else {
      push_unique(substitute(ws, "X", head));
    }
  }
  return out;
}

std::vector<std::string> instantiate(const PromptTemplate& tmpl, std::string_view generic) {
  std::vector<std::string> out;
  for (auto& f : fill_template(tmpl, generic)) out.push_back(std::string(generic) + ", " + f);
  return out;
}

}  // namespace capenrich
