#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace capenrich {

enum class TemplateCategory { BASE, ATTRIBUTE, NUMBER, ORIENTATION, WEATHER, OTHER };

std::string_view to_string(TemplateCategory c);
TemplateCategory parse_template_category(std::string_view text);

/// A hand-written continuation cue. `X` (a whole word) is replaced by an
/// entity head of the generic caption; the word `man/woman` is replaced by a
/// person noun and gates the template on one being present.
struct PromptTemplate {
  std::string name;
  std::string pattern;
  TemplateCategory category = TemplateCategory::OTHER;

  bool has_placeholder() const;
  bool is_person_gated() const;
};

enum class TemplateSet { base, diverse };

TemplateSet parse_template_set(std::string_view text);

std::vector<PromptTemplate> builtin_templates(TemplateSet set);

/// JSON list of {"name","pattern","category"}.
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);

/// The filled template text (without the generic prefix), one per target noun.
std::vector<std::string> fill_template(const PromptTemplate& tmpl, std::string_view generic);

/// `"{generic}, {filled template}"` for each fill, duplicates removed.
std::vector<std::string> instantiate(const PromptTemplate& tmpl, std::string_view generic);

}  // namespace capenrich
