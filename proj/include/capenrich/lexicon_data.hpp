#pragma once

#include <string_view>

namespace capenrich::detail {

/// Raw text of a lexicon compiled in from data/lexicon/<name>.txt; empty if unknown.
std::string_view builtin_lexicon(std::string_view name);

}  // namespace capenrich::detail
