#include "capenrich/postproc.hpp"

#include <istream>
#include <ostream>

#include "capenrich/corpus.hpp"
#include "capenrich/error.hpp"
#include "capenrich/sgparse.hpp"
#include "json.hpp"

namespace capenrich {

std::vector<ScoredCandidate> filter_candidates(const Eigen::VectorXd& image, std::string_view generic,
                                               std::span<const CandidateDetail> candidates,
                                               const TextEmbedder& embed) {
  if (generic.find_first_not_of(" \t") == std::string_view::npos)
    throw ValidationError("filter_candidates: empty generic caption");
  const double base = sim(embed(generic), image);
  std::vector<ScoredCandidate> out;
  for (const auto& c : candidates) {
    TokenSeq toks = tokenize(c.detail);
    if (!is_structurally_complete(toks)) continue;
    std::string enriched = std::string(generic) + ", " + c.detail;
    double s = sim(embed(enriched), image);
    if (!(s > base)) continue;
    out.push_back(ScoredCandidate{c.detail, std::move(enriched), c.source, s, s - base});
  }
  return out;
}

std::optional<std::size_t> select_best(std::span<const ScoredCandidate> survivors) {
  if (survivors.empty()) return std::nullopt;
  std::size_t best = 0;
  std::size_t best_len = tokenize(survivors[0].enriched).size();
  for (std::size_t i = 1; i < survivors.size(); ++i) {
    const auto& c = survivors[i];
    const auto& b = survivors[best];
    std::size_t len = tokenize(c.enriched).size();
    bool better = c.sim > b.sim ||
                  (c.sim == b.sim && (len < best_len || (len == best_len && c.enriched < b.enriched)));
    if (better) {
      best = i;
      best_len = len;
    }
  }
  return best;
}

EnrichedRecord choose_enriched(std::string image_id, std::string_view generic,
                               std::span<const ScoredCandidate> survivors) {
  EnrichedRecord r;
  r.image_id = std::move(image_id);
  r.generic = std::string(generic);
  if (auto best = select_best(survivors)) {
    r.enriched = survivors[*best].enriched;
    r.source = survivors[*best].source;
    r.sim_gain = survivors[*best].sim_gain;
  } else {
    r.enriched = r.generic;
    r.source = "fallback";
    r.sim_gain = 0.0;
  }
  return r;
}

void write_enriched_jsonl(std::ostream& out, std::span<const EnrichedRecord> records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["generic"] = r.generic;
    j["enriched"] = r.enriched;
    j["source"] = r.source;
    j["sim_gain"] = r.sim_gain;
    out << j.dump() << '\n';
  }
}

std::vector<EnrichedRecord> read_enriched_jsonl(std::istream& in) {
  std::vector<EnrichedRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      EnrichedRecord r;
      r.image_id = j.at("image_id").is_string() ? j.at("image_id").get<std::string>()
                                                : std::to_string(j.at("image_id").get<long long>());
      r.generic = j.at("generic").get<std::string>();
      r.enriched = j.at("enriched").get<std::string>();
      r.source = j.value("source", std::string("unknown"));
      r.sim_gain = j.value("sim_gain", 0.0);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("enriched line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace capenrich
