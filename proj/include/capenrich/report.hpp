#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace capenrich {

struct ImageMetrics {
  std::string image_id;
  std::map<std::string, double> values;
};

/// Metrics for one method. Per-image metrics reduce to their corpus value by
/// the mean; set-level metrics (diversity over a whole output set) are
/// recorded directly in `set_level`.
struct MethodReport {
  std::string method;
  std::vector<std::string> metric_order;
  std::vector<ImageMetrics> per_image;
  std::map<std::string, double> set_level;

  /// Means of per-image values merged with the set-level values.
  std::map<std::string, double> corpus() const;
};

/// {"corpus": {method: {metric: value}}, "reduction": {method: {metric: "mean"|"recall_percent"|"set"}},
///  "per_image": [{"method","image_id",metric...}]}
nlohmann::ordered_json report_json(const std::vector<MethodReport>& methods);

/// One row per (method, image); empty cells where a metric is absent.
void write_report_csv(std::ostream& out, const std::vector<MethodReport>& methods);

struct BarGroup {
  std::string label;                  // metric name
  std::vector<double> values;         // one per series
};

/// Grouped bar chart as a standalone SVG document: one group per metric,
/// one bar per series (method).
std::string render_bar_chart_svg(const std::string& title, const std::vector<std::string>& series,
                                 const std::vector<BarGroup>& groups);

/// Writes retrieval.svg, accuracy.svg and diversity.svg (those with data).
std::vector<std::filesystem::path> write_metric_charts(const std::filesystem::path& dir,
                                                       const std::vector<MethodReport>& methods);

}  // namespace capenrich
