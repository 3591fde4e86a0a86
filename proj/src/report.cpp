#include "capenrich/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "capenrich/error.hpp"

namespace capenrich {

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out.push_back(c);
  }
  return out + "\"";
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7"};

}  // namespace

std::map<std::string, double> MethodReport::corpus() const {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& row : per_image)
    for (const auto& [k, v] : row.values) {
      acc[k].first += v;
      acc[k].second += 1;
    }
  std::map<std::string, double> out;
  for (const auto& [k, p] : acc) out[k] = p.first / p.second;
  for (const auto& [k, v] : set_level) out[k] = v;
  return out;
}

nlohmann::ordered_json report_json(const std::vector<MethodReport>& methods) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json corpus = nlohmann::ordered_json::object();
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& m : methods) {
    auto values = m.corpus();
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& name : m.metric_order)
      if (values.count(name)) c[name] = values[name];
    corpus[m.method] = c;
    for (const auto& img : m.per_image) {
      nlohmann::ordered_json r;
      r["method"] = m.method;
      r["image_id"] = img.image_id;
      for (const auto& name : m.metric_order)
        if (img.values.count(name)) r[name] = img.values.at(name);
      rows.push_back(r);
    }
  }
  nlohmann::ordered_json reduction = nlohmann::ordered_json::object();
  for (const auto& m : methods) {
    auto values = m.corpus();
    nlohmann::ordered_json r = nlohmann::ordered_json::object();
    for (const auto& name : m.metric_order) {
      if (!values.count(name)) continue;
      if (m.set_level.count(name)) r[name] = "set";
      else if (name.find("_r@") != std::string::npos) r[name] = "recall_percent";
      else r[name] = "mean";
    }
    reduction[m.method] = r;
  }
  doc["corpus"] = corpus;
  doc["reduction"] = reduction;
  doc["per_image"] = rows;
  return doc;
}

void write_report_csv(std::ostream& out, const std::vector<MethodReport>& methods) {
  std::vector<std::string> columns;
  for (const auto& m : methods)
    for (const auto& name : m.metric_order) {
      bool per_image = std::any_of(m.per_image.begin(), m.per_image.end(),
                                   [&](const ImageMetrics& r) { return r.values.count(name) > 0; });
      if (per_image && std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
    }
  out << "method,image_id";
  for (const auto& c : columns) out << ',' << csv_field(c);
  out << '\n';
  for (const auto& m : methods)
    for (const auto& row : m.per_image) {
      out << csv_field(m.method) << ',' << csv_field(row.image_id);
      for (const auto& c : columns) {
        out << ',';
        auto it = row.values.find(c);
        if (it != row.values.end()) out << fmt(it->second, 17);
      }
      out << '\n';
    }
}

std::string render_bar_chart_svg(const std::string& title, const std::vector<std::string>& series,
                                 const std::vector<BarGroup>& groups) {
  const double bar_w = 18, gap = 24, left = 60, top = 40, plot_h = 220, legend_h = 20 * static_cast<double>(series.size());
  const double group_w = bar_w * static_cast<double>(std::max<std::size_t>(series.size(), 1)) + gap;
  const double width = left + group_w * static_cast<double>(groups.size()) + 160;
  const double height = top + plot_h + 60 + legend_h;
  double vmax = 0.0;
  for (const auto& g : groups)
    for (double v : g.values)
      if (std::isfinite(v)) vmax = std::max(vmax, v);
  if (vmax <= 0.0) vmax = 1.0;

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
    << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n";
  s << "  <title>" << xml_escape(title) << "</title>\n";
  s << "  <rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\"" << fmt(height) << "\" fill=\"white\"/>\n";
  s << "  <text x=\"" << fmt(left) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title)
    << "</text>\n";
  const double base_y = top + plot_h;
  s << "  <line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(base_y) << "\" x2=\"" << fmt(width - 150) << "\" y2=\""
    << fmt(base_y) << "\" stroke=\"black\"/>\n";
  s << "  <text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(top + 4)
    << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt(vmax, 4) << "</text>\n";
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double gx = left + group_w * static_cast<double>(gi);
    for (std::size_t si = 0; si < g.values.size(); ++si) {
      double v = std::isfinite(g.values[si]) ? std::max(g.values[si], 0.0) : 0.0;
      double h = plot_h * v / vmax;
      const std::string label = si < series.size() ? series[si] : "";
      s << "  <rect class=\"bar\" data-method=\"" << xml_escape(label) << "\" data-metric=\"" << xml_escape(g.label)
        << "\" x=\"" << fmt(gx + bar_w * static_cast<double>(si)) << "\" y=\"" << fmt(base_y - h) << "\" width=\""
        << fmt(bar_w - 2) << "\" height=\"" << fmt(h) << "\" fill=\"" << kPalette[si % 8] << "\"><title>"
        << xml_escape(label + " " + g.label + " = " + fmt(g.values[si])) << "</title></rect>\n";
    }
    s << "  <text x=\"" << fmt(gx + (group_w - gap) / 2) << "\" y=\"" << fmt(base_y + 16)
      << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << xml_escape(g.label)
      << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    double y = base_y + 40 + 20 * static_cast<double>(si);
    s << "  <rect x=\"" << fmt(left) << "\" y=\"" << fmt(y - 10) << "\" width=\"12\" height=\"12\" fill=\""
      << kPalette[si % 8] << "\"/>\n";
    s << "  <text x=\"" << fmt(left + 18) << "\" y=\"" << fmt(y) << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << xml_escape(series[si]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> write_metric_charts(const std::filesystem::path& dir,
                                                       const std::vector<MethodReport>& methods) {
  struct Family {
    const char* file;
    const char* title;
    std::vector<std::string> metrics;
  };
  const std::vector<Family> families = {
      {"retrieval.svg", "Self-retrieval R@K",
       {"naive_r@1", "naive_r@5", "naive_r@10", "hard_r@1", "hard_r@5", "hard_r@10"}},
      {"accuracy.svg", "Accuracy", {"bleu4", "cider", "spice", "clip_score", "ref_clip_score"}},
      {"diversity.svg", "Diversity", {"div1", "div2", "mbleu4", "self_cider"}},
  };
  std::filesystem::create_directories(dir);
  std::vector<std::string> series;
  std::vector<std::map<std::string, double>> corpora;
  for (const auto& m : methods) {
    series.push_back(m.method);
    corpora.push_back(m.corpus());
  }
  std::vector<std::filesystem::path> written;
  for (const auto& f : families) {
    std::vector<BarGroup> groups;
    for (const auto& metric : f.metrics) {
      bool any = std::any_of(corpora.begin(), corpora.end(), [&](const auto& c) { return c.count(metric) > 0; });
      if (!any) continue;
      BarGroup g{metric, {}};
      for (const auto& c : corpora) g.values.push_back(c.count(metric) ? c.at(metric) : 0.0);
      groups.push_back(std::move(g));
    }
    if (groups.empty()) continue;
    auto path = dir / f.file;
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << render_bar_chart_svg(f.title, series, groups);
    written.push_back(path);
  }
  return written;
}

}  // namespace capenrich
