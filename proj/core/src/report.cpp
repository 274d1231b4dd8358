#include "dfoattack/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dfoattack/errors.hpp"

namespace dfoattack {

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

SuccessCDF compute_cdf(std::span<const AttackRecord> records, std::span<const std::size_t> grid) {
  if (records.empty()) throw ContractViolation("compute_cdf: no records");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw ContractViolation("compute_cdf: grid must increase");
  }
  std::vector<std::size_t> hits;
  for (const auto& r : records) {
    if (r.success) hits.push_back(r.queries);
  }
  std::sort(hits.begin(), hits.end());
  SuccessCDF cdf;
  cdf.queries.assign(grid.begin(), grid.end());
  const double total = static_cast<double>(records.size());
  for (std::size_t q : grid) {
    const auto n = std::upper_bound(hits.begin(), hits.end(), q) - hits.begin();
    cdf.fraction.push_back(static_cast<double>(n) / total);
  }
  return cdf;
}

std::vector<std::size_t> uniform_grid(std::size_t max_queries, std::size_t step) {
  if (step == 0) throw ContractViolation("uniform_grid: step must be positive");
  std::vector<std::size_t> grid;
  for (std::size_t q = step; q <= max_queries; q += step) grid.push_back(q);
  if (grid.empty() || grid.back() != max_queries) grid.push_back(max_queries);
  return grid;
}

std::vector<CdfCurve> compute_curves(std::span<const AttackRecord> records,
                                     std::span<const std::size_t> grid) {
  std::map<std::pair<std::string, double>, std::vector<AttackRecord>> groups;
  for (const auto& r : records) groups[{r.attack, r.epsilon}].push_back(r);
  std::vector<CdfCurve> curves;
  for (const auto& [key, group] : groups) {
    curves.push_back({key.first, key.second, compute_cdf(group, grid)});
  }
  return curves;
}

std::string format_records_jsonl(std::span<const AttackRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<AttackRecord> parse_records_jsonl(const std::string& text) {
  std::vector<AttackRecord> records;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("<records>", lineno, e.what());
    }
  }
  return records;
}

std::vector<AttackRecord> read_records(const std::filesystem::path& path) {
  return parse_records_jsonl(read_text_file(path));
}

std::string format_cdf_csv(std::span<const CdfCurve> curves) {
  std::string out = "queries,fraction,attack,epsilon\n";
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.cdf.queries.size(); ++i) {
      out += std::to_string(c.cdf.queries[i]) + ',' + format_real(c.cdf.fraction[i]) + ',' +
             c.attack + ',' + format_real(c.epsilon) + '\n';
    }
  }
  return out;
}

std::vector<CdfCurve> parse_cdf_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<CdfCurve> curves;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "queries,fraction,attack,epsilon") {
        throw ParseError("<cdf>", lineno, "unexpected header");
      }
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw ParseError("<cdf>", lineno, "expected four columns");
    try {
      const std::size_t q = std::stoull(cells[0]);
      const double f = std::stod(cells[1]);
      const double eps = std::stod(cells[3]);
      if (curves.empty() || curves.back().attack != cells[2] || curves.back().epsilon != eps) {
        curves.push_back({cells[2], eps, {}});
      }
      curves.back().cdf.queries.push_back(q);
      curves.back().cdf.fraction.push_back(f);
    } catch (const std::logic_error&) {
      throw ParseError("<cdf>", lineno, "malformed number");
    }
  }
  return curves;
}

std::string render_svg(std::span<const CdfCurve> curves, double epsilon) {
  static constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#17becf"};
  constexpr double width = 640, height = 420;
  constexpr double left = 60, right = 160, top = 40, bottom = 50;
  const double pw = width - left - right;
  const double ph = height - top - bottom;

  std::size_t max_q = 1;
  for (const auto& c : curves) {
    if (c.epsilon == epsilon && !c.cdf.queries.empty()) {
      max_q = std::max(max_q, c.cdf.queries.back());
    }
  }
  auto px = [&](double q) { return left + pw * q / static_cast<double>(max_q); };
  auto py = [&](double f) { return top + ph * (1.0 - f); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << "epsilon = " << short_real(epsilon) << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    svg << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(f) << "\" y2=\""
        << py(f) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(f) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << short_real(f) << "</text>\n";
    const double q = max_q * f;
    svg << "<text x=\"" << px(q) << "\" y=\"" << top + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << static_cast<std::size_t>(q)
        << "</text>\n";
  }
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-size=\"12\">queries</text>\n";
  svg << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\""
      << " transform=\"rotate(-90 16 " << top + ph / 2 << ")\">success fraction</text>\n";

  std::size_t k = 0;
  for (const auto& c : curves) {
    if (c.epsilon != epsilon) continue;
    const char* color = kPalette[k % std::size(kPalette)];
    const std::string name = xml_escape(c.attack);
    svg << "<polyline class=\"cdf\" data-attack=\"" << name << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\" points=\"" << px(0) << ',' << py(0);
    double prev = 0.0;
    for (std::size_t i = 0; i < c.cdf.queries.size(); ++i) {
      const double x = px(static_cast<double>(c.cdf.queries[i]));
      svg << ' ' << x << ',' << py(prev) << ' ' << x << ',' << py(c.cdf.fraction[i]);
      prev = c.cdf.fraction[i];
    }
    svg << "\"/>\n";
    const double ly = top + 14 + 18.0 * static_cast<double>(k);
    svg << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << name
        << "</text>\n";
    ++k;
  }
  svg << "</svg>\n";
  return svg.str();
}

EmittedFiles emit_outputs(std::span<const AttackRecord> records, std::span<const CdfCurve> curves,
                          const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  EmittedFiles files;
  files.records = dir / "records.jsonl";
  write_text_file(files.records, format_records_jsonl(records));
  files.cdf = dir / "cdf.csv";
  write_text_file(files.cdf, format_cdf_csv(curves));
  std::vector<double> eps;
  for (const auto& c : curves) {
    if (std::find(eps.begin(), eps.end(), c.epsilon) == eps.end()) eps.push_back(c.epsilon);
  }
  std::sort(eps.begin(), eps.end());
  for (double e : eps) {
    auto path = dir / ("plot_eps_" + short_real(e) + ".svg");
    write_text_file(path, render_svg(curves, e));
    files.plots.push_back(std::move(path));
  }
  return files;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace dfoattack
