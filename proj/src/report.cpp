/**
 * Copyright 2026 the svsep authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "svs/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "svs/errors.hpp"

namespace svs {

namespace {

std::string format_value(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_value(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

std::string format_median(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string format_p(double p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", p);
  return buf;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path,
                       const std::map<std::string, std::vector<MetricRecord>>& results) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
  out << "song_id,method,source,metric,value\n";
  for (const auto& [method, records] : results)
    for (const auto& rec : records) {
      out << rec.song_id << "," << method << "," << rec.source << ",sdr,"
          << format_value(rec.sdr) << "\n";
      out << rec.song_id << "," << method << "," << rec.source << ",sir,"
          << format_value(rec.sir) << "\n";
      out << rec.song_id << "," << method << "," << rec.source << ",sar,"
          << format_value(rec.sar) << "\n";
    }
}

std::map<std::string, std::vector<MetricRecord>> read_results_csv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::io_error, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "song_id,method,source,metric,value")
    raise(ErrorCode::io_error, "unexpected results CSV header in " + path.string());

  // collect triple-keyed values, then assemble records
  std::map<std::string, std::map<std::pair<std::string, std::string>,
                                 std::map<std::string, double>>> acc;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5)
      raise(ErrorCode::io_error, "malformed results row: " + line);
    acc[fields[1]][{fields[0], fields[2]}][fields[3]] = parse_value(fields[4]);
  }

  std::map<std::string, std::vector<MetricRecord>> results;
  for (const auto& [method, by_song] : acc)
    for (const auto& [key, metrics] : by_song) {
      MetricRecord rec;
      rec.song_id = key.first;
      rec.source = key.second;
      const auto get = [&](const char* name) {
        const auto it = metrics.find(name);
        if (it == metrics.end())
          raise(ErrorCode::io_error, "missing metric '" + std::string(name) +
                                         "' for song " + rec.song_id);
        return it->second;
      };
      rec.sdr = get("sdr");
      rec.sir = get("sir");
      rec.sar = get("sar");
      results[method].push_back(std::move(rec));
    }
  return results;
}

std::map<std::string, std::vector<MetricRecord>> merge_results(
    const std::vector<std::map<std::string, std::vector<MetricRecord>>>& parts) {
  std::map<std::string, std::vector<MetricRecord>> merged;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& part : parts)
    for (const auto& [method, records] : part)
      for (const auto& rec : records) {
        if (!seen.insert({method, rec.song_id, rec.source}).second)
          raise(ErrorCode::invalid_input,
                "duplicate result row for method '" + method + "', song '" +
                    rec.song_id + "', source '" + rec.source + "'");
        merged[method].push_back(rec);
      }
  return merged;
}

std::string render_markdown(const SignificanceReport& report) {
  std::set<std::string> sources;
  for (const auto& [source, per_metric] : report.table) sources.insert(source);

  std::ostringstream out;
  out << "# Separation results\n\n";
  out << "Medians per method; **bold** marks a significant improvement over "
         "the baseline `"
      << report.baseline << "` (p < " << format_p(report.alpha) << ").\n\n";

  out << "| Method |";
  for (const auto& source : sources)
    for (const auto& metric : metric_names()) {
      std::string upper = metric;
      std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
      out << " " << source << " " << upper << " |";
    }
  out << "\n|---|";
  for (size_t i = 0; i < sources.size() * metric_names().size(); ++i) out << "---|";
  out << "\n";

  for (const auto& method : report.methods) {
    out << "| " << method << (method == report.baseline ? " (baseline)" : "") << " |";
    for (const auto& source : sources) {
      for (const auto& metric : metric_names()) {
        const auto& per_metric = report.table.at(source);
        std::string cell = "-";
        const auto m_it = per_metric.find(metric);
        if (m_it != per_metric.end()) {
          const auto c_it = m_it->second.find(method);
          if (c_it != m_it->second.end()) {
            const auto& c = c_it->second;
            cell = c.significant ? "**" + format_median(c.median) + "**"
                                 : format_median(c.median);
          }
        }
        out << " " << cell << " |";
      }
    }
    out << "\n";
  }

  out << "\n## Paired t-test p-values vs baseline\n\n";
  out << "| Method |";
  for (const auto& source : sources)
    for (const auto& metric : metric_names()) {
      std::string upper = metric;
      std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
      out << " " << source << " " << upper << " |";
    }
  out << "\n|---|";
  for (size_t i = 0; i < sources.size() * metric_names().size(); ++i) out << "---|";
  out << "\n";
  for (const auto& method : report.methods) {
    if (method == report.baseline) continue;
    out << "| " << method << " |";
    for (const auto& source : sources)
      for (const auto& metric : metric_names()) {
        const auto& cell = report.table.at(source).at(metric);
        const auto c_it = cell.find(method);
        out << " " << (c_it == cell.end() ? "-" : format_p(c_it->second.p_vs_baseline))
            << " |";
      }
    out << "\n";
  }

  if (!report.warnings.empty()) {
    out << "\n## Warnings\n\n";
    std::set<std::string> unique(report.warnings.begin(), report.warnings.end());
    for (const auto& w : unique) out << "- " << w << "\n";
  }
  return out.str();
}

void write_pairwise_matrices(const std::filesystem::path& dir,
                             const SignificanceReport& report) {
  std::filesystem::create_directories(dir);
  for (const auto& [source, per_metric] : report.pairwise) {
    for (const auto& [metric, matrix] : per_metric) {
      const auto path = dir / ("pmatrix_" + source + "_" + metric + ".csv");
      std::ofstream out(path, std::ios::trunc);
      if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
      out << "method";
      for (const auto& m : report.methods) out << "," << m;
      out << "\n";
      for (size_t i = 0; i < report.methods.size(); ++i) {
        out << report.methods[i];
        for (size_t j = 0; j < report.methods.size(); ++j)
          out << "," << format_p(matrix[i][j]);
        out << "\n";
      }
    }
  }
}

}  // namespace svs
