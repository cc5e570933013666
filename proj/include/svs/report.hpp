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
#ifndef SVS_REPORT_HPP
#define SVS_REPORT_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "svs/evaluation.hpp"

namespace svs {

/// results CSV schema: song_id,method,source,metric,value with %.17g floats
/// (the +inf sentinel serializes as "inf").
void write_results_csv(const std::filesystem::path& path,
                       const std::map<std::string, std::vector<MetricRecord>>& results);

std::map<std::string, std::vector<MetricRecord>> read_results_csv(
    const std::filesystem::path& path);

/// Merges per-method record sets; duplicate (method, song, source) rows are
/// an error.
std::map<std::string, std::vector<MetricRecord>> merge_results(
    const std::vector<std::map<std::string, std::vector<MetricRecord>>>& parts);

/// Markdown median table (methods x source/metric columns, bold where the
/// improvement over the baseline is significant at the report's alpha).
std::string render_markdown(const SignificanceReport& report);

/// One CSV matrix per (source, metric): pmatrix_<source>_<metric>.csv.
void write_pairwise_matrices(const std::filesystem::path& dir,
                             const SignificanceReport& report);

}  // namespace svs

#endif  // SVS_REPORT_HPP
