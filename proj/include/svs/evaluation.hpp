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
#ifndef SVS_EVALUATION_HPP
#define SVS_EVALUATION_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svs/audio.hpp"

namespace svs {

struct FrameMetrics {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};

/// Per-song, per-source metrics: the median over 1-second frames plus the
/// raw frame sequence. Values may carry the +inf sentinel.
struct MetricRecord {
  std::string song_id;
  std::string source;
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
  std::vector<FrameMetrics> frames;
};

/// BSS-eval decomposition of each estimate into target, interference and
/// artifact parts via least-squares projection onto spans of delayed
/// references (filter_len taps per source and channel).
///
/// Sources whose reference is all zero raise undefined-metric unless
/// `skip_silent_references`, in which case they are omitted from the result.
std::map<std::string, FrameMetrics> bss_eval_frame(
    const std::map<std::string, AudioClip>& estimates,
    const std::map<std::string, AudioClip>& references, int filter_len,
    bool skip_silent_references = false);

/// Frame-wise evaluation over consecutive non-overlapping windows of
/// frame_s seconds; the song metric is the median of the finite frame
/// values. Frames where a source's reference energy falls below 1e-10 of
/// that source's mean frame energy are skipped for that source.
std::vector<MetricRecord> evaluate_song(
    const std::string& song_id, const std::map<std::string, AudioClip>& estimates,
    const std::map<std::string, AudioClip>& references, double frame_s = 1.0,
    int filter_len = 16);

struct ComparisonResult {
  std::string method_a;
  std::string method_b;
  std::string metric;
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  double mean_difference = 0.0;
  bool degenerate = false;  // zero-variance difference vector
  int paired_count = 0;
};

/// Two-sided paired Student t-test. Pairs with a non-finite value on either
/// side are excluded; at least two surviving pairs are required.
ComparisonResult paired_t_test(const std::vector<double>& a,
                               const std::vector<double>& b);

/// Regularized incomplete beta function I_x(a, b) (continued fractions).
double regularized_incomplete_beta(double a, double b, double x);

/// Two-sided p-value of a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, int df);

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"sdr", "sir", "sar"};
  return names;
}

/// Per-method per-song values for one source and metric.
using MethodValues = std::map<std::string, std::map<std::string, double>>;

struct SignificanceCell {
  double median = 0.0;
  double p_vs_baseline = 1.0;
  bool significant = false;  // p < alpha and median improves over baseline
};

struct SignificanceReport {
  std::vector<std::string> methods;  // baseline first, then the rest sorted
  std::string baseline;
  double alpha = 0.001;
  // table[source][metric][method]
  std::map<std::string, std::map<std::string, std::map<std::string, SignificanceCell>>> table;
  // pairwise[source][metric][i][j]: symmetric p matrix, unit diagonal,
  // indexed by the order of `methods`
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>>> pairwise;
  std::vector<std::string> warnings;  // songs excluded pairwise, etc.
};

/// Median table with significance flags against the baseline plus the
/// pairwise p-value matrices.
SignificanceReport significance_table(
    const std::map<std::string, std::vector<MetricRecord>>& results,
    const std::string& baseline, double alpha = 0.001);

}  // namespace svs

#endif  // SVS_EVALUATION_HPP
