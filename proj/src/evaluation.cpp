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
#include "svs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "svs/errors.hpp"

namespace svs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEnergyFloor = 1e-12;

double to_db(double num, double den) {
  if (den < kEnergyFloor) return kInf;
  return 10.0 * std::log10(num / den);
}

/// Cholesky solve of (G + damping I) x = rhs; G must be symmetric PSD.
std::vector<double> damped_cholesky_solve(std::vector<double> g, int n,
                                          std::vector<double> rhs, double damping) {
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i) * n + i] += damping;
  // in-place lower-triangular factorization
  for (int j = 0; j < n; ++j) {
    double diag = g[static_cast<size_t>(j) * n + j];
    for (int k = 0; k < j; ++k) {
      const double l = g[static_cast<size_t>(j) * n + k];
      diag -= l * l;
    }
    if (diag <= 0.0)
      raise(ErrorCode::numeric_error, "projection Gram matrix not positive definite");
    const double root = std::sqrt(diag);
    g[static_cast<size_t>(j) * n + j] = root;
    for (int i = j + 1; i < n; ++i) {
      double v = g[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        v -= g[static_cast<size_t>(i) * n + k] * g[static_cast<size_t>(j) * n + k];
      g[static_cast<size_t>(i) * n + j] = v / root;
    }
  }
  // forward then backward substitution
  for (int i = 0; i < n; ++i) {
    double v = rhs[static_cast<size_t>(i)];
    for (int k = 0; k < i; ++k) v -= g[static_cast<size_t>(i) * n + k] * rhs[static_cast<size_t>(k)];
    rhs[static_cast<size_t>(i)] = v / g[static_cast<size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = rhs[static_cast<size_t>(i)];
    for (int k = i + 1; k < n; ++k) v -= g[static_cast<size_t>(k) * n + i] * rhs[static_cast<size_t>(k)];
    rhs[static_cast<size_t>(i)] = v / g[static_cast<size_t>(i) * n + i];
  }
  return rhs;
}

}  // namespace

std::map<std::string, FrameMetrics> bss_eval_frame(
    const std::map<std::string, AudioClip>& estimates,
    const std::map<std::string, AudioClip>& references, int filter_len,
    bool skip_silent_references) {
  if (filter_len < 1) raise(ErrorCode::invalid_input, "filter_len must be >= 1");
  if (references.empty() || estimates.empty())
    raise(ErrorCode::invalid_input, "need at least one source");

  // deterministic source order; shapes must agree everywhere
  std::vector<std::string> sources;
  for (const auto& [name, ref] : references) sources.push_back(name);
  const AudioClip& first = references.begin()->second;
  const size_t len = first.length();
  const int channels = first.channels();
  for (const auto& [name, ref] : references)
    if (ref.length() != len || ref.channels() != channels)
      raise(ErrorCode::shape_mismatch, "reference shapes differ");
  for (const auto& [name, est] : estimates) {
    if (est.length() != len || est.channels() != channels)
      raise(ErrorCode::shape_mismatch, "estimate '" + name + "' shape differs");
    if (references.find(name) == references.end())
      raise(ErrorCode::missing_source, "no reference for estimate '" + name + "'");
  }

  // silent-reference handling
  std::vector<std::string> live;
  for (const auto& name : sources) {
    double energy = 0.0;
    for (const auto& ch : references.at(name).samples)
      for (const double s : ch) energy += s * s;
    if (energy > 0.0) {
      live.push_back(name);
    } else if (!skip_silent_references) {
      raise(ErrorCode::undefined_metric,
            "reference for source '" + name + "' is silent");
    }
  }
  if (live.empty())
    raise(ErrorCode::undefined_metric, "all references are silent in this frame");

  const int L = filter_len;
  const int n_src = static_cast<int>(sources.size());
  const int n_cols = n_src * channels * L;
  const size_t padded = len + static_cast<size_t>(L) - 1;

  // column (j, c, tau) -> delayed reference; Gram entries are full
  // correlations r(tau - tau') of the underlying signal pairs
  auto signal = [&](int jc) -> const std::vector<double>& {
    return references.at(sources[static_cast<size_t>(jc / channels)])
        .samples[static_cast<size_t>(jc % channels)];
  };
  const int n_sig = n_src * channels;
  // r[a][b][delta + L - 1] = sum_u sig_a[u] * sig_b[u + delta]
  std::vector<std::vector<std::vector<double>>> corr(
      static_cast<size_t>(n_sig),
      std::vector<std::vector<double>>(static_cast<size_t>(n_sig),
                                       std::vector<double>(static_cast<size_t>(2 * L - 1), 0.0)));
  for (int a = 0; a < n_sig; ++a)
    for (int b = a; b < n_sig; ++b) {
      const auto& xa = signal(a);
      const auto& xb = signal(b);
      for (int delta = -(L - 1); delta <= L - 1; ++delta) {
        double acc = 0.0;
        const long long lo = std::max<long long>(0, -delta);
        const long long hi =
            std::min<long long>(static_cast<long long>(len), static_cast<long long>(len) - delta);
        for (long long u = lo; u < hi; ++u)
          acc += xa[static_cast<size_t>(u)] * xb[static_cast<size_t>(u + delta)];
        corr[static_cast<size_t>(a)][static_cast<size_t>(b)][static_cast<size_t>(delta + L - 1)] = acc;
        corr[static_cast<size_t>(b)][static_cast<size_t>(a)][static_cast<size_t>(-delta + L - 1)] = acc;
      }
    }

  std::vector<double> gram(static_cast<size_t>(n_cols) * n_cols, 0.0);
  for (int col_a = 0; col_a < n_cols; ++col_a) {
    const int sig_a = col_a / L, tau_a = col_a % L;
    for (int col_b = 0; col_b < n_cols; ++col_b) {
      const int sig_b = col_b / L, tau_b = col_b % L;
      gram[static_cast<size_t>(col_a) * n_cols + col_b] =
          corr[static_cast<size_t>(sig_a)][static_cast<size_t>(sig_b)]
              [static_cast<size_t>(tau_a - tau_b + L - 1)];
    }
  }
  double mean_diag = 0.0;
  for (int i = 0; i < n_cols; ++i) mean_diag += gram[static_cast<size_t>(i) * n_cols + i];
  mean_diag /= n_cols;
  const double damping = 1e-10 * std::max(1.0, mean_diag);

  // projection of a coefficient vector back to a padded time series
  auto project = [&](const std::vector<double>& coef, const std::vector<int>& cols) {
    std::vector<double> out(padded, 0.0);
    for (size_t k = 0; k < cols.size(); ++k) {
      const int col = cols[k];
      const int sig = col / L, tau = col % L;
      const double w = coef[k];
      if (w == 0.0) continue;
      const auto& x = signal(sig);
      for (size_t u = 0; u < len; ++u) out[u + static_cast<size_t>(tau)] += w * x[u];
    }
    return out;
  };

  std::map<std::string, FrameMetrics> result;
  for (const auto& name : live) {
    const auto est_it = estimates.find(name);
    if (est_it == estimates.end())
      raise(ErrorCode::missing_source, "no estimate for source '" + name + "'");
    const AudioClip& est = est_it->second;

    const int j = static_cast<int>(std::find(sources.begin(), sources.end(), name) -
                                   sources.begin());
    std::vector<int> own_cols, all_cols;
    for (int col = 0; col < n_cols; ++col) {
      all_cols.push_back(col);
      if (col / (channels * L) == j) own_cols.push_back(col);
    }

    double e_target = 0.0, e_interf = 0.0, e_artif = 0.0, e_ti = 0.0;
    for (int i = 0; i < channels; ++i) {
      const auto& e = est.samples[static_cast<size_t>(i)];
      // rhs entries: sum_t e[t] * sig[t - tau]
      std::vector<double> rhs(static_cast<size_t>(n_cols), 0.0);
      for (int col = 0; col < n_cols; ++col) {
        const int sig_idx = col / L, tau = col % L;
        const auto& x = signal(sig_idx);
        double acc = 0.0;
        for (size_t t = static_cast<size_t>(tau); t < len; ++t)
          acc += e[t] * x[t - static_cast<size_t>(tau)];
        rhs[static_cast<size_t>(col)] = acc;
      }

      // restricted solve for s_target, full solve for P_all
      std::vector<double> g_own(own_cols.size() * own_cols.size());
      std::vector<double> rhs_own(own_cols.size());
      for (size_t a = 0; a < own_cols.size(); ++a) {
        rhs_own[a] = rhs[static_cast<size_t>(own_cols[a])];
        for (size_t b = 0; b < own_cols.size(); ++b)
          g_own[a * own_cols.size() + b] =
              gram[static_cast<size_t>(own_cols[a]) * n_cols + own_cols[b]];
      }
      const auto coef_own = damped_cholesky_solve(
          std::move(g_own), static_cast<int>(own_cols.size()), std::move(rhs_own), damping);
      const auto coef_all =
          damped_cholesky_solve(gram, n_cols, rhs, damping);

      const auto s_target = project(coef_own, own_cols);
      const auto p_all = project(coef_all, all_cols);
      for (size_t t = 0; t < padded; ++t) {
        const double e_pad = t < len ? e[t] : 0.0;
        const double interf = p_all[t] - s_target[t];
        const double artif = e_pad - p_all[t];
        e_target += s_target[t] * s_target[t];
        e_interf += interf * interf;
        e_artif += artif * artif;
        e_ti += (s_target[t] + interf) * (s_target[t] + interf);
      }
    }

    FrameMetrics m;
    m.sdr = to_db(e_target, e_interf + e_artif);
    m.sir = to_db(e_target, e_interf);
    m.sar = to_db(e_ti, e_artif);
    result.emplace(name, m);
  }
  return result;
}

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Median of the finite values; falls back to the majority infinity when no
/// finite value exists.
double frame_median(const std::vector<double>& values) {
  std::vector<double> finite;
  int pos_inf = 0, neg_inf = 0;
  for (const double v : values) {
    if (std::isfinite(v))
      finite.push_back(v);
    else if (v > 0)
      ++pos_inf;
    else
      ++neg_inf;
  }
  if (!finite.empty()) return median_of(std::move(finite));
  return pos_inf >= neg_inf ? kInf : -kInf;
}

}  // namespace

std::vector<MetricRecord> evaluate_song(
    const std::string& song_id, const std::map<std::string, AudioClip>& estimates,
    const std::map<std::string, AudioClip>& references, double frame_s,
    int filter_len) {
  if (references.empty()) raise(ErrorCode::invalid_input, "no references");
  const AudioClip& first = references.begin()->second;
  const auto frame_len = static_cast<size_t>(std::llround(frame_s * first.sample_rate));
  if (frame_len == 0) raise(ErrorCode::invalid_input, "frame too short");
  const size_t n_frames = first.length() / frame_len;
  if (n_frames == 0)
    raise(ErrorCode::undefined_metric, "song shorter than one evaluation frame");

  // per-source frame energies for the silence rule
  std::map<std::string, std::vector<double>> frame_energy;
  std::map<std::string, double> mean_energy;
  for (const auto& [name, ref] : references) {
    auto& fe = frame_energy[name];
    fe.assign(n_frames, 0.0);
    for (size_t f = 0; f < n_frames; ++f)
      for (const auto& ch : ref.samples)
        for (size_t t = f * frame_len; t < (f + 1) * frame_len; ++t)
          fe[f] += ch[t] * ch[t];
    double acc = 0.0;
    for (const double v : fe) acc += v;
    mean_energy[name] = acc / static_cast<double>(n_frames);
  }

  auto slice = [&](const AudioClip& clip, size_t f) {
    AudioClip out = AudioClip::zeros(clip.channels(), frame_len, clip.sample_rate);
    for (int ch = 0; ch < clip.channels(); ++ch)
      std::copy_n(clip.samples[static_cast<size_t>(ch)].begin() +
                      static_cast<long>(f * frame_len),
                  frame_len, out.samples[static_cast<size_t>(ch)].begin());
    return out;
  };

  std::map<std::string, std::vector<FrameMetrics>> frames_per_source;
  for (size_t f = 0; f < n_frames; ++f) {
    // which sources count this frame
    std::set<std::string> wanted;
    for (const auto& [name, fe] : frame_energy)
      if (fe[f] >= 1e-10 * mean_energy[name]) wanted.insert(name);
    if (wanted.empty()) continue;

    std::map<std::string, AudioClip> est_f, ref_f;
    for (const auto& [name, clip] : estimates) est_f.emplace(name, slice(clip, f));
    for (const auto& [name, clip] : references) ref_f.emplace(name, slice(clip, f));
    const auto metrics = bss_eval_frame(est_f, ref_f, filter_len,
                                        /*skip_silent_references=*/true);
    for (const auto& [name, m] : metrics)
      if (wanted.count(name)) frames_per_source[name].push_back(m);
  }

  std::vector<MetricRecord> records;
  for (const auto& [name, clip] : references) {
    const auto it = frames_per_source.find(name);
    if (it == frames_per_source.end() || it->second.empty())
      raise(ErrorCode::undefined_metric,
            "every frame of source '" + name + "' was skipped");
    MetricRecord rec;
    rec.song_id = song_id;
    rec.source = name;
    rec.frames = it->second;
    std::vector<double> sdr, sir, sar;
    for (const auto& m : rec.frames) {
      sdr.push_back(m.sdr);
      sir.push_back(m.sir);
      sar.push_back(m.sar);
    }
    rec.sdr = frame_median(sdr);
    rec.sir = frame_median(sir);
    rec.sar = frame_median(sar);
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Student t machinery

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 3e-14;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_continued_fraction(a, b, x) / a;
  return 1.0 - bt * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int df) {
  if (df < 1) raise(ErrorCode::invalid_input, "degrees of freedom must be >= 1");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return regularized_incomplete_beta(df / 2.0, 0.5, x);
}

ComparisonResult paired_t_test(const std::vector<double>& a,
                               const std::vector<double>& b) {
  if (a.size() != b.size())
    raise(ErrorCode::invalid_input, "paired test needs equal-length vectors");
  std::vector<double> d;
  d.reserve(a.size());
  for (size_t i = 0; i < a.size(); ++i)
    if (std::isfinite(a[i]) && std::isfinite(b[i])) d.push_back(a[i] - b[i]);
  const auto n = static_cast<int>(d.size());
  if (n < 2)
    raise(ErrorCode::invalid_input,
          "need at least two finite pairs, have " + std::to_string(n));

  double mean = 0.0;
  for (const double v : d) mean += v;
  mean /= n;
  double ss = 0.0;
  for (const double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1));

  ComparisonResult result;
  result.degrees_of_freedom = n - 1;
  result.mean_difference = mean;
  result.paired_count = n;
  if (sd == 0.0) {
    result.degenerate = true;
    if (mean == 0.0) {
      result.t_statistic = 0.0;
      result.p_value = 1.0;
    } else {
      result.t_statistic = mean > 0.0 ? kInf : -kInf;
      result.p_value = 0.0;
    }
    return result;
  }
  result.t_statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  result.p_value = student_t_two_sided_p(result.t_statistic, n - 1);
  return result;
}

SignificanceReport significance_table(
    const std::map<std::string, std::vector<MetricRecord>>& results,
    const std::string& baseline, double alpha) {
  if (results.find(baseline) == results.end())
    raise(ErrorCode::invalid_input, "baseline method '" + baseline + "' missing");

  SignificanceReport report;
  report.baseline = baseline;
  report.alpha = alpha;
  report.methods.push_back(baseline);
  for (const auto& [method, records] : results)
    if (method != baseline) report.methods.push_back(method);

  // index: values[source][metric][method][song] = value
  std::map<std::string, std::map<std::string, MethodValues>> values;
  std::set<std::string> sources;
  for (const auto& [method, records] : results)
    for (const auto& rec : records) {
      sources.insert(rec.source);
      values[rec.source]["sdr"][method][rec.song_id] = rec.sdr;
      values[rec.source]["sir"][method][rec.song_id] = rec.sir;
      values[rec.source]["sar"][method][rec.song_id] = rec.sar;
    }

  for (const auto& source : sources) {
    for (const auto& metric : metric_names()) {
      const MethodValues& mv = values[source][metric];
      // medians per method
      std::map<std::string, double> medians;
      for (const auto& method : report.methods) {
        const auto it = mv.find(method);
        if (it == mv.end() || it->second.empty()) continue;
        std::vector<double> all;
        for (const auto& [song, v] : it->second) all.push_back(v);
        medians[method] = frame_median(all);
      }

      auto paired_values = [&](const std::string& ma, const std::string& mb,
                               std::vector<double>& va, std::vector<double>& vb) {
        const auto ia = mv.find(ma);
        const auto ib = mv.find(mb);
        if (ia == mv.end() || ib == mv.end()) return;
        for (const auto& [song, v] : ia->second) {
          const auto jt = ib->second.find(song);
          if (jt == ib->second.end()) {
            report.warnings.push_back("song '" + song + "' missing from '" + mb +
                                      "' (" + source + "/" + metric + ")");
            continue;
          }
          va.push_back(v);
          vb.push_back(jt->second);
        }
      };

      for (const auto& method : report.methods) {
        if (medians.find(method) == medians.end()) continue;
        SignificanceCell cell;
        cell.median = medians[method];
        if (method == baseline) {
          cell.p_vs_baseline = 1.0;
        } else {
          std::vector<double> va, vb;
          paired_values(method, baseline, va, vb);
          if (va.size() >= 2) {
            const auto t = paired_t_test(va, vb);
            cell.p_vs_baseline = t.p_value;
            cell.significant = t.p_value < alpha && cell.median > medians[baseline];
          }
        }
        report.table[source][metric][method] = cell;
      }

      // pairwise matrix over report.methods
      const auto n = report.methods.size();
      std::vector<std::vector<double>> matrix(n, std::vector<double>(n, 1.0));
      for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
          std::vector<double> va, vb;
          paired_values(report.methods[i], report.methods[j], va, vb);
          double p = 1.0;
          if (va.size() >= 2) p = paired_t_test(va, vb).p_value;
          matrix[i][j] = p;
          matrix[j][i] = p;
        }
      report.pairwise[source][metric] = std::move(matrix);
    }
  }
  return report;
}

}  // namespace svs
