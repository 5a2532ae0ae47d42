// SPDX-License-Identifier: Apache-2.0
#include "spx/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spx {

ExplanationAccumulator::ExplanationAccumulator(int rows, int cols, int class_id)
    : rows_(rows), cols_(cols), class_id_(class_id),
      counts_(static_cast<size_t>(rows) * cols, 0) {}

void ExplanationAccumulator::add(const Explanation& e) {
  if (e.rows != rows_ || e.cols != cols_)
    throw std::invalid_argument("aggregate: explanation shape mismatch");
  if (e.target_class != class_id_)
    throw std::invalid_argument("aggregate: mixed classes (" + std::to_string(e.target_class) +
                                " vs " + std::to_string(class_id_) + ")");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += e.mask[i];
  ++n_;
}

void ExplanationAccumulator::merge(const ExplanationAccumulator& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_ || other.class_id_ != class_id_)
    throw std::invalid_argument("aggregate: accumulator mismatch");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  n_ += other.n_;
}

AggregatedExplanation ExplanationAccumulator::finalize() const {
  if (n_ == 0) throw std::invalid_argument("aggregate: no explanations");
  AggregatedExplanation a;
  a.rows = rows_;
  a.cols = cols_;
  a.class_id = class_id_;
  a.n_explanations = n_;
  a.values.resize(counts_.size());
  const uint32_t maxc = *std::max_element(counts_.begin(), counts_.end());
  if (maxc == 0) {
    std::fill(a.values.begin(), a.values.end(), 0.0f);
    return a;
  }
  const float inv = 1.0f / static_cast<float>(maxc);
  for (size_t i = 0; i < counts_.size(); ++i)
    a.values[i] = static_cast<float>(counts_[i]) * inv;
  return a;
}

AggregatedExplanation aggregate(const std::vector<Explanation>& explanations,
                                int class_id) {
  if (explanations.empty()) throw std::invalid_argument("aggregate: empty explanation list");
  ExplanationAccumulator acc(explanations.front().rows, explanations.front().cols, class_id);
  for (const auto& e : explanations) acc.add(e);
  return acc.finalize();
}

FrequencyProfile project(const AggregatedExplanation& agg) {
  FrequencyProfile p;
  p.kind = ProfileKind::kLimeProjection;
  p.values.assign(static_cast<size_t>(agg.rows), 0.0);
  for (int r = 0; r < agg.rows; ++r) {
    double s = 0.0;
    const float* row = agg.values.data() + static_cast<size_t>(r) * agg.cols;
    for (int c = 0; c < agg.cols; ++c) s += row[c];
    p.values[static_cast<size_t>(r)] = s;
  }
  return p;
}

FrequencyProfile derivative_profile(const FrequencyProfile& w) {
  if (w.bins() < 2)
    throw std::invalid_argument("derivative_profile: need at least 2 bins");
  FrequencyProfile d;
  d.kind = ProfileKind::kLimeDerivative;
  d.values.resize(w.values.size() - 1);
  for (size_t i = 0; i + 1 < w.values.size(); ++i)
    d.values[i] = std::abs(w.values[i + 1] - w.values[i]);
  return d;
}

EnsembleProfile ensemble_stats(const std::vector<FrequencyProfile>& profiles) {
  if (profiles.size() < 2)
    throw std::invalid_argument("ensemble_stats: need at least 2 profiles");
  const size_t bins = profiles.front().values.size();
  const ProfileKind kind = profiles.front().kind;
  for (const auto& p : profiles) {
    if (p.values.size() != bins)
      throw std::invalid_argument("ensemble_stats: profile lengths differ");
    if (p.kind != kind)
      throw std::invalid_argument("ensemble_stats: mixed profile kinds");
  }
  EnsembleProfile e;
  e.n_models = static_cast<int>(profiles.size());
  e.mean.kind = ProfileKind::kEnsembleMean;
  e.stddev.kind = ProfileKind::kEnsembleStd;
  e.mean.values.assign(bins, 0.0);
  e.stddev.values.assign(bins, 0.0);
  for (size_t b = 0; b < bins; ++b) {
    double s = 0.0;
    for (const auto& p : profiles) s += p.values[b];
    const double mu = s / static_cast<double>(profiles.size());
    double v = 0.0;
    for (const auto& p : profiles) {
      const double d = p.values[b] - mu;
      v += d * d;
    }
    e.mean.values[b] = mu;
    e.stddev.values[b] = std::sqrt(v / static_cast<double>(profiles.size()));
  }
  return e;
}

namespace {
double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (lo + m);
  }
  return m;
}
}  // namespace

std::vector<int> find_profile_peaks(const FrequencyProfile& p) {
  const auto& v = p.values;
  const int n = static_cast<int>(v.size());
  std::vector<int> peaks;
  if (n < 3) return peaks;

  const double med = median_of(v);
  std::vector<double> dev(v.size());
  for (size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  const double mad = median_of(dev);
  const double threshold = med + 3.0 * mad;

  for (int i = 1; i < n - 1; ++i) {
    if (!(v[static_cast<size_t>(i)] > threshold)) continue;
    if (v[static_cast<size_t>(i)] < v[static_cast<size_t>(i) - 1]) continue;
    // Walk any plateau to the right; count it once, at its first index.
    int j = i;
    while (j + 1 < n && v[static_cast<size_t>(j) + 1] == v[static_cast<size_t>(i)]) ++j;
    const double right = j + 1 < n ? v[static_cast<size_t>(j) + 1] : -1.0;
    if (v[static_cast<size_t>(i)] > v[static_cast<size_t>(i) - 1] &&
        v[static_cast<size_t>(i)] > right)
      peaks.push_back(i);
    i = j;
  }
  return peaks;
}

double peak_recall(const std::vector<int>& peaks, const std::vector<int>& target_bins,
                   int tolerance) {
  if (target_bins.empty()) return 1.0;
  int hit = 0;
  for (int b : target_bins)
    for (int p : peaks)
      if (std::abs(p - b) <= tolerance) {
        ++hit;
        break;
      }
  return static_cast<double>(hit) / static_cast<double>(target_bins.size());
}

double temporality_score(const AggregatedExplanation& agg) {
  const int R = agg.rows, C = agg.cols;
  const double n = static_cast<double>(R) * C;
  double total = 0.0, total_sq = 0.0;
  std::vector<double> col_sum(static_cast<size_t>(C), 0.0);
  for (int r = 0; r < R; ++r) {
    const float* row = agg.values.data() + static_cast<size_t>(r) * C;
    for (int c = 0; c < C; ++c) {
      total += row[c];
      total_sq += static_cast<double>(row[c]) * row[c];
      col_sum[static_cast<size_t>(c)] += row[c];
    }
  }
  const double mean = total / n;
  const double var_total = total_sq / n - mean * mean;
  if (var_total <= 1e-300) return 0.0;
  double var_between = 0.0;
  for (int c = 0; c < C; ++c) {
    const double cm = col_sum[static_cast<size_t>(c)] / R;
    var_between += (cm - mean) * (cm - mean);
  }
  var_between /= C;
  return var_between / var_total;
}

// AggregatedExplanation rides in the SPC1 grid container with its own kind.
void AggregatedExplanation::save(const std::filesystem::path& path) const {
  Spectrogram s;
  s.rows = rows;
  s.cols = cols;
  s.values = values;
  s.class_id = static_cast<uint32_t>(class_id);
  s.log_scaled = false;
  save_grid(path, s, GridKind::kAggregatedExplanation);
}

AggregatedExplanation AggregatedExplanation::load(const std::filesystem::path& path) {
  GridKind kind;
  Spectrogram s = load_grid(path, &kind);
  if (kind != GridKind::kAggregatedExplanation)
    throw std::runtime_error("not an aggregated-explanation grid: " + path.string());
  AggregatedExplanation a;
  a.rows = s.rows;
  a.cols = s.cols;
  a.class_id = static_cast<int>(s.class_id);
  a.values = std::move(s.values);
  a.n_explanations = 0;  // not stored in the container
  return a;
}

}  // namespace spx
