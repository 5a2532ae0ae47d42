// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "spx/lime.hpp"
#include "spx/stft.hpp"

namespace spx {

/// Per-pixel selection frequency over many explanations of one class,
/// normalized so the most-selected pixel maps to 1 (all zeros when no
/// pixel was ever selected).
struct AggregatedExplanation {
  int rows = 0, cols = 0;
  int class_id = 0;
  int n_explanations = 0;
  std::vector<float> values;  // row-major, in [0, 1]

  void save(const std::filesystem::path& path) const;  // SPC1 grid container
  static AggregatedExplanation load(const std::filesystem::path& path);
};

/// Mergeable unnormalized pixel counts; partial accumulators built by
/// concurrent workers merge by elementwise addition before normalizing.
class ExplanationAccumulator {
 public:
  ExplanationAccumulator(int rows, int cols, int class_id);
  void add(const Explanation& e);
  void merge(const ExplanationAccumulator& other);
  AggregatedExplanation finalize() const;
  int count() const { return n_; }

 private:
  int rows_, cols_, class_id_, n_ = 0;
  std::vector<uint32_t> counts_;
};

/// Sums binary masks pixelwise and divides by the maximum pixel count.
/// Order-independent; rejects empty input and mixed classes.
AggregatedExplanation aggregate(const std::vector<Explanation>& explanations,
                                int class_id);

/// Projects onto the frequency axis: W(row) = sum over columns.
FrequencyProfile project(const AggregatedExplanation& agg);

/// Absolute first difference |W(w+1) - W(w)|; output is one bin shorter.
/// Band edges used by the classifier show up as peaks.
FrequencyProfile derivative_profile(const FrequencyProfile& w);

struct EnsembleProfile {
  FrequencyProfile mean;    // kind kEnsembleMean
  FrequencyProfile stddev;  // kind kEnsembleStd, population std
  int n_models = 0;
};

/// Per-bin mean and population standard deviation over >= 2 profiles of
/// the same kind and length.
EnsembleProfile ensemble_stats(const std::vector<FrequencyProfile>& profiles);

/// Indices of local maxima above median + 3 * MAD of the profile. A
/// plateau of equal values counts once, at its first index.
std::vector<int> find_profile_peaks(const FrequencyProfile& p);

/// Fraction of target bins with a peak within +-tolerance bins.
double peak_recall(const std::vector<int>& peaks, const std::vector<int>& target_bins,
                   int tolerance = 2);

/// Ratio of between-column variance to total pixel variance of the
/// aggregate. Horizontal banding gives ~0; structure along the time axis
/// pushes it up. Values above 0.3 flag a temporally structured
/// explanation (detection only).
double temporality_score(const AggregatedExplanation& agg);
inline constexpr double kTemporalityFlagThreshold = 0.3;

}  // namespace spx
