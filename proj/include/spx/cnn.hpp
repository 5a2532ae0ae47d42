// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "spx/exec.hpp"
#include "spx/rng.hpp"
#include "spx/stft.hpp"

namespace spx {

/// Black-box classifier over normalized spectrograms. Batch order is
/// preserved; each output row is a probability vector summing to 1 within
/// 1e-5. Implementations must be re-entrant for concurrent calls on an
/// immutable model.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual int n_classes() const = 0;
  /// batch: n row-major rows x cols planes, values min-max normalized to
  /// [0, 1]. probs: n * n_classes(), row per input.
  virtual void predict_proba(const float* batch, int n, int rows, int cols,
                             float* probs) const = 0;
};

struct CnnConfig {
  int rows = kGridSize, cols = kGridSize;
  int c1 = 4, c2 = 8, c3 = 16;  // channels of the three conv blocks
  int n_classes = 9;

  std::string arch_string() const;
  uint64_t arch_hash() const;  // FNV-1a of arch_string()
};

/// Parameters and batch-norm running statistics of the reference CNN,
/// templated so the gradient check can run the whole model in double.
template <typename T>
struct CnnParams {
  // Trainable tensors, in checkpoint order.
  std::vector<T> w1, b1, g1, be1;
  std::vector<T> w2, b2, g2, be2;
  std::vector<T> w3, b3, g3, be3;
  std::vector<T> wf, bf;
  // Batch-norm running statistics (buffers, not trained).
  std::vector<T> rm1, rv1, rm2, rv2, rm3, rv3;

  static CnnParams init(const CnnConfig& cfg, Rng& rng);
  static CnnParams zeros(const CnnConfig& cfg);
  size_t n_trainable() const;
  /// Trainable tensors in checkpoint order.
  std::vector<std::vector<T>*> trainable_list();
  /// Running-statistic buffers in checkpoint order.
  std::vector<std::vector<T>*> buffer_list();
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, int step, double loss);
  int epoch, step;
  double loss;
};

/// Reference CNN: three conv blocks (3x3 stride-2 conv, batch norm, ReLU)
/// followed by global average pooling and a linear softmax head. The
/// single-plane spectrogram is expanded internally to the two planes the
/// network expects: the centered values and a fixed row-coordinate ramp.
/// The coordinate plane lets band detectors localize in frequency, which
/// global pooling would otherwise erase.
template <typename T>
class SmallCnnT {
 public:
  SmallCnnT(const CnnConfig& cfg, uint64_t init_seed);
  SmallCnnT(const CnnConfig& cfg, CnnParams<T> params);

  const CnnConfig& config() const { return cfg_; }
  CnnParams<T>& params() { return p_; }
  const CnnParams<T>& params() const { return p_; }

  /// Training-mode forward + backward on a batch of single-plane
  /// canvases [n, rows*cols]. Fills grads (same shapes as params),
  /// writes softmax probabilities, updates batch-norm running stats,
  /// and returns the mean cross-entropy loss.
  T loss_and_grad(const T* batch, const int* labels, int n, CnnParams<T>& grads,
                  T* probs, Exec exec);

  /// Eval-mode forward (running statistics); per-sample results are
  /// independent of batch composition.
  void predict(const T* batch, int n, T* probs, Exec exec) const;

 private:
  void expand_input(const T* batch, int n, std::vector<T>& planes) const;
  CnnConfig cfg_;
  CnnParams<T> p_;
};

extern template class SmallCnnT<float>;
extern template class SmallCnnT<double>;

/// Float production model implementing the Classifier interface.
class SmallCnn : public Classifier {
 public:
  SmallCnn(const CnnConfig& cfg, uint64_t init_seed);
  SmallCnn(const CnnConfig& cfg, CnnParams<float> params);

  int n_classes() const override { return impl_.config().n_classes; }
  void predict_proba(const float* batch, int n, int rows, int cols,
                     float* probs) const override;

  SmallCnnT<float>& impl() { return impl_; }
  const SmallCnnT<float>& impl() const { return impl_; }
  Exec exec = Exec::kParallel;

  /// Checkpoint ("MDL1"): magic, u32 version, u64 architecture hash, u32
  /// config fields, u32 tensor count, then each tensor as u32 length +
  /// f32 data, trainables first then running stats. A JSON sidecar
  /// (path + ".json") describes names and shapes.
  void save(const std::filesystem::path& path) const;
  static SmallCnn load(const std::filesystem::path& path);

 private:
  SmallCnnT<float> impl_;
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
  uint64_t seed = 1;
  int train_set_size = 768;  // windows drawn per epoch
  int val_set_size = 256;    // windows evaluated per epoch

  void validate() const;
};

struct EvalReport {
  std::vector<double> train_accuracy;  // per epoch
  std::vector<double> val_accuracy;    // per epoch
  std::vector<std::vector<int64_t>> confusion;  // [truth][predicted]
  double final_val_accuracy = 0.0;
  bool degenerate = false;  // dataset exposed a single class

  double accuracy_from_confusion() const;
  std::string to_json() const;
  void save(const std::filesystem::path& path) const;
};

/// Pulls one labeled canvas: writes rows*cols floats and the class index.
using SampleFn = std::function<void(float* canvas, int* label)>;

/// SGD-with-momentum training loop. Fresh windows are drawn from
/// next_train every batch; next_val feeds the per-epoch evaluation.
/// Deterministic given the config seed and the streams' own seeds; throws
/// TrainingDiverged if the loss becomes non-finite.
SmallCnn train_classifier(const CnnConfig& cfg, const TrainConfig& tc,
                          const SampleFn& next_train, const SampleFn& next_val,
                          EvalReport* report, Exec exec = Exec::kParallel);

/// Confusion matrix and accuracy over n freshly drawn samples; n must be
/// at least the class count.
EvalReport evaluate(const Classifier& model, const SampleFn& next, int n);

}  // namespace spx
