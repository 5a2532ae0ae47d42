// SPDX-License-Identifier: Apache-2.0
#include "spx/cnn.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "spx/io.hpp"
#include "spx/nn_kernels.hpp"
#include "spx/rng.hpp"

using namespace spx;
namespace fs = std::filesystem;

namespace {

// Toy labeled-canvas stream: each class lights up its own band of rows on
// a noisy background. Linearly separable, converges in a couple of epochs.
SampleFn toy_stream(int rows, int cols, int n_classes, uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [=](float* canvas, int* label) {
    const int cls = static_cast<int>(rng->below(static_cast<uint64_t>(n_classes)));
    const int band0 = cls * rows / n_classes;
    const int band1 = (cls + 1) * rows / n_classes;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        canvas[r * cols + c] =
            (r >= band0 && r < band1 ? 0.9f : 0.1f) +
            0.05f * static_cast<float>(rng->normal());
    *label = cls;
  };
}

struct UniformishStub : Classifier {
  int n_classes() const override { return 9; }
  void predict_proba(const float* batch, int n, int rows, int cols,
                     float* probs) const override {
    // Near-uniform probabilities whose argmax is a hash of the input, so
    // predictions are label-independent.
    for (int i = 0; i < n; ++i) {
      uint64_t h = 1469598103934665603ull;
      const float* x = batch + static_cast<int64_t>(i) * rows * cols;
      for (int j = 0; j < rows * cols; j += 97) {
        uint32_t bits;
        std::memcpy(&bits, &x[j], 4);
        h = (h ^ bits) * 1099511628211ull;
      }
      const int pick = static_cast<int>(h % 9);
      for (int k = 0; k < 9; ++k)
        probs[i * 9 + k] = k == pick ? 0.2f : 0.1f;
    }
  }
};

}  // namespace

TEST_CASE("conv kernels match the textbook reference bit for bit") {
  const int N = 2, C = 3, OC = 4, H = 13, W = 17;
  const int HO = conv_out_dim(H), WO = conv_out_dim(W);
  Rng rng(77);
  std::vector<float> in(static_cast<size_t>(N) * C * H * W), w(static_cast<size_t>(OC) * C * 9),
      b(static_cast<size_t>(OC));
  for (auto& v : in) v = static_cast<float>(rng.normal());
  for (auto& v : w) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());

  std::vector<float> out_ref(static_cast<size_t>(N) * OC * HO * WO), out_fast(out_ref.size());
  ref::conv3x3s2_forward(in.data(), N, C, H, W, w.data(), b.data(), OC, out_ref.data());
  for (Exec exec : {Exec::kSerial, Exec::kParallel}) {
    omp_set_num_threads(exec == Exec::kParallel ? 3 : 1);
    conv3x3s2_forward(in.data(), N, C, H, W, w.data(), b.data(), OC, out_fast.data(), exec);
    CHECK(out_fast == out_ref);
  }

  std::vector<float> gin_ref(in.size()), gin_fast(in.size());
  ref::conv3x3s2_backward_data(out_ref.data(), N, OC, w.data(), C, H, W, gin_ref.data());
  for (Exec exec : {Exec::kSerial, Exec::kParallel}) {
    conv3x3s2_backward_data(out_ref.data(), N, OC, w.data(), C, H, W, gin_fast.data(), exec);
    CHECK(gin_fast == gin_ref);
  }

  std::vector<float> gw_ref(w.size()), gb_ref(b.size()), gw_fast(w.size()), gb_fast(b.size());
  ref::conv3x3s2_backward_weights(in.data(), N, C, H, W, out_ref.data(), OC,
                                  gw_ref.data(), gb_ref.data());
  for (Exec exec : {Exec::kSerial, Exec::kParallel}) {
    conv3x3s2_backward_weights(in.data(), N, C, H, W, out_ref.data(), OC, gw_fast.data(),
                               gb_fast.data(), exec);
    CHECK(gw_fast == gw_ref);
    CHECK(gb_fast == gb_ref);
  }
  omp_set_num_threads(1);
}

TEST_CASE("analytic gradients match central finite differences") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 224;
  cfg.n_classes = 5;
  SmallCnnT<double> net(cfg, 2024);
  const int N = 2;
  Rng rng(3);
  std::vector<double> batch(static_cast<size_t>(N) * cfg.rows * cfg.cols);
  for (auto& v : batch) v = rng.uniform();
  std::vector<int> labels{1, 3};
  std::vector<double> probs(static_cast<size_t>(N) * cfg.n_classes);
  auto grads = CnnParams<double>::zeros(cfg);
  net.loss_and_grad(batch.data(), labels.data(), N, grads, probs.data(), Exec::kSerial);

  auto tensors = net.params().trainable_list();
  auto gtensors = grads.trainable_list();
  Rng pick(17);
  int checked = 0;
  double worst = 0.0;
  while (checked < 10) {
    const size_t ti = pick.below(tensors.size());
    if (tensors[ti]->empty()) continue;
    const size_t wi = pick.below(tensors[ti]->size());
    const double g = (*gtensors[ti])[wi];
    // Small h keeps relu-kink crossings negligible; double precision
    // leaves ~1e-10 of roundoff headroom at this step size.
    const double h = 1e-6 * std::max(1.0, std::abs((*tensors[ti])[wi]));
    const double orig = (*tensors[ti])[wi];

    auto loss_at = [&](double v) {
      (*tensors[ti])[wi] = v;
      auto scratch = CnnParams<double>::zeros(cfg);
      SmallCnnT<double> probe(cfg, net.params());
      return probe.loss_and_grad(batch.data(), labels.data(), N, scratch, probs.data(),
                                 Exec::kSerial);
    };
    const double fd = (loss_at(orig + h) - loss_at(orig - h)) / (2.0 * h);
    (*tensors[ti])[wi] = orig;
    // Conv biases feed straight into batch norm, so their true gradient
    // is exactly zero; when both routes agree the gradient is below
    // noise, compare absolutely instead of amplifying one-ULP jitter.
    const double denom = std::max(std::abs(g), std::abs(fd));
    if (denom >= 1e-7) worst = std::max(worst, std::abs(g - fd) / denom);
    ++checked;
  }
  CHECK(worst <= 1e-3);
  MESSAGE("max relative gradient error: ", worst);
}

TEST_CASE("probabilities sum to one and batching is consistent") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 64;
  SmallCnn model(cfg, 5);
  const int hw = cfg.rows * cfg.cols;
  Rng rng(6);
  std::vector<float> two(static_cast<size_t>(2) * hw);
  for (auto& v : two) v = static_cast<float>(rng.uniform());
  std::vector<float> probs2(2 * 9), probs1(9);
  model.predict_proba(two.data(), 2, cfg.rows, cfg.cols, probs2.data());
  for (int i = 0; i < 2; ++i) {
    float sum = 0.0f;
    for (int k = 0; k < 9; ++k) sum += probs2[i * 9 + k];
    CHECK(std::abs(sum - 1.0f) < 1e-5f);
    model.predict_proba(two.data() + i * hw, 1, cfg.rows, cfg.cols, probs1.data());
    for (int k = 0; k < 9; ++k) CHECK(probs1[k] == probs2[i * 9 + k]);
  }
  CHECK_THROWS_AS(model.predict_proba(two.data(), 1, 32, 64, probs1.data()),
                  std::invalid_argument);
}

TEST_CASE("training converges on a separable toy stream and reports sanely") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 56;
  cfg.n_classes = 3;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.train_set_size = 160;
  tc.val_set_size = 48;
  tc.seed = 1;
  EvalReport rep;
  const auto model = train_classifier(cfg, tc, toy_stream(56, 56, 3, 10),
                                      toy_stream(56, 56, 3, 11), &rep, Exec::kSerial);
  CHECK(model.n_classes() == 3);
  REQUIRE(rep.val_accuracy.size() == 3);
  CHECK(rep.final_val_accuracy == rep.val_accuracy.back());
  CHECK(rep.final_val_accuracy >= 0.9);
  CHECK_FALSE(rep.degenerate);
  int64_t total = 0;
  for (const auto& row : rep.confusion)
    for (int64_t v : row) total += v;
  CHECK(total == tc.val_set_size);
  CHECK(rep.accuracy_from_confusion() == doctest::Approx(rep.final_val_accuracy));
  for (double a : rep.train_accuracy) {
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("single-class streams are flagged degenerate and score perfectly") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 56;
  cfg.n_classes = 3;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.train_set_size = 32;
  tc.val_set_size = 16;
  auto one_class = [](float* canvas, int* label) {
    for (int i = 0; i < 56 * 56; ++i) canvas[i] = 0.5f;
    *label = 2;
  };
  EvalReport rep;
  train_classifier(cfg, tc, one_class, one_class, &rep, Exec::kSerial);
  CHECK(rep.degenerate);
  CHECK(rep.final_val_accuracy == 1.0);
}

TEST_CASE("same seed reproduces checkpoint bytes, different seed does not") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 56;
  cfg.n_classes = 3;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.train_set_size = 64;
  tc.val_set_size = 16;

  const auto dir = fs::temp_directory_path() / "spx_cnn_tests";
  fs::create_directories(dir);
  auto train_to = [&](uint64_t seed, const fs::path& p) {
    TrainConfig t = tc;
    t.seed = seed;
    EvalReport rep;
    const auto m = train_classifier(cfg, t, toy_stream(56, 56, 3, 100),
                                    toy_stream(56, 56, 3, 101), &rep, Exec::kParallel);
    m.save(p);
  };
  omp_set_num_threads(3);
  train_to(1, dir / "a.mdl1");
  train_to(1, dir / "b.mdl1");
  train_to(2, dir / "c.mdl1");
  omp_set_num_threads(1);
  CHECK(read_text_file(dir / "a.mdl1") == read_text_file(dir / "b.mdl1"));
  CHECK(read_text_file(dir / "a.mdl1") != read_text_file(dir / "c.mdl1"));
}

TEST_CASE("checkpoints round trip and reject corruption") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 64;
  SmallCnn model(cfg, 9);
  const auto dir = fs::temp_directory_path() / "spx_cnn_tests";
  fs::create_directories(dir);
  const auto p = dir / "model.mdl1";
  model.save(p);
  const auto back = SmallCnn::load(p);

  Rng rng(12);
  std::vector<float> canvas(static_cast<size_t>(cfg.rows) * cfg.cols);
  for (auto& v : canvas) v = static_cast<float>(rng.uniform());
  std::vector<float> pa(9), pb(9);
  model.predict_proba(canvas.data(), 1, cfg.rows, cfg.cols, pa.data());
  back.predict_proba(canvas.data(), 1, cfg.rows, cfg.cols, pb.data());
  CHECK(pa == pb);

  auto bytes = read_text_file(p);
  bytes[17] ^= 0x01;  // flip a bit inside the architecture fields
  write_text_file(dir / "bad.mdl1", bytes);
  CHECK_THROWS_AS(SmallCnn::load(dir / "bad.mdl1"), std::runtime_error);
}

TEST_CASE("diverging training aborts with diagnostics") {
  CnnConfig cfg;
  cfg.rows = cfg.cols = 56;
  cfg.n_classes = 3;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.train_set_size = 64;
  tc.val_set_size = 8;
  tc.learning_rate = 1e18;
  CHECK_THROWS_AS(train_classifier(cfg, tc, toy_stream(56, 56, 3, 55),
                                   toy_stream(56, 56, 3, 56), nullptr, Exec::kSerial),
                  TrainingDiverged);
}

TEST_CASE("uniform-random predictions score near chance on 9 classes") {
  UniformishStub stub;
  Rng rng(31);
  auto stream = [&rng](float* canvas, int* label) {
    for (int i = 0; i < kGridSize * kGridSize; ++i)
      canvas[i] = static_cast<float>(rng.uniform());
    *label = static_cast<int>(rng.below(9));
  };
  const auto rep = evaluate(stub, stream, 9000);
  CHECK(rep.final_val_accuracy >= 0.09);
  CHECK(rep.final_val_accuracy <= 0.13);
  CHECK_THROWS_AS(evaluate(stub, stream, 5), std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.epochs = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.train_set_size = 4;
  tc.batch_size = 8;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}
