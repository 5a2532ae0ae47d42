// SPDX-License-Identifier: Apache-2.0
#include "spx/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "spx/io.hpp"
#include "spx/nn_kernels.hpp"

namespace spx {

using json = nlohmann::json;

static constexpr double kBnEps = 1e-5;
static constexpr double kBnMomentum = 0.1;

std::string CnnConfig::arch_string() const {
  return "smallcnn-coord2/" + std::to_string(c1) + "-" + std::to_string(c2) + "-" +
         std::to_string(c3) + "/classes" + std::to_string(n_classes) + "/" +
         std::to_string(rows) + "x" + std::to_string(cols);
}

uint64_t CnnConfig::arch_hash() const {
  uint64_t h = 14695981039346656037ull;
  for (char c : arch_string()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

TrainingDiverged::TrainingDiverged(int epoch_, int step_, double loss_)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch_) +
                         " step " + std::to_string(step_) + " (loss " +
                         std::to_string(loss_) + ")"),
      epoch(epoch_), step(step_), loss(loss_) {}

template <typename T>
CnnParams<T> CnnParams<T>::zeros(const CnnConfig& cfg) {
  CnnParams<T> p;
  p.w1.assign(static_cast<size_t>(cfg.c1) * 2 * 9, T(0));
  p.b1.assign(static_cast<size_t>(cfg.c1), T(0));
  p.g1.assign(static_cast<size_t>(cfg.c1), T(0));
  p.be1.assign(static_cast<size_t>(cfg.c1), T(0));
  p.w2.assign(static_cast<size_t>(cfg.c2) * cfg.c1 * 9, T(0));
  p.b2.assign(static_cast<size_t>(cfg.c2), T(0));
  p.g2.assign(static_cast<size_t>(cfg.c2), T(0));
  p.be2.assign(static_cast<size_t>(cfg.c2), T(0));
  p.w3.assign(static_cast<size_t>(cfg.c3) * cfg.c2 * 9, T(0));
  p.b3.assign(static_cast<size_t>(cfg.c3), T(0));
  p.g3.assign(static_cast<size_t>(cfg.c3), T(0));
  p.be3.assign(static_cast<size_t>(cfg.c3), T(0));
  p.wf.assign(static_cast<size_t>(cfg.n_classes) * cfg.c3, T(0));
  p.bf.assign(static_cast<size_t>(cfg.n_classes), T(0));
  p.rm1.assign(static_cast<size_t>(cfg.c1), T(0));
  p.rv1.assign(static_cast<size_t>(cfg.c1), T(1));
  p.rm2.assign(static_cast<size_t>(cfg.c2), T(0));
  p.rv2.assign(static_cast<size_t>(cfg.c2), T(1));
  p.rm3.assign(static_cast<size_t>(cfg.c3), T(0));
  p.rv3.assign(static_cast<size_t>(cfg.c3), T(1));
  return p;
}

template <typename T>
CnnParams<T> CnnParams<T>::init(const CnnConfig& cfg, Rng& rng) {
  CnnParams<T> p = zeros(cfg);
  // He-normal conv weights drawn in a fixed order; biases stay zero and
  // batch-norm affine starts at identity (gamma 1, beta 0).
  auto fill_normal = [&rng](std::vector<T>& v, double std) {
    for (auto& x : v) x = static_cast<T>(std * rng.normal());
  };
  fill_normal(p.w1, std::sqrt(2.0 / (2 * 9)));
  fill_normal(p.w2, std::sqrt(2.0 / (cfg.c1 * 9)));
  fill_normal(p.w3, std::sqrt(2.0 / (cfg.c2 * 9)));
  fill_normal(p.wf, std::sqrt(2.0 / cfg.c3));
  std::fill(p.g1.begin(), p.g1.end(), T(1));
  std::fill(p.g2.begin(), p.g2.end(), T(1));
  std::fill(p.g3.begin(), p.g3.end(), T(1));
  return p;
}

template <typename T>
std::vector<std::vector<T>*> CnnParams<T>::trainable_list() {
  return {&w1, &b1, &g1, &be1, &w2, &b2, &g2, &be2, &w3, &b3, &g3, &be3, &wf, &bf};
}

template <typename T>
std::vector<std::vector<T>*> CnnParams<T>::buffer_list() {
  return {&rm1, &rv1, &rm2, &rv2, &rm3, &rv3};
}

template <typename T>
size_t CnnParams<T>::n_trainable() const {
  size_t n = 0;
  for (auto* v : const_cast<CnnParams<T>*>(this)->trainable_list()) n += v->size();
  return n;
}

template <typename T>
SmallCnnT<T>::SmallCnnT(const CnnConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  Rng rng(init_seed);
  p_ = CnnParams<T>::init(cfg, rng);
}

template <typename T>
SmallCnnT<T>::SmallCnnT(const CnnConfig& cfg, CnnParams<T> params)
    : cfg_(cfg), p_(std::move(params)) {}

template <typename T>
void SmallCnnT<T>::expand_input(const T* batch, int n, std::vector<T>& planes) const {
  const int H = cfg_.rows, W = cfg_.cols;
  const int64_t hw = static_cast<int64_t>(H) * W;
  planes.resize(static_cast<size_t>(n) * 2 * hw);
  for (int i = 0; i < n; ++i) {
    const T* src = batch + i * hw;
    T* val = planes.data() + static_cast<int64_t>(i) * 2 * hw;
    T* coord = val + hw;
    for (int64_t j = 0; j < hw; ++j) val[j] = T(2) * src[j] - T(1);
    for (int r = 0; r < H; ++r) {
      const T c = T(2) * static_cast<T>(r) / static_cast<T>(H - 1) - T(1);
      for (int x = 0; x < W; ++x) coord[static_cast<int64_t>(r) * W + x] = c;
    }
  }
}

namespace {

template <typename T>
void update_running(std::vector<T>& rmean, std::vector<T>& rvar,
                    const std::vector<T>& mean, const std::vector<T>& var,
                    int64_t m) {
  const T mom = static_cast<T>(kBnMomentum);
  const T unbias = static_cast<T>(m) / static_cast<T>(m - 1);
  for (size_t c = 0; c < rmean.size(); ++c) {
    rmean[c] = (T(1) - mom) * rmean[c] + mom * mean[c];
    rvar[c] = (T(1) - mom) * rvar[c] + mom * var[c] * unbias;
  }
}

}  // namespace

template <typename T>
T SmallCnnT<T>::loss_and_grad(const T* batch, const int* labels, int n,
                              CnnParams<T>& grads, T* probs, Exec exec) {
  const int H = cfg_.rows, W = cfg_.cols;
  const int H1 = conv_out_dim(H), W1 = conv_out_dim(W);
  const int H2 = conv_out_dim(H1), W2 = conv_out_dim(W1);
  const int H3 = conv_out_dim(H2), W3 = conv_out_dim(W2);
  const int c1 = cfg_.c1, c2 = cfg_.c2, c3 = cfg_.c3, K = cfg_.n_classes;
  const T eps = static_cast<T>(kBnEps);

  std::vector<T> x;
  expand_input(batch, n, x);

  std::vector<T> a1(static_cast<size_t>(n) * c1 * H1 * W1);
  std::vector<T> h1(a1.size());
  std::vector<T> a2(static_cast<size_t>(n) * c2 * H2 * W2);
  std::vector<T> h2(a2.size());
  std::vector<T> a3(static_cast<size_t>(n) * c3 * H3 * W3);
  std::vector<T> h3(a3.size());
  std::vector<T> feat(static_cast<size_t>(n) * c3);
  std::vector<T> logits(static_cast<size_t>(n) * K);
  std::vector<T> mu1(c1), var1(c1), mu2(c2), var2(c2), mu3(c3), var3(c3);

  conv3x3s2_forward(x.data(), n, 2, H, W, p_.w1.data(), p_.b1.data(), c1, a1.data(), exec);
  bn_stats(a1.data(), n, c1, H1 * W1, mu1.data(), var1.data(), exec);
  bn_forward(a1.data(), n, c1, H1 * W1, mu1.data(), var1.data(), p_.g1.data(),
             p_.be1.data(), eps, true, h1.data(), exec);

  conv3x3s2_forward(h1.data(), n, c1, H1, W1, p_.w2.data(), p_.b2.data(), c2, a2.data(), exec);
  bn_stats(a2.data(), n, c2, H2 * W2, mu2.data(), var2.data(), exec);
  bn_forward(a2.data(), n, c2, H2 * W2, mu2.data(), var2.data(), p_.g2.data(),
             p_.be2.data(), eps, true, h2.data(), exec);

  conv3x3s2_forward(h2.data(), n, c2, H2, W2, p_.w3.data(), p_.b3.data(), c3, a3.data(), exec);
  bn_stats(a3.data(), n, c3, H3 * W3, mu3.data(), var3.data(), exec);
  bn_forward(a3.data(), n, c3, H3 * W3, mu3.data(), var3.data(), p_.g3.data(),
             p_.be3.data(), eps, true, h3.data(), exec);

  gap_forward(h3.data(), n, c3, H3 * W3, feat.data(), exec);
  fc_forward(feat.data(), n, c3, p_.wf.data(), p_.bf.data(), K, logits.data(), exec);

  std::vector<T> glogits(static_cast<size_t>(n) * K);
  const T loss = softmax_ce(logits.data(), n, K, labels, probs, glogits.data());

  update_running(p_.rm1, p_.rv1, mu1, var1, static_cast<int64_t>(n) * H1 * W1);
  update_running(p_.rm2, p_.rv2, mu2, var2, static_cast<int64_t>(n) * H2 * W2);
  update_running(p_.rm3, p_.rv3, mu3, var3, static_cast<int64_t>(n) * H3 * W3);

  // Backward pass.
  std::vector<T> gfeat(feat.size());
  fc_backward(feat.data(), n, c3, p_.wf.data(), K, glogits.data(), grads.wf.data(),
              grads.bf.data(), gfeat.data(), exec);

  std::vector<T> gh3(h3.size());
  gap_backward(gfeat.data(), n, c3, H3 * W3, gh3.data(), exec);
  std::vector<T> ga3(a3.size());
  bn_relu_backward(a3.data(), h3.data(), gh3.data(), n, c3, H3 * W3, mu3.data(),
                   var3.data(), p_.g3.data(), eps, ga3.data(), grads.g3.data(),
                   grads.be3.data(), exec);
  conv3x3s2_backward_weights(h2.data(), n, c2, H2, W2, ga3.data(), c3,
                             grads.w3.data(), grads.b3.data(), exec);

  std::vector<T> gh2(h2.size());
  conv3x3s2_backward_data(ga3.data(), n, c3, p_.w3.data(), c2, H2, W2, gh2.data(), exec);
  std::vector<T> ga2(a2.size());
  bn_relu_backward(a2.data(), h2.data(), gh2.data(), n, c2, H2 * W2, mu2.data(),
                   var2.data(), p_.g2.data(), eps, ga2.data(), grads.g2.data(),
                   grads.be2.data(), exec);
  conv3x3s2_backward_weights(h1.data(), n, c1, H1, W1, ga2.data(), c2,
                             grads.w2.data(), grads.b2.data(), exec);

  std::vector<T> gh1(h1.size());
  conv3x3s2_backward_data(ga2.data(), n, c2, p_.w2.data(), c1, H1, W1, gh1.data(), exec);
  std::vector<T> ga1(a1.size());
  bn_relu_backward(a1.data(), h1.data(), gh1.data(), n, c1, H1 * W1, mu1.data(),
                   var1.data(), p_.g1.data(), eps, ga1.data(), grads.g1.data(),
                   grads.be1.data(), exec);
  conv3x3s2_backward_weights(x.data(), n, 2, H, W, ga1.data(), c1, grads.w1.data(),
                             grads.b1.data(), exec);

  return loss;
}

template <typename T>
void SmallCnnT<T>::predict(const T* batch, int n, T* probs, Exec exec) const {
  const int H = cfg_.rows, W = cfg_.cols;
  const int H1 = conv_out_dim(H), W1 = conv_out_dim(W);
  const int H2 = conv_out_dim(H1), W2 = conv_out_dim(W1);
  const int H3 = conv_out_dim(H2), W3 = conv_out_dim(W2);
  const int c1 = cfg_.c1, c2 = cfg_.c2, c3 = cfg_.c3, K = cfg_.n_classes;
  const T eps = static_cast<T>(kBnEps);

  std::vector<T> x;
  expand_input(batch, n, x);
  std::vector<T> a(static_cast<size_t>(n) * c1 * H1 * W1);
  std::vector<T> h(a.size());
  conv3x3s2_forward(x.data(), n, 2, H, W, p_.w1.data(), p_.b1.data(), c1, a.data(), exec);
  bn_eval_forward(a.data(), n, c1, H1 * W1, p_.rm1.data(), p_.rv1.data(), p_.g1.data(),
                  p_.be1.data(), eps, true, h.data(), exec);

  std::vector<T> a2(static_cast<size_t>(n) * c2 * H2 * W2);
  std::vector<T> h2(a2.size());
  conv3x3s2_forward(h.data(), n, c1, H1, W1, p_.w2.data(), p_.b2.data(), c2, a2.data(), exec);
  bn_eval_forward(a2.data(), n, c2, H2 * W2, p_.rm2.data(), p_.rv2.data(), p_.g2.data(),
                  p_.be2.data(), eps, true, h2.data(), exec);

  std::vector<T> a3(static_cast<size_t>(n) * c3 * H3 * W3);
  std::vector<T> h3(a3.size());
  conv3x3s2_forward(h2.data(), n, c2, H2, W2, p_.w3.data(), p_.b3.data(), c3, a3.data(), exec);
  bn_eval_forward(a3.data(), n, c3, H3 * W3, p_.rm3.data(), p_.rv3.data(), p_.g3.data(),
                  p_.be3.data(), eps, true, h3.data(), exec);

  std::vector<T> feat(static_cast<size_t>(n) * c3);
  std::vector<T> logits(static_cast<size_t>(n) * K);
  gap_forward(h3.data(), n, c3, H3 * W3, feat.data(), exec);
  fc_forward(feat.data(), n, c3, p_.wf.data(), p_.bf.data(), K, logits.data(), exec);
  softmax_ce<T>(logits.data(), n, K, nullptr, probs, nullptr);
}

template class SmallCnnT<float>;
template class SmallCnnT<double>;
template struct CnnParams<float>;
template struct CnnParams<double>;

SmallCnn::SmallCnn(const CnnConfig& cfg, uint64_t init_seed) : impl_(cfg, init_seed) {}
SmallCnn::SmallCnn(const CnnConfig& cfg, CnnParams<float> params)
    : impl_(cfg, std::move(params)) {}

void SmallCnn::predict_proba(const float* batch, int n, int rows, int cols,
                             float* probs) const {
  const auto& cfg = impl_.config();
  if (rows != cfg.rows || cols != cfg.cols)
    throw std::invalid_argument("predict_proba: expected " + std::to_string(cfg.rows) +
                                "x" + std::to_string(cfg.cols) + " input, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  if (n <= 0) throw std::invalid_argument("predict_proba: empty batch");
  // Chunked to bound activation memory; per-sample results are unchanged.
  const int chunk = 32;
  const int64_t hw = static_cast<int64_t>(rows) * cols;
  for (int at = 0; at < n; at += chunk) {
    const int m = std::min(chunk, n - at);
    impl_.predict(batch + at * hw, m, probs + static_cast<int64_t>(at) * cfg.n_classes,
                  exec);
  }
}

// ---- checkpoint ----

void SmallCnn::save(const std::filesystem::path& path) const {
  const auto& cfg = impl_.config();
  auto& p = const_cast<SmallCnnT<float>&>(impl_).params();
  BinaryWriter w(path);
  w.magic("MDL1");
  w.u32(1);
  w.u64(cfg.arch_hash());
  w.u32(static_cast<uint32_t>(cfg.rows));
  w.u32(static_cast<uint32_t>(cfg.cols));
  w.u32(static_cast<uint32_t>(cfg.c1));
  w.u32(static_cast<uint32_t>(cfg.c2));
  w.u32(static_cast<uint32_t>(cfg.c3));
  w.u32(static_cast<uint32_t>(cfg.n_classes));
  auto tensors = p.trainable_list();
  auto buffers = p.buffer_list();
  w.u32(static_cast<uint32_t>(tensors.size() + buffers.size()));
  for (auto* t : tensors) {
    w.u32(static_cast<uint32_t>(t->size()));
    w.f32_array(*t);
  }
  for (auto* t : buffers) {
    w.u32(static_cast<uint32_t>(t->size()));
    w.f32_array(*t);
  }
  w.close();

  static const char* kNames[] = {"conv1.w", "conv1.b", "bn1.gamma", "bn1.beta",
                                 "conv2.w", "conv2.b", "bn2.gamma", "bn2.beta",
                                 "conv3.w", "conv3.b", "bn3.gamma", "bn3.beta",
                                 "fc.w",    "fc.b",    "bn1.rmean", "bn1.rvar",
                                 "bn2.rmean", "bn2.rvar", "bn3.rmean", "bn3.rvar"};
  json side;
  side["arch"] = cfg.arch_string();
  side["arch_hash"] = cfg.arch_hash();
  side["tensors"] = json::array();
  size_t idx = 0;
  for (auto* t : tensors)
    side["tensors"].push_back({{"name", kNames[idx++]}, {"size", t->size()}});
  for (auto* t : buffers)
    side["tensors"].push_back({{"name", kNames[idx++]}, {"size", t->size()}});
  write_text_file(path.string() + ".json", side.dump(2) + "\n");
}

SmallCnn SmallCnn::load(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic("MDL1");
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported MDL1 version " + std::to_string(version));
  const uint64_t hash = r.u64();
  CnnConfig cfg;
  cfg.rows = static_cast<int>(r.u32());
  cfg.cols = static_cast<int>(r.u32());
  cfg.c1 = static_cast<int>(r.u32());
  cfg.c2 = static_cast<int>(r.u32());
  cfg.c3 = static_cast<int>(r.u32());
  cfg.n_classes = static_cast<int>(r.u32());
  if (hash != cfg.arch_hash())
    throw std::runtime_error("checkpoint architecture hash mismatch");
  auto p = CnnParams<float>::zeros(cfg);
  auto tensors = p.trainable_list();
  auto buffers = p.buffer_list();
  const uint32_t count = r.u32();
  if (count != tensors.size() + buffers.size())
    throw std::runtime_error("checkpoint tensor count mismatch");
  for (auto* t : tensors) {
    const uint32_t len = r.u32();
    if (len != t->size()) throw std::runtime_error("checkpoint tensor size mismatch");
    r.f32_array(*t);
  }
  for (auto* t : buffers) {
    const uint32_t len = r.u32();
    if (len != t->size()) throw std::runtime_error("checkpoint tensor size mismatch");
    r.f32_array(*t);
  }
  return SmallCnn(cfg, std::move(p));
}

// ---- training loop ----

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (train_set_size < batch_size)
    throw std::invalid_argument("train: train_set_size must be >= batch_size");
  if (val_set_size < 1) throw std::invalid_argument("train: val_set_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("train: momentum must lie in [0, 1)");
}

double EvalReport::accuracy_from_confusion() const {
  int64_t total = 0, diag = 0;
  for (size_t i = 0; i < confusion.size(); ++i)
    for (size_t j = 0; j < confusion[i].size(); ++j) {
      total += confusion[i][j];
      if (i == j) diag += confusion[i][j];
    }
  return total ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
}

std::string EvalReport::to_json() const {
  json j;
  j["train_accuracy"] = train_accuracy;
  j["val_accuracy"] = val_accuracy;
  j["confusion"] = confusion;
  j["final_val_accuracy"] = final_val_accuracy;
  j["degenerate"] = degenerate;
  return j.dump(2) + "\n";
}

void EvalReport::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json());
}

SmallCnn train_classifier(const CnnConfig& cfg, const TrainConfig& tc,
                          const SampleFn& next_train, const SampleFn& next_val,
                          EvalReport* report, Exec exec) {
  tc.validate();
  SmallCnn model(cfg, derive_seed(tc.seed, {kStreamTrainInit}));
  model.exec = exec;
  auto& net = model.impl();
  auto grads = CnnParams<float>::zeros(cfg);
  auto velocity = CnnParams<float>::zeros(cfg);

  const int64_t hw = static_cast<int64_t>(cfg.rows) * cfg.cols;
  const int bs = tc.batch_size;
  std::vector<float> batch(static_cast<size_t>(bs) * hw);
  std::vector<int> labels(static_cast<size_t>(bs));
  std::vector<float> probs(static_cast<size_t>(bs) * cfg.n_classes);

  EvalReport rep;
  rep.confusion.assign(static_cast<size_t>(cfg.n_classes),
                       std::vector<int64_t>(static_cast<size_t>(cfg.n_classes), 0));
  std::set<int> seen;

  const float lr = static_cast<float>(tc.learning_rate);
  const float mu = static_cast<float>(tc.momentum);
  const int steps = tc.train_set_size / bs;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    int64_t correct = 0, count = 0;
    for (int step = 0; step < steps; ++step) {
      for (int i = 0; i < bs; ++i) {
        next_train(batch.data() + i * hw, &labels[static_cast<size_t>(i)]);
        seen.insert(labels[static_cast<size_t>(i)]);
      }
      const float loss =
          net.loss_and_grad(batch.data(), labels.data(), bs, grads, probs.data(), exec);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch, step, loss);

      auto ps = net.params().trainable_list();
      auto gs = grads.trainable_list();
      auto vs = velocity.trainable_list();
      for (size_t t = 0; t < ps.size(); ++t) {
        float* w = ps[t]->data();
        const float* g = gs[t]->data();
        float* v = vs[t]->data();
        const size_t len = ps[t]->size();
        for (size_t k = 0; k < len; ++k) {
          v[k] = mu * v[k] - lr * g[k];
          w[k] += v[k];
        }
      }

      for (int i = 0; i < bs; ++i) {
        const float* p = probs.data() + static_cast<int64_t>(i) * cfg.n_classes;
        const int pred = static_cast<int>(std::max_element(p, p + cfg.n_classes) - p);
        if (pred == labels[static_cast<size_t>(i)]) ++correct;
        ++count;
      }
    }
    rep.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(count));

    // Per-epoch validation; the last epoch also fills the confusion matrix.
    int64_t vcorrect = 0;
    const bool final_epoch = epoch == tc.epochs - 1;
    int done = 0;
    while (done < tc.val_set_size) {
      const int m = std::min(bs, tc.val_set_size - done);
      for (int i = 0; i < m; ++i) {
        next_val(batch.data() + i * hw, &labels[static_cast<size_t>(i)]);
        seen.insert(labels[static_cast<size_t>(i)]);
      }
      model.predict_proba(batch.data(), m, cfg.rows, cfg.cols, probs.data());
      for (int i = 0; i < m; ++i) {
        const float* p = probs.data() + static_cast<int64_t>(i) * cfg.n_classes;
        const int pred = static_cast<int>(std::max_element(p, p + cfg.n_classes) - p);
        if (pred == labels[static_cast<size_t>(i)]) ++vcorrect;
        if (final_epoch)
          ++rep.confusion[static_cast<size_t>(labels[static_cast<size_t>(i)])]
                         [static_cast<size_t>(pred)];
      }
      done += m;
    }
    rep.val_accuracy.push_back(static_cast<double>(vcorrect) / tc.val_set_size);
  }

  rep.final_val_accuracy = rep.val_accuracy.back();
  rep.degenerate = seen.size() <= 1 || cfg.n_classes == 1;
  if (report) *report = std::move(rep);
  return model;
}

EvalReport evaluate(const Classifier& model, const SampleFn& next, int n) {
  const int K = model.n_classes();
  if (n < K)
    throw std::invalid_argument("evaluate: n must be at least the class count");
  EvalReport rep;
  rep.confusion.assign(static_cast<size_t>(K), std::vector<int64_t>(static_cast<size_t>(K), 0));
  const int rows = kGridSize, cols = kGridSize;
  const int64_t hw = static_cast<int64_t>(rows) * cols;
  const int bs = 16;
  std::vector<float> batch(static_cast<size_t>(bs) * hw);
  std::vector<int> labels(static_cast<size_t>(bs));
  std::vector<float> probs(static_cast<size_t>(bs) * K);
  int done = 0;
  while (done < n) {
    const int m = std::min(bs, n - done);
    for (int i = 0; i < m; ++i) next(batch.data() + i * hw, &labels[static_cast<size_t>(i)]);
    model.predict_proba(batch.data(), m, rows, cols, probs.data());
    for (int i = 0; i < m; ++i) {
      const float* p = probs.data() + static_cast<int64_t>(i) * K;
      const int pred = static_cast<int>(std::max_element(p, p + K) - p);
      ++rep.confusion[static_cast<size_t>(labels[static_cast<size_t>(i)])]
                     [static_cast<size_t>(pred)];
    }
    done += m;
  }
  rep.final_val_accuracy = rep.accuracy_from_confusion();
  return rep;
}

}  // namespace spx
