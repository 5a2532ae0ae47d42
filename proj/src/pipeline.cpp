// SPDX-License-Identifier: Apache-2.0
#include "spx/pipeline.hpp"

#include <omp.h>

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "spx/io.hpp"

namespace spx {

using json = nlohmann::json;

void PipelineConfig::validate() const {
  stft.validate();
  quickshift.validate();
  lime.validate();
  train.validate();
  if (window_samples < stft.n_fft)
    throw std::invalid_argument("config: window_samples shorter than n_fft");
  if (n_explanations < 1) throw std::invalid_argument("config: n_explanations must be >= 1");
  if (n_retrainings < 1) throw std::invalid_argument("config: n_retrainings must be >= 1");
  if (c1 < 1 || c2 < 1 || c3 < 1) throw std::invalid_argument("config: channel counts must be >= 1");
  if (jobs < 0) throw std::invalid_argument("config: jobs must be >= 0");
}

std::string PipelineConfig::to_json() const {
  json j;
  j["manifest_path"] = manifest_path;
  j["out_dir"] = out_dir;
  j["window_samples"] = window_samples;
  j["stft"] = {{"n_fft", stft.n_fft}, {"hop", stft.hop}, {"log_scale", stft.log_scale}};
  j["quickshift"] = {{"kernel_size", quickshift.kernel_size},
                     {"max_dist", quickshift.max_dist},
                     {"color_multiplier", quickshift.color_multiplier}};
  j["lime"] = {{"n_samples", lime.n_samples},
               {"kernel_width", lime.kernel_width},
               {"ridge_lambda", lime.ridge_lambda},
               {"top_n", lime.top_n}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"momentum", train.momentum},
                {"seed", train.seed},
                {"train_set_size", train.train_set_size},
                {"val_set_size", train.val_set_size}};
  j["cnn_channels"] = {c1, c2, c3};
  j["n_explanations"] = n_explanations;
  j["n_retrainings"] = n_retrainings;
  j["ensemble_class"] = ensemble_class;
  j["seed"] = seed;
  j["jobs"] = jobs;
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config JSON parse error: ") + e.what());
  }
  try {
    PipelineConfig c;
    c.manifest_path = j.value("manifest_path", c.manifest_path);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.window_samples = j.value("window_samples", c.window_samples);
    if (j.contains("stft")) {
      const auto& s = j["stft"];
      c.stft.n_fft = s.value("n_fft", c.stft.n_fft);
      c.stft.hop = s.value("hop", c.stft.hop);
      c.stft.log_scale = s.value("log_scale", c.stft.log_scale);
    }
    if (j.contains("quickshift")) {
      const auto& q = j["quickshift"];
      c.quickshift.kernel_size = q.value("kernel_size", c.quickshift.kernel_size);
      c.quickshift.max_dist = q.value("max_dist", c.quickshift.max_dist);
      c.quickshift.color_multiplier = q.value("color_multiplier", c.quickshift.color_multiplier);
    }
    if (j.contains("lime")) {
      const auto& l = j["lime"];
      c.lime.n_samples = l.value("n_samples", c.lime.n_samples);
      c.lime.kernel_width = l.value("kernel_width", c.lime.kernel_width);
      c.lime.ridge_lambda = l.value("ridge_lambda", c.lime.ridge_lambda);
      c.lime.top_n = l.value("top_n", c.lime.top_n);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.momentum = t.value("momentum", c.train.momentum);
      c.train.seed = t.value("seed", c.train.seed);
      c.train.train_set_size = t.value("train_set_size", c.train.train_set_size);
      c.train.val_set_size = t.value("val_set_size", c.train.val_set_size);
    }
    if (j.contains("cnn_channels")) {
      const auto& ch = j["cnn_channels"];
      c.c1 = ch.at(0).get<int>();
      c.c2 = ch.at(1).get<int>();
      c.c3 = ch.at(2).get<int>();
    }
    c.n_explanations = j.value("n_explanations", c.n_explanations);
    c.n_retrainings = j.value("n_retrainings", c.n_retrainings);
    c.ensemble_class = j.value("ensemble_class", c.ensemble_class);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config schema error: ") + e.what());
  }
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

int Dataset::index_of(int class_id) const {
  for (size_t i = 0; i < manifest.classes.size(); ++i)
    if (manifest.classes[i].class_id == class_id) return static_cast<int>(i);
  throw std::invalid_argument("unknown class_id " + std::to_string(class_id));
}

const std::vector<float>& Dataset::signal_for(int class_id) const {
  return signals[static_cast<size_t>(index_of(class_id))];
}

DatasetManifest default_manifest() {
  // Spectral-line placement per class, as STFT bin indices of the
  // reference parameterization. Every band is shared by at least two
  // classes, so no single line identifies a device.
  static const std::vector<std::vector<int>> kClassBins = {
      {15, 50, 95, 148},  {15, 50, 112, 166}, {25, 50, 95, 166}, {25, 64, 112, 148},
      {37, 64, 95, 184},  {37, 79, 130, 148}, {15, 79, 112, 184}, {25, 37, 130, 166},
  };
  DatasetManifest m;
  m.sample_rate = 2'000'000.0;
  m.train_fraction = 0.8;
  m.seed = 42;
  const double bin_hz = m.sample_rate / 446.0;
  const double amp = 0.5;
  for (int c = 0; c < static_cast<int>(kClassBins.size()); ++c) {
    DeviceSpec d;
    d.class_id = c;
    d.name = std::string("synth-") + static_cast<char>('a' + c);
    d.n_samples = 2'000'000;
    d.noise_floor_sigma = 0.1;
    d.mains_residue_amp = 0.02;
    for (int b : kClassBins[static_cast<size_t>(c)]) {
      if (c == 2 && (b == 25 || b == 50)) continue;  // provided by the harmonic stack
      Tone t{b * bin_hz, amp, 0.0};
      if (c == 4 && b == 184) t.drift_hz_per_s = 1500.0;  // slow wander exerciser
      d.tones.push_back(t);
    }
    if (c == 2) d.harmonics.push_back(HarmonicStack{25 * bin_hz, 2, 0.7});
    m.classes.push_back(std::move(d));
  }
  DeviceSpec bg;
  bg.class_id = 8;
  bg.name = "background";
  bg.n_samples = 2'000'000;
  bg.noise_floor_sigma = 0.1;
  bg.mains_residue_amp = 0.02;
  m.classes.push_back(std::move(bg));
  return m;
}

Dataset build_dataset(const DatasetManifest& manifest) {
  Dataset d;
  d.manifest = manifest;
  d.signals.reserve(manifest.classes.size());
  for (const auto& spec : manifest.classes)
    d.signals.push_back(
        synthesize_signal(spec, spec.n_samples, manifest.sample_rate, manifest.seed));
  return d;
}

std::vector<int> truth_bins(const DeviceSpec& spec, const StftParams& params,
                            double sample_rate) {
  std::vector<int> bins;
  for (double f : spec.line_frequencies()) bins.push_back(params.bin_of(f, sample_rate));
  return bins;
}

Spectrogram make_canvas(std::span<const float> window, const StftParams& params,
                        double sample_rate, uint32_t class_id, Exec exec) {
  Spectrogram s = stft(window, params, sample_rate, exec);
  if (!params.log_scale) log_scale_inplace(s);
  normalize_unit_inplace(s);
  s.class_id = class_id;
  return s;
}

SampleFn make_stream(const Dataset& data, const StftParams& params,
                     int64_t window_samples, Split split, uint64_t seed, Exec exec) {
  auto rng = std::make_shared<Rng>(seed);
  // Capture the dataset by reference: streams are only used while the
  // dataset outlives the training/evaluation call.
  return [&data, params, window_samples, split, rng, exec](float* out, int* label) {
    Rng& r = *rng;
    const WindowSample ws = sample_window(data.manifest, window_samples, split, r);
    const auto& signal = data.signal_for(ws.class_id);
    const auto window = extract_window(signal, ws);
    const Spectrogram canvas = make_canvas(window, params, data.manifest.sample_rate,
                                           static_cast<uint32_t>(ws.class_id), exec);
    std::copy(canvas.values.begin(), canvas.values.end(), out);
    *label = data.index_of(ws.class_id);
  };
}

Spectrogram golden_canvas(const Dataset& data, int class_id, const StftParams& params,
                          Exec exec) {
  const auto& spec = data.manifest.spec_for(class_id);
  const int64_t start = validation_start_min(spec.n_samples, kDefaultWindowSamples,
                                             data.manifest.train_fraction);
  WindowSample ws{class_id, start, kDefaultWindowSamples, Split::kValidation};
  const auto window = extract_window(data.signal_for(class_id), ws);
  return make_canvas(window, params, data.manifest.sample_rate,
                     static_cast<uint32_t>(class_id), exec);
}

TrainedModel train_on(const Dataset& data, const PipelineConfig& config,
                      uint64_t train_seed, Exec exec) {
  data.manifest.validate(config.window_samples);
  CnnConfig cnn;
  cnn.rows = config.stft.n_bins();
  cnn.cols = config.stft.n_frames(config.window_samples);
  cnn.c1 = config.c1;
  cnn.c2 = config.c2;
  cnn.c3 = config.c3;
  cnn.n_classes = data.n_classes();

  TrainConfig tc = config.train;
  tc.seed = train_seed;
  const auto train_stream = make_stream(data, config.stft, config.window_samples,
                                        Split::kTrain,
                                        derive_seed(train_seed, {kStreamTrainData}), exec);
  const auto val_stream = make_stream(data, config.stft, config.window_samples,
                                      Split::kValidation,
                                      derive_seed(train_seed, {kStreamValData}), exec);
  TrainedModel out{SmallCnn(cnn, 0), {}};
  out.model = train_classifier(cnn, tc, train_stream, val_stream, &out.report, exec);
  return out;
}

uint64_t retrain_seed(uint64_t base_seed, int run) {
  return derive_seed(base_seed, {kStreamRetrain, static_cast<uint64_t>(run)});
}

ClassExplainOutput explain_class(
    const Dataset& data, const Classifier& model, int class_id,
    const PipelineConfig& config, uint64_t seed,
    const std::function<void(int, const Explanation&)>& on_explanation) {
  const auto& spec = data.manifest.spec_for(class_id);
  const auto& signal = data.signal_for(class_id);
  const int rows = config.stft.n_bins();
  const int cols = config.stft.n_frames(config.window_samples);
  const int n = config.n_explanations;
  const int64_t lo = validation_start_min(spec.n_samples, config.window_samples,
                                          data.manifest.train_fraction);
  const int64_t hi = validation_start_max(spec.n_samples, config.window_samples);
  if (hi < lo) throw std::invalid_argument("explain: empty validation interval");
  const int target = data.index_of(class_id);

  // Per-explanation Welch spectra land in fixed slots so the final mean
  // is summed in index order, independent of scheduling.
  std::vector<std::vector<double>> welch_rows(static_cast<size_t>(n));
  ExplanationAccumulator acc(rows, cols, target);
  int n_truncated = 0;

#pragma omp parallel
  {
    ExplanationAccumulator local(rows, cols, target);
    int local_truncated = 0;
#pragma omp for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      Rng rng(derive_seed(seed, {kStreamExplain, static_cast<uint64_t>(class_id),
                                 static_cast<uint64_t>(i)}));
      const int64_t start = lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
      WindowSample ws{class_id, start, config.window_samples, Split::kValidation};
      const auto window = extract_window(signal, ws);

      welch_rows[static_cast<size_t>(i)] = welch(window, config.stft, Exec::kSerial).values;
      const Spectrogram canvas = make_canvas(window, config.stft, data.manifest.sample_rate,
                                             static_cast<uint32_t>(class_id), Exec::kSerial);
      const SuperpixelMap segmap = quickshift(canvas, config.quickshift, Exec::kSerial);
      const Explanation e = spx::explain(canvas, segmap, model, target, config.lime, rng,
                                         ExplanationMode::kSupporting, Exec::kSerial);
      local.add(e);
      if (e.truncated_positive) ++local_truncated;
      if (on_explanation) {
#pragma omp critical(spx_explain_cb)
        on_explanation(i, e);
      }
    }
#pragma omp critical(spx_explain_merge)
    {
      acc.merge(local);
      n_truncated += local_truncated;
    }
  }

  ClassExplainOutput out;
  out.agg = acc.finalize();
  out.projection = project(out.agg);
  out.derivative = derivative_profile(out.projection);
  out.welch_mean.kind = ProfileKind::kWelch;
  out.welch_mean.values.assign(static_cast<size_t>(rows), 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < rows; ++k)
      out.welch_mean.values[static_cast<size_t>(k)] +=
          welch_rows[static_cast<size_t>(i)][static_cast<size_t>(k)];
  for (auto& v : out.welch_mean.values) v /= n;
  out.temporality = temporality_score(out.agg);
  out.n_truncated = n_truncated;
  return out;
}

}  // namespace spx
