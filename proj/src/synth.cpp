// SPDX-License-Identifier: Apache-2.0
#include "spx/synth.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "spx/io.hpp"

namespace spx {

using json = nlohmann::json;

std::vector<double> DeviceSpec::line_frequencies() const {
  std::vector<double> out;
  for (const auto& t : tones) out.push_back(t.freq_hz);
  for (const auto& h : harmonics)
    for (int k = 1; k <= h.count; ++k) out.push_back(k * h.fundamental_hz);
  return out;
}

static void validate_spec(const DeviceSpec& spec, double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  for (const auto& t : spec.tones) {
    if (!(t.freq_hz > 0.0 && t.freq_hz < nyquist))
      throw std::invalid_argument("tone frequency outside (0, Nyquist) in class " +
                                  std::to_string(spec.class_id));
    if (t.amplitude < 0.0)
      throw std::invalid_argument("negative tone amplitude in class " +
                                  std::to_string(spec.class_id));
  }
  for (const auto& h : spec.harmonics) {
    if (h.count < 1) throw std::invalid_argument("harmonic count must be >= 1");
    if (h.rolloff < 0.0) throw std::invalid_argument("negative harmonic rolloff");
    const double top = h.count * h.fundamental_hz;
    if (!(h.fundamental_hz > 0.0 && top < nyquist))
      throw std::invalid_argument("harmonic line outside (0, Nyquist) in class " +
                                  std::to_string(spec.class_id));
  }
  if (spec.noise_floor_sigma < 0.0)
    throw std::invalid_argument("negative noise_floor_sigma");
  if (spec.mains_residue_amp < 0.0)
    throw std::invalid_argument("negative mains_residue_amp");
}

void DatasetManifest::validate(int64_t window_samples) const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must lie strictly in (0, 1)");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (classes.empty()) throw std::invalid_argument("manifest has no classes");
  std::set<int> ids;
  for (const auto& c : classes) {
    if (!ids.insert(c.class_id).second)
      throw std::invalid_argument("duplicate class_id " + std::to_string(c.class_id));
    validate_spec(c, sample_rate);
    if (c.n_samples < 2 * window_samples + 2)
      throw std::invalid_argument("class " + std::to_string(c.class_id) +
                                  ": n_samples must be >= 2*window_samples + 2");
  }
}

const DeviceSpec& DatasetManifest::spec_for(int class_id) const {
  for (const auto& c : classes)
    if (c.class_id == class_id) return c;
  throw std::invalid_argument("unknown class_id " + std::to_string(class_id));
}

int64_t train_start_max(int64_t n_samples, int64_t window_samples, double train_fraction) {
  const double budget = static_cast<double>(n_samples - 2 * window_samples);
  return static_cast<int64_t>(std::floor(budget * train_fraction)) - 1;
}

int64_t validation_start_min(int64_t n_samples, int64_t window_samples,
                             double train_fraction) {
  return train_start_max(n_samples, window_samples, train_fraction) + window_samples;
}

int64_t validation_start_max(int64_t n_samples, int64_t window_samples) {
  return n_samples - 1 - window_samples;
}

// One rotating phasor per sinusoidal component. After the trig calls that
// set up the initial state, advancing is pure complex arithmetic, which
// keeps long signals fast and bit-stable.
namespace {
struct Oscillator {
  std::complex<double> z;  // current phasor, Im(z) is the sample value
  std::complex<double> w;  // per-sample rotation
  std::complex<double> u;  // per-sample rotation of w (frequency drift)
  double amplitude;

  // phase(t) = 2*pi*(f*t + 0.5*d*t^2) + phi at t = n/fs.
  Oscillator(double f, double d, double amp, double phi, double fs) : amplitude(amp) {
    const double two_pi = 2.0 * std::numbers::pi;
    z = std::polar(1.0, phi);
    w = std::polar(1.0, two_pi * f / fs + std::numbers::pi * d / (fs * fs));
    u = std::polar(1.0, two_pi * d / (fs * fs));
    drifting = d != 0.0;
  }

  inline double step() {
    const double v = amplitude * z.imag();
    z *= w;
    if (drifting) w *= u;
    return v;
  }

  bool drifting;
};
}  // namespace

std::vector<float> synthesize_signal(const DeviceSpec& spec, int64_t n_samples,
                                     double sample_rate, uint64_t seed) {
  if (n_samples <= 0) throw std::invalid_argument("n_samples must be positive");
  validate_spec(spec, sample_rate);

  Rng rng(derive_seed(seed, {kStreamSignal, static_cast<uint64_t>(spec.class_id)}));
  const double two_pi = 2.0 * std::numbers::pi;

  // Phase draw order is fixed (tones, harmonic lines, mains) so the output
  // is a pure function of (spec, n_samples, sample_rate, seed).
  std::vector<Oscillator> oscs;
  for (const auto& t : spec.tones)
    oscs.emplace_back(t.freq_hz, t.drift_hz_per_s, t.amplitude,
                      two_pi * rng.uniform(), sample_rate);
  for (const auto& h : spec.harmonics) {
    double amp = 1.0;
    for (int k = 1; k <= h.count; ++k) {
      amp *= h.rolloff;
      oscs.emplace_back(k * h.fundamental_hz, 0.0, amp, two_pi * rng.uniform(),
                        sample_rate);
    }
  }
  if (spec.mains_residue_amp > 0.0)
    oscs.emplace_back(60.0, 0.0, spec.mains_residue_amp, two_pi * rng.uniform(),
                      sample_rate);

  std::vector<float> signal(static_cast<size_t>(n_samples));
  const bool noisy = spec.noise_floor_sigma > 0.0;
  for (int64_t i = 0; i < n_samples; ++i) {
    double v = 0.0;
    for (auto& o : oscs) v += o.step();
    if (noisy) v += spec.noise_floor_sigma * rng.normal();
    signal[static_cast<size_t>(i)] = static_cast<float>(v);
  }
  return signal;
}

WindowSample sample_window(const DatasetManifest& manifest, int64_t window_samples,
                           Split split, Rng& rng) {
  const auto& spec = manifest.classes[rng.below(manifest.classes.size())];
  int64_t lo, hi;
  if (split == Split::kTrain) {
    lo = 0;
    hi = train_start_max(spec.n_samples, window_samples, manifest.train_fraction);
  } else {
    lo = validation_start_min(spec.n_samples, window_samples, manifest.train_fraction);
    hi = validation_start_max(spec.n_samples, window_samples);
  }
  if (hi < lo)
    throw std::invalid_argument("empty sampling interval for class " +
                                std::to_string(spec.class_id));
  const int64_t start = lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
  return WindowSample{spec.class_id, start, window_samples, split};
}

std::vector<float> extract_window(std::span<const float> signal, const WindowSample& sample) {
  if (sample.start < 0 || sample.length <= 0 ||
      sample.start + sample.length > static_cast<int64_t>(signal.size()))
    throw std::out_of_range("window [" + std::to_string(sample.start) + ", " +
                            std::to_string(sample.start + sample.length) +
                            ") outside signal of length " +
                            std::to_string(signal.size()));
  const auto* begin = signal.data() + sample.start;
  return std::vector<float>(begin, begin + sample.length);
}

// ---- JSON manifest ----

static json tone_to_json(const Tone& t) {
  return json{{"freq_hz", t.freq_hz},
              {"amplitude", t.amplitude},
              {"drift_hz_per_s", t.drift_hz_per_s}};
}

std::string DatasetManifest::to_json() const {
  json j;
  j["sample_rate"] = sample_rate;
  j["train_fraction"] = train_fraction;
  j["seed"] = seed;
  j["classes"] = json::array();
  for (const auto& c : classes) {
    json jc;
    jc["class_id"] = c.class_id;
    jc["name"] = c.name;
    jc["n_samples"] = c.n_samples;
    jc["noise_floor_sigma"] = c.noise_floor_sigma;
    jc["mains_residue_amp"] = c.mains_residue_amp;
    jc["tones"] = json::array();
    for (const auto& t : c.tones) jc["tones"].push_back(tone_to_json(t));
    jc["harmonics"] = json::array();
    for (const auto& h : c.harmonics)
      jc["harmonics"].push_back(json{{"fundamental_hz", h.fundamental_hz},
                                     {"count", h.count},
                                     {"rolloff", h.rolloff}});
    j["classes"].push_back(jc);
  }
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest JSON parse error: ") + e.what());
  }
  try {
    DatasetManifest m;
    m.sample_rate = j.at("sample_rate").get<double>();
    m.train_fraction = j.at("train_fraction").get<double>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& jc : j.at("classes")) {
      DeviceSpec c;
      c.class_id = jc.at("class_id").get<int>();
      c.name = jc.value("name", std::string{});
      c.n_samples = jc.at("n_samples").get<int64_t>();
      c.noise_floor_sigma = jc.value("noise_floor_sigma", 0.0);
      c.mains_residue_amp = jc.value("mains_residue_amp", 0.0);
      for (const auto& jt : jc.value("tones", json::array()))
        c.tones.push_back(Tone{jt.at("freq_hz").get<double>(),
                               jt.at("amplitude").get<double>(),
                               jt.value("drift_hz_per_s", 0.0)});
      for (const auto& jh : jc.value("harmonics", json::array()))
        c.harmonics.push_back(HarmonicStack{jh.at("fundamental_hz").get<double>(),
                                            jh.at("count").get<int>(),
                                            jh.at("rolloff").get<double>()});
      m.classes.push_back(std::move(c));
    }
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("manifest schema error: ") + e.what());
  }
}

void DatasetManifest::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json());
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

// ---- SIG1 container ----

void save_signal(const std::filesystem::path& path, std::span<const float> signal,
                 double sample_rate) {
  BinaryWriter w(path);
  w.magic("SIG1");
  w.u32(1);
  w.u64(signal.size());
  w.f64(sample_rate);
  w.f32_array(signal);
  w.close();
}

std::vector<float> load_signal(const std::filesystem::path& path, double* sample_rate_out) {
  BinaryReader r(path);
  r.expect_magic("SIG1");
  const uint32_t version = r.u32();
  if (version != 1)
    throw std::runtime_error("unsupported SIG1 version " + std::to_string(version));
  const uint64_t n = r.u64();
  const double fs = r.f64();
  if (sample_rate_out) *sample_rate_out = fs;
  std::vector<float> signal(n);
  r.f32_array(signal);
  return signal;
}

}  // namespace spx
