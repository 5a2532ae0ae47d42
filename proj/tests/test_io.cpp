// SPDX-License-Identifier: Apache-2.0
#include "spx/io.hpp"

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "spx/lime.hpp"
#include "spx/quickshift.hpp"
#include "spx/rng.hpp"
#include "spx/stft.hpp"
#include "spx/synth.hpp"

using namespace spx;
namespace fs = std::filesystem;

namespace {
fs::path tmp_file(const char* name) {
  const auto dir = fs::temp_directory_path() / "spx_io_tests";
  fs::create_directories(dir);
  return dir / name;
}
}  // namespace

TEST_CASE("binary writer/reader round trip and error paths") {
  const auto p = tmp_file("roundtrip.bin");
  {
    BinaryWriter w(p);
    w.magic("TST1");
    w.u8(7);
    w.u32(0xdeadbeef);
    w.u64(0x0123456789abcdefull);
    w.f32(1.5f);
    w.f64(-2.25);
    w.close();
  }
  {
    BinaryReader r(p);
    r.expect_magic("TST1");
    CHECK(r.u8() == 7);
    CHECK(r.u32() == 0xdeadbeef);
    CHECK(r.u64() == 0x0123456789abcdefull);
    CHECK(r.f32() == 1.5f);
    CHECK(r.f64() == -2.25);
    CHECK_THROWS_AS(r.u32(), std::runtime_error);  // truncated
  }
  {
    BinaryReader r(p);
    CHECK_THROWS_AS(r.expect_magic("XXXX"), std::runtime_error);
  }
  CHECK_THROWS_AS(BinaryReader(tmp_file("missing.bin")), std::runtime_error);
}

TEST_CASE("SIG1 round trip preserves samples and rate") {
  const auto p = tmp_file("sig.sig");
  Rng rng(3);
  std::vector<float> samples(1000);
  for (auto& v : samples) v = static_cast<float>(rng.normal());
  save_signal(p, samples, 2e6);
  double fs = 0.0;
  const auto back = load_signal(p, &fs);
  CHECK(fs == 2e6);
  CHECK(back == samples);
}

TEST_CASE("SPC1 grid and profile round trip") {
  const auto p = tmp_file("grid.spc1");
  Spectrogram s;
  s.rows = 3;
  s.cols = 4;
  s.class_id = 5;
  s.log_scaled = true;
  s.values = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  save_grid(p, s);
  GridKind kind;
  const auto back = load_grid(p, &kind);
  CHECK(kind == GridKind::kSpectrogram);
  CHECK(back.rows == 3);
  CHECK(back.cols == 4);
  CHECK(back.class_id == 5);
  CHECK(back.log_scaled);
  CHECK(back.values == s.values);

  FrequencyProfile prof;
  prof.kind = ProfileKind::kLimeDerivative;
  prof.values = {0.5, 1.25, -3.0};
  const auto pp = tmp_file("prof.spc1");
  save_profile(pp, prof);
  const auto prof2 = load_profile(pp);
  CHECK(prof2.kind == ProfileKind::kLimeDerivative);
  REQUIRE(prof2.values.size() == 3);
  for (size_t i = 0; i < 3; ++i)
    CHECK(prof2.values[i] == doctest::Approx(prof.values[i]).epsilon(1e-7));
}

TEST_CASE("SEG1 round trip") {
  const auto p = tmp_file("seg.seg1");
  SuperpixelMap m;
  m.rows = 2;
  m.cols = 3;
  m.n_segments = 3;
  m.labels = {0, 0, 1, 2, 2, 1};
  save_segments(p, m);
  const auto back = load_segments(p);
  CHECK(back.rows == m.rows);
  CHECK(back.cols == m.cols);
  CHECK(back.n_segments == m.n_segments);
  CHECK(back.labels == m.labels);
}

TEST_CASE("EXP1 round trip preserves masks bit-exactly") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Explanation e;
    e.rows = 17;  // odd width exercises bit packing tails
    e.cols = 13;
    e.target_class = trial;
    e.truncated_positive = trial % 2 == 0;
    e.mask.resize(static_cast<size_t>(e.rows) * e.cols);
    for (auto& b : e.mask) b = static_cast<uint8_t>(rng.next() & 1);
    e.superpixel_weights = {0.25, -1.5, 3.0};
    e.local_r2 = 0.75;
    const auto p = tmp_file("exp.exp1");
    e.save(p);
    const auto back = Explanation::load(p);
    CHECK(back.rows == e.rows);
    CHECK(back.cols == e.cols);
    CHECK(back.target_class == e.target_class);
    CHECK(back.truncated_positive == e.truncated_positive);
    CHECK(back.mask == e.mask);
    REQUIRE(back.superpixel_weights.size() == 3);
    for (size_t i = 0; i < 3; ++i)
      CHECK(back.superpixel_weights[i] ==
            doctest::Approx(e.superpixel_weights[i]).epsilon(1e-7));
  }
}

TEST_CASE("csv export format") {
  const auto p = tmp_file("prof.csv");
  FrequencyProfile prof;
  prof.kind = ProfileKind::kWelch;
  prof.values = {1.0, 0.5};
  write_profile_csv(p, prof, 10.0);
  CHECK(read_text_file(p) == "bin,freq_hz,value\n0,0,1\n1,10,0.5\n");

  FrequencyProfile stddev = prof;
  stddev.values = {0.1, 0.2};
  write_profile_csv(p, prof, 10.0, &stddev);
  CHECK(read_text_file(p) == "bin,freq_hz,value,value_std\n0,0,1,0.1\n1,10,0.5,0.2\n");
}
