// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace spx {

/// Little-endian binary stream helpers shared by the container formats
/// (SIG1, SPC1, SEG1, EXP1, MDL1). All multi-byte fields are written
/// little-endian regardless of host order; layouts are documented in
/// README.md and are part of the artifact contract.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path);
  void magic(const char tag[4]);
  void u8(uint8_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void f32_array(std::span<const float> v);
  void u32_array(std::span<const uint32_t> v);
  void bytes(std::span<const uint8_t> v);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path);
  /// Throws if the next four bytes differ from tag.
  void expect_magic(const char tag[4]);
  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  void f32_array(std::span<float> v);
  void u32_array(std::span<uint32_t> v);
  void bytes(std::span<uint8_t> v);

 private:
  void fill(void* dst, size_t n);
  std::ifstream in_;
  std::string path_;
};

/// Writes text atomically: to path + ".tmp", then rename. Keeps partially
/// written artifacts out of resumable pipelines.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace spx
