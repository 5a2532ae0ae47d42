// SPDX-License-Identifier: Apache-2.0
#include "spx/io.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "container formats are little-endian; big-endian hosts need byte swaps");

namespace spx {

BinaryWriter::BinaryWriter(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path.string()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path_);
}

void BinaryWriter::magic(const char tag[4]) { out_.write(tag, 4); }
void BinaryWriter::u8(uint8_t v) { out_.write(reinterpret_cast<const char*>(&v), 1); }
void BinaryWriter::u32(uint32_t v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
void BinaryWriter::u64(uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), 8); }
void BinaryWriter::f32(float v) { out_.write(reinterpret_cast<const char*>(&v), 4); }
void BinaryWriter::f64(double v) { out_.write(reinterpret_cast<const char*>(&v), 8); }

void BinaryWriter::f32_array(std::span<const float> v) {
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * 4));
}

void BinaryWriter::u32_array(std::span<const uint32_t> v) {
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * 4));
}

void BinaryWriter::bytes(std::span<const uint8_t> v) {
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size()));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw std::runtime_error("write failed: " + path_);
}

BinaryReader::BinaryReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path.string()) {
  if (!in_) throw std::runtime_error("cannot open for reading: " + path_);
}

void BinaryReader::fill(void* dst, size_t n) {
  in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in_.gcount()) != n)
    throw std::runtime_error("truncated file: " + path_);
}

void BinaryReader::expect_magic(const char tag[4]) {
  char got[4];
  fill(got, 4);
  if (std::memcmp(got, tag, 4) != 0)
    throw std::runtime_error("bad magic in " + path_ + " (expected " +
                             std::string(tag, 4) + ")");
}

uint8_t BinaryReader::u8() { uint8_t v; fill(&v, 1); return v; }
uint32_t BinaryReader::u32() { uint32_t v; fill(&v, 4); return v; }
uint64_t BinaryReader::u64() { uint64_t v; fill(&v, 8); return v; }
float BinaryReader::f32() { float v; fill(&v, 4); return v; }
double BinaryReader::f64() { double v; fill(&v, 8); return v; }
void BinaryReader::f32_array(std::span<float> v) { fill(v.data(), v.size() * 4); }
void BinaryReader::u32_array(std::span<uint32_t> v) { fill(v.data(), v.size() * 4); }
void BinaryReader::bytes(std::span<uint8_t> v) { fill(v.data(), v.size()); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace spx
