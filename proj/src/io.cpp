#include "orthoe/io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "orthoe/errors.hpp"

namespace orthoe {

namespace {

template <typename T>
void put_le(std::vector<char>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(v & 0xffu)));
    v >>= 8;
  }
}

}  // namespace

void ByteWriter::raw(std::span<const char> bytes) {
  bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::u32(std::uint32_t v) { put_le(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(bytes_, v); }
void ByteWriter::f64(double v) { put_le(bytes_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + values.size() * 8);
  for (double v : values) f64(v);
}

void ByteWriter::string(std::string_view s) {
  u64(s.size());
  raw(std::span<const char>(s.data(), s.size()));
}

std::span<const char> ByteReader::raw(std::size_t n) {
  if (bytes_.size() - pos_ < n) throw ParseError("unexpected end of binary data", 0);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (std::size_t i = 4; i-- > 0;) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (std::size_t i = 8; i-- > 0;) v = (v << 8) | static_cast<unsigned char>(b[i]);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::f64s(std::span<double> out) {
  for (double& v : out) v = f64();
}

std::string ByteReader::string() {
  const std::uint64_t n = u64();
  auto b = raw(n);
  return std::string(b.begin(), b.end());
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

}  // namespace orthoe
