#include "mma/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mma/errors.hpp"

namespace mma {

ImageTensor::ImageTensor(int h, int w, int c, float fill)
    : height(h), width(w), channels(c) {
  if (h <= 0 || w <= 0 || c <= 0)
    throw std::invalid_argument("ImageTensor: dimensions must be positive");
  data.assign(static_cast<size_t>(h) * w * c, fill);
}

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

void validate_image(const ImageTensor& t) {
  if (!is_power_of_two(t.height) || t.height < 8)
    throw std::invalid_argument("image height must be a power of two >= 8, got " +
                                std::to_string(t.height));
  if (!is_power_of_two(t.width) || t.width < 8)
    throw std::invalid_argument("image width must be a power of two >= 8, got " +
                                std::to_string(t.width));
  if (t.channels != 1 && t.channels != 3)
    throw std::invalid_argument("image channels must be 1 or 3, got " +
                                std::to_string(t.channels));
  if (t.data.size() != static_cast<size_t>(t.height) * t.width * t.channels)
    throw std::invalid_argument("image payload length does not match dimensions");
  for (float v : t.data)
    if (!std::isfinite(v)) throw std::invalid_argument("image contains non-finite values");
}

double linf_norm(const ImageTensor& t) {
  double m = 0.0;
  for (float v : t.data) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

void clamp01_inplace(ImageTensor& t) {
  for (float& v : t.data) v = std::clamp(v, 0.0f, 1.0f);
}

namespace {

constexpr char kMagic[4] = {'M', 'M', 'T', '1'};

void put_u32le(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw ParseError("MMT1: truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_mmt1(const std::filesystem::path& path, const ImageTensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("MMT1: cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u32le(os, static_cast<uint32_t>(t.height));
  put_u32le(os, static_cast<uint32_t>(t.width));
  put_u32le(os, static_cast<uint32_t>(t.channels));
  for (float v : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32le(os, bits);
  }
  if (!os) throw std::runtime_error("MMT1: write failed: " + path.string());
}

ImageTensor load_mmt1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("MMT1: cannot open for reading: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("MMT1: bad magic in " + path.string());
  const uint32_t h = get_u32le(is);
  const uint32_t w = get_u32le(is);
  const uint32_t c = get_u32le(is);
  if (h == 0 || w == 0 || c == 0 || h > (1u << 20) || w > (1u << 20) || c > 16)
    throw ParseError("MMT1: implausible dimensions in " + path.string());
  ImageTensor t(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  for (float& v : t.data) {
    const uint32_t bits = get_u32le(is);
    std::memcpy(&v, &bits, 4);
  }
  // Trailing bytes mean the file does not match its own header.
  if (is.peek() != std::char_traits<char>::eof())
    throw ParseError("MMT1: trailing bytes in " + path.string());
  return t;
}

}  // namespace mma
