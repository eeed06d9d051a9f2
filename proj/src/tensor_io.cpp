#include "hsta/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

namespace hsta {
namespace {

constexpr char kMagic[4] = {'H', 'S', 'T', 'A'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint64_t take(int width) {
    if (pos_ + width > bytes_.size()) throw FormatError("tensor payload truncated at byte " + std::to_string(pos_));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * t.rank() + 8 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kTensorFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto extent : t.shape()) {
    if (extent > std::numeric_limits<std::uint32_t>::max()) throw FormatError("extent exceeds u32 range");
    put_u32(out, static_cast<std::uint32_t>(extent));
  }
  for (double v : t.values()) put_f64(out, v);
  return out;
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("missing HSTA magic");
  Reader in(bytes);
  in.skip(4);
  const auto version = static_cast<std::uint32_t>(in.take(4));
  if (version != kTensorFormatVersion) throw FormatError("unsupported tensor format version " + std::to_string(version));
  const auto rank = static_cast<std::uint32_t>(in.take(4));
  Shape shape(rank);
  for (auto& extent : shape) extent = static_cast<std::size_t>(in.take(4));
  const std::size_t count = element_count(shape);
  if (in.remaining() != 8 * count) {
    throw FormatError("tensor payload holds " + std::to_string(in.remaining()) + " data bytes, shape " +
                      to_string(shape) + " needs " + std::to_string(8 * count));
  }
  std::vector<double> data(count);
  for (auto& v : data) v = std::bit_cast<double>(in.take(8));
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(std::ostream& out, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_tensor(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_tensor(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace hsta
