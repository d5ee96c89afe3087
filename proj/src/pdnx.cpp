#include "pdenetpp/pdnx.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pdenetpp::pdnx {
namespace {

constexpr char kMagic[6] = {'P', 'D', 'N', 'X', '1', '\0'};

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename T>
T get(const std::vector<unsigned char>& in, std::size_t& pos) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  if (pos + sizeof(T) > in.size()) throw FormatError("truncated PDNX data");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(in[pos + i]) << (8 * i);
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

}  // namespace

std::vector<unsigned char> encode(const Tensor& tensor) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t d : tensor.shape()) put<std::uint64_t>(out, d);
  out.reserve(out.size() + 8 * tensor.size() + 8);
  for (double v : tensor.data()) put<double>(out, v);
  put<std::uint64_t>(out, 8 * tensor.size());
  return out;
}

Tensor decode(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a PDNX file (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw FormatError("unsupported PDNX version " + std::to_string(version));
  const auto ndims = get<std::uint32_t>(bytes, pos);
  Shape shape(ndims);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = get<std::uint64_t>(bytes, pos);
    count *= d;
  }
  if (bytes.size() != pos + 8 * count + 8) throw FormatError("PDNX byte length inconsistent with dims");
  std::vector<double> values(count);
  for (auto& v : values) v = get<double>(bytes, pos);
  const auto trailer = get<std::uint64_t>(bytes, pos);
  if (trailer != 8 * count) throw FormatError("PDNX trailing length does not match the payload");
  return Tensor(std::move(shape), std::move(values));
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode(tensor);
  write_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Tensor read(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace pdenetpp::pdnx
