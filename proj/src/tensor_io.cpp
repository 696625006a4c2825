#include "cotmap/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cotmap {

namespace {

constexpr char kMagic[4] = {'C', 'O', 'T', 'T'};
constexpr std::uint8_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "tensor I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

std::size_t product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

std::size_t Tensor::element_count() const { return product(dims); }

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.dims.size() > 255) throw TensorFormatError("tensor has too many dimensions");
  const std::size_t n = t.element_count();
  const std::size_t have = t.dtype == DType::F32 ? t.f32.size() : t.u8.size();
  if (have != n) throw TensorFormatError("tensor payload does not match its dims");

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(t.dtype));
  out.push_back(static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) put_u32(out, d);
  if (t.dtype == DType::F32) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.f32.data());
    out.insert(out.end(), p, p + n * sizeof(float));
  } else {
    out.insert(out.end(), t.u8.begin(), t.u8.end());
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 7 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw TensorFormatError("not a tensor file (bad magic)");
  if (bytes[4] != kVersion) throw TensorFormatError("unsupported tensor file version");
  Tensor t;
  if (bytes[5] > 1) throw TensorFormatError("unknown tensor dtype");
  t.dtype = static_cast<DType>(bytes[5]);
  const std::size_t ndim = bytes[6];
  std::size_t off = 7;
  if (bytes.size() < off + 4 * ndim) throw TensorFormatError("truncated tensor header");
  for (std::size_t i = 0; i < ndim; ++i, off += 4) t.dims.push_back(get_u32(bytes.data() + off));

  const std::size_t n = t.element_count();
  const std::size_t esize = t.dtype == DType::F32 ? sizeof(float) : 1;
  if (bytes.size() - off != n * esize) throw TensorFormatError("tensor payload length mismatch");
  if (t.dtype == DType::F32) {
    t.f32.resize(n);
    std::memcpy(t.f32.data(), bytes.data() + off, n * sizeof(float));
  } else {
    t.u8.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing tensor file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_tensor(bytes);
  } catch (const TensorFormatError& e) {
    throw TensorFormatError(path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const ImageF& img) {
  Tensor t;
  t.dtype = DType::F32;
  t.dims = {std::uint32_t(img.channels), std::uint32_t(img.height), std::uint32_t(img.width)};
  t.f32 = img.data;
  return t;
}

Tensor to_tensor(const ImageU8& img) {
  Tensor t;
  t.dtype = DType::U8;
  t.dims = {std::uint32_t(img.channels), std::uint32_t(img.height), std::uint32_t(img.width)};
  t.u8 = img.data;
  return t;
}

namespace {
template <class T>
Grid<T> grid_from_dims(const std::vector<std::uint32_t>& dims) {
  if (dims.size() == 2) return Grid<T>(1, int(dims[0]), int(dims[1]));
  if (dims.size() == 3) return Grid<T>(int(dims[0]), int(dims[1]), int(dims[2]));
  throw TensorFormatError("expected a 2-D or 3-D tensor");
}
}  // namespace

ImageF image_f32(const Tensor& t) {
  if (t.dtype != DType::F32) throw TensorFormatError("expected float32 tensor");
  auto img = grid_from_dims<float>(t.dims);
  img.data = t.f32;
  return img;
}

ImageU8 image_u8(const Tensor& t) {
  if (t.dtype != DType::U8) throw TensorFormatError("expected uint8 tensor");
  auto img = grid_from_dims<std::uint8_t>(t.dims);
  img.data = t.u8;
  return img;
}

}  // namespace cotmap
