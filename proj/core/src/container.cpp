#include "nvt/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "nvt/error.hpp"

namespace nvt {

namespace {

constexpr char kMagic[4] = {'N', 'V', 'T', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(p[i]) << (8 * i);
  return static_cast<T>(u);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw FormatError(std::string("truncated container while reading ") + what, pos_);
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  template <typename T>
  T read(const char* what) {
    return get_le<T>(take(sizeof(T), what));
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

bool valid_dtype(std::uint8_t code) { return code >= 1 && code <= 4; }

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
    case DType::I64: return 8;
  }
  return 0;
}

std::uint64_t PackedTensor::element_count() const {
  std::uint64_t n = 1;
  for (auto e : extents) n *= e;
  return n;
}

PackedTensor PackedTensor::from_tensor(std::string name, const Tensor& t, DType dtype) {
  if (dtype != DType::F64 && dtype != DType::F32) throw ContractError("tensor entries must be F32 or F64");
  PackedTensor p{std::move(name), dtype, {}, {}};
  for (auto e : t.shape()) p.extents.push_back(e);
  p.bytes.reserve(t.numel() * dtype_size(dtype));
  for (double v : t.data()) {
    if (dtype == DType::F64)
      put_le(p.bytes, std::bit_cast<std::uint64_t>(v));
    else
      put_le(p.bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return p;
}

PackedTensor PackedTensor::from_u8(std::string name, std::vector<std::uint64_t> extents,
                                   std::span<const std::uint8_t> data) {
  PackedTensor p{std::move(name), DType::U8, std::move(extents), {data.begin(), data.end()}};
  if (p.element_count() != data.size()) throw ShapeError("u8 entry '" + p.name + "': extents do not match data");
  return p;
}

PackedTensor PackedTensor::from_i64(std::string name, std::vector<std::uint64_t> extents,
                                    std::span<const std::int64_t> data) {
  PackedTensor p{std::move(name), DType::I64, std::move(extents), {}};
  if (p.element_count() != data.size()) throw ShapeError("i64 entry '" + p.name + "': extents do not match data");
  for (auto v : data) put_le(p.bytes, v);
  return p;
}

PackedTensor PackedTensor::from_text(std::string name, const std::string& text) {
  std::vector<std::uint8_t> b(text.begin(), text.end());
  return PackedTensor{std::move(name), DType::U8, {b.size()}, std::move(b)};
}

Tensor PackedTensor::to_tensor() const {
  if (dtype != DType::F64 && dtype != DType::F32) throw FormatError("entry '" + name + "' is not floating point", 0);
  Shape shape(extents.begin(), extents.end());
  std::vector<double> data(element_count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (dtype == DType::F64)
      data[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes.data() + 8 * i));
    else
      data[i] = static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes.data() + 4 * i)));
  }
  return Tensor(std::move(shape), std::move(data));
}

std::vector<std::int64_t> PackedTensor::to_i64() const {
  if (dtype != DType::I64) throw FormatError("entry '" + name + "' is not i64", 0);
  std::vector<std::int64_t> out(element_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_le<std::int64_t>(bytes.data() + 8 * i);
  return out;
}

std::string PackedTensor::to_text() const {
  if (dtype != DType::U8) throw FormatError("entry '" + name + "' is not a byte blob", 0);
  return std::string(bytes.begin(), bytes.end());
}

std::vector<std::uint8_t> encode_packed(std::span<const PackedTensor> entries) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_le<std::uint32_t>(out, kContainerVersion);
  if (entries.size() > std::numeric_limits<std::uint32_t>::max()) throw ContractError("too many container entries");
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const PackedTensor& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw ContractError("entry name too long");
    if (e.extents.size() > 255) throw ContractError("entry rank too large");
    if (e.bytes.size() != e.element_count() * dtype_size(e.dtype))
      throw ContractError("entry '" + e.name + "' byte length does not match its extents");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.dtype));
    out.push_back(static_cast<std::uint8_t>(e.extents.size()));
    for (auto x : e.extents) put_le<std::uint64_t>(out, x);
    out.insert(out.end(), e.bytes.begin(), e.bytes.end());
  }
  return out;
}

std::vector<PackedTensor> decode_packed(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, expected \"NVT1\"", 0);
  const std::uint64_t version_at = r.offset();
  const auto version = r.read<std::uint32_t>("version");
  if (version != kContainerVersion)
    throw FormatError("unsupported container version " + std::to_string(version) + " (supported: " +
                          std::to_string(kContainerVersion) + ")",
                      version_at);
  const auto count = r.read<std::uint32_t>("entry count");
  std::vector<PackedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    PackedTensor e;
    const auto name_len = r.read<std::uint16_t>("name length");
    const std::uint8_t* name = r.take(name_len, "name");
    e.name.assign(reinterpret_cast<const char*>(name), name_len);
    const std::uint64_t dtype_at = r.offset();
    const auto code = r.read<std::uint8_t>("dtype");
    if (!valid_dtype(code)) throw FormatError("unknown dtype code " + std::to_string(code), dtype_at);
    e.dtype = static_cast<DType>(code);
    const auto rank = r.read<std::uint8_t>("rank");
    std::uint64_t n = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const std::uint64_t at = r.offset();
      const auto x = r.read<std::uint64_t>("extent");
      if (x == 0 || n > std::numeric_limits<std::uint64_t>::max() / x) throw FormatError("invalid extent", at);
      e.extents.push_back(x);
      n *= x;
    }
    const std::size_t width = dtype_size(e.dtype);
    if (n > (bytes.size() - r.offset()) / width)
      throw FormatError("truncated data for entry '" + e.name + "'", r.offset());
    const std::uint8_t* data = r.take(n * width, "data");
    e.bytes.assign(data, data + n * width);
    entries.push_back(std::move(e));
  }
  if (r.offset() != bytes.size()) throw FormatError("trailing bytes after last entry", r.offset());
  return entries;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void save_packed(const std::filesystem::path& path, std::span<const PackedTensor> entries) {
  write_file_bytes(path, encode_packed(entries));
}

std::vector<PackedTensor> load_packed(const std::filesystem::path& path) { return decode_packed(read_file_bytes(path)); }

}  // namespace nvt
