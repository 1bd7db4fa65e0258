#include "cameo/tensor.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace cameo {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'T'};

void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get_u32le(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

static_assert(std::endian::native == std::endian::little,
              "payload fast path assumes a little-endian host");

}  // namespace

void save_tensor_raw(const std::filesystem::path& path, Dtype dtype,
                     const std::vector<std::uint64_t>& dims,
                     const void* payload, std::size_t payload_bytes) {
  std::vector<std::uint8_t> header;
  header.insert(header.end(), kMagic, kMagic + 4);
  put_u32le(header, kTensorFileVersion);
  header.push_back(static_cast<std::uint8_t>(dtype));
  header.push_back(static_cast<std::uint8_t>(dims.size()));
  for (auto d : dims) put_u64le(header, d);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw TensorIoError(TensorIoStatus::IoFailure,
                              "cannot open for write: " + path.string());
  f.write(reinterpret_cast<const char*>(header.data()),
          std::streamsize(header.size()));
  f.write(reinterpret_cast<const char*>(payload),
          std::streamsize(payload_bytes));
  if (!f) throw TensorIoError(TensorIoStatus::IoFailure,
                              "write failed: " + path.string());
}

void load_tensor_raw(const std::filesystem::path& path, Dtype& dtype,
                     std::vector<std::uint64_t>& dims,
                     std::vector<std::uint8_t>& payload) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorIoError(TensorIoStatus::IoFailure,
                              "cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < 10)
    throw TensorIoError(TensorIoStatus::BadHeader,
                        "file too short for header: " + path.string());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw TensorIoError(TensorIoStatus::BadMagic,
                        "bad magic in " + path.string());
  std::uint32_t version = get_u32le(bytes.data() + 4);
  if (version != kTensorFileVersion)
    throw TensorIoError(TensorIoStatus::BadVersion,
                        "unsupported version " + std::to_string(version) +
                            " in " + path.string());
  std::uint8_t dtype_code = bytes[8];
  if (dtype_code > 2)
    throw TensorIoError(TensorIoStatus::BadDtype,
                        "unknown dtype code in " + path.string());
  dtype = static_cast<Dtype>(dtype_code);
  std::uint8_t rank = bytes[9];
  if (rank == 0)
    throw TensorIoError(TensorIoStatus::BadHeader,
                        "rank 0 not allowed: " + path.string());
  std::size_t header_size = 10 + std::size_t(rank) * 8;
  if (bytes.size() < header_size)
    throw TensorIoError(TensorIoStatus::BadHeader,
                        "truncated dims in " + path.string());
  dims.clear();
  for (int i = 0; i < rank; ++i)
    dims.push_back(get_u64le(bytes.data() + 10 + 8 * i));

  std::size_t n;
  try {
    n = Tensor<std::uint8_t>::element_count(dims);
  } catch (const std::invalid_argument& e) {
    throw TensorIoError(TensorIoStatus::BadHeader,
                        std::string(e.what()) + ": " + path.string());
  }
  std::size_t expected = n * dtype_size(dtype);
  std::size_t actual = bytes.size() - header_size;
  if (actual != expected)
    throw TensorIoError(TensorIoStatus::TruncatedPayload,
                        "payload is " + std::to_string(actual) +
                            " bytes, expected " + std::to_string(expected) +
                            ": " + path.string());
  payload.assign(bytes.begin() + std::ptrdiff_t(header_size), bytes.end());
}

void decode_payload(const std::vector<std::uint8_t>& bytes,
                    std::vector<float>& out) {
  std::memcpy(out.data(), bytes.data(), bytes.size());
}

void decode_payload(const std::vector<std::uint8_t>& bytes,
                    std::vector<double>& out) {
  std::memcpy(out.data(), bytes.data(), bytes.size());
}

void decode_payload(const std::vector<std::uint8_t>& bytes,
                    std::vector<std::uint8_t>& out) {
  out = bytes;
}

}  // namespace cameo
