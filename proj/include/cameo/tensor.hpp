#pragma once

#include <cstdint>
#include <filesystem>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cameo {

// On-disk layout (all integers little-endian):
//   magic "CAMT" | version u32 | dtype u8 | rank u8 | dims rank*u64 | payload
enum class Dtype : std::uint8_t { F32 = 0, F64 = 1, U8 = 2 };

inline constexpr std::uint32_t kTensorFileVersion = 1;

enum class TensorIoStatus {
  BadMagic,
  BadVersion,
  BadDtype,
  BadHeader,
  TruncatedPayload,
  IoFailure,
};

class TensorIoError : public std::runtime_error {
 public:
  TensorIoError(TensorIoStatus status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  TensorIoStatus status() const { return status_; }

 private:
  TensorIoStatus status_;
};

template <typename T>
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::uint64_t> d) : dims(std::move(d)) {
    data.assign(element_count(dims), T{});
  }
  Tensor(std::vector<std::uint64_t> d, std::vector<T> v)
      : dims(std::move(d)), data(std::move(v)) {}

  std::size_t size() const { return data.size(); }

  static std::size_t element_count(const std::vector<std::uint64_t>& dims) {
    std::size_t n = 1;
    for (auto d : dims) {
      if (d == 0) throw std::invalid_argument("tensor dim must be >= 1");
      if (n > (std::size_t(1) << 40) / d)
        throw std::invalid_argument("tensor too large");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }
};

template <typename T>
constexpr Dtype dtype_of();
template <>
constexpr Dtype dtype_of<float>() {
  return Dtype::F32;
}
template <>
constexpr Dtype dtype_of<double>() {
  return Dtype::F64;
}
template <>
constexpr Dtype dtype_of<std::uint8_t>() {
  return Dtype::U8;
}

inline std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::U8: return 1;
  }
  throw TensorIoError(TensorIoStatus::BadDtype, "unknown dtype code");
}

void save_tensor_raw(const std::filesystem::path& path, Dtype dtype,
                     const std::vector<std::uint64_t>& dims,
                     const void* payload, std::size_t payload_bytes);

// Reads header + payload; throws TensorIoError on any malformation.
void load_tensor_raw(const std::filesystem::path& path, Dtype& dtype,
                     std::vector<std::uint64_t>& dims,
                     std::vector<std::uint8_t>& payload);

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
  if (t.dims.empty())
    throw std::invalid_argument("save_tensor: rank must be >= 1");
  if (Tensor<T>::element_count(t.dims) != t.data.size())
    throw std::invalid_argument("save_tensor: dims/data mismatch");
  save_tensor_raw(path, dtype_of<T>(), t.dims, t.data.data(),
                  t.data.size() * sizeof(T));
}

void decode_payload(const std::vector<std::uint8_t>& bytes,
                    std::vector<float>& out);
void decode_payload(const std::vector<std::uint8_t>& bytes,
                    std::vector<double>& out);
void decode_payload(const std::vector<std::uint8_t>& bytes,
                    std::vector<std::uint8_t>& out);

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
  Dtype dtype;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;
  load_tensor_raw(path, dtype, dims, payload);
  if (dtype != dtype_of<T>())
    throw TensorIoError(TensorIoStatus::BadDtype,
                        "dtype mismatch loading " + path.string());
  Tensor<T> t;
  t.dims = std::move(dims);
  t.data.resize(payload.size() / sizeof(T));
  decode_payload(payload, t.data);
  return t;
}

}  // namespace cameo
