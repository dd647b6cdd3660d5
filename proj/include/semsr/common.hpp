#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace semsr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using ItemIndex = std::uint32_t;
using Prefix = std::span<const ItemIndex>;

// Error taxonomy. The CLI maps UsageError/IoError to exit code 2 and every
// other Error to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Raised when a NaN or infinity shows up in a named tensor.
class NumericError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Named flat view of one trainable tensor, row-major.
struct TensorRef {
  std::string name;
  std::span<double> values;
  std::vector<std::size_t> dims;
};

inline TensorRef tensor_ref(std::string name, Matrix& m) {
  return {std::move(name), {m.data(), static_cast<std::size_t>(m.size())},
          {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}};
}

inline TensorRef tensor_ref(std::string name, Vector& v) {
  return {std::move(name), {v.data(), static_cast<std::size_t>(v.size())}, {static_cast<std::size_t>(v.size())}};
}

void require_finite(std::string_view name, const Matrix& m);
void require_finite(std::string_view name, const Vector& v);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Independent stream seed derived from the run seed and a stream name.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  return fnv1a64(stream, 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL));
}

/// Portable uniform double in [0, 1) from a 64-bit engine. The standard
/// distributions are implementation defined, so draws go through here.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng);

/// Fisher-Yates with unit_uniform, reproducible across standard libraries.
template <typename T>
void seeded_shuffle(std::vector<T>& values, std::mt19937_64& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
    std::swap(values[i - 1], values[j < i ? j : i - 1]);
  }
}

double l2_normalize(Eigen::Ref<Vector> v);

/// Runs fn(begin, end) over fixed chunks of [0, count). Chunk boundaries do
/// not depend on the thread count.
void parallel_chunks(std::size_t count, std::size_t chunk_size, std::size_t threads,
                     const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& fn);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace semsr
