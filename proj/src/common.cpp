#include "semsr/common.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace semsr {

ParseError::ParseError(const std::string& path, std::size_t line, const std::string& what)
    : IoError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

void require_finite(std::string_view name, const Matrix& m) {
  if (!m.allFinite()) {
    throw NumericError("non-finite value in tensor '" + std::string(name) + "'");
  }
}

void require_finite(std::string_view name, const Vector& v) {
  if (!v.allFinite()) {
    throw NumericError("non-finite value in tensor '" + std::string(name) + "'");
  }
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t seed) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), seed);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

double standard_normal(std::mt19937_64& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double l2_normalize(Eigen::Ref<Vector> v) {
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return norm;
}

void parallel_chunks(std::size_t count, std::size_t chunk_size, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t chunks = (count + chunk_size - 1) / chunk_size;
  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    fn(c, begin, std::min(count, begin + chunk_size));
  };
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t c = t; c < chunks; c += threads) run_chunk(c);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace semsr
