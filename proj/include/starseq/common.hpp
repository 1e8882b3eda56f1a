#pragma once

#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace starseq {

inline constexpr const char* kBuildId = "starseq 0.1.0";

#ifdef STARSEQ_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

// ---------------------------------------------------------------------------
// Error taxonomy. Every failure surfaces as a typed exception so callers and
// tests can distinguish contract violations from data problems.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define STARSEQ_DEFINE_ERROR(Name, kind)                    \
  class Name : public Error {                               \
   public:                                                  \
    explicit Name(const std::string& msg) : Error(kind, msg) {} \
  }

STARSEQ_DEFINE_ERROR(DimensionError, "dimension error");
STARSEQ_DEFINE_ERROR(DomainError, "domain error");
STARSEQ_DEFINE_ERROR(ContractError, "contract error");
STARSEQ_DEFINE_ERROR(NumericalError, "numerical error");
STARSEQ_DEFINE_ERROR(IndexError, "index error");
STARSEQ_DEFINE_ERROR(IoError, "io error");
STARSEQ_DEFINE_ERROR(IngestionError, "ingestion error");
STARSEQ_DEFINE_ERROR(PreprocessError, "preprocessing error");
STARSEQ_DEFINE_ERROR(ConfigError, "configuration error");
STARSEQ_DEFINE_ERROR(SamplingError, "sampling error");
STARSEQ_DEFINE_ERROR(TrainError, "training error");
STARSEQ_DEFINE_ERROR(ProbeError, "probe error");

#undef STARSEQ_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Deterministic RNG helpers. std::shuffle and uniform_int_distribution are
// implementation-defined, so index draws and shuffles are spelled out here.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

// Unbiased-enough fixed-point mapping of one 64-bit draw onto [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_index: empty range");
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Fisher-Yates with uniform_index, deterministic across standard libraries.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Derives an independent stream from a base seed and a purpose tag, so the
// consumption order of one stream cannot perturb another.
inline Rng make_rng(std::uint64_t seed, std::string_view purpose) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

// ---------------------------------------------------------------------------
// FNV-1a 64-bit content hash, used for data/config fingerprints in manifests.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 14695981039346656037ull) {
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

// ---------------------------------------------------------------------------
// Deterministic parallel map: each index writes its own slot, so the result
// does not depend on the number of workers. STARSEQ_THREADS caps workers.
// ---------------------------------------------------------------------------

int worker_count();

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  int workers = worker_count();
  if (workers <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::size_t stride = static_cast<std::size_t>(workers);
  for (std::size_t w = 0; w < stride; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += stride) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace starseq
