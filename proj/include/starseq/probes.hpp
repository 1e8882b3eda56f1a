#pragma once

// The three analyses: over-smoothing cosine-similarity profiles, attention
// entropy of the baseline's first block, and op-count/runtime complexity.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "starseq/data.hpp"
#include "starseq/model.hpp"

namespace starseq {

// Mean pairwise cosine similarity between the item states within each user's
// window, per block. a[m-1] corresponds to the output of block m.
struct SmoothingProfile {
  std::vector<double> a;
  std::size_t users = 0;
  std::size_t zero_norm_pairs = 0;  // pairs whose cosine was defined as 0
  bool include_diagonal = true;
};

// Runs each sampled user's test-time input (train + validation item) through
// the model and averages the per-user profiles. Padding rows never enter the
// pairwise sums. sample_size = 0 means every user.
SmoothingProfile smoothing_profile(SequenceModel& model, const Split& split,
                                   std::size_t sample_size, std::uint64_t seed,
                                   bool include_diagonal = true);

// Pooled entropy of the baseline's block-1 attention rows at real positions,
// against the uniform distribution over each row's unmasked support. All
// values in nats with bit (log2) conversions alongside.
struct EntropyReport {
  double attention_nats = 0;
  double uniform_nats = 0;
  double gain_nats = 0;  // uniform - attention, always >= 0
  double attention_bits = 0;
  double uniform_bits = 0;
  double gain_bits = 0;
  std::size_t positions = 0;
  std::size_t users = 0;
};

EntropyReport attention_entropy(SequenceModel& model, const Split& split,
                                std::size_t sample_size, std::uint64_t seed);

// Per-block op counts from closed-form formulas, and their exact difference.
struct OpCounts {
  std::int64_t sa = 0;
  std::int64_t star = 0;
  std::int64_t diff = 0;  // sa - star, equal to 4d^2(n-1) + 2d(n^2-1)
};

OpCounts op_counts(std::int64_t n, std::int64_t d);

// Forward-only wall time per user over an n-grid, on frozen random models.
struct RuntimeSample {
  std::string kind;
  int n = 0;
  int d = 0;
  int n_b = 0;
  int repetitions = 0;
  double median_us = 0;
  double p95_us = 0;
  bool below_timer_resolution = false;  // median under 1 microsecond
};

struct BenchOptions {
  std::vector<int> n_grid = {64, 128, 256, 512};
  int d = 64;
  int n_h = 16;
  int n_b = 2;
  int repetitions = 9;  // at least 5
  int warmup = 2;
};

std::vector<RuntimeSample> bench_runtime(ModelKind kind, const BenchOptions& opt,
                                         std::uint64_t seed);

// Ordinary least squares slope of ln(y) against ln(x).
double log_log_slope(const std::vector<double>& xs, const std::vector<double>& ys);

nlohmann::json smoothing_to_json(const SmoothingProfile& profile);
nlohmann::json entropy_to_json(const EntropyReport& report);
nlohmann::json op_counts_to_json(const OpCounts& counts, std::int64_t n, std::int64_t d);
nlohmann::json runtime_to_json(const std::vector<RuntimeSample>& samples);
void runtime_to_csv(const std::vector<RuntimeSample>& samples, std::ostream& out);

}  // namespace starseq
