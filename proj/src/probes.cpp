#include "starseq/probes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace starseq {

namespace {

// Deterministic sample of user indices: seeded shuffle, first k, then sorted
// so the aggregation order is fixed.
std::vector<std::size_t> sample_users(std::size_t count, std::size_t sample_size,
                                      std::uint64_t seed) {
  if (count == 0) throw ProbeError("no users to sample");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (sample_size > 0 && sample_size < count) {
    Rng rng = make_rng(seed, "probe-sample");
    shuffle_in_place(idx, rng);
    idx.resize(sample_size);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

std::vector<int> probe_input(const Split& split, std::size_t i) {
  std::vector<int> input = split.train[i];
  input.push_back(split.val_target[i]);
  return input;
}

}  // namespace

SmoothingProfile smoothing_profile(SequenceModel& model, const Split& split,
                                   std::size_t sample_size, std::uint64_t seed,
                                   bool include_diagonal) {
  std::vector<std::size_t> users = sample_users(split.user_count(), sample_size, seed);
  int n_b = model.cfg.n_b;

  SmoothingProfile profile;
  profile.include_diagonal = include_diagonal;
  profile.a.assign(static_cast<std::size_t>(n_b), 0.0);

  std::size_t zero_pairs = 0;
  std::size_t used_users = 0;
  for (std::size_t i : users) {
    Graph g;
    ForwardTrace trace = model.forward(g, to_fixed_length(probe_input(split, i), model.cfg.n));
    std::vector<Index> real_rows;
    for (std::size_t t = 0; t < trace.real.size(); ++t) {
      if (trace.real[t]) real_rows.push_back(static_cast<Index>(t));
    }
    std::size_t b = real_rows.size();
    if (!include_diagonal && b < 2) continue;  // no off-diagonal pairs exist
    ++used_users;
    for (int m = 1; m <= n_b; ++m) {
      const Matrix& item_state = trace.item_states[static_cast<std::size_t>(m)];
      double total = 0;
      std::size_t pairs = 0;
      for (Index j : real_rows) {
        for (Index k : real_rows) {
          if (!include_diagonal && j == k) continue;
          ++pairs;
          double nj = item_state.row(j).norm();
          double nk = item_state.row(k).norm();
          if (nj == 0.0 || nk == 0.0) {
            ++zero_pairs;  // cosine with a zero vector is defined as 0
            continue;
          }
          total += static_cast<double>(item_state.row(j).dot(item_state.row(k))) / (nj * nk);
        }
      }
      profile.a[static_cast<std::size_t>(m - 1)] += total / static_cast<double>(pairs);
    }
  }
  if (used_users == 0) {
    throw ProbeError("no sampled user has enough real items for the profile");
  }
  for (double& a : profile.a) a /= static_cast<double>(used_users);
  profile.users = used_users;
  // A zero-norm row participates in every block's sums; report raw pair count.
  profile.zero_norm_pairs = zero_pairs;
  return profile;
}

EntropyReport attention_entropy(SequenceModel& model, const Split& split,
                                std::size_t sample_size, std::uint64_t seed) {
  if (model.kind != ModelKind::Baseline) {
    throw ProbeError("attention entropy requires the baseline model");
  }
  std::vector<std::size_t> users = sample_users(split.user_count(), sample_size, seed);

  double attention_total = 0;
  double uniform_total = 0;
  std::size_t positions = 0;
  for (std::size_t i : users) {
    Graph g;
    ForwardTrace trace = model.forward(g, to_fixed_length(probe_input(split, i), model.cfg.n));
    const auto& block1 = trace.alpha[0];
    // The block's attention map: mean over heads (each row still sums to 1).
    Matrix A = block1[0];
    for (std::size_t h = 1; h < block1.size(); ++h) A += block1[h];
    A /= static_cast<Real>(block1.size());

    int pad = 0;
    while (pad < static_cast<int>(trace.real.size()) &&
           !trace.real[static_cast<std::size_t>(pad)]) {
      ++pad;
    }
    for (Index j = pad; j < A.rows(); ++j) {
      double row_sum = static_cast<double>(A.row(j).sum());
      if (std::abs(row_sum - 1.0) > 1e-6) {
        throw ProbeError("attention row " + std::to_string(j) + " sums to " +
                         std::to_string(row_sum) + ", expected 1");
      }
      double entropy = 0;
      for (Index k = 0; k <= j; ++k) {
        double p = static_cast<double>(A(j, k));
        if (p > 0) entropy -= p * std::log(p);
      }
      int support = static_cast<int>(j) + 1 - pad;  // unmasked keys at position j
      attention_total += entropy;
      uniform_total += std::log(static_cast<double>(support));
      ++positions;
    }
  }
  if (positions == 0) throw ProbeError("no real positions in the sampled users");

  EntropyReport report;
  report.users = users.size();
  report.positions = positions;
  report.attention_nats = attention_total / static_cast<double>(positions);
  report.uniform_nats = uniform_total / static_cast<double>(positions);
  report.gain_nats = report.uniform_nats - report.attention_nats;
  const double ln2 = std::log(2.0);
  report.attention_bits = report.attention_nats / ln2;
  report.uniform_bits = report.uniform_nats / ln2;
  report.gain_bits = report.gain_nats / ln2;
  return report;
}

OpCounts op_counts(std::int64_t n, std::int64_t d) {
  if (n < 1 || d < 1) throw ContractError("op counts need n >= 1 and d >= 1");
  OpCounts c;
  c.sa = 6 * n * d * d + 2 * n * n * d + 2 * n * d;
  c.star = 2 * n * d * d + 4 * d * d + 2 * n * d + 2 * d;
  c.diff = 4 * d * d * (n - 1) + 2 * d * (n * n - 1);
  return c;
}

std::vector<RuntimeSample> bench_runtime(ModelKind kind, const BenchOptions& opt,
                                         std::uint64_t seed) {
  if (opt.repetitions < 5) throw ContractError("benchmark needs at least 5 repetitions");
  if (opt.warmup < 0) throw ContractError("warmup must be >= 0");
  if (opt.n_grid.empty()) throw ContractError("benchmark needs a nonempty n grid");

  std::vector<RuntimeSample> samples;
  for (int n : opt.n_grid) {
    ModelConfig cfg;
    cfg.d = opt.d;
    cfg.n = n;
    cfg.n_h = opt.n_h;
    cfg.n_b = opt.n_b;
    cfg.validate();
    SequenceModel model(kind, cfg, /*catalog_size=*/n + 1, /*user_count=*/1, seed);

    Rng rng = make_rng(seed, "bench-window");
    FixedSequence fs;
    fs.pad_count = 0;
    fs.b.resize(static_cast<std::size_t>(n));
    for (auto& vid : fs.b) {
      vid = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    }

    for (int w = 0; w < opt.warmup; ++w) {
      Graph g;
      model.forward(g, fs);
    }
    std::vector<double> times_us;
    times_us.reserve(static_cast<std::size_t>(opt.repetitions));
    for (int r = 0; r < opt.repetitions; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      Graph g;
      model.forward(g, fs);
      auto t1 = std::chrono::steady_clock::now();
      times_us.push_back(
          std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count() / 1000.0);
    }
    std::sort(times_us.begin(), times_us.end());
    std::size_t reps = times_us.size();
    double median = reps % 2 == 1
                        ? times_us[reps / 2]
                        : 0.5 * (times_us[reps / 2 - 1] + times_us[reps / 2]);
    std::size_t p95_idx =
        static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(reps))) - 1;

    RuntimeSample sample;
    sample.kind = to_string(kind);
    sample.n = n;
    sample.d = opt.d;
    sample.n_b = opt.n_b;
    sample.repetitions = opt.repetitions;
    sample.median_us = median;
    sample.p95_us = times_us[p95_idx];
    sample.below_timer_resolution = median < 1.0;
    samples.push_back(std::move(sample));
  }
  return samples;
}

double log_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DimensionError("slope fit needs equal-length series");
  if (xs.size() < 2) throw ContractError("slope fit needs at least 2 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] <= 0 || ys[i] <= 0) throw DomainError("log-log fit needs positive values");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
  }
  double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
  double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  if (den == 0) throw DomainError("log-log fit needs at least two distinct x values");
  return num / den;
}

nlohmann::json smoothing_to_json(const SmoothingProfile& profile) {
  nlohmann::json doc;
  doc["format"] = "starseq-smoothing";
  doc["a"] = profile.a;
  doc["users"] = profile.users;
  doc["zero_norm_pairs"] = profile.zero_norm_pairs;
  doc["include_diagonal"] = profile.include_diagonal;
  return doc;
}

nlohmann::json entropy_to_json(const EntropyReport& report) {
  nlohmann::json doc;
  doc["format"] = "starseq-entropy";
  doc["mean_attention_entropy_nats"] = report.attention_nats;
  doc["mean_uniform_entropy_nats"] = report.uniform_nats;
  doc["information_gain_nats"] = report.gain_nats;
  doc["mean_attention_entropy_bits"] = report.attention_bits;
  doc["mean_uniform_entropy_bits"] = report.uniform_bits;
  doc["information_gain_bits"] = report.gain_bits;
  doc["positions"] = report.positions;
  doc["users"] = report.users;
  return doc;
}

nlohmann::json op_counts_to_json(const OpCounts& counts, std::int64_t n, std::int64_t d) {
  nlohmann::json doc;
  doc["format"] = "starseq-ops";
  doc["n"] = n;
  doc["d"] = d;
  doc["sa"] = counts.sa;
  doc["star"] = counts.star;
  doc["diff"] = counts.diff;
  return doc;
}

nlohmann::json runtime_to_json(const std::vector<RuntimeSample>& samples) {
  nlohmann::json doc;
  doc["format"] = "starseq-runtime";
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) {
    rows.push_back({{"kind", s.kind},
                    {"n", s.n},
                    {"d", s.d},
                    {"n_b", s.n_b},
                    {"repetitions", s.repetitions},
                    {"median_us", s.median_us},
                    {"p95_us", s.p95_us},
                    {"below_timer_resolution", s.below_timer_resolution}});
  }
  doc["samples"] = rows;
  return doc;
}

void runtime_to_csv(const std::vector<RuntimeSample>& samples, std::ostream& out) {
  out << "kind,n,d,n_b,median_us,p95_us\n";
  char buf[64];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f", s.median_us, s.p95_us);
    out << s.kind << ',' << s.n << ',' << s.d << ',' << s.n_b << ',' << buf << "\n";
  }
}

}  // namespace starseq
