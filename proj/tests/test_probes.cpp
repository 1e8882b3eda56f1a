// Analysis probes: representation-similarity profile against rigged geometry
// and a scalar reimplementation, attention entropy against closed-form
// uniform/one-hot cases, operation-count formulas, and the runtime benchmark
// plumbing.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "starseq/probes.hpp"

using namespace starseq;

namespace {

Split make_split(std::vector<std::vector<int>> train, std::vector<int> val,
                 std::vector<int> test) {
  Split sp;
  for (std::size_t i = 0; i < train.size(); ++i) sp.uids.push_back(static_cast<int>(i));
  sp.train = std::move(train);
  sp.val_target = std::move(val);
  sp.test_target = std::move(test);
  return sp;
}

// Star model whose item rows are exactly the chosen V rows: positions zeroed,
// so trace geometry is fully controlled by the item table.
SequenceModel rigged_star(int d, int n, int n_b, int catalog) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  cfg.n_h = 1;
  cfg.n_b = n_b;
  SequenceModel model(ModelKind::Star, cfg, catalog, 1, 0);
  model.tables.P.value.setZero();
  return model;
}

SequenceModel random_model(ModelKind kind, int d, int n, int n_h, int n_b,
                           int catalog, int users, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.n = n;
  cfg.n_h = n_h;
  cfg.n_b = n_b;
  return SequenceModel(kind, cfg, catalog, users, seed);
}

// Scalar reimplementation of the similarity profile over every user, with
// norms and dots accumulated by hand.
std::vector<double> oracle_smoothing(SequenceModel& model, const Split& split,
                                     bool include_diagonal) {
  int n_b = model.cfg.n_b;
  std::vector<double> acc(static_cast<std::size_t>(n_b), 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < split.user_count(); ++i) {
    std::vector<int> input = split.train[i];
    input.push_back(split.val_target[i]);
    Graph g;
    auto trace = model.forward(g, to_fixed_length(input, model.cfg.n));
    std::vector<int> rows;
    for (std::size_t t = 0; t < trace.real.size(); ++t) {
      if (trace.real[t]) rows.push_back(static_cast<int>(t));
    }
    if (!include_diagonal && rows.size() < 2) continue;
    ++used;
    for (int m = 1; m <= n_b; ++m) {
      const Matrix& S = trace.item_states[static_cast<std::size_t>(m)];
      double total = 0;
      int pairs = 0;
      for (int j : rows) {
        for (int k : rows) {
          if (!include_diagonal && j == k) continue;
          ++pairs;
          double dot = 0, nj = 0, nk = 0;
          for (int c = 0; c < model.cfg.d; ++c) {
            dot += S(j, c) * S(k, c);
            nj += S(j, c) * S(j, c);
            nk += S(k, c) * S(k, c);
          }
          if (nj == 0 || nk == 0) continue;
          total += dot / (std::sqrt(nj) * std::sqrt(nk));
        }
      }
      acc[static_cast<std::size_t>(m - 1)] += total / pairs;
    }
  }
  for (double& a : acc) a /= static_cast<double>(used);
  return acc;
}

}  // namespace

TEST_CASE("smoothing: identical item rows give similarity exactly 1") {
  auto model = rigged_star(4, 4, 2, 5);
  for (int v = 1; v < 5; ++v) {
    model.tables.V.value.row(v) << 1, 2, 3, 4;
  }
  auto split = make_split({{1, 2}}, {3}, {4});
  auto profile = smoothing_profile(model, split, 0, 0);
  REQUIRE(profile.a.size() == 2);
  CHECK(profile.a[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(profile.a[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(profile.users == 1);
  CHECK(profile.zero_norm_pairs == 0);
}

TEST_CASE("smoothing: two orthogonal rows give 0.5 with the diagonal, 0 without") {
  auto model = rigged_star(4, 4, 1, 5);
  model.tables.V.value.setZero();
  model.tables.V.value(1, 0) = 3.0;   // item 1 along axis 0
  model.tables.V.value(2, 1) = -2.0;  // item 2 along axis 1
  auto split = make_split({{1}}, {2}, {3});

  auto with_diag = smoothing_profile(model, split, 0, 0, /*include_diagonal=*/true);
  CHECK(with_diag.a[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(with_diag.include_diagonal);

  auto off_diag = smoothing_profile(model, split, 0, 0, /*include_diagonal=*/false);
  CHECK(off_diag.a[0] == 0.0);
  CHECK_FALSE(off_diag.include_diagonal);
}

TEST_CASE("smoothing: zero-norm rows count as zero-similarity pairs") {
  auto model = rigged_star(4, 4, 2, 5);
  model.tables.V.value.setZero();
  model.tables.V.value(1, 0) = 1.0;
  // item 2 keeps an all-zero embedding row
  auto split = make_split({{1}}, {2}, {3});
  auto profile = smoothing_profile(model, split, 0, 0);
  // Pairs per block: (1,1) contributes 1, the three involving the zero row
  // contribute 0 and are tallied. Two blocks double the tally.
  CHECK(profile.a[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(profile.a[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(profile.zero_norm_pairs == 6);
}

TEST_CASE("smoothing: star profiles are constant across blocks by construction") {
  auto model = random_model(ModelKind::Star, 8, 6, 2, 6, 12, 4, 77);
  auto split = make_split({{1, 4, 7}, {2, 3}, {5, 6, 8, 9}, {10, 11}},
                          {2, 4, 1, 3}, {3, 5, 2, 4});
  auto profile = smoothing_profile(model, split, 0, 0);
  REQUIRE(profile.a.size() == 6);
  for (std::size_t m = 1; m < profile.a.size(); ++m) {
    CHECK(profile.a[m] == profile.a[0]);  // bitwise: same rows, same arithmetic
  }
  CHECK(profile.users == 4);
}

TEST_CASE("smoothing matches the scalar reimplementation on random models") {
  auto split = make_split({{1, 4, 7}, {2, 3}, {5, 6, 8, 9}, {10, 11}},
                          {2, 4, 1, 3}, {3, 5, 2, 4});
  for (ModelKind kind : {ModelKind::Star, ModelKind::Baseline}) {
    auto model = random_model(kind, 8, 6, 2, 3, 12, 4, 123);
    auto profile = smoothing_profile(model, split, 0, 0);
    auto expect = oracle_smoothing(model, split, true);
    REQUIRE(profile.a.size() == expect.size());
    for (std::size_t m = 0; m < expect.size(); ++m) {
      INFO(to_string(kind), " block ", m);
      CHECK(std::abs(profile.a[m] - expect[m]) < 1e-10);
    }
    auto off = smoothing_profile(model, split, 0, 0, false);
    auto off_expect = oracle_smoothing(model, split, false);
    for (std::size_t m = 0; m < off_expect.size(); ++m) {
      CHECK(std::abs(off.a[m] - off_expect[m]) < 1e-10);
    }
  }
}

TEST_CASE("smoothing: subsampling users is deterministic in the seed") {
  auto model = random_model(ModelKind::Baseline, 8, 6, 2, 2, 12, 6, 5);
  auto split = make_split({{1, 4}, {2, 3}, {5, 6}, {7, 8}, {9, 10}, {11, 1}},
                          {2, 4, 1, 3, 5, 6}, {3, 5, 2, 4, 6, 7});
  auto p1 = smoothing_profile(model, split, 3, 99);
  auto p2 = smoothing_profile(model, split, 3, 99);
  REQUIRE(p1.users == 3);
  CHECK(p1.a == p2.a);
  // Sample size at or above the population means every user.
  auto all = smoothing_profile(model, split, 6, 99);
  CHECK(all.users == 6);
}

TEST_CASE("smoothing: degenerate inputs raise probe errors") {
  auto model = rigged_star(4, 4, 1, 5);
  Split empty;
  CHECK_THROWS_AS(smoothing_profile(model, empty, 0, 0), ProbeError);
  // One real item per user leaves no off-diagonal pairs anywhere.
  auto split = make_split({{}}, {1}, {2});
  CHECK_THROWS_AS(smoothing_profile(model, split, 0, 0, false), ProbeError);
  CHECK_NOTHROW(smoothing_profile(model, split, 0, 0, true));
}

TEST_CASE("entropy: refuses the star model") {
  auto model = random_model(ModelKind::Star, 4, 4, 1, 1, 5, 1, 3);
  auto split = make_split({{1}}, {2}, {3});
  CHECK_THROWS_AS(attention_entropy(model, split, 0, 0), ProbeError);
}

TEST_CASE("entropy: zero weights mean uniform attention and zero gain") {
  auto model = random_model(ModelKind::Baseline, 4, 6, 2, 1, 8, 1, 9);
  model.visit_params([](const std::string& name, Tensor& t) {
    if (name.rfind("block", 0) == 0) t.value.setZero();
  });
  auto split = make_split({{1, 2, 3}}, {4}, {5});  // 4 real items, 2 pad slots
  auto report = attention_entropy(model, split, 0, 0);
  REQUIRE(report.positions == 4);
  double expect_uniform =
      (std::log(1.0) + std::log(2.0) + std::log(3.0) + std::log(4.0)) / 4.0;
  CHECK(report.uniform_nats == doctest::Approx(expect_uniform).epsilon(1e-12));
  CHECK(std::abs(report.attention_nats - report.uniform_nats) < 1e-12);
  CHECK(std::abs(report.gain_nats) < 1e-12);
  CHECK(report.gain_bits == doctest::Approx(report.gain_nats / std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("entropy: near-one-hot attention captures the full uniform gain") {
  // Orthogonal high-magnitude item rows with identity-scaled projections make
  // each position attend almost exclusively to itself.
  auto model = random_model(ModelKind::Baseline, 4, 4, 1, 1, 5, 1, 9);
  model.visit_params([](const std::string& name, Tensor& t) {
    if (name.rfind("block", 0) == 0) t.value.setZero();
  });
  model.blocks[0].Q[0].value = Matrix::Identity(4, 4) * 10.0;
  model.blocks[0].Z[0].value = Matrix::Identity(4, 4) * 10.0;
  model.tables.P.value.setZero();
  model.tables.V.value.setZero();
  for (int v = 1; v < 5; ++v) model.tables.V.value(v, v - 1) = 100.0;
  auto split = make_split({{1, 2, 3}}, {4}, {1});
  auto report = attention_entropy(model, split, 0, 0);
  CHECK(report.attention_nats < 1e-12);
  CHECK(std::abs(report.gain_nats - report.uniform_nats) < 1e-12);
}

TEST_CASE("entropy matches a scalar recomputation and gain is non-negative") {
  auto model = random_model(ModelKind::Baseline, 8, 6, 2, 2, 12, 4, 31);
  auto split = make_split({{1, 4, 7}, {2, 3}, {5, 6, 8, 9}, {10, 11}},
                          {2, 4, 1, 3}, {3, 5, 2, 4});
  auto report = attention_entropy(model, split, 0, 0);

  double att_total = 0, uni_total = 0;
  std::size_t positions = 0;
  for (std::size_t i = 0; i < split.user_count(); ++i) {
    std::vector<int> input = split.train[i];
    input.push_back(split.val_target[i]);
    Graph g;
    auto trace = model.forward(g, to_fixed_length(input, model.cfg.n));
    int pad = 0;
    while (pad < 6 && !trace.real[static_cast<std::size_t>(pad)]) ++pad;
    const auto& heads = trace.alpha[0];
    for (int j = pad; j < 6; ++j) {
      double entropy = 0;
      for (int k = 0; k <= j; ++k) {
        double p = 0;
        for (const auto& h : heads) p += h(j, k);
        p /= static_cast<double>(heads.size());
        if (p > 0) entropy -= p * std::log(p);
      }
      att_total += entropy;
      uni_total += std::log(static_cast<double>(j + 1 - pad));
      ++positions;
    }
  }
  REQUIRE(report.positions == positions);
  CHECK(std::abs(report.attention_nats - att_total / positions) < 1e-12);
  CHECK(std::abs(report.uniform_nats - uni_total / positions) < 1e-12);
  CHECK(report.gain_nats >= -1e-12);  // uniform maximizes entropy per support
}

TEST_CASE("op counts: printed anchors at n=2, d=1") {
  auto c = op_counts(2, 1);
  CHECK(c.sa == 24);
  CHECK(c.star == 14);
  CHECK(c.diff == 10);
}

TEST_CASE("op counts: the gap formula is exactly full minus star") {
  for (std::int64_t n = 1; n <= 10; ++n) {
    for (std::int64_t d = 1; d <= 10; ++d) {
      auto c = op_counts(n, d);
      CHECK(c.sa == c.star + c.diff);  // algebraic identity of the three forms
      CHECK(c.star >= 1);
    }
  }
  CHECK(op_counts(1, 5).diff == 0);  // a single position has no gap
  CHECK_THROWS_AS(op_counts(0, 4), ContractError);
  CHECK_THROWS_AS(op_counts(4, 0), ContractError);
}

TEST_CASE("op counts: full attention grows quadratically in n, star linearly") {
  const std::int64_t d = 64;
  auto lo = op_counts(128, d);
  auto hi = op_counts(256, d);
  // Doubling n at fixed d eventually ~quadruples sa's n^2 term but only
  // ~doubles star. Check the direction with exact integers.
  CHECK(hi.sa - lo.sa > 2 * (hi.star - lo.star));
  CHECK(hi.star < 3 * lo.star);
}

TEST_CASE("log_log_slope: exact on synthetic power laws") {
  std::vector<double> xs = {64, 128, 256, 512};
  std::vector<double> quad, lin, flat;
  for (double x : xs) {
    quad.push_back(3.5 * x * x);
    lin.push_back(0.25 * x);
    flat.push_back(7.0);
  }
  CHECK(log_log_slope(xs, quad) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(log_log_slope(xs, lin) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(log_log_slope(xs, flat)) < 1e-12);
}

TEST_CASE("log_log_slope: domain and contract errors") {
  CHECK_THROWS_AS(log_log_slope({1, 2}, {1}), DimensionError);
  CHECK_THROWS_AS(log_log_slope({1}, {1}), ContractError);
  CHECK_THROWS_AS(log_log_slope({1, -2}, {1, 1}), DomainError);
  CHECK_THROWS_AS(log_log_slope({1, 2}, {0, 1}), DomainError);
  CHECK_THROWS_AS(log_log_slope({3, 3}, {1, 2}), DomainError);  // no x spread
}

TEST_CASE("bench_runtime: sample structure on a tiny grid") {
  BenchOptions opt;
  opt.n_grid = {4, 8};
  opt.d = 8;
  opt.n_h = 2;
  opt.n_b = 1;
  opt.repetitions = 5;
  opt.warmup = 1;
  auto samples = bench_runtime(ModelKind::Star, opt, 1);
  REQUIRE(samples.size() == 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].kind == std::string("star"));
    CHECK(samples[i].n == opt.n_grid[i]);
    CHECK(samples[i].d == 8);
    CHECK(samples[i].repetitions == 5);
    CHECK(samples[i].median_us > 0.0);
    CHECK(samples[i].p95_us >= samples[i].median_us);
  }
}

TEST_CASE("bench_runtime: option validation") {
  BenchOptions opt;
  opt.n_grid = {4};
  opt.d = 8;
  opt.n_h = 2;
  opt.repetitions = 4;
  CHECK_THROWS_AS(bench_runtime(ModelKind::Star, opt, 1), ContractError);
  opt.repetitions = 5;
  opt.warmup = -1;
  CHECK_THROWS_AS(bench_runtime(ModelKind::Star, opt, 1), ContractError);
  opt.warmup = 0;
  opt.n_grid = {};
  CHECK_THROWS_AS(bench_runtime(ModelKind::Star, opt, 1), ContractError);
}

TEST_CASE("probe serializers carry the full payload") {
  SmoothingProfile profile;
  profile.a = {0.25, 0.5};
  profile.users = 7;
  profile.zero_norm_pairs = 2;
  profile.include_diagonal = false;
  auto sdoc = smoothing_to_json(profile);
  CHECK(sdoc["format"] == "starseq-smoothing");
  CHECK(sdoc["a"][1] == 0.5);
  CHECK(sdoc["users"] == 7);
  CHECK(sdoc["include_diagonal"] == false);

  EntropyReport er;
  er.attention_nats = 1.0;
  er.uniform_nats = 1.5;
  er.gain_nats = 0.5;
  er.attention_bits = 1.0 / std::log(2.0);
  er.uniform_bits = 1.5 / std::log(2.0);
  er.gain_bits = 0.5 / std::log(2.0);
  er.positions = 11;
  er.users = 4;
  auto edoc = entropy_to_json(er);
  CHECK(edoc["format"] == "starseq-entropy");
  CHECK(edoc["information_gain_nats"] == 0.5);
  CHECK(edoc["positions"] == 11);

  auto odoc = op_counts_to_json(op_counts(2, 1), 2, 1);
  CHECK(odoc["format"] == "starseq-ops");
  CHECK(odoc["sa"] == 24);
  CHECK(odoc["star"] == 14);
  CHECK(odoc["diff"] == 10);

  RuntimeSample rs;
  rs.kind = "baseline";
  rs.n = 64;
  rs.d = 8;
  rs.n_b = 2;
  rs.repetitions = 9;
  rs.median_us = 123.4567;
  rs.p95_us = 200.0;
  rs.below_timer_resolution = false;
  auto rdoc = runtime_to_json({rs});
  CHECK(rdoc["format"] == "starseq-runtime");
  CHECK(rdoc["samples"][0]["kind"] == "baseline");
  CHECK(rdoc["samples"][0]["n"] == 64);

  std::ostringstream csv;
  runtime_to_csv({rs}, csv);
  CHECK(csv.str() == "kind,n,d,n_b,median_us,p95_us\nbaseline,64,8,2,123.457,200.000\n");
}
