#pragma once

// Top-k ranking metrics and the leave-one-out evaluation loop, overall and
// stratified by user-activity bucket.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "starseq/data.hpp"
#include "starseq/model.hpp"

namespace starseq {

// Single-ground-truth metrics over a ranked candidate list (best first).
// The target must appear somewhere in the list.
double recall_at_k(const std::vector<int>& ranked, int target, int k);
double ndcg_at_k(const std::vector<int>& ranked, int target, int k);

enum class EvalMode { Val, Test };

inline const char* to_string(EvalMode m) { return m == EvalMode::Val ? "val" : "test"; }

inline EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "val") return EvalMode::Val;
  if (s == "test") return EvalMode::Test;
  throw ConfigError("unknown evaluation mode: " + s + " (expected val|test)");
}

struct EvalOptions {
  std::vector<int> ks = {10, 20};
  bool with_buckets = true;     // requires >= 10 users; skipped otherwise
  int candidate_samples = 0;    // 0 = rank the full catalog; > 0 = sampled mode
  std::uint64_t seed = 0;       // drives sampled-candidate draws
};

struct BucketStats {
  std::string name;
  std::size_t users = 0;
  std::vector<double> recall, ndcg;  // aligned with ks
};

struct MetricReport {
  std::string mode;
  std::vector<int> ks;
  std::size_t users = 0;
  std::vector<double> recall, ndcg;  // aligned with ks
  std::vector<BucketStats> buckets;
};

// For each retained user, feeds the train sequence (plus the validation item
// in test mode) through the model and ranks every catalog item except v0 and
// the items already consumed as input context; ties rank by ascending vid.
MetricReport evaluate(SequenceModel& model, const Dataset& ds, const Split& split,
                      EvalMode mode, const EvalOptions& opt);

nlohmann::json metric_report_to_json(const MetricReport& report);

// The rank the evaluation assigns: 1 + number of candidates scoring strictly
// higher, plus equal-scoring candidates with a smaller vid. Exposed for the
// ranked-list consistency tests.
int rank_of_target(const Vector& scores, const std::vector<char>& excluded, int target);

}  // namespace starseq
