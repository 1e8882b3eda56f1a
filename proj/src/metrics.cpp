#include "starseq/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace starseq {

namespace {

int rank_in_list(const std::vector<int>& ranked, int target) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i] == target) return static_cast<int>(i) + 1;
  }
  throw ContractError("target " + std::to_string(target) +
                      " absent from the candidate list");
}

}  // namespace

double recall_at_k(const std::vector<int>& ranked, int target, int k) {
  if (k < 1) throw ContractError("k must be >= 1");
  return rank_in_list(ranked, target) <= k ? 1.0 : 0.0;
}

double ndcg_at_k(const std::vector<int>& ranked, int target, int k) {
  if (k < 1) throw ContractError("k must be >= 1");
  int rank = rank_in_list(ranked, target);
  if (rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

int rank_of_target(const Vector& scores, const std::vector<char>& excluded, int target) {
  if (static_cast<Index>(excluded.size()) != scores.size()) {
    throw DimensionError("exclusion mask length != score count");
  }
  if (target < 1 || target >= scores.size()) {
    throw IndexError("target vid " + std::to_string(target) + " out of range");
  }
  if (excluded[static_cast<std::size_t>(target)]) {
    throw ContractError("target vid " + std::to_string(target) +
                        " is excluded from the candidate set");
  }
  Real st = scores[target];
  int rank = 1;
  for (Index v = 1; v < scores.size(); ++v) {
    if (excluded[static_cast<std::size_t>(v)] || v == target) continue;
    if (scores[v] > st || (scores[v] == st && v < target)) ++rank;
  }
  return rank;
}

MetricReport evaluate(SequenceModel& model, const Dataset& ds, const Split& split,
                      EvalMode mode, const EvalOptions& opt) {
  if (opt.ks.empty()) throw ConfigError("evaluation needs at least one k");
  for (int k : opt.ks) {
    if (k < 1) throw ConfigError("evaluation k must be >= 1");
  }
  std::size_t n_users = split.user_count();
  if (n_users == 0) throw ContractError("evaluation over an empty split");

  std::vector<int> ranks(n_users, 0);
  parallel_for(n_users, [&](std::size_t i) {
    int uid = split.uids[i];
    std::vector<int> input = split.train[i];
    int target;
    if (mode == EvalMode::Val) {
      target = split.val_target[i];
    } else {
      input.push_back(split.val_target[i]);
      target = split.test_target[i];
    }

    Graph g;
    ForwardTrace trace = model.forward(g, to_fixed_length(input, model.cfg.n));
    Vector scores = score_catalog(model, trace.c.back(), uid);

    std::vector<char> excluded(static_cast<std::size_t>(ds.catalog_size()), 0);
    excluded[0] = 1;  // padding item is never a candidate
    for (int v : input) excluded[static_cast<std::size_t>(v)] = 1;
    if (opt.candidate_samples > 0) {
      // Sampled mode: keep only the target plus a per-user deterministic
      // sample of eligible items; everything else is excluded.
      std::vector<int> eligible;
      for (int v = 1; v < ds.catalog_size(); ++v) {
        if (!excluded[static_cast<std::size_t>(v)] && v != target) eligible.push_back(v);
      }
      Rng rng = make_rng(opt.seed, "eval-sample/" + std::to_string(uid));
      shuffle_in_place(eligible, rng);
      std::size_t keep = std::min<std::size_t>(eligible.size(),
                                               static_cast<std::size_t>(opt.candidate_samples));
      std::vector<char> sampled_excluded(excluded.size(), 1);
      sampled_excluded[static_cast<std::size_t>(target)] = 0;
      for (std::size_t j = 0; j < keep; ++j) {
        sampled_excluded[static_cast<std::size_t>(eligible[j])] = 0;
      }
      sampled_excluded[0] = 1;
      excluded.swap(sampled_excluded);
    }
    ranks[i] = rank_of_target(scores, excluded, target);
  });

  MetricReport report;
  report.mode = to_string(mode);
  report.ks = opt.ks;
  report.users = n_users;
  auto mean_over = [&](const std::vector<int>& members, int k, bool ndcg) {
    double total = 0;
    for (int i : members) {
      int rank = ranks[static_cast<std::size_t>(i)];
      if (rank <= k) total += ndcg ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 1.0;
    }
    return total / static_cast<double>(members.size());
  };
  std::vector<int> everyone(n_users);
  for (std::size_t i = 0; i < n_users; ++i) everyone[i] = static_cast<int>(i);
  for (int k : opt.ks) {
    report.recall.push_back(mean_over(everyone, k, false));
    report.ndcg.push_back(mean_over(everyone, k, true));
  }
  if (opt.with_buckets && n_users >= 10) {
    for (const Bucket& bucket : activity_buckets(split)) {
      BucketStats bs;
      bs.name = bucket.name;
      bs.users = bucket.members.size();
      for (int k : opt.ks) {
        bs.recall.push_back(mean_over(bucket.members, k, false));
        bs.ndcg.push_back(mean_over(bucket.members, k, true));
      }
      report.buckets.push_back(std::move(bs));
    }
  }
  return report;
}

nlohmann::json metric_report_to_json(const MetricReport& report) {
  nlohmann::json doc;
  doc["format"] = "starseq-metrics";
  doc["mode"] = report.mode;
  doc["users"] = report.users;
  doc["ks"] = report.ks;
  nlohmann::json overall = nlohmann::json::object();
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    std::string k = std::to_string(report.ks[i]);
    overall["recall@" + k] = report.recall[i];
    overall["ndcg@" + k] = report.ndcg[i];
  }
  doc["overall"] = overall;
  nlohmann::json buckets = nlohmann::json::object();
  for (const auto& bs : report.buckets) {
    nlohmann::json entry;
    entry["users"] = bs.users;
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
      std::string k = std::to_string(report.ks[i]);
      entry["recall@" + k] = bs.recall[i];
      entry["ndcg@" + k] = bs.ndcg[i];
    }
    buckets[bs.name] = entry;
  }
  doc["buckets"] = buckets;
  return doc;
}

}  // namespace starseq
