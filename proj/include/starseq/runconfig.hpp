#pragma once

// Merged view of config-file values and flag overrides. The file format is
// line-oriented `[section]` headers with `key = value` pairs; every field has
// a default, and the effective configuration is echoed verbatim into every
// output artifact together with its hash.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "starseq/data.hpp"
#include "starseq/metrics.hpp"
#include "starseq/model.hpp"
#include "starseq/probes.hpp"
#include "starseq/train.hpp"

namespace starseq {

struct RunConfig {
  // [run]
  std::uint64_t seed = 42;
  std::string out_dir = "artifacts";

  // [data]
  std::string input;       // raw TSV (prep)
  std::string snapshot;    // dataset snapshot; defaults to <out>/dataset.snapshot
  std::string checkpoint;  // model checkpoint; defaults to <out>/checkpoint.json

  // [prep]
  PrepOptions prep;

  // [model]
  ModelKind model_kind = ModelKind::Star;
  ModelConfig model;

  // [train]
  TrainConfig train;

  // [eval]
  EvalMode eval_mode = EvalMode::Val;
  EvalOptions eval;

  // [probe]
  std::size_t probe_samples = 0;  // 0 = all users
  bool probe_include_diagonal = true;

  // [bench]
  BenchOptions bench;
  std::int64_t ops_n = 2;
  std::int64_t ops_d = 1;

  // [synth]
  SynthOptions synth;

  std::string snapshot_path() const {
    return snapshot.empty() ? out_dir + "/dataset.snapshot" : snapshot;
  }
  std::string checkpoint_path() const {
    return checkpoint.empty() ? out_dir + "/checkpoint.json" : checkpoint;
  }

  nlohmann::json to_json() const;
  std::uint64_t config_hash() const;  // FNV-1a of the canonical JSON echo
};

// Applies `[section] key = value` lines onto cfg; unknown sections or keys
// are configuration errors.
void apply_ini(RunConfig& cfg, std::istream& in, const std::string& origin);
void apply_ini_file(RunConfig& cfg, const std::string& path);

}  // namespace starseq
