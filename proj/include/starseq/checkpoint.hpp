#pragma once

// Self-describing JSON checkpoint: model kind + config, every parameter
// tensor, and the provenance needed to trace it back to its inputs (seed and
// the hash of the dataset snapshot it was trained against). Values are stored
// as hex-encoded IEEE-754 bit patterns, so save/load round-trips bit-exactly.

#include <cstdint>
#include <string>
#include <utility>

#include <json.hpp>

#include "starseq/model.hpp"

namespace starseq {

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string data_hash;             // hex of the snapshot hash
  int best_epoch = -1;               // -1 when the model was never trained
  double best_val_recall10 = -1.0;
  nlohmann::json config_echo;        // effective run configuration, may be null
};

nlohmann::json checkpoint_to_json(SequenceModel& model, const CheckpointMeta& meta);
std::pair<SequenceModel, CheckpointMeta> checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(SequenceModel& model, const CheckpointMeta& meta,
                     const std::string& path);
std::pair<SequenceModel, CheckpointMeta> load_checkpoint(const std::string& path);

// Hex round-trip helpers for IEEE-754 doubles (shared with metric reports).
std::string double_to_hex(double v);
double double_from_hex(const std::string& hex);

}  // namespace starseq
