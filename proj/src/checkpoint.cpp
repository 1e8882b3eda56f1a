#include "starseq/checkpoint.hpp"

#include <bit>
#include <fstream>

namespace starseq {

std::string double_to_hex(double v) {
  return to_hex(std::bit_cast<std::uint64_t>(v));
}

double double_from_hex(const std::string& hex) {
  if (hex.size() != 16) throw IoError("bad double encoding '" + hex + "'");
  std::uint64_t bits = 0;
  for (char c : hex) {
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else throw IoError("bad double encoding '" + hex + "'");
    bits = (bits << 4) | static_cast<std::uint64_t>(digit);
  }
  return std::bit_cast<double>(bits);
}

namespace {

std::string encode_tensor(const Tensor& t) {
  std::string out;
  out.reserve(static_cast<std::size_t>(t.size()) * 16);
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c) {
      out += double_to_hex(static_cast<double>(t.value(r, c)));
    }
  }
  return out;
}

void decode_tensor(const std::string& bits, Tensor& t) {
  if (bits.size() != static_cast<std::size_t>(t.size()) * 16) {
    throw IoError("checkpoint tensor payload has wrong length");
  }
  std::size_t at = 0;
  for (Index r = 0; r < t.rows(); ++r) {
    for (Index c = 0; c < t.cols(); ++c, at += 16) {
      t.value(r, c) = static_cast<Real>(double_from_hex(bits.substr(at, 16)));
    }
  }
}

}  // namespace

nlohmann::json checkpoint_to_json(SequenceModel& model, const CheckpointMeta& meta) {
  nlohmann::json doc;
  doc["format"] = "starseq-checkpoint";
  doc["version"] = 1;
  doc["build"] = kBuildId;
  doc["kind"] = to_string(model.kind);
  doc["model"] = {{"d", model.cfg.d},
                  {"n", model.cfg.n},
                  {"n_h", model.cfg.n_h},
                  {"n_b", model.cfg.n_b},
                  {"activation", to_string(model.cfg.act)},
                  {"use_user_embedding", model.cfg.use_user_embedding},
                  {"conventional_scale", model.cfg.conventional_scale}};
  doc["catalog_size"] = model.catalog_size();
  doc["user_count"] = model.user_count();
  doc["seed"] = meta.seed;
  doc["data_hash"] = meta.data_hash;
  doc["best_epoch"] = meta.best_epoch;
  doc["best_val_recall10_bits"] = double_to_hex(meta.best_val_recall10);
  doc["config"] = meta.config_echo;
  nlohmann::json params = nlohmann::json::object();
  model.visit_params([&params](const std::string& name, Tensor& t) {
    params[name] = {{"rows", t.rows()}, {"cols", t.cols()}, {"bits", encode_tensor(t)}};
  });
  doc["params"] = params;
  return doc;
}

std::pair<SequenceModel, CheckpointMeta> checkpoint_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "starseq-checkpoint" || doc.value("version", 0) != 1) {
    throw IoError("not a supported checkpoint document");
  }
  ModelConfig cfg;
  const auto& mc = doc.at("model");
  cfg.d = mc.at("d").get<int>();
  cfg.n = mc.at("n").get<int>();
  cfg.n_h = mc.at("n_h").get<int>();
  cfg.n_b = mc.at("n_b").get<int>();
  cfg.act = activation_from_string(mc.at("activation").get<std::string>());
  cfg.use_user_embedding = mc.at("use_user_embedding").get<bool>();
  cfg.conventional_scale = mc.at("conventional_scale").get<bool>();
  ModelKind kind = model_kind_from_string(doc.at("kind").get<std::string>());
  SequenceModel model(kind, cfg, doc.at("catalog_size").get<int>(),
                      doc.at("user_count").get<int>(), /*seed=*/0);
  const auto& params = doc.at("params");
  model.visit_params([&params](const std::string& name, Tensor& t) {
    const auto& entry = params.at(name);
    if (entry.at("rows").get<Index>() != t.rows() ||
        entry.at("cols").get<Index>() != t.cols()) {
      throw IoError("checkpoint parameter '" + name + "' has unexpected shape");
    }
    decode_tensor(entry.at("bits").get<std::string>(), t);
  });
  CheckpointMeta meta;
  meta.seed = doc.at("seed").get<std::uint64_t>();
  meta.data_hash = doc.at("data_hash").get<std::string>();
  meta.best_epoch = doc.at("best_epoch").get<int>();
  meta.best_val_recall10 = double_from_hex(doc.at("best_val_recall10_bits").get<std::string>());
  meta.config_echo = doc.value("config", nlohmann::json());
  return {std::move(model), std::move(meta)};
}

void save_checkpoint(SequenceModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << checkpoint_to_json(model, meta).dump(2) << "\n";
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::pair<SequenceModel, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse checkpoint '" + path + "': " + e.what());
  }
  try {
    return checkpoint_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace starseq
