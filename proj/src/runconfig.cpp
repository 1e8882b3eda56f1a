#include "starseq/runconfig.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "starseq/common.hpp"

namespace starseq {
namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& origin, const std::string& key,
                            const std::string& value, const std::string& want) {
  throw ConfigError(origin + ": key '" + key + "': cannot parse '" + value +
                    "' as " + want);
}

std::int64_t parse_int(const std::string& origin, const std::string& key,
                       const std::string& value) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size())
    bad_value(origin, key, value, "an integer");
  return out;
}

std::uint64_t parse_uint(const std::string& origin, const std::string& key,
                         const std::string& value) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size())
    bad_value(origin, key, value, "a non-negative integer");
  return out;
}

double parse_real(const std::string& origin, const std::string& key,
                  const std::string& value) {
  char* end = nullptr;
  double out = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty())
    bad_value(origin, key, value, "a number");
  return out;
}

bool parse_bool(const std::string& origin, const std::string& key,
                const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(origin, key, value, "a boolean");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

std::vector<int> parse_int_list(const std::string& origin, const std::string& key,
                                const std::string& value) {
  std::vector<int> out;
  for (const auto& part : split_list(value))
    out.push_back(static_cast<int>(parse_int(origin, key, part)));
  if (out.empty()) bad_value(origin, key, value, "a comma-separated integer list");
  return out;
}

void apply_kv(RunConfig& cfg, const std::string& origin, const std::string& section,
              const std::string& key, const std::string& value) {
  if (section == "run") {
    if (key == "seed") cfg.seed = parse_uint(origin, key, value);
    else if (key == "out") cfg.out_dir = value;
    else throw ConfigError(origin + ": unknown key '" + key + "' in [run]");
  } else if (section == "data") {
    if (key == "input") cfg.input = value;
    else if (key == "snapshot") cfg.snapshot = value;
    else if (key == "checkpoint") cfg.checkpoint = value;
    else throw ConfigError(origin + ": unknown key '" + key + "' in [data]");
  } else if (section == "prep") {
    if (key == "min_user") cfg.prep.min_user = parse_int(origin, key, value);
    else if (key == "min_item") cfg.prep.min_item = parse_int(origin, key, value);
    else if (key == "rating_threshold")
      cfg.prep.rating_threshold = parse_real(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [prep]");
  } else if (section == "model") {
    if (key == "kind") cfg.model_kind = model_kind_from_string(value);
    else if (key == "d") cfg.model.d = parse_int(origin, key, value);
    else if (key == "n") cfg.model.n = parse_int(origin, key, value);
    else if (key == "n_h") cfg.model.n_h = parse_int(origin, key, value);
    else if (key == "n_b") cfg.model.n_b = parse_int(origin, key, value);
    else if (key == "activation") cfg.model.act = activation_from_string(value);
    else if (key == "use_user_embedding")
      cfg.model.use_user_embedding = parse_bool(origin, key, value);
    else if (key == "conventional_scale")
      cfg.model.conventional_scale = parse_bool(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [model]");
  } else if (section == "train") {
    if (key == "lr") cfg.train.lr = parse_real(origin, key, value);
    else if (key == "beta1") cfg.train.beta1 = parse_real(origin, key, value);
    else if (key == "beta2") cfg.train.beta2 = parse_real(origin, key, value);
    else if (key == "eps") cfg.train.eps = parse_real(origin, key, value);
    else if (key == "batch_size")
      cfg.train.batch_size = static_cast<int>(parse_int(origin, key, value));
    else if (key == "max_epochs")
      cfg.train.max_epochs = static_cast<int>(parse_int(origin, key, value));
    else if (key == "patience")
      cfg.train.patience = static_cast<int>(parse_int(origin, key, value));
    else if (key == "all_prefixes")
      cfg.train.all_prefixes = parse_bool(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [train]");
  } else if (section == "eval") {
    if (key == "ks") cfg.eval.ks = parse_int_list(origin, key, value);
    else if (key == "mode") cfg.eval_mode = eval_mode_from_string(value);
    else if (key == "candidate_samples")
      cfg.eval.candidate_samples = static_cast<int>(parse_uint(origin, key, value));
    else if (key == "with_buckets")
      cfg.eval.with_buckets = parse_bool(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [eval]");
  } else if (section == "probe") {
    if (key == "samples")
      cfg.probe_samples = static_cast<std::size_t>(parse_uint(origin, key, value));
    else if (key == "include_diagonal")
      cfg.probe_include_diagonal = parse_bool(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [probe]");
  } else if (section == "bench") {
    if (key == "grid") {
      cfg.bench.n_grid = parse_int_list(origin, key, value);
    } else if (key == "d") cfg.bench.d = static_cast<int>(parse_int(origin, key, value));
    else if (key == "n_h") cfg.bench.n_h = static_cast<int>(parse_int(origin, key, value));
    else if (key == "n_b") cfg.bench.n_b = static_cast<int>(parse_int(origin, key, value));
    else if (key == "repetitions")
      cfg.bench.repetitions = static_cast<int>(parse_int(origin, key, value));
    else if (key == "warmup")
      cfg.bench.warmup = static_cast<int>(parse_int(origin, key, value));
    else if (key == "ops_n") cfg.ops_n = parse_int(origin, key, value);
    else if (key == "ops_d") cfg.ops_d = parse_int(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [bench]");
  } else if (section == "synth") {
    if (key == "users") cfg.synth.users = parse_int(origin, key, value);
    else if (key == "items") cfg.synth.items = parse_int(origin, key, value);
    else if (key == "steps") cfg.synth.steps = parse_int(origin, key, value);
    else throw ConfigError(origin + ": unknown key '" + key + "' in [synth]");
  } else {
    throw ConfigError(origin + ": unknown section [" + section + "]");
  }
}

}  // namespace

void apply_ini(RunConfig& cfg, std::istream& in, const std::string& origin) {
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto where = origin + ":" + std::to_string(lineno);
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError(where + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
    if (section.empty())
      throw ConfigError(where + ": key before any [section] header");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    apply_kv(cfg, where, section, key, value);
  }
}

void apply_ini_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  apply_ini(cfg, in, path);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["run"] = {{"seed", seed}, {"out", out_dir}};
  j["data"] = {{"input", input}, {"snapshot", snapshot}, {"checkpoint", checkpoint}};
  j["prep"] = {{"min_user", prep.min_user},
               {"min_item", prep.min_item},
               {"rating_threshold", prep.rating_threshold}};
  j["model"] = {{"kind", to_string(model_kind)},
                {"d", model.d},
                {"n", model.n},
                {"n_h", model.n_h},
                {"n_b", model.n_b},
                {"activation", to_string(model.act)},
                {"use_user_embedding", model.use_user_embedding},
                {"conventional_scale", model.conventional_scale}};
  j["train"] = {{"lr", train.lr},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"eps", train.eps},
                {"batch_size", train.batch_size},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience},
                {"all_prefixes", train.all_prefixes}};
  j["eval"] = {{"ks", eval.ks},
               {"mode", to_string(eval_mode)},
               {"candidate_samples", eval.candidate_samples},
               {"with_buckets", eval.with_buckets}};
  j["probe"] = {{"samples", probe_samples},
                {"include_diagonal", probe_include_diagonal}};
  j["bench"] = {{"grid", bench.n_grid},
                {"d", bench.d},
                {"n_h", bench.n_h},
                {"n_b", bench.n_b},
                {"repetitions", bench.repetitions},
                {"warmup", bench.warmup},
                {"ops_n", ops_n},
                {"ops_d", ops_d}};
  j["synth"] = {{"users", synth.users}, {"items", synth.items}, {"steps", synth.steps}};
  return j;
}

std::uint64_t RunConfig::config_hash() const { return fnv1a64(to_json().dump()); }

}  // namespace starseq
