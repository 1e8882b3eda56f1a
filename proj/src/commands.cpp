#include "starseq/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "starseq/checkpoint.hpp"
#include "starseq/common.hpp"
#include "starseq/data.hpp"
#include "starseq/metrics.hpp"
#include "starseq/model.hpp"
#include "starseq/probes.hpp"
#include "starseq/train.hpp"

namespace starseq {
namespace {

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void ensure_parent(const std::string& path) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
}

void write_text(const std::string& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

nlohmann::json base_manifest(const RunConfig& cfg, const std::string& command,
                             const std::string& artifact) {
  nlohmann::json j;
  j["format"] = "starseq-manifest";
  j["version"] = 1;
  j["build"] = kBuildId;
  j["command"] = command;
  j["artifact"] = artifact;
  j["seed"] = cfg.seed;
  j["config_hash"] = to_hex(cfg.config_hash());
  j["config"] = cfg.to_json();
  return j;
}

void write_manifest(const RunConfig& cfg, const std::string& name,
                    const nlohmann::json& j) {
  ensure_dir(cfg.out_dir);
  write_text(cfg.out_dir + "/" + name + ".manifest.json", j.dump(2) + "\n");
}

void announce(const std::string& path) { std::cout << "wrote " << path << "\n"; }

}  // namespace

int cmd_synth(const RunConfig& cfg) {
  auto log = synth_log(cfg.synth, cfg.seed);
  const std::string path = cfg.out_dir + "/synthetic.tsv";
  ensure_parent(path);
  write_tsv(log, path);
  auto j = base_manifest(cfg, "synth", path);
  j["stats"] = {{"records", log.records.size()},
                {"users", cfg.synth.users},
                {"items", cfg.synth.items},
                {"steps", cfg.synth.steps}};
  write_manifest(cfg, "synth", j);
  announce(path);
  return 0;
}

int cmd_prep(const RunConfig& cfg) {
  if (cfg.input.empty())
    throw ConfigError("prep: no input TSV (use --input or [data] input)");
  auto log = load_tsv(cfg.input);
  auto ds = preprocess(log, cfg.prep);
  const std::string path = cfg.snapshot_path();
  ensure_parent(path);
  save_snapshot(ds, path);
  auto split = split_leave_one_out(ds);
  std::size_t interactions = 0;
  for (const auto& s : ds.sequences) interactions += s.size();
  auto j = base_manifest(cfg, "prep", path);
  j["data_hash"] = to_hex(snapshot_hash(ds));
  j["stats"] = {{"input", cfg.input},
                {"data_lines", log.data_lines},
                {"malformed", log.malformed},
                {"deduplicated", log.deduplicated},
                {"header_skipped", log.header_skipped},
                {"records_ingested", log.records.size()},
                {"users", ds.user_count()},
                {"items", ds.item_count()},
                {"interactions", interactions},
                {"eval_users", split.user_count()},
                {"excluded_users", split.excluded.size()}};
  write_manifest(cfg, "prep", j);
  announce(path);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  ensure_dir(cfg.out_dir);
  auto ds = load_snapshot(cfg.snapshot_path());
  auto split = split_leave_one_out(ds);
  ModelConfig mc = cfg.model;
  mc.validate();
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  tc.validate();
  SequenceModel model(cfg.model_kind, mc, ds.catalog_size(), ds.user_count(), cfg.seed);

  const std::string stats_path = cfg.out_dir + "/train_stats.jsonl";
  std::ofstream stats(stats_path, std::ios::binary);
  if (!stats) throw IoError("cannot open for writing: " + stats_path);
  FitResult res = fit(model, ds, split, tc, &stats);

  CheckpointMeta meta;
  meta.seed = cfg.seed;
  meta.data_hash = to_hex(snapshot_hash(ds));
  meta.best_epoch = res.best_epoch;
  meta.best_val_recall10 = res.best_val_recall10;
  meta.config_echo = cfg.to_json();
  const std::string path = cfg.checkpoint_path();
  ensure_parent(path);
  save_checkpoint(model, meta, path);

  auto j = base_manifest(cfg, "train", path);
  j["data_hash"] = meta.data_hash;
  j["stats"] = {{"epochs_run", res.history.size()},
                {"best_epoch", res.best_epoch},
                {"best_val_recall10", res.best_val_recall10},
                {"stats_file", stats_path}};
  write_manifest(cfg, "train", j);
  announce(path);
  return 0;
}

namespace {

// Shared front half of eval and the probes: dataset + split + trained model.
struct LoadedRun {
  Dataset ds;
  Split split;
  SequenceModel model;
  CheckpointMeta meta;
  std::string data_hash;
};

LoadedRun load_run(const RunConfig& cfg) {
  LoadedRun run;
  run.ds = load_snapshot(cfg.snapshot_path());
  run.split = split_leave_one_out(run.ds);
  auto loaded = load_checkpoint(cfg.checkpoint_path());
  run.model = std::move(loaded.first);
  run.meta = std::move(loaded.second);
  run.data_hash = to_hex(snapshot_hash(run.ds));
  if (run.model.catalog_size() != run.ds.catalog_size() ||
      run.model.user_count() != run.ds.user_count())
    throw ConfigError("checkpoint was trained on a different catalog: model has " +
                      std::to_string(run.model.catalog_size()) + " items / " +
                      std::to_string(run.model.user_count()) + " users, snapshot has " +
                      std::to_string(run.ds.catalog_size()) + " / " +
                      std::to_string(run.ds.user_count()));
  if (!run.meta.data_hash.empty() && run.meta.data_hash != run.data_hash)
    std::cerr << "starseq: warning: snapshot hash " << run.data_hash
              << " differs from checkpoint data hash " << run.meta.data_hash << "\n";
  return run;
}

}  // namespace

int cmd_eval(const RunConfig& cfg) {
  auto run = load_run(cfg);
  EvalOptions opt = cfg.eval;
  opt.seed = cfg.seed;
  auto report = evaluate(run.model, run.ds, run.split, cfg.eval_mode, opt);
  const std::string path =
      cfg.out_dir + "/metrics_" + std::string(to_string(cfg.eval_mode)) + ".json";
  write_text(path, metric_report_to_json(report).dump(2) + "\n");
  auto j = base_manifest(cfg, "eval", path);
  j["data_hash"] = run.data_hash;
  j["stats"] = {{"mode", to_string(cfg.eval_mode)},
                {"users", report.users},
                {"checkpoint", cfg.checkpoint_path()},
                {"checkpoint_best_epoch", run.meta.best_epoch}};
  write_manifest(cfg, "eval", j);
  announce(path);
  return 0;
}

int cmd_probe_smoothing(const RunConfig& cfg) {
  auto run = load_run(cfg);
  auto profile = smoothing_profile(run.model, run.split, cfg.probe_samples, cfg.seed,
                                   cfg.probe_include_diagonal);
  const std::string path = cfg.out_dir + "/smoothing.json";
  write_text(path, smoothing_to_json(profile).dump(2) + "\n");
  auto j = base_manifest(cfg, "smoothing", path);
  j["data_hash"] = run.data_hash;
  j["stats"] = {{"kind", to_string(run.model.kind)},
                {"users", profile.users},
                {"blocks", profile.a.size()}};
  write_manifest(cfg, "smoothing", j);
  announce(path);
  return 0;
}

int cmd_probe_entropy(const RunConfig& cfg) {
  auto run = load_run(cfg);
  auto report = attention_entropy(run.model, run.split, cfg.probe_samples, cfg.seed);
  const std::string path = cfg.out_dir + "/entropy.json";
  write_text(path, entropy_to_json(report).dump(2) + "\n");
  auto j = base_manifest(cfg, "entropy", path);
  j["data_hash"] = run.data_hash;
  j["stats"] = {{"kind", to_string(run.model.kind)},
                {"users", report.users},
                {"positions", report.positions}};
  write_manifest(cfg, "entropy", j);
  announce(path);
  return 0;
}

int cmd_bench_ops(const RunConfig& cfg) {
  auto counts = op_counts(cfg.ops_n, cfg.ops_d);
  const std::string path = cfg.out_dir + "/ops.json";
  write_text(path, op_counts_to_json(counts, cfg.ops_n, cfg.ops_d).dump(2) + "\n");
  auto j = base_manifest(cfg, "ops", path);
  j["stats"] = {{"n", cfg.ops_n}, {"d", cfg.ops_d}};
  write_manifest(cfg, "ops", j);
  announce(path);
  return 0;
}

int cmd_bench_runtime(const RunConfig& cfg) {
  auto samples = bench_runtime(cfg.model_kind, cfg.bench, cfg.seed);
  const std::string path = cfg.out_dir + "/runtime.json";
  write_text(path, runtime_to_json(samples).dump(2) + "\n");
  const std::string csv_path = cfg.out_dir + "/runtime.csv";
  std::ostringstream csv;
  runtime_to_csv(samples, csv);
  write_text(csv_path, csv.str());

  auto j = base_manifest(cfg, "runtime", path);
  j["stats"] = {{"kind", to_string(cfg.model_kind)},
                {"grid_points", samples.size()},
                {"csv", csv_path}};
  bool sloped = samples.size() >= 2;
  std::vector<double> xs, ys;
  for (const auto& s : samples) {
    xs.push_back(static_cast<double>(s.n));
    ys.push_back(s.median_us);
    if (s.median_us <= 0) sloped = false;
  }
  if (sloped) j["stats"]["log_log_slope_median"] = log_log_slope(xs, ys);
  write_manifest(cfg, "runtime", j);
  announce(path);
  announce(csv_path);
  return 0;
}

}  // namespace starseq
