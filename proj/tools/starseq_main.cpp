// Command-line front end. Subcommands: prep, synth, train, eval,
// probe smoothing|entropy, bench ops|runtime. Flags override config-file
// values; every run writes one primary artifact plus a manifest.
//
// Exit codes: 0 success, 2 usage/configuration error, 1 runtime failure
// (one-line `starseq: <kind>: <message>` on stderr).

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "starseq/commands.hpp"
#include "starseq/runconfig.hpp"

namespace {

using starseq::RunConfig;

// Option holder that remembers whether the flag appeared, so config-file
// values survive unless explicitly overridden.
template <typename T>
struct Ovr {
  T value{};
  CLI::Option* opt = nullptr;
  explicit operator bool() const { return opt != nullptr && opt->count() > 0; }
};

template <typename T>
Ovr<T>& add_opt(CLI::App* cmd, const std::string& name, Ovr<T>& o,
                const std::string& help) {
  o.opt = cmd->add_option(name, o.value, help);
  return o;
}

struct CommonFlags {
  Ovr<std::string> config;
  Ovr<std::uint64_t> seed;
  Ovr<std::string> out;
  Ovr<std::string> model;
  Ovr<std::string> snapshot;
  Ovr<std::string> checkpoint;

  void attach(CLI::App* cmd, bool with_paths) {
    add_opt(cmd, "--config", config, "configuration file ([section] key = value)");
    add_opt(cmd, "--seed", seed, "master RNG seed");
    add_opt(cmd, "--out", out, "output directory (default: artifacts)");
    add_opt(cmd, "--model", model, "model kind")
        .opt->check(CLI::IsMember({"star", "baseline"}));
    if (with_paths) {
      add_opt(cmd, "--snapshot", snapshot, "dataset snapshot path");
      add_opt(cmd, "--checkpoint", checkpoint, "model checkpoint path");
    }
  }

  RunConfig make() const {
    RunConfig cfg;
    if (config) starseq::apply_ini_file(cfg, config.value);
    if (seed) cfg.seed = seed.value;
    if (out) cfg.out_dir = out.value;
    if (model) cfg.model_kind = starseq::model_kind_from_string(model.value);
    if (snapshot) cfg.snapshot = snapshot.value;
    if (checkpoint) cfg.checkpoint = checkpoint.value;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"star-graph sequential recommender: data prep, training, "
               "evaluation, analysis probes, and complexity benchmarks"};
  app.require_subcommand(1);
  int rc = 0;

  // --- prep ----------------------------------------------------------------
  auto* prep = app.add_subcommand("prep", "ingest a TSV log into a dataset snapshot");
  CommonFlags prep_common;
  prep_common.attach(prep, true);
  Ovr<std::string> prep_input;
  Ovr<int> prep_min_user, prep_min_item;
  Ovr<double> prep_threshold;
  add_opt(prep, "--input", prep_input, "raw TSV interaction log");
  add_opt(prep, "--min-user", prep_min_user, "minimum interactions per user");
  add_opt(prep, "--min-item", prep_min_item, "minimum interactions per item");
  add_opt(prep, "--rating-threshold", prep_threshold, "keep ratings >= threshold");
  prep->callback([&] {
    RunConfig cfg = prep_common.make();
    if (prep_input) cfg.input = prep_input.value;
    if (prep_min_user) cfg.prep.min_user = prep_min_user.value;
    if (prep_min_item) cfg.prep.min_item = prep_min_item.value;
    if (prep_threshold) cfg.prep.rating_threshold = prep_threshold.value;
    rc = starseq::cmd_prep(cfg);
  });

  // --- synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a deterministic synthetic log");
  CommonFlags synth_common;
  synth_common.attach(synth, false);
  Ovr<int> synth_users, synth_items, synth_steps;
  add_opt(synth, "--users", synth_users, "synthetic user count");
  add_opt(synth, "--items", synth_items, "synthetic item count");
  add_opt(synth, "--steps", synth_steps, "interactions per user");
  synth->callback([&] {
    RunConfig cfg = synth_common.make();
    if (synth_users) cfg.synth.users = synth_users.value;
    if (synth_items) cfg.synth.items = synth_items.value;
    if (synth_steps) cfg.synth.steps = synth_steps.value;
    rc = starseq::cmd_synth(cfg);
  });

  // --- train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train a model on a dataset snapshot");
  CommonFlags train_common;
  train_common.attach(train, true);
  Ovr<int> tr_d, tr_n, tr_nh, tr_nb, tr_batch, tr_epochs, tr_patience;
  Ovr<std::string> tr_act;
  Ovr<bool> tr_user_emb, tr_conv_scale, tr_all_prefixes;
  Ovr<double> tr_lr;
  add_opt(train, "--d", tr_d, "embedding dimension");
  add_opt(train, "--n", tr_n, "fixed sequence length");
  add_opt(train, "--n-h", tr_nh, "attention heads");
  add_opt(train, "--n-b", tr_nb, "blocks");
  add_opt(train, "--activation", tr_act, "feed-forward activation")
      .opt->check(CLI::IsMember({"relu", "gelu"}));
  add_opt(train, "--user-embedding", tr_user_emb, "include the user term in scores");
  add_opt(train, "--conventional-scale", tr_conv_scale,
          "scale attention logits by sqrt(d/n_h)");
  add_opt(train, "--lr", tr_lr, "Adam learning rate");
  add_opt(train, "--batch-size", tr_batch, "examples per optimizer step");
  add_opt(train, "--max-epochs", tr_epochs, "epoch cap");
  add_opt(train, "--patience", tr_patience, "early-stopping patience (epochs)");
  add_opt(train, "--all-prefixes", tr_all_prefixes,
          "train on every prefix instead of one example per user");
  train->callback([&] {
    RunConfig cfg = train_common.make();
    if (tr_d) cfg.model.d = tr_d.value;
    if (tr_n) cfg.model.n = tr_n.value;
    if (tr_nh) cfg.model.n_h = tr_nh.value;
    if (tr_nb) cfg.model.n_b = tr_nb.value;
    if (tr_act) cfg.model.act = starseq::activation_from_string(tr_act.value);
    if (tr_user_emb) cfg.model.use_user_embedding = tr_user_emb.value;
    if (tr_conv_scale) cfg.model.conventional_scale = tr_conv_scale.value;
    if (tr_lr) cfg.train.lr = static_cast<starseq::Real>(tr_lr.value);
    if (tr_batch) cfg.train.batch_size = tr_batch.value;
    if (tr_epochs) cfg.train.max_epochs = tr_epochs.value;
    if (tr_patience) cfg.train.patience = tr_patience.value;
    if (tr_all_prefixes) cfg.train.all_prefixes = tr_all_prefixes.value;
    rc = starseq::cmd_train(cfg);
  });

  // --- eval ----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "rank the catalog and report Recall/NDCG");
  CommonFlags eval_common;
  eval_common.attach(eval, true);
  Ovr<std::string> ev_mode;
  Ovr<std::vector<int>> ev_ks;
  Ovr<int> ev_samples;
  Ovr<bool> ev_buckets;
  add_opt(eval, "--mode", ev_mode, "which held-out item to score")
      .opt->check(CLI::IsMember({"val", "test"}));
  add_opt(eval, "--ks", ev_ks, "cutoffs, e.g. --ks 10 20");
  add_opt(eval, "--candidate-samples", ev_samples,
          "rank against a sampled candidate set instead of the full catalog");
  add_opt(eval, "--buckets", ev_buckets, "include activity-bucket breakdown");
  eval->callback([&] {
    RunConfig cfg = eval_common.make();
    if (ev_mode) cfg.eval_mode = starseq::eval_mode_from_string(ev_mode.value);
    if (ev_ks) cfg.eval.ks = ev_ks.value;
    if (ev_samples) cfg.eval.candidate_samples = ev_samples.value;
    if (ev_buckets) cfg.eval.with_buckets = ev_buckets.value;
    rc = starseq::cmd_eval(cfg);
  });

  // --- probe ---------------------------------------------------------------
  auto* probe = app.add_subcommand("probe", "model-analysis probes");
  probe->require_subcommand(1);

  auto* smoothing = probe->add_subcommand(
      "smoothing", "mean pairwise cosine of item states per block");
  CommonFlags smooth_common;
  smooth_common.attach(smoothing, true);
  Ovr<std::size_t> sm_samples;
  Ovr<bool> sm_diag;
  add_opt(smoothing, "--samples", sm_samples, "users to sample (0 = all)");
  add_opt(smoothing, "--include-diagonal", sm_diag,
          "count self-pairs in the cosine average");
  smoothing->callback([&] {
    RunConfig cfg = smooth_common.make();
    if (sm_samples) cfg.probe_samples = sm_samples.value;
    if (sm_diag) cfg.probe_include_diagonal = sm_diag.value;
    rc = starseq::cmd_probe_smoothing(cfg);
  });

  auto* entropy = probe->add_subcommand(
      "entropy", "attention entropy vs uniform (baseline model only)");
  CommonFlags entropy_common;
  entropy_common.attach(entropy, true);
  Ovr<std::size_t> en_samples;
  add_opt(entropy, "--samples", en_samples, "users to sample (0 = all)");
  entropy->callback([&] {
    RunConfig cfg = entropy_common.make();
    if (en_samples) cfg.probe_samples = en_samples.value;
    rc = starseq::cmd_probe_entropy(cfg);
  });

  // --- bench ---------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "complexity benchmarks");
  bench->require_subcommand(1);

  auto* ops = bench->add_subcommand("ops", "closed-form per-block op counts");
  CommonFlags ops_common;
  ops_common.attach(ops, false);
  Ovr<std::int64_t> ops_n, ops_d;
  add_opt(ops, "--n", ops_n, "sequence length");
  add_opt(ops, "--d", ops_d, "embedding dimension");
  ops->callback([&] {
    RunConfig cfg = ops_common.make();
    if (ops_n) cfg.ops_n = ops_n.value;
    if (ops_d) cfg.ops_d = ops_d.value;
    rc = starseq::cmd_bench_ops(cfg);
  });

  auto* runtime = bench->add_subcommand("runtime", "forward-pass wall time over an n-grid");
  CommonFlags rt_common;
  rt_common.attach(runtime, false);
  Ovr<std::vector<int>> rt_grid;
  Ovr<int> rt_d, rt_nh, rt_nb, rt_reps, rt_warmup;
  add_opt(runtime, "--grid", rt_grid, "sequence lengths, e.g. --grid 64 128 256 512");
  add_opt(runtime, "--d", rt_d, "embedding dimension");
  add_opt(runtime, "--n-h", rt_nh, "attention heads");
  add_opt(runtime, "--n-b", rt_nb, "blocks");
  add_opt(runtime, "--repetitions", rt_reps, "timed passes per grid point (>= 5)");
  add_opt(runtime, "--warmup", rt_warmup, "untimed passes per grid point");
  runtime->callback([&] {
    RunConfig cfg = rt_common.make();
    if (rt_grid) cfg.bench.n_grid = rt_grid.value;
    if (rt_d) cfg.bench.d = rt_d.value;
    if (rt_nh) cfg.bench.n_h = rt_nh.value;
    if (rt_nb) cfg.bench.n_b = rt_nb.value;
    if (rt_reps) cfg.bench.repetitions = rt_reps.value;
    if (rt_warmup) cfg.bench.warmup = rt_warmup.value;
    rc = starseq::cmd_bench_runtime(cfg);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const starseq::ConfigError& e) {
    std::cerr << "starseq: " << e.what() << "\n";
    return 2;
  } catch (const starseq::Error& e) {
    std::cerr << "starseq: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "starseq: internal error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
