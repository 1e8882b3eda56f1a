#pragma once

// One function per CLI subcommand. Each writes exactly one primary artifact
// plus a `<name>.manifest.json` run manifest (config echo, config hash, data
// hash where applicable, seed, build id — never timestamps) under the output
// directory, and prints the artifact path on stdout. Errors propagate as
// exceptions; the CLI entry point maps them to exit codes.

#include "starseq/runconfig.hpp"

namespace starseq {

int cmd_prep(const RunConfig& cfg);             // TSV -> dataset snapshot
int cmd_synth(const RunConfig& cfg);            // -> synthetic TSV
int cmd_train(const RunConfig& cfg);            // snapshot -> checkpoint (+ stats JSONL)
int cmd_eval(const RunConfig& cfg);             // snapshot + checkpoint -> metric report
int cmd_probe_smoothing(const RunConfig& cfg);  // -> representation-similarity profile
int cmd_probe_entropy(const RunConfig& cfg);    // -> attention-entropy report
int cmd_bench_ops(const RunConfig& cfg);        // -> closed-form op counts
int cmd_bench_runtime(const RunConfig& cfg);    // -> forward-pass timing grid (+ CSV)

}  // namespace starseq
