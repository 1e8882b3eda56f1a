#pragma once

// Star-graph sequence model and a causal full self-attention baseline. Both
// share embedding tables and per-block parameter shapes, run their forward
// passes through the autodiff graph, and record every intermediate needed by
// the analysis probes.

#include <functional>
#include <string>
#include <vector>

#include "starseq/common.hpp"
#include "starseq/data.hpp"
#include "starseq/tensor.hpp"

namespace starseq {

enum class ModelKind { Star, Baseline };

inline const char* to_string(ModelKind k) {
  return k == ModelKind::Star ? "star" : "baseline";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "star") return ModelKind::Star;
  if (s == "baseline") return ModelKind::Baseline;
  throw ConfigError("unknown model kind '" + s + "' (expected star|baseline)");
}

struct ModelConfig {
  int d = 256;    // embedding dimension
  int n = 75;     // fixed sequence length
  int n_h = 16;   // attention heads
  int n_b = 3;    // blocks
  Activation act = Activation::Gelu;
  bool use_user_embedding = true;   // false drops the u_i term from scoring
  bool conventional_scale = false;  // scale logits by sqrt(d/n_h) instead of sqrt(d)

  int head_dim() const { return d / n_h; }
  // Multiplier applied to raw attention logits: 1/sqrt(d) by default, or
  // 1/sqrt(d/n_h) in the conventional variant.
  Real logit_scale() const;
  void validate() const;
};

// Item table V (row 0 is the pinned-zero padding embedding), position table
// P, user table U.
struct EmbeddingTables {
  Tensor V;
  Tensor P;
  Tensor U;
};

// One block's parameters. The same shapes serve both models: per head k the
// d x (d/n_h) projections Q_k (query), Z_k (key), A_k (value), then the d x d
// output mix O and the position-wise feed-forward pair.
struct BlockParams {
  std::vector<Tensor> Q, Z, A;
  Tensor O;
  Tensor W1, W2;
  Tensor b1, b2;  // 1 x d
};

// Graph-bound handles for one block, produced per forward pass.
struct BlockVars {
  std::vector<Var> Q, Z, A;
  Var O, W1, W2, b1, b2;
};

// Everything a forward pass computed, for scoring and for the probes.
struct ForwardTrace {
  Matrix E;                                // n x d input after padding zeroing
  std::vector<bool> real;                  // per position: true = real item
  std::vector<Matrix> c;                   // c[0..n_b], 1 x d internal states
  std::vector<std::vector<Matrix>> alpha;  // [block][head]: 1 x n (star) or n x n
  std::vector<Matrix> item_states;         // E^0..E^{n_b}; star never changes them
  Var c_final;                             // graph handle used for scoring
};

class SequenceModel {
 public:
  ModelKind kind = ModelKind::Star;
  ModelConfig cfg;
  EmbeddingTables tables;
  std::vector<BlockParams> blocks;

  SequenceModel() = default;
  // Gaussian init (mean 0, std 0.02), zero biases, V row 0 pinned to zero.
  SequenceModel(ModelKind kind, const ModelConfig& cfg, int catalog_size,
                int user_count, std::uint64_t seed);

  int catalog_size() const { return static_cast<int>(tables.V.rows()); }
  int user_count() const { return static_cast<int>(tables.U.rows()); }

  // Builds the full computation on g and returns the recorded trace. The
  // window length must equal cfg.n and contain at least one real item.
  // Concurrent forward passes over a frozen model are safe; backward is not.
  ForwardTrace forward(GraphT<Real>& g, const FixedSequence& fs);

  // Stable iteration over all parameters (names are the checkpoint keys).
  void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
  void zero_grads();
  // Re-pins V row 0 to zero; call after every optimizer step.
  void pin_padding_row();
};

// In-graph building blocks, exposed so tests can drive them directly.
BlockVars bind_block(Graph& g, BlockParams& p);

// Star attention: one query row (the internal node) against the item rows.
// Returns the aggregated 1 x d output and the per-head attention rows.
struct StarAttentionOut {
  Var g;
  std::vector<Matrix> alpha;
};
StarAttentionOut star_attention(Graph& g, const BlockVars& blk, Var c_prev, Var E,
                                const std::vector<bool>& real, Real scale_mult);

// Causal multi-head self-attention over all positions; padding keys carry
// zero weight and padding query rows come out as zero rows.
struct CausalAttentionOut {
  Var out;
  std::vector<Matrix> alpha;  // per head, n x n
};
CausalAttentionOut causal_attention(Graph& g, const BlockVars& blk, Var E,
                                    const std::vector<bool>& real, Real scale_mult);

// Position-wise feed-forward: f(x W1 + b1) W2 + b2.
Var feed_forward(Graph& g, const BlockVars& blk, Var x, Activation act);

// Recommendation score of one candidate: (c + u) . v, where u is optional.
// c_user is 1 x d (already including the user term when enabled).
Var score_one(Graph& g, Var c_user, Var v_row);

// Stable binary cross-entropy on a (positive, negative) score pair:
// softplus(-r_pos) + softplus(r_neg), equal to -[log s(r_pos) + log(1 - s(r_neg))].
Var bce_loss(Graph& g, Var r_pos, Var r_neg);
Real bce_loss_value(Real r_pos, Real r_neg);

// The model-side half of evaluation scoring, outside the graph: scores for
// every catalog row given a finished internal state. Row 0 (padding) is
// included; callers exclude it when ranking.
Vector score_catalog(const SequenceModel& model, const Matrix& c_final, int uid);

}  // namespace starseq
