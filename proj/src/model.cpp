#include "starseq/model.hpp"

#include <cmath>

namespace starseq {

Real ModelConfig::logit_scale() const {
  Real denom = conventional_scale ? static_cast<Real>(d) / static_cast<Real>(n_h)
                                  : static_cast<Real>(d);
  return Real(1) / std::sqrt(denom);
}

void ModelConfig::validate() const {
  if (d < 1 || n < 1 || n_h < 1 || n_b < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d % n_h != 0) {
    throw ConfigError("d (" + std::to_string(d) + ") must be divisible by n_h (" +
                      std::to_string(n_h) + ")");
  }
}

namespace {

// Box-Muller from raw 64-bit draws; avoids the implementation-defined
// std::normal_distribution so initialization is reproducible everywhere.
Real gaussian(Rng& rng) {
  auto unit = [&rng] {
    return (static_cast<Real>(rng() >> 11) + Real(1)) * Real(0x1p-53);
  };
  Real u1 = unit();
  Real u2 = unit();
  return std::sqrt(Real(-2) * std::log(u1)) *
         std::cos(Real(2) * std::numbers::pi_v<Real> * u2);
}

Tensor gaussian_tensor(Index rows, Index cols, Real std_dev, Rng& rng) {
  Tensor t(rows, cols, true);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) t.value(r, c) = std_dev * gaussian(rng);
  }
  return t;
}

}  // namespace

SequenceModel::SequenceModel(ModelKind kind_, const ModelConfig& cfg_,
                             int catalog_size, int user_count, std::uint64_t seed)
    : kind(kind_), cfg(cfg_) {
  cfg.validate();
  if (catalog_size < 2) throw ConfigError("catalog needs at least one real item");
  if (user_count < 1) throw ConfigError("need at least one user");
  const Real std_dev = Real(0.02);
  Rng rng = make_rng(seed, "init");
  tables.V = gaussian_tensor(catalog_size, cfg.d, std_dev, rng);
  tables.V.value.row(0).setZero();  // padding embedding stays pinned
  tables.P = gaussian_tensor(cfg.n, cfg.d, std_dev, rng);
  tables.U = gaussian_tensor(user_count, cfg.d, std_dev, rng);
  blocks.resize(static_cast<std::size_t>(cfg.n_b));
  for (auto& blk : blocks) {
    for (int h = 0; h < cfg.n_h; ++h) {
      blk.Q.push_back(gaussian_tensor(cfg.d, cfg.head_dim(), std_dev, rng));
      blk.Z.push_back(gaussian_tensor(cfg.d, cfg.head_dim(), std_dev, rng));
      blk.A.push_back(gaussian_tensor(cfg.d, cfg.head_dim(), std_dev, rng));
    }
    blk.O = gaussian_tensor(cfg.d, cfg.d, std_dev, rng);
    blk.W1 = gaussian_tensor(cfg.d, cfg.d, std_dev, rng);
    blk.W2 = gaussian_tensor(cfg.d, cfg.d, std_dev, rng);
    blk.b1 = Tensor(1, cfg.d, true);
    blk.b2 = Tensor(1, cfg.d, true);
  }
}

void SequenceModel::visit_params(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("V", tables.V);
  fn("P", tables.P);
  fn("U", tables.U);
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    std::string prefix = "block" + std::to_string(m) + ".";
    auto& blk = blocks[m];
    for (std::size_t h = 0; h < blk.Q.size(); ++h) {
      fn(prefix + "Q" + std::to_string(h), blk.Q[h]);
      fn(prefix + "Z" + std::to_string(h), blk.Z[h]);
      fn(prefix + "A" + std::to_string(h), blk.A[h]);
    }
    fn(prefix + "O", blk.O);
    fn(prefix + "W1", blk.W1);
    fn(prefix + "b1", blk.b1);
    fn(prefix + "W2", blk.W2);
    fn(prefix + "b2", blk.b2);
  }
}

void SequenceModel::zero_grads() {
  visit_params([](const std::string&, Tensor& t) { t.zero_grad(); });
}

void SequenceModel::pin_padding_row() {
  tables.V.value.row(0).setZero();
  if (tables.V.grad.size() != 0) tables.V.grad.row(0).setZero();
}

BlockVars bind_block(Graph& g, BlockParams& p) {
  BlockVars bv;
  for (auto& q : p.Q) bv.Q.push_back(g.leaf(q));
  for (auto& z : p.Z) bv.Z.push_back(g.leaf(z));
  for (auto& a : p.A) bv.A.push_back(g.leaf(a));
  bv.O = g.leaf(p.O);
  bv.W1 = g.leaf(p.W1);
  bv.W2 = g.leaf(p.W2);
  bv.b1 = g.leaf(p.b1);
  bv.b2 = g.leaf(p.b2);
  return bv;
}

StarAttentionOut star_attention(Graph&, const BlockVars& blk, Var c_prev, Var E,
                                const std::vector<bool>& real, Real scale_mult) {
  if (c_prev.rows() != 1) throw DimensionError("star_attention: c_prev must be 1 x d");
  if (static_cast<Index>(real.size()) != E.rows()) {
    throw DimensionError("star_attention: mask length != sequence length");
  }
  bool any_real = false;
  for (bool r : real) any_real = any_real || r;
  if (!any_real) throw ContractError("star_attention: all positions masked");

  StarAttentionOut out;
  std::vector<Var> heads;
  std::vector<std::vector<bool>> keep{real};
  for (std::size_t h = 0; h < blk.Q.size(); ++h) {
    Var query = matmul(c_prev, blk.Q[h]);            // 1 x d/n_h
    Var keys = matmul(E, blk.Z[h]);                  // n x d/n_h
    Var logits = scale(matmul(query, transpose(keys)), scale_mult);  // 1 x n
    Var alpha = masked_softmax_rows(logits, keep);
    out.alpha.push_back(alpha.value());
    heads.push_back(matmul(alpha, matmul(E, blk.A[h])));
  }
  out.g = matmul(concat_rows(heads), blk.O);
  return out;
}

CausalAttentionOut causal_attention(Graph&, const BlockVars& blk, Var E,
                                    const std::vector<bool>& real, Real scale_mult) {
  Index n = E.rows();
  if (static_cast<Index>(real.size()) != n) {
    throw DimensionError("causal_attention: mask length != sequence length");
  }
  // keep[j][k]: position j may attend to k iff k is a real item at or before j.
  std::vector<std::vector<bool>> keep(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    auto& kj = keep[static_cast<std::size_t>(j)];
    kj.resize(static_cast<std::size_t>(n), false);
    for (Index k = 0; k <= j; ++k) kj[static_cast<std::size_t>(k)] = real[static_cast<std::size_t>(k)];
  }
  CausalAttentionOut out;
  std::vector<Var> heads;
  for (std::size_t h = 0; h < blk.Q.size(); ++h) {
    Var queries = matmul(E, blk.Q[h]);
    Var keys = matmul(E, blk.Z[h]);
    Var logits = scale(matmul(queries, transpose(keys)), scale_mult);  // n x n
    Var alpha = masked_softmax_rows(logits, keep, /*allow_empty_rows=*/true);
    out.alpha.push_back(alpha.value());
    heads.push_back(matmul(alpha, matmul(E, blk.A[h])));
  }
  out.out = matmul(concat_rows(heads), blk.O);
  return out;
}

Var feed_forward(Graph&, const BlockVars& blk, Var x, Activation act) {
  Var hidden = activation(add(matmul(x, blk.W1), blk.b1), act);
  return add(matmul(hidden, blk.W2), blk.b2);
}

ForwardTrace SequenceModel::forward(Graph& g, const FixedSequence& fs) {
  cfg.validate();
  if (fs.length() != cfg.n) {
    throw DimensionError("window length " + std::to_string(fs.length()) +
                         " != configured n " + std::to_string(cfg.n));
  }
  if (fs.all_padding()) throw ContractError("forward on an all-padding sequence");

  ForwardTrace trace;
  trace.real.resize(fs.b.size());
  std::vector<Index> vids(fs.b.size());
  for (std::size_t t = 0; t < fs.b.size(); ++t) {
    trace.real[t] = fs.b[t] != 0;
    vids[t] = fs.b[t];
  }

  Var V = g.leaf(tables.V);
  Var P = g.leaf(tables.P);
  // Input rows v_{b_t} + p_t; padding rows then forced to zero so masked
  // positions carry no signal (V row 0 is zero but P rows are not).
  Var E = mask_rows(add(rows(V, vids), P), trace.real);
  trace.E = E.value();
  trace.item_states.push_back(E.value());

  const Real scale_mult = cfg.logit_scale();
  if (kind == ModelKind::Star) {
    Var c = row(E, static_cast<Index>(cfg.n) - 1);  // c^0 = e_n
    trace.c.push_back(c.value());
    for (auto& params : blocks) {
      BlockVars bv = bind_block(g, params);
      StarAttentionOut att = star_attention(g, bv, c, E, trace.real, scale_mult);
      Var a = add(c, att.g);
      Var cm = add(a, feed_forward(g, bv, a, cfg.act));
      trace.alpha.push_back(std::move(att.alpha));
      trace.c.push_back(cm.value());
      trace.item_states.push_back(E.value());  // item nodes never update
      c = cm;
    }
    trace.c_final = c;
  } else {
    Var Em = E;
    trace.c.push_back(Matrix(Em.value().row(cfg.n - 1)));
    for (auto& params : blocks) {
      BlockVars bv = bind_block(g, params);
      CausalAttentionOut att = causal_attention(g, bv, Em, trace.real, scale_mult);
      Var a = add(Em, att.out);
      Var En = add(a, feed_forward(g, bv, a, cfg.act));
      // Padding rows would otherwise accumulate b2 and residual noise.
      Em = mask_rows(En, trace.real);
      trace.alpha.push_back(std::move(att.alpha));
      trace.item_states.push_back(Em.value());
      trace.c.push_back(Matrix(Em.value().row(cfg.n - 1)));
    }
    trace.c_final = row(Em, static_cast<Index>(cfg.n) - 1);
  }
  return trace;
}

Var score_one(Graph&, Var c_user, Var v_row) {
  if (c_user.rows() != 1 || v_row.rows() != 1) {
    throw DimensionError("score_one expects 1 x d operands");
  }
  return matmul(c_user, transpose(v_row));
}

Var bce_loss(Graph&, Var r_pos, Var r_neg) {
  return add(softplus(scale(r_pos, Real(-1))), softplus(r_neg));
}

Real bce_loss_value(Real r_pos, Real r_neg) {
  auto sp = [](Real v) { return std::max(v, Real(0)) + std::log1p(std::exp(-std::abs(v))); };
  return sp(-r_pos) + sp(r_neg);
}

Vector score_catalog(const SequenceModel& model, const Matrix& c_final, int uid) {
  if (c_final.rows() != 1 || c_final.cols() != model.cfg.d) {
    throw DimensionError("score_catalog expects a 1 x d state");
  }
  if (uid < 0 || uid >= model.user_count()) {
    throw IndexError("uid " + std::to_string(uid) + " out of range");
  }
  Vector cu = c_final.row(0).transpose();
  if (model.cfg.use_user_embedding) {
    cu += model.tables.U.value.row(uid).transpose();
  }
  return model.tables.V.value * cu;
}

}  // namespace starseq
