#include "starseq/train.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "starseq/metrics.hpp"

namespace starseq {

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
}

Adam::Adam(Real lr, Real beta1, Real beta2, Real eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0) || !(eps > 0) || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw ConfigError("invalid Adam hyper-parameters");
  }
}

void Adam::step(SequenceModel& model) {
  ++t_;
  const Real bc1 = Real(1) - std::pow(beta1_, static_cast<Real>(t_));
  const Real bc2 = Real(1) - std::pow(beta2_, static_cast<Real>(t_));
  model.visit_params([&](const std::string& name, Tensor& p) {
    auto [it, fresh] = moments_.try_emplace(name, Matrix(), Matrix());
    auto& [m, v] = it->second;
    if (fresh) {
      m = Matrix::Zero(p.rows(), p.cols());
      v = Matrix::Zero(p.rows(), p.cols());
    }
    Matrix g;
    if (p.grad.size() == 0) {
      g = Matrix::Zero(p.rows(), p.cols());
    } else {
      g = p.grad;
    }
    m = beta1_ * m + (Real(1) - beta1_) * g;
    v = beta2_ * v + (Real(1) - beta2_) * g.cwiseProduct(g);
    Matrix update = (m / bc1).cwiseQuotient(
        ((v / bc2).cwiseSqrt() + Matrix::Constant(p.rows(), p.cols(), eps_)));
    p.value -= lr_ * update;
    if (!p.value.allFinite()) {
      throw NumericalError("parameter '" + name + "' became non-finite after Adam step");
    }
  });
}

int sample_negative(Rng& rng, const std::unordered_set<int>& train_items,
                    int catalog_size) {
  if (catalog_size < 2) throw SamplingError("catalog has no real items");
  std::size_t eligible = static_cast<std::size_t>(catalog_size) - 1;
  for (int v : train_items) {
    if (v >= 1 && v < catalog_size) --eligible;
  }
  if (eligible == 0) {
    throw SamplingError("no item outside the user's training set to sample");
  }
  while (true) {
    int v = 1 + static_cast<int>(
                    uniform_index(rng, static_cast<std::uint64_t>(catalog_size - 1)));
    if (!train_items.count(v)) return v;
  }
}

namespace {

struct Example {
  std::size_t user_index;  // into the split arrays
  int prefix_len;          // train[0..prefix_len) is the input
  int target;
};

std::vector<Example> build_examples(const Split& split, bool all_prefixes) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < split.user_count(); ++i) {
    const auto& train = split.train[i];
    if (train.size() < 2) continue;  // no (prefix -> next) pair available
    if (all_prefixes) {
      for (std::size_t t = 1; t < train.size(); ++t) {
        out.push_back({i, static_cast<int>(t), train[t]});
      }
    } else {
      out.push_back({i, static_cast<int>(train.size()) - 1, train.back()});
    }
  }
  return out;
}

}  // namespace

std::pair<double, std::size_t> train_epoch(SequenceModel& model, const Split& split,
                                           const TrainConfig& cfg, Adam& adam,
                                           Rng& order_rng, Rng& negative_rng) {
  cfg.validate();
  std::vector<Example> examples = build_examples(split, cfg.all_prefixes);
  if (examples.empty()) {
    throw TrainError("no trainable examples (every user has fewer than 2 train items)");
  }
  shuffle_in_place(examples, order_rng);

  std::vector<std::unordered_set<int>> train_sets(split.user_count());
  for (std::size_t i = 0; i < split.user_count(); ++i) {
    train_sets[i].insert(split.train[i].begin(), split.train[i].end());
  }

  double total_loss = 0;
  std::size_t done = 0;
  while (done < examples.size()) {
    std::size_t batch_end =
        std::min(done + static_cast<std::size_t>(cfg.batch_size), examples.size());
    model.zero_grads();
    for (std::size_t e = done; e < batch_end; ++e) {
      const Example& ex = examples[e];
      const auto& train = split.train[ex.user_index];
      std::vector<int> prefix(train.begin(), train.begin() + ex.prefix_len);
      int negative =
          sample_negative(negative_rng, train_sets[ex.user_index], model.catalog_size());
      try {
        Graph g;
        ForwardTrace trace = model.forward(g, to_fixed_length(prefix, model.cfg.n));
        Var c_user = trace.c_final;
        if (model.cfg.use_user_embedding) {
          Var U = g.leaf(model.tables.U);
          c_user = add(c_user, row(U, split.uids[ex.user_index]));
        }
        Var V = g.leaf(model.tables.V);
        Var r_pos = score_one(g, c_user, row(V, ex.target));
        Var r_neg = score_one(g, c_user, row(V, negative));
        Var loss = bce_loss(g, r_pos, r_neg);
        total_loss += static_cast<double>(loss.value()(0, 0));
        g.backward(loss);
      } catch (const NumericalError& err) {
        throw TrainError("non-finite value at example " + std::to_string(e) + " (uid " +
                         std::to_string(split.uids[ex.user_index]) + "): " + err.what());
      }
    }
    adam.step(model);
    model.pin_padding_row();
    done = batch_end;
  }
  return {total_loss / static_cast<double>(examples.size()), examples.size()};
}

FitResult fit(SequenceModel& model, const Dataset& ds, const Split& split,
              const TrainConfig& cfg, std::ostream* stats_out) {
  cfg.validate();
  Adam adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  Rng order_rng = make_rng(cfg.seed, "epoch-order");
  Rng negative_rng = make_rng(cfg.seed, "negatives");

  EvalOptions val_opt;
  val_opt.ks = {10};
  val_opt.with_buckets = false;

  FitResult result;
  std::vector<Matrix> best_params;
  auto snapshot = [&best_params](SequenceModel& m) {
    best_params.clear();
    m.visit_params(
        [&best_params](const std::string&, Tensor& t) { best_params.push_back(t.value); });
  };
  auto restore = [&best_params](SequenceModel& m) {
    std::size_t at = 0;
    m.visit_params(
        [&](const std::string&, Tensor& t) { t.value = best_params[at++]; });
  };

  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto started = std::chrono::steady_clock::now();
    auto [mean_loss, n_examples] = train_epoch(model, split, cfg, adam, order_rng,
                                               negative_rng);
    MetricReport val = evaluate(model, ds, split, EvalMode::Val, val_opt);
    auto elapsed = std::chrono::steady_clock::now() - started;

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = mean_loss;
    stats.val_recall10 = val.recall[0];
    stats.wall_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    stats.examples = n_examples;
    result.history.push_back(stats);
    if (stats_out) {
      nlohmann::json line = {{"epoch", stats.epoch},
                             {"mean_loss", stats.mean_loss},
                             {"val_recall@10", stats.val_recall10},
                             {"wall_ms", stats.wall_ms}};
      *stats_out << line.dump() << "\n";
    }

    if (stats.val_recall10 > result.best_val_recall10) {  // ties keep the earlier epoch
      result.best_val_recall10 = stats.val_recall10;
      result.best_epoch = epoch;
      snapshot(model);
      since_best = 0;
    } else {
      ++since_best;
      if (since_best >= cfg.patience) break;
    }
  }
  if (result.best_epoch > 0) restore(model);
  model.pin_padding_row();
  return result;
}

}  // namespace starseq
