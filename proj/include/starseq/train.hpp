#pragma once

// Mini-batch training with one sampled negative per sequence, Adam updates,
// and validation-driven model selection with early stopping.

#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "starseq/data.hpp"
#include "starseq/model.hpp"

namespace starseq {

struct TrainConfig {
  Real lr = static_cast<Real>(1e-3);
  Real beta1 = static_cast<Real>(0.9);
  Real beta2 = static_cast<Real>(0.999);
  Real eps = static_cast<Real>(1e-8);
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 10;          // epochs without a new best val Recall@10
  bool all_prefixes = false;  // emit every intermediate (prefix -> next) example
  std::uint64_t seed = 42;

  void validate() const;
};

// Dense Adam with bias correction; moments are keyed by parameter name and
// created lazily at the first step.
class Adam {
 public:
  Adam(Real lr, Real beta1, Real beta2, Real eps);
  void step(SequenceModel& model);
  std::int64_t steps() const { return t_; }

 private:
  Real lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, std::pair<Matrix, Matrix>> moments_;
};

// Uniform over {1..catalog-1} minus the user's training items, by rejection.
int sample_negative(Rng& rng, const std::unordered_set<int>& train_items,
                    int catalog_size);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  double val_recall10 = 0;
  long long wall_ms = 0;
  std::size_t examples = 0;
};

// One seeded-shuffled pass over the training examples; batches sum their
// losses, backward accumulates, Adam steps once per batch, and the padding
// embedding is re-pinned after every step. Returns (mean loss, example count).
std::pair<double, std::size_t> train_epoch(SequenceModel& model, const Split& split,
                                           const TrainConfig& cfg, Adam& adam,
                                           Rng& order_rng, Rng& negative_rng);

struct FitResult {
  int best_epoch = -1;
  double best_val_recall10 = -1;
  std::vector<EpochStats> history;
};

// Trains until max_epochs or until patience epochs pass without improving
// validation Recall@10; the model is left holding the best-epoch parameters.
// When stats_out is set, one JSON line per epoch is appended to it.
FitResult fit(SequenceModel& model, const Dataset& ds, const Split& split,
              const TrainConfig& cfg, std::ostream* stats_out = nullptr);

}  // namespace starseq
