#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "setgen/models.hpp"

namespace setgen {

// A generating path together with its proposal probability and importance
// weight. The identity log_weight + proposal_logprob == logprob holds exactly
// for every path produced here.
struct WeightedPath {
  GeneratingPath path;
  double proposal_logprob = 0.0;  // log q(l)
  double log_weight = 0.0;        // log r(l)
  double logprob = 0.0;           // log p(l)
  Tape::Ref logprob_node = -1;    // taped log p(l), when requested
};

struct TrainConfig {
  int samples = 5;  // posterior paths per set per step
  int batch = 64;
  int epochs = 1;
  double lr = 0.01;
  std::uint64_t seed = 1;
  int dim = 10;
};

struct GradEstimate {
  double log_mean_weight = 0.0;  // log((1/M) sum_i r_i), the set log-prob estimate
  std::vector<double> log_weights;
};

struct TrainResult {
  std::vector<double> epoch_nll;
  long long skipped = 0;  // training instances excluded as unreachable
};

// Actions permitted while steering generation toward `target`: candidates that
// are missing target items, plus the stop item once the target is complete.
std::vector<int> valid_actions(const SetModel& m, const GenState& s, const ItemSet& target);

// Draws one path from the proposal q(a|s) = p(a|s) / sum over valid actions.
WeightedPath sample_posterior_path(const SetModel& m, Tape& t, const ItemSet& target,
                                   Rng& rng, bool build_node = false);

// Recomputes proposal probability and weight for a given terminated path.
WeightedPath weigh_path(const SetModel& m, Tape& t, const GeneratingPath& path);

// Draws `samples` posterior paths and accumulates the self-normalized gradient
// estimate scale * sum_i (r_i/R) d(log p(l_i)) into the parameter gradients.
GradEstimate grad_log_set_prob(const SetModel& m, Tape& t, const ItemSet& target,
                               int samples, Rng& rng, double scale = 1.0);

// Monte Carlo EM loop. Writes one line per epoch to `log` when given; invokes
// on_epoch(epoch, nll) after each epoch and stops early when it returns false.
TrainResult train(SetModel& m, const SetMultiset& data, const TrainConfig& cfg,
                  std::ostream* log = nullptr,
                  const std::function<bool(int, double)>& on_epoch = {});

}  // namespace setgen
