#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "setgen/core.hpp"
#include "setgen/rng.hpp"

namespace setgen {

// Rest proportions and the small-size-shifted distribution built from them.
struct BiasedSizePlan {
  SizeDistribution empirical;            // p_k
  SizeDistribution biased;               // q_k
  std::vector<double> rest;              // r_k = p_k / (p_k + ... + p_K)
  std::vector<double> rest_adjusted;     // r'_k = min{r_k + k * scale, 1}
  double scale = 0.0;                    // sqrt(n_items / n_train)
};

struct MissingBucketError : std::runtime_error {
  int size;
  explicit MissingBucketError(int k)
      : std::runtime_error("pool has no sets of size " + std::to_string(k)), size(k) {}
};

struct DerivativeStat {
  double signed_stat = 0.0;  // sum_i q_i * sgn(q_i - p_i)
  double kl_form = 0.0;      // 1 + KL(q || p)
};

enum class SimSource { Uniform, Gaussian };

struct CorrelationResult {
  double pearson = 0.0;
  std::vector<std::pair<double, double>> table;  // (l1 distance, signed stat)
};

BiasedSizePlan biased_sizes(const SizeDistribution& empirical, long long n_items,
                            long long n_train);

// Largest-remainder apportionment of `count` draws across sizes; ties broken
// toward smaller sizes. Deterministic; entries sum to count.
std::vector<long long> apportion_counts(const SizeDistribution& targets, long long count);

// Per size k, draws its apportioned count uniformly with replacement from the
// pool's size-k sets, preserving the pool's within-size distribution.
SetMultiset stratified_recombine(const SetMultiset& pool, const SizeDistribution& targets,
                                 long long count, Rng& rng);

// As stratified_recombine, but size-1 draws come from the training histogram
// and sizes >= 2 from the model pool.
SetMultiset hybrid_recombine(const SetMultiset& histogram_train,
                             const SetMultiset& model_pool, const SizeDistribution& targets,
                             long long count, Rng& rng);

DerivativeStat derivative_stat(const std::vector<double>& q, const std::vector<double>& p);

// Draws random distribution pairs, recording (l1, signed stat) per pair and
// their Pearson correlation. Gaussian entries are |N(0,1)| before normalizing.
CorrelationResult correlation_sim(int dims, int pairs, SimSource source, Rng& rng);

}  // namespace setgen
