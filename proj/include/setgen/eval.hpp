#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "setgen/models.hpp"

namespace setgen {

constexpr int kSizeBuckets = 5;  // 1, 2, 3, 4, >= 5

struct EvalReport {
  double l1 = 0.0;
  double overlap = 0.0;
  std::vector<double> sizewise_overlap;  // kSizeBuckets entries; sum == overlap
  SizeDistribution sizes_pred;
  SizeDistribution sizes_test;
  long long n_test = 0;
  long long n_pred = 0;
};

struct UnreachableReport {
  double ratio = 0.0;
  std::vector<double> by_bucket;  // kSizeBuckets entries
  long long out_of_universe = 0;
};

// Planted ground truth: an exact tabular realization of a random distribution
// over non-empty subsets, plus corpora sampled from it.
struct PlantResult {
  SetModel truth;
  std::map<ItemSet, double> exact;
  SetMultiset train;
  SetMultiset test;
};

double l1_distance(const SetMultiset& test, const SetMultiset& pred);
double overlap(const SetMultiset& test, const SetMultiset& pred);
std::vector<double> sizewise_overlap(const SetMultiset& test, const SetMultiset& pred);
EvalReport evaluate(const SetMultiset& test, const SetMultiset& pred);
std::string format_report(const EvalReport& r);
nlohmann::ordered_json report_json(const EvalReport& r);

// Baseline: N draws with replacement proportional to training counts.
SetMultiset histogram_model(const SetMultiset& train, long long count, Rng& rng);

// N generate_set draws; workers > 1 split the count across independent
// streams keyed by worker index, keeping output seed-deterministic.
SetMultiset generate_pool(const SetModel& m, long long count, std::uint64_t seed,
                          int workers = 1);

UnreachableReport unreachable_ratio(const ItemGraph& g, const SetMultiset& test);

PlantResult plant_benchmark(int n_items, long long n_train, long long n_test,
                            std::uint64_t seed, double size_decay = 0.0);

// l1 between a sample's empirical distribution and an exact one.
double l1_to_exact(const SetMultiset& pred, const std::map<ItemSet, double>& exact);

}  // namespace setgen
