#include "setgen/sizebias.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace setgen {

BiasedSizePlan biased_sizes(const SizeDistribution& empirical, long long n_items,
                            long long n_train) {
  if (n_train <= 0) throw std::invalid_argument("biased_sizes: n_train must be positive");
  if (n_items < 0) throw std::invalid_argument("biased_sizes: negative item count");
  const std::vector<double>& p = empirical.probs;
  std::size_t K = p.size();
  double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (K == 0 || total <= 0.0)
    throw std::invalid_argument("biased_sizes: empty size distribution");

  BiasedSizePlan plan;
  plan.empirical = empirical;
  plan.scale = std::sqrt(static_cast<double>(n_items) / static_cast<double>(n_train));
  plan.rest.resize(K);
  plan.rest_adjusted.resize(K);
  double tail = total;
  for (std::size_t k = 0; k < K; ++k) {
    plan.rest[k] = tail > 0.0 ? p[k] / tail : 1.0;  // exhausted tail stops the product
    tail -= p[k];
    double adj = plan.rest[k] + static_cast<double>(k + 1) * plan.scale;
    plan.rest_adjusted[k] = std::min(adj, 1.0);
  }
  plan.rest[K - 1] = 1.0;
  plan.rest_adjusted[K - 1] = 1.0;

  plan.biased.probs.resize(K);
  double carry = 1.0;
  for (std::size_t k = 0; k < K; ++k) {
    plan.biased.probs[k] = carry * plan.rest_adjusted[k];
    carry *= 1.0 - plan.rest_adjusted[k];
  }
  return plan;
}

std::vector<long long> apportion_counts(const SizeDistribution& targets, long long count) {
  if (count < 0) throw std::invalid_argument("apportion_counts: negative count");
  const std::vector<double>& q = targets.probs;
  double total = std::accumulate(q.begin(), q.end(), 0.0);
  if (q.empty() || total <= 0.0)
    throw std::invalid_argument("apportion_counts: empty target distribution");

  std::vector<long long> out(q.size(), 0);
  std::vector<std::pair<double, std::size_t>> residue;
  long long assigned = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    double want = static_cast<double>(count) * q[k] / total;
    out[k] = static_cast<long long>(std::floor(want));
    assigned += out[k];
    residue.push_back({want - std::floor(want), k});
  }
  std::sort(residue.begin(), residue.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // ties favor the smaller size
  });
  for (long long i = 0; i < count - assigned; ++i) ++out[residue[i % residue.size()].second];
  return out;
}

namespace {

using Bucket = std::vector<const ItemSet*>;

std::map<int, Bucket> size_buckets(const SetMultiset& pool) {
  std::map<int, Bucket> buckets;
  for (const auto& [s, count] : pool.entries) {
    Bucket& b = buckets[static_cast<int>(s.size())];
    for (long long c = 0; c < count; ++c) b.push_back(&s);
  }
  return buckets;
}

SetMultiset recombine(const std::map<int, Bucket>* per_size_source_1,
                      const std::map<int, Bucket>& rest_source,
                      const SizeDistribution& targets, long long count, Rng& rng) {
  std::vector<long long> counts = apportion_counts(targets, count);
  SetMultiset out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    int k = static_cast<int>(i) + 1;
    if (counts[i] == 0) continue;
    const std::map<int, Bucket>& src =
        (k == 1 && per_size_source_1) ? *per_size_source_1 : rest_source;
    auto it = src.find(k);
    if (it == src.end() || it->second.empty()) throw MissingBucketError(k);
    const Bucket& b = it->second;
    for (long long c = 0; c < counts[i]; ++c)
      out.add(*b[rng.bounded(static_cast<std::uint64_t>(b.size()))]);
  }
  return out;
}

}  // namespace

SetMultiset stratified_recombine(const SetMultiset& pool, const SizeDistribution& targets,
                                 long long count, Rng& rng) {
  std::map<int, Bucket> buckets = size_buckets(pool);
  return recombine(nullptr, buckets, targets, count, rng);
}

SetMultiset hybrid_recombine(const SetMultiset& histogram_train,
                             const SetMultiset& model_pool, const SizeDistribution& targets,
                             long long count, Rng& rng) {
  std::map<int, Bucket> singles = size_buckets(histogram_train);
  std::map<int, Bucket> buckets = size_buckets(model_pool);
  return recombine(&singles, buckets, targets, count, rng);
}

DerivativeStat derivative_stat(const std::vector<double>& q, const std::vector<double>& p) {
  if (q.size() != p.size())
    throw std::invalid_argument("derivative_stat: mismatched supports");
  DerivativeStat out;
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    double diff = q[i] - p[i];
    out.signed_stat += q[i] * static_cast<double>((diff > 0.0) - (diff < 0.0));
    if (q[i] > 0.0) {
      if (p[i] > 0.0)
        kl += q[i] * std::log(q[i] / p[i]);
      else
        kl = std::numeric_limits<double>::infinity();
    }
  }
  out.kl_form = 1.0 + kl;
  return out;
}

CorrelationResult correlation_sim(int dims, int pairs, SimSource source, Rng& rng) {
  if (dims < 2) throw std::invalid_argument("correlation_sim: dims must be >= 2");
  if (pairs < 100) throw std::invalid_argument("correlation_sim: pairs must be >= 100");
  auto draw = [&](std::vector<double>& v) {
    double sum = 0.0;
    for (double& x : v) {
      x = source == SimSource::Uniform ? rng.uniform() : std::fabs(rng.normal());
      sum += x;
    }
    if (sum <= 0.0) {
      std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
      return;
    }
    for (double& x : v) x /= sum;
  };

  CorrelationResult res;
  res.table.reserve(static_cast<std::size_t>(pairs));
  std::vector<double> a(static_cast<std::size_t>(dims)), b(static_cast<std::size_t>(dims));
  for (int i = 0; i < pairs; ++i) {
    draw(a);
    draw(b);
    double l1 = 0.0;
    for (int j = 0; j < dims; ++j) l1 += std::fabs(a[j] - b[j]);
    res.table.push_back({l1, derivative_stat(a, b).signed_stat});
  }

  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : res.table) {
    mx += x;
    my += y;
  }
  mx /= res.table.size();
  my /= res.table.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& [x, y] : res.table) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  res.pearson = sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return res;
}

}  // namespace setgen
