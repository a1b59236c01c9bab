#include "setgen/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

namespace setgen {

namespace {

int bucket_of(std::size_t size) {
  return static_cast<int>(std::min<std::size_t>(size, kSizeBuckets)) - 1;
}

// Merged walk over both supports in set order, emitting relative frequencies.
template <typename Fn>
void joint_walk(const SetMultiset& test, const SetMultiset& pred, Fn&& fn) {
  if (test.total <= 0 || pred.total <= 0)
    throw std::invalid_argument("metrics need non-empty multisets");
  double nt = static_cast<double>(test.total), np = static_cast<double>(pred.total);
  auto it = test.entries.begin();
  auto ip = pred.entries.begin();
  while (it != test.entries.end() || ip != pred.entries.end()) {
    if (ip == pred.entries.end() || (it != test.entries.end() && it->first < ip->first)) {
      fn(it->first, static_cast<double>(it->second) / nt, 0.0);
      ++it;
    } else if (it == test.entries.end() || ip->first < it->first) {
      fn(ip->first, 0.0, static_cast<double>(ip->second) / np);
      ++ip;
    } else {
      fn(it->first, static_cast<double>(it->second) / nt,
         static_cast<double>(ip->second) / np);
      ++it;
      ++ip;
    }
  }
}

}  // namespace

double l1_distance(const SetMultiset& test, const SetMultiset& pred) {
  double l1 = 0.0;
  joint_walk(test, pred, [&](const ItemSet&, double pt, double pp) {
    l1 += std::fabs(pt - pp);
  });
  return l1;
}

std::vector<double> sizewise_overlap(const SetMultiset& test, const SetMultiset& pred) {
  std::vector<double> o(kSizeBuckets, 0.0);
  joint_walk(test, pred, [&](const ItemSet& s, double pt, double pp) {
    o[bucket_of(s.size())] += std::min(pt, pp);
  });
  return o;
}

double overlap(const SetMultiset& test, const SetMultiset& pred) {
  std::vector<double> o = sizewise_overlap(test, pred);
  double total = 0.0;
  for (double v : o) total += v;  // summed in bucket order so the partition is exact
  return total;
}

EvalReport evaluate(const SetMultiset& test, const SetMultiset& pred) {
  EvalReport r;
  r.l1 = l1_distance(test, pred);
  r.sizewise_overlap = sizewise_overlap(test, pred);
  for (double v : r.sizewise_overlap) r.overlap += v;
  r.sizes_test = empirical_size_distribution(test);
  r.sizes_pred = empirical_size_distribution(pred);
  r.n_test = test.total;
  r.n_pred = pred.total;
  return r;
}

std::string format_report(const EvalReport& r) {
  char line[128];
  std::string out;
  std::snprintf(line, sizeof line, "n_test  %lld\n", r.n_test);
  out += line;
  std::snprintf(line, sizeof line, "n_pred  %lld\n", r.n_pred);
  out += line;
  std::snprintf(line, sizeof line, "l1      %.6f\n", r.l1);
  out += line;
  std::snprintf(line, sizeof line, "overlap %.6f\n", r.overlap);
  out += line;
  out += "size-wise overlap:\n";
  for (int k = 0; k < kSizeBuckets; ++k) {
    std::snprintf(line, sizeof line, "  %-3s %.6f\n", k + 1 < kSizeBuckets ?
                  std::to_string(k + 1).c_str() : ">=5", r.sizewise_overlap[k]);
    out += line;
  }
  std::size_t K = std::max(r.sizes_test.probs.size(), r.sizes_pred.probs.size());
  out += "sizes (test, pred):\n";
  for (std::size_t k = 0; k < K; ++k) {
    std::snprintf(line, sizeof line, "  %-3zu %.6f %.6f\n", k + 1, r.sizes_test.at(k + 1),
                  r.sizes_pred.at(k + 1));
    out += line;
  }
  return out;
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["l1"] = r.l1;
  j["overlap"] = r.overlap;
  j["sizewise_overlap"] = r.sizewise_overlap;
  j["sizes_pred"] = r.sizes_pred.probs;
  j["sizes_test"] = r.sizes_test.probs;
  j["n_test"] = r.n_test;
  j["n_pred"] = r.n_pred;
  return j;
}

SetMultiset histogram_model(const SetMultiset& train, long long count, Rng& rng) {
  if (train.total <= 0) throw std::invalid_argument("histogram_model: empty training data");
  if (count < 0) throw std::invalid_argument("histogram_model: negative count");
  std::vector<std::pair<long long, const ItemSet*>> cum;
  cum.reserve(train.entries.size());
  long long running = 0;
  for (const auto& [s, c] : train.entries) {
    running += c;
    cum.push_back({running, &s});
  }
  SetMultiset out;
  for (long long i = 0; i < count; ++i) {
    long long u = static_cast<long long>(rng.bounded(static_cast<std::uint64_t>(running)));
    auto it = std::upper_bound(cum.begin(), cum.end(), u,
                               [](long long v, const auto& e) { return v < e.first; });
    out.add(*it->second);
  }
  return out;
}

SetMultiset generate_pool(const SetModel& m, long long count, std::uint64_t seed,
                          int workers) {
  if (workers < 1) throw std::invalid_argument("generate_pool: workers must be >= 1");
  if (count < 0) throw std::invalid_argument("generate_pool: negative count");
  // Forward passes only: the tape never runs backward here.
  ParameterStore* ps = const_cast<ParameterStore*>(&m.params);
  long long base = count / workers, rem = count % workers;
  auto run = [&](int w, std::vector<ItemSet>& sink) {
    long long quota = base + (w < rem ? 1 : 0);
    sink.reserve(static_cast<std::size_t>(quota));
    Rng rng(seed, static_cast<std::uint64_t>(w));
    Tape tape(ps);
    for (long long i = 0; i < quota; ++i) {
      tape.reset();
      sink.push_back(generate_set(m, tape, rng));
    }
  };
  std::vector<std::vector<ItemSet>> parts(static_cast<std::size_t>(workers));
  if (workers == 1) {
    run(0, parts[0]);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w, std::ref(parts[w]));
    for (auto& th : pool) th.join();
  }
  SetMultiset out;
  for (const auto& part : parts)
    for (const ItemSet& s : part) out.add(s);
  return out;
}

UnreachableReport unreachable_ratio(const ItemGraph& g, const SetMultiset& test) {
  UnreachableReport r;
  r.by_bucket.assign(kSizeBuckets, 0.0);
  std::vector<long long> total(kSizeBuckets, 0), bad(kSizeBuckets, 0);
  long long all = 0, all_bad = 0;
  for (const auto& [s, c] : test.entries) {
    int b = bucket_of(s.size());
    total[b] += c;
    all += c;
    bool foreign = false;
    for (int v : s)
      if (v < 0 || v >= g.universe.n) foreign = true;
    bool unreachable = foreign || !induced_subgraph_connected(g, s);
    if (foreign) r.out_of_universe += c;
    if (unreachable) {
      bad[b] += c;
      all_bad += c;
    }
  }
  for (int b = 0; b < kSizeBuckets; ++b)
    r.by_bucket[b] = total[b] > 0 ? static_cast<double>(bad[b]) / total[b] : 0.0;
  r.ratio = all > 0 ? static_cast<double>(all_bad) / all : 0.0;
  return r;
}

PlantResult plant_benchmark(int n_items, long long n_train, long long n_test,
                            std::uint64_t seed, double size_decay) {
  if (n_items < 1 || n_items > 12)
    throw std::invalid_argument("plant_benchmark: need 1 <= n_items <= 12");
  if (n_train < 0 || n_test < 0) throw std::invalid_argument("plant_benchmark: negative count");
  std::size_t m = static_cast<std::size_t>(1) << n_items;

  std::vector<double> choose(static_cast<std::size_t>(n_items) + 1, 1.0);
  for (std::size_t k = 1; k < choose.size(); ++k)
    choose[k] = choose[k - 1] * (n_items - k + 1.0) / static_cast<double>(k);

  Rng wrng(seed, 0);
  std::vector<double> q(m, 0.0);
  double total = 0.0;
  for (std::size_t mask = 1; mask < m; ++mask) {
    double w = wrng.exponential();
    if (size_decay > 0.0) {
      int k = std::popcount(static_cast<std::uint32_t>(mask));
      w *= std::pow(size_decay, k) / choose[static_cast<std::size_t>(k)];
    }
    q[mask] = w;
    total += w;
  }
  for (double& v : q) v /= total;

  PlantResult out;
  out.truth = theorem2_construct(q, n_items);
  std::vector<ItemSet> sets(m);
  std::vector<double> cum(m, 0.0);
  double running = 0.0;
  for (std::size_t mask = 1; mask < m; ++mask) {
    sets[mask] = set_of_mask(static_cast<std::uint32_t>(mask));
    out.exact[sets[mask]] = q[mask];
    running += q[mask];
    cum[mask] = running;
  }
  auto sample_into = [&](SetMultiset& sink, long long n, std::uint64_t stream) {
    Rng rng(seed, stream);
    for (long long i = 0; i < n; ++i) {
      double u = rng.uniform();
      auto it = std::upper_bound(cum.begin() + 1, cum.end(), u);
      std::size_t mask = it == cum.end() ? m - 1 : static_cast<std::size_t>(it - cum.begin());
      sink.add(sets[mask]);
    }
  };
  sample_into(out.train, n_train, 1);
  sample_into(out.test, n_test, 2);
  return out;
}

double l1_to_exact(const SetMultiset& pred, const std::map<ItemSet, double>& exact) {
  if (pred.total <= 0) throw std::invalid_argument("l1_to_exact: empty sample");
  double np = static_cast<double>(pred.total);
  double l1 = 0.0;
  auto ip = pred.entries.begin();
  auto ie = exact.begin();
  while (ip != pred.entries.end() || ie != exact.end()) {
    if (ie == exact.end() || (ip != pred.entries.end() && ip->first < ie->first)) {
      l1 += static_cast<double>(ip->second) / np;
      ++ip;
    } else if (ip == pred.entries.end() || ie->first < ip->first) {
      l1 += std::fabs(ie->second);
      ++ie;
    } else {
      l1 += std::fabs(static_cast<double>(ip->second) / np - ie->second);
      ++ip;
      ++ie;
    }
  }
  return l1;
}

}  // namespace setgen
