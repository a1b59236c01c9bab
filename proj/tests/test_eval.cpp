#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "setgen/eval.hpp"

using namespace setgen;

namespace {

ItemUniverse universe_of(const std::vector<std::string>& labels) {
  ItemUniverse u;
  for (const auto& l : labels) u.intern(l);
  return u;
}

SetMultiset ms(const std::vector<std::pair<ItemSet, long long>>& entries) {
  SetMultiset out;
  for (const auto& [s, c] : entries) out.add(s, c);
  return out;
}

SetModel two_item_tabular() {
  SetModel m = make_tabular(complete_graph(universe_of({"a", "b"})), 2);
  m.table[0b00] = TabularRow{{0.5, 0.5}, 0.0};
  m.table[0b01] = TabularRow{{0.0, 0.7}, 0.3};
  m.table[0b10] = TabularRow{{0.6, 0.0}, 0.4};
  m.table[0b11] = TabularRow{{0.0, 0.0}, 1.0};
  return m;
}

}  // namespace

TEST_CASE("l1 distance walks the union of supports") {
  CHECK(l1_distance(ms({{{0}, 3}}), ms({{{0}, 7}})) == 0.0);
  CHECK(l1_distance(ms({{{0}, 1}}), ms({{{1}, 1}})) == 2.0);
  CHECK(l1_distance(ms({{{0}, 1}}), ms({{{0}, 1}, {{1}, 1}})) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(l1_distance(ms({{{0}, 2}, {{1}, 2}}), ms({{{0}, 1}, {{1}, 1}})) == 0.0);
  CHECK_THROWS_AS((void)l1_distance(SetMultiset{}, ms({{{0}, 1}})),
                  std::invalid_argument);
}

TEST_CASE("overlap complements half the l1 distance") {
  SetMultiset test = ms({{{0}, 40}});
  SetMultiset pred = ms({{{0}, 21}, {{1}, 19}});
  CHECK(l1_distance(test, pred) == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(overlap(test, pred) == doctest::Approx(0.525).epsilon(1e-14));

  Rng rng(91);
  for (int rep = 0; rep < 50; ++rep) {
    auto random_ms = [&]() {
      SetMultiset out;
      int k = 1 + static_cast<int>(rng.bounded(12));
      for (int i = 0; i < k; ++i) {
        ItemSet s;
        for (int v = 0; v < 6; ++v)
          if (rng.uniform() < 0.4) s.push_back(v);
        if (s.empty()) s.push_back(static_cast<int>(rng.bounded(6)));
        out.add(s, 1 + static_cast<long long>(rng.bounded(20)));
      }
      return out;
    };
    SetMultiset a = random_ms(), b = random_ms();
    CHECK(std::fabs(overlap(a, b) - (1.0 - l1_distance(a, b) / 2.0)) <= 1e-12);
  }
}

TEST_CASE("size buckets partition the overlap exactly") {
  SetMultiset test = ms({{{0}, 4}, {{0, 1}, 4}, {{0, 1, 2}, 4}, {{0, 1, 2, 3}, 4},
                         {{0, 1, 2, 3, 4}, 2}, {{0, 1, 2, 3, 4, 5}, 2}});
  SetMultiset pred = test;
  std::vector<double> o = sizewise_overlap(test, pred);
  REQUIRE(o.size() == kSizeBuckets);
  CHECK(o[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(o[3] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(o[4] == doctest::Approx(0.2).epsilon(1e-15));  // sizes 5 and 6 share a bucket
  double sum = 0.0;
  for (double v : o) sum += v;
  CHECK(overlap(test, pred) == sum);  // same summation order: identical bits
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("evaluation report carries counts, metrics, and size histograms") {
  SetMultiset test = ms({{{0}, 40}});
  SetMultiset pred = ms({{{0}, 21}, {{1}, 19}});
  EvalReport r = evaluate(test, pred);
  CHECK(r.n_test == 40);
  CHECK(r.n_pred == 40);
  CHECK(r.l1 == doctest::Approx(0.95).epsilon(1e-14));
  CHECK(r.overlap == doctest::Approx(0.525).epsilon(1e-14));
  REQUIRE(r.sizewise_overlap.size() == kSizeBuckets);
  CHECK(r.sizewise_overlap[0] == doctest::Approx(0.525).epsilon(1e-14));
  CHECK(r.sizes_test.probs == std::vector<double>{1.0});
  CHECK(r.sizes_pred.probs == std::vector<double>{1.0});

  std::string text = format_report(r);
  CHECK(text.find("n_test  40") != std::string::npos);
  CHECK(text.find("n_pred  40") != std::string::npos);
  CHECK(text.find("l1      0.950000") != std::string::npos);
  CHECK(text.find("overlap 0.525000") != std::string::npos);
  CHECK(text.find(">=5") != std::string::npos);
  CHECK(text.find("sizes (test, pred):") != std::string::npos);

  nlohmann::ordered_json j = report_json(r);
  std::string dump = j.dump();
  const char* keys[] = {"\"l1\"",         "\"overlap\"", "\"sizewise_overlap\"",
                        "\"sizes_pred\"", "\"sizes_test\"", "\"n_test\"", "\"n_pred\""};
  std::size_t pos = 0;
  for (const char* k : keys) {
    std::size_t at = dump.find(k);
    REQUIRE(at != std::string::npos);
    CHECK(at >= pos);  // field order is part of the format
    pos = at;
  }
  CHECK(j["l1"].get<double>() == r.l1);
  CHECK(j["n_pred"].get<long long>() == 40);
}

TEST_CASE("histogram baseline resamples the training distribution") {
  SetMultiset train = ms({{{0}, 3}, {{1}, 1}});
  Rng rng(15);
  SetMultiset out = histogram_model(train, 20000, rng);
  CHECK(out.total == 20000);
  // No novel sets, frequencies near 3:1.
  for (const auto& [s, c] : out.entries) CHECK(train.count(s) > 0);
  CHECK(out.count({0}) / 20000.0 == doctest::Approx(0.75).epsilon(0.03));
  CHECK(l1_distance(train, out) < 0.03);

  Rng r1(8), r2(8);
  SetMultiset a = histogram_model(train, 100, r1);
  SetMultiset b = histogram_model(train, 100, r2);
  CHECK(a.entries == b.entries);

  CHECK_THROWS_AS((void)histogram_model(SetMultiset{}, 5, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)histogram_model(train, -1, rng), std::invalid_argument);
}

TEST_CASE("model pools are sized, deterministic, and respect the model") {
  SetModel m = two_item_tabular();

  SetMultiset empty = generate_pool(m, 0, 1);
  CHECK(empty.total == 0);

  SetMultiset pool = generate_pool(m, 6000, 77);
  CHECK(pool.total == 6000);
  CHECK(pool.count({0}) / 6000.0 == doctest::Approx(0.15).epsilon(0.12));
  CHECK(pool.count({0, 1}) / 6000.0 == doctest::Approx(0.65).epsilon(0.05));

  SetMultiset again = generate_pool(m, 6000, 77);
  CHECK(pool.entries == again.entries);

  SetMultiset split = generate_pool(m, 1000, 77, 3);
  CHECK(split.total == 1000);
  SetMultiset split2 = generate_pool(m, 1000, 77, 3);
  CHECK(split.entries == split2.entries);

  CHECK_THROWS_AS((void)generate_pool(m, 10, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)generate_pool(m, -1, 1), std::invalid_argument);
}

TEST_CASE("unreachable mass is split by bucket and flags foreign items") {
  ItemGraph chain = graph_from_edges(universe_of({"a", "b", "c"}), {{0, 1}, {1, 2}});
  SetMultiset test = ms({{{0}, 1}, {{0, 2}, 2}, {{0, 1}, 1}});
  UnreachableReport r = unreachable_ratio(chain, test);
  CHECK(r.ratio == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.by_bucket[0] == 0.0);
  CHECK(r.by_bucket[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(r.out_of_universe == 0);

  SetMultiset foreign = ms({{{0}, 1}, {{5}, 3}});
  UnreachableReport f = unreachable_ratio(chain, foreign);
  CHECK(f.out_of_universe == 3);
  CHECK(f.ratio == doctest::Approx(0.75).epsilon(1e-14));

  UnreachableReport none = unreachable_ratio(chain, SetMultiset{});
  CHECK(none.ratio == 0.0);
}

TEST_CASE("planted benchmarks expose their exact distribution") {
  PlantResult plant = plant_benchmark(4, 500, 300, 9);
  CHECK(plant.train.total == 500);
  CHECK(plant.test.total == 300);
  REQUIRE(plant.exact.size() == 15);

  double total = 0.0;
  for (const auto& [s, p] : plant.exact) {
    total += p;
    CHECK(p > 0.0);
    CHECK(set_prob_recursion(plant.truth, s) == doctest::Approx(p).epsilon(1e-10));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  for (const auto& [s, c] : plant.train.entries) CHECK(plant.exact.count(s) == 1);
  for (const auto& [s, c] : plant.test.entries) CHECK(plant.exact.count(s) == 1);

  PlantResult again = plant_benchmark(4, 500, 300, 9);
  CHECK(plant.train.entries == again.train.entries);
  CHECK(plant.test.entries == again.test.entries);
  CHECK(plant.train.entries != plant.test.entries);  // separate streams

  CHECK_THROWS_AS((void)plant_benchmark(0, 10, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)plant_benchmark(13, 10, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)plant_benchmark(3, -1, 10, 1), std::invalid_argument);
}

TEST_CASE("size decay concentrates planted mass on small sets") {
  auto mean_size = [](const PlantResult& p) {
    double m = 0.0;
    for (const auto& [s, prob] : p.exact) m += prob * static_cast<double>(s.size());
    return m;
  };
  PlantResult flat = plant_benchmark(6, 0, 0, 11);
  PlantResult decayed = plant_benchmark(6, 0, 0, 11, 0.5);
  CHECK(mean_size(decayed) < mean_size(flat));
  CHECK(mean_size(decayed) < 2.5);
}

TEST_CASE("sampling error against the exact distribution shrinks with more draws") {
  PlantResult small = plant_benchmark(4, 0, 200, 21);
  PlantResult large = plant_benchmark(4, 0, 20000, 21);
  double e_small = l1_to_exact(small.test, small.exact);
  double e_large = l1_to_exact(large.test, large.exact);
  CHECK(e_large < e_small);
  CHECK(e_large < 0.1);
}

TEST_CASE("l1 against an exact distribution covers both supports") {
  std::map<ItemSet, double> exact = {{{0}, 0.5}, {{1}, 0.5}};
  CHECK(l1_to_exact(ms({{{0}, 1}}), exact) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(l1_to_exact(ms({{{0}, 1}, {{1}, 1}}), exact) ==
        doctest::Approx(0.0).epsilon(1e-14));
  CHECK(l1_to_exact(ms({{{2}, 1}}), exact) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS((void)l1_to_exact(SetMultiset{}, exact), std::invalid_argument);
}
