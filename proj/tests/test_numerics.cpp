#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "setgen/numerics.hpp"
#include "setgen/rng.hpp"

using namespace setgen;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Small parameter bundle shared by the layer tests: a 3-dim GRU and a
// 3->4->3 MLP plus an embedding block, all randomly initialized.
struct Bundle {
  ParameterStore ps;
  GruIds gru;
  MlpIds mlp;
  int emb = -1;

  explicit Bundle(std::uint64_t seed, int d = 3, int hidden = 4, int rows = 5) {
    Rng rng(seed);
    ps.d = d;
    emb = ps.add("emb", rows, d);
    gru.wz = ps.add("gru.wz", d, d);
    gru.uz = ps.add("gru.uz", d, d);
    gru.bz = ps.add("gru.bz", 1, d);
    gru.wr = ps.add("gru.wr", d, d);
    gru.ur = ps.add("gru.ur", d, d);
    gru.br = ps.add("gru.br", 1, d);
    gru.wh = ps.add("gru.wh", d, d);
    gru.uh = ps.add("gru.uh", d, d);
    gru.bh = ps.add("gru.bh", 1, d);
    mlp.w1 = ps.add("mlp.w1", hidden, d);
    mlp.b1 = ps.add("mlp.b1", 1, hidden);
    mlp.w2 = ps.add("mlp.w2", d, hidden);
    mlp.b2 = ps.add("mlp.b2", 1, d);
    for (auto& a : ps.arrays) init_normal(a, 0.4, rng);
  }
};

}  // namespace

TEST_CASE("parameter store bookkeeping") {
  ParameterStore ps;
  int a = ps.add("alpha", 2, 3);
  int b = ps.add("beta", 1, 4);
  CHECK(a == 0);
  CHECK(b == 1);
  CHECK(ps.find("alpha") == a);
  CHECK(ps.find("beta") == b);
  CHECK(ps.find("gamma") == -1);
  CHECK(ps.at(a).rows == 2);
  CHECK(ps.at(a).cols == 3);
  CHECK(ps.at(a).value.size() == 6);
  CHECK(ps.at(a).grad.size() == 6);
  CHECK(ps.size() == 10);

  // Flat coordinates walk the arrays in creation order.
  ps.at(a).value[5] = 7.5;
  ps.at(b).value[0] = -2.0;
  CHECK(ps.coord(5) == 7.5);
  CHECK(ps.coord(6) == -2.0);
  ps.coord(6) = 3.0;
  CHECK(ps.at(b).value[0] == 3.0);

  ps.at(a).grad[2] = 1.25;
  ps.at(b).grad[3] = -0.5;
  CHECK(ps.grad_coord(2) == 1.25);
  CHECK(ps.grad_coord(9) == -0.5);
  ps.zero_grad();
  for (std::size_t i = 0; i < ps.size(); ++i) CHECK(ps.grad_coord(i) == 0.0);
}

TEST_CASE("initializers stay inside their envelopes") {
  Rng rng(11);
  ParamArray u;
  u.rows = 20;
  u.cols = 10;
  u.value.assign(200, 0.0);
  u.grad.assign(200, 0.0);
  init_uniform(u, 0.25, rng);
  double lo = *std::min_element(u.value.begin(), u.value.end());
  double hi = *std::max_element(u.value.begin(), u.value.end());
  CHECK(lo >= -0.25);
  CHECK(hi <= 0.25);
  CHECK(hi > lo);  // actually randomized

  ParamArray g = u;
  init_normal(g, 0.1, rng);
  double mean = std::accumulate(g.value.begin(), g.value.end(), 0.0) / 200.0;
  double var = 0.0;
  for (double x : g.value) var += (x - mean) * (x - mean);
  var /= 200.0;
  CHECK(std::fabs(mean) < 0.05);
  CHECK(var > 0.004);
  CHECK(var < 0.025);
}

TEST_CASE("logsumexp handles ties, spread, and empty mass") {
  double two[] = {0.0, 0.0};
  CHECK(logsumexp(two, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  double far[] = {1000.0, 0.0};
  CHECK(std::isfinite(logsumexp(far, 2)));
  CHECK(logsumexp(far, 2) == doctest::Approx(1000.0).epsilon(1e-12));

  double neg[] = {-kInf, -kInf};
  CHECK(logsumexp(neg, 2) == -kInf);

  double mix[] = {-kInf, 0.5};
  CHECK(logsumexp(mix, 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("masked softmax normalizes over the candidate subset") {
  std::vector<double> logits = {1.0, 2.0, 3.0, 4.0};
  std::vector<int> cand = {0, 2};
  auto p = masked_softmax(logits, cand);
  REQUIRE(p.size() == 2);
  CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-15));
  // Restricted two-way softmax over logits 1 and 3.
  double z = std::exp(1.0) + std::exp(3.0);
  CHECK(p[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-14));

  std::vector<double> huge = {1e4, 1e4 + 1.0};
  auto q = masked_softmax(huge, {0, 1});
  CHECK(std::isfinite(q[0]));
  CHECK(q[0] + q[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(q[1] / q[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("taped layers reproduce the plain kernels bitwise") {
  Bundle bd(42);
  std::vector<double> x = {0.3, -0.2, 0.9};
  std::vector<double> h = {-0.5, 0.1, 0.4};

  // Stage the inputs as parameter rows so the tape can load them.
  int xr = bd.ps.add("x", 1, 3);
  int hr = bd.ps.add("h", 1, 3);
  bd.ps.at(xr).value = x;
  bd.ps.at(hr).value = h;

  Tape t(&bd.ps);
  auto nx = t.param_row(xr, 0);
  auto nh = t.param_row(hr, 0);
  auto ng = t.gru(bd.gru, nx, nh);
  auto plain = gru_step(bd.ps, bd.gru, x, h);
  REQUIRE(t.width(ng) == 3);
  for (int i = 0; i < 3; ++i) CHECK(t.data(ng)[i] == plain[i]);

  auto nm = t.mlp(bd.mlp, nx);
  auto plain2 = mlp_forward(bd.ps, bd.mlp, x);
  REQUIRE(t.width(nm) == 3);
  for (int i = 0; i < 3; ++i) CHECK(t.data(nm)[i] == plain2[i]);
}

TEST_CASE("tape value semantics of the scalar ops") {
  Bundle bd(7);
  Tape t(&bd.ps);

  auto e1 = t.param_row(bd.emb, 1);
  const ParamArray& emb = bd.ps.at(bd.emb);
  for (int j = 0; j < 3; ++j) CHECK(t.data(e1)[j] == emb.value[3 + j]);

  auto e2 = t.param_row(bd.emb, 2);
  auto s = t.add(e1, e2);
  for (int j = 0; j < 3; ++j)
    CHECK(t.data(s)[j] == emb.value[3 + j] + emb.value[6 + j]);

  auto lg = t.logits(bd.emb, s, {0, 4});
  CHECK(t.width(lg) == 2);
  double dot0 = 0.0;
  for (int j = 0; j < 3; ++j) dot0 += t.data(s)[j] * emb.value[j];
  CHECK(t.data(lg)[0] == doctest::Approx(dot0).epsilon(1e-15));

  auto lp = t.log_pick(lg, 1);
  double lse = logsumexp(t.data(lg), 2);
  CHECK(t.value(lp) == doctest::Approx(t.data(lg)[1] - lse).epsilon(1e-15));

  auto tot = t.logsumexp_of({lp, lp});
  CHECK(t.value(tot) == doctest::Approx(t.value(lp) + std::log(2.0)).epsilon(1e-14));

  auto sc = t.sum_coords(s);
  CHECK(t.value(sc) ==
        doctest::Approx(t.data(s)[0] + t.data(s)[1] + t.data(s)[2]).epsilon(1e-15));

  auto hn = t.half_sq_norm(e1);
  double sq = 0.0;
  for (int j = 0; j < 3; ++j) sq += t.data(e1)[j] * t.data(e1)[j];
  CHECK(t.value(hn) == doctest::Approx(0.5 * sq).epsilon(1e-15));

  CHECK_THROWS_AS((void)t.value(s), std::invalid_argument);       // non-scalar
  CHECK_THROWS_AS((void)t.add(e1, lg), std::invalid_argument);    // width clash
  CHECK_THROWS_AS((void)t.log_pick(lg, 5), std::out_of_range);
  CHECK_THROWS_AS((void)t.param_row(bd.emb, 99), std::out_of_range);
  CHECK_THROWS_AS((void)t.logits(bd.emb, s, {}), std::invalid_argument);
}

TEST_CASE("gradients match central differences per op family") {
  Bundle bd(99);

  SUBCASE("half squared norm of an embedding row") {
    auto loss = [&](Tape& t) { return t.half_sq_norm(t.param_row(bd.emb, 2)); };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
  SUBCASE("sum of an elementwise add") {
    auto loss = [&](Tape& t) {
      return t.sum_coords(t.add(t.param_row(bd.emb, 0), t.param_row(bd.emb, 3)));
    };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
  SUBCASE("gru cell") {
    auto loss = [&](Tape& t) {
      auto h = t.gru(bd.gru, t.param_row(bd.emb, 0), t.param_row(bd.emb, 1));
      return t.half_sq_norm(h);
    };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
  SUBCASE("stacked gru steps") {
    auto loss = [&](Tape& t) {
      auto h = t.gru(bd.gru, t.param_row(bd.emb, 0), t.param_row(bd.emb, 1));
      h = t.gru(bd.gru, t.param_row(bd.emb, 2), h);
      return t.sum_coords(h);
    };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
  SUBCASE("mlp") {
    auto loss = [&](Tape& t) {
      return t.half_sq_norm(t.mlp(bd.mlp, t.param_row(bd.emb, 4)));
    };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
  SUBCASE("log softmax pick over embedding logits") {
    auto loss = [&](Tape& t) {
      auto c = t.mlp(bd.mlp, t.param_row(bd.emb, 1));
      return t.log_pick(t.logits(bd.emb, c, {0, 2, 4}), 1);
    };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
  SUBCASE("logsumexp of picks across two branches") {
    auto loss = [&](Tape& t) {
      auto c1 = t.gru(bd.gru, t.param_row(bd.emb, 0), t.param_row(bd.emb, 1));
      auto c2 = t.mlp(bd.mlp, t.param_row(bd.emb, 2));
      auto a = t.log_pick(t.logits(bd.emb, c1, {1, 3}), 0);
      auto b = t.log_pick(t.logits(bd.emb, c2, {0, 2, 4}), 2);
      return t.logsumexp_of({a, b});
    };
    CHECK(finite_diff_check(bd.ps, loss) < 1e-6);
  }
}

TEST_CASE("backward accumulates, scales by seed, and respects the fence") {
  Bundle bd(5);
  Tape t(&bd.ps);
  auto mk = [&]() { return t.half_sq_norm(t.param_row(bd.emb, 0)); };

  auto l1 = mk();
  t.backward(l1, 1.0);
  std::vector<double> g1 = bd.ps.at(bd.emb).grad;
  t.backward(l1, 1.0);
  for (int j = 0; j < 3; ++j)
    CHECK(bd.ps.at(bd.emb).grad[j] == doctest::Approx(2.0 * g1[j]).epsilon(1e-14));

  bd.ps.zero_grad();
  t.backward(l1, -3.0);
  for (int j = 0; j < 3; ++j)
    CHECK(bd.ps.at(bd.emb).grad[j] == doctest::Approx(-3.0 * g1[j]).epsilon(1e-14));

  // A second loss fenced to its own region yields the same gradients as it
  // would on a fresh tape.
  bd.ps.zero_grad();
  auto fence = t.mark();
  auto l2 = t.half_sq_norm(t.param_row(bd.emb, 1));
  t.backward(l2, 1.0, fence);
  std::vector<double> fenced = bd.ps.at(bd.emb).grad;

  bd.ps.zero_grad();
  Tape fresh(&bd.ps);
  auto l3 = fresh.half_sq_norm(fresh.param_row(bd.emb, 1));
  fresh.backward(l3, 1.0);
  for (int j = 0; j < 9; ++j) CHECK(bd.ps.at(bd.emb).grad[j] == fenced[j]);
  bd.ps.zero_grad();
}

TEST_CASE("rmsprop first step lands on the closed form") {
  ParameterStore ps;
  int w = ps.add("w", 1, 1);
  ps.at(w).value[0] = 0.0;
  ps.at(w).grad[0] = 1.0;

  RmsProp opt;
  CHECK(opt.v.empty());  // state allocated on first use
  opt.step(ps);

  // v = 0.01 * 1, theta -= 0.01 / (sqrt(v) + 1e-8), evaluated in doubles.
  CHECK(ps.at(w).value[0] == doctest::Approx(-0.09999999000000095).epsilon(1e-13));
  REQUIRE(opt.v.size() == 1);
  REQUIRE(opt.v[0].size() == 1);
  CHECK(opt.v[0][0] == doctest::Approx(0.010000000000000009).epsilon(1e-14));
  CHECK(opt.steps == 1);
  CHECK(ps.at(w).grad[0] == 0.0);  // consumed by the step

  // Second step with zero grad only decays v and leaves theta in place.
  double before = ps.at(w).value[0];
  opt.step(ps);
  CHECK(ps.at(w).value[0] == before);
  CHECK(opt.v[0][0] == doctest::Approx(0.99 * 0.010000000000000009).epsilon(1e-12));
  CHECK(opt.steps == 2);
}

TEST_CASE("random streams are reproducible and independent") {
  Rng a(123, 0), b(123, 0), c(123, 1);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    std::uint64_t x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff = any_diff || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform, bounded, and normal variates behave") {
  Rng rng(77);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(sum / 20000.0 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);

  for (int i = 0; i < 1000; ++i) CHECK(rng.bounded(7) < 7);
  CHECK_THROWS_AS((void)rng.bounded(0), std::invalid_argument);

  double m = 0.0, v = 0.0;
  const int kN = 40000;
  std::vector<double> zs(kN);
  for (auto& z : zs) z = rng.normal();
  for (double z : zs) m += z;
  m /= kN;
  for (double z : zs) v += (z - m) * (z - m);
  v /= kN;
  CHECK(std::fabs(m) < 0.02);
  CHECK(v == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("categorical draws follow the weights and reject bad input") {
  Rng rng(5);
  std::vector<double> w = {1.0, 0.0, 3.0};
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) ++counts[rng.categorical(w)];
  CHECK(counts[1] == 0);  // zero-mass entries are never drawn
  CHECK(static_cast<double>(counts[2]) / counts[0] == doctest::Approx(3.0).epsilon(0.08));

  CHECK_THROWS_AS((void)rng.categorical({0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)rng.categorical({-1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS((void)rng.categorical({kInf, 1.0}), std::invalid_argument);
}

TEST_CASE("shuffle permutes in place deterministically") {
  std::vector<int> v(10);
  std::iota(v.begin(), v.end(), 0);
  Rng r1(9), r2(9);
  std::vector<int> w = v;
  r1.shuffle(v);
  r2.shuffle(w);
  CHECK(v == w);  // same stream, same permutation
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> base(10);
  std::iota(base.begin(), base.end(), 0);
  CHECK(sorted == base);
}
