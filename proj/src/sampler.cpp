#include "setgen/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace setgen {

std::vector<int> valid_actions(const SetModel& m, const GenState& s, const ItemSet& target) {
  std::vector<int> out;
  bool complete = s.added.size() == target.size();
  for (int a : m.candidate_items(s)) {
    if (a == m.n) {
      if (complete) out.push_back(a);
    } else if (std::binary_search(target.begin(), target.end(), a)) {
      out.push_back(a);  // candidates never repeat added items
    }
  }
  return out;
}

namespace {

// Target-constrained episode shared by sampling and re-weighing. `choose`
// receives the action distribution, the valid positions into it, and their
// total probability mass, and returns the chosen position index.
template <typename Chooser>
WeightedPath posterior_walk(const SetModel& m, Tape& t, const ItemSet& target,
                            bool build_node, Chooser&& choose) {
  if (target.empty()) throw std::invalid_argument("posterior path: empty target");
  if (build_node && m.kind == ModelKind::Tabular)
    throw std::logic_error("posterior path: tabular models record no tape nodes");
  WeightedPath wp;
  GenState st = m.initial_state(t);
  std::size_t step = 0;
  while (true) {
    ActionDist dist = m.action_dist(t, st);
    bool complete = st.added.size() == target.size();
    std::vector<int> valid;
    double z = 0.0;
    for (std::size_t i = 0; i < dist.items.size(); ++i) {
      int a = dist.items[i];
      bool ok = a == m.n ? complete : std::binary_search(target.begin(), target.end(), a);
      if (ok) {
        valid.push_back(static_cast<int>(i));
        z += dist.prob[i];
      }
    }
    if (valid.empty() || z <= 0.0)
      throw std::runtime_error("posterior path: target unreachable at step " +
                               std::to_string(step));
    int idx = valid[choose(dist, valid, z, step)];
    wp.proposal_logprob += dist.logp[idx] - std::log(z);
    wp.log_weight += std::log(z);
    wp.logprob += dist.logp[idx];
    if (build_node) {
      Tape::Ref pick = t.log_pick(dist.logits, idx);
      wp.logprob_node = wp.logprob_node < 0 ? pick : t.add(wp.logprob_node, pick);
    }
    int action = dist.items[idx];
    if (action == m.n) break;
    wp.path.items.push_back(action);
    st = m.advance(t, st, action);
    ++step;
  }
  wp.path.terminated = true;
  return wp;
}

}  // namespace

WeightedPath sample_posterior_path(const SetModel& m, Tape& t, const ItemSet& target,
                                   Rng& rng, bool build_node) {
  std::vector<double> q;
  return posterior_walk(m, t, target, build_node,
                        [&](const ActionDist& dist, const std::vector<int>& valid, double z,
                            std::size_t) {
                          q.resize(valid.size());
                          for (std::size_t j = 0; j < valid.size(); ++j)
                            q[j] = dist.prob[valid[j]] / z;
                          return rng.categorical(q);
                        });
}

WeightedPath weigh_path(const SetModel& m, Tape& t, const GeneratingPath& path) {
  if (!path.terminated) throw std::invalid_argument("weigh_path: path must be terminated");
  ItemSet target = normalized_set(path.items);
  return posterior_walk(
      m, t, target, false,
      [&](const ActionDist& dist, const std::vector<int>& valid, double, std::size_t step) {
        int want = step < path.items.size() ? path.items[step] : m.n;
        for (std::size_t j = 0; j < valid.size(); ++j)
          if (dist.items[valid[j]] == want) return static_cast<int>(j);
        throw std::runtime_error("weigh_path: step " + std::to_string(step) +
                                 " is not a valid action");
      });
}

GradEstimate grad_log_set_prob(const SetModel& m, Tape& t, const ItemSet& target,
                               int samples, Rng& rng, double scale) {
  if (samples < 1) throw std::invalid_argument("grad_log_set_prob: samples must be >= 1");
  struct Draw {
    Tape::Ref node;
    int mark;
  };
  std::vector<Draw> draws;
  draws.reserve(static_cast<std::size_t>(samples));
  GradEstimate ge;
  ge.log_weights.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    int mark = t.mark();
    WeightedPath wp = sample_posterior_path(m, t, target, rng, true);
    draws.push_back({wp.logprob_node, mark});
    ge.log_weights.push_back(wp.log_weight);
  }
  double log_r_total = logsumexp(ge.log_weights.data(), samples);
  ge.log_mean_weight = log_r_total - std::log(static_cast<double>(samples));
  for (int i = 0; i < samples; ++i) {
    double w = scale * std::exp(ge.log_weights[i] - log_r_total);
    if (w != 0.0) t.backward(draws[i].node, w, draws[i].mark);
  }
  return ge;
}

TrainResult train(SetModel& m, const SetMultiset& data, const TrainConfig& cfg,
                  std::ostream* log, const std::function<bool(int, double)>& on_epoch) {
  if (m.kind == ModelKind::Tabular) throw std::logic_error("train: tabular models have no parameters");
  if (cfg.samples < 1 || cfg.batch < 1 || cfg.epochs < 0)
    throw std::invalid_argument("train: bad config");

  std::vector<ItemSet> reachable;
  std::vector<int> inst;
  TrainResult res;
  for (const auto& [s, count] : data.entries) {
    if (!induced_subgraph_connected(m.graph, s)) {
      res.skipped += count;
      continue;
    }
    int id = static_cast<int>(reachable.size());
    reachable.push_back(s);
    for (long long c = 0; c < count; ++c) inst.push_back(id);
  }
  if (inst.empty()) throw std::runtime_error("train: no reachable training sets");

  Tape tape(&m.params);
  Rng rng(cfg.seed, 0);
  RmsProp opt;
  opt.lr = cfg.lr;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(inst);
    double nll_sum = 0.0;
    long long done = 0;
    for (std::size_t start = 0; start < inst.size(); start += cfg.batch) {
      std::size_t end = std::min(start + static_cast<std::size_t>(cfg.batch), inst.size());
      tape.reset();
      m.params.zero_grad();
      double scale = -1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        GradEstimate ge =
            grad_log_set_prob(m, tape, reachable[inst[k]], cfg.samples, rng, scale);
        nll_sum -= ge.log_mean_weight;
        ++done;
      }
      opt.step(m.params);
    }
    double nll = nll_sum / static_cast<double>(done);
    res.epoch_nll.push_back(nll);
    if (log) {
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char line[160];
      std::snprintf(line, sizeof line, "epoch %d nll %.6f skipped %lld time %.2fs", epoch,
                    nll, res.skipped, secs);
      *log << line << '\n';
    }
    if (on_epoch && !on_epoch(epoch, nll)) break;
  }
  return res;
}

}  // namespace setgen
