#include "setgen/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace setgen {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Gru2Set: return "gru2set";
    case ModelKind::SetNn: return "setnn";
    case ModelKind::Mrw: return "mrw";
    case ModelKind::Tabular: return "tabular";
  }
  return "?";
}

ModelKind kind_from_name(const std::string& name) {
  if (name == "gru2set") return ModelKind::Gru2Set;
  if (name == "setnn") return ModelKind::SetNn;
  if (name == "mrw") return ModelKind::Mrw;
  if (name == "tabular") return ModelKind::Tabular;
  throw std::invalid_argument("unknown model kind: " + name);
}

std::uint32_t mask_of(const ItemSet& s) {
  std::uint32_t m = 0;
  for (int v : s) {
    if (v < 0 || v >= 32) throw std::invalid_argument("mask_of: item out of mask range");
    m |= (1u << v);
  }
  return m;
}

ItemSet set_of_mask(std::uint32_t mask) {
  ItemSet s;
  for (int v = 0; v < 32; ++v)
    if (mask & (1u << v)) s.push_back(v);
  return s;
}

namespace {

void base_init(SetModel& m, const ItemGraph& g, int d, int max_size) {
  if (g.universe.n < 1) throw std::invalid_argument("model needs at least one item");
  if (max_size < 1) throw std::invalid_argument("max_size must be >= 1");
  m.graph = g;
  m.n = g.universe.n;
  m.d = d;
  m.max_size = max_size;
  m.params.d = d;
}

void add_embeddings(SetModel& m, Rng& rng) {
  m.emb = m.params.add("embeddings", m.n + 1, m.d);
  init_normal(m.params.at(m.emb), 0.1, rng);
  m.init = m.params.add("init_choice", 1, m.d);
  init_normal(m.params.at(m.init), 0.1, rng);
}

int add_matrix(SetModel& m, const std::string& name, int rows, int cols, Rng& rng) {
  int id = m.params.add(name, rows, cols);
  init_uniform(m.params.at(id), 1.0 / std::sqrt(static_cast<double>(cols)), rng);
  return id;
}

int add_bias(SetModel& m, const std::string& name, int cols) {
  return m.params.add(name, 1, cols);  // zero-initialized
}

}  // namespace

SetModel make_gru2set(const ItemGraph& g, int d, int max_size, Rng& rng) {
  SetModel m;
  m.kind = ModelKind::Gru2Set;
  base_init(m, g, d, max_size);
  add_embeddings(m, rng);
  m.gru.wz = add_matrix(m, "gru.wz", d, d, rng);
  m.gru.uz = add_matrix(m, "gru.uz", d, d, rng);
  m.gru.bz = add_bias(m, "gru.bz", d);
  m.gru.wr = add_matrix(m, "gru.wr", d, d, rng);
  m.gru.ur = add_matrix(m, "gru.ur", d, d, rng);
  m.gru.br = add_bias(m, "gru.br", d);
  m.gru.wh = add_matrix(m, "gru.wh", d, d, rng);
  m.gru.uh = add_matrix(m, "gru.uh", d, d, rng);
  m.gru.bh = add_bias(m, "gru.bh", d);
  return m;
}

SetModel make_setnn(const ItemGraph& g, int d, int max_size, Rng& rng, int hidden) {
  if (hidden < 1) throw std::invalid_argument("make_setnn: hidden must be >= 1");
  SetModel m;
  m.kind = ModelKind::SetNn;
  base_init(m, g, d, max_size);
  add_embeddings(m, rng);
  m.mlp.w1 = add_matrix(m, "mlp.w1", hidden, d, rng);
  m.mlp.b1 = add_bias(m, "mlp.b1", hidden);
  m.mlp.w2 = add_matrix(m, "mlp.w2", d, hidden, rng);
  m.mlp.b2 = add_bias(m, "mlp.b2", d);
  return m;
}

SetModel make_mrw(const ItemGraph& g, int d, int max_size, Rng& rng) {
  SetModel m;
  m.kind = ModelKind::Mrw;
  base_init(m, g, d, max_size);
  add_embeddings(m, rng);
  return m;
}

SetModel make_tabular(const ItemGraph& g, int max_size) {
  if (g.universe.n > 32)
    throw std::invalid_argument("tabular models support at most 32 items");
  SetModel m;
  m.kind = ModelKind::Tabular;
  base_init(m, g, 0, max_size);
  return m;
}

GenState SetModel::initial_state(Tape& t) const {
  GenState s;
  if (kind != ModelKind::Tabular) s.choice = t.param_row(init, 0);
  return s;
}

std::vector<int> SetModel::candidate_items(const GenState& s) const {
  std::vector<int> out;
  if (s.added.empty()) {
    out.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = i;
    return out;  // stop item excluded at the empty state
  }
  std::vector<char> member(n, 0), seen(n, 0);
  for (int v : s.added) member[v] = 1;
  for (int v : s.added)
    for (int w : graph.adj[v])
      if (!member[w]) seen[w] = 1;
  for (int i = 0; i < n; ++i)
    if (seen[i]) out.push_back(i);
  out.push_back(n);  // the stop item is always adjacent
  return out;
}

ActionDist SetModel::action_dist(Tape& t, const GenState& s) const {
  ActionDist dist;
  dist.items = candidate_items(s);
  std::size_t k = dist.items.size();
  dist.logp.resize(k);
  dist.prob.resize(k);
  if (kind == ModelKind::Tabular) {
    auto it = table.find(s.mask);
    for (std::size_t i = 0; i < k; ++i) {
      double p = 0.0;
      if (it != table.end())
        p = dist.items[i] == n ? it->second.kappa : it->second.prob[dist.items[i]];
      dist.prob[i] = p;
      dist.logp[i] = p > 0.0 ? std::log(p) : kNegInf;
    }
    return dist;
  }
  dist.logits = t.logits(emb, s.choice, dist.items);  // stop item == embedding row n
  const double* l = t.data(dist.logits);
  double lse = logsumexp(l, static_cast<int>(k));
  for (std::size_t i = 0; i < k; ++i) {
    dist.logp[i] = l[i] - lse;
    dist.prob[i] = std::exp(dist.logp[i]);
  }
  return dist;
}

double SetModel::action_logprob(Tape& t, const GenState& s, int action) const {
  ActionDist dist = action_dist(t, s);
  for (std::size_t i = 0; i < dist.items.size(); ++i)
    if (dist.items[i] == action) return dist.logp[i];
  throw std::invalid_argument("action_logprob: action is not a candidate");
}

GenState SetModel::advance(Tape& t, const GenState& s, int item) const {
  if (item < 0 || item >= n) throw std::out_of_range("advance: item index");
  if (std::find(s.added.begin(), s.added.end(), item) != s.added.end())
    throw std::invalid_argument("advance: duplicate item");
  GenState next;
  next.added = s.added;
  next.added.push_back(item);
  next.mask = n <= 32 ? (s.mask | (1u << item)) : 0u;
  switch (kind) {
    case ModelKind::Gru2Set:
      next.choice = t.gru(gru, t.param_row(emb, item), s.choice);
      break;
    case ModelKind::SetNn: {
      Tape::Ref e = t.param_row(emb, item);
      next.sum = s.sum < 0 ? e : t.add(s.sum, e);
      next.choice = t.mlp(mlp, next.sum);
      break;
    }
    case ModelKind::Mrw:
      next.choice = t.param_row(emb, item);
      break;
    case ModelKind::Tabular:
      break;
  }
  return next;
}

namespace {

// Shared walk for the value and taped flavors of path log-probability.
void walk_path(const SetModel& m, Tape& t, const GeneratingPath& path, bool build_node,
               double* lp_out, Tape::Ref* node_out) {
  if (!path.terminated)
    throw std::invalid_argument("path_logprob: path must be terminated");
  if (build_node && m.kind == ModelKind::Tabular)
    throw std::logic_error("path_logprob_node: tabular models record no tape nodes");
  GenState st = m.initial_state(t);
  double lp = 0.0;
  Tape::Ref node = -1;
  auto take = [&](const ActionDist& dist, int action, std::size_t step) {
    for (std::size_t i = 0; i < dist.items.size(); ++i)
      if (dist.items[i] == action) {
        lp += dist.logp[i];
        if (build_node) {
          Tape::Ref pick = t.log_pick(dist.logits, static_cast<int>(i));
          node = node < 0 ? pick : t.add(node, pick);
        }
        return;
      }
    throw std::runtime_error("path step " + std::to_string(step) +
                             " is not a candidate action");
  };
  for (std::size_t i = 0; i < path.items.size(); ++i) {
    ActionDist dist = m.action_dist(t, st);
    take(dist, path.items[i], i);
    st = m.advance(t, st, path.items[i]);
  }
  ActionDist dist = m.action_dist(t, st);
  take(dist, m.n, path.items.size());
  if (lp_out) *lp_out = lp;
  if (node_out) *node_out = node;
}

}  // namespace

double path_logprob(const SetModel& m, Tape& t, const GeneratingPath& path) {
  double lp = 0.0;
  walk_path(m, t, path, false, &lp, nullptr);
  return lp;
}

Tape::Ref path_logprob_node(const SetModel& m, Tape& t, const GeneratingPath& path) {
  Tape::Ref node = -1;
  walk_path(m, t, path, true, nullptr, &node);
  return node;
}

namespace {

void check_enumerable(const ItemSet& s, int cap) {
  if (s.empty()) throw std::invalid_argument("enumerate_paths: empty set");
  if (static_cast<int>(s.size()) > cap)
    throw std::invalid_argument("enumerate_paths: set larger than enumeration cap");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] <= s[i - 1]) throw std::invalid_argument("enumerate_paths: set not normalized");
}

template <typename Terminal>
void enumerate_walk(const SetModel& m, Tape& t, const ItemSet& s, Terminal&& on_path) {
  std::vector<int> order;
  std::function<void(const GenState&, double, Tape::Ref)> dfs =
      [&](const GenState& st, double lp, Tape::Ref node) {
        ActionDist dist = m.action_dist(t, st);
        if (order.size() == s.size()) {
          for (std::size_t i = 0; i < dist.items.size(); ++i)
            if (dist.items[i] == m.n) {
              on_path(order, lp + dist.logp[i], dist, i, node);
              return;
            }
          throw std::logic_error("stop action missing from a non-empty state");
        }
        for (std::size_t i = 0; i < dist.items.size(); ++i) {
          int item = dist.items[i];
          if (item == m.n) continue;
          if (!std::binary_search(s.begin(), s.end(), item)) continue;
          order.push_back(item);
          dfs(m.advance(t, st, item), lp + dist.logp[i], node);
          order.pop_back();
        }
      };
  dfs(m.initial_state(t), 0.0, -1);
}

}  // namespace

std::vector<std::pair<GeneratingPath, double>> enumerate_paths(const SetModel& m, Tape& t,
                                                               const ItemSet& s, int cap) {
  check_enumerable(s, cap);
  std::vector<std::pair<GeneratingPath, double>> out;
  enumerate_walk(m, t, s,
                 [&](const std::vector<int>& order, double lp, const ActionDist&,
                     std::size_t, Tape::Ref) {
                   out.push_back({GeneratingPath{order, true}, lp});
                 });
  return out;
}

double set_logprob_exact(const SetModel& m, Tape& t, const ItemSet& s, int cap) {
  check_enumerable(s, cap);
  std::vector<double> lps;
  enumerate_walk(m, t, s,
                 [&](const std::vector<int>&, double lp, const ActionDist&, std::size_t,
                     Tape::Ref) { lps.push_back(lp); });
  if (lps.empty()) return kNegInf;
  return logsumexp(lps.data(), static_cast<int>(lps.size()));
}

Tape::Ref set_logprob_node(const SetModel& m, Tape& t, const ItemSet& s, int cap) {
  if (m.kind == ModelKind::Tabular)
    throw std::logic_error("set_logprob_node: tabular models record no tape nodes");
  check_enumerable(s, cap);
  std::vector<Tape::Ref> path_nodes;
  // Rebuild each path's node chain during the walk: the running prefix node is
  // threaded through the DFS so shared prefixes share tape nodes.
  std::vector<int> order;
  std::function<void(const GenState&, Tape::Ref)> dfs = [&](const GenState& st,
                                                            Tape::Ref node) {
    ActionDist dist = m.action_dist(t, st);
    auto extend = [&](std::size_t i) {
      Tape::Ref pick = t.log_pick(dist.logits, static_cast<int>(i));
      return node < 0 ? pick : t.add(node, pick);
    };
    if (order.size() == s.size()) {
      for (std::size_t i = 0; i < dist.items.size(); ++i)
        if (dist.items[i] == m.n) {
          path_nodes.push_back(extend(i));
          return;
        }
      throw std::logic_error("stop action missing from a non-empty state");
    }
    for (std::size_t i = 0; i < dist.items.size(); ++i) {
      int item = dist.items[i];
      if (item == m.n) continue;
      if (!std::binary_search(s.begin(), s.end(), item)) continue;
      order.push_back(item);
      dfs(m.advance(t, st, item), extend(i));
      order.pop_back();
    }
  };
  dfs(m.initial_state(t), -1);
  if (path_nodes.empty()) throw std::runtime_error("set_logprob_node: unreachable set");
  return t.logsumexp_of(path_nodes);
}

namespace {

// Action probabilities indexed by item (slot n = stop), for variants whose
// state is a function of the set alone. Never touches a tape.
std::vector<double> action_probs_for_subset(const SetModel& m, const ItemSet& sub) {
  std::vector<double> out(static_cast<std::size_t>(m.n) + 1, 0.0);
  GenState st;
  st.added = sub;
  st.mask = mask_of(sub);
  std::vector<int> cands = m.candidate_items(st);
  if (m.kind == ModelKind::Tabular) {
    auto it = m.table.find(st.mask);
    if (it == m.table.end()) return out;
    for (int c : cands) out[c] = c == m.n ? it->second.kappa : it->second.prob[c];
    return out;
  }
  // SetNn: choice = init row at the empty set, else MLP of the embedding sum.
  const ParamArray& e = m.params.at(m.emb);
  std::vector<double> choice;
  if (sub.empty()) {
    const ParamArray& init = m.params.at(m.init);
    choice = init.value;
  } else {
    std::vector<double> sum(m.d, 0.0);
    for (int v : sub)
      for (int j = 0; j < m.d; ++j) sum[j] += e.value[static_cast<std::size_t>(v) * m.d + j];
    choice = mlp_forward(m.params, m.mlp, sum);
  }
  std::vector<double> logits(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double* er = e.value.data() + static_cast<std::size_t>(cands[i]) * m.d;
    double s = 0.0;
    for (int j = 0; j < m.d; ++j) s += choice[j] * er[j];
    logits[i] = s;
  }
  double lse = logsumexp(logits.data(), static_cast<int>(logits.size()));
  for (std::size_t i = 0; i < cands.size(); ++i) out[cands[i]] = std::exp(logits[i] - lse);
  return out;
}

}  // namespace

double set_prob_recursion(const SetModel& m, const ItemSet& s, int cap) {
  if (m.kind == ModelKind::Gru2Set || m.kind == ModelKind::Mrw)
    throw std::logic_error("set_prob_recursion: state is order-dependent for this variant");
  if (s.empty()) throw std::invalid_argument("set_prob_recursion: empty set");
  if (static_cast<int>(s.size()) > cap)
    throw std::invalid_argument("set_prob_recursion: set larger than cap");
  std::uint32_t full = mask_of(s);

  std::unordered_map<std::uint32_t, std::vector<double>> probs;
  auto probs_at = [&](std::uint32_t mask) -> const std::vector<double>& {
    auto it = probs.find(mask);
    if (it == probs.end())
      it = probs.emplace(mask, action_probs_for_subset(m, set_of_mask(mask))).first;
    return it->second;
  };

  std::unordered_map<std::uint32_t, double> gamma;
  std::function<double(std::uint32_t)> gamma_of = [&](std::uint32_t mask) -> double {
    if (mask == 0) return 1.0;
    auto it = gamma.find(mask);
    if (it != gamma.end()) return it->second;
    double g = 0.0;
    for (std::uint32_t rest = mask; rest;) {
      std::uint32_t bit = rest & (~rest + 1u);
      rest ^= bit;
      int x = std::countr_zero(bit);
      double p = probs_at(mask ^ bit)[static_cast<std::size_t>(x)];
      if (p > 0.0) g += p * gamma_of(mask ^ bit);
    }
    gamma.emplace(mask, g);
    return g;
  };

  double stop = probs_at(full)[static_cast<std::size_t>(m.n)];
  return stop * gamma_of(full);
}

ItemSet generate_set(const SetModel& m, Tape& t, Rng& rng) {
  GenState st = m.initial_state(t);
  while (static_cast<int>(st.added.size()) < m.max_size) {
    ActionDist dist = m.action_dist(t, st);
    int pick = rng.categorical(dist.prob);
    int item = dist.items[pick];
    if (item == m.n) break;  // stop item drawn
    st = m.advance(t, st, item);
  }
  return normalized_set(st.added);
}

SetModel theorem2_construct(const std::vector<double>& q_by_mask, int m) {
  if (m < 1 || m > 12) throw std::invalid_argument("theorem2_construct: need 1 <= m <= 12");
  if (q_by_mask.size() != (static_cast<std::size_t>(1) << m))
    throw std::invalid_argument("theorem2_construct: q must have 2^m entries");
  if (std::abs(q_by_mask[0]) > 1e-12)
    throw std::invalid_argument("theorem2_construct: empty set must have zero mass");
  double sum = 0.0;
  for (double p : q_by_mask) {
    if (!std::isfinite(p) || p < -1e-12)
      throw std::invalid_argument("theorem2_construct: negative or non-finite mass");
    sum += std::max(p, 0.0);
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("theorem2_construct: masses must sum to 1");

  ItemUniverse u;
  for (int i = 0; i < m; ++i) u.intern(std::to_string(i));
  SetModel model = make_tabular(complete_graph(u), m);

  auto row = [&](std::uint32_t ctx) -> TabularRow& {
    TabularRow& r = model.table[ctx];
    if (r.prob.empty()) r.prob.assign(static_cast<std::size_t>(m), 0.0);
    return r;
  };

  // cond: distribution over masks of items 0..top-1, cond[0] == 0. `scale` is
  // the item-transition mass still available at state ctx for this branch.
  std::function<void(std::uint32_t, int, const std::vector<double>&, double)> realize =
      [&](std::uint32_t ctx, int top, const std::vector<double>& cond, double scale) {
        if (top == 0) return;
        int v = top - 1;
        std::uint32_t bit = 1u << v;
        int half = 1 << v;
        double q_in = 0.0, q_ex = 0.0;
        for (int k = half; k < 2 * half; ++k) q_in += cond[k];
        for (int k = 1; k < half; ++k) q_ex += cond[k];
        if (q_in > 0.0) {
          row(ctx).prob[v] = scale * q_in;
          double q_single = cond[half];  // mass of exactly {v} given this branch
          row(ctx | bit).kappa = q_single / q_in;
          double q_rest = q_in - q_single;
          if (q_rest > 0.0) {
            std::vector<double> cin(static_cast<std::size_t>(half), 0.0);
            for (int k = 1; k < half; ++k) cin[k] = cond[half + k] / q_rest;
            realize(ctx | bit, v, cin, q_rest / q_in);
          }
        }
        if (q_ex > 0.0) {
          std::vector<double> cex(static_cast<std::size_t>(half), 0.0);
          for (int k = 1; k < half; ++k) cex[k] = cond[k] / q_ex;
          realize(ctx, v, cex, scale * q_ex);
        }
      };

  std::vector<double> q(q_by_mask);
  for (auto& p : q) p = std::max(p, 0.0) / sum;
  q[0] = 0.0;
  realize(0, m, q, 1.0);

  for (const auto& [ctx, r] : model.table) {
    double total = r.kappa;
    for (double p : r.prob) total += p;
    if (std::abs(total - 1.0) > 1e-9)
      throw std::logic_error("theorem2_construct: non-stochastic state row");
    if (ctx == 0 && r.kappa != 0.0)
      throw std::logic_error("theorem2_construct: stop mass at the empty state");
  }
  return model;
}

}  // namespace setgen
