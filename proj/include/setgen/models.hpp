#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "setgen/core.hpp"
#include "setgen/numerics.hpp"
#include "setgen/rng.hpp"

namespace setgen {

enum class ModelKind { Gru2Set, SetNn, Mrw, Tabular };

std::string kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);

// Ordered item sequence ending (implicitly) with the stop action; induces the
// set {items}.
struct GeneratingPath {
  std::vector<int> items;
  bool terminated = true;
};

// Generation state: the items added so far plus the taped choice vector that
// parameterizes the next-action softmax. `sum` caches the running embedding
// sum for the permutation-invariant variant. Refs are valid only on the tape
// that built them.
struct GenState {
  std::vector<int> added;
  std::uint32_t mask = 0;  // bitmask of added when n <= 32 (tabular lookups)
  Tape::Ref choice = -1;
  Tape::Ref sum = -1;
};

// Next-action distribution at a state: real-item candidates ascending, stop
// item (index n) last when present. `logits` is -1 for the tabular variant.
struct ActionDist {
  std::vector<int> items;
  std::vector<double> logp;
  std::vector<double> prob;
  Tape::Ref logits = -1;
};

// Explicit conditional table row: prob[i] = p(add item i | state), kappa =
// p(stop | state). Rows absent from the table are zero rows (states never
// reached with positive probability).
struct TabularRow {
  std::vector<double> prob;
  double kappa = 0.0;
};

struct SetModel {
  ModelKind kind = ModelKind::Tabular;
  ItemGraph graph;
  int n = 0, d = 0, max_size = 0;

  ParameterStore params;
  int emb = -1;   // (n+1) x d; row n is the stop-item embedding
  int init = -1;  // 1 x d trainable initial choice vector
  GruIds gru;
  MlpIds mlp;

  std::unordered_map<std::uint32_t, TabularRow> table;  // tabular only

  GenState initial_state(Tape& t) const;
  // Real items addable next (ascending), then the stop item unless the state
  // is empty. The empty state offers every real item.
  std::vector<int> candidate_items(const GenState& s) const;
  ActionDist action_dist(Tape& t, const GenState& s) const;
  double action_logprob(Tape& t, const GenState& s, int action) const;
  GenState advance(Tape& t, const GenState& s, int item) const;
};

SetModel make_gru2set(const ItemGraph& g, int d, int max_size, Rng& rng);
SetModel make_setnn(const ItemGraph& g, int d, int max_size, Rng& rng, int hidden = 50);
SetModel make_mrw(const ItemGraph& g, int d, int max_size, Rng& rng);
SetModel make_tabular(const ItemGraph& g, int max_size);

// Full path log-probability including the final stop step. Throws (naming the
// step) if some step's action is not a candidate at its state.
double path_logprob(const SetModel& m, Tape& t, const GeneratingPath& path);
// Same walk, but returns the taped scalar node (parametric variants only).
Tape::Ref path_logprob_node(const SetModel& m, Tape& t, const GeneratingPath& path);

inline constexpr int kEnumCap = 8;

// All orderings of s realizable under the graph constraint (first item free,
// every later item adjacent to the partial set), each closed with the stop
// action. Empty iff the induced subgraph is disconnected.
std::vector<std::pair<GeneratingPath, double>> enumerate_paths(const SetModel& m, Tape& t,
                                                               const ItemSet& s,
                                                               int cap = kEnumCap);

// log p(S) by exhaustive path enumeration; -inf for unreachable sets.
double set_logprob_exact(const SetModel& m, Tape& t, const ItemSet& s, int cap = kEnumCap);

// Taped version: logsumexp node over all path log-probabilities. Throws on
// unreachable sets.
Tape::Ref set_logprob_node(const SetModel& m, Tape& t, const ItemSet& s, int cap = kEnumCap);

// p(S) via the subset recursion p(S) = p(stop|S) gamma(S), gamma(S) =
// sum_x p(x|S\{x}) gamma(S\{x}), gamma(empty) = 1. Only valid for variants
// whose action probabilities depend on the state through its set alone
// (SetNn, Tabular); order-dependent variants throw.
double set_prob_recursion(const SetModel& m, const ItemSet& s, int cap = 20);

// Samples one set: draw actions until the stop item or max_size items (stop
// is then forced). Never returns the empty set.
ItemSet generate_set(const SetModel& m, Tape& t, Rng& rng);

// Builds a tabular model on the complete graph whose set distribution equals
// q exactly. q is indexed by item bitmask (length 2^m, q[0] = 0, entries sum
// to 1). Works by recursively splitting on the highest item: the mass of
// subsets containing it becomes the item transition out of the current
// context, and both conditional distributions are renormalized so every
// reachable state is stochastic.
SetModel theorem2_construct(const std::vector<double>& q_by_mask, int m);

std::uint32_t mask_of(const ItemSet& s);
ItemSet set_of_mask(std::uint32_t mask);

}  // namespace setgen
