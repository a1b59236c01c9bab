#pragma once
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace setgen {

// A duplicate-free item collection, kept strictly increasing. Indices are
// dense ints in [0, n); the stop item never appears inside a set.
using ItemSet = std::vector<int>;

// Sort + dedupe an arbitrary index list into a valid ItemSet.
ItemSet normalized_set(std::vector<int> items);

struct ItemUniverse {
  int n = 0;                        // real items are 0..n-1
  std::vector<std::string> labels;  // size n, unique; external ids for I/O
  std::map<std::string, int> by_label;

  int stop_index() const { return n; }
  // Returns the index for a label, creating a fresh one if unseen.
  int intern(const std::string& label);
  int index_of(const std::string& label) const;  // -1 when unknown
};

// Empirical collection of observed sets with multiplicities.
struct SetMultiset {
  std::map<ItemSet, long long> entries;
  long long total = 0;

  void add(const ItemSet& s, long long count = 1);
  long long count(const ItemSet& s) const;
};

struct Corpus {
  ItemUniverse universe;
  SetMultiset sets;
  long long skipped_lines = 0;  // zero-item lines dropped during parsing
};

// Order files: UTF-8 text, one order per line, comma-separated item tokens,
// surrounding whitespace trimmed, '#' lines ignored. Duplicate items within a
// line collapse to one; identical lines accumulate count.
Corpus load_orders(const std::string& path);
// Same, but item tokens are resolved against (and extend) an existing
// universe so two files can share one index space.
Corpus load_orders(const std::string& path, const ItemUniverse& base);
// One line per count; inverse of load_orders up to line order.
void save_orders(const std::string& path, const SetMultiset& sets,
                 const ItemUniverse& u);

// Co-occurrence graph over real items. The stop item is adjacent to
// everything by rule and is never stored.
struct ItemGraph {
  ItemUniverse universe;
  std::vector<std::vector<int>> adj;  // sorted, symmetric, irreflexive

  bool has_edge(int i, int j) const;
};

ItemGraph build_item_graph(const SetMultiset& train, const ItemUniverse& u);
ItemGraph complete_graph(const ItemUniverse& u);
ItemGraph graph_from_edges(const ItemUniverse& u,
                           const std::vector<std::pair<int, int>>& edges);

// Distribution over set sizes 1..K; probs[k-1] holds size k.
struct SizeDistribution {
  std::vector<double> probs;

  int max_size() const { return static_cast<int>(probs.size()); }
  double at(int size) const {
    return (size >= 1 && size <= max_size()) ? probs[size - 1] : 0.0;
  }
};

SizeDistribution empirical_size_distribution(const SetMultiset& data);

// Size-distribution files: one "k<TAB>probability" line per size, '#' lines
// ignored. Probabilities are renormalized on load; |sum - 1| > 1e-6 is an
// error.
SizeDistribution load_size_dist(const std::string& path);
void save_size_dist(const std::string& path, const SizeDistribution& dist);

// True iff the subgraph induced by s is connected (singletons count as
// connected). Equivalent to "some generation order of s exists".
bool induced_subgraph_connected(const ItemGraph& g, const ItemSet& s);

}  // namespace setgen
