#include "setgen/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

namespace setgen {

ItemSet normalized_set(std::vector<int> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

int ItemUniverse::intern(const std::string& label) {
  auto it = by_label.find(label);
  if (it != by_label.end()) return it->second;
  int id = n++;
  labels.push_back(label);
  by_label.emplace(label, id);
  return id;
}

int ItemUniverse::index_of(const std::string& label) const {
  auto it = by_label.find(label);
  return it == by_label.end() ? -1 : it->second;
}

void SetMultiset::add(const ItemSet& s, long long count) {
  if (count <= 0) throw std::invalid_argument("SetMultiset::add: count must be positive");
  entries[s] += count;
  total += count;
}

long long SetMultiset::count(const ItemSet& s) const {
  auto it = entries.find(s);
  return it == entries.end() ? 0 : it->second;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Corpus load_orders(const std::string& path, const ItemUniverse& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open order file: " + path);
  Corpus out;
  out.universe = base;
  std::string line;
  long long line_no = 0;
  bool any_line = false;
  while (std::getline(in, line)) {
    ++line_no;
    any_line = true;
    std::string t = trim(line);
    if (!t.empty() && t[0] == '#') continue;
    if (t.empty()) {
      ++out.skipped_lines;
      continue;
    }
    std::vector<int> items;
    std::size_t pos = 0;
    while (pos <= t.size()) {
      std::size_t comma = t.find(',', pos);
      std::string tok = trim(t.substr(pos, comma == std::string::npos ? std::string::npos
                                                                      : comma - pos));
      if (tok.empty())
        throw std::runtime_error("empty item token at line " + std::to_string(line_no) +
                                 " of " + path);
      items.push_back(out.universe.intern(tok));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    out.sets.add(normalized_set(std::move(items)));
  }
  if (!any_line || out.sets.total == 0)
    throw std::runtime_error("order file has no orders: " + path);
  return out;
}

Corpus load_orders(const std::string& path) { return load_orders(path, ItemUniverse{}); }

void save_orders(const std::string& path, const SetMultiset& sets, const ItemUniverse& u) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write order file: " + path);
  for (const auto& [s, c] : sets.entries) {
    std::string line;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 0 || s[i] >= static_cast<int>(u.labels.size()))
        throw std::runtime_error("set item outside universe while writing " + path);
      if (i) line += ',';
      line += u.labels[s[i]];
    }
    for (long long i = 0; i < c; ++i) out << line << '\n';
  }
  if (!out) throw std::runtime_error("failed writing order file: " + path);
}

bool ItemGraph::has_edge(int i, int j) const {
  if (i < 0 || i >= universe.n) return false;
  return std::binary_search(adj[i].begin(), adj[i].end(), j);
}

ItemGraph build_item_graph(const SetMultiset& train, const ItemUniverse& u) {
  if (train.total == 0) throw std::invalid_argument("build_item_graph: empty multiset");
  std::vector<std::set<int>> nb(u.n);
  for (const auto& [s, c] : train.entries) {
    (void)c;
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b) {
        nb[s[a]].insert(s[b]);
        nb[s[b]].insert(s[a]);
      }
  }
  ItemGraph g;
  g.universe = u;
  g.adj.resize(u.n);
  for (int i = 0; i < u.n; ++i) g.adj[i].assign(nb[i].begin(), nb[i].end());
  return g;
}

ItemGraph complete_graph(const ItemUniverse& u) {
  ItemGraph g;
  g.universe = u;
  g.adj.resize(u.n);
  for (int i = 0; i < u.n; ++i)
    for (int j = 0; j < u.n; ++j)
      if (j != i) g.adj[i].push_back(j);
  return g;
}

ItemGraph graph_from_edges(const ItemUniverse& u,
                           const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::set<int>> nb(u.n);
  for (auto [i, j] : edges) {
    if (i == j || i < 0 || j < 0 || i >= u.n || j >= u.n)
      throw std::invalid_argument("graph_from_edges: bad edge");
    nb[i].insert(j);
    nb[j].insert(i);
  }
  ItemGraph g;
  g.universe = u;
  g.adj.resize(u.n);
  for (int i = 0; i < u.n; ++i) g.adj[i].assign(nb[i].begin(), nb[i].end());
  return g;
}

SizeDistribution empirical_size_distribution(const SetMultiset& data) {
  if (data.total == 0)
    throw std::invalid_argument("empirical_size_distribution: empty multiset");
  int max_size = 0;
  for (const auto& [s, c] : data.entries) {
    (void)c;
    max_size = std::max(max_size, static_cast<int>(s.size()));
  }
  SizeDistribution dist;
  dist.probs.assign(max_size, 0.0);
  for (const auto& [s, c] : data.entries)
    dist.probs[s.size() - 1] += static_cast<double>(c) / static_cast<double>(data.total);
  return dist;
}

SizeDistribution load_size_dist(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open size-distribution file: " + path);
  std::map<int, double> by_size;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream row(t);
    long long k = 0;
    double p = 0.0;
    if (!(row >> k >> p) || k < 1 || !(p >= 0.0) || !std::isfinite(p))
      throw std::runtime_error("bad size-distribution line " + std::to_string(line_no) +
                               " of " + path);
    if (!by_size.emplace(static_cast<int>(k), p).second)
      throw std::runtime_error("duplicate size " + std::to_string(k) + " in " + path);
  }
  if (by_size.empty()) throw std::runtime_error("empty size-distribution file: " + path);
  double sum = 0.0;
  for (auto& [k, p] : by_size) sum += p;
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::runtime_error("size distribution sums to " + std::to_string(sum) +
                             " in " + path);
  SizeDistribution dist;
  dist.probs.assign(by_size.rbegin()->first, 0.0);
  for (auto& [k, p] : by_size) dist.probs[k - 1] = p / sum;
  return dist;
}

void save_size_dist(const std::string& path, const SizeDistribution& dist) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write size-distribution file: " + path);
  out.precision(17);
  for (int k = 1; k <= dist.max_size(); ++k) out << k << '\t' << dist.probs[k - 1] << '\n';
  if (!out) throw std::runtime_error("failed writing size-distribution file: " + path);
}

bool induced_subgraph_connected(const ItemGraph& g, const ItemSet& s) {
  if (s.empty()) return true;
  for (int v : s)
    if (v < 0 || v >= g.universe.n)
      throw std::invalid_argument("induced_subgraph_connected: item outside universe");
  if (s.size() == 1) return true;
  std::vector<char> in_set(g.universe.n, 0), seen(g.universe.n, 0);
  for (int v : s) in_set[v] = 1;
  std::queue<int> q;
  q.push(s[0]);
  seen[s[0]] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int w : g.adj[v])
      if (in_set[w] && !seen[w]) {
        seen[w] = 1;
        ++reached;
        q.push(w);
      }
  }
  return reached == s.size();
}

}  // namespace setgen
