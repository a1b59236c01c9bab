#include "setgen/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "setgen/rng.hpp"

namespace setgen {

using nlohmann::ordered_json;

void save_checkpoint(const std::string& path, const SetModel& m,
                     const SizeDistribution* train_sizes, long long train_count) {
  if (m.kind == ModelKind::Tabular)
    throw std::logic_error("save_checkpoint: tabular models are not serializable");
  ordered_json j;
  j["format_version"] = 1;
  j["kind"] = kind_name(m.kind);
  j["n"] = m.n;
  j["d"] = m.d;
  j["max_size"] = m.max_size;
  j["labels"] = m.graph.universe.labels;
  ordered_json edges = ordered_json::array();
  for (int i = 0; i < m.n; ++i)
    for (int w : m.graph.adj[i])
      if (i < w) edges.push_back(ordered_json::array({i, w}));
  j["graph_edges"] = std::move(edges);
  ordered_json params = ordered_json::object();
  for (const ParamArray& a : m.params.arrays) {
    ordered_json p;
    p["shape"] = ordered_json::array({a.rows, a.cols});
    p["values"] = a.value;
    params[a.name] = std::move(p);
  }
  j["parameters"] = std::move(params);
  if (train_sizes && !train_sizes->probs.empty()) {
    j["train_sizes"] = train_sizes->probs;
    j["train_count"] = train_count;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("unsupported checkpoint format in " + path);
  ModelKind kind = kind_from_name(j.at("kind").get<std::string>());
  if (kind == ModelKind::Tabular)
    throw std::runtime_error("tabular checkpoints are not supported");
  int n = j.at("n").get<int>();
  int d = j.at("d").get<int>();
  int max_size = j.at("max_size").get<int>();
  auto labels = j.at("labels").get<std::vector<std::string>>();
  if (static_cast<int>(labels.size()) != n)
    throw std::runtime_error("checkpoint label count does not match n");
  if (d < 1 || max_size < 1) throw std::runtime_error("checkpoint dimensions invalid");

  ItemUniverse u;
  for (const std::string& l : labels) u.intern(l);
  if (u.n != n) throw std::runtime_error("checkpoint labels are not distinct");
  auto edges = j.at("graph_edges").get<std::vector<std::pair<int, int>>>();
  ItemGraph g = graph_from_edges(u, edges);

  // Rebuild with the factory so parameter ids and layout match exactly, then
  // overwrite every array with the stored values.
  Rng scratch(0);
  Checkpoint ck;
  const ordered_json& params = j.at("parameters");
  switch (kind) {
    case ModelKind::Gru2Set: ck.model = make_gru2set(g, d, max_size, scratch); break;
    case ModelKind::SetNn: {
      auto shape = params.at("mlp.w1").at("shape").get<std::vector<int>>();
      if (shape.size() != 2) throw std::runtime_error("checkpoint shape invalid for mlp.w1");
      ck.model = make_setnn(g, d, max_size, scratch, shape[0]);
      break;
    }
    case ModelKind::Mrw: ck.model = make_mrw(g, d, max_size, scratch); break;
    case ModelKind::Tabular: break;
  }
  if (params.size() != ck.model.params.arrays.size())
    throw std::runtime_error("checkpoint parameter set does not match model kind");
  for (ParamArray& a : ck.model.params.arrays) {
    if (!params.contains(a.name))
      throw std::runtime_error("checkpoint missing parameter " + a.name);
    const ordered_json& p = params.at(a.name);
    auto shape = p.at("shape").get<std::vector<int>>();
    if (shape.size() != 2 || shape[0] != a.rows || shape[1] != a.cols)
      throw std::runtime_error("checkpoint shape mismatch for " + a.name);
    auto values = p.at("values").get<std::vector<double>>();
    if (values.size() != a.value.size())
      throw std::runtime_error("checkpoint value count mismatch for " + a.name);
    a.value = std::move(values);
  }
  if (j.contains("train_sizes")) {
    ck.train_sizes.probs = j.at("train_sizes").get<std::vector<double>>();
    ck.train_count = j.value("train_count", 0LL);
  }
  return ck;
}

}  // namespace setgen
