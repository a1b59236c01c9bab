#include "setgen/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "setgen/checkpoint.hpp"
#include "setgen/eval.hpp"
#include "setgen/sampler.hpp"
#include "setgen/sizebias.hpp"

namespace setgen {

namespace {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

void write_manifest(const std::string& primary_output, const std::string& command,
                    ordered_json config, std::uint64_t seed,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, double wall_time_s) {
  ordered_json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  ordered_json hashes = ordered_json::object();
  for (const std::string& p : outputs) hashes[p] = hash_file(p);
  j["artifact_hashes"] = std::move(hashes);
  j["wall_time_s"] = wall_time_s;
  std::string path = primary_output + ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << '\n';
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string tok;
  std::stringstream ss(text);
  while (std::getline(ss, tok, ',')) {
    std::size_t a = tok.find_first_not_of(" \t");
    std::size_t b = tok.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    out.push_back(tok.substr(a, b - a + 1));
  }
  return out;
}

std::string join_labels(const ItemSet& s, const ItemUniverse& u) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += u.labels[static_cast<std::size_t>(s[i])];
  }
  return out;
}

struct TrainFlags {
  std::string model, train, out = "model.ckpt";
  int dim = 10, epochs = 10, samples = 5, batch = 64, max_size = 0;
  double lr = 0.01;
  std::uint64_t seed = 1;
};

int do_train(const TrainFlags& f, std::ostream& out) {
  auto t0 = Clock::now();
  Corpus corpus = load_orders(f.train);
  if (corpus.sets.total == 0) throw std::runtime_error("no orders in " + f.train);
  ItemGraph graph = build_item_graph(corpus.sets, corpus.universe);
  int max_size = f.max_size;
  if (max_size <= 0)
    for (const auto& [s, c] : corpus.sets.entries)
      max_size = std::max(max_size, static_cast<int>(s.size()));

  Rng init_rng(f.seed, 1);
  SetModel model;
  switch (kind_from_name(f.model)) {
    case ModelKind::Gru2Set: model = make_gru2set(graph, f.dim, max_size, init_rng); break;
    case ModelKind::SetNn: model = make_setnn(graph, f.dim, max_size, init_rng); break;
    case ModelKind::Mrw: model = make_mrw(graph, f.dim, max_size, init_rng); break;
    case ModelKind::Tabular: throw std::runtime_error("tabular models are not trainable");
  }

  TrainConfig cfg;
  cfg.samples = f.samples;
  cfg.batch = f.batch;
  cfg.epochs = f.epochs;
  cfg.lr = f.lr;
  cfg.seed = f.seed;
  cfg.dim = f.dim;
  train(model, corpus.sets, cfg, &out);

  SizeDistribution sizes = empirical_size_distribution(corpus.sets);
  save_checkpoint(f.out, model, &sizes, corpus.sets.total);

  ordered_json config{{"model", f.model},   {"train", f.train}, {"dim", f.dim},
                      {"epochs", f.epochs}, {"samples", f.samples}, {"batch", f.batch},
                      {"lr", f.lr},         {"max_size", max_size}, {"out", f.out}};
  write_manifest(f.out, "train", config, f.seed, {f.train}, {f.out},
                 std::chrono::duration<double>(Clock::now() - t0).count());
  return 0;
}

struct GenerateFlags {
  std::string model, out = "pred.txt", size_dist, hybrid;
  bool size_bias = false;
  long long count = 0;
  std::uint64_t seed = 1;
  int workers = 1;
};

int do_generate(const GenerateFlags& f, std::ostream& out) {
  auto t0 = Clock::now();
  Checkpoint ck = load_checkpoint(f.model);
  const SetModel& model = ck.model;
  std::vector<std::string> inputs{f.model};

  ItemUniverse universe = model.graph.universe;
  Corpus hist;
  bool hybrid = !f.hybrid.empty();
  if (hybrid) {
    hist = load_orders(f.hybrid, universe);
    universe = hist.universe;
    inputs.push_back(f.hybrid);
  }

  SetMultiset result;
  if (!f.size_bias && f.size_dist.empty() && !hybrid) {
    result = generate_pool(model, f.count, f.seed, f.workers);
  } else {
    SizeDistribution targets;
    if (!f.size_dist.empty()) {
      targets = load_size_dist(f.size_dist);
      inputs.push_back(f.size_dist);
    } else if (f.size_bias) {
      if (ck.train_sizes.probs.empty())
        throw std::runtime_error("checkpoint lacks training size statistics");
      targets = biased_sizes(ck.train_sizes, model.n, ck.train_count).biased;
    } else {
      if (ck.train_sizes.probs.empty())
        throw std::runtime_error("checkpoint lacks training size statistics");
      targets = ck.train_sizes;
    }

    std::vector<long long> needed = apportion_counts(targets, f.count);
    SetMultiset pool;
    int missing = -1;
    for (int round = 0; round < 5; ++round) {
      SetMultiset fresh = generate_pool(model, 2 * f.count, f.seed + round, f.workers);
      for (const auto& [s, c] : fresh.entries) pool.add(s, c);
      std::set<int> pool_sizes, hist_sizes;
      for (const auto& [s, c] : pool.entries) pool_sizes.insert(static_cast<int>(s.size()));
      for (const auto& [s, c] : hist.sets.entries)
        hist_sizes.insert(static_cast<int>(s.size()));
      missing = -1;
      for (std::size_t k = 0; k < needed.size(); ++k) {
        if (needed[k] == 0) continue;
        const std::set<int>& src = (hybrid && k == 0) ? hist_sizes : pool_sizes;
        if (!src.count(static_cast<int>(k) + 1)) {
          missing = static_cast<int>(k) + 1;
          break;
        }
      }
      if (missing < 0) break;
    }
    if (missing >= 0)
      throw std::runtime_error("no sets of size " + std::to_string(missing) +
                               " available after 5 oversampling rounds");
    Rng rec(f.seed, 1000000);
    result = hybrid ? hybrid_recombine(hist.sets, pool, targets, f.count, rec)
                    : stratified_recombine(pool, targets, f.count, rec);
  }

  save_orders(f.out, result, universe);
  out << "wrote " << result.total << " orders to " << f.out << '\n';
  ordered_json config{{"model", f.model},       {"count", f.count},
                      {"workers", f.workers},   {"size_bias", f.size_bias},
                      {"size_dist", f.size_dist}, {"hybrid", f.hybrid},
                      {"out", f.out}};
  write_manifest(f.out, "generate", config, f.seed, inputs, {f.out},
                 std::chrono::duration<double>(Clock::now() - t0).count());
  return 0;
}

struct EvaluateFlags {
  std::string test, pred, out = "report.json";
};

int do_evaluate(const EvaluateFlags& f, std::ostream& out) {
  auto t0 = Clock::now();
  Corpus test = load_orders(f.test);
  Corpus pred = load_orders(f.pred, test.universe);
  EvalReport rep = evaluate(test.sets, pred.sets);
  out << format_report(rep);
  std::ofstream file(f.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write report: " + f.out);
  file << report_json(rep).dump(2) << '\n';
  file.close();
  ordered_json config{{"test", f.test}, {"pred", f.pred}, {"out", f.out}};
  write_manifest(f.out, "evaluate", config, 0, {f.test, f.pred}, {f.out},
                 std::chrono::duration<double>(Clock::now() - t0).count());
  return 0;
}

struct OracleFlags {
  std::string model, set, out;
  int samples = 100;
  std::uint64_t seed = 1;
};

int do_oracle(const OracleFlags& f, std::ostream& out) {
  auto t0 = Clock::now();
  Checkpoint ck = load_checkpoint(f.model);
  const SetModel& model = ck.model;

  std::vector<int> raw;
  for (const std::string& tok : split_tokens(f.set)) {
    int idx = model.graph.universe.index_of(tok);
    if (idx < 0) throw std::runtime_error("unknown item label: " + tok);
    raw.push_back(idx);
  }
  ItemSet target = normalized_set(raw);
  if (target.empty()) throw std::runtime_error("empty set");
  if (static_cast<int>(target.size()) > kEnumCap)
    throw std::runtime_error("set larger than the enumeration cap");

  Tape tape(const_cast<ParameterStore*>(&model.params));
  auto paths = enumerate_paths(model, tape, target);
  bool reachable = !paths.empty();

  ordered_json doc;
  doc["set"] = join_labels(target, model.graph.universe);
  doc["samples"] = f.samples;
  out << "set            " << join_labels(target, model.graph.universe) << '\n';
  char line[160];
  if (!reachable) {
    out << "exact_logprob  -inf (unreachable: induced subgraph disconnected)\n";
    doc["exact_logprob"] = nullptr;
    doc["unreachable"] = true;
  } else {
    tape.reset();
    double exact = set_logprob_exact(model, tape, target);
    std::snprintf(line, sizeof line, "exact_logprob  %.12f\n", exact);
    out << line;
    doc["exact_logprob"] = exact;
    doc["unreachable"] = false;

    if (model.kind == ModelKind::SetNn) {
      double rec = set_prob_recursion(model, target);
      std::snprintf(line, sizeof line, "recursion_logprob %.12f\n", std::log(rec));
      out << line;
      doc["recursion_logprob"] = std::log(rec);
    }

    double max_residual = 0.0;
    for (const auto& [path, lp] : paths) {
      tape.reset();
      WeightedPath wp = weigh_path(model, tape, path);
      tape.reset();
      double direct = path_logprob(model, tape, path);
      max_residual =
          std::max(max_residual, std::fabs(wp.proposal_logprob + wp.log_weight - direct));
    }

    Rng rng(f.seed, 0);
    std::vector<double> ws(static_cast<std::size_t>(f.samples));
    for (int i = 0; i < f.samples; ++i) {
      tape.reset();
      ws[static_cast<std::size_t>(i)] =
          sample_posterior_path(model, tape, target, rng).log_weight;
    }
    double est = logsumexp(ws.data(), f.samples) - std::log(f.samples);
    double peak = *std::max_element(ws.begin(), ws.end());
    double mean = 0.0;
    for (double w : ws) mean += std::exp(w - peak);
    mean /= f.samples;
    double var = 0.0;
    for (double w : ws) var += std::pow(std::exp(w - peak) - mean, 2);
    double rel_se =
        f.samples > 1 ? std::sqrt(var / (f.samples - 1)) / (mean * std::sqrt(f.samples))
                      : 0.0;
    std::snprintf(line, sizeof line, "is_logprob     %.12f (M=%d)\n", est, f.samples);
    out << line;
    std::snprintf(line, sizeof line, "is_rel_se      %.3e\n", rel_se);
    out << line;
    std::snprintf(line, sizeof line, "max_residual   %.3e\n", max_residual);
    out << line;
    doc["is_logprob"] = est;
    doc["is_rel_se"] = rel_se;
    doc["max_residual"] = max_residual;
  }

  if (!f.out.empty()) {
    std::ofstream file(f.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write report: " + f.out);
    file << doc.dump(2) << '\n';
    file.close();
    ordered_json config{{"model", f.model}, {"set", f.set}, {"samples", f.samples},
                        {"out", f.out}};
    write_manifest(f.out, "oracle", config, f.seed, {f.model}, {f.out},
                   std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return 0;
}

struct PlantFlags {
  int items = 0;
  long long train = 0, test = 0;
  std::uint64_t seed = 1;
  std::string prefix = "plant";
  double size_decay = 0.0;
};

int do_plant(const PlantFlags& f, std::ostream& out) {
  auto t0 = Clock::now();
  PlantResult pr = plant_benchmark(f.items, f.train, f.test, f.seed, f.size_decay);
  const ItemUniverse& u = pr.truth.graph.universe;
  std::string train_path = f.prefix + "_train.txt";
  std::string test_path = f.prefix + "_test.txt";
  std::string truth_path = f.prefix + "_truth.tsv";
  save_orders(train_path, pr.train, u);
  save_orders(test_path, pr.test, u);
  std::ofstream truth(truth_path, std::ios::binary);
  if (!truth) throw std::runtime_error("cannot write " + truth_path);
  char line[160];
  for (const auto& [s, p] : pr.exact) {
    std::snprintf(line, sizeof line, "%s\t%.17g\n", join_labels(s, u).c_str(), p);
    truth << line;
  }
  truth.close();
  out << "planted " << f.items << "-item distribution; wrote " << train_path << ", "
      << test_path << ", " << truth_path << '\n';
  ordered_json config{{"items", f.items},   {"train", f.train},
                      {"test", f.test},     {"size_decay", f.size_decay},
                      {"prefix", f.prefix}};
  write_manifest(f.prefix, "plant", config, f.seed, {},
                 {train_path, test_path, truth_path},
                 std::chrono::duration<double>(Clock::now() - t0).count());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sequential set-generation toolkit"};
  app.require_subcommand(1);

  TrainFlags tf;
  CLI::App* train_cmd = app.add_subcommand("train", "fit a model to an order file");
  train_cmd->add_option("--model", tf.model, "gru2set | setnn | mrw")
      ->required()
      ->check(CLI::IsMember({"gru2set", "setnn", "mrw"}));
  train_cmd->add_option("--train", tf.train, "training order file")->required();
  train_cmd->add_option("--dim", tf.dim, "embedding dimension")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", tf.epochs, "training epochs")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--samples", tf.samples, "posterior paths per set")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", tf.batch, "batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", tf.lr, "learning rate");
  train_cmd->add_option("--seed", tf.seed, "random seed");
  train_cmd->add_option("--max-size", tf.max_size, "set size cap (default: train max)");
  train_cmd->add_option("--out", tf.out, "checkpoint path");

  GenerateFlags gf;
  CLI::App* gen_cmd = app.add_subcommand("generate", "sample orders from a checkpoint");
  gen_cmd->add_option("--model", gf.model, "checkpoint path")->required();
  gen_cmd->add_option("--count", gf.count, "orders to produce")
      ->required()
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--out", gf.out, "output order file");
  gen_cmd->add_option("--seed", gf.seed, "random seed");
  gen_cmd->add_option("--workers", gf.workers, "parallel generation workers")
      ->check(CLI::PositiveNumber);
  CLI::Option* bias_opt =
      gen_cmd->add_flag("--size-bias", gf.size_bias, "bias sizes using training stats");
  CLI::Option* dist_opt =
      gen_cmd->add_option("--size-dist", gf.size_dist, "target size distribution file");
  bias_opt->excludes(dist_opt);
  gen_cmd->add_option("--hybrid", gf.hybrid,
                      "order file whose singletons replace model size-1 draws");

  EvaluateFlags ef;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "compare two order files");
  eval_cmd->add_option("--test", ef.test, "reference order file")->required();
  eval_cmd->add_option("--pred", ef.pred, "predicted order file")->required();
  eval_cmd->add_option("--out", ef.out, "JSON report path");

  OracleFlags of;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "exact vs sampled probabilities");
  oracle_cmd->add_option("--model", of.model, "checkpoint path")->required();
  oracle_cmd->add_option("--set", of.set, "comma-separated item labels")->required();
  oracle_cmd->add_option("--samples", of.samples, "posterior sample count")
      ->check(CLI::PositiveNumber);
  oracle_cmd->add_option("--seed", of.seed, "random seed");
  oracle_cmd->add_option("--out", of.out, "JSON report path");

  PlantFlags pf;
  CLI::App* plant_cmd = app.add_subcommand("plant", "build a planted benchmark");
  plant_cmd->add_option("--items", pf.items, "universe size (<= 12)")->required();
  plant_cmd->add_option("--train", pf.train, "training draws")->required();
  plant_cmd->add_option("--test", pf.test, "test draws")->required();
  plant_cmd->add_option("--seed", pf.seed, "random seed");
  plant_cmd->add_option("--out-prefix", pf.prefix, "output file prefix");
  plant_cmd->add_option("--size-decay", pf.size_decay,
                        "per-size weight decay for planted mass (0 = off)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return do_train(tf, out);
    if (gen_cmd->parsed()) return do_generate(gf, out);
    if (eval_cmd->parsed()) return do_evaluate(ef, out);
    if (oracle_cmd->parsed()) return do_oracle(of, out);
    if (plant_cmd->parsed()) return do_plant(pf, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace setgen
