#pragma once

// End-to-end driver: scenario files, the three-stage round loop on a single
// simulated clock, metrics / event emission, ablation tables, benchmark
// sweeps and event-stream replay.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedma/core.hpp"
#include "sedma/crossbar.hpp"
#include "sedma/deployer.hpp"
#include "sedma/memory_store.hpp"
#include "sedma/p2p.hpp"
#include "sedma/partitioner.hpp"

namespace sedma {

inline constexpr std::string_view kScenarioFormatTag = "sedma-scenario/1";
inline constexpr std::string_view kEventsFormatTag = "sedma-events/1";
inline constexpr std::string_view kMetricsFormatTag = "sedma-metrics/1";
inline constexpr std::string_view kSummaryFormatTag = "sedma-summary/1";

/// FNV-1a, 64-bit. The empty payload hashes to the offset basis.
inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t gen_cid(std::span<const std::uint8_t> payload) {
  std::uint64_t h = kFnvOffsetBasis;
  for (std::uint8_t b : payload) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

/// Little-endian byte image of a vector of doubles.
inline std::vector<std::uint8_t> to_bytes(std::span<const double> v) {
  std::vector<std::uint8_t> out;
  out.reserve(v.size() * 8);
  for (double d : v) {
    auto u = std::bit_cast<std::uint64_t>(d);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<std::uint8_t>(u >> (8 * k)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario

struct AblationFlags {
  bool no_ltm = false;
  bool no_stm = false;
  bool no_adaptive_peers = false;
  bool no_recompile = false;
  bool fixed_lambda = false;
  bool dht_only_routing = false;
  bool random_peers = false;

  static const std::vector<std::string>& names() {
    static const std::vector<std::string> n = {"no_ltm",       "no_stm",       "no_adaptive_peers",
                                               "no_recompile", "fixed_lambda", "dht_only_routing",
                                               "random_peers"};
    return n;
  }

  bool& flag(const std::string& name) {
    if (name == "no_ltm") return no_ltm;
    if (name == "no_stm") return no_stm;
    if (name == "no_adaptive_peers") return no_adaptive_peers;
    if (name == "no_recompile") return no_recompile;
    if (name == "fixed_lambda") return fixed_lambda;
    if (name == "dht_only_routing") return dht_only_routing;
    if (name == "random_peers") return random_peers;
    std::string all;
    for (const auto& n : names()) all += (all.empty() ? "" : ", ") + n;
    throw Error("unknown ablation flag '" + name + "'; supported: " + all);
  }

  std::vector<std::string> active() const {
    std::vector<std::string> out;
    auto self = *this;
    for (const auto& n : names())
      if (self.flag(n)) out.push_back(n);
    return out;
  }
};

struct MatrixSpec {
  std::size_t rows = 64;
  std::size_t cols = 64;
  /// gaussian | uniform | smooth (rows vary slowly: low-frequency cosines)
  std::string distribution = "gaussian";
  /// Fraction of entries forced to zero.
  double sparsity = 0.0;
};

struct Perturbation {
  std::size_t round = 0;
  std::string kind;  // link | node_load
  NodeId a, b;
  LinkSpec link;
  double availability = 1.0;
};

struct WorkflowSpec {
  AgentGraph graph;
  double lambda_mem = 0.1;
  double reconfig_delay_s = 2.0;
};

struct CacheSpec {
  std::size_t objects = 200;
  std::size_t requests_per_round = 20;
  double zipf_s = 1.1;
  double capacity_fraction = 0.1;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::size_t rounds = 1;
  MatrixSpec matrix;
  DeviceSpec device;
  NoiseModel noise;  // seed field unused; per-tile seeds derive from `seed`
  int probes = 3;
  double partition_lambda_mem = 1.0;
  double alpha = 0.7;
  std::string ltm_file;  // optional: loaded before, persisted after the run

  Topology topology;
  std::optional<NodeId> origin;
  SelectionWeights weights;
  std::size_t k = 2;
  ScoreMode score_mode = ScoreMode::raw;
  double transfer_gb = 0.0;  // 0: size of the result vector

  CacheSpec cache;
  WorkflowSpec workflow;
  TriggerConfig trigger;
  AblationFlags ablation;
  std::vector<Perturbation> perturbations;

  NodeId origin_node() const { return origin ? *origin : topology.nodes.at(0).id; }

  void validate() const {
    if (rounds == 0) throw Error("scenario: rounds must be positive");
    if (matrix.rows == 0 || matrix.cols == 0) throw Error("scenario: matrix dims must be positive");
    if (std::min(matrix.rows, matrix.cols) < kMinPartitionDim &&
        std::max(matrix.rows, matrix.cols) > device.max_dim)
      throw Error("scenario: matrices below 32x32 must fit a single crossbar block");
    if (!(matrix.sparsity >= 0.0 && matrix.sparsity < 1.0))
      throw Error("scenario: sparsity must lie in [0,1)");
    device.validate();
    trigger.validate();
    if (topology.nodes.empty()) throw Error("scenario: topology has no nodes");
    topology.node(origin_node());
    if (k == 0) throw Error("scenario: peers.k must be positive");
  }
};

namespace detail {
template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}
}  // namespace detail

inline ScenarioConfig parse_scenario(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir = ".") {
  using detail::get_or;
  try {
    if (get_or<std::string>(j, "format", std::string(kScenarioFormatTag)) != kScenarioFormatTag)
      throw Error("scenario: unsupported format tag");
    ScenarioConfig c;
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.rounds = get_or<std::size_t>(j, "rounds", 1);
    if (j.contains("matrix")) {
      const auto& m = j["matrix"];
      c.matrix.rows = get_or<std::size_t>(m, "rows", 64);
      c.matrix.cols = get_or<std::size_t>(m, "cols", 64);
      c.matrix.distribution = get_or<std::string>(m, "distribution", "gaussian");
      c.matrix.sparsity = get_or<double>(m, "sparsity", 0.0);
      if (c.matrix.distribution != "gaussian" && c.matrix.distribution != "uniform" &&
          c.matrix.distribution != "smooth")
        throw Error("scenario: unknown matrix distribution '" + c.matrix.distribution + "'");
    }
    if (j.contains("device")) {
      const auto& d = j["device"];
      c.device.max_dim = get_or<std::size_t>(d, "max_dim", 256);
      c.device.t_prog = get_or<double>(d, "t_prog", 1e-6);
      c.device.t_read = get_or<double>(d, "t_read", 1e-7);
      c.device.mem_full_block_mb = get_or<double>(d, "mem_full_block_mb", 16.0);
    }
    if (j.contains("noise")) {
      c.noise.write_sigma = get_or<double>(j["noise"], "write_sigma", 0.02);
      c.noise.read_sigma = get_or<double>(j["noise"], "read_sigma", 0.005);
    }
    if (j.contains("program")) {
      c.device.program.tol = get_or<double>(j["program"], "tol", 0.01);
      c.device.program.max_iters = get_or<int>(j["program"], "max_iters", 10);
    }
    c.device.write_sigma = c.noise.write_sigma;
    if (j.contains("calibration")) c.probes = get_or<int>(j["calibration"], "probes", 3);
    if (j.contains("memory")) {
      c.alpha = get_or<double>(j["memory"], "alpha", 0.7);
      c.ltm_file = get_or<std::string>(j["memory"], "ltm_file", "");
      if (!c.ltm_file.empty()) c.ltm_file = (base_dir / c.ltm_file).string();
    }
    if (j.contains("partition")) c.partition_lambda_mem = get_or<double>(j["partition"], "lambda_mem", 1.0);

    if (j.contains("topology_inline")) {
      std::istringstream in(j["topology_inline"].get<std::string>());
      c.topology = parse_topology(in);
    } else if (j.contains("topology")) {
      auto path = base_dir / j["topology"].get<std::string>();
      if (!std::filesystem::exists(path))
        throw Error("scenario: topology file '" + path.string() + "' does not exist");
      c.topology = load_topology(path.string());
    } else {
      throw Error("scenario: a topology or topology_inline entry is required");
    }
    if (j.contains("origin")) c.origin = NodeId{j["origin"].get<std::uint64_t>()};

    if (j.contains("peers")) {
      const auto& p = j["peers"];
      c.k = get_or<std::size_t>(p, "k", 2);
      if (p.contains("w")) {
        auto w = p["w"].get<std::vector<double>>();
        if (w.size() != 3) throw Error("scenario: peers.w needs three weights");
        c.weights.w = {w[0], w[1], w[2]};
      }
      c.weights.eta = get_or<double>(p, "eta", 0.01);
      auto mode = get_or<std::string>(p, "score_mode", "raw");
      if (mode != "raw" && mode != "minmax") throw Error("scenario: score_mode must be raw or minmax");
      c.score_mode = mode == "raw" ? ScoreMode::raw : ScoreMode::minmax;
      c.transfer_gb = get_or<double>(p, "transfer_gb", 0.0);
    }
    if (j.contains("cache")) {
      const auto& cj = j["cache"];
      c.cache.objects = get_or<std::size_t>(cj, "objects", 200);
      c.cache.requests_per_round = get_or<std::size_t>(cj, "requests_per_round", 20);
      c.cache.zipf_s = get_or<double>(cj, "zipf_s", 1.1);
      c.cache.capacity_fraction = get_or<double>(cj, "capacity_fraction", 0.1);
    }
    if (j.contains("workflow")) {
      const auto& w = j["workflow"];
      for (const auto& a : w.value("agents", nlohmann::json::array()))
        c.workflow.graph.add_agent(a.at("id").get<std::string>(), a.at("mem_gb").get<double>());
      for (const auto& d : w.value("deps", nlohmann::json::array()))
        c.workflow.graph.add_dependency(d.at("from").get<std::string>(), d.at("to").get<std::string>(),
                                        d.at("volume_gb").get<double>());
      c.workflow.lambda_mem = get_or<double>(w, "lambda_mem", 0.1);
      c.workflow.reconfig_delay_s = get_or<double>(w, "reconfig_delay_s", 2.0);
    }
    if (j.contains("trigger")) {
      c.trigger.theta = get_or<double>(j["trigger"], "theta", 0.8);
      c.trigger.rho = get_or<double>(j["trigger"], "rho", 0.85);
    }
    for (const auto& f : j.value("ablation", nlohmann::json::array()))
      c.ablation.flag(f.get<std::string>()) = true;
    for (const auto& p : j.value("perturbations", nlohmann::json::array())) {
      Perturbation pt;
      pt.round = p.at("round").get<std::size_t>();
      pt.kind = p.at("kind").get<std::string>();
      if (pt.kind == "link") {
        pt.a = NodeId{p.at("a").get<std::uint64_t>()};
        pt.b = NodeId{p.at("b").get<std::uint64_t>()};
        pt.link = {p.at("latency_ms").get<double>(), p.at("bandwidth_gbps").get<double>(),
                   get_or<double>(p, "drop_prob", 0.0)};
      } else if (pt.kind == "node_load") {
        pt.a = NodeId{p.at("node").get<std::uint64_t>()};
        pt.availability = p.at("availability").get<double>();
      } else {
        throw Error("scenario: unknown perturbation kind '" + pt.kind + "'");
      }
      c.perturbations.push_back(pt);
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("scenario: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("scenario: " + std::string(e.what()));
  }
  auto c = parse_scenario(j, std::filesystem::path(path).parent_path());
  if (const char* env = std::getenv("SEDMA_SEED")) c.seed = parse_int<std::uint64_t>(env);
  return c;
}

inline Matrix generate_matrix(const MatrixSpec& spec, std::uint64_t seed) {
  Rng rng(mix_seed(seed ^ 0x6d6174726978ULL));
  Matrix a(spec.rows, spec.cols);
  if (spec.distribution == "gaussian") {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& v : a.data()) v = nd(rng);
  } else if (spec.distribution == "uniform") {
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (double& v : a.data()) v = ud(rng);
  } else {
    // Three low-frequency cosine modes down each column.
    std::normal_distribution<double> nd(0.0, 1.0);
    const double m = static_cast<double>(spec.rows);
    for (std::size_t j = 0; j < spec.cols; ++j) {
      const double g0 = nd(rng), g1 = nd(rng), g2 = nd(rng);
      for (std::size_t i = 0; i < spec.rows; ++i) {
        const double t = std::acos(-1.0) * (static_cast<double>(i) + 0.5) / m;
        a(i, j) = g0 + g1 * std::cos(t) + g2 * std::cos(2.0 * t);
      }
    }
  }
  if (spec.sparsity > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : a.data())
      if (u(rng) < spec.sparsity) v = 0.0;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Metrics and events

struct MetricsRecord {
  std::string run_id;
  std::size_t rounds = 0;
  double stage1_s = 0.0, stage2_s = 0.0, stage3_s = 0.0;
  double residual_norm = 0.0;       // mean over rounds of ‖y − A·x‖
  double raw_residual_norm = 0.0;   // mean over rounds of ‖Ã·x̃ − A·x‖
  double final_residual_norm = 0.0;
  double lambda_t = 0.0;            // last applied
  double mean_hops = 0.0;
  std::uint64_t lookups = 0;
  std::uint64_t transfers = 0;
  std::uint64_t transfers_ok = 0;
  double success_rate = 0.0;
  double cache_hit_fraction = 0.0;
  double bandwidth_gb = 0.0;
  double initial_placement_cost = 0.0;
  double placement_cost = 0.0;
  std::uint64_t recompiles = 0;     // r
  std::uint64_t agents = 0;         // d
  std::uint64_t partitions = 0;     // k
  std::uint64_t peers = 0;          // p
  std::uint64_t tile_ops = 0;
  std::uint64_t selection_comparisons = 0;
  std::uint64_t agents_moved = 0;
  std::uint64_t ltm_size = 0;
  std::uint64_t stm_size = 0;
  std::uint64_t warnings = 0;
  std::array<double, 3> final_weights{};

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["format"] = kMetricsFormatTag;
    j["run_id"] = run_id;
    j["rounds"] = rounds;
    j["stage1_s"] = stage1_s;
    j["stage2_s"] = stage2_s;
    j["stage3_s"] = stage3_s;
    j["residual_norm"] = residual_norm;
    j["raw_residual_norm"] = raw_residual_norm;
    j["final_residual_norm"] = final_residual_norm;
    j["lambda_t"] = lambda_t;
    j["mean_hops"] = mean_hops;
    j["lookups"] = lookups;
    j["transfers"] = transfers;
    j["transfers_ok"] = transfers_ok;
    j["success_rate"] = success_rate;
    j["cache_hit_fraction"] = cache_hit_fraction;
    j["bandwidth_gb"] = bandwidth_gb;
    j["initial_placement_cost"] = initial_placement_cost;
    j["placement_cost"] = placement_cost;
    j["recompiles"] = recompiles;
    j["agents"] = agents;
    j["partitions"] = partitions;
    j["peers"] = peers;
    j["tile_ops"] = tile_ops;
    j["selection_comparisons"] = selection_comparisons;
    j["agents_moved"] = agents_moved;
    j["ltm_size"] = ltm_size;
    j["stm_size"] = stm_size;
    j["warnings"] = warnings;
    j["final_weights"] = final_weights;
    return j;
  }

  /// Numeric columns used by ablation tables.
  std::vector<std::pair<std::string, double>> columns() const {
    return {{"residual_norm", residual_norm},
            {"raw_residual_norm", raw_residual_norm},
            {"lambda_t", lambda_t},
            {"mean_hops", mean_hops},
            {"success_rate", success_rate},
            {"cache_hit_fraction", cache_hit_fraction},
            {"bandwidth_gb", bandwidth_gb},
            {"placement_cost", placement_cost},
            {"recompiles", double(recompiles)},
            {"agents", double(agents)},
            {"partitions", double(partitions)},
            {"stage1_s", stage1_s},
            {"stage2_s", stage2_s},
            {"stage3_s", stage3_s}};
  }
};

struct Event {
  double t_ms = 0.0;
  std::string kind;
  std::uint64_t src = 0, dst = 0, bytes = 0;
  bool success = true;
  std::uint64_t hops = 0;

  std::string to_line() const {
    nlohmann::ordered_json j;
    j["t_ms"] = t_ms;
    j["kind"] = kind;
    j["src"] = src;
    j["dst"] = dst;
    j["bytes"] = bytes;
    j["success"] = success;
    j["hops"] = hops;
    return j.dump();
  }
};

struct RunResult {
  MetricsRecord metrics;
  std::vector<Event> events;
  DeploymentManifest manifest;
  MemoryStore store;

  std::string events_jsonl() const {
    std::string out = nlohmann::ordered_json{{"format", kEventsFormatTag}}.dump() + "\n";
    for (const auto& e : events) out += e.to_line() + "\n";
    return out;
  }
  std::string metrics_json() const { return metrics.to_json().dump(2) + "\n"; }
};

// ---------------------------------------------------------------------------
// Round loop

namespace detail {

/// First-fit in declaration order: the static compile before any feedback.
inline Placement first_fit_placement(const AgentGraph& g, const ClusterState& cluster) {
  Placement p;
  std::vector<double> free;
  for (const auto& n : cluster.nodes) free.push_back(n.mem_capacity_gb);
  for (const auto& a : g.agents()) {
    auto it = std::find_if(free.begin(), free.end(), [&](double f) { return f + 1e-9 >= a.mem_req_gb; });
    if (it == free.end()) throw Error("initial placement: agent '" + a.id + "' fits no node");
    *it -= a.mem_req_gb;
    p.assign[a.id] = cluster.nodes[std::size_t(it - free.begin())].id;
  }
  return p;
}

inline Placement current_placement(const ClusterState& c) {
  Placement p;
  for (const auto& [id, d] : c.deployed) p.assign[id] = d.node;
  return p;
}

class Runner {
public:
  explicit Runner(const ScenarioConfig& cfg)
      : cfg_(cfg),
        a_(generate_matrix(cfg.matrix, cfg.seed)),
        store_(MemoryConfig{kLtmCapacity, kStmCapacity, cfg.alpha}),
        net_(cfg.topology.network(mix_seed(cfg.seed ^ 0x6e6574ULL))),
        dht_(cfg.topology.ids(), mix_seed(cfg.seed ^ 0x646874ULL)),
        weights_(cfg.weights),
        origin_(cfg.origin_node()),
        select_rng_(mix_seed(cfg.seed ^ 0x73656cULL)),
        cache_rng_(mix_seed(cfg.seed ^ 0x636163ULL)),
        cache_(1.0) {
    cfg.validate();
    if (!cfg.ltm_file.empty() && std::filesystem::exists(cfg.ltm_file))
      store_ = MemoryStore::load(cfg.ltm_file, MemoryConfig{kLtmCapacity, kStmCapacity, cfg.alpha});
    for (const auto& n : cfg.topology.nodes) {
      availability_[n.id] = n.availability;
      cluster_.nodes.push_back({n.id, n.mem_gb, n.cores, 1.0 - n.availability});
    }
    std::uniform_real_distribution<double> size_mb(1.0, 10.0);
    double total = 0.0;
    for (std::size_t i = 0; i < cfg.cache.objects; ++i) {
      catalog_mb_.push_back(size_mb(cache_rng_));
      total += catalog_mb_.back();
    }
    if (cfg.cache.objects > 0) {
      cache_ = CacheStore(std::max(cfg.cache.capacity_fraction * total,
                                   *std::max_element(catalog_mb_.begin(), catalog_mb_.end())));
      std::vector<double> w(cfg.cache.objects);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] = 1.0 / std::pow(double(k + 1), cfg.cache.zipf_s);
      zipf_ = std::discrete_distribution<std::uint64_t>(w.begin(), w.end());
    }
  }

  RunResult run() {
    MetricsRecord& m = result_.metrics;
    m.run_id = "sedma-" + std::to_string(cfg_.seed);
    for (const auto& f : cfg_.ablation.active()) m.run_id += "-" + f;
    m.rounds = cfg_.rounds;
    m.agents = cfg_.workflow.graph.size();

    if (cfg_.workflow.graph.size()) {
      auto initial = first_fit_placement(cfg_.workflow.graph, cluster_);
      deploy(initial, "deploy");
      m.initial_placement_cost = current_cost();
    }

    for (std::size_t r = 0; r < cfg_.rounds; ++r) {
      apply_perturbations(r);
      const double s1 = stage1(r);
      const double s2 = stage2(r);
      stage3(r, s1, s2);
    }

    m.residual_norm /= double(cfg_.rounds);
    m.raw_residual_norm /= double(cfg_.rounds);
    m.mean_hops = m.lookups ? m.mean_hops / double(m.lookups) : 0.0;
    m.success_rate = m.transfers ? double(m.transfers_ok) / double(m.transfers) : 0.0;
    m.cache_hit_fraction = cache_requests_ ? double(cache_hits_) / double(cache_requests_) : 0.0;
    if (cfg_.workflow.graph.size()) {
      m.placement_cost = current_cost();
      result_.manifest = generate_manifest(current_placement(cluster_), cfg_.workflow.graph);
    }
    m.ltm_size = store_.ltm_size();
    m.stm_size = store_.stm().size();
    m.warnings += store_.clip_warnings();
    m.final_weights = weights_.w;
    if (!cfg_.ltm_file.empty()) store_.persist(cfg_.ltm_file);
    result_.store = store_;
    return std::move(result_);
  }

private:
  void emit(std::string kind, std::uint64_t src, std::uint64_t dst, std::uint64_t bytes,
            bool success, std::uint64_t hops) {
    result_.events.push_back({clock_ms_, std::move(kind), src, dst, bytes, success, hops});
  }

  void advance_ms(double ms) {
    clock_ms_ += ms;
    store_.set_time(clock_ms_ / 1000.0);
  }

  void observe(ObservationKind kind, std::uint64_t subject, double value) {
    if (!cfg_.ablation.no_stm) store_.record_observation({store_.time(), kind, subject, value});
  }

  void apply_perturbations(std::size_t round) {
    for (const auto& p : cfg_.perturbations) {
      if (p.round != round) continue;
      if (p.kind == "link") {
        net_.set_link(p.a, p.b, p.link);
      } else {
        availability_[p.a] = p.availability;
        cluster_.nodes[cluster_.node_index(p.a)].cpu_util = 1.0 - p.availability;
      }
      emit("perturbation", p.a.value, p.b.value, 0, true, 0);
    }
  }

  // Stage 1: classify, partition, program, three products, denoise, concat.
  double stage1(std::size_t round) {
    MetricsRecord& m = result_.metrics;
    Rng xr(mix_seed(cfg_.seed ^ (0x78ULL + (std::uint64_t(round) << 20))));
    const Vector x = random_gaussian_vector(a_.cols(), xr);

    const WorkloadClass cls = classify_workload(a_);
    std::optional<LtmRecord> hint;
    if (!cfg_.ablation.no_ltm) hint = store_.get_pattern(ltm_key::partition(cls));
    const PartitionPlan plan = optimize_partition(a_, cfg_.device, hint, cfg_.partition_lambda_mem);
    const auto tiles = split_matrix(a_, x, plan);

    const std::uint64_t round_seed = mix_seed(cfg_.seed + 0x9e3779b97f4a7c15ULL * (round + 1));
    const CrossbarLimits limits{cfg_.device.max_dim, 1e6};
    std::vector<Vector> partials, raw_partials;
    std::uint64_t iterations = 0;
    double log_lambda_sum = 0.0;
    std::size_t lambda_samples = 0;
    double lambda_t = 0.0;

    for (std::size_t t = 0; t < tiles.size(); ++t) {
      NoiseModel noise = cfg_.noise;
      noise.seed = round_seed ^ t;
      auto xbar = program_write_verify(tiles[t].a, noise, cfg_.device.program, limits);
      auto xt = program_vector(tiles[t].x, noise, cfg_.device.program);
      iterations += xbar.program_iterations() + xt.iterations;
      auto prods = three_products(tiles[t].a, tiles[t].x, xbar, xt.values);
      const std::size_t rows = plan.blocks[t].rows();
      Vector p = prods.corrected();
      p.resize(rows);
      raw_partials.push_back(prods.at_xt);

      if (cfg_.noise.noiseless()) {
        lambda_t = 0.0;  // exact device, nothing to regularize
      } else if (cfg_.ablation.fixed_lambda) {
        lambda_t = kDefaultLambda;
      } else {
        double recent = kDefaultLambda;
        if (!cfg_.ablation.no_stm) {
          LambdaProbeConfig pc;
          pc.probes = cfg_.probes;
          pc.program = cfg_.device.program;
          pc.active_rows = rows;
          recent = estimate_lambda_recent(store_, xbar, pc).lambda;
        }
        log_lambda_sum += std::log10(store_.clip_lambda(recent));
        ++lambda_samples;
        lambda_t = cfg_.ablation.no_ltm ? store_.clip_lambda(recent)
                                        : store_.blend_lambda(recent, cls);
      }
      partials.push_back(denoise(p, lambda_t, &m.warnings));
      m.tile_ops += 3 * plan.row_block * plan.col_block;
    }

    const Vector y = concat_results(partials, plan);
    const Vector raw = concat_results(raw_partials, plan);
    const Vector exact = multiply(a_, x);
    const double residual = distance2(y, exact);
    m.residual_norm += residual;
    m.raw_residual_norm += distance2(raw, exact);
    m.final_residual_norm = residual;
    m.lambda_t = lambda_t;
    m.partitions = plan.tile_count();
    y_local_ = y;

    const double seconds =
        double(iterations) * cfg_.device.t_prog + 3.0 * double(tiles.size()) * cfg_.device.t_read;
    advance_ms(seconds * 1000.0);
    m.stage1_s += seconds;

    // Long-term write-back. Partition score: predicted / measured cost.
    // Lambda score: fractional residual reduction of the corrected output.
    if (!cfg_.ablation.no_ltm) {
      store_.put_pattern(ltm_key::partition(cls),
                         {PartitionStrategy{plan.row_block},
                          partition_success_score(plan, seconds), 0.0, 0});
      if (lambda_samples) {
        const double raw_res = distance2(raw, exact);
        const double score = raw_res > 0 ? std::clamp(1.0 - residual / raw_res, 0.0, 1.0) : 1.0;
        const double lam = store_.clip_lambda(std::pow(10.0, log_lambda_sum / double(lambda_samples)));
        store_.put_pattern(ltm_key::lambda(cls), {LambdaValue{lam}, score, 0.0, 0});
      }
    }
    observe(ObservationKind::residual, 0, residual);
    emit("stage1", origin_.value, origin_.value, 8 * y.size(), true, 0);
    return seconds;
  }

  // Stage 2: content id, provider lookup, peer scoring, top-k transfers.
  double stage2(std::size_t) {
    MetricsRecord& m = result_.metrics;
    const double start = clock_ms_;
    const auto bytes = to_bytes(y_local_);
    const std::uint64_t cid = gen_cid(bytes);
    const auto lookup = dht_.find_providers(cid, origin_);
    m.lookups += 1;
    m.mean_hops += double(lookup.hops);
    emit("dht_lookup", origin_.value, lookup.terminal.value, 0, !lookup.providers.empty(), lookup.hops);

    std::vector<NodeId> candidates;
    for (NodeId p : lookup.providers)
      if (p != origin_) candidates.push_back(p);
    for (NodeId c : dht_.contacts(origin_))
      if (std::find(candidates.begin(), candidates.end(), c) == candidates.end())
        candidates.push_back(c);
    std::sort(candidates.begin(), candidates.end());
    m.peers = candidates.size();
    if (candidates.empty()) return 0.0;

    std::vector<PeerProfile> profiles;
    for (NodeId c : candidates) {
      PeerProfile pr{c, availability_.at(c), std::min(net_.latency_ms(origin_, c), 1000.0),
                     cfg_.topology.node(c).mem_gb};
      profiles.push_back(pr);
      observe(ObservationKind::peer_load, c.value, 1.0 - pr.availability);
    }
    const std::size_t k = std::min(cfg_.k, profiles.size());
    std::vector<NodeId> selected;
    if (cfg_.ablation.random_peers) {
      std::vector<NodeId> pool = candidates;
      std::shuffle(pool.begin(), pool.end(), select_rng_);
      selected.assign(pool.begin(), pool.begin() + std::ptrdiff_t(k));
    } else if (cfg_.ablation.dht_only_routing) {
      selected = candidates;
      const NodeId key{cid};
      std::sort(selected.begin(), selected.end(), [&](NodeId a, NodeId b) {
        return xor_distance(a, key) < xor_distance(b, key);
      });
      selected.resize(k);
    } else {
      selected = select_peers(profiles, weights_, k, cfg_.score_mode, &m.selection_comparisons);
    }

    const double size_gb = cfg_.transfer_gb > 0 ? cfg_.transfer_gb : double(bytes.size()) / 1e9;
    for (NodeId dst : selected) {
      const auto& prof = *std::find_if(profiles.begin(), profiles.end(),
                                       [&](const PeerProfile& p) { return p.node == dst; });
      auto out = simulate_transfer(net_, origin_, dst, size_gb);
      advance_ms(out.elapsed_ms);
      m.transfers += 1;
      m.transfers_ok += out.success ? 1 : 0;
      m.bandwidth_gb += size_gb;
      weights_.log_transfer(prof.criteria(), out.success);
      observe(ObservationKind::transfer, dst.value, out.success ? 1.0 : 0.0);
      if (out.success) dht_.add_provider(cid, dst);
      if (!cfg_.ablation.no_ltm) {
        auto prev = store_.peek(ltm_key::peer(dst.value));
        PeerAggregate agg{prof.availability, prof.latency_ms, prof.memory_free_gb,
                          out.success ? 1.0 : 0.0, 1};
        if (prev)
          if (auto* pa = std::get_if<PeerAggregate>(&prev->payload)) {
            agg.transfers = pa->transfers + 1;
            agg.success_rate = pa->success_rate + (agg.success_rate - pa->success_rate) / double(agg.transfers);
          }
        store_.put_pattern(ltm_key::peer(dst.value), {agg, out.success ? 1.0 : 0.0, 0.0, 0});
      }
      emit("transfer", origin_.value, dst.value, out.bytes, out.success, 0);
    }
    const bool adaptive = !(cfg_.ablation.no_adaptive_peers || cfg_.ablation.random_peers ||
                            cfg_.ablation.dht_only_routing);
    if (adaptive) weights_ = update_weights(weights_);

    serve_cache_requests();
    const double seconds = (clock_ms_ - start) / 1000.0;
    m.stage2_s += seconds;
    return seconds;
  }

  void serve_cache_requests() {
    if (cfg_.cache.objects == 0 || cfg_.cache.requests_per_round == 0) return;
    std::uint64_t hits = 0, fetched_bytes = 0;
    for (std::size_t q = 0; q < cfg_.cache.requests_per_round; ++q) {
      const std::uint64_t id = zipf_(cache_rng_);
      const double now = clock_ms_ / 1000.0;
      const double hours = std::max(now - cache_start_s_, 1.0) / 3600.0;
      ++cache_counts_[id];
      ++cache_requests_;
      if (CacheEntry* e = cache_.find(id)) {
        ++hits;
        e->last_access = now;
        e->access_count_per_hour = double(cache_counts_[id]) / hours;
        continue;
      }
      fetched_bytes += std::uint64_t(catalog_mb_[id] * 1e6);
      result_.metrics.bandwidth_gb += catalog_mb_[id] / 1000.0;
      cache_.refresh_frequencies([&](std::uint64_t c) { return double(cache_counts_[c]) / hours; });
      cache_.admit({id, catalog_mb_[id], double(cache_counts_[id]) / hours, now, {}}, now);
    }
    cache_hits_ += hits;
    observe(ObservationKind::request_rate, 0, double(cfg_.cache.requests_per_round));
    emit("cache", origin_.value, origin_.value, fetched_bytes, true, 0);
  }

  double current_cost() const {
    return placement_cost(cfg_.workflow.graph, current_placement(cluster_), cluster_, net_,
                          cfg_.workflow.lambda_mem);
  }

  void deploy(const Placement& p, const char* kind) {
    auto manifest = generate_manifest(p, cfg_.workflow.graph);
    auto applied = apply_manifest(cluster_, manifest, cfg_.workflow.reconfig_delay_s);
    cluster_ = std::move(applied.cluster);
    if (std::string_view(kind) != "deploy") result_.metrics.agents_moved += applied.moved;
    advance_ms(applied.delay_s * 1000.0);
    result_.metrics.stage3_s += applied.delay_s;
    emit(kind, origin_.value, origin_.value, 0, true, 0);
  }

  // Stage 3: throughput vs expectation, utilization, re-placement.
  void stage3(std::size_t round, double s1, double s2) {
    const auto& g = cfg_.workflow.graph;
    if (g.size() == 0) return;
    MetricsRecord& m = result_.metrics;
    const std::string workload = classify_workload(a_).key();
    Placement cur = current_placement(cluster_);
    double comm_ms = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) comm_ms += comm_cost(g, cur, net_, i);
    advance_ms(comm_ms);
    m.stage3_s += comm_ms / 1000.0;
    const double round_s = s1 + s2 + comm_ms / 1000.0;
    const double perf = double(a_.rows() * a_.cols()) / std::max(round_s, 1e-12);

    if (!expected_perf_) {
      expected_perf_ = perf;
      if (!cfg_.ablation.no_ltm)
        if (const LtmRecord* rec = store_.peek(ltm_key::placement(workload)))
          if (auto* pat = std::get_if<PlacementPattern>(&rec->payload))
            if (pat->perf_ops > 0) expected_perf_ = pat->perf_ops;
    }
    const double util = cluster_.resource_utilization();
    observe(ObservationKind::utilization, 0, util);
    const bool trigger = should_recompile(perf, *expected_perf_, util, cfg_.trigger);
    emit("recompile_check", origin_.value, origin_.value, 0, trigger, 0);
    *expected_perf_ = 0.9 * *expected_perf_ + 0.1 * perf;

    if (trigger && !cfg_.ablation.no_recompile) {
      std::optional<LtmRecord> hint;
      if (!cfg_.ablation.no_ltm) hint = store_.get_pattern(ltm_key::placement(workload));
      const Placement next = optimize_placement(g, cluster_, net_, hint, cfg_.workflow.lambda_mem);
      try {
        deploy(next, "recompile");
        ++m.recompiles;
      } catch (const Error&) {
        emit("recompile_aborted", origin_.value, origin_.value, 0, false, 0);
      }
      if (!cfg_.ablation.no_ltm) {
        PlacementPattern pat{perf, to_raw_assign(next.assign)};
        store_.put_pattern(ltm_key::placement(workload),
                           {pat, std::clamp(perf / *expected_perf_, 0.0, 1.0), 0.0, 0});
      }
    }
    (void)round;
  }

  const ScenarioConfig& cfg_;
  Matrix a_;
  MemoryStore store_;
  NetworkModel net_;
  Dht dht_;
  SelectionWeights weights_;
  NodeId origin_;
  Rng select_rng_;
  Rng cache_rng_;
  CacheStore cache_;
  std::discrete_distribution<std::uint64_t> zipf_;
  std::vector<double> catalog_mb_;
  std::map<std::uint64_t, std::uint64_t> cache_counts_;
  std::uint64_t cache_hits_ = 0, cache_requests_ = 0;
  double cache_start_s_ = 0.0;
  std::map<NodeId, double> availability_;
  ClusterState cluster_;
  std::optional<double> expected_perf_;
  Vector y_local_;
  double clock_ms_ = 0.0;
  RunResult result_;
};

}  // namespace detail

/// Runs Stages 1–3 for cfg.rounds rounds. Throws Error on any contract
/// violation; the CLI maps that to a nonzero exit with a structured report.
inline RunResult run_scenario(const ScenarioConfig& cfg) {
  detail::Runner runner(cfg);
  return runner.run();
}

inline void write_run_outputs(const RunResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "manifests");
  auto write = [](const std::filesystem::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write '" + p.string() + "'");
    f << s;
  };
  write(dir / "metrics.json", r.metrics_json());
  write(dir / "events.jsonl", r.events_jsonl());
  write(dir / "manifests" / "deployment.manifest", r.manifest.to_string());
}

// ---------------------------------------------------------------------------
// Tables (ablation and bench output)

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string out = "# " + std::string(kSummaryFormatTag) + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
      out += "\n";
    };
    line(columns);
    for (const auto& r : rows) line(r);
    return out;
  }

  const std::string& cell(std::size_t row, const std::string& column) const {
    auto it = std::find(columns.begin(), columns.end(), column);
    if (it == columns.end()) throw Error("table: no column '" + column + "'");
    return rows.at(row).at(std::size_t(it - columns.begin()));
  }

  void write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path.string() + "'");
    f << to_csv();
  }
};

struct AblationRow {
  std::string variant;
  std::vector<MetricsRecord> runs;  // one per repetition

  double mean(double MetricsRecord::*field) const {
    double s = 0.0;
    for (const auto& r : runs) s += r.*field;
    return runs.empty() ? 0.0 : s / double(runs.size());
  }
};

struct AblationResult {
  std::vector<AblationRow> rows;  // full model first

  Table table() const {
    Table t;
    t.columns = {"variant", "reps"};
    if (rows.empty() || rows[0].runs.empty()) return t;
    for (const auto& [name, _] : rows[0].runs[0].columns()) t.columns.push_back(name);
    for (const auto& row : rows) {
      std::vector<std::string> cells{row.variant, std::to_string(row.runs.size())};
      const auto ncol = row.runs[0].columns().size();
      for (std::size_t c = 0; c < ncol; ++c) {
        double s = 0.0;
        for (const auto& r : row.runs) s += r.columns()[c].second;
        cells.push_back(format_real(s / double(row.runs.size())));
      }
      t.rows.push_back(std::move(cells));
    }
    return t;
  }

  const AblationRow& row(const std::string& variant) const {
    for (const auto& r : rows)
      if (r.variant == variant) return r;
    throw Error("ablation: no variant '" + variant + "'");
  }
};

/// Full configuration plus one single-flag variant per axis, each over
/// `reps` paired seeds (cfg.seed, cfg.seed + 1, …).
inline AblationResult run_ablation(const ScenarioConfig& cfg, const std::vector<std::string>& axes,
                                   std::size_t reps = 1) {
  if (reps == 0) throw Error("ablation: reps must be positive");
  AblationFlags probe;
  for (const auto& a : axes) probe.flag(a);  // validates names
  std::vector<std::pair<std::string, ScenarioConfig>> variants{{"full", cfg}};
  for (const auto& a : axes) {
    ScenarioConfig v = cfg;
    v.ablation.flag(a) = true;
    variants.emplace_back(a, v);
  }
  AblationResult res;
  for (auto& [name, v] : variants) {
    AblationRow row{name, {}};
    for (std::size_t r = 0; r < reps; ++r) {
      ScenarioConfig rep = v;
      rep.seed = cfg.seed + r;
      row.runs.push_back(run_scenario(rep).metrics);
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Benchmark sweeps

/// Selection comparisons for p random peers (Stage-2 work).
inline std::uint64_t selection_work(std::size_t p, std::uint64_t seed) {
  Rng rng(mix_seed(seed ^ p));
  std::uniform_real_distribution<double> avail(0.0, 1.0), lat(1.0, 500.0), mem(0.0, 64.0);
  std::vector<PeerProfile> peers;
  for (std::size_t i = 0; i < p; ++i) peers.push_back({NodeId{i + 1}, avail(rng), lat(rng), mem(rng)});
  std::uint64_t comparisons = 0;
  select_peers(peers, SelectionWeights{}, std::min<std::size_t>(p, 5), ScoreMode::raw, &comparisons);
  return comparisons;
}

struct DhtHopStats {
  std::size_t nodes = 0;
  double mean_hops = 0.0;
  std::size_t max_hops = 0;
  std::size_t found = 0;
};

/// Mean iterative-lookup hops over random content ids, one provider each.
inline DhtHopStats dht_hop_benchmark(std::size_t n, std::size_t lookups, std::uint64_t seed) {
  Rng rng(mix_seed(seed ^ (n << 8)));
  std::vector<NodeId> ids;
  std::set<std::uint64_t> seen;
  while (ids.size() < n) {
    auto v = rng();
    if (seen.insert(v).second) ids.push_back({v});
  }
  Dht dht(ids, seed);
  DhtHopStats s{n, 0.0, 0, 0};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t q = 0; q < lookups; ++q) {
    const std::uint64_t cid = rng();
    const NodeId provider = ids[pick(rng)];
    dht.add_provider(cid, provider);
    auto res = dht.find_providers(cid, ids[pick(rng)]);
    s.mean_hops += double(res.hops);
    s.max_hops = std::max(s.max_hops, res.hops);
    if (std::find(res.providers.begin(), res.providers.end(), provider) != res.providers.end()) ++s.found;
  }
  s.mean_hops /= double(lookups);
  return s;
}

struct CachePolicyComparison {
  double utility_hit_rate = 0.0;
  double fifo_hit_rate = 0.0;
};

/// Zipf(s) trace over `objects` objects with sizes U(1,10) MB; capacity is
/// `capacity_fraction` of the corpus.
inline CachePolicyComparison cache_policy_benchmark(std::uint64_t seed, std::size_t objects = 500,
                                                    std::size_t requests = 10000, double s = 1.1,
                                                    double capacity_fraction = 0.1) {
  Rng rng(mix_seed(seed ^ 0x7a697066ULL));
  std::uniform_real_distribution<double> size(1.0, 10.0);
  std::vector<double> sizes(objects);
  double total = 0.0;
  for (auto& v : sizes) total += (v = size(rng));
  auto trace = zipf_trace(objects, requests, s, rng);
  const double cap = capacity_fraction * total;
  return {replay_cache_trace(trace, sizes, cap, EvictionPolicy::utility).hit_rate(),
          replay_cache_trace(trace, sizes, cap, EvictionPolicy::fifo).hit_rate()};
}

struct ErrorOrderPoint {
  double eps = 0.0;
  double corrected = 0.0;  // mean ‖p − A·x‖
  double raw = 0.0;        // mean ‖Ã·x̃ − A·x‖
};

/// Programming-noise sweep with single-shot writes and exact reads.
inline std::vector<ErrorOrderPoint> error_order_sweep(const std::vector<double>& eps,
                                                      std::size_t dim, std::size_t seeds,
                                                      std::uint64_t base_seed = 1) {
  std::vector<ErrorOrderPoint> out;
  for (double e : eps) {
    ErrorOrderPoint pt{e, 0.0, 0.0};
    for (std::size_t s = 0; s < seeds; ++s) {
      Rng rng(mix_seed(base_seed + s));
      Matrix a = random_gaussian_matrix(dim, dim, rng);
      Vector x = random_gaussian_vector(dim, rng);
      NoiseModel noise{e, 0.0, mix_seed(base_seed * 7919 + s)};
      ProgramConfig single{0.0, 1};
      auto xbar = program_write_verify(a, noise, single, {std::max<std::size_t>(dim, 256), 1e6});
      auto xt = program_vector(x, noise, single);
      auto prods = three_products(a, x, xbar, xt.values);
      auto exact = multiply(a, x);
      pt.corrected += distance2(prods.corrected(), exact);
      pt.raw += distance2(prods.at_xt, exact);
    }
    pt.corrected /= double(seeds);
    pt.raw /= double(seeds);
    out.push_back(pt);
  }
  return out;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// `bench --sweep <param>`: peers | dht | cache | noise. Sweep points run on
/// a small worker pool; results are ordered by sweep point.
inline Table run_bench(const std::string& sweep, std::uint64_t seed) {
  Table t;
  if (sweep == "peers") {
    t.columns = {"p", "comparisons", "p_log2_p"};
    const std::vector<std::size_t> ps = {16, 64, 256};
    std::vector<std::future<std::uint64_t>> fut;
    for (auto p : ps) fut.push_back(std::async(std::launch::async, selection_work, p, seed));
    for (std::size_t i = 0; i < ps.size(); ++i)
      t.rows.push_back({std::to_string(ps[i]), std::to_string(fut[i].get()),
                        format_real(double(ps[i]) * std::log2(double(ps[i])))});
  } else if (sweep == "dht") {
    t.columns = {"nodes", "mean_hops", "max_hops", "found"};
    const std::vector<std::size_t> ns = {256, 1024, 4096};
    std::vector<std::future<DhtHopStats>> fut;
    for (auto n : ns) fut.push_back(std::async(std::launch::async, dht_hop_benchmark, n, 500, seed));
    for (auto& f : fut) {
      auto s = f.get();
      t.rows.push_back({std::to_string(s.nodes), format_real(s.mean_hops), std::to_string(s.max_hops),
                        std::to_string(s.found)});
    }
  } else if (sweep == "cache") {
    t.columns = {"policy", "hit_rate"};
    auto c = cache_policy_benchmark(seed);
    t.rows.push_back({"utility", format_real(c.utility_hit_rate)});
    t.rows.push_back({"fifo", format_real(c.fifo_hit_rate)});
  } else if (sweep == "noise") {
    t.columns = {"eps", "corrected_error", "raw_error"};
    for (const auto& p : error_order_sweep({0.01, 0.02, 0.04}, 64, 20, seed))
      t.rows.push_back({format_real(p.eps), format_real(p.corrected), format_real(p.raw)});
  } else {
    throw Error("bench: unknown sweep '" + sweep + "'; supported: peers, dht, cache, noise");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Replay

struct ReplaySummary {
  std::size_t events = 0;
  std::map<std::string, std::size_t> kinds;
  std::size_t transfers = 0, transfers_ok = 0;
  std::uint64_t bytes = 0;
  double last_t_ms = 0.0;
  bool monotone = true;

  double success_rate() const { return transfers ? double(transfers_ok) / double(transfers) : 0.0; }
};

inline ReplaySummary replay_events(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("replay: empty event stream");
  try {
    auto head = nlohmann::json::parse(line);
    if (head.value("format", "") != kEventsFormatTag) throw Error("replay: bad format tag");
  } catch (const nlohmann::json::exception&) {
    throw Error("replay: first line must be the format header");
  }
  ReplaySummary s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json e;
    try {
      e = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error("replay: malformed JSON on line " + std::to_string(lineno));
    }
    for (const char* key : {"t_ms", "kind", "src", "dst", "bytes", "success", "hops"})
      if (!e.contains(key))
        throw Error("replay: line " + std::to_string(lineno) + " lacks field '" + key + "'");
    const double t = e["t_ms"].get<double>();
    if (s.events && t < s.last_t_ms) s.monotone = false;
    s.last_t_ms = t;
    ++s.events;
    const auto kind = e["kind"].get<std::string>();
    ++s.kinds[kind];
    s.bytes += e["bytes"].get<std::uint64_t>();
    if (kind == "transfer") {
      ++s.transfers;
      if (e["success"].get<bool>()) ++s.transfers_ok;
    }
  }
  return s;
}

}  // namespace sedma
