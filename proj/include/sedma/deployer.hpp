#pragma once

// Workflow placement over a simulated cluster: communication/memory cost
// model, greedy + local-search optimizer, recompilation trigger, and the
// declarative manifest format the cluster applies.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sedma/core.hpp"
#include "sedma/memory_store.hpp"
#include "sedma/p2p.hpp"

namespace sedma {

inline constexpr double kMemLimitFactor = 1.2;
inline constexpr std::string_view kManifestFormatTag = "sedma-manifest/1";
inline constexpr std::size_t kPlacementRestarts = 8;

struct Agent {
  std::string id;
  double mem_req_gb = 1.0;
};

/// Edge `from` depends on `to` and pulls volume_gb from it.
struct Dependency {
  std::size_t from = 0;
  std::size_t to = 0;
  double volume_gb = 0.0;
};

class AgentGraph {
public:
  std::size_t add_agent(std::string id, double mem_req_gb) {
    if (id.empty() || id.find_first_of(" \t\r\n,=;@:#") != std::string::npos)
      throw Error("AgentGraph: invalid agent id '" + id + "'");
    if (!(mem_req_gb > 0.0)) throw Error("AgentGraph: mem_req_gb must be positive for " + id);
    if (index_.count(id)) throw Error("AgentGraph: duplicate agent '" + id + "'");
    index_.emplace(id, agents_.size());
    agents_.push_back({std::move(id), mem_req_gb});
    deps_of_.emplace_back();
    dependents_of_.emplace_back();
    return agents_.size() - 1;
  }

  void add_dependency(const std::string& from, const std::string& to, double volume_gb) {
    if (!(volume_gb >= 0.0)) throw Error("AgentGraph: data volume must be nonnegative");
    const std::size_t f = index_of(from), t = index_of(to);
    if (f == t) throw Error("AgentGraph: self dependency on '" + from + "'");
    if (reaches(t, f)) throw Error("AgentGraph: dependency " + from + " -> " + to + " creates a cycle");
    deps_of_[f].push_back(edges_.size());
    dependents_of_[t].push_back(edges_.size());
    edges_.push_back({f, t, volume_gb});
  }

  std::size_t size() const noexcept { return agents_.size(); }
  const std::vector<Agent>& agents() const noexcept { return agents_; }
  const std::vector<Dependency>& edges() const noexcept { return edges_; }
  const Agent& agent(std::size_t i) const { return agents_.at(i); }
  const std::vector<std::size_t>& deps_of(std::size_t i) const { return deps_of_.at(i); }
  const std::vector<std::size_t>& dependents_of(std::size_t i) const { return dependents_of_.at(i); }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error("AgentGraph: unknown agent '" + id + "'");
    return it->second;
  }

  double incident_volume(std::size_t i) const {
    double v = 0.0;
    for (auto e : deps_of_[i]) v += edges_[e].volume_gb;
    for (auto e : dependents_of_[i]) v += edges_[e].volume_gb;
    return v;
  }

  double total_mem() const {
    double s = 0.0;
    for (const auto& a : agents_) s += a.mem_req_gb;
    return s;
  }

private:
  bool reaches(std::size_t from, std::size_t target) const {
    std::vector<std::size_t> stack{from};
    std::vector<bool> seen(agents_.size(), false);
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      if (v == target) return true;
      if (seen[v]) continue;
      seen[v] = true;
      for (auto e : deps_of_[v]) stack.push_back(edges_[e].to);
    }
    return false;
  }

  std::vector<Agent> agents_;
  std::map<std::string, std::size_t> index_;
  std::vector<Dependency> edges_;
  std::vector<std::vector<std::size_t>> deps_of_;
  std::vector<std::vector<std::size_t>> dependents_of_;
};

struct ClusterNode {
  NodeId id;
  double mem_capacity_gb = 8.0;
  unsigned cpu_cores = 4;
  double cpu_util = 0.0;  // background CPU load fraction
};

struct DeployedAgent {
  NodeId node;
  double mem_req_gb = 0.0;
};

struct ClusterState {
  std::vector<ClusterNode> nodes;
  std::map<std::string, DeployedAgent> deployed;

  bool has_node(NodeId id) const {
    return std::any_of(nodes.begin(), nodes.end(), [&](const ClusterNode& n) { return n.id == id; });
  }

  std::size_t node_index(NodeId id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].id == id) return i;
    throw Error("ClusterState: unknown node " + std::to_string(id.value));
  }

  double mem_used(NodeId id) const {
    double s = 0.0;
    for (const auto& [_, d] : deployed)
      if (d.node == id) s += d.mem_req_gb;
    return s;
  }

  std::vector<double> mem_utilization() const {
    std::vector<double> u;
    for (const auto& n : nodes) u.push_back(std::clamp(mem_used(n.id) / n.mem_capacity_gb, 0.0, 1.0));
    return u;
  }

  /// Mean of (average memory utilization, average CPU utilization).
  double resource_utilization() const {
    if (nodes.empty()) return 0.0;
    double mem = 0.0, cpu = 0.0;
    auto mu = mem_utilization();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      mem += mu[i];
      cpu += std::clamp(nodes[i].cpu_util, 0.0, 1.0);
    }
    const double n = static_cast<double>(nodes.size());
    return 0.5 * (mem / n + cpu / n);
  }

  /// Drops a node; agents on it become undeployed.
  void remove_node(NodeId id) {
    nodes.erase(nodes.begin() + static_cast<std::ptrdiff_t>(node_index(id)));
    for (auto it = deployed.begin(); it != deployed.end();)
      it = it->second.node == id ? deployed.erase(it) : std::next(it);
  }

  void validate() const {
    for (const auto& n : nodes)
      if (!(n.mem_capacity_gb > 0.0) || n.cpu_cores == 0)
        throw Error("ClusterState: node capacities must be positive");
  }
};

struct Placement {
  std::map<std::string, NodeId> assign;
  double total_cost = 0.0;
  double lambda_mem = 0.0;
};

struct TriggerConfig {
  double theta = 0.8;
  double rho = 0.85;

  void validate() const {
    if (!(theta > 0.0 && theta < 1.0)) throw Error("TriggerConfig: theta must lie in (0,1)");
    if (!(rho > 0.0 && rho < 1.0)) throw Error("TriggerConfig: rho must lie in (0,1)");
  }
};

/// Zero on the same node, latency / bandwidth otherwise.
inline double network_cost(const NetworkModel& net, NodeId a, NodeId b) {
  if (!net.contains(a) || !net.contains(b))
    throw Error("network_cost: unknown node " + std::to_string((net.contains(a) ? b : a).value));
  if (a == b) return 0.0;
  return net.latency_ms(a, b) / net.bandwidth_gbps(a, b);
}

namespace detail {
inline NodeId placed_node(const Placement& p, const std::string& agent) {
  auto it = p.assign.find(agent);
  if (it == p.assign.end()) throw Error("placement: agent '" + agent + "' is not placed");
  return it->second;
}
}  // namespace detail

/// Σ_{j ∈ deps(i)} volume(i, j) · network_cost(p_i, p_j)
inline double comm_cost(const AgentGraph& g, const Placement& placement, const NetworkModel& net,
                        std::size_t i) {
  const NodeId pi = detail::placed_node(placement, g.agent(i).id);
  double c = 0.0;
  for (auto e : g.deps_of(i)) {
    const auto& d = g.edges()[e];
    c += d.volume_gb * network_cost(net, pi, detail::placed_node(placement, g.agent(d.to).id));
  }
  return c;
}

/// Agent memory plus the volume it pulls from other nodes.
inline double memory_overhead(const AgentGraph& g, const Placement& placement, std::size_t i) {
  const NodeId pi = detail::placed_node(placement, g.agent(i).id);
  double m = g.agent(i).mem_req_gb;
  for (auto e : g.deps_of(i)) {
    const auto& d = g.edges()[e];
    if (detail::placed_node(placement, g.agent(d.to).id) != pi) m += d.volume_gb;
  }
  return m;
}

inline void check_feasible(const AgentGraph& g, const Placement& placement,
                           const ClusterState& cluster) {
  std::map<NodeId, double> load;
  for (std::size_t i = 0; i < g.size(); ++i) {
    NodeId n = detail::placed_node(placement, g.agent(i).id);
    if (!cluster.has_node(n))
      throw Error("placement: agent '" + g.agent(i).id + "' bound to unknown node " +
                  std::to_string(n.value));
    load[n] += g.agent(i).mem_req_gb;
  }
  for (const auto& [n, used] : load) {
    const auto& node = cluster.nodes[cluster.node_index(n)];
    if (used > node.mem_capacity_gb + 1e-9)
      throw Error("placement: node " + std::to_string(n.value) + " needs " + format_real(used) +
                  " GB but has capacity " + format_real(node.mem_capacity_gb) + " GB");
  }
}

/// Σ comm_cost(i) + lambda_mem · Σ memory_overhead(i)
inline double placement_cost(const AgentGraph& g, const Placement& placement,
                             const ClusterState& cluster, const NetworkModel& net,
                             double lambda_mem) {
  check_feasible(g, placement, cluster);
  double comm = 0.0, mem = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    comm += comm_cost(g, placement, net, i);
    mem += memory_overhead(g, placement, i);
  }
  return comm + lambda_mem * mem;
}

inline bool should_recompile(double current_perf_ops, double expected_perf_ops, double utilization,
                             const TriggerConfig& cfg = {}) {
  cfg.validate();
  if (!(expected_perf_ops > 0.0))
    throw Error("should_recompile: expected performance must be positive");
  if (!(utilization >= 0.0 && utilization <= 1.0))
    throw Error("should_recompile: utilization must lie in [0,1]");
  return (current_perf_ops / expected_perf_ops < cfg.theta) || (utilization > cfg.rho);
}

// ---------------------------------------------------------------------------
// Optimizer. Works on index vectors (agent -> node index) internally.

namespace detail {

class PlacementProblem {
public:
  PlacementProblem(const AgentGraph& g, const ClusterState& c, const NetworkModel& net,
                   double lambda_mem)
      : g_(g), c_(c), lambda_(lambda_mem), nc_(c.nodes.size() * c.nodes.size()) {
    for (std::size_t a = 0; a < c.nodes.size(); ++a)
      for (std::size_t b = 0; b < c.nodes.size(); ++b)
        nc_[a * c.nodes.size() + b] = network_cost(net, c.nodes[a].id, c.nodes[b].id);
  }

  std::size_t nodes() const { return c_.nodes.size(); }

  double edge_cost(const Dependency& d, std::size_t pf, std::size_t pt) const {
    if (pf == pt) return 0.0;
    return d.volume_gb * (nc_[pf * nodes() + pt] + lambda_);
  }

  double cost(const std::vector<std::size_t>& p) const {
    double s = 0.0;
    for (const auto& d : g_.edges()) s += edge_cost(d, p[d.from], p[d.to]);
    for (const auto& a : g_.agents()) s += lambda_ * a.mem_req_gb;
    return s;
  }

  bool feasible(const std::vector<std::size_t>& p) const {
    std::vector<double> load(nodes(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) load[p[i]] += g_.agent(i).mem_req_gb;
    for (std::size_t n = 0; n < nodes(); ++n)
      if (load[n] > c_.nodes[n].mem_capacity_gb + 1e-9) return false;
    return true;
  }

  /// Greedy: agents by descending incident volume, each to the feasible node
  /// with the least incremental cost. Empty result if some agent cannot fit.
  std::vector<std::size_t> greedy() const {
    constexpr std::size_t kUnplaced = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> order(g_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return g_.incident_volume(a) > g_.incident_volume(b);
    });
    std::vector<std::size_t> p(g_.size(), kUnplaced);
    std::vector<double> free(nodes());
    for (std::size_t n = 0; n < nodes(); ++n) free[n] = c_.nodes[n].mem_capacity_gb;
    for (std::size_t a : order) {
      const double req = g_.agent(a).mem_req_gb;
      std::optional<std::size_t> best;
      double best_inc = std::numeric_limits<double>::infinity();
      for (std::size_t n = 0; n < nodes(); ++n) {
        if (free[n] + 1e-9 < req) continue;
        double inc = 0.0;
        for (auto e : g_.deps_of(a)) {
          const auto& d = g_.edges()[e];
          if (p[d.to] != kUnplaced) inc += edge_cost(d, n, p[d.to]);
        }
        for (auto e : g_.dependents_of(a)) {
          const auto& d = g_.edges()[e];
          if (p[d.from] != kUnplaced) inc += edge_cost(d, p[d.from], n);
        }
        if (inc < best_inc) {
          best_inc = inc;
          best = n;
        }
      }
      if (!best) return {};
      p[a] = *best;
      free[*best] -= req;
    }
    return p;
  }

  /// Best-improvement local search until no move lowers the cost. Moves:
  /// relocate one agent, swap two agents, and relocate two agents at once
  /// (the last only when no single move improves; it escapes packings where
  /// capacity blocks every single move).
  std::vector<std::size_t> local_search(std::vector<std::size_t> p) const {
    std::vector<double> load(nodes(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) load[p[i]] += g_.agent(i).mem_req_gb;
    auto feasible_load = [&]() {
      for (std::size_t n = 0; n < nodes(); ++n)
        if (load[n] > c_.nodes[n].mem_capacity_gb + 1e-9) return false;
      return true;
    };
    // Moves agents to new nodes, keeping `load` in step.
    auto move = [&](std::size_t a, std::size_t n) {
      load[p[a]] -= g_.agent(a).mem_req_gb;
      load[n] += g_.agent(a).mem_req_gb;
      p[a] = n;
    };
    double cur = cost(p);
    auto improves = [&](double c, double best) { return c < best - 1e-12 * (1.0 + std::abs(best)); };
    while (true) {
      double best = cur;
      std::vector<std::pair<std::size_t, std::size_t>> step;  // (agent, node) assignments
      for (std::size_t a = 0; a < p.size(); ++a) {
        const std::size_t from = p[a];
        for (std::size_t n = 0; n < nodes(); ++n) {
          if (n == from) continue;
          move(a, n);
          if (feasible_load()) {
            const double c = cost(p);
            if (improves(c, best)) best = c, step = {{a, n}};
          }
          move(a, from);
        }
      }
      for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t b = a + 1; b < p.size(); ++b) {
          const std::size_t na = p[a], nb = p[b];
          if (na == nb) continue;
          move(a, nb);
          move(b, na);
          if (feasible_load()) {
            const double c = cost(p);
            if (improves(c, best)) best = c, step = {{a, nb}, {b, na}};
          }
          move(b, nb);
          move(a, na);
        }
      if (step.empty())
        for (std::size_t a = 0; a < p.size(); ++a)
          for (std::size_t b = a + 1; b < p.size(); ++b) {
            const std::size_t fa = p[a], fb = p[b];
            for (std::size_t na = 0; na < nodes(); ++na)
              for (std::size_t nb = 0; nb < nodes(); ++nb) {
                if (na == fa || nb == fb) continue;
                move(a, na);
                move(b, nb);
                if (feasible_load()) {
                  const double c = cost(p);
                  if (improves(c, best)) best = c, step = {{a, na}, {b, nb}};
                }
                move(b, fb);
                move(a, fa);
              }
          }
      if (step.empty()) return p;
      for (auto [a, n] : step) move(a, n);
      cur = best;
    }
  }

  /// Randomized depth-first packing: a feasible assignment or nothing.
  /// Agents go largest first; node order is shuffled per agent.
  std::optional<std::vector<std::size_t>> random_packing(Rng& rng, std::size_t budget = 100000) const {
    std::vector<std::size_t> order(g_.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return g_.agent(a).mem_req_gb > g_.agent(b).mem_req_gb;
    });
    std::vector<std::vector<std::size_t>> choices(order.size());
    std::vector<std::size_t> next(order.size(), 0), p(g_.size());
    std::vector<double> free;
    for (const auto& n : c_.nodes) free.push_back(n.mem_capacity_gb);
    auto fill_choices = [&](std::size_t depth) {
      choices[depth].resize(nodes());
      std::iota(choices[depth].begin(), choices[depth].end(), 0);
      std::shuffle(choices[depth].begin(), choices[depth].end(), rng);
      next[depth] = 0;
    };
    std::size_t depth = 0, steps = 0;
    if (!order.empty()) fill_choices(0);
    while (depth < order.size()) {
      if (++steps > budget) return std::nullopt;
      const std::size_t a = order[depth];
      const double req = g_.agent(a).mem_req_gb;
      bool placed = false;
      while (next[depth] < choices[depth].size()) {
        const std::size_t n = choices[depth][next[depth]++];
        if (free[n] + 1e-9 >= req) {
          free[n] -= req;
          p[a] = n;
          placed = true;
          break;
        }
      }
      if (placed) {
        if (++depth < order.size()) fill_choices(depth);
        continue;
      }
      if (depth == 0) return std::nullopt;
      --depth;
      free[p[order[depth]]] += g_.agent(order[depth]).mem_req_gb;
    }
    return p;
  }

  std::optional<std::vector<std::size_t>> from_assign(const std::map<std::string, NodeId>& m) const {
    std::vector<std::size_t> p(g_.size());
    for (std::size_t i = 0; i < g_.size(); ++i) {
      auto it = m.find(g_.agent(i).id);
      if (it == m.end() || !c_.has_node(it->second)) return std::nullopt;
      p[i] = c_.node_index(it->second);
    }
    if (!feasible(p)) return std::nullopt;
    return p;
  }

  Placement to_placement(const std::vector<std::size_t>& p) const {
    Placement out;
    for (std::size_t i = 0; i < p.size(); ++i) out.assign[g_.agent(i).id] = c_.nodes[p[i]].id;
    out.total_cost = cost(p);
    out.lambda_mem = lambda_;
    return out;
  }

private:
  const AgentGraph& g_;
  const ClusterState& c_;
  double lambda_;
  std::vector<double> nc_;
};

}  // namespace detail

/// Conversions between placement maps and the long-term memory payload.
inline std::map<std::string, NodeId> to_node_assign(const std::map<std::string, std::uint64_t>& m) {
  std::map<std::string, NodeId> out;
  for (const auto& [k, v] : m) out[k] = NodeId{v};
  return out;
}

inline std::map<std::string, std::uint64_t> to_raw_assign(const std::map<std::string, NodeId>& m) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& [k, v] : m) out[k] = v.value;
  return out;
}

/// Greedy construction refined by local search. Local search also runs from
/// the LTM hint, the cluster's current deployment (when either is a complete
/// feasible assignment) and a few seeded random packings; the cheapest result
/// wins (greedy first on ties), so the result never costs more than greedy.
inline Placement optimize_placement(const AgentGraph& g, const ClusterState& cluster,
                                    const NetworkModel& net, const std::optional<LtmRecord>& hint,
                                    double lambda_mem) {
  cluster.validate();
  if (!(lambda_mem >= 0.0)) throw Error("optimize_placement: lambda_mem must be nonnegative");
  if (g.size() == 0) return Placement{{}, 0.0, lambda_mem};
  if (cluster.nodes.empty()) throw Error("optimize_placement: cluster has no nodes");
  double cap = 0.0;
  for (const auto& n : cluster.nodes) cap += n.mem_capacity_gb;
  if (g.total_mem() > cap + 1e-9)
    throw Error("optimize_placement: agents need " + format_real(g.total_mem()) +
                " GB but cluster capacity is " + format_real(cap) + " GB");

  detail::PlacementProblem prob(g, cluster, net, lambda_mem);
  std::vector<std::vector<std::size_t>> starts;
  auto greedy = prob.greedy();
  if (!greedy.empty()) starts.push_back(greedy);
  if (hint)
    if (auto* pat = std::get_if<PlacementPattern>(&hint->payload))
      if (auto p = prob.from_assign(to_node_assign(pat->assign))) starts.push_back(*p);
  std::map<std::string, NodeId> current;
  for (const auto& [id, d] : cluster.deployed) current[id] = d.node;
  if (auto p = prob.from_assign(current)) starts.push_back(*p);

  // Seeded random packings as extra starts; also the only starts when greedy
  // cannot pack. The seed depends on the instance shape only.
  Rng rng(mix_seed(0x9e3779b97f4a7c15ULL ^ (g.size() << 16) ^ cluster.nodes.size()));
  for (std::size_t r = 0; r < kPlacementRestarts; ++r)
    if (auto p = prob.random_packing(rng)) starts.push_back(*p);
  if (starts.empty()) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto& n = *std::max_element(cluster.nodes.begin(), cluster.nodes.end(),
                                        [](const ClusterNode& x, const ClusterNode& y) {
                                          return x.mem_capacity_gb < y.mem_capacity_gb;
                                        });
      if (g.agent(i).mem_req_gb > n.mem_capacity_gb + 1e-9)
        throw Error("optimize_placement: agent '" + g.agent(i).id + "' needs " +
                    format_real(g.agent(i).mem_req_gb) + " GB; largest node capacity is " +
                    format_real(n.mem_capacity_gb) + " GB on node " + std::to_string(n.id.value));
    }
    throw Error("optimize_placement: no capacity-feasible packing of " + std::to_string(g.size()) +
                " agents onto " + std::to_string(cluster.nodes.size()) + " nodes");
  }

  std::optional<std::vector<std::size_t>> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (auto& s : starts) {
    auto p = prob.local_search(s);
    double c = prob.cost(p);
    if (c < best_cost) {
      best_cost = c;
      best = std::move(p);
    }
  }
  return prob.to_placement(*best);
}

/// Greedy alone, without refinement. Empty when greedy cannot pack agents.
inline std::optional<Placement> greedy_placement(const AgentGraph& g, const ClusterState& cluster,
                                                 const NetworkModel& net, double lambda_mem) {
  detail::PlacementProblem prob(g, cluster, net, lambda_mem);
  auto p = prob.greedy();
  if (p.empty()) return std::nullopt;
  return prob.to_placement(p);
}

// ---------------------------------------------------------------------------
// Manifests

struct ManifestDoc {
  std::string agent;
  NodeId node;
  double mem_limit_gb = 0.0;
  std::vector<std::pair<std::string, NodeId>> deps;  // dependency endpoint agent@node

  bool operator==(const ManifestDoc&) const = default;
};

struct DeploymentManifest {
  std::vector<ManifestDoc> docs;

  std::map<std::string, NodeId> assignment() const {
    std::map<std::string, NodeId> m;
    for (const auto& d : docs) m[d.agent] = d.node;
    return m;
  }

  std::string to_string() const {
    std::string out = "# " + std::string(kManifestFormatTag) + "\n";
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (i) out += "---\n";
      const auto& d = docs[i];
      out += "agent: " + d.agent + "\n";
      out += "node: " + std::to_string(d.node.value) + "\n";
      out += "mem_limit_gb: " + format_real(d.mem_limit_gb) + "\n";
      out += "deps:";
      for (std::size_t k = 0; k < d.deps.size(); ++k)
        out += (k ? "," : " ") + d.deps[k].first + "@" + std::to_string(d.deps[k].second.value);
      out += "\n";
    }
    return out;
  }

  bool operator==(const DeploymentManifest&) const = default;
};

/// One document per agent, in agent-id order.
inline DeploymentManifest generate_manifest(const Placement& placement, const AgentGraph& g) {
  DeploymentManifest m;
  std::vector<std::size_t> order(g.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return g.agent(a).id < g.agent(b).id; });
  for (std::size_t i : order) {
    ManifestDoc d;
    d.agent = g.agent(i).id;
    d.node = detail::placed_node(placement, d.agent);
    d.mem_limit_gb = kMemLimitFactor * g.agent(i).mem_req_gb;
    for (auto e : g.deps_of(i)) {
      const auto& dep = g.agent(g.edges()[e].to).id;
      d.deps.emplace_back(dep, detail::placed_node(placement, dep));
    }
    m.docs.push_back(std::move(d));
  }
  return m;
}

inline DeploymentManifest parse_manifest(std::string_view text) {
  DeploymentManifest m;
  std::optional<ManifestDoc> cur;
  std::size_t lineno = 0;
  auto flush = [&]() {
    if (!cur) return;
    if (cur->agent.empty()) throw Error("manifest: document without agent key");
    m.docs.push_back(std::move(*cur));
    cur.reset();
  };
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line == "---") {
      flush();
      continue;
    }
    auto colon = line.find(':');
    if (colon == std::string_view::npos)
      throw Error("manifest line " + std::to_string(lineno) + ": expected 'key: value'");
    auto key = trim(line.substr(0, colon));
    auto value = trim(line.substr(colon + 1));
    if (!cur) cur.emplace();
    if (key == "agent") {
      cur->agent = std::string(value);
    } else if (key == "node") {
      cur->node = NodeId{parse_int<std::uint64_t>(value)};
    } else if (key == "mem_limit_gb") {
      cur->mem_limit_gb = parse_real(value);
    } else if (key == "deps") {
      if (!value.empty())
        for (auto item : split(value, ',')) {
          auto at = item.find('@');
          if (at == std::string_view::npos)
            throw Error("manifest line " + std::to_string(lineno) + ": dependency needs agent@node");
          cur->deps.emplace_back(std::string(trim(item.substr(0, at))),
                                 NodeId{parse_int<std::uint64_t>(trim(item.substr(at + 1)))});
        }
    } else {
      throw Error("manifest line " + std::to_string(lineno) + ": unknown key '" +
                  std::string(key) + "'");
    }
  }
  flush();
  return m;
}

struct ApplyResult {
  ClusterState cluster;
  std::size_t moved = 0;
  double delay_s = 0.0;
};

/// Moves agents to their bound nodes. Aborts (throws, input untouched) when a
/// node is unknown or a node's capacity would be exceeded.
inline ApplyResult apply_manifest(const ClusterState& cluster, const DeploymentManifest& manifest,
                                  double delay_per_move_s = 2.0) {
  ApplyResult r{cluster, 0, 0.0};
  for (const auto& d : manifest.docs) {
    if (!cluster.has_node(d.node))
      throw Error("apply_manifest: agent '" + d.agent + "' bound to unknown node " +
                  std::to_string(d.node.value));
    DeployedAgent next{d.node, d.mem_limit_gb / kMemLimitFactor};
    auto it = r.cluster.deployed.find(d.agent);
    if (it == r.cluster.deployed.end() || it->second.node != d.node) ++r.moved;
    r.cluster.deployed[d.agent] = next;
  }
  for (const auto& n : r.cluster.nodes) {
    const double used = r.cluster.mem_used(n.id);
    if (used > n.mem_capacity_gb + 1e-9)
      throw Error("apply_manifest: node " + std::to_string(n.id.value) + " would hold " +
                  format_real(used) + " GB over capacity " + format_real(n.mem_capacity_gb) + " GB");
  }
  r.delay_s = delay_per_move_s * static_cast<double>(r.moved);
  return r;
}

}  // namespace sedma
