#include <gtest/gtest.h>

#include <cmath>

#include "sedma/deployer.hpp"

using namespace sedma;

namespace {

struct Instance {
  AgentGraph g;
  ClusterState cluster;
  NetworkModel net;
  double lambda = 0.0;
};

ClusterState make_cluster(const std::vector<double>& caps) {
  ClusterState c;
  for (std::size_t i = 0; i < caps.size(); ++i) c.nodes.push_back({NodeId{i + 1}, caps[i], 4, 0.0});
  return c;
}

NetworkModel make_net(std::size_t n, Rng& rng) {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(NodeId{i + 1});
  NetworkModel net(ids, 0);
  std::uniform_real_distribution<double> lat(1, 200), bw(0.5, 20);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) net.set_link(ids[i], ids[j], {lat(rng), bw(rng), 0.0});
  return net;
}

bool any_fits(const AgentGraph& g, const std::vector<double>& caps) {
  std::vector<std::size_t> p(g.size(), 0);
  for (;;) {
    std::vector<double> load(caps.size(), 0);
    for (std::size_t i = 0; i < p.size(); ++i) load[p[i]] += g.agent(i).mem_req_gb;
    bool ok = true;
    for (std::size_t n = 0; n < caps.size(); ++n) ok = ok && load[n] <= caps[n];
    if (ok) return true;
    std::size_t k = 0;
    while (k < p.size() && ++p[k] == caps.size()) p[k++] = 0;
    if (k == p.size()) return false;
  }
}

Instance random_instance(Rng& rng) {
  std::uniform_int_distribution<int> na(2, 6), nn(2, 3);
  std::uniform_real_distribution<double> mem(0.5, 6), vol(0, 5), u(0, 1), lam(0, 20);
  Instance in;
  const int agents = na(rng), nodes = nn(rng);
  double total = 0, largest = 0;
  for (int i = 0; i < agents; ++i) {
    const double m = mem(rng);
    total += m;
    largest = std::max(largest, m);
    in.g.add_agent("a" + std::to_string(i), m);
  }
  for (int i = 0; i < agents; ++i)
    for (int j = 0; j < i; ++j)
      if (u(rng) < 0.5) in.g.add_dependency("a" + std::to_string(i), "a" + std::to_string(j), vol(rng));
  // Room for everything, but usually not on one node.
  std::vector<double> caps;
  do {
    caps.clear();
    for (int n = 0; n < nodes; ++n) caps.push_back(std::max(largest, total * (0.45 + 0.4 * u(rng))));
  } while (!any_fits(in.g, caps));
  in.cluster = make_cluster(caps);
  in.net = make_net(std::size_t(nodes), rng);
  in.lambda = lam(rng);
  return in;
}

// Direct evaluation of the objective from raw latencies and bandwidths.
double brute_cost(const Instance& in, const std::vector<std::size_t>& p) {
  double comm = 0, mem = 0;
  for (std::size_t i = 0; i < in.g.size(); ++i) mem += in.g.agent(i).mem_req_gb;
  for (const auto& e : in.g.edges()) {
    if (p[e.from] == p[e.to]) continue;
    const NodeId a = in.cluster.nodes[p[e.from]].id, b = in.cluster.nodes[p[e.to]].id;
    comm += e.volume_gb * in.net.link(a, b).latency_ms / in.net.link(a, b).bandwidth_gbps;
    mem += e.volume_gb;
  }
  return comm + in.lambda * mem;
}

bool fits(const Instance& in, const std::vector<std::size_t>& p) {
  std::vector<double> load(in.cluster.nodes.size(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) load[p[i]] += in.g.agent(i).mem_req_gb;
  for (std::size_t n = 0; n < load.size(); ++n)
    if (load[n] > in.cluster.nodes[n].mem_capacity_gb + 1e-9) return false;
  return true;
}

// Exhaustive optimum; +inf when nothing fits.
double exhaustive_optimum(const Instance& in) {
  const std::size_t a = in.g.size(), n = in.cluster.nodes.size();
  std::vector<std::size_t> p(a, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    if (fits(in, p)) best = std::min(best, brute_cost(in, p));
    std::size_t k = 0;
    while (k < a && ++p[k] == n) p[k++] = 0;
    if (k == a) return best;
  }
}

std::vector<std::size_t> indices(const Instance& in, const Placement& pl) {
  std::vector<std::size_t> p;
  for (const auto& ag : in.g.agents()) p.push_back(in.cluster.node_index(pl.assign.at(ag.id)));
  return p;
}

Placement to_placement(const Instance& in, const std::vector<std::size_t>& p) {
  Placement out;
  for (std::size_t i = 0; i < p.size(); ++i) out.assign[in.g.agent(i).id] = in.cluster.nodes[p[i]].id;
  return out;
}

}  // namespace

TEST(NetworkCost, Examples) {
  NetworkModel net({NodeId{1}, NodeId{2}}, 0);
  net.set_link(NodeId{1}, NodeId{2}, {200, 10, 0});
  EXPECT_DOUBLE_EQ(network_cost(net, NodeId{1}, NodeId{2}), 20.0);
  EXPECT_DOUBLE_EQ(network_cost(net, NodeId{2}, NodeId{1}), 20.0);
  EXPECT_EQ(network_cost(net, NodeId{1}, NodeId{1}), 0.0);
  EXPECT_THROW(network_cost(net, NodeId{1}, NodeId{9}), Error);
}

TEST(CommCost, SingleDependency) {
  NetworkModel net({NodeId{1}, NodeId{2}}, 0);
  net.set_link(NodeId{1}, NodeId{2}, {200, 10, 0});
  AgentGraph g;
  g.add_agent("a", 1);
  g.add_agent("b", 1);
  g.add_dependency("a", "b", 2.0);
  Placement p{{{"a", NodeId{1}}, {"b", NodeId{2}}}, 0, 0};
  EXPECT_DOUBLE_EQ(comm_cost(g, p, net, g.index_of("a")), 40.0);
  EXPECT_EQ(comm_cost(g, p, net, g.index_of("b")), 0.0);
}

TEST(PlacementCost, SingleAgentAndZeroLambda) {
  AgentGraph g;
  g.add_agent("solo", 3.0);
  auto cluster = make_cluster({8});
  NetworkModel net({NodeId{1}}, 0);
  EXPECT_DOUBLE_EQ(placement_cost(g, {{{"solo", NodeId{1}}}, 0, 0}, cluster, net, 0.5), 1.5);

  Rng rng(1);
  auto in = random_instance(rng);
  std::vector<std::size_t> p(in.g.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = i % in.cluster.nodes.size();
  for (auto& n : in.cluster.nodes) n.mem_capacity_gb = 1e3;
  double comm = 0;
  for (std::size_t i = 0; i < in.g.size(); ++i) comm += comm_cost(in.g, to_placement(in, p), in.net, i);
  EXPECT_DOUBLE_EQ(placement_cost(in.g, to_placement(in, p), in.cluster, in.net, 0.0), comm);
}

TEST(PlacementCost, MatchesBruteForceEvaluator) {
  Rng rng(2);
  for (int t = 0; t < 30; ++t) {
    auto in = random_instance(rng);
    for (auto& n : in.cluster.nodes) n.mem_capacity_gb = 1e3;
    std::vector<std::size_t> p(in.g.size());
    for (auto& x : p) x = rng() % in.cluster.nodes.size();
    EXPECT_NEAR(placement_cost(in.g, to_placement(in, p), in.cluster, in.net, in.lambda), brute_cost(in, p),
                1e-9 * (1 + brute_cost(in, p)));
  }
}

TEST(PlacementCost, RejectsInfeasible) {
  AgentGraph g;
  g.add_agent("a", 5);
  g.add_agent("b", 5);
  auto cluster = make_cluster({8, 8});
  NetworkModel net({NodeId{1}, NodeId{2}}, 0);
  net.set_link(NodeId{1}, NodeId{2}, {1, 1, 0});
  EXPECT_THROW(placement_cost(g, {{{"a", NodeId{1}}, {"b", NodeId{1}}}, 0, 0}, cluster, net, 1), Error);
  EXPECT_THROW(placement_cost(g, {{{"a", NodeId{1}}}, 0, 0}, cluster, net, 1), Error);
  EXPECT_THROW(placement_cost(g, {{{"a", NodeId{1}}, {"b", NodeId{3}}}, 0, 0}, cluster, net, 1), Error);
}

TEST(OptimizePlacement, SingleAgentSingleNode) {
  AgentGraph g;
  g.add_agent("solo", 3.0);
  auto p = optimize_placement(g, make_cluster({8}), NetworkModel({NodeId{1}}, 0), std::nullopt, 1.0);
  EXPECT_EQ(p.assign.at("solo"), NodeId{1});
  EXPECT_DOUBLE_EQ(p.total_cost, 3.0);
}

TEST(OptimizePlacement, HugeEdgeCoLocates) {
  AgentGraph g;
  g.add_agent("a", 2);
  g.add_agent("b", 2);
  g.add_dependency("a", "b", 1e3);
  NetworkModel net({NodeId{1}, NodeId{2}}, 0);
  net.set_link(NodeId{1}, NodeId{2}, {10, 1, 0});
  auto p = optimize_placement(g, make_cluster({8, 8}), net, std::nullopt, 0.0);
  EXPECT_EQ(p.assign.at("a"), p.assign.at("b"));
  EXPECT_EQ(p.total_cost, 0.0);
}

TEST(OptimizePlacement, CoLocationWheneverOneNodeFits) {
  Rng rng(3);
  std::uniform_real_distribution<double> mem(0.5, 4), vol(0.01, 10);
  for (int t = 0; t < 50; ++t) {
    AgentGraph g;
    const double ma = mem(rng), mb = mem(rng);
    g.add_agent("a", ma);
    g.add_agent("b", mb);
    g.add_dependency("b", "a", vol(rng));
    auto cluster = make_cluster({ma + mb, std::max(ma, mb)});  // only node 1 holds both
    auto net = make_net(2, rng);
    auto p = optimize_placement(g, cluster, net, std::nullopt, 0.0);
    EXPECT_EQ(p.assign.at("a"), p.assign.at("b"));
  }
}

TEST(OptimizePlacement, NearOptimalOnSmallInstances) {
  Rng rng(4);
  int exact = 0;
  for (int t = 0; t < 50; ++t) {
    auto in = random_instance(rng);
    const double opt = exhaustive_optimum(in);
    ASSERT_TRUE(std::isfinite(opt));
    auto p = optimize_placement(in.g, in.cluster, in.net, std::nullopt, in.lambda);
    const double c = brute_cost(in, indices(in, p));
    EXPECT_NEAR(c, p.total_cost, 1e-9 * (1 + c));
    EXPECT_LE(c, 1.2 * opt + 1e-9);
    exact += c <= opt * (1 + 1e-9) + 1e-12;
  }
  EXPECT_GE(exact, 45);
}

TEST(OptimizePlacement, NeverWorseThanGreedyOrRandomFeasible) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    auto in = random_instance(rng);
    auto fin = optimize_placement(in.g, in.cluster, in.net, std::nullopt, in.lambda);
    auto greedy = greedy_placement(in.g, in.cluster, in.net, in.lambda);
    if (greedy) {
      EXPECT_LE(fin.total_cost, greedy->total_cost + 1e-9);
    }
    // random feasible baselines
    for (int r = 0; r < 20; ++r) {
      std::vector<std::size_t> p(in.g.size());
      for (auto& x : p) x = rng() % in.cluster.nodes.size();
      if (!fits(in, p)) continue;
      EXPECT_LE(fin.total_cost, brute_cost(in, p) + 1e-9);
    }
  }
}

TEST(OptimizePlacement, FeasibleHintIsNeverWorseThanNoHint) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    auto in = random_instance(rng);
    auto plain = optimize_placement(in.g, in.cluster, in.net, std::nullopt, in.lambda);
    LtmRecord hint{PlacementPattern{plain.total_cost, to_raw_assign(plain.assign)}, 1.0, 0, 0};
    auto hinted = optimize_placement(in.g, in.cluster, in.net, hint, in.lambda);
    EXPECT_LE(hinted.total_cost, plain.total_cost + 1e-12);
  }
}

TEST(OptimizePlacement, RejectsInsufficientCapacity) {
  AgentGraph g;
  g.add_agent("a", 5);
  g.add_agent("b", 5);
  NetworkModel net({NodeId{1}, NodeId{2}}, 0);
  net.set_link(NodeId{1}, NodeId{2}, {1, 1, 0});
  EXPECT_THROW(optimize_placement(g, make_cluster({4, 4}), net, std::nullopt, 1), Error);
  // total fits but no single node holds a 5 GB agent
  EXPECT_THROW(optimize_placement(g, make_cluster({4.9, 4.9, 4.9}),
                                  [] {
                                    NetworkModel n({NodeId{1}, NodeId{2}, NodeId{3}}, 0);
                                    n.set_link(NodeId{1}, NodeId{2}, {1, 1, 0});
                                    n.set_link(NodeId{1}, NodeId{3}, {1, 1, 0});
                                    n.set_link(NodeId{2}, NodeId{3}, {1, 1, 0});
                                    return n;
                                  }(),
                                  std::nullopt, 1),
               Error);
}

TEST(AgentGraph, RejectsCyclesAndBadIds) {
  AgentGraph g;
  g.add_agent("a", 1);
  g.add_agent("b", 1);
  g.add_agent("c", 1);
  g.add_dependency("a", "b", 1);
  g.add_dependency("b", "c", 1);
  EXPECT_THROW(g.add_dependency("c", "a", 1), Error);
  EXPECT_THROW(g.add_dependency("a", "a", 1), Error);
  EXPECT_THROW(g.add_dependency("a", "zz", 1), Error);
  EXPECT_THROW(g.add_agent("a", 1), Error);
  EXPECT_THROW(g.add_agent("bad id", 1), Error);
  EXPECT_THROW(g.add_agent("d", 0), Error);
}

TEST(ShouldRecompile, TruthTableAtBoundaries) {
  const TriggerConfig cfg{0.8, 0.85};
  EXPECT_TRUE(should_recompile(0.79, 1.0, 0.86, cfg));
  EXPECT_TRUE(should_recompile(0.79, 1.0, 0.85, cfg));
  EXPECT_TRUE(should_recompile(0.8, 1.0, 0.86, cfg));
  EXPECT_FALSE(should_recompile(0.8, 1.0, 0.85, cfg));
  EXPECT_TRUE(should_recompile(0.79, 1.0, 0.5, cfg));
  EXPECT_TRUE(should_recompile(1.0, 1.0, 0.86, cfg));
  EXPECT_FALSE(should_recompile(1.0, 1.0, 0.5, cfg));
  EXPECT_THROW(should_recompile(1.0, 0.0, 0.5, cfg), Error);
  EXPECT_THROW(should_recompile(1.0, 1.0, 1.5, cfg), Error);
}

TEST(ShouldRecompile, Monotone) {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 10000; ++t) {
    const double perf = 2 * u(rng), util = u(rng);
    if (should_recompile(perf, 1.0, util)) {
      ASSERT_TRUE(should_recompile(perf * u(rng), 1.0, util));
      ASSERT_TRUE(should_recompile(perf, 1.0, util + (1 - util) * u(rng)));
    }
  }
}

TEST(Manifest, DeterministicAndParsesBack) {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    auto in = random_instance(rng);
    auto p = optimize_placement(in.g, in.cluster, in.net, std::nullopt, in.lambda);
    auto m1 = generate_manifest(p, in.g), m2 = generate_manifest(p, in.g);
    EXPECT_EQ(m1.to_string(), m2.to_string());
    auto back = parse_manifest(m1.to_string());
    EXPECT_EQ(back, m1);
    EXPECT_EQ(back.assignment(), p.assign);
    for (const auto& d : back.docs)
      EXPECT_DOUBLE_EQ(d.mem_limit_gb, 1.2 * in.g.agent(in.g.index_of(d.agent)).mem_req_gb);
  }
}

TEST(Manifest, SingleAgentText) {
  AgentGraph g;
  g.add_agent("solo", 2.5);
  auto m = generate_manifest({{{"solo", NodeId{4}}}, 0, 0}, g);
  EXPECT_EQ(m.to_string(), "# sedma-manifest/1\nagent: solo\nnode: 4\nmem_limit_gb: 3\ndeps:\n");
  EXPECT_THROW(parse_manifest("agent: a\nnode 4\n"), Error);
  EXPECT_THROW(parse_manifest("agent: a\ncolor: red\n"), Error);
  EXPECT_THROW(parse_manifest("node: 4\n"), Error);
}

TEST(ApplyManifest, MovesDelayAndAborts) {
  AgentGraph g;
  for (auto id : {"a", "b", "c"}) g.add_agent(id, 1);
  auto cluster = make_cluster({8, 8, 8});
  auto initial = apply_manifest(cluster, generate_manifest({{{"a", NodeId{1}}, {"b", NodeId{1}}, {"c", NodeId{1}}}, 0, 0}, g));
  EXPECT_EQ(initial.moved, 3u);
  EXPECT_DOUBLE_EQ(initial.delay_s, 6.0);

  auto moved = apply_manifest(initial.cluster,
                              generate_manifest({{{"a", NodeId{2}}, {"b", NodeId{3}}, {"c", NodeId{2}}}, 0, 0}, g));
  EXPECT_EQ(moved.moved, 3u);
  EXPECT_DOUBLE_EQ(moved.delay_s, 6.0);
  EXPECT_EQ(moved.cluster.deployed.at("b").node, NodeId{3});

  auto same = apply_manifest(moved.cluster,
                             generate_manifest({{{"a", NodeId{2}}, {"b", NodeId{3}}, {"c", NodeId{2}}}, 0, 0}, g));
  EXPECT_EQ(same.moved, 0u);
  EXPECT_EQ(same.delay_s, 0.0);

  auto shrunk = moved.cluster;
  shrunk.remove_node(NodeId{3});
  const auto before = shrunk.deployed;
  EXPECT_THROW(apply_manifest(shrunk, generate_manifest({{{"a", NodeId{2}}, {"b", NodeId{3}}, {"c", NodeId{2}}}, 0, 0}, g)),
               Error);
  EXPECT_EQ(shrunk.deployed.size(), before.size());

  auto tight = make_cluster({1.5, 8});
  EXPECT_THROW(apply_manifest(tight, generate_manifest({{{"a", NodeId{1}}, {"b", NodeId{1}}, {"c", NodeId{2}}}, 0, 0}, g)),
               Error);
}

TEST(ClusterState, UtilizationAveragesMemoryAndCpu) {
  auto c = make_cluster({10, 10});
  c.nodes[0].cpu_util = 0.5;
  c.deployed["a"] = {NodeId{1}, 5};
  // memory (0.5 + 0) / 2, cpu (0.5 + 0) / 2
  EXPECT_DOUBLE_EQ(c.resource_utilization(), 0.25);
}
