#pragma once

// Simulated peer-to-peer layer: XOR-metric DHT with k-buckets, peer scoring
// with online weight adaptation, utility-driven tensor caching, and a
// parametric link model for transfers.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sedma/core.hpp"

namespace sedma {

struct NodeId {
  std::uint64_t value = 0;
  auto operator<=>(const NodeId&) const = default;
};

constexpr std::uint64_t xor_distance(NodeId a, NodeId b) noexcept { return a.value ^ b.value; }

// ---------------------------------------------------------------------------
// DHT

struct LookupResult {
  std::vector<NodeId> providers;
  std::size_t hops = 0;
  NodeId terminal;
};

/// Every node holds 64 k-buckets (bucket i: peers whose highest differing
/// bit is i), each filled with up to kBucketSize peers. Provider records live
/// on the kBucketSize nodes closest to the content id.
class Dht {
public:
  static constexpr std::size_t kBucketSize = 8;

  Dht() = default;

  Dht(std::vector<NodeId> nodes, std::uint64_t seed) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw Error("Dht: at least one node required");
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!index_.emplace(nodes_[i].value, i).second)
        throw Error("Dht: duplicate node id " + std::to_string(nodes_[i].value));

    // One fixed shuffled fill order keeps table construction deterministic.
    std::vector<std::size_t> order(nodes_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(seed));
    std::shuffle(order.begin(), order.end(), rng);

    contacts_.resize(nodes_.size());
    std::array<std::uint8_t, 64> fill{};
    for (std::size_t a = 0; a < nodes_.size(); ++a) {
      fill.fill(0);
      for (std::size_t b : order) {
        if (b == a) continue;
        const auto d = xor_distance(nodes_[a], nodes_[b]);
        const int bucket = 63 - std::countl_zero(d);
        if (fill[bucket] < kBucketSize) {
          ++fill[bucket];
          contacts_[a].push_back(nodes_[b]);
        }
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  bool contains(NodeId id) const { return index_.count(id.value) != 0; }

  /// Flattened routing table of a node.
  const std::vector<NodeId>& contacts(NodeId id) const { return contacts_[index_of(id)]; }

  /// Announces `provider` for `cid` on the closest nodes to cid.
  void add_provider(std::uint64_t cid, NodeId provider) {
    index_of(provider);
    std::vector<std::size_t> idx(nodes_.size());
    std::iota(idx.begin(), idx.end(), 0);
    const NodeId key{cid};
    const std::size_t k = std::min(kBucketSize, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t x, std::size_t y) {
                        return xor_distance(nodes_[x], key) < xor_distance(nodes_[y], key);
                      });
    for (std::size_t i = 0; i < k; ++i) {
      auto& list = records_[idx[i]][cid];
      if (std::find(list.begin(), list.end(), provider) == list.end()) list.push_back(provider);
    }
  }

  /// Iterative greedy lookup: hop to the known contact closest to cid until
  /// no contact is closer than the current node.
  LookupResult find_providers(std::uint64_t cid, NodeId origin) const {
    const NodeId key{cid};
    std::size_t cur = index_of(origin);
    LookupResult res;
    while (true) {
      std::size_t best = cur;
      for (NodeId c : contacts_[cur]) {
        const std::size_t ci = index_.at(c.value);
        if (xor_distance(nodes_[ci], key) < xor_distance(nodes_[best], key)) best = ci;
      }
      if (best == cur) break;
      cur = best;
      ++res.hops;
    }
    res.terminal = nodes_[cur];

    // Neighborhood: the terminal node plus its contacts closest to cid.
    std::vector<NodeId> near = contacts_[cur];
    std::sort(near.begin(), near.end(), [&](NodeId x, NodeId y) {
      return xor_distance(x, key) < xor_distance(y, key);
    });
    if (near.size() > kBucketSize) near.resize(kBucketSize);
    near.insert(near.begin(), nodes_[cur]);
    for (NodeId n : near) {
      auto it = records_.find(index_.at(n.value));
      if (it == records_.end()) continue;
      auto rit = it->second.find(cid);
      if (rit == it->second.end()) continue;
      res.providers.insert(res.providers.end(), rit->second.begin(), rit->second.end());
    }
    std::sort(res.providers.begin(), res.providers.end());
    res.providers.erase(std::unique(res.providers.begin(), res.providers.end()),
                        res.providers.end());
    return res;
  }

private:
  std::size_t index_of(NodeId id) const {
    auto it = index_.find(id.value);
    if (it == index_.end()) throw Error("Dht: unknown node " + std::to_string(id.value));
    return it->second;
  }

  std::vector<NodeId> nodes_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::vector<NodeId>> contacts_;
  std::map<std::size_t, std::map<std::uint64_t, std::vector<NodeId>>> records_;
};

// ---------------------------------------------------------------------------
// Peer selection

struct PeerProfile {
  NodeId node;
  double availability = 1.0;  // fraction of idle cores
  double latency_ms = 1.0;
  double memory_free_gb = 0.0;

  std::array<double, 3> criteria() const { return {availability, 1.0 / latency_ms, memory_free_gb}; }

  void validate() const {
    if (!(availability >= 0.0 && availability <= 1.0))
      throw Error("PeerProfile: availability must lie in [0,1] for node " +
                  std::to_string(node.value));
    if (!(latency_ms > 0.0 && latency_ms <= 1000.0))
      throw Error("PeerProfile: latency_ms must lie in (0, 1000] for node " +
                  std::to_string(node.value));
    if (!(memory_free_gb >= 0.0))
      throw Error("PeerProfile: memory_free_gb must be nonnegative");
  }
};

struct TransferLogEntry {
  std::array<double, 3> criteria{};
  bool success = false;
};

struct SelectionWeights {
  static constexpr std::size_t kLogCapacity = 100;

  std::array<double, 3> w{1.0, 1.0, 1.0};
  double eta = 0.01;
  std::deque<TransferLogEntry> transfer_log;

  void log_transfer(const std::array<double, 3>& criteria, bool success) {
    transfer_log.push_back({criteria, success});
    if (transfer_log.size() > kLogCapacity) transfer_log.pop_front();
  }

  /// completed / attempted over the log window; 0 with no attempts.
  double success_rate() const {
    if (transfer_log.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& e : transfer_log) ok += e.success ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(transfer_log.size());
  }
};

enum class ScoreMode { raw, minmax };

inline double score_peer(const PeerProfile& p, const SelectionWeights& w) {
  if (p.latency_ms == 0.0)
    throw Error("score_peer: zero latency for node " + std::to_string(p.node.value) +
                " (self-transfers are handled before scoring)");
  p.validate();
  return w.w[0] * p.availability + w.w[1] / p.latency_ms + w.w[2] * p.memory_free_gb;
}

/// Top-k by score, ties to the smaller node id. In minmax mode each criterion
/// is rescaled to [0,1] across the candidate set before weighting.
inline std::vector<NodeId> select_peers(const std::vector<PeerProfile>& profiles,
                                        const SelectionWeights& w, std::size_t k,
                                        ScoreMode mode = ScoreMode::raw,
                                        std::uint64_t* comparisons = nullptr) {
  if (k == 0) throw Error("select_peers: k must be positive");
  if (k > profiles.size())
    throw Error("select_peers: k = " + std::to_string(k) + " exceeds " +
                std::to_string(profiles.size()) + " candidate peers");
  std::vector<double> scores(profiles.size());
  if (mode == ScoreMode::raw) {
    for (std::size_t i = 0; i < profiles.size(); ++i) scores[i] = score_peer(profiles[i], w);
  } else {
    std::array<double, 3> lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (const auto& p : profiles) {
      p.validate();
      auto c = p.criteria();
      for (int j = 0; j < 3; ++j) {
        lo[j] = std::min(lo[j], c[j]);
        hi[j] = std::max(hi[j], c[j]);
      }
    }
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      auto c = profiles[i].criteria();
      double s = 0.0;
      for (int j = 0; j < 3; ++j)
        s += w.w[j] * (hi[j] > lo[j] ? (c[j] - lo[j]) / (hi[j] - lo[j]) : 0.0);
      scores[i] = s;
    }
  }
  std::vector<std::size_t> idx(profiles.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t count = 0;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    ++count;
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return profiles[a].node < profiles[b].node;
  });
  if (comparisons) *comparisons += count;
  std::vector<NodeId> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(profiles[idx[i]].node);
  return out;
}

/// Per-criterion sensitivity of transfer success over the log: the
/// covariance between the criterion (min-max normalized over the log) and the
/// success indicator. Zero for a constant criterion.
inline std::array<double, 3> success_gradient(const std::deque<TransferLogEntry>& log) {
  std::array<double, 3> grad{};
  if (log.empty()) return grad;
  const double n = static_cast<double>(log.size());
  double s_mean = 0.0;
  for (const auto& e : log) s_mean += e.success ? 1.0 : 0.0;
  s_mean /= n;
  for (int j = 0; j < 3; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& e : log) {
      lo = std::min(lo, e.criteria[j]);
      hi = std::max(hi, e.criteria[j]);
    }
    if (!(hi > lo)) continue;
    double c_mean = 0.0;
    for (const auto& e : log) c_mean += (e.criteria[j] - lo) / (hi - lo);
    c_mean /= n;
    double cov = 0.0;
    for (const auto& e : log)
      cov += ((e.criteria[j] - lo) / (hi - lo) - c_mean) * ((e.success ? 1.0 : 0.0) - s_mean);
    grad[j] = cov / n;
  }
  return grad;
}

/// w_j += eta · grad_j, projected onto w_j ≥ 0; an all-zero result resets to 1.
inline SelectionWeights update_weights(SelectionWeights w) {
  if (w.transfer_log.empty()) return w;
  const auto grad = success_gradient(w.transfer_log);
  for (int j = 0; j < 3; ++j) w.w[j] = std::max(0.0, w.w[j] + w.eta * grad[j]);
  if (w.w[0] == 0.0 && w.w[1] == 0.0 && w.w[2] == 0.0) w.w = {1.0, 1.0, 1.0};
  return w;
}

// ---------------------------------------------------------------------------
// Caching

inline constexpr double kRecencyTau = 3600.0;

struct CacheEntry {
  std::uint64_t content_id = 0;
  double size_mb = 1.0;
  double access_count_per_hour = 0.0;
  double last_access = 0.0;
  std::vector<std::uint8_t> payload;
};

/// freq · exp(−age / tau) / size
inline double cache_utility(const CacheEntry& d, double now, double tau = kRecencyTau) {
  if (!(d.size_mb > 0.0)) throw Error("cache_utility: size_mb must be positive");
  return d.access_count_per_hour * std::exp(-(now - d.last_access) / tau) / d.size_mb;
}

enum class EvictionPolicy { utility, fifo };

class CacheStore {
public:
  explicit CacheStore(double capacity_mb, EvictionPolicy policy = EvictionPolicy::utility,
                      double tau = kRecencyTau)
      : capacity_mb_(capacity_mb), policy_(policy), tau_(tau) {
    if (!(capacity_mb > 0.0)) throw Error("CacheStore: capacity must be positive");
  }

  double capacity_mb() const noexcept { return capacity_mb_; }
  double used_mb() const noexcept { return used_mb_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<CacheEntry>& entries() const noexcept { return entries_; }

  CacheEntry* find(std::uint64_t id) {
    for (auto& e : entries_)
      if (e.content_id == id) return &e;
    return nullptr;
  }
  bool contains(std::uint64_t id) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const CacheEntry& e) { return e.content_id == id; });
  }

  /// Recomputes access_count_per_hour of every resident entry.
  template <typename FreqOf>
  void refresh_frequencies(FreqOf&& freq_of) {
    for (auto& e : entries_) e.access_count_per_hour = freq_of(e.content_id);
  }

  /// Inserts, then evicts (min utility, or oldest insertion under FIFO) until
  /// the resident size fits. The new entry itself can be the victim.
  /// Returns the ids evicted.
  std::vector<std::uint64_t> admit(CacheEntry entry, double now) {
    if (!(entry.size_mb > 0.0)) throw Error("cache_admit: size_mb must be positive");
    if (entry.size_mb > capacity_mb_)
      throw Error("cache_admit: entry of " + format_real(entry.size_mb) +
                  " MB exceeds total capacity " + format_real(capacity_mb_) + " MB");
    std::vector<std::uint64_t> evicted;
    for (std::size_t i = 0; i < entries_.size(); ++i)
      if (entries_[i].content_id == entry.content_id) {
        used_mb_ -= entries_[i].size_mb;
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    used_mb_ += entry.size_mb;
    entries_.push_back(std::move(entry));
    while (used_mb_ > capacity_mb_ + 1e-9) {
      std::size_t victim = 0;
      if (policy_ == EvictionPolicy::utility) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
          const double u = cache_utility(entries_[i], now, tau_);
          const auto& e = entries_[i];
          const auto& v = entries_[victim];
          if (u < best || (u == best && (e.last_access < v.last_access ||
                                         (e.last_access == v.last_access &&
                                          e.content_id < v.content_id)))) {
            best = u;
            victim = i;
          }
        }
      }
      used_mb_ -= entries_[victim].size_mb;
      evicted.push_back(entries_[victim].content_id);
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    if (entries_.empty()) used_mb_ = 0.0;
    return evicted;
  }

private:
  double capacity_mb_;
  EvictionPolicy policy_;
  double tau_;
  double used_mb_ = 0.0;
  std::vector<CacheEntry> entries_;  // insertion order
};

inline CacheStore cache_admit(CacheStore cache, CacheEntry entry, double now) {
  cache.admit(std::move(entry), now);
  return cache;
}

/// Zipf(s) request trace over object ids [0, objects).
inline std::vector<std::uint64_t> zipf_trace(std::size_t objects, std::size_t requests, double s,
                                             Rng& rng) {
  std::vector<double> weights(objects);
  for (std::size_t k = 0; k < objects; ++k) weights[k] = 1.0 / std::pow(double(k + 1), s);
  std::discrete_distribution<std::uint64_t> dist(weights.begin(), weights.end());
  std::vector<std::uint64_t> trace(requests);
  for (auto& r : trace) r = dist(rng);
  return trace;
}

struct CacheReplayResult {
  std::size_t hits = 0;
  std::size_t requests = 0;
  double hit_rate() const { return requests ? double(hits) / double(requests) : 0.0; }
};

/// Replays a trace against a cache. Access frequencies come from the full
/// request history (long-term counts, including non-resident objects).
inline CacheReplayResult replay_cache_trace(const std::vector<std::uint64_t>& trace,
                                            const std::vector<double>& sizes_mb,
                                            double capacity_mb, EvictionPolicy policy,
                                            double interval_s = 1.0) {
  CacheStore cache(capacity_mb, policy);
  std::unordered_map<std::uint64_t, std::uint64_t> counts;
  CacheReplayResult res;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double now = double(i) * interval_s;
    const double hours = std::max(now, interval_s) / 3600.0;
    const std::uint64_t id = trace[i];
    ++counts[id];
    ++res.requests;
    if (CacheEntry* e = cache.find(id)) {
      ++res.hits;
      e->last_access = now;
      e->access_count_per_hour = double(counts[id]) / hours;
      continue;
    }
    cache.refresh_frequencies([&](std::uint64_t cid) { return double(counts[cid]) / hours; });
    if (sizes_mb.at(id) > capacity_mb) continue;
    cache.admit(CacheEntry{id, sizes_mb.at(id), double(counts[id]) / hours, now, {}}, now);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Network

struct TransferOutcome {
  bool success = false;
  double elapsed_ms = 0.0;
  std::uint64_t bytes = 0;
};

struct LinkSpec {
  double latency_ms = 1.0;
  double bandwidth_gbps = 1.0;
  double drop_prob = 0.0;
};

/// Symmetric per-link latency, bandwidth and drop probability. Self links
/// have zero latency and infinite bandwidth.
class NetworkModel {
public:
  NetworkModel() = default;
  NetworkModel(std::vector<NodeId> nodes, std::uint64_t seed)
      : nodes_(std::move(nodes)), links_(nodes_.size() * nodes_.size()), rng_(mix_seed(seed)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (!index_.emplace(nodes_[i].value, i).second)
        throw Error("NetworkModel: duplicate node id " + std::to_string(nodes_[i].value));
      links_[i * nodes_.size() + i] = {0.0, std::numeric_limits<double>::infinity(), 0.0};
    }
    defined_.assign(links_.size(), false);
    for (std::size_t i = 0; i < nodes_.size(); ++i) defined_[i * nodes_.size() + i] = true;
  }

  const std::vector<NodeId>& nodes() const noexcept { return nodes_; }
  bool contains(NodeId id) const { return index_.count(id.value) != 0; }

  void set_link(NodeId a, NodeId b, const LinkSpec& l) {
    if (a == b) throw Error("NetworkModel: cannot set a self link");
    if (!(l.latency_ms > 0.0) || !(l.bandwidth_gbps > 0.0))
      throw Error("NetworkModel: latency and bandwidth must be positive");
    if (!(l.drop_prob >= 0.0 && l.drop_prob <= 1.0))
      throw Error("NetworkModel: drop_prob must lie in [0,1]");
    const std::size_t i = index_of(a), j = index_of(b), n = nodes_.size();
    links_[i * n + j] = links_[j * n + i] = l;
    defined_[i * n + j] = defined_[j * n + i] = true;
  }

  const LinkSpec& link(NodeId a, NodeId b) const {
    const std::size_t i = index_of(a), j = index_of(b), n = nodes_.size();
    if (!defined_[i * n + j])
      throw Error("NetworkModel: no link between " + std::to_string(a.value) + " and " +
                  std::to_string(b.value));
    return links_[i * n + j];
  }

  double latency_ms(NodeId a, NodeId b) const { return link(a, b).latency_ms; }
  double bandwidth_gbps(NodeId a, NodeId b) const { return link(a, b).bandwidth_gbps; }

  bool complete() const {
    return std::all_of(defined_.begin(), defined_.end(), [](bool d) { return d; });
  }

  Rng& rng() noexcept { return rng_; }

private:
  std::size_t index_of(NodeId id) const {
    auto it = index_.find(id.value);
    if (it == index_.end()) throw Error("NetworkModel: unknown node " + std::to_string(id.value));
    return it->second;
  }

  std::vector<NodeId> nodes_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<LinkSpec> links_;
  std::vector<bool> defined_;
  Rng rng_;
};

/// elapsed = latency + size / bandwidth (GB over Gbps, in ms); the transfer
/// fails with the link's drop probability.
inline TransferOutcome simulate_transfer(NetworkModel& net, NodeId src, NodeId dst,
                                         double size_gb) {
  if (!net.contains(src) || !net.contains(dst))
    throw Error("simulate_transfer: unknown node " +
                std::to_string((net.contains(src) ? dst : src).value));
  if (!(size_gb >= 0.0)) throw Error("simulate_transfer: size must be nonnegative");
  TransferOutcome out;
  out.bytes = static_cast<std::uint64_t>(std::llround(size_gb * 1e9));
  if (src == dst) {
    out.success = true;
    return out;
  }
  const LinkSpec& l = net.link(src, dst);
  out.elapsed_ms = l.latency_ms + size_gb / l.bandwidth_gbps * 8000.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.success = !(u(net.rng()) < l.drop_prob);
  return out;
}

// ---------------------------------------------------------------------------
// Topology file
//
//   sedma-topology/1
//   node <id> <availability> <mem_gb> [cores]
//   link <a> <b> <latency_ms> <bandwidth_gbps> <drop_prob>
//   default_link <latency_ms> <bandwidth_gbps> <drop_prob>
//
// '#' starts a comment. default_link applies to every pair not listed.

inline constexpr std::string_view kTopologyFormatTag = "sedma-topology/1";

struct TopologyNode {
  NodeId id;
  double availability = 1.0;
  double mem_gb = 8.0;
  unsigned cores = 4;
};

struct Topology {
  std::vector<TopologyNode> nodes;
  std::vector<std::pair<std::pair<NodeId, NodeId>, LinkSpec>> links;
  std::optional<LinkSpec> default_link;

  std::vector<NodeId> ids() const {
    std::vector<NodeId> out;
    for (const auto& n : nodes) out.push_back(n.id);
    return out;
  }

  NetworkModel network(std::uint64_t seed) const {
    NetworkModel net(ids(), seed);
    if (default_link)
      for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = i + 1; j < nodes.size(); ++j)
          net.set_link(nodes[i].id, nodes[j].id, *default_link);
    for (const auto& [ab, l] : links) net.set_link(ab.first, ab.second, l);
    if (!net.complete()) throw Error("topology: some node pairs have no link and no default_link");
    return net;
  }

  const TopologyNode& node(NodeId id) const {
    for (const auto& n : nodes)
      if (n.id == id) return n;
    throw Error("topology: unknown node " + std::to_string(id.value));
  }
};

inline Topology parse_topology(std::istream& in) {
  Topology t;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    if (!header) {
      if (body != kTopologyFormatTag)
        throw Error("topology: missing format header '" + std::string(kTopologyFormatTag) + "'");
      header = true;
      continue;
    }
    std::istringstream ls{std::string(body)};
    std::string kind;
    ls >> kind;
    auto fail = [&](const std::string& why) {
      return Error("topology line " + std::to_string(lineno) + ": " + why);
    };
    if (kind == "node") {
      TopologyNode n;
      if (!(ls >> n.id.value >> n.availability >> n.mem_gb)) throw fail("expected id availability mem_gb");
      if (!(ls >> n.cores)) n.cores = 4;
      if (!(n.availability >= 0 && n.availability <= 1)) throw fail("availability outside [0,1]");
      if (!(n.mem_gb > 0)) throw fail("mem_gb must be positive");
      t.nodes.push_back(n);
    } else if (kind == "link") {
      NodeId a, b;
      LinkSpec l;
      if (!(ls >> a.value >> b.value >> l.latency_ms >> l.bandwidth_gbps >> l.drop_prob))
        throw fail("expected a b latency_ms bandwidth_gbps drop_prob");
      t.links.push_back({{a, b}, l});
    } else if (kind == "default_link") {
      LinkSpec l;
      if (!(ls >> l.latency_ms >> l.bandwidth_gbps >> l.drop_prob))
        throw fail("expected latency_ms bandwidth_gbps drop_prob");
      t.default_link = l;
    } else {
      throw fail("unknown directive '" + kind + "'");
    }
  }
  if (!header) throw Error("topology: empty file");
  if (t.nodes.empty()) throw Error("topology: no nodes");
  t.network(0);  // validates links
  return t;
}

inline Topology load_topology(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("topology: cannot open '" + path + "'");
  return parse_topology(f);
}

}  // namespace sedma
