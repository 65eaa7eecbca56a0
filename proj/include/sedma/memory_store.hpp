#pragma once

// Dual memory shared by the three layers: a bounded long-term store of
// pattern records (LRU-evicted) and a bounded short-term observation window.

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <variant>

#include "sedma/core.hpp"

namespace sedma {

inline constexpr std::size_t kLtmCapacity = 10000;
inline constexpr std::size_t kStmCapacity = 100;
inline constexpr double kLambdaMin = 1e-14;
inline constexpr double kLambdaMax = 1e-2;
/// Regularization used when no learned value exists.
inline constexpr double kDefaultLambda = 1e-12;
inline constexpr double kScoreEmaFactor = 0.2;
inline constexpr std::string_view kLtmFormatTag = "sedma-ltm/1";

enum class Sparsity { dense, medium, sparse };

inline std::string_view to_string(Sparsity s) {
  switch (s) {
    case Sparsity::dense: return "dense";
    case Sparsity::medium: return "medium";
    case Sparsity::sparse: return "sparse";
  }
  return "?";
}

/// Bucketed matrix signature used to key learned patterns.
struct WorkloadClass {
  /// ceil(log2(max(m, n)))
  int size_exp = 0;
  Sparsity sparsity = Sparsity::dense;
  /// floor(log10(max |a_ij|)); kZeroMagnitude for the all-zero matrix.
  int magnitude_exp = 0;

  static constexpr int kZeroMagnitude = -999;

  std::string key() const {
    return "s" + std::to_string(size_exp) + "-" + std::string(to_string(sparsity)) + "-m" +
           std::to_string(magnitude_exp);
  }
  bool operator==(const WorkloadClass&) const = default;
};

struct PartitionStrategy {
  std::size_t block = 0;
  bool operator==(const PartitionStrategy&) const = default;
};

struct LambdaValue {
  double lambda = kDefaultLambda;
  bool operator==(const LambdaValue&) const = default;
};

struct PeerAggregate {
  double availability = 0.0;
  double latency_ms = 0.0;
  double memory_free_gb = 0.0;
  double success_rate = 0.0;
  std::uint64_t transfers = 0;
  bool operator==(const PeerAggregate&) const = default;
};

struct PlacementPattern {
  /// Throughput observed under this placement (ops/s).
  double perf_ops = 0.0;
  std::map<std::string, std::uint64_t> assign;
  bool operator==(const PlacementPattern&) const = default;
};

using Payload = std::variant<PartitionStrategy, LambdaValue, PeerAggregate, PlacementPattern>;

inline std::string_view payload_kind(const Payload& p) {
  static constexpr std::string_view names[] = {"partition", "lambda", "peer", "placement"};
  return names[p.index()];
}

struct LtmRecord {
  Payload payload = LambdaValue{};
  double success_score = 0.0;
  double last_used = 0.0;
  std::uint64_t use_count = 0;
  bool operator==(const LtmRecord&) const = default;
};

enum class ObservationKind { residual, lambda, peer_load, request_rate, utilization, transfer };

struct Observation {
  double t = 0.0;
  ObservationKind kind = ObservationKind::residual;
  std::uint64_t subject = 0;
  double value = 0.0;
};

/// Time-ordered ring of recent observations; oldest evicted past capacity.
class StmWindow {
public:
  explicit StmWindow(std::size_t capacity = kStmCapacity) : capacity_(capacity) {
    if (capacity == 0) throw Error("StmWindow: capacity must be positive");
  }

  void push(const Observation& obs) {
    if (!entries_.empty() && obs.t < entries_.back().t)
      throw Error("record_observation: timestamp " + format_real(obs.t) +
                  " precedes latest stored " + format_real(entries_.back().t));
    entries_.push_back(obs);
    if (entries_.size() > capacity_) entries_.pop_front();
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return entries_.empty(); }
  const std::deque<Observation>& entries() const noexcept { return entries_; }

  /// Most recent observation of a kind, if any.
  std::optional<Observation> latest(ObservationKind kind) const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      if (it->kind == kind) return *it;
    return std::nullopt;
  }

private:
  std::size_t capacity_;
  std::deque<Observation> entries_;
};

namespace ltm_key {
inline std::string partition(const WorkloadClass& c) { return "partition:" + c.key(); }
inline std::string lambda(const WorkloadClass& c) { return "lambda:" + c.key(); }
inline std::string placement(const std::string& workload) { return "placement:" + workload; }
inline std::string peer(std::uint64_t id) { return "peer:" + std::to_string(id); }
}  // namespace ltm_key

struct MemoryConfig {
  std::size_t ltm_capacity = kLtmCapacity;
  std::size_t stm_capacity = kStmCapacity;
  double alpha = 0.7;
};

/// Single-writer contract: any mutating member (including get_pattern, which
/// refreshes recency) must be serialized by the caller. peek() and the const
/// accessors are safe for concurrent readers.
class MemoryStore {
public:
  explicit MemoryStore(MemoryConfig cfg = {}) : cfg_(cfg), stm_(cfg.stm_capacity) {
    if (cfg.ltm_capacity == 0) throw Error("MemoryStore: ltm capacity must be positive");
    set_alpha(cfg.alpha);
  }

  const MemoryConfig& config() const noexcept { return cfg_; }
  double alpha() const noexcept { return cfg_.alpha; }
  void set_alpha(double a) {
    if (!(a >= 0.0 && a <= 1.0)) throw Error("MemoryStore: alpha must lie in [0,1]");
    cfg_.alpha = a;
  }

  /// Event time used to stamp record access.
  void set_time(double now_s) { now_ = now_s; }
  double time() const noexcept { return now_; }

  std::size_t ltm_size() const noexcept { return ltm_.size(); }
  const StmWindow& stm() const noexcept { return stm_; }
  std::uint64_t clip_warnings() const noexcept { return clip_warnings_; }

  void put_pattern(const std::string& key, LtmRecord record) {
    validate(key, record);
    auto it = ltm_.find(key);
    if (it != ltm_.end()) {
      LtmRecord& cur = it->second;
      cur.success_score =
          cur.success_score * (1.0 - kScoreEmaFactor) + record.success_score * kScoreEmaFactor;
      cur.payload = std::move(record.payload);
      touch(key, cur);
      return;
    }
    if (ltm_.size() >= cfg_.ltm_capacity) evict_lru();
    auto [pos, _] = ltm_.emplace(key, std::move(record));
    pos->second.last_used = next_stamp();
    lru_.emplace(pos->second.last_used, key);
  }

  /// Returns the record (refreshing recency and use_count) or nullopt.
  std::optional<LtmRecord> get_pattern(const std::string& key) {
    auto it = ltm_.find(key);
    if (it == ltm_.end()) return std::nullopt;
    it->second.use_count += 1;
    touch(key, it->second);
    return it->second;
  }

  const LtmRecord* peek(const std::string& key) const {
    auto it = ltm_.find(key);
    return it == ltm_.end() ? nullptr : &it->second;
  }

  bool contains(const std::string& key) const { return ltm_.count(key) != 0; }

  /// Key of the record the next insertion at capacity would evict.
  std::optional<std::string> lru_key() const {
    if (lru_.empty()) return std::nullopt;
    return lru_.begin()->second;
  }

  void record_observation(const Observation& obs) { stm_.push(obs); }

  /// alpha * lambda_memory + (1 - alpha) * lambda_recent. lambda_recent is
  /// clipped into [kLambdaMin, kLambdaMax]; each clip bumps clip_warnings().
  double blend_lambda(double lambda_recent, const WorkloadClass& cls) {
    double recent = clip_lambda(lambda_recent);
    double memory = kDefaultLambda;
    if (auto rec = get_pattern(ltm_key::lambda(cls)))
      if (auto* lv = std::get_if<LambdaValue>(&rec->payload)) memory = lv->lambda;
    return cfg_.alpha * memory + (1.0 - cfg_.alpha) * recent;
  }

  double clip_lambda(double lambda) {
    if (std::isnan(lambda) || lambda < kLambdaMin) {
      ++clip_warnings_;
      return kLambdaMin;
    }
    if (lambda > kLambdaMax) {
      ++clip_warnings_;
      return kLambdaMax;
    }
    return lambda;
  }

  // Persistence: header line, then one tab-separated record per line in key
  // order. Only long-term memory is persisted.

  void persist(std::ostream& out) const {
    out << kLtmFormatTag << '\n';
    for (const auto& [key, rec] : ltm_) {
      out << key << '\t' << payload_kind(rec.payload) << '\t' << encode_payload(rec.payload)
          << '\t' << format_real17(rec.success_score) << '\t' << format_real17(rec.last_used)
          << '\t' << rec.use_count << '\n';
    }
  }

  void persist(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("persist: cannot open '" + path + "' for writing");
    persist(f);
  }

  static MemoryStore load(std::istream& in, MemoryConfig cfg = {}) {
    MemoryStore store(cfg);
    std::string line;
    if (!std::getline(in, line) || line != kLtmFormatTag)
      throw Error("load: missing format header '" + std::string(kLtmFormatTag) + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split(line, '\t');
      if (f.size() != 6)
        throw Error("load: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                    " fields, expected 6");
      LtmRecord rec;
      rec.payload = decode_payload(f[1], f[2]);
      rec.success_score = parse_real(f[3]);
      rec.last_used = parse_real(f[4]);
      rec.use_count = parse_int<std::uint64_t>(f[5]);
      std::string key(f[0]);
      validate(key, rec);
      if (store.ltm_.size() >= store.cfg_.ltm_capacity)
        throw Error("load: record count exceeds capacity");
      store.lru_.emplace(rec.last_used, key);
      if (!store.last_stamp_ || rec.last_used > *store.last_stamp_) store.last_stamp_ = rec.last_used;
      store.ltm_.emplace(std::move(key), std::move(rec));
    }
    if (store.last_stamp_) store.now_ = *store.last_stamp_;
    return store;
  }

  static MemoryStore load(const std::string& path, MemoryConfig cfg = {}) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("load: cannot open '" + path + "'");
    return load(f, cfg);
  }

  const std::map<std::string, LtmRecord>& records() const noexcept { return ltm_; }

private:
  static void validate(const std::string& key, const LtmRecord& r) {
    if (key.empty() || key.find_first_of("\t\n\r") != std::string::npos)
      throw Error("put_pattern: key must be non-empty and free of tabs/newlines");
    if (!(r.success_score >= 0.0 && r.success_score <= 1.0))
      throw Error("put_pattern: success_score " + format_real(r.success_score) +
                  " outside [0,1] for key '" + key + "'");
    if (auto* lv = std::get_if<LambdaValue>(&r.payload))
      if (!(lv->lambda >= kLambdaMin && lv->lambda <= kLambdaMax))
        throw Error("put_pattern: lambda payload " + format_real(lv->lambda) +
                    " outside [1e-14, 1e-2] for key '" + key + "'");
  }

  /// Strictly increasing access stamp: event time, nudged by one ulp when
  /// several accesses share a timestamp so LRU order stays total.
  double next_stamp() {
    double s = now_;
    if (last_stamp_ && s <= *last_stamp_)
      s = std::nextafter(*last_stamp_, std::numeric_limits<double>::infinity());
    last_stamp_ = s;
    return s;
  }

  void touch(const std::string& key, LtmRecord& rec) {
    lru_.erase({rec.last_used, key});
    rec.last_used = next_stamp();
    lru_.emplace(rec.last_used, key);
  }

  void evict_lru() {
    auto victim = lru_.begin();
    ltm_.erase(victim->second);
    lru_.erase(victim);
  }

  static std::string encode_payload(const Payload& p) {
    struct Visitor {
      std::string operator()(const PartitionStrategy& s) const { return std::to_string(s.block); }
      std::string operator()(const LambdaValue& l) const { return format_real17(l.lambda); }
      std::string operator()(const PeerAggregate& a) const {
        return format_real17(a.availability) + "," + format_real17(a.latency_ms) + "," +
               format_real17(a.memory_free_gb) + "," + format_real17(a.success_rate) + "," +
               std::to_string(a.transfers);
      }
      std::string operator()(const PlacementPattern& pl) const {
        std::string s = format_real17(pl.perf_ops) + ";";
        bool first = true;
        for (const auto& [agent, node] : pl.assign) {
          if (!first) s += ",";
          first = false;
          s += agent + "=" + std::to_string(node);
        }
        return s;
      }
    };
    return std::visit(Visitor{}, p);
  }

  static Payload decode_payload(std::string_view kind, std::string_view text) {
    if (kind == "partition") return PartitionStrategy{parse_int<std::size_t>(text)};
    if (kind == "lambda") return LambdaValue{parse_real(text)};
    if (kind == "peer") {
      auto f = split(text, ',');
      if (f.size() != 5) throw Error("load: malformed peer payload '" + std::string(text) + "'");
      return PeerAggregate{parse_real(f[0]), parse_real(f[1]), parse_real(f[2]), parse_real(f[3]),
                           parse_int<std::uint64_t>(f[4])};
    }
    if (kind == "placement") {
      auto semi = text.find(';');
      if (semi == std::string_view::npos)
        throw Error("load: malformed placement payload '" + std::string(text) + "'");
      PlacementPattern pl;
      pl.perf_ops = parse_real(text.substr(0, semi));
      auto rest = text.substr(semi + 1);
      if (!rest.empty()) {
        for (auto item : split(rest, ',')) {
          auto eq = item.find('=');
          if (eq == std::string_view::npos)
            throw Error("load: malformed placement entry '" + std::string(item) + "'");
          pl.assign.emplace(std::string(item.substr(0, eq)),
                            parse_int<std::uint64_t>(item.substr(eq + 1)));
        }
      }
      return pl;
    }
    throw Error("load: unknown payload kind '" + std::string(kind) + "'");
  }

  MemoryConfig cfg_;
  std::map<std::string, LtmRecord> ltm_;
  std::set<std::pair<double, std::string>> lru_;
  StmWindow stm_;
  double now_ = 0.0;
  std::optional<double> last_stamp_;
  std::uint64_t clip_warnings_ = 0;
};

}  // namespace sedma
