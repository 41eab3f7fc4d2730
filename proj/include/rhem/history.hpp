#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <iosfwd>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "rhem/core_model.hpp"

namespace rhem {

/// Exponential decay of past-event weights with a half-life in event-time units.
class DecayConfig {
 public:
  explicit DecayConfig(double half_life = 1.0);

  double half_life() const noexcept { return half_life_; }
  double rate() const noexcept { return rate_; }
  /// w(elapsed) = exp(-elapsed * ln2 / half_life)
  double weight(double elapsed) const { return std::exp(-elapsed * rate_); }

 private:
  double half_life_;
  double rate_;
};

/// Lazily decayed sum: stores the value as of `ref_time` and rescales on access.
struct DecayedCounter {
  double value = 0.0;
  double ref_time = 0.0;

  static constexpr double kUnderflow = 1e-300;

  double value_at(double t, double rate) const {
    const double v = value * std::exp(-(t - ref_time) * rate);
    return v < kUnderflow ? 0.0 : v;
  }
  void add(double t, double rate, double amount = 1.0) {
    value = value_at(t, rate) + amount;
    ref_time = t;
  }
};

struct ActorSetHash {
  std::size_t operator()(const ActorSet& key) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ key.size();
    for (ActorId a : key) {
      h ^= a + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Decayed degree statistics of the event history E_{<t}.
///
/// Tracks, for every past event (t_m, i_m, J_m):
///   - hyperedge in-degree of each subset J' of J_m with |J'| <= max_order,
///   - sender-specific degree of each (i_m, J'),
///   - outdegree of i_m,
///   - the exact key (i_m, J_m) and the unordered key {i_m} u J_m.
/// Queries at time t >= the last advanced event return sums of
/// exp(-(t - t_m) ln2 / half_life) over matching events. "Past" is defined by
/// sequence position, so an earlier event with the same timestamp counts with
/// weight 1.
class HistoryState {
 public:
  static constexpr std::size_t kDefaultMaxOrder = 4;
  static constexpr std::size_t kLargeEventWarning = 30;

  explicit HistoryState(DecayConfig decay = DecayConfig(), std::size_t max_order = kDefaultMaxOrder,
                        WarningSink warn = {});

  const DecayConfig& decay() const noexcept { return decay_; }
  std::size_t max_order() const noexcept { return max_order_; }
  std::size_t position() const noexcept { return position_; }
  double last_time() const noexcept { return last_time_; }

  /// Requires event.index == position() and event.time >= last_time();
  /// otherwise throws OutOfOrderEvent.
  void advance(const Hyperevent& event);

  /// Number of keys enumerated by the most recent advance: one per receiver
  /// subset of size 1..max_order, plus outdegree, exact and unordered keys.
  std::size_t keys_touched_by_last_advance() const noexcept { return last_keys_; }

  /// Hyperedge in-degree. Throws OrderExceeded when |subset| > max_order.
  double hy_deg_in(std::span<const ActorId> subset, double t) const;
  /// Sender-specific hyperedge degree. Throws OrderExceeded when |subset| > max_order.
  double hy_deg(ActorId sender, std::span<const ActorId> subset, double t) const;
  double deg_out(ActorId actor, double t) const;
  /// Past events with sender i and receiver set exactly J.
  double exact_count(ActorId sender, std::span<const ActorId> receivers, double t) const;
  /// Past events whose {sender} u receivers equals {i} u J.
  double unordered_count(ActorId sender, std::span<const ActorId> receivers, double t) const;
  /// hy_deg(from, {to}).
  double dyad(ActorId from, ActorId to, double t) const;

  /// Actors that `a` has sent to, sorted.
  std::span<const ActorId> out_neighbors(ActorId a) const;
  /// Actors that have sent to `a`, sorted.
  std::span<const ActorId> in_neighbors(ActorId a) const;

  std::size_t counter_count() const noexcept;

  /// Binary dump: versioned header, actor labels, then each store as a sorted
  /// key list with (value, ref_time) little-endian doubles.
  void save(std::ostream& out, const ActorTable& actors) const;
  /// Restores a dump; `actors` receives the saved labels.
  static HistoryState load(std::istream& in, ActorTable& actors);

  friend bool operator==(const HistoryState& a, const HistoryState& b);

 private:
  using Store = std::unordered_map<ActorSet, DecayedCounter, ActorSetHash>;

  void check_time(double t) const;
  void check_order(std::size_t size) const;
  double lookup(const Store& store, const ActorSet& key, double t) const;
  void link(ActorId from, ActorId to);

  DecayConfig decay_;
  std::size_t max_order_;
  WarningSink warn_;
  std::size_t position_ = 0;
  double last_time_ = -std::numeric_limits<double>::infinity();
  std::size_t last_keys_ = 0;

  Store in_degree_;       // J'
  Store sender_degree_;   // [i, J'...]
  Store exact_;           // [i, J...]
  Store unordered_;       // sorted {i} u J
  std::vector<DecayedCounter> out_degree_;
  std::vector<ActorSet> out_neighbors_;
  std::vector<ActorSet> in_neighbors_;
};

/// Immutable view of a HistoryState; copies are cheap and safe to share
/// across threads.
class HistorySnapshot {
 public:
  explicit HistorySnapshot(const HistoryState& state)
      : state_(std::make_shared<const HistoryState>(state)) {}

  const HistoryState& state() const noexcept { return *state_; }
  const HistoryState* operator->() const noexcept { return state_.get(); }

 private:
  std::shared_ptr<const HistoryState> state_;
};

inline HistorySnapshot snapshot(const HistoryState& state) { return HistorySnapshot(state); }

}  // namespace rhem
