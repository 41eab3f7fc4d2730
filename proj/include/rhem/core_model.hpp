#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rhem {

/// Dense actor index, contiguous from 0 within an ActorTable.
using ActorId = std::uint32_t;

/// Sorted, duplicate-free list of actors.
using ActorSet = std::vector<ActorId>;

/// Bijection between actor labels and dense indices; indices are assigned in
/// insertion order.
class ActorTable {
 public:
  ActorTable() = default;
  explicit ActorTable(std::vector<std::string> labels);

  /// Returns the existing index for `label` or appends a new actor.
  ActorId intern(std::string_view label);
  std::optional<ActorId> find(std::string_view label) const;
  const std::string& label(ActorId id) const { return labels_.at(id); }
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  friend bool operator==(const ActorTable& a, const ActorTable& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, ActorId> index_;
};

enum class AttributeKind { Numeric, Categorical };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::Numeric;
  std::vector<double> values;             // numeric: per actor; categorical: category code per actor
  std::vector<std::string> categories;    // categorical only, code -> label
};

/// Time-invariant actor attributes. Every actor has a value for every column.
class AttributeTable {
 public:
  AttributeTable() = default;
  AttributeTable(ActorTable actors, std::vector<Attribute> columns);

  const ActorTable& actors() const noexcept { return actors_; }
  const std::vector<Attribute>& columns() const noexcept { return columns_; }
  bool empty() const noexcept { return columns_.empty() && actors_.size() == 0; }

  /// Throws UnknownAttribute.
  const Attribute& column(std::string_view name) const;
  std::optional<std::size_t> column_index(std::string_view name) const;

 private:
  ActorTable actors_;
  std::vector<Attribute> columns_;
};

struct Hyperevent {
  double time = 0.0;
  ActorId sender = 0;
  ActorSet receivers;      // sorted, deduplicated, nonempty
  std::size_t index = 0;   // position in the stream
};

/// How the receiver universe J_t(i) is formed for a sender.
struct RiskPolicy {
  bool exclude_loops = true;
  /// Optional per-sender eligible receiver sets; senders missing from the map
  /// fall back to "all actors".
  std::optional<std::map<ActorId, ActorSet>> eligible;

  ActorSet universe(ActorId sender, std::size_t actor_count) const;
};

struct EventStream {
  ActorTable actors;
  std::vector<Hyperevent> events;
  RiskPolicy policy;
};

using WarningSink = std::function<void(std::string_view)>;

/// Prints to stderr.
void default_warning_sink(std::string_view message);

struct EventFileOptions {
  RiskPolicy policy;
  /// When set, the actor universe is fixed and unseen labels are rejected.
  const ActorTable* actors = nullptr;
  WarningSink warn = default_warning_sink;
  /// Added to every sequence index (continuing a saved history).
  std::size_t first_index = 0;
};

EventStream parse_events(std::istream& in, const EventFileOptions& options = {});
EventStream parse_events(const std::string& path, const EventFileOptions& options = {});

/// Canonical form: shortest round-trip decimal times, receivers sorted by label.
void write_events(const EventStream& stream, std::ostream& out);

AttributeTable parse_attributes(std::istream& in);
AttributeTable parse_attributes(const std::string& path);
void write_attributes(const AttributeTable& table, std::ostream& out);

/// Reads `SENDER,R1;R2;...` lines into an explicit eligibility map.
std::map<ActorId, ActorSet> parse_eligibility(std::istream& in, const ActorTable& actors);

/// Validates the invariants of an in-memory stream (times, ids, loops).
void validate(const EventStream& stream);

struct SizeHistogram {
  std::map<std::size_t, std::size_t> counts;  // receiver-set size -> events
  std::size_t events = 0;
  double mean_receivers = 0.0;
  std::size_t max_size = 0;
};

SizeHistogram stream_stats(const EventStream& stream);

/// Two-row table of sizes 1..10 and ">10", followed by totals.
void write_size_table(const SizeHistogram& hist, std::ostream& out);

/// Shortest decimal that parses back to the same double.
std::string format_number(double value);

std::string join_labels(const ActorTable& actors, std::span<const ActorId> set, char sep = ';');

}  // namespace rhem
