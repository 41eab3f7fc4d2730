#include "rhem/history.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "rhem/combinatorics.hpp"
#include "rhem/error.hpp"

namespace rhem {

DecayConfig::DecayConfig(double half_life) : half_life_(half_life) {
  if (!(half_life > 0.0) || !std::isfinite(half_life))
    throw Error(ErrorCode::InvalidConfig, "half-life must be positive and finite");
  rate_ = std::log(2.0) / half_life;
}

HistoryState::HistoryState(DecayConfig decay, std::size_t max_order, WarningSink warn)
    : decay_(decay), max_order_(max_order), warn_(std::move(warn)) {
  if (max_order_ == 0) throw Error(ErrorCode::InvalidConfig, "max subset order must be positive");
}

void HistoryState::check_time(double t) const {
  if (t < last_time_)
    throw Error(ErrorCode::OutOfOrderEvent, "query time precedes the last advanced event");
}

void HistoryState::check_order(std::size_t size) const {
  if (size > max_order_)
    throw Error(ErrorCode::OrderExceeded, "subset of size " + std::to_string(size) + " exceeds tracked order " +
                                              std::to_string(max_order_));
}

double HistoryState::lookup(const Store& store, const ActorSet& key, double t) const {
  const auto it = store.find(key);
  return it == store.end() ? 0.0 : it->second.value_at(t, decay_.rate());
}

void HistoryState::link(ActorId from, ActorId to) {
  const auto need = static_cast<std::size_t>(std::max(from, to)) + 1;
  if (out_neighbors_.size() < need) {
    out_neighbors_.resize(need);
    in_neighbors_.resize(need);
  }
  auto insert = [](ActorSet& set, ActorId a) {
    const auto it = std::lower_bound(set.begin(), set.end(), a);
    if (it == set.end() || *it != a) set.insert(it, a);
  };
  insert(out_neighbors_[from], to);
  insert(in_neighbors_[to], from);
}

void HistoryState::advance(const Hyperevent& event) {
  if (event.index != position_)
    throw Error(ErrorCode::OutOfOrderEvent, "event index " + std::to_string(event.index) +
                                                " does not match history position " + std::to_string(position_));
  if (event.time < last_time_)
    throw Error(ErrorCode::OutOfOrderEvent, "event " + std::to_string(event.index) + " is earlier than its predecessor");
  if (event.receivers.empty()) throw Error(ErrorCode::EmptyReceiverSet, "event " + std::to_string(event.index));
  if (!std::is_sorted(event.receivers.begin(), event.receivers.end()))
    throw Error(ErrorCode::MalformedInput, "receivers must be sorted");

  const double t = event.time;
  const double rate = decay_.rate();
  const std::span<const ActorId> receivers(event.receivers);
  if (receivers.size() > kLargeEventWarning && warn_)
    warn_("event " + std::to_string(event.index) + " has " + std::to_string(receivers.size()) +
          " receivers; subset enumeration up to order " + std::to_string(max_order_) + " is costly");

  std::size_t keys = 0;
  ActorSet subset;
  ActorSet keyed;
  const std::size_t top = std::min(max_order_, receivers.size());
  for (std::size_t p = 1; p <= top; ++p) {
    for_each_combination(receivers, p, subset, [&](const ActorSet& s) {
      in_degree_[s].add(t, rate);
      keyed.assign(1, event.sender);
      keyed.insert(keyed.end(), s.begin(), s.end());
      sender_degree_[keyed].add(t, rate);
      ++keys;
    });
  }

  if (out_degree_.size() <= event.sender) out_degree_.resize(event.sender + 1);
  out_degree_[event.sender].add(t, rate);

  keyed.assign(1, event.sender);
  keyed.insert(keyed.end(), receivers.begin(), receivers.end());
  exact_[keyed].add(t, rate);

  ActorSet all(receivers.begin(), receivers.end());
  all.insert(std::lower_bound(all.begin(), all.end(), event.sender), event.sender);
  all.erase(std::unique(all.begin(), all.end()), all.end());
  unordered_[all].add(t, rate);
  keys += 3;

  for (ActorId r : receivers) link(event.sender, r);

  last_keys_ = keys;
  last_time_ = t;
  ++position_;
}

namespace {

thread_local ActorSet scratch_key;

const ActorSet& sorted_key(std::span<const ActorId> set) {
  scratch_key.assign(set.begin(), set.end());
  std::sort(scratch_key.begin(), scratch_key.end());
  return scratch_key;
}

const ActorSet& sender_key(ActorId sender, std::span<const ActorId> set) {
  scratch_key.assign(1, sender);
  scratch_key.insert(scratch_key.end(), set.begin(), set.end());
  std::sort(scratch_key.begin() + 1, scratch_key.end());
  return scratch_key;
}

}  // namespace

double HistoryState::hy_deg_in(std::span<const ActorId> subset, double t) const {
  check_order(subset.size());
  check_time(t);
  return lookup(in_degree_, sorted_key(subset), t);
}

double HistoryState::hy_deg(ActorId sender, std::span<const ActorId> subset, double t) const {
  check_order(subset.size());
  check_time(t);
  return lookup(sender_degree_, sender_key(sender, subset), t);
}

double HistoryState::deg_out(ActorId actor, double t) const {
  check_time(t);
  if (actor >= out_degree_.size()) return 0.0;
  return out_degree_[actor].value_at(t, decay_.rate());
}

double HistoryState::exact_count(ActorId sender, std::span<const ActorId> receivers, double t) const {
  check_time(t);
  return lookup(exact_, sender_key(sender, receivers), t);
}

double HistoryState::unordered_count(ActorId sender, std::span<const ActorId> receivers, double t) const {
  check_time(t);
  auto& key = scratch_key;
  key.assign(receivers.begin(), receivers.end());
  key.push_back(sender);
  std::sort(key.begin(), key.end());
  key.erase(std::unique(key.begin(), key.end()), key.end());
  return lookup(unordered_, key, t);
}

double HistoryState::dyad(ActorId from, ActorId to, double t) const {
  check_time(t);
  auto& key = scratch_key;
  key.assign({from, to});
  return lookup(sender_degree_, key, t);
}

std::span<const ActorId> HistoryState::out_neighbors(ActorId a) const {
  if (a >= out_neighbors_.size()) return {};
  return out_neighbors_[a];
}

std::span<const ActorId> HistoryState::in_neighbors(ActorId a) const {
  if (a >= in_neighbors_.size()) return {};
  return in_neighbors_[a];
}

std::size_t HistoryState::counter_count() const noexcept {
  std::size_t n = in_degree_.size() + sender_degree_.size() + exact_.size() + unordered_.size();
  for (const auto& c : out_degree_)
    if (c.value > 0.0) ++n;
  return n;
}

bool operator==(const HistoryState& a, const HistoryState& b) {
  auto same_counter = [](const DecayedCounter& x, const DecayedCounter& y) {
    return x.value == y.value && x.ref_time == y.ref_time;
  };
  auto same_store = [&](const HistoryState::Store& x, const HistoryState::Store& y) {
    if (x.size() != y.size()) return false;
    for (const auto& [k, v] : x) {
      const auto it = y.find(k);
      if (it == y.end() || !same_counter(v, it->second)) return false;
    }
    return true;
  };
  if (a.decay_.half_life() != b.decay_.half_life() || a.max_order_ != b.max_order_ ||
      a.position_ != b.position_ || a.last_time_ != b.last_time_)
    return false;
  const auto n = std::max(a.out_degree_.size(), b.out_degree_.size());
  for (std::size_t i = 0; i < n; ++i) {
    const DecayedCounter none{};
    const auto& x = i < a.out_degree_.size() ? a.out_degree_[i] : none;
    const auto& y = i < b.out_degree_.size() ? b.out_degree_[i] : none;
    if (!same_counter(x, y)) return false;
  }
  return same_store(a.in_degree_, b.in_degree_) && same_store(a.sender_degree_, b.sender_degree_) &&
         same_store(a.exact_, b.exact_) && same_store(a.unordered_, b.unordered_);
}

// ---- binary state dump ----------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'H', 'E', 'M', 'H', 'S', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}
void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::Io, "truncated state dump");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::Io, "truncated state dump");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace

void HistoryState::save(std::ostream& out, const ActorTable& actors) const {
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(max_order_));
  put_f64(out, decay_.half_life());
  put_u64(out, position_);
  put_f64(out, last_time_);
  put_u64(out, actors.size());
  for (const auto& label : actors.labels()) {
    put_u32(out, static_cast<std::uint32_t>(label.size()));
    out.write(label.data(), static_cast<std::streamsize>(label.size()));
  }

  auto write_store = [&](const Store& store) {
    std::vector<const Store::value_type*> entries;
    entries.reserve(store.size());
    for (const auto& e : store) entries.push_back(&e);
    std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->first < b->first; });
    put_u64(out, entries.size());
    for (const auto* e : entries) {
      put_u32(out, static_cast<std::uint32_t>(e->first.size()));
      for (ActorId a : e->first) put_u32(out, a);
      put_f64(out, e->second.value);
      put_f64(out, e->second.ref_time);
    }
  };
  write_store(in_degree_);
  write_store(sender_degree_);
  write_store(exact_);
  write_store(unordered_);

  std::uint64_t senders = 0;
  for (const auto& c : out_degree_)
    if (c.value > 0.0) ++senders;
  put_u64(out, senders);
  for (ActorId a = 0; a < out_degree_.size(); ++a) {
    if (out_degree_[a].value <= 0.0) continue;
    put_u32(out, a);
    put_f64(out, out_degree_[a].value);
    put_f64(out, out_degree_[a].ref_time);
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing state dump");
}

HistoryState HistoryState::load(std::istream& in, ActorTable& actors) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw Error(ErrorCode::MalformedInput, "not a history state dump");
  const auto version = get_u32(in);
  if (version != kVersion)
    throw Error(ErrorCode::MalformedInput, "unsupported state dump version " + std::to_string(version));
  const auto max_order = get_u32(in);
  const auto half_life = get_f64(in);
  HistoryState state(DecayConfig(half_life), max_order);
  state.position_ = get_u64(in);
  state.last_time_ = get_f64(in);

  const auto n_actors = get_u64(in);
  std::vector<std::string> labels;
  labels.reserve(n_actors);
  for (std::uint64_t a = 0; a < n_actors; ++a) {
    std::string label(get_u32(in), '\0');
    if (!in.read(label.data(), static_cast<std::streamsize>(label.size())))
      throw Error(ErrorCode::Io, "truncated state dump");
    labels.push_back(std::move(label));
  }
  actors = ActorTable(std::move(labels));

  auto read_store = [&](Store& store) {
    const auto count = get_u64(in);
    store.reserve(count);
    for (std::uint64_t e = 0; e < count; ++e) {
      ActorSet key(get_u32(in));
      for (auto& a : key) {
        a = get_u32(in);
        if (a >= n_actors) throw Error(ErrorCode::MalformedInput, "state dump references unknown actor");
      }
      DecayedCounter c;
      c.value = get_f64(in);
      c.ref_time = get_f64(in);
      store.emplace(std::move(key), c);
    }
  };
  read_store(state.in_degree_);
  read_store(state.sender_degree_);
  read_store(state.exact_);
  read_store(state.unordered_);

  const auto senders = get_u64(in);
  for (std::uint64_t s = 0; s < senders; ++s) {
    const auto a = get_u32(in);
    if (a >= n_actors) throw Error(ErrorCode::MalformedInput, "state dump references unknown actor");
    if (state.out_degree_.size() <= a) state.out_degree_.resize(a + 1);
    state.out_degree_[a].value = get_f64(in);
    state.out_degree_[a].ref_time = get_f64(in);
  }
  for (const auto& [key, counter] : state.sender_degree_)
    if (key.size() == 2) state.link(key[0], key[1]);
  return state;
}

}  // namespace rhem
