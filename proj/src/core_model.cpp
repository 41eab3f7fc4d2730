#include "rhem/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "rhem/error.hpp"

namespace rhem {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

bool getline_lf(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no); }

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return in;
}

}  // namespace

ActorTable::ActorTable(std::vector<std::string> labels) {
  for (auto& l : labels) {
    if (index_.count(l)) throw Error(ErrorCode::DuplicateActor, "actor '" + l + "' listed twice");
    intern(l);
  }
}

ActorId ActorTable::intern(std::string_view label) {
  std::string key(label);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<ActorId>(labels_.size());
  labels_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<ActorId> ActorTable::find(std::string_view label) const {
  if (auto it = index_.find(std::string(label)); it != index_.end()) return it->second;
  return std::nullopt;
}

AttributeTable::AttributeTable(ActorTable actors, std::vector<Attribute> columns)
    : actors_(std::move(actors)), columns_(std::move(columns)) {
  for (const auto& c : columns_) {
    if (c.values.size() != actors_.size())
      throw Error(ErrorCode::MissingValue, "attribute '" + c.name + "' does not cover every actor");
  }
}

const Attribute& AttributeTable::column(std::string_view name) const {
  if (auto idx = column_index(name)) return columns_[*idx];
  throw Error(ErrorCode::UnknownAttribute, "no attribute named '" + std::string(name) + "'");
}

std::optional<std::size_t> AttributeTable::column_index(std::string_view name) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c].name == name) return c;
  return std::nullopt;
}

ActorSet RiskPolicy::universe(ActorId sender, std::size_t actor_count) const {
  ActorSet out;
  if (eligible) {
    if (auto it = eligible->find(sender); it != eligible->end()) {
      for (ActorId a : it->second)
        if (!(exclude_loops && a == sender)) out.push_back(a);
      return out;
    }
  }
  out.reserve(actor_count);
  for (ActorId a = 0; a < actor_count; ++a)
    if (!(exclude_loops && a == sender)) out.push_back(a);
  return out;
}

void default_warning_sink(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

EventStream parse_events(std::istream& in, const EventFileOptions& options) {
  EventStream stream;
  stream.policy = options.policy;
  if (options.actors) stream.actors = *options.actors;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  double last_time = -std::numeric_limits<double>::infinity();

  while (getline_lf(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (line[0] == '#') continue;  // metadata comment
    if (!header_seen) {
      const auto fields = split(line, ',');
      if (fields.size() != 3 || upper(trim(fields[0])) != "TIME" || upper(trim(fields[1])) != "SENDER" ||
          upper(trim(fields[2])) != "RECEIVERS")
        throw Error(ErrorCode::MalformedInput, where(line_no) + ": expected header TIME,SENDER,RECEIVERS");
      header_seen = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 3)
      throw Error(ErrorCode::MalformedInput, where(line_no) + ": expected 3 fields, got " +
                                                 std::to_string(fields.size()));
    const auto time = parse_double(fields[0]);
    if (!time || *time < 0.0)
      throw Error(ErrorCode::MalformedInput, where(line_no) + ": bad time '" + std::string(fields[0]) + "'");
    if (*time < last_time)
      throw Error(ErrorCode::DecreasingTime, where(line_no) + ": time " + std::string(trim(fields[0])) +
                                                 " precedes the previous event");
    last_time = *time;

    auto resolve = [&](std::string_view label) -> ActorId {
      label = trim(label);
      if (label.empty()) throw Error(ErrorCode::MalformedInput, where(line_no) + ": empty actor label");
      if (options.actors) {
        if (auto id = stream.actors.find(label)) return *id;
        throw Error(ErrorCode::UnknownActor, where(line_no) + ": unknown actor '" + std::string(label) + "'");
      }
      return stream.actors.intern(label);
    };

    Hyperevent ev;
    ev.time = *time;
    ev.sender = resolve(fields[1]);
    ev.index = options.first_index + stream.events.size();
    if (trim(fields[2]).empty()) throw Error(ErrorCode::EmptyReceiverSet, where(line_no));
    for (auto label : split(fields[2], ';')) {
      if (trim(label).empty()) continue;
      ev.receivers.push_back(resolve(label));
    }
    if (ev.receivers.empty()) throw Error(ErrorCode::EmptyReceiverSet, where(line_no));
    std::sort(ev.receivers.begin(), ev.receivers.end());
    const auto before = ev.receivers.size();
    ev.receivers.erase(std::unique(ev.receivers.begin(), ev.receivers.end()), ev.receivers.end());
    if (ev.receivers.size() != before && options.warn)
      options.warn(where(line_no) + ": duplicate receivers removed");
    if (options.policy.exclude_loops &&
        std::binary_search(ev.receivers.begin(), ev.receivers.end(), ev.sender))
      throw Error(ErrorCode::SelfLoop, where(line_no) + ": sender '" + stream.actors.label(ev.sender) +
                                           "' is among its receivers");
    stream.events.push_back(std::move(ev));
  }
  if (!header_seen) throw Error(ErrorCode::MalformedInput, "missing header TIME,SENDER,RECEIVERS");
  return stream;
}

EventStream parse_events(const std::string& path, const EventFileOptions& options) {
  auto in = open_input(path);
  return parse_events(in, options);
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string join_labels(const ActorTable& actors, std::span<const ActorId> set, char sep) {
  std::vector<std::string_view> labels;
  labels.reserve(set.size());
  for (ActorId a : set) labels.push_back(actors.label(a));
  std::sort(labels.begin(), labels.end());
  std::string out;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (k) out += sep;
    out += labels[k];
  }
  return out;
}

void write_events(const EventStream& stream, std::ostream& out) {
  out << "TIME,SENDER,RECEIVERS\n";
  for (const auto& ev : stream.events)
    out << format_number(ev.time) << ',' << stream.actors.label(ev.sender) << ','
        << join_labels(stream.actors, ev.receivers) << '\n';
}

AttributeTable parse_attributes(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<Attribute> columns;
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> raw;  // per column, per actor
  bool header_seen = false;

  while (getline_lf(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!header_seen && line[0] == '#') continue;
    const auto fields = split(line, ',');
    if (!header_seen) {
      if (upper(trim(fields[0])) != "ACTOR")
        throw Error(ErrorCode::MalformedInput, where(line_no) + ": header must start with ACTOR");
      for (std::size_t c = 1; c < fields.size(); ++c) {
        const auto decl = trim(fields[c]);
        const auto colon = decl.rfind(':');
        if (colon == std::string_view::npos)
          throw Error(ErrorCode::UnknownKind, where(line_no) + ": column '" + std::string(decl) +
                                                  "' lacks a :num or :cat kind");
        Attribute attr;
        attr.name = std::string(trim(decl.substr(0, colon)));
        const auto kind = trim(decl.substr(colon + 1));
        if (kind == "num") attr.kind = AttributeKind::Numeric;
        else if (kind == "cat") attr.kind = AttributeKind::Categorical;
        else throw Error(ErrorCode::UnknownKind, where(line_no) + ": kind '" + std::string(kind) + "'");
        if (attr.name.empty()) throw Error(ErrorCode::MalformedInput, where(line_no) + ": empty attribute name");
        for (const auto& other : columns)
          if (other.name == attr.name)
            throw Error(ErrorCode::MalformedInput, where(line_no) + ": attribute '" + attr.name + "' declared twice");
        columns.push_back(std::move(attr));
      }
      raw.resize(columns.size());
      header_seen = true;
      continue;
    }
    if (fields.size() != columns.size() + 1)
      throw Error(ErrorCode::MissingValue, where(line_no) + ": expected " + std::to_string(columns.size() + 1) +
                                               " fields, got " + std::to_string(fields.size()));
    labels.emplace_back(trim(fields[0]));
    if (labels.back().empty()) throw Error(ErrorCode::MalformedInput, where(line_no) + ": empty actor label");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto value = trim(fields[c + 1]);
      if (value.empty())
        throw Error(ErrorCode::MissingValue, where(line_no) + ": no value for '" + columns[c].name + "'");
      raw[c].emplace_back(value);
    }
  }

  ActorTable actors(labels);  // throws DuplicateActor
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto& attr = columns[c];
    attr.values.reserve(labels.size());
    for (std::size_t a = 0; a < labels.size(); ++a) {
      const auto& token = raw[c][a];
      if (attr.kind == AttributeKind::Numeric) {
        auto v = parse_double(token);
        if (!v) {
          const auto u = upper(token);
          if (u == "TRUE" || u == "YES") v = 1.0;
          else if (u == "FALSE" || u == "NO") v = 0.0;
          else
            throw Error(ErrorCode::MalformedInput,
                        "actor '" + labels[a] + "': '" + token + "' is not numeric for '" + attr.name + "'");
        }
        attr.values.push_back(*v);
      } else {
        auto it = std::find(attr.categories.begin(), attr.categories.end(), token);
        if (it == attr.categories.end()) {
          attr.categories.push_back(token);
          it = attr.categories.end() - 1;
        }
        attr.values.push_back(static_cast<double>(it - attr.categories.begin()));
      }
    }
  }
  return AttributeTable(std::move(actors), std::move(columns));
}

AttributeTable parse_attributes(const std::string& path) {
  auto in = open_input(path);
  return parse_attributes(in);
}

void write_attributes(const AttributeTable& table, std::ostream& out) {
  out << "ACTOR";
  for (const auto& c : table.columns())
    out << ',' << c.name << ':' << (c.kind == AttributeKind::Numeric ? "num" : "cat");
  out << '\n';
  for (ActorId a = 0; a < table.actors().size(); ++a) {
    out << table.actors().label(a);
    for (const auto& c : table.columns()) {
      out << ',';
      if (c.kind == AttributeKind::Numeric) out << format_number(c.values[a]);
      else out << c.categories[static_cast<std::size_t>(c.values[a])];
    }
    out << '\n';
  }
}

std::map<ActorId, ActorSet> parse_eligibility(std::istream& in, const ActorTable& actors) {
  std::map<ActorId, ActorSet> out;
  std::string line;
  std::size_t line_no = 0;
  auto resolve = [&](std::string_view label) {
    if (auto id = actors.find(trim(label))) return *id;
    throw Error(ErrorCode::UnknownActor, where(line_no) + ": unknown actor '" + std::string(trim(label)) + "'");
  };
  while (getline_lf(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2) throw Error(ErrorCode::MalformedInput, where(line_no) + ": expected SENDER,RECEIVERS");
    if (line_no == 1 && upper(trim(fields[0])) == "SENDER") continue;
    auto& set = out[resolve(fields[0])];
    for (auto label : split(fields[1], ';'))
      if (!trim(label).empty()) set.push_back(resolve(label));
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  return out;
}

void validate(const EventStream& stream) {
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < stream.events.size(); ++m) {
    const auto& ev = stream.events[m];
    const auto tag = "event " + std::to_string(m);
    if (!std::isfinite(ev.time) || ev.time < 0.0) throw Error(ErrorCode::MalformedInput, tag + ": bad time");
    if (ev.time < last) throw Error(ErrorCode::DecreasingTime, tag);
    last = ev.time;
    if (m > 0 && ev.index <= stream.events[m - 1].index)
      throw Error(ErrorCode::OutOfOrderEvent, tag + ": sequence indices must increase");
    if (ev.receivers.empty()) throw Error(ErrorCode::EmptyReceiverSet, tag);
    if (ev.sender >= stream.actors.size()) throw Error(ErrorCode::UnknownActor, tag + ": sender");
    for (std::size_t r = 0; r < ev.receivers.size(); ++r) {
      if (ev.receivers[r] >= stream.actors.size()) throw Error(ErrorCode::UnknownActor, tag + ": receiver");
      if (r > 0 && ev.receivers[r] <= ev.receivers[r - 1])
        throw Error(ErrorCode::MalformedInput, tag + ": receivers must be sorted and distinct");
    }
    if (stream.policy.exclude_loops &&
        std::binary_search(ev.receivers.begin(), ev.receivers.end(), ev.sender))
      throw Error(ErrorCode::SelfLoop, tag);
  }
}

SizeHistogram stream_stats(const EventStream& stream) {
  if (stream.events.empty()) throw Error(ErrorCode::EmptyStream, "stream has no events");
  SizeHistogram hist;
  std::size_t total = 0;
  for (const auto& ev : stream.events) {
    ++hist.counts[ev.receivers.size()];
    total += ev.receivers.size();
    hist.max_size = std::max(hist.max_size, ev.receivers.size());
  }
  hist.events = stream.events.size();
  hist.mean_receivers = static_cast<double>(total) / static_cast<double>(hist.events);
  return hist;
}

void write_size_table(const SizeHistogram& hist, std::ostream& out) {
  std::vector<std::string> head{"|J|"}, freq{"frequency:"};
  std::size_t above = 0;
  for (const auto& [size, count] : hist.counts)
    if (size > 10) above += count;
  for (std::size_t s = 1; s <= 10; ++s) {
    head.push_back(std::to_string(s));
    const auto it = hist.counts.find(s);
    freq.push_back(std::to_string(it == hist.counts.end() ? 0 : it->second));
  }
  head.emplace_back(">10");
  freq.push_back(std::to_string(above));
  for (std::size_t c = 0; c < head.size(); ++c) {
    const auto width = std::max(head[c].size(), freq[c].size()) + (c ? 2 : 0);
    out << (c ? std::right : std::left) << std::setw(static_cast<int>(width)) << head[c];
  }
  out << '\n';
  for (std::size_t c = 0; c < head.size(); ++c) {
    const auto width = std::max(head[c].size(), freq[c].size()) + (c ? 2 : 0);
    out << (c ? std::right : std::left) << std::setw(static_cast<int>(width)) << freq[c];
  }
  out << '\n';
  std::ostringstream mean;
  mean << std::fixed << std::setprecision(2) << hist.mean_receivers;
  out << "events: " << hist.events << "\nmean receivers: " << mean.str() << "\nmax receivers: " << hist.max_size
      << '\n';
  std::size_t multi = 0;
  for (const auto& [size, count] : hist.counts)
    if (size > 1) multi += count;
  std::ostringstream share;
  share << std::fixed << std::setprecision(1) << 100.0 * static_cast<double>(multi) / static_cast<double>(hist.events);
  out << "events with more than one receiver: " << multi << " (" << share.str() << "%)\n";
}

}  // namespace rhem
