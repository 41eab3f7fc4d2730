#include "rhem/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "rhem/error.hpp"

namespace rhem {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': bad value '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::InvalidConfig, "config key '" + key + "': expected true or false");
}

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  void field(std::string_view name, std::string_view value) {
    bytes(name);
    bytes("=");
    bytes(value);
    bytes("\n");
  }
  void file(std::string_view name, const std::string& path) {
    if (path.empty()) return field(name, "");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    field(name, ss.str());
  }
};

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string cleaned = strip_comment(raw);
    const auto line = trim(cleaned);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(line_no) + ": unterminated section");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::InvalidConfig, "config line " + std::to_string(line_no) + ": expected key = value");
    auto key = std::string(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    out[key] = std::string(value);
  }
  return out;
}

void RunConfig::apply(const std::map<std::string, std::string>& values, const std::string& base_dir) {
  auto path = [&](const std::string& v) {
    if (v.empty() || base_dir.empty() || std::filesystem::path(v).is_absolute()) return v;
    return (std::filesystem::path(base_dir) / v).lexically_normal().string();
  };
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters = {
      {"data.events", [&](auto&, auto& v) { events = path(v); }},
      {"data.attributes", [&](auto&, auto& v) { attributes = path(v); }},
      {"data.eligibility", [&](auto&, auto& v) { eligibility = path(v); }},
      {"data.exclude_loops", [&](auto& k, auto& v) { exclude_loops = parse_bool(k, v); }},
      {"history.half_life", [&](auto& k, auto& v) { half_life = parse_number<double>(k, v); }},
      {"history.max_order", [&](auto& k, auto& v) { max_order = parse_number<std::size_t>(k, v); }},
      {"history.load_state", [&](auto&, auto& v) { load_state = path(v); }},
      {"history.save_state", [&](auto&, auto& v) { save_state = path(v); }},
      {"covariates.file", [&](auto&, auto& v) { covariates = path(v); }},
      {"covariates.specs",
       [&](auto&, auto& v) {
         specs.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ';'))
           if (!trim(item).empty()) specs.emplace_back(trim(item));
       }},
      {"sampler.k", [&](auto& k, auto& v) { this->k = parse_number<std::size_t>(k, v); }},
      {"sampler.seed", [&](auto& k, auto& v) { seed = parse_number<std::uint64_t>(k, v); }},
      {"estimator.tol", [&](auto& k, auto& v) { fit.tol = parse_number<double>(k, v); }},
      {"estimator.max_iter", [&](auto& k, auto& v) { fit.max_iter = parse_number<std::size_t>(k, v); }},
      {"estimator.ridge", [&](auto& k, auto& v) { fit.ridge = parse_number<double>(k, v); }},
      {"estimator.threads", [&](auto& k, auto& v) { fit.threads = parse_number<std::size_t>(k, v); }},
      {"estimator.replications", [&](auto& k, auto& v) { replications = parse_number<std::size_t>(k, v); }},
      {"estimator.contrib", [&](auto& k, auto& v) { contrib = parse_bool(k, v); }},
      {"estimator.input", [&](auto&, auto& v) { input = path(v); }},
      {"output.out", [&](auto&, auto& v) { out = path(v); }},
      {"output.csv", [&](auto&, auto& v) { csv = path(v); }},
      {"simulate.actors", [&](auto& k, auto& v) { actors = parse_number<std::size_t>(k, v); }},
      {"simulate.events", [&](auto& k, auto& v) { sim_events = parse_number<std::size_t>(k, v); }},
      {"simulate.beta", [&](auto&, auto& v) { beta = path(v); }},
      {"simulate.size_dist", [&](auto&, auto& v) { size_dist = path(v); }},
      {"simulate.rate", [&](auto& k, auto& v) { rate = parse_number<double>(k, v); }},
      {"simulate.attributes_out", [&](auto&, auto& v) { attributes_out = path(v); }},
  };
  for (const auto& [key, value] : values) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    it->second(key, value);
  }
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  RunConfig cfg;
  cfg.apply(parse_key_values(in), std::filesystem::path(path).parent_path().string());
  return cfg;
}

std::uint64_t RunConfig::hash() const {
  Fnv f;
  f.file("events", events);
  f.file("attributes", attributes);
  f.file("eligibility", eligibility);
  f.file("load_state", load_state);
  f.file("covariates", covariates);
  for (const auto& s : specs) f.field("spec", s);
  f.field("exclude_loops", exclude_loops ? "1" : "0");
  f.field("half_life", format_number(half_life));
  f.field("max_order", std::to_string(max_order));
  f.field("k", std::to_string(k));
  f.field("seed", std::to_string(seed));
  return f.h;
}

std::string RunConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace rhem
