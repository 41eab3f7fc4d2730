#include "rhem/generator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <set>

#include "rhem/combinatorics.hpp"
#include "rhem/error.hpp"

namespace rhem {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text, std::size_t line_no) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": bad number '" + std::string(text) + "'");
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// index drawn proportionally to exp(eta)
std::size_t draw_softmax(const std::vector<double>& eta, Rng& rng) {
  const double m = *std::max_element(eta.begin(), eta.end());
  std::vector<double> cdf(eta.size());
  double total = 0.0;
  for (std::size_t r = 0; r < eta.size(); ++r) {
    total += std::exp(eta[r] - m);
    cdf[r] = total;
  }
  const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), eta.size() - 1);
}

}  // namespace

ActorTable synthetic_actors(std::size_t count) {
  const std::size_t width = std::to_string(count ? count - 1 : 0).size();
  std::vector<std::string> labels;
  labels.reserve(count);
  for (std::size_t a = 0; a < count; ++a) {
    std::string digits = std::to_string(a);
    labels.push_back("a" + std::string(width - digits.size(), '0') + digits);
  }
  return ActorTable(std::move(labels));
}

AttributeTable complete_attributes(const ActorTable& actors, const std::vector<CovariateSpec>& specs,
                                   const std::optional<AttributeTable>& base, Rng& rng) {
  std::vector<Attribute> columns;
  if (base) {
    if (!(base->actors() == actors))
      throw Error(ErrorCode::InvalidConfig, "attribute table actors differ from the simulated actors");
    columns = base->columns();
  }
  std::bernoulli_distribution coin(0.5);
  for (const auto& s : specs) {
    if (!is_attribute_kind(s.kind)) continue;
    const bool present = std::any_of(columns.begin(), columns.end(), [&](const Attribute& a) { return a.name == s.attribute; });
    if (present) continue;
    Attribute a;
    a.name = s.attribute;
    a.kind = AttributeKind::Numeric;
    a.values.resize(actors.size());
    for (auto& v : a.values) v = coin(rng) ? 1.0 : 0.0;
    columns.push_back(std::move(a));
  }
  return AttributeTable(actors, std::move(columns));
}

ActorSet draw_receivers(ActorId sender, std::size_t size, double t, const ActorSet& universe,
                        const CovariateModel& model, const std::vector<double>& beta, const HistoryState& hist,
                        const GeneratorConfig& cfg, Rng& rng) {
  if (size < 1 || size > universe.size())
    throw Error(ErrorCode::InfeasibleSize, "receiver-set size " + std::to_string(size) + " with " +
                                               std::to_string(universe.size()) + " eligible receivers");
  std::vector<ActorSet> candidates;
  std::vector<double> eta;
  std::vector<double> x(model.size());
  const auto total = binomial_saturating(universe.size(), size);
  if (total <= cfg.enumeration_limit) {
    ActorSet scratch;
    for_each_combination(std::span<const ActorId>(universe), size, scratch, [&](const ActorSet& c) {
      model.evaluate(sender, c, t, hist, x);
      eta.push_back(dot(beta, x));
      candidates.push_back(c);
    });
  } else {
    // sampling-importance-resampling with a uniform proposal
    for (std::size_t d = 0; d < cfg.importance_draws; ++d) {
      ActorSet c = uniform_subset(universe, size, rng);
      model.evaluate(sender, c, t, hist, x);
      eta.push_back(dot(beta, x));
      candidates.push_back(std::move(c));
    }
  }
  return candidates[draw_softmax(eta, rng)];
}

SimulatedData simulate(const GeneratorConfig& cfg) {
  if (cfg.actors < 2) throw Error(ErrorCode::InfeasibleSize, "need at least 2 actors");
  if (cfg.beta.size() != cfg.specs.size())
    throw Error(ErrorCode::DimensionMismatch, std::to_string(cfg.beta.size()) + " coefficients for " +
                                                  std::to_string(cfg.specs.size()) + " covariates");
  if (!(cfg.rate > 0.0) || !std::isfinite(cfg.rate)) throw Error(ErrorCode::InvalidConfig, "event rate must be positive");
  if (cfg.size_distribution.empty()) throw Error(ErrorCode::InvalidConfig, "empty receiver-size distribution");
  double mass = 0.0;
  std::vector<std::size_t> sizes;
  std::vector<double> probs;
  for (const auto& [size, p] : cfg.size_distribution) {
    if (size < 1 || size >= cfg.actors)
      throw Error(ErrorCode::InfeasibleSize, "receiver-set size " + std::to_string(size) + " impossible with " +
                                                 std::to_string(cfg.actors) + " actors");
    if (!(p >= 0.0)) throw Error(ErrorCode::InvalidConfig, "negative size probability");
    mass += p;
    sizes.push_back(size);
    probs.push_back(p);
  }
  if (std::abs(mass - 1.0) > 1e-6) throw Error(ErrorCode::InvalidConfig, "size probabilities sum to " + std::to_string(mass));

  Rng rng(cfg.seed);
  SimulatedData data;
  data.stream.actors = synthetic_actors(cfg.actors);
  data.attributes = complete_attributes(data.stream.actors, cfg.specs, cfg.attributes, rng);
  std::size_t order = 1;
  for (const auto& s : cfg.specs)
    if (is_order_kind(s.kind)) order = std::max(order, s.order);
  const CovariateModel model(cfg.specs, data.attributes, order);
  HistoryState hist(cfg.decay, order);

  std::exponential_distribution<double> gap(cfg.rate);
  std::uniform_int_distribution<std::size_t> pick_sender(0, cfg.actors - 1);
  std::discrete_distribution<std::size_t> pick_size(probs.begin(), probs.end());
  double t = 0.0;
  data.stream.events.reserve(cfg.events);
  for (std::size_t m = 0; m < cfg.events; ++m) {
    t += gap(rng);
    Hyperevent ev;
    ev.time = t;
    ev.index = m;
    ev.sender = static_cast<ActorId>(pick_sender(rng));
    const std::size_t size = sizes[pick_size(rng)];
    const ActorSet universe = data.stream.policy.universe(ev.sender, cfg.actors);
    ev.receivers = draw_receivers(ev.sender, size, t, universe, model, cfg.beta, hist, cfg, rng);
    hist.advance(ev);
    data.stream.events.push_back(std::move(ev));
  }
  return data;
}

std::pair<std::vector<CovariateSpec>, std::vector<double>> parse_beta(std::istream& in) {
  std::vector<CovariateSpec> specs;
  std::vector<double> beta;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto split = s.find_first_of(" \t");
    if (split == std::string_view::npos)
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": expected '<covariate> <value>'");
    specs.push_back(parse_covariate_spec(trim(s.substr(0, split))));
    beta.push_back(parse_double(s.substr(split + 1), line_no));
  }
  return {std::move(specs), std::move(beta)};
}

std::map<std::size_t, double> parse_size_distribution(std::istream& in) {
  std::map<std::size_t, double> dist;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto comma = s.find(',');
    if (comma == std::string_view::npos)
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": expected '<size>,<probability>'");
    const auto size_text = trim(s.substr(0, comma));
    std::size_t size = 0;
    const auto [ptr, ec] = std::from_chars(size_text.data(), size_text.data() + size_text.size(), size);
    if (ec != std::errc() || ptr != size_text.data() + size_text.size())
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": bad size");
    if (!dist.emplace(size, parse_double(s.substr(comma + 1), line_no)).second)
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": size listed twice");
  }
  double mass = 0.0;
  for (const auto& [size, p] : dist) mass += p;
  if (dist.empty() || std::abs(mass - 1.0) > 1e-6)
    throw Error(ErrorCode::InvalidConfig, "size probabilities must sum to 1");
  for (auto& [size, p] : dist) p /= mass;
  return dist;
}

}  // namespace rhem
