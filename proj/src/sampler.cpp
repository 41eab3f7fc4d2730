#include "rhem/sampler.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "rhem/combinatorics.hpp"
#include "rhem/error.hpp"

namespace rhem {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void write_metadata(const Metadata& meta, std::ostream& out) {
  for (const auto& [key, value] : meta) out << "# " << key << '=' << value << '\n';
}

}  // namespace

Rng stratum_rng(std::uint64_t seed, std::size_t event_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)), static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                    static_cast<std::uint32_t>(splitmix64(event_index ^ 0x5851f42d4c957f2dULL)),
                    static_cast<std::uint32_t>(splitmix64(event_index) >> 32)};
  return Rng(seq);
}

ActorSet uniform_subset(std::span<const ActorId> universe, std::size_t size, Rng& rng) {
  // Floyd's algorithm over positions
  const std::size_t n = universe.size();
  std::vector<std::size_t> picked;
  picked.reserve(size);
  for (std::size_t j = n - size; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    const std::size_t r = dist(rng);
    if (std::find(picked.begin(), picked.end(), r) == picked.end()) picked.push_back(r);
    else picked.push_back(j);
  }
  ActorSet out;
  out.reserve(size);
  for (std::size_t pos : picked) out.push_back(universe[pos]);
  std::sort(out.begin(), out.end());
  return out;
}

SampledStratum sample_stratum(const Hyperevent& event, const SamplerConfig& cfg, std::size_t actor_count, Rng& rng) {
  if (cfg.k == 0) throw Error(ErrorCode::InvalidConfig, "k must be at least 1");
  const ActorSet universe = cfg.policy.universe(event.sender, actor_count);
  const std::size_t size = event.receivers.size();
  for (ActorId j : event.receivers)
    if (!std::binary_search(universe.begin(), universe.end(), j))
      throw Error(ErrorCode::InvalidConfig, "event " + std::to_string(event.index) +
                                                ": receiver outside the sender's eligible universe");

  const auto total = binomial_saturating(universe.size(), size);
  const auto available = total == 0 ? 0 : total - 1;
  if (available < cfg.k)
    throw Error(ErrorCode::InsufficientControls,
                "event " + std::to_string(event.index) + ": only " + std::to_string(available) +
                    " alternative receiver sets of size " + std::to_string(size) + ", k = " + std::to_string(cfg.k));

  SampledStratum s;
  s.event_index = event.index;
  s.time = event.time;
  s.sender = event.sender;
  s.case_receivers = event.receivers;
  s.controls.reserve(cfg.k);

  if (available <= 2 * cfg.k) {
    // small universe: enumerate and shuffle instead of rejection sampling
    std::vector<ActorSet> all;
    all.reserve(available);
    ActorSet scratch;
    for_each_combination(std::span<const ActorId>(universe), size, scratch, [&](const ActorSet& c) {
      if (c != event.receivers) all.push_back(c);
    });
    for (std::size_t r = 0; r < cfg.k; ++r) {
      std::uniform_int_distribution<std::size_t> dist(r, all.size() - 1);
      std::swap(all[r], all[dist(rng)]);
      s.controls.push_back(std::move(all[r]));
    }
    return s;
  }

  std::set<ActorSet> seen{event.receivers};
  while (s.controls.size() < cfg.k) {
    ActorSet c = uniform_subset(universe, size, rng);
    if (seen.insert(c).second) s.controls.push_back(std::move(c));
  }
  return s;
}

void sample_stream(const EventStream& stream, const SamplerConfig& cfg, const CovariateModel& model,
                   HistoryState& state, const StratumSink& sink) {
  const std::size_t width = model.size();
  for (const auto& ev : stream.events) {
    Rng rng = stratum_rng(cfg.seed, ev.index);
    SampledStratum s = sample_stratum(ev, cfg, stream.actors.size(), rng);
    s.covariates.resize(s.rows() * width);
    for (std::size_t r = 0; r < s.rows(); ++r)
      model.evaluate(s.sender, s.receivers(r), s.time, state,
                     std::span<double>(s.covariates.data() + r * width, width));
    state.advance(ev);
    sink(std::move(s));
  }
}

std::vector<SampledStratum> sample_stream(const EventStream& stream, const SamplerConfig& cfg,
                                          const CovariateModel& model, HistoryState& state) {
  std::vector<SampledStratum> out;
  out.reserve(stream.events.size());
  sample_stream(stream, cfg, model, state, [&](SampledStratum&& s) { out.push_back(std::move(s)); });
  return out;
}

std::vector<SampledStratum> observed_covariates(const EventStream& stream, const CovariateModel& model,
                                                HistoryState& state) {
  std::vector<SampledStratum> out;
  out.reserve(stream.events.size());
  for (const auto& ev : stream.events) {
    SampledStratum s;
    s.event_index = ev.index;
    s.time = ev.time;
    s.sender = ev.sender;
    s.case_receivers = ev.receivers;
    s.covariates = model.evaluate(ev.sender, ev.receivers, ev.time, state);
    state.advance(ev);
    out.push_back(std::move(s));
  }
  return out;
}

void write_sample_csv(const std::vector<SampledStratum>& strata, const std::vector<std::string>& names,
                      const ActorTable& actors, const Metadata& meta, std::ostream& out) {
  write_metadata(meta, out);
  out << "STRATUM,IS_CASE,SENDER,RECEIVERS";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  const std::size_t width = names.size();
  for (const auto& s : strata) {
    for (std::size_t r = 0; r < s.rows(); ++r) {
      out << s.event_index << ',' << (r == 0 ? 1 : 0) << ',' << actors.label(s.sender) << ','
          << join_labels(actors, s.receivers(r));
      for (std::size_t c = 0; c < width; ++c) out << ',' << format_number(s.covariates[r * width + c]);
      out << '\n';
    }
  }
}

void write_covariate_csv(const std::vector<SampledStratum>& strata, const std::vector<std::string>& names,
                         const Metadata& meta, std::ostream& out) {
  write_metadata(meta, out);
  out << "EVENT_INDEX,IS_CASE";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  const std::size_t width = names.size();
  for (const auto& s : strata) {
    for (std::size_t r = 0; r < s.rows(); ++r) {
      out << s.event_index << ',' << (r == 0 ? 1 : 0);
      for (std::size_t c = 0; c < width; ++c) out << ',' << format_number(s.covariates[r * width + c]);
      out << '\n';
    }
  }
}

}  // namespace rhem
