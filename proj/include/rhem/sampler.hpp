#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rhem/core_model.hpp"
#include "rhem/covariates.hpp"
#include "rhem/history.hpp"

namespace rhem {

using Rng = std::mt19937_64;

struct SamplerConfig {
  std::size_t k = 100;  // controls per event
  std::uint64_t seed = 0;
  RiskPolicy policy;
};

/// One observed event plus its sampled controls. Row 0 is the case, rows
/// 1..k the controls; `covariates` is row-major with one row per candidate.
struct SampledStratum {
  std::size_t event_index = 0;
  double time = 0.0;
  ActorId sender = 0;
  ActorSet case_receivers;
  std::vector<ActorSet> controls;
  std::vector<double> covariates;

  std::size_t rows() const noexcept { return 1 + controls.size(); }
  const ActorSet& receivers(std::size_t row) const { return row == 0 ? case_receivers : controls.at(row - 1); }
};

/// Independent RNG for one stratum, derived from (seed, event index) so
/// strata can be drawn in any order with identical results.
Rng stratum_rng(std::uint64_t seed, std::size_t event_index);

/// Uniform random size-`size` subset of `universe` (sorted output).
ActorSet uniform_subset(std::span<const ActorId> universe, std::size_t size, Rng& rng);

/// Draws k distinct controls of size |J| uniformly without replacement from
/// the eligible subsets other than J. Throws InsufficientControls.
SampledStratum sample_stratum(const Hyperevent& event, const SamplerConfig& cfg, std::size_t actor_count, Rng& rng);

using StratumSink = std::function<void(SampledStratum&&)>;

/// Samples every event and fills covariates from `state`, which is advanced
/// past each event after its stratum is evaluated.
void sample_stream(const EventStream& stream, const SamplerConfig& cfg, const CovariateModel& model,
                   HistoryState& state, const StratumSink& sink);
std::vector<SampledStratum> sample_stream(const EventStream& stream, const SamplerConfig& cfg,
                                          const CovariateModel& model, HistoryState& state);

/// Evaluates covariates for observed events only (one case row per stratum).
std::vector<SampledStratum> observed_covariates(const EventStream& stream, const CovariateModel& model,
                                                HistoryState& state);

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// `STRATUM,IS_CASE,SENDER,RECEIVERS,<covariates...>` preceded by `# key=value`
/// metadata lines.
void write_sample_csv(const std::vector<SampledStratum>& strata, const std::vector<std::string>& names,
                      const ActorTable& actors, const Metadata& meta, std::ostream& out);

/// `EVENT_INDEX,IS_CASE,<covariates...>`.
void write_covariate_csv(const std::vector<SampledStratum>& strata, const std::vector<std::string>& names,
                         const Metadata& meta, std::ostream& out);

}  // namespace rhem
