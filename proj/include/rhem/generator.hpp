#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rhem/core_model.hpp"
#include "rhem/covariates.hpp"
#include "rhem/history.hpp"
#include "rhem/sampler.hpp"

namespace rhem {

struct GeneratorConfig {
  std::size_t actors = 20;
  std::size_t events = 1000;
  /// Receiver-set size -> probability. Must sum to 1.
  std::map<std::size_t, double> size_distribution{{1, 1.0}};
  std::vector<CovariateSpec> specs;
  std::vector<double> beta;
  DecayConfig decay{1.0};
  double rate = 1.0;  // exponential inter-event times
  std::uint64_t seed = 0;
  /// Attributes referenced by `specs`. Missing columns are drawn as uniform 0/1.
  std::optional<AttributeTable> attributes;
  /// Largest candidate count enumerated exactly; above it receiver sets are
  /// drawn by self-normalized importance sampling.
  std::size_t enumeration_limit = 10000;
  std::size_t importance_draws = 2000;
};

struct SimulatedData {
  EventStream stream;
  AttributeTable attributes;
};

/// Labels a0, a1, ... with zero-padding to a common width.
ActorTable synthetic_actors(std::size_t count);

/// Uniform binary columns for every attribute named in `specs` that
/// `base` does not already provide.
AttributeTable complete_attributes(const ActorTable& actors, const std::vector<CovariateSpec>& specs,
                                   const std::optional<AttributeTable>& base, Rng& rng);

/// Draws a receiver set of the given size with probability proportional to
/// exp(beta'x) given the current history.
ActorSet draw_receivers(ActorId sender, std::size_t size, double t, const ActorSet& universe,
                        const CovariateModel& model, const std::vector<double>& beta, const HistoryState& hist,
                        const GeneratorConfig& cfg, Rng& rng);

/// Throws InfeasibleSize or InvalidConfig.
SimulatedData simulate(const GeneratorConfig& cfg);

/// `<spec> <value>` per line, e.g. `rec_avg:female 0.5`; `#` comments.
std::pair<std::vector<CovariateSpec>, std::vector<double>> parse_beta(std::istream& in);
/// `<size>,<probability>` per line; probabilities are normalized if they
/// sum to 1 within 1e-6.
std::map<std::size_t, double> parse_size_distribution(std::istream& in);

}  // namespace rhem
