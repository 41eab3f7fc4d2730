#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rhem/core_model.hpp"
#include "rhem/history.hpp"

namespace rhem {

enum class CovariateKind {
  RecAvg,
  SendRecDiff,
  RecSetDiff,
  ExactRepetition,
  UnorderedRepetition,
  RecSubRep,
  SendRecSubRep,
  InteractRec,
  Reciprocation,
  OutInPop,
  TransitiveClosure,
  CyclicClosure,
  InBalance,
  OutBalance,
};

enum class Transform { Identity, Sqrt };

std::string_view kind_tag(CovariateKind kind);
bool is_attribute_kind(CovariateKind kind);
bool is_order_kind(CovariateKind kind);

struct CovariateSpec {
  CovariateKind kind = CovariateKind::RecAvg;
  std::string attribute;  // attribute kinds only
  std::size_t order = 0;  // subset kinds only
  Transform transform = Transform::Identity;

  /// Column name, e.g. `rec_avg_female`, `rec_sub_rep_2`, `reciprocation`.
  std::string name() const;
  /// Inverse of parse_covariate_spec.
  std::string to_string() const;

  friend bool operator==(const CovariateSpec&, const CovariateSpec&) = default;
};

/// Parses `kind[:attribute][:p][,sqrt]`. Throws InvalidSpec.
CovariateSpec parse_covariate_spec(std::string_view text);
/// One spec per line; blank lines and `#` comments are skipped.
std::vector<CovariateSpec> parse_covariate_specs(std::istream& in);
std::vector<CovariateSpec> parse_covariate_specs_file(const std::string& path);

// Attribute covariates. J must be nonempty.
double rec_avg(const Attribute& z, ActorId sender, std::span<const ActorId> receivers);
double send_rec_diff(const Attribute& z, ActorId sender, std::span<const ActorId> receivers);
/// 0 for a single receiver.
double rec_set_diff(const Attribute& z, ActorId sender, std::span<const ActorId> receivers);

// History covariates, evaluated at time t against E_{<t}. J must be sorted.
double exact_repetition(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist);
double unordered_repetition(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist);
/// 0 when |J| < p; throws OrderExceeded when p exceeds the tracked order.
double rec_sub_rep(std::size_t p, ActorId sender, std::span<const ActorId> receivers, double t,
                   const HistoryState& hist);
double send_rec_sub_rep(std::size_t p, ActorId sender, std::span<const ActorId> receivers, double t,
                        const HistoryState& hist);
/// 0 when |J| - 1 < p.
double interact_rec(std::size_t p, ActorId sender, std::span<const ActorId> receivers, double t,
                    const HistoryState& hist);
double reciprocation(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist);
double out_in_pop(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist);

enum class Triad { Transitive, Cyclic, InBalance, OutBalance };

/// Sum over receivers j and third actors a not in {i, j} of the min of two
/// dyadic degrees, divided by |J|. Third actors inside J are included.
double triadic(Triad kind, ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist);

/// A validated covariate list bound to an attribute table.
class CovariateModel {
 public:
  CovariateModel() = default;
  /// Throws UnknownAttribute, InvalidSpec or OrderExceeded.
  CovariateModel(std::vector<CovariateSpec> specs, const AttributeTable& attributes,
                 std::size_t max_order = HistoryState::kDefaultMaxOrder);

  const std::vector<CovariateSpec>& specs() const noexcept { return specs_; }
  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return specs_.size(); }
  /// Largest subset order any spec needs (at least 1).
  std::size_t required_order() const noexcept;

  /// Writes x_t(i, J) into `out` (size() values), square-root applied where flagged.
  void evaluate(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist,
                std::span<double> out) const;
  std::vector<double> evaluate(ActorId sender, std::span<const ActorId> receivers, double t,
                               const HistoryState& hist) const;

 private:
  double raw_value(std::size_t k, ActorId sender, std::span<const ActorId> receivers, double t,
                   const HistoryState& hist) const;

  std::vector<CovariateSpec> specs_;
  std::vector<Attribute> columns_;  // aligned with specs_; empty for history kinds
  std::size_t max_order_ = HistoryState::kDefaultMaxOrder;
};

/// Convenience wrapper: validates and evaluates in one call.
std::vector<double> evaluate(const std::vector<CovariateSpec>& specs, ActorId sender,
                             std::span<const ActorId> receivers, double t, const AttributeTable& attributes,
                             const HistoryState& hist);

}  // namespace rhem
