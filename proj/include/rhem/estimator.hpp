#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rhem/core_model.hpp"
#include "rhem/covariates.hpp"
#include "rhem/history.hpp"
#include "rhem/sampler.hpp"

namespace rhem {

/// Stratified conditional-logit data: one case plus its alternatives per
/// stratum. Rows are stored row-major; the first row of each stratum is the
/// case.
class EstimationProblem {
 public:
  EstimationProblem() = default;
  explicit EstimationProblem(std::vector<std::string> names);

  static EstimationProblem from_strata(const std::vector<SampledStratum>& strata, std::vector<std::string> names);

  /// `rows` holds n_rows * dim values, case first.
  void add_stratum(std::span<const double> rows);

  const std::vector<std::string>& names() const noexcept { return names_; }
  std::size_t dim() const noexcept { return names_.size(); }
  std::size_t strata() const noexcept { return offsets_.size() - 1; }
  std::size_t rows() const noexcept { return offsets_.back(); }
  std::size_t stratum_begin(std::size_t s) const { return offsets_[s]; }
  std::size_t stratum_end(std::size_t s) const { return offsets_[s + 1]; }
  const double* row(std::size_t r) const { return x_.data() + r * dim(); }

  /// Sub-model on the given columns.
  EstimationProblem select(const std::vector<std::size_t>& columns) const;
  /// Columns whose value is identical for every row within every stratum.
  std::vector<std::size_t> stratum_constant_columns() const;

 private:
  std::vector<std::string> names_;
  std::vector<double> x_;
  std::vector<std::size_t> offsets_{0};
};

/// Log partial likelihood: sum over strata of x_case'b - log sum_r exp(x_r'b).
double loglik(const EstimationProblem& problem, std::span<const double> beta, std::size_t threads = 1);
/// Score: sum over strata of x_case - E_b[x].
Eigen::VectorXd gradient(const EstimationProblem& problem, std::span<const double> beta, std::size_t threads = 1);
/// Negative sum of within-stratum covariances of x under b (negative semidefinite).
Eigen::MatrixXd hessian(const EstimationProblem& problem, std::span<const double> beta, std::size_t threads = 1);

struct Derivatives {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// All three in one pass. Per-chunk partial sums are combined by a fixed
/// pairwise tree, so results are bit-identical for any thread count.
Derivatives derivatives(const EstimationProblem& problem, std::span<const double> beta, int order,
                        std::size_t threads = 1);

enum class NonIdentifiablePolicy { Reject, FixAtZero };

struct FitOptions {
  double tol = 1e-8;                 // max |gradient|
  double loglik_rel_tol = 1e-10;     // relative log-likelihood change
  std::size_t max_iter = 100;
  std::size_t max_halvings = 30;
  double ridge = 1e-8;               // added to the information when it is singular
  double separation_bound = 50.0;
  std::size_t threads = 1;
  NonIdentifiablePolicy non_identifiable = NonIdentifiablePolicy::Reject;
};

struct EstimationResult {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd z;
  Eigen::VectorXd p;
  std::vector<bool> fixed;           // held at zero (stratum-constant column)
  double loglik = 0.0;
  double loglik_null = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::size_t parameters = 0;
  std::size_t iterations = 0;
  bool converged = false;
  bool ridge_applied = false;
  std::size_t strata = 0;
  std::size_t observations = 0;
  Eigen::MatrixXd information;       // observed information at beta (estimated columns)
};

/// Newton-Raphson with step halving. Throws Separation, Singular,
/// MaxIterations or NonIdentifiable.
EstimationResult fit(const EstimationProblem& problem, const FitOptions& options = {});

/// Strata enumerating every same-size receiver set (the exact partial likelihood).
/// Throws RiskSetTooLarge when an event's risk set exceeds `limit`.
EstimationProblem full_risk_set_problem(const EventStream& stream, const CovariateModel& model,
                                        HistoryState& state, std::size_t limit = 10000);

struct ContributionRow {
  std::string name;
  double over_null = 0.0;  // loglik(single covariate) - loglik(null)
  double in_full = 0.0;    // loglik(full) - loglik(full minus this covariate)
};

struct ContributionReport {
  double loglik_null = 0.0;
  double loglik_full = 0.0;
  std::vector<ContributionRow> rows;  // in covariate order
};

ContributionReport contribution_report(const EstimationProblem& problem, const FitOptions& options = {});

struct ResampleFailure {
  std::size_t replication = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ResampleStudy {
  std::vector<std::string> names;
  std::vector<std::uint64_t> seeds;                // of successful replications
  std::vector<Eigen::VectorXd> estimates;          // one per successful replication
  std::vector<EstimationResult> results;
  std::vector<ResampleFailure> failures;
  static constexpr double kProbabilities[5] = {0.0, 0.025, 0.5, 0.975, 1.0};
  /// quantiles[c][q] for covariate c at kProbabilities[q].
  std::vector<std::array<double, 5>> quantiles;
};

/// Linear-interpolation sample quantile (R type 7).
double quantile(std::vector<double> values, double prob);

/// Refits on `replications` independent samples with seeds seed + 0..R-1.
/// Failed replications are recorded, not fatal.
ResampleStudy resample_study(const EventStream& stream, const CovariateModel& model, const HistoryState& initial,
                             const SamplerConfig& cfg, std::size_t replications, const FitOptions& options = {});

// ---- reports --------------------------------------------------------------

/// Significance stars: *** p<0.001, ** p<0.01, * p<0.05.
std::string stars(double p);
/// Text table: `name  estimate (se)***` rows with loglik/AIC/BIC footer.
void write_result_table(const EstimationResult& result, std::ostream& out, const Metadata& meta = {});
/// CSV `NAME,ESTIMATE,SE,Z,P` with `# key=value` metadata and footer lines.
void write_result_csv(const EstimationResult& result, std::ostream& out, const Metadata& meta = {});
/// Rows sorted by improvement over the null model.
void write_contribution_table(const ContributionReport& report, std::ostream& out, const Metadata& meta = {});
void write_quantile_table(const ResampleStudy& study, std::ostream& out, const Metadata& meta = {});

/// Reads the sampler CSV back into a problem. Metadata lines are returned in `meta`.
EstimationProblem read_sample_csv(std::istream& in, Metadata* meta = nullptr);

}  // namespace rhem
