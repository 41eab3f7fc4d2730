#include "rhem/estimator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "rhem/combinatorics.hpp"
#include "rhem/error.hpp"
#include "rhem/parallel.hpp"

namespace rhem {

namespace {

constexpr std::size_t kChunk = 256;  // strata per partial sum

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_beta(const EstimationProblem& problem, std::span<const double> beta) {
  if (beta.size() != problem.dim())
    throw Error(ErrorCode::DimensionMismatch, "beta has " + std::to_string(beta.size()) + " entries, problem has " +
                                                  std::to_string(problem.dim()) + " covariates");
  for (double b : beta)
    if (!std::isfinite(b)) throw Error(ErrorCode::DimensionMismatch, "beta must be finite");
}

void accumulate_stratum(const EstimationProblem& problem, std::size_t s, const Eigen::VectorXd& beta, int order,
                        Derivatives& acc) {
  const std::size_t p = problem.dim();
  const std::size_t begin = problem.stratum_begin(s);
  const auto n = static_cast<Eigen::Index>(problem.stratum_end(s) - begin);
  const Eigen::Map<const RowMatrix> X(problem.row(begin), n, static_cast<Eigen::Index>(p));

  Eigen::VectorXd eta = p ? Eigen::VectorXd(X * beta) : Eigen::VectorXd::Zero(n);
  Eigen::Index top = 0;
  const double m = eta.maxCoeff(&top);
  double rest = 0.0;
  for (Eigen::Index r = 0; r < n; ++r)
    if (r != top) rest += std::exp(eta[r] - m);
  const double lse = m + std::log1p(rest);
  acc.loglik += eta[0] - lse;
  if (order < 1 || p == 0) return;

  const Eigen::VectorXd prob = (eta.array() - lse).exp().matrix();
  const Eigen::VectorXd mean = X.transpose() * prob;
  acc.gradient += X.row(0).transpose() - mean;
  if (order < 2) return;
  const RowMatrix centered = X.rowwise() - mean.transpose();
  const RowMatrix weighted = centered.array().colwise() * prob.array();
  acc.hessian.noalias() -= centered.transpose() * weighted;
}

Derivatives zero_derivatives(std::size_t p, int order) {
  Derivatives d;
  d.gradient = Eigen::VectorXd::Zero(order >= 1 ? static_cast<Eigen::Index>(p) : 0);
  d.hessian = Eigen::MatrixXd::Zero(order >= 2 ? static_cast<Eigen::Index>(p) : 0, order >= 2 ? static_cast<Eigen::Index>(p) : 0);
  return d;
}

void add_into(Derivatives& a, const Derivatives& b) {
  a.loglik += b.loglik;
  if (a.gradient.size()) a.gradient += b.gradient;
  if (a.hessian.size()) a.hessian += b.hessian;
}

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::string with_commas(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i && (i - lead) % 3 == 0 && i >= lead) out += ',';
    out += digits[i];
  }
  if (!out.empty() && out.front() == ',') out.erase(out.begin());
  return out;
}

std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s == "-0.00" || s == "-0.000") s.erase(s.begin());
  return s;
}

void write_meta(const Metadata& meta, std::ostream& out) {
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

// ---- problem --------------------------------------------------------------

EstimationProblem::EstimationProblem(std::vector<std::string> names) : names_(std::move(names)) {}

EstimationProblem EstimationProblem::from_strata(const std::vector<SampledStratum>& strata,
                                                 std::vector<std::string> names) {
  EstimationProblem problem(std::move(names));
  for (const auto& s : strata) problem.add_stratum(s.covariates);
  return problem;
}

void EstimationProblem::add_stratum(std::span<const double> rows) {
  const std::size_t p = dim();
  if (p == 0) throw Error(ErrorCode::DimensionMismatch, "add_stratum needs at least one covariate column");
  if (rows.empty() || rows.size() % p != 0)
    throw Error(ErrorCode::DimensionMismatch, "stratum values are not a whole number of rows");
  x_.insert(x_.end(), rows.begin(), rows.end());
  offsets_.push_back(offsets_.back() + rows.size() / p);
}

EstimationProblem EstimationProblem::select(const std::vector<std::size_t>& columns) const {
  EstimationProblem out;
  for (auto c : columns) {
    if (c >= dim()) throw Error(ErrorCode::DimensionMismatch, "column out of range");
    out.names_.push_back(names_[c]);
  }
  out.offsets_ = offsets_;
  out.x_.resize(rows() * columns.size());
  const std::size_t p = dim();
  for (std::size_t r = 0; r < rows(); ++r)
    for (std::size_t k = 0; k < columns.size(); ++k) out.x_[r * columns.size() + k] = x_[r * p + columns[k]];
  return out;
}

std::vector<std::size_t> EstimationProblem::stratum_constant_columns() const {
  std::vector<std::size_t> out;
  const std::size_t p = dim();
  for (std::size_t c = 0; c < p; ++c) {
    bool constant = true;
    for (std::size_t s = 0; s < strata() && constant; ++s) {
      const double v = x_[stratum_begin(s) * p + c];
      for (std::size_t r = stratum_begin(s) + 1; r < stratum_end(s); ++r)
        if (x_[r * p + c] != v) {
          constant = false;
          break;
        }
    }
    if (constant) out.push_back(c);
  }
  return out;
}

// ---- likelihood -----------------------------------------------------------

Derivatives derivatives(const EstimationProblem& problem, std::span<const double> beta, int order,
                        std::size_t threads) {
  check_beta(problem, beta);
  const std::size_t p = problem.dim();
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(p));
  const std::size_t chunks = (problem.strata() + kChunk - 1) / kChunk;
  std::vector<Derivatives> partial(chunks);
  parallel_for(chunks, threads, [&](std::size_t c) {
    Derivatives acc = zero_derivatives(p, order);
    const std::size_t end = std::min(problem.strata(), (c + 1) * kChunk);
    for (std::size_t s = c * kChunk; s < end; ++s) accumulate_stratum(problem, s, b, order, acc);
    partial[c] = std::move(acc);
  });
  if (partial.empty()) return zero_derivatives(p, order);
  // fixed pairwise tree
  for (std::size_t width = 1; width < partial.size(); width *= 2)
    for (std::size_t i = 0; i + width < partial.size(); i += 2 * width) add_into(partial[i], partial[i + width]);
  return std::move(partial.front());
}

double loglik(const EstimationProblem& problem, std::span<const double> beta, std::size_t threads) {
  return derivatives(problem, beta, 0, threads).loglik;
}

Eigen::VectorXd gradient(const EstimationProblem& problem, std::span<const double> beta, std::size_t threads) {
  return derivatives(problem, beta, 1, threads).gradient;
}

Eigen::MatrixXd hessian(const EstimationProblem& problem, std::span<const double> beta, std::size_t threads) {
  return derivatives(problem, beta, 2, threads).hessian;
}

// ---- Newton-Raphson -------------------------------------------------------

namespace {

struct Solver {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  double shift = 0.0;

  // Relative eigenvalue floor below which the information counts as singular.
  static constexpr double kSingular = 1e-10;

  /// Returns false when even the ridge cannot make the system solvable.
  bool factor(const Eigen::MatrixXd& information, double ridge, bool& ridged) {
    eig.compute(information);
    if (eig.info() != Eigen::Success) return false;
    const double max_eig = eig.eigenvalues().maxCoeff();
    const double min_eig = eig.eigenvalues().minCoeff();
    if (!std::isfinite(max_eig) || !std::isfinite(min_eig)) return false;
    shift = 0.0;
    if (min_eig <= kSingular * std::max(max_eig, 1.0)) {
      shift = ridge * std::max(max_eig, 1.0) - std::min(min_eig, 0.0);
      ridged = true;
      if (!(min_eig + shift > 0.0)) return false;
    }
    return true;
  }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const Eigen::VectorXd lambda = eig.eigenvalues().array() + shift;
    return eig.eigenvectors() * ((eig.eigenvectors().transpose() * rhs).array() / lambda.array()).matrix();
  }
  Eigen::MatrixXd inverse() const {
    const Eigen::VectorXd lambda = eig.eigenvalues().array() + shift;
    return eig.eigenvectors() * lambda.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  }
};

/// True when moving along `v` never lowers any case relative to its
/// alternatives and raises at least one: the likelihood then increases
/// without bound in that direction.
bool is_recession_direction(const EstimationProblem& p, const Eigen::VectorXd& v) {
  const auto d = static_cast<Eigen::Index>(p.dim());
  double scale = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r)
    scale = std::max(scale, Eigen::Map<const Eigen::VectorXd>(p.row(r), d).cwiseAbs().maxCoeff());
  const double eps = 1e-9 * std::max(scale, 1.0);
  bool strict = false;
  for (std::size_t s = 0; s < p.strata(); ++s) {
    const double c = Eigen::Map<const Eigen::VectorXd>(p.row(p.stratum_begin(s)), d).dot(v);
    for (std::size_t r = p.stratum_begin(s) + 1; r < p.stratum_end(s); ++r) {
      const double gap = c - Eigen::Map<const Eigen::VectorXd>(p.row(r), d).dot(v);
      if (gap < -eps) return false;
      if (gap > eps) strict = true;
    }
  }
  return strict;
}

}  // namespace

EstimationResult fit(const EstimationProblem& problem, const FitOptions& options) {
  EstimationResult result;
  result.names = problem.names();
  result.strata = problem.strata();
  result.observations = problem.rows();
  if (problem.strata() == 0) throw Error(ErrorCode::EmptyStream, "estimation problem has no strata");

  const auto constant = problem.stratum_constant_columns();
  if (!constant.empty() && options.non_identifiable == NonIdentifiablePolicy::Reject) {
    std::string list;
    for (auto c : constant) list += (list.empty() ? "" : ", ") + problem.names()[c];
    throw Error(ErrorCode::NonIdentifiable,
                "covariates constant within every stratum cannot be estimated (absorbed by the baseline): " + list);
  }
  std::vector<std::size_t> free_columns;
  result.fixed.assign(problem.dim(), false);
  for (std::size_t c = 0; c < problem.dim(); ++c) {
    if (std::find(constant.begin(), constant.end(), c) != constant.end()) result.fixed[c] = true;
    else free_columns.push_back(c);
  }
  const EstimationProblem sub = free_columns.size() == problem.dim() ? problem : problem.select(free_columns);
  const auto d = static_cast<Eigen::Index>(sub.dim());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Derivatives D = derivatives(sub, {beta.data(), static_cast<std::size_t>(d)}, 2, options.threads);
  result.loglik_null = D.loglik;

  Solver solver;
  bool converged = d == 0;
  std::size_t iter = 0;
  while (!converged) {
    if (iter >= options.max_iter)
      throw Error(ErrorCode::MaxIterations, "no convergence after " + std::to_string(iter) + " iterations");
    ++iter;
    bool ridged = false;
    if (!solver.factor(-D.hessian, options.ridge, ridged))
      throw Error(ErrorCode::Singular, "information matrix is not invertible");
    result.ridge_applied = result.ridge_applied || ridged;
    const Eigen::VectorXd direction = solver.solve(D.gradient);

    double scale = 1.0;
    Eigen::VectorXd candidate = beta + direction;
    double ll = loglik(sub, {candidate.data(), static_cast<std::size_t>(d)}, options.threads);
    const double slack = 1e-12 * std::abs(D.loglik);
    for (std::size_t h = 0; h < options.max_halvings && !(std::isfinite(ll) && ll >= D.loglik - slack); ++h) {
      scale *= 0.5;
      candidate = beta + scale * direction;
      ll = loglik(sub, {candidate.data(), static_cast<std::size_t>(d)}, options.threads);
    }
    if (!(std::isfinite(ll) && ll >= D.loglik - slack)) {
      // no ascent along the Newton direction: already at the optimum
      converged = true;
      break;
    }
    const Eigen::VectorXd step = candidate - beta;
    const double previous = D.loglik;
    beta = candidate;
    D = derivatives(sub, {beta.data(), static_cast<std::size_t>(d)}, 2, options.threads);

    for (Eigen::Index j = 0; j < d; ++j)
      if (std::abs(beta[j]) > options.separation_bound && std::abs(step[j]) > 1e-6)
        throw Error(ErrorCode::Separation, "coefficient of '" + sub.names()[static_cast<std::size_t>(j)] +
                                               "' diverges (|beta| > " + fixed(options.separation_bound, 0) +
                                               "); the likelihood has no finite maximum");

    const double rel = previous != 0.0 ? std::abs(D.loglik - previous) / std::abs(previous)
                                       : std::abs(D.loglik - previous);
    const bool small_gradient = D.gradient.cwiseAbs().maxCoeff() < options.tol;
    const bool small_change = rel < options.loglik_rel_tol;
    bool settled = true;
    for (Eigen::Index j = 0; j < d; ++j)
      if (std::abs(step[j]) > 1e-3 * std::max(1.0, std::abs(beta[j]))) settled = false;
    converged = (small_gradient || small_change) && settled;
  }

  result.iterations = iter;
  result.converged = converged;
  result.loglik = D.loglik;
  result.parameters = static_cast<std::size_t>(d);
  result.aic = 2.0 * static_cast<double>(d) - 2.0 * result.loglik;
  result.bic = static_cast<double>(d) * std::log(static_cast<double>(problem.strata())) - 2.0 * result.loglik;

  const auto p = static_cast<Eigen::Index>(problem.dim());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.beta = Eigen::VectorXd::Zero(p);
  result.se = Eigen::VectorXd::Constant(p, nan);
  result.z = Eigen::VectorXd::Constant(p, nan);
  result.p = Eigen::VectorXd::Constant(p, nan);
  result.information = -D.hessian;
  if (d > 0) {
    bool ridged = false;
    if (!solver.factor(result.information, options.ridge, ridged))
      throw Error(ErrorCode::Singular, "information matrix at the estimate is not invertible");
    result.ridge_applied = result.ridge_applied || ridged;
    if (ridged) {
      // a stall in a flat direction may be quasi-separation rather than collinearity
      const auto& values = solver.eig.eigenvalues();
      const double floor = Solver::kSingular * std::max(values.maxCoeff(), 1.0);
      for (Eigen::Index k = 0; k < d; ++k) {
        if (values[k] > floor) continue;
        const Eigen::VectorXd v = solver.eig.eigenvectors().col(k);
        if (is_recession_direction(sub, v) || is_recession_direction(sub, -v))
          throw Error(ErrorCode::Separation,
                      "the likelihood increases without bound along a combination of covariates; no finite maximum");
      }
    }
    const Eigen::MatrixXd cov = solver.inverse();
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto c = static_cast<Eigen::Index>(free_columns[static_cast<std::size_t>(j)]);
      result.beta[c] = beta[j];
      result.se[c] = std::sqrt(cov(j, j));
      result.z[c] = beta[j] / result.se[c];
      result.p[c] = normal_two_sided_p(result.z[c]);
    }
  }
  return result;
}

// ---- full risk set ---------------------------------------------------------

EstimationProblem full_risk_set_problem(const EventStream& stream, const CovariateModel& model, HistoryState& state,
                                        std::size_t limit) {
  EstimationProblem problem(model.names());
  const std::size_t width = model.size();
  std::vector<double> rows;
  std::vector<double> x(width);
  ActorSet scratch;
  for (const auto& ev : stream.events) {
    const ActorSet universe = stream.policy.universe(ev.sender, stream.actors.size());
    const auto total = binomial_saturating(universe.size(), ev.receivers.size());
    if (total > limit)
      throw Error(ErrorCode::RiskSetTooLarge, "event " + std::to_string(ev.index) + ": risk set of " +
                                                  (total == std::numeric_limits<std::uint64_t>::max()
                                                       ? std::string("more than 2^64")
                                                       : std::to_string(total)) +
                                                  " receiver sets exceeds " + std::to_string(limit));
    rows.clear();
    model.evaluate(ev.sender, ev.receivers, ev.time, state, x);
    rows.insert(rows.end(), x.begin(), x.end());
    bool found = false;
    for_each_combination(std::span<const ActorId>(universe), ev.receivers.size(), scratch, [&](const ActorSet& c) {
      if (c == ev.receivers) {
        found = true;
        return;
      }
      model.evaluate(ev.sender, c, ev.time, state, x);
      rows.insert(rows.end(), x.begin(), x.end());
    });
    if (!found)
      throw Error(ErrorCode::InvalidConfig, "event " + std::to_string(ev.index) + " lies outside its risk set");
    if (width == 0) {
      // keep the stratum sizes for a covariate-free problem
      throw Error(ErrorCode::DimensionMismatch, "full risk set problem needs at least one covariate");
    }
    problem.add_stratum(rows);
    state.advance(ev);
  }
  return problem;
}

// ---- contributions ----------------------------------------------------------

ContributionReport contribution_report(const EstimationProblem& problem, const FitOptions& options) {
  FitOptions opts = options;
  opts.non_identifiable = NonIdentifiablePolicy::FixAtZero;
  ContributionReport report;
  const auto full = fit(problem, opts);
  report.loglik_full = full.loglik;
  report.loglik_null = full.loglik_null;
  const std::size_t p = problem.dim();
  for (std::size_t c = 0; c < p; ++c) {
    ContributionRow row;
    row.name = problem.names()[c];
    row.over_null = fit(problem.select({c}), opts).loglik - report.loglik_null;
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < p; ++k)
      if (k != c) rest.push_back(k);
    const double dropped = rest.empty() ? report.loglik_null : fit(problem.select(rest), opts).loglik;
    row.in_full = report.loglik_full - dropped;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---- resampling -------------------------------------------------------------

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ResampleStudy resample_study(const EventStream& stream, const CovariateModel& model, const HistoryState& initial,
                             const SamplerConfig& cfg, std::size_t replications, const FitOptions& options) {
  if (replications < 2) throw Error(ErrorCode::InvalidConfig, "a resampling study needs at least 2 replications");
  struct Outcome {
    std::optional<EstimationResult> result;
    std::string error;
  };
  std::vector<Outcome> outcomes(replications);
  FitOptions inner = options;
  inner.threads = 1;
  parallel_for(replications, options.threads, [&](std::size_t r) {
    SamplerConfig c = cfg;
    c.seed = cfg.seed + r;
    try {
      HistoryState state = initial;
      const auto strata = sample_stream(stream, c, model, state);
      outcomes[r].result = fit(EstimationProblem::from_strata(strata, model.names()), inner);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InsufficientControls || e.code() == ErrorCode::OutOfOrderEvent) throw;
      outcomes[r].error = e.what();
    }
  });

  ResampleStudy study;
  study.names = model.names();
  for (std::size_t r = 0; r < replications; ++r) {
    if (outcomes[r].result) {
      study.seeds.push_back(cfg.seed + r);
      study.estimates.push_back(outcomes[r].result->beta);
      study.results.push_back(std::move(*outcomes[r].result));
    } else {
      study.failures.push_back({r, cfg.seed + r, outcomes[r].error});
    }
  }
  study.quantiles.resize(study.names.size());
  for (std::size_t c = 0; c < study.names.size(); ++c) {
    std::vector<double> column;
    for (const auto& b : study.estimates) column.push_back(b[static_cast<Eigen::Index>(c)]);
    for (std::size_t q = 0; q < 5; ++q) study.quantiles[c][q] = quantile(column, ResampleStudy::kProbabilities[q]);
  }
  return study;
}

// ---- reports ----------------------------------------------------------------

std::string stars(double p) {
  if (std::isnan(p)) return "";
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

void write_result_table(const EstimationResult& result, std::ostream& out, const Metadata& meta) {
  write_meta(meta, out);
  std::size_t width = 16;
  for (const auto& n : result.names) width = std::max(width, n.size() + 2);
  auto line = [&] { out << std::string(width + 26, '-') << '\n'; };
  line();
  for (std::size_t c = 0; c < result.names.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(c);
    std::string cell = result.fixed[c] ? std::string("(fixed at 0)")
                                       : fixed(result.beta[k], 2) + " (" + fixed(result.se[k], 2) + ")" +
                                             stars(result.p[k]);
    out << result.names[c] << std::string(width - result.names[c].size(), ' ') << cell << '\n';
  }
  line();
  auto row = [&](const std::string& label, const std::string& value) {
    out << label << std::string(width - label.size(), ' ') << value << '\n';
  };
  row("Log likelihood", fixed(result.loglik, 2));
  row("AIC", fixed(result.aic, 2));
  row("BIC", fixed(result.bic, 2));
  row("Num. events", with_commas(result.strata));
  row("Num. obs.", with_commas(result.observations));
  row("Converged", std::string(result.converged ? "yes" : "no") + " (" + std::to_string(result.iterations) +
                       " iterations" + (result.ridge_applied ? ", ridge applied" : "") + ")");
  line();
  out << "***p<0.001, **p<0.01, *p<0.05\n";
}

void write_result_csv(const EstimationResult& result, std::ostream& out, const Metadata& meta) {
  write_meta(meta, out);
  out << "NAME,ESTIMATE,SE,Z,P\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_number(v); };
  for (std::size_t c = 0; c < result.names.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(c);
    out << result.names[c] << ',' << num(result.beta[k]) << ',' << num(result.se[k]) << ',' << num(result.z[k]) << ','
        << num(result.p[k]) << '\n';
  }
  out << "# loglik=" << format_number(result.loglik) << '\n'
      << "# loglik_null=" << format_number(result.loglik_null) << '\n'
      << "# aic=" << format_number(result.aic) << '\n'
      << "# bic=" << format_number(result.bic) << '\n'
      << "# events=" << result.strata << '\n'
      << "# observations=" << result.observations << '\n'
      << "# converged=" << (result.converged ? "true" : "false") << '\n'
      << "# iterations=" << result.iterations << '\n'
      << "# ridge_applied=" << (result.ridge_applied ? "true" : "false") << '\n';
}

void write_contribution_table(const ContributionReport& report, std::ostream& out, const Metadata& meta) {
  write_meta(meta, out);
  std::vector<const ContributionRow*> rows;
  for (const auto& r : report.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->over_null > b->over_null; });
  std::size_t width = 16;
  for (const auto* r : rows) width = std::max(width, r->name.size() + 2);
  out << std::string(width, ' ') << "  over null model  in full model\n";
  for (const auto* r : rows) {
    const auto a = fixed(r->over_null, 2);
    const auto b = fixed(r->in_full, 2);
    out << r->name << std::string(width - r->name.size(), ' ') << std::string(17 - std::min<std::size_t>(17, a.size()), ' ')
        << a << std::string(15 - std::min<std::size_t>(15, b.size()), ' ') << b << '\n';
  }
  out << "null log likelihood: " << fixed(report.loglik_null, 2) << '\n'
      << "full log likelihood: " << fixed(report.loglik_full, 2) << '\n';
}

void write_quantile_table(const ResampleStudy& study, std::ostream& out, const Metadata& meta) {
  write_meta(meta, out);
  std::size_t width = 16;
  for (const auto& n : study.names) width = std::max(width, n.size() + 2);
  const char* heads[5] = {"0%", "2.5%", "50%", "97.5%", "100%"};
  out << std::string(width, ' ');
  for (auto* h : heads) out << std::string(9 - std::string(h).size(), ' ') << h;
  out << '\n';
  for (std::size_t c = 0; c < study.names.size(); ++c) {
    out << study.names[c] << std::string(width - study.names[c].size(), ' ');
    for (std::size_t q = 0; q < 5; ++q) {
      const auto v = fixed(study.quantiles[c][q], 3);
      out << std::string(9 - std::min<std::size_t>(9, v.size()), ' ') << v;
    }
    out << '\n';
  }
  out << "replications: " << study.estimates.size() << " succeeded, " << study.failures.size() << " failed\n";
  for (const auto& f : study.failures)
    out << "  replication " << f.replication << " (seed " << f.seed << "): " << f.message << '\n';
}

EstimationProblem read_sample_csv(std::istream& in, Metadata* meta) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> names;
  bool header = false;
  EstimationProblem problem;
  std::vector<double> rows;
  std::vector<double> case_row;
  std::string current;
  std::size_t cases = 0;

  auto flush = [&] {
    if (current.empty()) return;
    if (cases != 1)
      throw Error(ErrorCode::MalformedInput, "stratum " + current + " has " + std::to_string(cases) + " cases");
    std::vector<double> ordered(case_row);
    ordered.insert(ordered.end(), rows.begin(), rows.end());
    problem.add_stratum(ordered);
    rows.clear();
    case_row.clear();
    cases = 0;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (line[0] == '#') {
      if (meta) {
        auto body = trim(std::string_view(line).substr(1));
        const auto eq = body.find('=');
        if (eq != std::string_view::npos)
          meta->emplace_back(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
      }
      continue;
    }
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!header) {
      if (fields.size() < 5 || fields[0] != "STRATUM" || fields[1] != "IS_CASE" || fields[2] != "SENDER" ||
          fields[3] != "RECEIVERS")
        throw Error(ErrorCode::MalformedInput, "expected header STRATUM,IS_CASE,SENDER,RECEIVERS,<covariates>");
      for (std::size_t c = 4; c < fields.size(); ++c) names.emplace_back(trim(fields[c]));
      problem = EstimationProblem(names);
      header = true;
      continue;
    }
    if (fields.size() != names.size() + 4)
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": wrong number of fields");
    const std::string stratum(trim(fields[0]));
    if (stratum != current) {
      flush();
      current = stratum;
    }
    std::vector<double> values(names.size());
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto f = trim(fields[c + 4]);
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[c]);
      if (ec != std::errc() || ptr != f.data() + f.size())
        throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": bad number '" +
                                                   std::string(f) + "'");
    }
    const auto is_case = trim(fields[1]);
    if (is_case == "1") {
      ++cases;
      case_row = values;
    } else if (is_case == "0") {
      rows.insert(rows.end(), values.begin(), values.end());
    } else {
      throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": IS_CASE must be 0 or 1");
    }
  }
  flush();
  if (!header) throw Error(ErrorCode::MalformedInput, "missing sample header");
  return problem;
}

}  // namespace rhem
