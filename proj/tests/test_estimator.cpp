#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "oracle.hpp"
#include "rhem/error.hpp"
#include "rhem/estimator.hpp"
#include "rhem/generator.hpp"

using namespace rhem;

namespace {

EstimationProblem single(std::vector<double> rows, std::size_t dim = 1) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < dim; ++c) names.push_back("x" + std::to_string(c));
  EstimationProblem p(names);
  p.add_stratum(rows);
  return p;
}

EstimationProblem random_problem(oracle::Gen& g, std::size_t strata, std::size_t dim, std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < dim; ++c) names.push_back("x" + std::to_string(c));
  EstimationProblem p(names);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> rows((k + 1) * dim);
  for (std::size_t s = 0; s < strata; ++s) {
    for (auto& v : rows) v = n(g);
    // tilt the case so the optimum is finite and non-trivial
    for (std::size_t c = 0; c < dim; ++c) rows[c] += 0.5;
    p.add_stratum(rows);
  }
  return p;
}

// Naive log likelihood with no stabilization tricks.
double naive_loglik(const EstimationProblem& p, const std::vector<double>& b) {
  double ll = 0;
  for (std::size_t s = 0; s < p.strata(); ++s) {
    double denom = 0, num = 0;
    for (std::size_t r = p.stratum_begin(s); r < p.stratum_end(s); ++r) {
      double eta = 0;
      for (std::size_t c = 0; c < p.dim(); ++c) eta += b[c] * p.row(r)[c];
      denom += std::exp(eta);
      if (r == p.stratum_begin(s)) num = eta;
    }
    ll += num - std::log(denom);
  }
  return ll;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("two-row likelihood values") {
  auto p = single({1.0, 0.0});
  const double zero[] = {0.0};
  const double ln2[] = {std::log(2.0)};
  CHECK(loglik(p, zero) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  CHECK(loglik(p, ln2) == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-15));
  CHECK(gradient(p, zero)[0] == doctest::Approx(0.5));
  CHECK(hessian(p, zero)(0, 0) == doctest::Approx(-0.25));
  const double two[] = {0.0, 1.0};
  CHECK(code_of([&] { loglik(p, two); }) == ErrorCode::DimensionMismatch);
  const double inf[] = {INFINITY};
  CHECK(code_of([&] { loglik(p, inf); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("null log likelihood is -n ln(k+1)") {
  oracle::Gen g(1);
  for (std::size_t k : {1, 4, 100}) {
    auto p = random_problem(g, 37, 3, k);
    const std::vector<double> zero(3, 0.0);
    CHECK(loglik(p, zero) == doctest::Approx(-37.0 * std::log(k + 1.0)).epsilon(1e-13));
  }
}

TEST_CASE("log-sum-exp stays accurate") {
  oracle::Gen g(2);
  auto p = random_problem(g, 20, 2, 6);
  const std::vector<double> b{0.3, -0.7};
  CHECK(loglik(p, b) == doctest::Approx(naive_loglik(p, b)).epsilon(1e-12));
  auto wide = single({1000.0, 0.0, -1000.0});
  const double one[] = {1.0};
  CHECK(std::isfinite(loglik(wide, one)));
  CHECK(loglik(wide, one) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gradient matches central differences and the hessian is symmetric negative semidefinite") {
  oracle::Gen g(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t dim = 1 + oracle::uniform(g, 0, 4);
    auto p = random_problem(g, 1 + oracle::uniform(g, 0, 30), dim, 1 + oracle::uniform(g, 0, 8));
    std::vector<double> b(dim);
    for (auto& v : b) v = std::uniform_real_distribution<double>(-1.0, 1.0)(g);
    const auto d = derivatives(p, b, 2);
    for (std::size_t c = 0; c < dim; ++c) {
      const double h = 1e-5;
      auto up = b, down = b;
      up[c] += h;
      down[c] -= h;
      const double fd = (loglik(p, up) - loglik(p, down)) / (2 * h);
      CHECK(std::abs(fd - d.gradient[static_cast<Eigen::Index>(c)]) <=
            1e-5 * std::max(1.0, std::abs(d.gradient[static_cast<Eigen::Index>(c)])));
    }
    CHECK((d.hessian - d.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.hessian);
    CHECK(eig.eigenvalues().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("log likelihood is concave along random lines") {
  oracle::Gen g(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = random_problem(g, 15, 3, 4);
    std::vector<double> a(3), b(3);
    for (auto& v : a) v = std::uniform_real_distribution<double>(-3.0, 3.0)(g);
    for (auto& v : b) v = std::uniform_real_distribution<double>(-3.0, 3.0)(g);
    auto at = [&](double s) {
      std::vector<double> x(3);
      for (int c = 0; c < 3; ++c) x[c] = (1 - s) * a[c] + s * b[c];
      return loglik(p, x);
    };
    for (double s = 0.1; s < 0.95; s += 0.1) CHECK(at(s) >= 0.5 * (at(s - 0.1) + at(s + 0.1)) - 1e-9);
  }
}

TEST_CASE("results do not depend on the thread count") {
  oracle::Gen g(5);
  auto p = random_problem(g, 3000, 4, 10);
  const std::vector<double> b{0.1, -0.2, 0.3, 0.05};
  const auto one = derivatives(p, b, 2, 1);
  for (std::size_t t : {2, 3, 8}) {
    const auto many = derivatives(p, b, 2, t);
    CHECK(one.loglik == many.loglik);
    CHECK(one.gradient == many.gradient);
    CHECK(one.hessian == many.hessian);
  }
}

TEST_CASE("stratum-constant shifts change nothing") {
  oracle::Gen g(6);
  auto p = random_problem(g, 40, 2, 5);
  EstimationProblem shifted(p.names());
  for (std::size_t s = 0; s < p.strata(); ++s) {
    std::vector<double> rows(p.row(p.stratum_begin(s)), p.row(p.stratum_end(s)));
    const double c0 = std::uniform_real_distribution<double>(-5.0, 5.0)(g);
    for (std::size_t r = 0; r < rows.size(); r += 2) rows[r] += c0;
    shifted.add_stratum(rows);
  }
  const std::vector<double> b{0.4, -0.1};
  CHECK(loglik(p, b) == doctest::Approx(loglik(shifted, b)).epsilon(1e-12));
  CHECK((gradient(p, b) - gradient(shifted, b)).cwiseAbs().maxCoeff() < 1e-10);
  const auto f1 = fit(p), f2 = fit(shifted);
  CHECK((f1.beta - f2.beta).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit basics") {
  SUBCASE("symmetric problem has zero estimate") {
    EstimationProblem p({"x"});
    const std::vector<double> a{1.0, -1.0}, b{-1.0, 1.0};
    p.add_stratum(a);
    p.add_stratum(b);
    auto r = fit(p);
    CHECK(r.converged);
    CHECK(std::abs(r.beta[0]) < 1e-12);
  }
  SUBCASE("perfect prediction is separation") {
    EstimationProblem p({"x"});
    const std::vector<double> rows{1.0, 0.0, 0.0};
    for (int s = 0; s < 10; ++s) p.add_stratum(rows);
    CHECK(code_of([&] { fit(p); }) == ErrorCode::Separation);
  }
  SUBCASE("stratum-constant covariates are rejected or fixed") {
    EstimationProblem p({"x", "sender_only"});
    p.add_stratum(std::vector<double>{1.0, 3.0, 0.0, 3.0});
    p.add_stratum(std::vector<double>{0.0, 2.0, 1.0, 2.0});
    p.add_stratum(std::vector<double>{1.0, 5.0, 0.0, 5.0, 0.5, 5.0});
    CHECK(code_of([&] { fit(p); }) == ErrorCode::NonIdentifiable);
    FitOptions o;
    o.non_identifiable = NonIdentifiablePolicy::FixAtZero;
    auto r = fit(p, o);
    CHECK(r.fixed[1]);
    CHECK(r.beta[1] == 0.0);
    CHECK(std::isnan(r.se[1]));
    CHECK(r.parameters == 1);
  }
  SUBCASE("duplicate columns need the ridge") {
    oracle::Gen g(7);
    auto base = random_problem(g, 50, 1, 4);
    auto p = base.select({0, 0});
    auto r = fit(p);
    CHECK(r.ridge_applied);
    CHECK(r.beta[0] == doctest::Approx(r.beta[1]).epsilon(1e-6));
    CHECK(r.beta[0] + r.beta[1] == doctest::Approx(fit(base).beta[0]).epsilon(1e-6));
  }
  SUBCASE("iteration cap") {
    oracle::Gen g(8);
    auto p = random_problem(g, 50, 2, 4);
    FitOptions o;
    o.max_iter = 1;
    CHECK(code_of([&] { fit(p, o); }) == ErrorCode::MaxIterations);
  }
}

TEST_CASE("fit reaches the optimum and reports consistent statistics") {
  oracle::Gen g(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 1 + oracle::uniform(g, 0, 3);
    auto p = random_problem(g, 200, dim, 5);
    auto r = fit(p);
    REQUIRE(r.converged);
    std::vector<double> b(r.beta.data(), r.beta.data() + r.beta.size());
    const auto d = derivatives(p, b, 2);
    CHECK(d.gradient.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(r.loglik == doctest::Approx(d.loglik).epsilon(1e-14));
    CHECK(r.loglik >= r.loglik_null);
    CHECK(r.aic == doctest::Approx(2.0 * dim - 2.0 * r.loglik));
    CHECK(r.bic == doctest::Approx(dim * std::log(200.0) - 2.0 * r.loglik));
    // standard errors from an independent inverse
    const Eigen::MatrixXd cov = (-d.hessian).inverse();
    for (std::size_t c = 0; c < dim; ++c) {
      const auto j = static_cast<Eigen::Index>(c);
      CHECK(std::abs(r.se[j] - std::sqrt(cov(j, j))) < 1e-10);
      CHECK(r.z[j] == doctest::Approx(r.beta[j] / r.se[j]));
      CHECK(r.p[j] >= 0.0);
      CHECK(r.p[j] <= 1.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.information);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("full risk set") {
  oracle::Gen g(10);
  auto stream = oracle::random_stream(g, 6, 15, 2);
  for (auto& e : stream.events) e.receivers = oracle::random_receivers(g, 6, e.sender, 2);
  AttributeTable attrs = oracle::random_attributes(g, stream.actors);
  CovariateModel model({parse_covariate_spec("reciprocation"), parse_covariate_spec("rec_avg:score"),
                        parse_covariate_spec("unordered_repetition")},
                       attrs, 1);
  HistoryState h(DecayConfig(3.0), 1);
  auto full = full_risk_set_problem(stream, model, h);
  CHECK(full.strata() == 15);
  for (std::size_t s = 0; s < full.strata(); ++s) CHECK(full.stratum_end(s) - full.stratum_begin(s) == 10);

  // sampling k = C(5,2) - 1 controls covers the whole risk set
  SamplerConfig cfg;
  cfg.k = 9;
  HistoryState h2(DecayConfig(3.0), 1);
  auto sampled = EstimationProblem::from_strata(sample_stream(stream, cfg, model, h2), model.names());
  const std::vector<double> b{0.2, -0.5, 0.3};
  CHECK(loglik(sampled, b) == doctest::Approx(loglik(full, b)).epsilon(1e-12));

  EventStream big;
  std::vector<std::string> labels;
  for (int a = 0; a < 156; ++a) labels.push_back("e" + std::to_string(a));
  big.actors = ActorTable(labels);
  big.events.push_back(Hyperevent{0.0, 0, {1, 2, 3, 4, 5}, 0});
  HistoryState h3(DecayConfig(1.0), 1);
  CovariateModel m3({parse_covariate_spec("reciprocation")}, AttributeTable(big.actors, {}), 1);
  CHECK(code_of([&] { full_risk_set_problem(big, m3, h3); }) == ErrorCode::RiskSetTooLarge);
}

TEST_CASE("contribution report") {
  oracle::Gen g(11);
  auto base = random_problem(g, 300, 3, 5);
  // append an all-zero column
  EstimationProblem p({"a", "b", "c", "zero"});
  for (std::size_t s = 0; s < base.strata(); ++s) {
    std::vector<double> rows;
    for (std::size_t r = base.stratum_begin(s); r < base.stratum_end(s); ++r) {
      rows.insert(rows.end(), base.row(r), base.row(r) + 3);
      rows.push_back(0.0);
    }
    p.add_stratum(rows);
  }
  auto report = contribution_report(p);
  CHECK(report.loglik_null == doctest::Approx(-300.0 * std::log(6.0)));
  REQUIRE(report.rows.size() == 4);
  for (const auto& row : report.rows) {
    CHECK(row.over_null >= -1e-9);
    CHECK(row.in_full >= -1e-9);
  }
  CHECK(std::abs(report.rows[3].in_full) < 1e-9);
  CHECK(std::abs(report.rows[3].over_null) < 1e-9);
  // brute-force refit of each single-covariate model
  for (std::size_t c = 0; c < 3; ++c) {
    auto one = fit(base.select({c}));
    CHECK(report.rows[c].over_null == doctest::Approx(one.loglik - one.loglik_null));
  }
  std::ostringstream out;
  write_contribution_table(report, out);
  CHECK(out.str().find("over null model") != std::string::npos);
}

TEST_CASE("quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({1, 2, 3, 4}, 0.0) == 1.0);
  CHECK(quantile({1, 2, 3, 4}, 1.0) == 4.0);
  CHECK(quantile({4, 1, 3, 2}, 0.025) == doctest::Approx(1.075));
  CHECK(quantile({10, 20}, 0.975) == doctest::Approx(19.75));
}

TEST_CASE("resampling study") {
  GeneratorConfig gc;
  gc.actors = 10;
  gc.events = 150;
  gc.size_distribution = {{1, 0.6}, {2, 0.4}};
  gc.specs = {parse_covariate_spec("reciprocation"), parse_covariate_spec("rec_avg:z")};
  gc.beta = {1.0, 0.5};
  gc.decay = DecayConfig(20.0);
  gc.seed = 3;
  auto data = simulate(gc);
  CovariateModel model(gc.specs, data.attributes, 1);
  HistoryState h(gc.decay, 1);
  SamplerConfig cfg;
  cfg.k = 5;
  cfg.seed = 40;
  auto study = resample_study(data.stream, model, h, cfg, 6);
  CHECK(study.estimates.size() + study.failures.size() == 6);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& q = study.quantiles[c];
    for (std::size_t k = 1; k < 5; ++k) CHECK(q[k] >= q[k - 1]);
  }
  std::ostringstream out;
  write_quantile_table(study, out);
  CHECK(out.str().find("97.5%") != std::string::npos);

  // identical seeds give zero-width ranges
  ResampleStudy same;
  std::vector<double> col;
  for (int r = 0; r < 2; ++r) {
    HistoryState copy = h;
    SamplerConfig c2 = cfg;
    auto strata = sample_stream(data.stream, c2, model, copy);
    col.push_back(fit(EstimationProblem::from_strata(strata, model.names())).beta[0]);
  }
  CHECK(quantile(col, 0.0) == quantile(col, 1.0));
  CHECK(code_of([&] { resample_study(data.stream, model, h, cfg, 1); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("result tables") {
  oracle::Gen g(12);
  auto p = random_problem(g, 100, 2, 4);
  auto r = fit(p);
  std::ostringstream text, csv;
  write_result_table(r, text, {{"seed", "7"}});
  write_result_csv(r, csv, {{"seed", "7"}});
  CHECK(text.str().find("# seed=7") == 0);
  CHECK(text.str().find("AIC") != std::string::npos);
  CHECK(text.str().find("BIC") != std::string::npos);
  CHECK(text.str().find("Log likelihood") != std::string::npos);
  CHECK(csv.str().find("NAME,ESTIMATE,SE,Z,P") != std::string::npos);
  CHECK(stars(0.0001) == "***");
  CHECK(stars(0.005) == "**");
  CHECK(stars(0.04) == "*");
  CHECK(stars(0.2).empty());
}

TEST_CASE("malformed sample files") {
  auto read = [](const std::string& s) {
    std::istringstream in(s);
    return read_sample_csv(in);
  };
  CHECK(code_of([&] { read("A,B\n"); }) == ErrorCode::MalformedInput);
  CHECK(code_of([&] { read("STRATUM,IS_CASE,SENDER,RECEIVERS,x\n0,0,a,b,1\n0,0,a,c,2\n"); }) ==
        ErrorCode::MalformedInput);
  CHECK(code_of([&] { read("STRATUM,IS_CASE,SENDER,RECEIVERS,x\n0,1,a,b,zz\n"); }) == ErrorCode::MalformedInput);
  auto p = read("STRATUM,IS_CASE,SENDER,RECEIVERS,x\n0,0,a,c,2\n0,1,a,b,1\n");
  CHECK(p.row(0)[0] == 1.0);
}
