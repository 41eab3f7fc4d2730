#include "rhem/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "rhem/core_model.hpp"
#include "rhem/covariates.hpp"
#include "rhem/error.hpp"
#include "rhem/estimator.hpp"
#include "rhem/generator.hpp"
#include "rhem/history.hpp"
#include "rhem/run_config.hpp"
#include "rhem/sampler.hpp"

namespace rhem {

namespace {

/// Output stream for `path`, or `fallback` when empty or "-".
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw Error(ErrorCode::Io, "cannot write " + path);
    stream_ = &file_;
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

struct Inputs {
  AttributeTable attributes;
  EventStream stream;
  CovariateModel model;
  HistoryState initial;
};

std::vector<CovariateSpec> load_specs(const RunConfig& cfg) {
  std::vector<CovariateSpec> specs;
  if (!cfg.covariates.empty()) specs = parse_covariate_specs_file(cfg.covariates);
  for (const auto& s : cfg.specs) specs.push_back(parse_covariate_spec(s));
  return specs;
}

AttributeTable load_attributes(const RunConfig& cfg) {
  return cfg.attributes.empty() ? AttributeTable() : parse_attributes(cfg.attributes);
}

Inputs load_inputs(const RunConfig& cfg, std::ostream& err, bool need_model = true) {
  if (cfg.events.empty()) throw Error(ErrorCode::InvalidConfig, "--events is required");
  Inputs in;
  in.attributes = load_attributes(cfg);
  WarningSink warn = [&err](std::string_view m) { err << "warning: " << m << '\n'; };

  std::optional<HistoryState> loaded;
  ActorTable actors;
  bool fixed_actors = false;
  if (!cfg.load_state.empty()) {
    std::ifstream f(cfg.load_state, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + cfg.load_state);
    loaded = HistoryState::load(f, actors);
    fixed_actors = true;
    if (in.attributes.actors().size() && !(in.attributes.actors() == actors))
      throw Error(ErrorCode::ConfigMismatch, "saved history and attribute file list different actors");
    if (loaded->decay().half_life() != cfg.half_life)
      warn("saved history uses half-life " + format_number(loaded->decay().half_life()) + "; using it");
  } else if (in.attributes.actors().size()) {
    actors = in.attributes.actors();
    fixed_actors = true;
  }

  EventFileOptions opts;
  opts.policy.exclude_loops = cfg.exclude_loops;
  opts.actors = fixed_actors ? &actors : nullptr;
  opts.warn = warn;
  opts.first_index = loaded ? loaded->position() : 0;
  in.stream = parse_events(cfg.events, opts);
  if (!cfg.eligibility.empty()) {
    std::ifstream f(cfg.eligibility);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + cfg.eligibility);
    in.stream.policy.eligible = parse_eligibility(f, in.stream.actors);
  }
  if (!need_model) return in;

  const auto specs = load_specs(cfg);
  if (specs.empty()) throw Error(ErrorCode::InvalidConfig, "no covariates given (--covariates or --spec)");
  if (!in.attributes.actors().size()) in.attributes = AttributeTable(in.stream.actors, {});
  std::size_t order = cfg.max_order;
  if (loaded) order = loaded->max_order();
  if (order == 0) {
    order = 1;
    for (const auto& s : specs)
      if (is_order_kind(s.kind)) order = std::max(order, s.order);
  }
  in.model = CovariateModel(specs, in.attributes, order);
  in.initial = loaded ? std::move(*loaded) : HistoryState(DecayConfig(cfg.half_life), order, warn);
  return in;
}

Metadata metadata(const RunConfig& cfg, const Inputs* in, std::uint64_t seed) {
  Metadata meta;
  meta.emplace_back("seed", std::to_string(seed));
  meta.emplace_back("config_hash", cfg.hash_hex());
  if (in) {
    meta.emplace_back("k", std::to_string(cfg.k));
    meta.emplace_back("half_life", format_number(in->initial.decay().half_life()));
    meta.emplace_back("max_order", std::to_string(in->initial.max_order()));
    std::string specs;
    for (const auto& s : in->model.specs()) specs += (specs.empty() ? "" : " ") + s.to_string();
    meta.emplace_back("covariates", specs);
  }
  return meta;
}

void save_state(const RunConfig& cfg, const HistoryState& state, const ActorTable& actors) {
  if (cfg.save_state.empty()) return;
  std::ofstream f(cfg.save_state, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + cfg.save_state);
  state.save(f, actors);
}

SamplerConfig sampler_config(const RunConfig& cfg, const Inputs& in) {
  SamplerConfig s;
  s.k = cfg.k;
  s.seed = cfg.seed;
  s.policy = in.stream.policy;
  return s;
}

// ---- subcommands ------------------------------------------------------------

void cmd_stats(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto in = load_inputs(cfg, err, false);
  Sink sink(cfg.out, out);
  for (const auto& [k, v] : metadata(cfg, nullptr, cfg.seed)) *sink << "# " << k << '=' << v << '\n';
  write_size_table(stream_stats(in.stream), *sink);
}

void cmd_covariates(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto in = load_inputs(cfg, err);
  HistoryState state = in.initial;
  const auto strata = observed_covariates(in.stream, in.model, state);
  Sink sink(cfg.out, out);
  write_covariate_csv(strata, in.model.names(), metadata(cfg, &in, cfg.seed), *sink);
  save_state(cfg, state, in.stream.actors);
}

void cmd_sample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  auto in = load_inputs(cfg, err);
  const std::size_t reps = std::max<std::size_t>(1, cfg.replications);
  if (reps > 1) {
    if (cfg.out.empty() || cfg.out == "-")
      throw Error(ErrorCode::InvalidConfig, "--replications > 1 writes one file per seed; give --out <directory>");
    std::filesystem::create_directories(cfg.out);
  }
  HistoryState final_state = in.initial;
  for (std::size_t r = 0; r < reps; ++r) {
    SamplerConfig s = sampler_config(cfg, in);
    s.seed = cfg.seed + r;
    HistoryState state = in.initial;
    const auto strata = sample_stream(in.stream, s, in.model, state);
    auto meta = metadata(cfg, &in, s.seed);
    if (reps > 1) meta.emplace_back("replication", std::to_string(r));
    const std::string path =
        reps > 1 ? (std::filesystem::path(cfg.out) / ("sample_" + std::to_string(s.seed) + ".csv")).string() : cfg.out;
    Sink sink(path, out);
    write_sample_csv(strata, in.model.names(), in.stream.actors, meta, *sink);
    final_state = std::move(state);
  }
  save_state(cfg, final_state, in.stream.actors);
}

std::string meta_value(const Metadata& meta, const std::string& key) {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  return "";
}

/// Problem from `--input`, or sampled from the events when no input is given.
EstimationProblem load_problem(const RunConfig& cfg, std::ostream& err, Metadata& meta) {
  if (!cfg.input.empty()) {
    std::ifstream f(cfg.input);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + cfg.input);
    Metadata file_meta;
    auto problem = read_sample_csv(f, &file_meta);
    const auto recorded = meta_value(file_meta, "config_hash");
    if (!cfg.events.empty() && !recorded.empty() && recorded != cfg.hash_hex())
      throw Error(ErrorCode::ConfigMismatch, cfg.input + " was sampled under config " + recorded +
                                                 ", the current configuration hashes to " + cfg.hash_hex());
    meta = file_meta;
    meta.emplace_back("input", cfg.input);
    return problem;
  }
  auto in = load_inputs(cfg, err);
  HistoryState state = in.initial;
  const auto strata = sample_stream(in.stream, sampler_config(cfg, in), in.model, state);
  save_state(cfg, state, in.stream.actors);
  meta = metadata(cfg, &in, cfg.seed);
  return EstimationProblem::from_strata(strata, in.model.names());
}

void write_resample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.replications < 2) throw Error(ErrorCode::InvalidConfig, "--replications must be at least 2");
  auto in = load_inputs(cfg, err);
  const auto study = resample_study(in.stream, in.model, in.initial, sampler_config(cfg, in), cfg.replications, cfg.fit);
  auto meta = metadata(cfg, &in, cfg.seed);
  meta.emplace_back("replications", std::to_string(cfg.replications));
  write_quantile_table(study, out, meta);
}

void cmd_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Metadata meta;
  const auto problem = load_problem(cfg, err, meta);
  const auto result = fit(problem, cfg.fit);
  Sink sink(cfg.out, out);
  write_result_table(result, *sink, meta);
  if (!cfg.csv.empty()) {
    Sink csv(cfg.csv, out);
    write_result_csv(result, *csv, meta);
  }
  if (cfg.contrib) {
    *sink << '\n';
    write_contribution_table(contribution_report(problem, cfg.fit), *sink);
  }
  if (cfg.replications >= 2) {
    *sink << '\n';
    write_resample(cfg, *sink, err);
  }
}

void cmd_contrib(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Metadata meta;
  const auto problem = load_problem(cfg, err, meta);
  Sink sink(cfg.out, out);
  write_contribution_table(contribution_report(problem, cfg.fit), *sink, meta);
}

void cmd_resample(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  Sink sink(cfg.out, out);
  write_resample(cfg, *sink, err);
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  GeneratorConfig g;
  g.actors = cfg.actors;
  g.events = cfg.sim_events;
  g.seed = cfg.seed;
  g.rate = cfg.rate;
  g.decay = DecayConfig(cfg.half_life);
  if (!cfg.beta.empty()) {
    std::ifstream f(cfg.beta);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + cfg.beta);
    std::tie(g.specs, g.beta) = parse_beta(f);
  }
  if (!cfg.size_dist.empty()) {
    std::ifstream f(cfg.size_dist);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + cfg.size_dist);
    g.size_distribution = parse_size_distribution(f);
  }
  if (!cfg.attributes.empty()) g.attributes = parse_attributes(cfg.attributes);
  const auto data = simulate(g);
  Sink sink(cfg.out, out);
  *sink << "# seed=" << cfg.seed << '\n' << "# config_hash=" << cfg.hash_hex() << '\n';
  write_events(data.stream, *sink);
  if (!cfg.attributes_out.empty()) {
    Sink attrs(cfg.attributes_out, out);
    write_attributes(data.attributes, *attrs);
  }
}

// ---- option wiring ----------------------------------------------------------

/// Options bound to a scratch RunConfig; only flags actually given are
/// copied over the config file values.
struct Overrides {
  RunConfig flags;
  std::string config_path;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> copies;

  template <class T>
  void add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    auto* opt = app->add_option(name, flags.*field, help);
    copies.emplace_back(opt, [this, field](RunConfig& c) { c.*field = flags.*field; });
  }
  template <class T>
  void add_fit(CLI::App* app, const std::string& name, T FitOptions::*field, const std::string& help) {
    auto* opt = app->add_option(name, flags.fit.*field, help);
    copies.emplace_back(opt, [this, field](RunConfig& c) { c.fit.*field = flags.fit.*field; });
  }
  void flag(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help) {
    auto* opt = app->add_flag(name, flags.*field, help);
    copies.emplace_back(opt, [this, field](RunConfig& c) { c.*field = flags.*field; });
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::load(config_path);
    for (const auto& [opt, copy] : copies)
      if (opt->count() > 0) copy(cfg);
    return cfg;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "Key-value config file; flags override its values");
  o.add(app, "--out", &RunConfig::out, "Output file (default: stdout)");
  o.add(app, "--seed", &RunConfig::seed, "Random seed");
  o.add(app, "--half-life", &RunConfig::half_life, "Decay half-life in event-time units (default 604800)");
}

void add_data(CLI::App* app, Overrides& o, bool model) {
  o.add(app, "--events", &RunConfig::events, "Events CSV (TIME,SENDER,RECEIVERS)");
  o.add(app, "--attributes", &RunConfig::attributes, "Attributes CSV (ACTOR,<name>:<num|cat>,...)");
  o.add(app, "--eligibility", &RunConfig::eligibility, "Per-sender eligible receivers (SENDER,R1;R2;...)");
  if (!model) return;
  o.add(app, "--covariates", &RunConfig::covariates, "Covariate spec file");
  o.add(app, "--spec", &RunConfig::specs, "Inline covariate spec (repeatable)");
  o.add(app, "--max-order", &RunConfig::max_order, "Largest tracked receiver-subset order");
  o.add(app, "--load-state", &RunConfig::load_state, "Continue from a saved history");
  o.add(app, "--save-state", &RunConfig::save_state, "Save the history after the last event");
  o.add(app, "--k", &RunConfig::k, "Controls per event (default 100)");
  o.add(app, "--replications", &RunConfig::replications, "Number of sampling replications");
  o.add_fit(app, "--threads", &FitOptions::threads, "Worker threads");
}

void add_fit(CLI::App* app, Overrides& o) {
  o.add(app, "--input", &RunConfig::input, "Sampled CSV written by `rhem sample`");
  o.add_fit(app, "--tol", &FitOptions::tol, "Gradient tolerance");
  o.add_fit(app, "--max-iter", &FitOptions::max_iter, "Newton iteration cap");
  o.add_fit(app, "--ridge", &FitOptions::ridge, "Ridge added to a singular information matrix");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relational hyperevent models: covariates, case-control sampling and estimation", "rhem"};
  app.require_subcommand(1);
  Overrides o;

  auto* stats = app.add_subcommand("stats", "Receiver-set size histogram");
  add_common(stats, o);
  add_data(stats, o, false);

  auto* covariates = app.add_subcommand("covariates", "Covariates of the observed events");
  add_common(covariates, o);
  add_data(covariates, o, true);

  auto* sample = app.add_subcommand("sample", "Case-control sample with covariates");
  add_common(sample, o);
  add_data(sample, o, true);

  auto* estimate = app.add_subcommand("estimate", "Fit the conditional partial likelihood");
  add_common(estimate, o);
  add_data(estimate, o, true);
  add_fit(estimate, o);
  o.add(estimate, "--csv", &RunConfig::csv, "Also write NAME,ESTIMATE,SE,Z,P to this file");
  o.flag(estimate, "--contrib", &RunConfig::contrib, "Append the log-likelihood contribution report");

  auto* contrib = app.add_subcommand("contrib", "Per-covariate log-likelihood contributions");
  add_common(contrib, o);
  add_data(contrib, o, true);
  add_fit(contrib, o);

  auto* resample = app.add_subcommand("resample", "Quantiles of estimates over resampled controls");
  add_common(resample, o);
  add_data(resample, o, true);
  add_fit(resample, o);

  auto* sim = app.add_subcommand("simulate", "Simulate events from known coefficients");
  add_common(sim, o);
  o.add(sim, "--actors", &RunConfig::actors, "Number of actors");
  o.add(sim, "--events", &RunConfig::sim_events, "Number of events");
  o.add(sim, "--beta", &RunConfig::beta, "Coefficient file: `<spec> <value>` per line");
  o.add(sim, "--size-dist", &RunConfig::size_dist, "Receiver-size distribution: `<size>,<probability>` per line");
  o.add(sim, "--rate", &RunConfig::rate, "Event rate (exponential inter-event times)");
  o.add(sim, "--attributes", &RunConfig::attributes, "Attribute values to use instead of random binary ones");
  o.add(sim, "--attributes-out", &RunConfig::attributes_out, "Write the attribute table here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const RunConfig cfg = o.resolve();
    if (*stats) cmd_stats(cfg, out, err);
    else if (*covariates) cmd_covariates(cfg, out, err);
    else if (*sample) cmd_sample(cfg, out, err);
    else if (*estimate) cmd_estimate(cfg, out, err);
    else if (*contrib) cmd_contrib(cfg, out, err);
    else if (*resample) cmd_resample(cfg, out, err);
    else if (*sim) cmd_simulate(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace rhem
