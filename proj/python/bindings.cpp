#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "rhem/cli.hpp"
#include "rhem/core_model.hpp"
#include "rhem/covariates.hpp"
#include "rhem/error.hpp"
#include "rhem/estimator.hpp"
#include "rhem/generator.hpp"
#include "rhem/history.hpp"
#include "rhem/sampler.hpp"

namespace py = pybind11;
using namespace rhem;

namespace {

std::vector<CovariateSpec> parse_specs(const std::vector<std::string>& text) {
  std::vector<CovariateSpec> out;
  for (const auto& s : text) out.push_back(parse_covariate_spec(s));
  return out;
}

std::size_t order_for(const std::vector<CovariateSpec>& specs, std::size_t max_order) {
  if (max_order > 0) return max_order;
  std::size_t order = 1;
  for (const auto& s : specs)
    if (is_order_kind(s.kind)) order = std::max(order, s.order);
  return order;
}

/// Stacks sampled rows into (X, offsets) with offsets[s]..offsets[s+1] the rows of stratum s.
py::tuple to_arrays(const std::vector<SampledStratum>& strata, std::size_t dim) {
  std::size_t rows = 0;
  for (const auto& s : strata) rows += s.rows();
  py::array_t<double> x({rows, dim});
  py::array_t<std::size_t> offsets(strata.size() + 1);
  auto xv = x.mutable_unchecked<2>();
  auto ov = offsets.mutable_unchecked<1>();
  std::size_t r = 0;
  ov(0) = 0;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    for (std::size_t row = 0; row < strata[s].rows(); ++row, ++r)
      for (std::size_t c = 0; c < dim; ++c) xv(r, c) = strata[s].covariates[row * dim + c];
    ov(s + 1) = r;
  }
  return py::make_tuple(x, offsets);
}

EstimationProblem from_arrays(py::array_t<double, py::array::c_style | py::array::forcecast> x,
                              py::array_t<std::size_t, py::array::c_style | py::array::forcecast> offsets,
                              std::vector<std::string> names) {
  if (x.ndim() != 2 || static_cast<std::size_t>(x.shape(1)) != names.size())
    throw Error(ErrorCode::DimensionMismatch, "X must have one column per name");
  EstimationProblem p(std::move(names));
  auto ov = offsets.unchecked<1>();
  const std::size_t dim = p.dim();
  for (py::ssize_t s = 0; s + 1 < ov.shape(0); ++s) {
    if (ov(s + 1) <= ov(s) || ov(s + 1) > static_cast<std::size_t>(x.shape(0)))
      throw Error(ErrorCode::MalformedInput, "offsets must increase within the row count");
    p.add_stratum({x.data() + ov(s) * dim, (ov(s + 1) - ov(s)) * dim});
  }
  return p;
}

py::dict result_dict(const EstimationResult& r) {
  py::dict d;
  d["names"] = r.names;
  d["beta"] = r.beta;
  d["se"] = r.se;
  d["z"] = r.z;
  d["p"] = r.p;
  d["loglik"] = r.loglik;
  d["loglik_null"] = r.loglik_null;
  d["aic"] = r.aic;
  d["bic"] = r.bic;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["ridge_applied"] = r.ridge_applied;
  d["strata"] = r.strata;
  d["observations"] = r.observations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Relational hyperevent models: covariates, case-control sampling, estimation and simulation.";

  static py::exception<Error> rhem_error(m, "RhemError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(rhem_error, e.what());
    }
  });

  py::class_<EventStream>(m, "EventStream")
      .def_property_readonly("actors", [](const EventStream& s) { return s.actors.labels(); })
      .def("__len__", [](const EventStream& s) { return s.events.size(); })
      .def("events",
           [](const EventStream& s) {
             py::list out;
             for (const auto& e : s.events) {
               std::vector<std::string> J;
               for (auto a : e.receivers) J.push_back(s.actors.label(a));
               out.append(py::make_tuple(e.time, s.actors.label(e.sender), J));
             }
             return out;
           },
           "List of (time, sender, receivers) tuples.")
      .def("to_csv", [](const EventStream& s) {
        std::ostringstream out;
        write_events(s, out);
        return out.str();
      });

  py::class_<AttributeTable>(m, "AttributeTable")
      .def_property_readonly("actors", [](const AttributeTable& t) { return t.actors().labels(); })
      .def_property_readonly("columns",
                             [](const AttributeTable& t) {
                               std::vector<std::string> names;
                               for (const auto& c : t.columns()) names.push_back(c.name);
                               return names;
                             })
      .def("to_csv", [](const AttributeTable& t) {
        std::ostringstream out;
        write_attributes(t, out);
        return out.str();
      });

  m.def("read_events", [](const std::string& path) { return parse_events(path); }, py::arg("path"));
  m.def("parse_events",
        [](const std::string& text) {
          std::istringstream in(text);
          return parse_events(in);
        },
        py::arg("text"));
  m.def("read_attributes", [](const std::string& path) { return parse_attributes(path); }, py::arg("path"));

  m.def("stream_stats",
        [](const EventStream& s) {
          const auto h = stream_stats(s);
          py::dict d;
          d["counts"] = h.counts;
          d["events"] = h.events;
          d["mean_receivers"] = h.mean_receivers;
          d["max_size"] = h.max_size;
          return d;
        },
        py::arg("stream"), "Receiver-set size histogram.");

  m.def("covariate_names",
        [](const std::vector<std::string>& specs) {
          std::vector<std::string> out;
          for (const auto& s : parse_specs(specs)) out.push_back(s.name());
          return out;
        },
        py::arg("specs"));

  m.def("observed_covariates",
        [](const EventStream& s, const AttributeTable& attrs, const std::vector<std::string>& specs,
           double half_life, std::size_t max_order) {
          const auto parsed = parse_specs(specs);
          const auto order = order_for(parsed, max_order);
          CovariateModel model(parsed, attrs, order);
          HistoryState h(DecayConfig(half_life), order);
          const auto strata = observed_covariates(s, model, h);
          return py::array_t<double>(to_arrays(strata, model.size())[0]);
        },
        py::arg("stream"), py::arg("attributes"), py::arg("specs"), py::arg("half_life"), py::arg("max_order") = 0,
        "Covariates of every observed event, one row per event.");

  m.def("sample",
        [](const EventStream& s, const AttributeTable& attrs, const std::vector<std::string>& specs,
           double half_life, std::size_t k, std::uint64_t seed, std::size_t max_order) {
          const auto parsed = parse_specs(specs);
          const auto order = order_for(parsed, max_order);
          CovariateModel model(parsed, attrs, order);
          HistoryState h(DecayConfig(half_life), order);
          SamplerConfig cfg;
          cfg.k = k;
          cfg.seed = seed;
          cfg.policy = s.policy;
          return to_arrays(sample_stream(s, cfg, model, h), model.size());
        },
        py::arg("stream"), py::arg("attributes"), py::arg("specs"), py::arg("half_life"), py::arg("k") = 100,
        py::arg("seed") = 0, py::arg("max_order") = 0,
        "Case-control strata as (X, offsets); the first row of each stratum is the observed event.");

  m.def("loglik",
        [](py::array_t<double> x, py::array_t<std::size_t> offsets, std::vector<std::string> names,
           std::vector<double> beta) { return loglik(from_arrays(x, offsets, std::move(names)), beta); },
        py::arg("X"), py::arg("offsets"), py::arg("names"), py::arg("beta"));

  m.def("fit",
        [](py::array_t<double> x, py::array_t<std::size_t> offsets, std::vector<std::string> names, double tol,
           std::size_t max_iter, std::size_t threads) {
          FitOptions o;
          o.tol = tol;
          o.max_iter = max_iter;
          o.threads = threads;
          auto problem = from_arrays(x, offsets, std::move(names));
          py::gil_scoped_release release;
          auto result = fit(problem, o);
          py::gil_scoped_acquire acquire;
          return result_dict(result);
        },
        py::arg("X"), py::arg("offsets"), py::arg("names"), py::arg("tol") = 1e-8, py::arg("max_iter") = 100,
        py::arg("threads") = 1, "Newton-Raphson fit of the stratified conditional logit.");

  m.def("simulate",
        [](std::size_t actors, std::size_t events, const std::vector<std::string>& specs,
           const std::vector<double>& beta, const std::map<std::size_t, double>& sizes, double half_life,
           std::uint64_t seed) {
          GeneratorConfig g;
          g.actors = actors;
          g.events = events;
          g.specs = parse_specs(specs);
          g.beta = beta;
          g.size_distribution = sizes;
          g.decay = DecayConfig(half_life);
          g.seed = seed;
          auto data = simulate(g);
          return py::make_tuple(std::move(data.stream), std::move(data.attributes));
        },
        py::arg("actors"), py::arg("events"), py::arg("specs"), py::arg("beta"), py::arg("sizes"),
        py::arg("half_life") = 1.0, py::arg("seed") = 0, "Returns (stream, attributes).");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = run_cli(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a command line; returns (exit code, stdout, stderr).");
}
