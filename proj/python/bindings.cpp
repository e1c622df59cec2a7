#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qsd/analysis.hpp"
#include "qsd/commands.hpp"
#include "qsd/config.hpp"
#include "qsd/engine.hpp"
#include "qsd/errors.hpp"
#include "qsd/oracle.hpp"
#include "qsd/resampling.hpp"

namespace py = pybind11;

namespace {

py::list as_rows(const std::vector<qsd::Particle>& particles) {
  py::list out;
  for (const auto& p : particles) out.append(py::make_tuple(p.state, p.weight));
  return out;
}

std::vector<qsd::Particle> from_rows(const std::vector<std::pair<qsd::StateCode, double>>& rows) {
  std::vector<qsd::Particle> out;
  out.reserve(rows.size());
  for (const auto& [s, w] : rows) out.push_back({s, w, qsd::kUnscheduled});
  return out;
}

py::dict oracle_dict(const qsd::OracleResult& r) {
  py::dict d;
  d["u"] = r.u;
  d["alpha"] = r.alpha;
  d["method"] = r.method;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SMC sampling of limiting conditional distributions";

  // Translators run newest first, so the base class goes in before its subclasses.
  const auto base = py::register_exception<qsd::Error>(m, "QsdError", PyExc_RuntimeError);
  py::register_exception<qsd::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<qsd::RegimeError>(m, "RegimeError", base.ptr());
  py::register_exception<qsd::UnsupportedOracle>(m, "UnsupportedOracle", base.ptr());
  py::register_exception<qsd::AllAbsorbed>(m, "AllAbsorbed", base.ptr());
  py::register_exception<qsd::RegionExtinct>(m, "RegionExtinct", base.ptr());

  m.def("encode_immunity", [](std::uint64_t i, std::uint64_t r) { return qsd::encode({i, r}); });
  m.def("decode_immunity", [](qsd::StateCode c) {
    const auto s = qsd::decode_immunity(c);
    return py::make_tuple(s.infected, s.recovered);
  });

  m.def(
      "run_config",
      [](const std::string& text, std::size_t replications, std::uint64_t seed) {
        const auto config = qsd::parse_config(text);
        const auto setup = config.setup();
        const auto logs = qsd::run_replications(setup, seed, replications, 1);
        py::dict out;
        py::list failures;
        std::vector<qsd::RunLog> good;
        std::size_t events = 0;
        for (const auto& log : logs) {
          events += log.resample_times.size();
          if (log.ok()) {
            good.push_back(log);
          } else {
            failures.append(log.failure->kind);
          }
        }
        out["failures"] = failures;
        out["resample_events"] = events;
        if (!good.empty()) {
          const auto pooled = qsd::collect_samples(good);
          out["histogram"] = pooled;
          out["alpha_hat"] = qsd::decay_estimate(pooled, setup.model);
        }
        return out;
      },
      py::arg("config_json"), py::arg("replications") = 1, py::arg("seed") = 1,
      "Run an experiment config (JSON text) and return the pooled histogram.");

  m.def("normalize_config", [](const std::string& text) { return qsd::serialize_config(qsd::parse_config(text)); },
        "Parse, validate and re-serialize a config.");

  m.def(
      "oracle_config", [](const std::string& text) { return oracle_dict(qsd::compute_oracle(qsd::parse_config(text))); },
      py::arg("config_json"));

  m.def(
      "pure_death_lcd",
      [](const std::vector<double>& rates, std::uint64_t start) { return oracle_dict(qsd::pure_death_lcd(rates, start)); },
      py::arg("rates"), py::arg("start"));
  m.def(
      "wf_lcd",
      [](std::uint64_t d, double s1, double s2) { return oracle_dict(qsd::wf_lcd_power_iteration(d, {s1, s2})); },
      py::arg("population"), py::arg("s1") = 0.0, py::arg("s2") = 0.0);
  m.def("ti_alpha", &qsd::ti_alpha, py::arg("beta"), py::arg("gamma"), py::arg("delta"));
  m.def("tv_distance", &qsd::tv_distance);

  m.def(
      "combine_split",
      [](const std::vector<std::pair<qsd::StateCode, double>>& rows, bool proportional, std::uint64_t seed) {
        qsd::Rng rng(seed);
        const auto realloc =
            proportional ? qsd::Reallocation::ProportionalToWeight : qsd::Reallocation::UniformOverLocations;
        return as_rows(qsd::combine_split(from_rows(rows), realloc, rng));
      },
      py::arg("particles"), py::arg("proportional") = false, py::arg("seed") = 1,
      "Combine-split resampling of (state, weight) pairs.");
  m.def(
      "multinomial",
      [](const std::vector<std::pair<qsd::StateCode, double>>& rows, std::size_t count, std::uint64_t seed) {
        qsd::Rng rng(seed);
        return as_rows(qsd::multinomial(from_rows(rows), count, rng));
      },
      py::arg("particles"), py::arg("count"), py::arg("seed") = 1);
}
