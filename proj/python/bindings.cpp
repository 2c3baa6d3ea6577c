#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "rascache/attacks.hpp"
#include "rascache/harness.hpp"
#include "rascache/workloads.hpp"

namespace py = pybind11;
using namespace rascache;

namespace {

py::dict level_dict(const LevelStats& s) {
  py::dict d;
  d["accesses"] = s.accesses;
  d["hits"] = s.hits;
  d["misses"] = s.misses;
  d["miss_rate"] = s.miss_rate();
  d["fills"] = s.fills;
  d["bypassed_fills"] = s.bypassed_fills;
  d["evictions"] = s.evictions;
  const NoFillSplitReport p = split_percentages(s.nofill);
  py::dict nf;
  nf["allocated"] = p.allocated;
  nf["never_cleared_pct"] = p.never_cleared;
  nf["cleared_by_shb_fetch_pct"] = p.cleared_by_shb_fetch;
  nf["cleared_by_nonspec_access_pct"] = p.cleared_by_nonspec_access;
  d["nofill"] = nf;
  return d;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["l1"] = level_dict(m.l1);
  d["l2"] = level_dict(m.l2);
  d["shb_emissions"] = m.shb.emissions;
  d["shb_dropped_full_mshr"] = m.shb.dropped_full_mshr;
  d["random_fill_fetches"] = m.random_fill_fetches;
  d["writebacks_to_memory"] = m.writebacks_to_memory;
  d["cycles"] = m.cycles_total;
  py::dict fills;
  for (std::size_t i = 0; i < kProvenanceCount; ++i)
    fills[py::str(std::string(to_string(static_cast<FillProvenance>(i))))] = m.fills_by_provenance[i];
  d["fills_by_provenance"] = fills;
  return d;
}

py::list matrix_rows(const TimingMatrix& m) {
  py::list rows;
  for (std::size_t r = 0; r < m.rows; ++r) {
    py::list row;
    for (std::size_t c = 0; c < m.cols; ++c) row.append(m.at(r, c));
    rows.append(row);
  }
  return rows;
}

TimingMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  TimingMatrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols) throw py::value_error("matrix rows must have equal length");
    for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  }
  return m;
}

py::dict attack_dict(const AttackResult& r) {
  py::dict d;
  d["attack"] = r.attack;
  d["guessed"] = r.verdict.guessed ? py::cast(*r.verdict.guessed) : py::none();
  d["best"] = r.verdict.best;
  d["correct"] = r.verdict.correct;
  d["separation"] = r.verdict.separation;
  d["truth"] = r.truth;
  d["defeated"] = r.defeated();
  d["scores"] = r.scores;
  d["matrix"] = matrix_rows(r.matrix);
  d["metrics"] = metrics_dict(r.metrics);
  return d;
}

AesKey key_from_hex(const std::string& hex) {
  if (hex.size() != 32) throw py::value_error("key must be 32 hex digits");
  AesKey k{};
  for (std::size_t i = 0; i < 16; ++i) k[i] = static_cast<std::uint8_t>(std::stoul(hex.substr(2 * i, 2), nullptr, 16));
  return k;
}

py::dict run_attack(const std::string& name, const DefenseMode& defense, std::uint64_t seed,
                    std::uint32_t trials, std::uint32_t secret, const std::string& key,
                    std::uint32_t target_byte, double threshold_z) {
  AttackParams p;
  p.defense = defense;
  p.seed = seed;
  p.trials = trials;
  p.threshold_z = threshold_z;
  const AesKey k = key_from_hex(key);
  AttackResult r;
  {
    py::gil_scoped_release release;
    if (name == "spectre-fr") r = run_spectre_fr(p, static_cast<std::uint8_t>(secret));
    else if (name == "spectre-pp") r = run_spectre_pp(p, static_cast<std::uint8_t>(secret));
    else if (name == "aes-pp") r = run_aes_pp(p, k, target_byte);
    else if (name == "aes-fr") r = run_aes_fr(p, k, target_byte);
    else if (name == "aes-evict-time") r = run_aes_evict_time(p, k);
    else if (name == "aes-collision") r = run_aes_collision(p, k);
    else throw py::value_error("unknown attack: " + name);
  }
  return attack_dict(r);
}

}  // namespace

PYBIND11_MODULE(_rascache, m) {
  m.doc() = "Discrete-event simulator for randomized-fill secure caches";
  m.attr("__version__") = kVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TraceParseError>(m, "TraceParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<DefenseMode>(m, "DefenseMode")
      .def_static("baseline", &DefenseMode::baseline)
      .def_static("sa_random", &DefenseMode::sa_random)
      .def_static("ras_spec", &DefenseMode::ras_spec, py::arg("rate"), py::arg("entries"), py::arg("window"))
      .def_static("ras_plus", &DefenseMode::ras_plus, py::arg("rate"), py::arg("entries"), py::arg("window"))
      .def_static("random_fill", &DefenseMode::random_fill, py::arg("window"))
      .def_readwrite("rate", &DefenseMode::rate_cycles)
      .def_readwrite("entries", &DefenseMode::shb_entries)
      .def_readwrite("window", &DefenseMode::window_lines)
      .def_readwrite("nofillclear", &DefenseMode::nofillclear)
      .def_property_readonly("kind", [](const DefenseMode& d) { return std::string(to_string(d.kind)); })
      .def("label", &DefenseMode::label)
      .def("validate", &DefenseMode::validate)
      .def("__repr__", [](const DefenseMode& d) { return "<DefenseMode " + d.label() + ">"; });

  m.def("attack_names", &attack_names);
  m.def("run_attack", &run_attack, py::arg("name"), py::arg("defense"), py::arg("seed") = 1,
        py::arg("trials") = 64, py::arg("secret") = 30,
        py::arg("key") = "000102030405060708090a0b0c0d0e0f", py::arg("target_byte") = 0,
        py::arg("threshold_z") = 4.0);

  m.def(
      "recover",
      [](const std::vector<double>& scores, const std::string& direction, double threshold_z) {
        if (direction != "min" && direction != "max") throw py::value_error("direction must be 'min' or 'max'");
        const RecoveryVerdict v =
            recover(scores, direction == "min" ? Direction::Min : Direction::Max, threshold_z);
        py::dict d;
        d["guessed"] = v.guessed ? py::cast(*v.guessed) : py::none();
        d["best"] = v.best;
        d["separation"] = v.separation;
        return d;
      },
      py::arg("scores"), py::arg("direction"), py::arg("threshold_z") = 4.0);

  m.def(
      "generate_trace",
      [](std::size_t n, std::uint64_t seed) {
        std::ostringstream os;
        write_trace(os, generate_trace(LocalityModel{}, n, seed));
        return os.str();
      },
      py::arg("n"), py::arg("seed") = 1, "Trace text for the default locality model.");

  m.def(
      "replay",
      [](const std::string& trace_text, const DefenseMode& defense, std::uint64_t seed) {
        const Trace t = parse_trace(trace_text);
        Metrics mt;
        {
          py::gil_scoped_release release;
          mt = replay(t, defense, {}, seed);
        }
        return metrics_dict(mt);
      },
      py::arg("trace"), py::arg("defense"), py::arg("seed") = 1);

  m.def(
      "config_hash", [](const std::string& json) { return parse_config(json).hash(); },
      py::arg("config_json"));

  m.def(
      "simulate",
      [](const std::string& json) {
        const ExperimentConfig cfg = parse_config(json);
        RunOutcome out;
        {
          py::gil_scoped_release release;
          out = simulate(cfg);
        }
        py::dict d;
        d["exit_code"] = out.exit_code;
        d["config_hash"] = cfg.hash();
        d["metrics"] = metrics_dict(out.metrics);
        d["attack"] = out.attack ? py::object(attack_dict(*out.attack)) : py::none();
        return d;
      },
      py::arg("config_json"));

  m.def(
      "run_experiment",
      [](const std::string& json, const std::string& output_dir) {
        ExperimentConfig cfg = parse_config(json);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        RunOutcome out;
        {
          py::gil_scoped_release release;
          out = run_experiment(cfg);
        }
        py::dict d;
        d["exit_code"] = out.exit_code;
        d["files"] = out.files;
        return d;
      },
      py::arg("config_json"), py::arg("output_dir") = "");

  m.def(
      "render_heatmap",
      [](const std::vector<std::vector<double>>& rows, const std::string& config_hash,
         std::uint64_t seed) { return render_heatmap(matrix_from_rows(rows), {config_hash, seed}); },
      py::arg("matrix"), py::arg("config_hash") = "", py::arg("seed") = 0);
}
