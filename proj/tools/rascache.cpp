// Command line front end: run-attack, run-trace, sweep, render.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rascache/harness.hpp"

using namespace rascache;

namespace {

enum Exit { kOk = 0, kUsage = 1, kLeak = 2, kIo = 3 };

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  unsigned parallel = 1;
};

ExperimentConfig load(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config", "required");
  ExperimentConfig cfg = load_config_file(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.output_dir = *g.out;
  return cfg;
}

std::string sep_str(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return std::isinf(s) ? "inf" : buf;
}

int run_attack(const Globals& g) {
  const auto cfg = load(g);
  if (!cfg.is_attack()) throw ConfigError("scenario", "run-attack needs an attack scenario");
  const auto o = run_experiment(cfg);
  const auto& v = o.attack->verdict;
  std::cout << o.attack->attack << ' ' << cfg.defense.label() << " guessed="
            << (v.guessed ? std::to_string(*v.guessed) : "none") << " correct=" << v.correct
            << " separation=" << sep_str(v.separation) << " -> " << cfg.output_dir << "\n";
  if (o.exit_code == kLeak) std::cerr << "leak guard: defense expected to defeat this attack\n";
  return o.exit_code;
}

int run_trace(const Globals& g, const std::string& trace) {
  auto cfg = load(g);
  if (!trace.empty()) cfg.trace_path = trace;
  if (cfg.is_attack()) throw ConfigError("scenario", "run-trace needs scenario \"trace\"");
  const auto o = run_experiment(cfg);
  const auto s1 = split_percentages(o.metrics.l1.nofill);
  std::printf("%s L1 miss %.4f L2 miss %.4f no-fill L1 never/shb/nonspec %.1f/%.1f/%.1f -> %s\n",
              cfg.defense.label().c_str(), o.metrics.l1.miss_rate(), o.metrics.l2.miss_rate(),
              s1.never_cleared, s1.cleared_by_shb_fetch, s1.cleared_by_nonspec_access,
              cfg.output_dir.c_str());
  return kOk;
}

int run_sweep(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config", "required");
  auto configs = parse_sweep(read_file(g.config));
  if (g.seed)
    for (auto& c : configs) c.seed = *g.seed;
  const std::string dir = g.out.value_or(configs.front().output_dir);
  const auto rows = sweep(configs, g.parallel);
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / "sweep.csv").string();
  write_file(path, sweep_csv(rows));
  std::cout << rows.size() << " rows -> " << path << "\n";
  return kOk;
}

Provenance provenance_of(const std::string& csv) {
  Provenance p;
  const auto nl = csv.find('\n');
  const std::string first = csv.substr(0, nl);
  if (first.rfind("#", 0) != 0) return p;
  if (const auto c = first.find("config="); c != std::string::npos)
    p.config_hash = first.substr(c + 7, first.find(' ', c) - c - 7);
  if (const auto s = first.find("seed="); s != std::string::npos)
    p.seed = std::stoull(first.substr(s + 5));
  return p;
}

int render(const Globals& g, const std::string& input) {
  const std::string csv = read_file(input);
  const auto m = parse_matrix_csv(csv);
  std::string path = g.out.value_or(std::filesystem::path(input).parent_path().string());
  if (std::filesystem::path(path).extension() != ".svg") {
    if (!path.empty()) std::filesystem::create_directories(path);
    path = (std::filesystem::path(path) / "heatmap.svg").string();
  }
  write_file(path, render_heatmap(m, provenance_of(csv)));
  std::cout << m.rows << "x" << m.cols << " -> " << path << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rascache: secure-cache simulator, attacks and sweeps"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  std::string out;
  auto* seed_opt = app.add_option("--seed", seed, "override the config seed");
  auto* out_opt = app.add_option("--out", out, "output directory (render: .svg path or directory)");
  app.add_option("--config", g.config, "experiment or sweep JSON");
  app.add_option("--parallel", g.parallel, "concurrent simulations in a sweep")->check(CLI::PositiveNumber);

  auto* attack = app.add_subcommand("run-attack", "run one attack scenario");
  auto* trace = app.add_subcommand("run-trace", "replay a trace or a generated workload");
  std::string trace_path;
  trace->add_option("--trace", trace_path, "trace file overriding the config");
  auto* sw = app.add_subcommand("sweep", "run a list or product of configs");
  auto* rend = app.add_subcommand("render", "render matrix.csv as an SVG heatmap");
  std::string input;
  rend->add_option("matrix", input, "matrix CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (*out_opt) g.out = out;

  try {
    if (*attack) return run_attack(g);
    if (*trace) return run_trace(g, trace_path);
    if (*sw) return run_sweep(g);
    if (*rend) return render(g, input);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
