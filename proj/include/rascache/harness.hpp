#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rascache/attacks.hpp"
#include "rascache/workloads.hpp"

namespace rascache {

// Names the offending key, e.g. "window: must be a power of two".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FaultInjection : std::uint8_t { None, NoFillDisabled };

struct ExperimentConfig {
  DefenseMode defense;
  HierarchyConfig hierarchy;
  std::uint64_t seed = 1;
  std::string scenario;  // an attack name or "trace"

  // Attack scenarios.
  std::uint32_t trials = 64;
  double threshold_z = 4.0;
  std::uint32_t secret = 30;
  std::uint32_t step = 64;
  AesKey key{};
  std::uint32_t target_byte = 0;
  std::uint32_t l1_mshrs = 1;
  bool dummy_victim = false;
  std::uint32_t victim_pre_fillers = 0;
  std::uint32_t victim_post_fillers = 0;
  // Unset: derived from the defense (see expects_defeat()).
  std::optional<bool> expect_defeat;

  // Trace scenario: replay `trace_path`, or a generated trace when empty.
  std::string trace_path;
  LocalityModel model;
  std::uint64_t trace_length = 100000;

  std::string output_dir = "out";
  bool heatmap = true;
  FaultInjection fault = FaultInjection::None;

  bool is_attack() const { return scenario != "trace"; }
  bool expects_defeat() const;
  // Canonical JSON of every field, defaults included.
  std::string canonical_json() const;
  // FNV-1a 64 of canonical_json(), 16 hex digits.
  std::string hash() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);
// Array of configs, or {"base": {...}, "vary": {"key": [values...], ...}}
// expanded as a cartesian product in key order.
std::vector<ExperimentConfig> parse_sweep(const std::string& json_text);

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 2 leak guard
  std::vector<std::string> files;
  std::optional<AttackResult> attack;
  Metrics metrics;
};

// Simulates and returns results without touching the filesystem.
RunOutcome simulate(const ExperimentConfig& cfg);
// Simulates and writes metrics.json, plus matrix.csv, verdict.json and
// heatmap.svg for attacks, into cfg.output_dir.
RunOutcome run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  std::string label;
  std::string scenario;
  DefenseMode defense;
  std::uint64_t seed = 0;
  Metrics metrics;
  std::optional<RecoveryVerdict> verdict;
  std::string config_hash;
};

// Rows come back in input order whatever the completion order.
std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs, unsigned parallelism);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

std::string matrix_csv(const TimingMatrix& m, const Provenance& p);
TimingMatrix parse_matrix_csv(const std::string& text);
std::string render_heatmap(const TimingMatrix& m, const Provenance& p);
std::string metrics_json(const Metrics& m, const ExperimentConfig& cfg);
std::string verdict_json(const AttackResult& r, const ExperimentConfig& cfg);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& data);

}  // namespace rascache
