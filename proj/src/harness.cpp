#include "rascache/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace rascache {

using nlohmann::json;

ConfigError::ConfigError(const std::string& key, const std::string& what)
    : std::runtime_error(key + ": " + what), key_(key) {}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, p) : std::string("nan");
}

std::string fixed6(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Typed accessors; every error names the full key path.
std::uint64_t get_uint(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    throw ConfigError(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::uint32_t get_u32(const json& j, const std::string& path) {
  const auto v = get_uint(j, path);
  if (v > 0xffffffffULL) throw ConfigError(path, "out of range");
  return static_cast<std::uint32_t>(v);
}

double get_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
}

void apply_cache(const json& j, CacheGeometry& g, const std::string& path) {
  require_object(j, path);
  for (const auto& [k, v] : j.items()) {
    const std::string p = path + "." + k;
    if (k == "sets") g.num_sets = get_u32(v, p);
    else if (k == "ways") g.ways = get_u32(v, p);
    else if (k == "line_bytes") g.line_bytes = get_u32(v, p);
    else if (k == "mshrs") g.mshr_entries = get_u32(v, p);
    else if (k == "lfb") g.lfb_entries = get_u32(v, p);
    else if (k == "wb") g.wb_entries = get_u32(v, p);
    else if (k == "hit_latency") g.hit_latency = get_uint(v, p);
    else throw ConfigError(p, "unknown key");
  }
  try {
    g.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
}

void apply_hierarchy(const json& j, HierarchyConfig& h) {
  require_object(j, "hierarchy");
  for (const auto& [k, v] : j.items()) {
    const std::string p = "hierarchy." + k;
    if (k == "l1") apply_cache(v, h.l1, p);
    else if (k == "l2") apply_cache(v, h.l2, p);
    else if (k == "l2_latency") h.l2_latency = get_uint(v, p);
    else if (k == "mem_latency") h.mem_latency = get_uint(v, p);
    else if (k == "protect_writebacks") h.protect_writebacks = get_bool(v, p);
    else throw ConfigError(p, "unknown key");
  }
  try {
    h.validate();
  } catch (const std::exception& e) {
    throw ConfigError("hierarchy", e.what());
  }
}

std::pair<Cycle, Cycle> get_range(const json& j, const std::string& path) {
  if (j.is_number()) {
    const auto v = get_uint(j, path);
    return {v, v};
  }
  if (!j.is_array() || j.size() != 2) throw ConfigError(path, "expected a number or [lo, hi]");
  const auto lo = get_uint(j[0], path), hi = get_uint(j[1], path);
  if (hi < lo) throw ConfigError(path, "hi < lo");
  return {lo, hi};
}

void apply_model(const json& j, LocalityModel& m) {
  require_object(j, "model");
  for (const auto& [k, v] : j.items()) {
    const std::string p = "model." + k;
    if (k == "working_set_bytes") m.working_set_bytes = get_uint(v, p);
    else if (k == "stride_bytes") m.stride_bytes = get_uint(v, p);
    else if (k == "p_sequential") m.p_sequential = get_double(v, p);
    else if (k == "p_reuse") m.p_reuse = get_double(v, p);
    else if (k == "reuse_history") m.reuse_history = get_u32(v, p);
    else if (k == "spec_fraction") m.spec_fraction = get_double(v, p);
    else if (k == "store_fraction") m.store_fraction = get_double(v, p);
    else if (k == "squash_fraction") m.squash_fraction = get_double(v, p);
    else if (k == "base_addr") m.base_addr = get_uint(v, p);
    else if (k == "auth_latency") {
      const auto [lo, hi] = get_range(v, p);
      m.auth_latency = lo == hi && v.is_number() ? AuthLatency::fixed(lo) : AuthLatency::uniform(lo, hi);
    } else if (k == "gap") {
      std::tie(m.gap_lo, m.gap_hi) = get_range(v, p);
    } else {
      throw ConfigError(p, "unknown key");
    }
  }
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw ConfigError("model", e.what());
  }
}

AesKey parse_key(const std::string& s) {
  std::string hex = s;
  if (hex.rfind("0x", 0) == 0) hex = hex.substr(2);
  if (hex.size() != 32) throw ConfigError("key", "expected 32 hex digits");
  AesKey k{};
  for (std::size_t i = 0; i < 16; ++i) {
    unsigned v = 0;
    const auto [p, ec] = std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, v, 16);
    if (ec != std::errc{} || p != hex.data() + 2 * i + 2) throw ConfigError("key", "bad hex digit");
    k[i] = static_cast<std::uint8_t>(v);
  }
  return k;
}

std::string key_hex(const AesKey& k) {
  std::string s;
  char buf[3];
  for (auto b : k) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    s += buf;
  }
  return s;
}

bool known_attack(const std::string& s) {
  const auto names = attack_names();
  return std::find(names.begin(), names.end(), s) != names.end();
}

json cache_json(const CacheGeometry& g) {
  return {{"sets", g.num_sets},   {"ways", g.ways}, {"line_bytes", g.line_bytes},
          {"mshrs", g.mshr_entries}, {"lfb", g.lfb_entries}, {"wb", g.wb_entries},
          {"hit_latency", g.hit_latency}};
}

std::string_view fault_name(FaultInjection f) {
  return f == FaultInjection::NoFillDisabled ? "no-fill-disabled" : "none";
}

json provenance_json(const ExperimentConfig& cfg) {
  return {{"artifact_version", kVersion}, {"config_hash", cfg.hash()}, {"seed", cfg.seed}};
}

json split_json(const NoFillSplit& s) {
  const auto pct = split_percentages(s);
  return {{"allocated", s.allocated},
          {"never_cleared", s.never_cleared},
          {"cleared_by_shb_fetch", s.cleared_by_shb_fetch},
          {"cleared_by_nonspec_access", s.cleared_by_nonspec_access},
          {"pct_never_cleared", pct.never_cleared},
          {"pct_cleared_by_shb_fetch", pct.cleared_by_shb_fetch},
          {"pct_cleared_by_nonspec_access", pct.cleared_by_nonspec_access}};
}

json level_json(const LevelStats& s) {
  return {{"accesses", s.accesses},
          {"hits", s.hits},
          {"misses", s.misses},
          {"miss_rate", s.miss_rate()},
          {"fills", s.fills},
          {"bypassed_fills", s.bypassed_fills},
          {"evictions", s.evictions},
          {"dirty_evictions", s.dirty_evictions},
          {"blocked", s.blocked},
          {"writebacks_forwarded", s.writebacks_forwarded},
          {"writeback_allocations", s.writeback_allocations},
          {"nofill", split_json(s.nofill)}};
}

}  // namespace

bool ExperimentConfig::expects_defeat() const {
  if (expect_defeat) return *expect_defeat;
  if (!is_attack()) return false;
  if (defense.kind == DefenseKind::RasPlus) return true;
  if (defense.kind == DefenseKind::RasSpec) return scenario.rfind("spectre-", 0) == 0;
  return false;
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["defense"] = std::string(to_string(defense.kind));
  j["rate"] = defense.rate_cycles;
  j["entries"] = defense.shb_entries;
  j["window"] = defense.window_lines;
  j["nofillclear"] = defense.nofillclear;
  j["hierarchy"] = {{"l1", cache_json(hierarchy.l1)},
                    {"l2", cache_json(hierarchy.l2)},
                    {"l2_latency", hierarchy.l2_latency},
                    {"mem_latency", hierarchy.mem_latency},
                    {"protect_writebacks", hierarchy.protect_writebacks}};
  j["seed"] = seed;
  j["scenario"] = scenario;
  j["trials"] = trials;
  j["threshold_z"] = threshold_z;
  j["secret"] = secret;
  j["step"] = step;
  j["key"] = key_hex(key);
  j["target_byte"] = target_byte;
  j["l1_mshrs"] = l1_mshrs;
  j["dummy_victim"] = dummy_victim;
  j["victim_pre_fillers"] = victim_pre_fillers;
  j["victim_post_fillers"] = victim_post_fillers;
  j["expect_defeat"] = expects_defeat();
  j["trace"] = trace_path;
  j["trace_length"] = trace_length;
  j["model"] = {{"working_set_bytes", model.working_set_bytes},
                {"stride_bytes", model.stride_bytes},
                {"p_sequential", model.p_sequential},
                {"p_reuse", model.p_reuse},
                {"reuse_history", model.reuse_history},
                {"spec_fraction", model.spec_fraction},
                {"auth_latency", {model.auth_latency.lo, model.auth_latency.hi}},
                {"store_fraction", model.store_fraction},
                {"squash_fraction", model.squash_fraction},
                {"gap", {model.gap_lo, model.gap_hi}},
                {"base_addr", model.base_addr}};
  j["fault_injection"] = std::string(fault_name(fault));
  // output_dir and heatmap do not change results and stay out of the hash.
  return j.dump();
}

std::string ExperimentConfig::hash() const { return hex16(fnv1a(canonical_json())); }

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  require_object(j, "<document>");

  ExperimentConfig cfg;
  if (!j.contains("defense")) throw ConfigError("defense", "missing required key");
  if (!j.contains("scenario")) throw ConfigError("scenario", "missing required key");

  const std::string dname = get_string(j["defense"], "defense");
  const auto kind = parse_defense_kind(dname);
  if (!kind) throw ConfigError("defense", "unknown defense '" + dname + "'");
  cfg.defense.kind = *kind;
  const bool shb = cfg.defense.uses_shb();
  const bool windowed = cfg.defense.uses_window();

  auto need = [&](const char* k, bool used) {
    if (used && !j.contains(k)) throw ConfigError(k, "required for defense " + dname);
    if (!used && j.contains(k)) throw ConfigError(k, "not used by defense " + dname);
  };
  need("rate", shb);
  need("entries", shb);
  need("window", windowed);
  if (!shb && j.contains("nofillclear")) throw ConfigError("nofillclear", "not used by defense " + dname);

  for (const auto& [k, v] : j.items()) {
    if (k == "defense") continue;
    else if (k == "rate") cfg.defense.rate_cycles = get_u32(v, k);
    else if (k == "entries") cfg.defense.shb_entries = get_u32(v, k);
    else if (k == "window") cfg.defense.window_lines = get_u32(v, k);
    else if (k == "nofillclear") cfg.defense.nofillclear = get_bool(v, k);
    else if (k == "hierarchy") apply_hierarchy(v, cfg.hierarchy);
    else if (k == "seed") cfg.seed = get_uint(v, k);
    else if (k == "scenario") cfg.scenario = get_string(v, k);
    else if (k == "trials") cfg.trials = get_u32(v, k);
    else if (k == "threshold_z") cfg.threshold_z = get_double(v, k);
    else if (k == "secret") cfg.secret = get_u32(v, k);
    else if (k == "step") cfg.step = get_u32(v, k);
    else if (k == "key") cfg.key = parse_key(get_string(v, k));
    else if (k == "target_byte") cfg.target_byte = get_u32(v, k);
    else if (k == "l1_mshrs") cfg.l1_mshrs = get_u32(v, k);
    else if (k == "dummy_victim") cfg.dummy_victim = get_bool(v, k);
    else if (k == "victim_pre_fillers") cfg.victim_pre_fillers = get_u32(v, k);
    else if (k == "victim_post_fillers") cfg.victim_post_fillers = get_u32(v, k);
    else if (k == "expect_defeat") cfg.expect_defeat = get_bool(v, k);
    else if (k == "trace") cfg.trace_path = get_string(v, k);
    else if (k == "trace_length") cfg.trace_length = get_uint(v, k);
    else if (k == "model") apply_model(v, cfg.model);
    else if (k == "output_dir") cfg.output_dir = get_string(v, k);
    else if (k == "heatmap") cfg.heatmap = get_bool(v, k);
    else if (k == "fault_injection") {
      const auto f = get_string(v, k);
      if (f == "none") cfg.fault = FaultInjection::None;
      else if (f == "no-fill-disabled") cfg.fault = FaultInjection::NoFillDisabled;
      else throw ConfigError(k, "expected \"none\" or \"no-fill-disabled\"");
    } else {
      throw ConfigError(k, "unknown key");
    }
  }

  if (cfg.defense.rate_cycles == 0) throw ConfigError("rate", "must be >= 1");
  if (cfg.defense.shb_entries == 0) throw ConfigError("entries", "must be >= 1");
  if (!is_pow2(cfg.defense.window_lines)) throw ConfigError("window", "must be a power of two");
  if (cfg.scenario != "trace" && !known_attack(cfg.scenario))
    throw ConfigError("scenario", "unknown scenario '" + cfg.scenario + "'");
  if (cfg.trials == 0) throw ConfigError("trials", "must be >= 1");
  if (!(cfg.threshold_z > 0)) throw ConfigError("threshold_z", "must be > 0");
  if (cfg.secret > 255) throw ConfigError("secret", "must be a byte");
  if (cfg.step == 0) throw ConfigError("step", "must be >= 1");
  if (cfg.target_byte > 15) throw ConfigError("target_byte", "must be < 16");
  if (cfg.l1_mshrs == 0) throw ConfigError("l1_mshrs", "must be >= 1");
  if (cfg.trace_length == 0) throw ConfigError("trace_length", "must be >= 1");
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) { return parse_config(read_file(path)); }

std::vector<ExperimentConfig> parse_sweep(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  std::vector<ExperimentConfig> out;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_config(j[i].dump()));
  } else if (j.is_object() && j.contains("base")) {
    for (const auto& [k, v] : j.items())
      if (k != "base" && k != "vary") throw ConfigError(k, "unknown key");
    std::vector<json> combos{j["base"]};
    if (j.contains("vary")) {
      require_object(j["vary"], "vary");
      for (const auto& [k, values] : j["vary"].items()) {
        if (!values.is_array() || values.empty())
          throw ConfigError("vary." + k, "expected a non-empty array");
        std::vector<json> next;
        for (const auto& c : combos)
          for (const auto& v : values) {
            json copy = c;
            if (!k.empty() && k[0] == '/') copy[json::json_pointer(k)] = v;
            else copy[k] = v;
            next.push_back(std::move(copy));
          }
        combos = std::move(next);
      }
    }
    for (const auto& c : combos) out.push_back(parse_config(c.dump()));
  } else {
    throw ConfigError("<document>", "expected an array of configs or {\"base\", \"vary\"}");
  }
  if (out.empty()) throw ConfigError("<document>", "sweep has no configs");
  return out;
}

RunOutcome simulate(const ExperimentConfig& cfg) {
  RunOutcome out;
  const bool force_fill = cfg.fault == FaultInjection::NoFillDisabled;
  if (cfg.is_attack()) {
    AttackParams p;
    p.defense = cfg.defense;
    p.hierarchy = cfg.hierarchy;
    p.seed = cfg.seed;
    p.trials = cfg.trials;
    p.threshold_z = cfg.threshold_z;
    p.force_fill = force_fill;
    p.dummy_victim = cfg.dummy_victim;
    p.victim_pre_fillers = cfg.victim_pre_fillers;
    p.victim_post_fillers = cfg.victim_post_fillers;
    const auto secret = static_cast<std::uint8_t>(cfg.secret);
    AttackResult r;
    if (cfg.scenario == "spectre-fr") r = run_spectre_fr(p, secret, cfg.step);
    else if (cfg.scenario == "spectre-pp") r = run_spectre_pp(p, secret);
    else if (cfg.scenario == "aes-pp") r = run_aes_pp(p, cfg.key, cfg.target_byte);
    else if (cfg.scenario == "aes-fr") r = run_aes_fr(p, cfg.key, cfg.target_byte);
    else if (cfg.scenario == "aes-evict-time") r = run_aes_evict_time(p, cfg.key);
    else if (cfg.scenario == "aes-collision") r = run_aes_collision(p, cfg.key, cfg.l1_mshrs);
    else throw ConfigError("scenario", "unknown scenario '" + cfg.scenario + "'");
    out.metrics = r.metrics;
    if (cfg.expects_defeat() && !r.defeated()) out.exit_code = 2;
    out.attack = std::move(r);
  } else {
    const Trace trace = cfg.trace_path.empty()
                            ? generate_trace(cfg.model, cfg.trace_length, cfg.seed)
                            : load_trace_file(cfg.trace_path);
    MachineOptions opts;
    opts.clamp_rob_order = true;
    opts.force_fill = force_fill;
    Machine m(cfg.hierarchy, cfg.defense, cfg.seed, opts);
    m.run(to_program(trace));
    out.metrics = m.metrics();
  }
  return out;
}

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  RunOutcome out = simulate(cfg);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create " + cfg.output_dir + ": " + ec.message());
  const Provenance prov{cfg.hash(), cfg.seed};
  auto emit = [&](const std::string& name, const std::string& data) {
    const std::string path = (fs::path(cfg.output_dir) / name).string();
    write_file(path, data);
    out.files.push_back(path);
  };
  emit("metrics.json", metrics_json(out.metrics, cfg));
  if (out.attack) {
    emit("matrix.csv", matrix_csv(out.attack->matrix, prov));
    emit("verdict.json", verdict_json(*out.attack, cfg));
    if (cfg.heatmap) emit("heatmap.svg", render_heatmap(out.attack->matrix, prov));
  }
  return out;
}

std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs, unsigned parallelism) {
  if (configs.empty()) throw std::invalid_argument("sweep needs at least one config");
  std::vector<SweepRow> rows(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const auto& c = configs[i];
        RunOutcome o = simulate(c);
        SweepRow& r = rows[i];
        r.label = c.defense.label();
        r.scenario = c.scenario;
        r.defense = c.defense;
        r.seed = c.seed;
        r.metrics = o.metrics;
        if (o.attack) r.verdict = o.attack->verdict;
        r.config_hash = c.hash();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw std::runtime_error("config #" + std::to_string(i) + " (" + configs[i].defense.label() + " " +
                               configs[i].scenario + " seed " + std::to_string(configs[i].seed) +
                               "): " + e.what());
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::uint64_t h = kFnvOffset;
  for (const auto& r : rows) h = fnv1a(r.config_hash, h);
  std::ostringstream o;
  o << "# rascache " << kVersion << " sweep=" << hex16(h) << "\n";
  o << "index,defense,R,E,W,nofillclear,scenario,seed,miss_rate_l1,miss_rate_l2,"
       "l1_never_cleared,l1_cleared_shb,l1_cleared_nonspec,l2_never_cleared,l2_cleared_shb,"
       "l2_cleared_nonspec,shb_emissions,cycles,guessed,correct,separation,config_hash\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& d = r.defense;
    const auto s1 = split_percentages(r.metrics.l1.nofill);
    const auto s2 = split_percentages(r.metrics.l2.nofill);
    o << i << ',' << to_string(d.kind) << ',';
    if (d.uses_shb()) o << d.rate_cycles << ',' << d.shb_entries << ',';
    else o << ",,";
    if (d.uses_window()) o << d.window_lines;
    o << ',' << (d.uses_shb() ? (d.nofillclear ? "1" : "0") : "") << ',' << r.scenario << ',' << r.seed
      << ',' << fixed6(r.metrics.l1.miss_rate()) << ',' << fixed6(r.metrics.l2.miss_rate()) << ','
      << fixed6(s1.never_cleared) << ',' << fixed6(s1.cleared_by_shb_fetch) << ','
      << fixed6(s1.cleared_by_nonspec_access) << ',' << fixed6(s2.never_cleared) << ','
      << fixed6(s2.cleared_by_shb_fetch) << ',' << fixed6(s2.cleared_by_nonspec_access) << ','
      << r.metrics.shb.emissions << ',' << r.metrics.cycles_total << ',';
    if (r.verdict) {
      if (r.verdict->guessed) o << *r.verdict->guessed;
      o << ',' << (r.verdict->correct ? "1" : "0") << ',' << fixed6(r.verdict->separation);
    } else {
      o << ",,";
    }
    o << ',' << r.config_hash << '\n';
  }
  return o.str();
}

std::string matrix_csv(const TimingMatrix& m, const Provenance& p) {
  std::ostringstream o;
  o << "# rascache " << kVersion << " config=" << p.config_hash << " seed=" << p.seed << "\n";
  o << m.row_label;
  for (std::size_t c = 0; c < m.cols; ++c) o << ',' << m.col_label << '_' << c;
  o << '\n';
  for (std::size_t r = 0; r < m.rows; ++r) {
    o << r;
    for (std::size_t c = 0; c < m.cols; ++c) o << ',' << fmt_double(m.at(r, c));
    o << '\n';
  }
  return o.str();
}

TimingMatrix parse_matrix_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (ch != '\r') {
        cur += ch;
      }
    }
    f.push_back(cur);
    return f;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line);
    if (header.empty()) {
      if (f.size() < 2) throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) + ": no columns");
      header = std::move(f);
      continue;
    }
    if (f.size() != header.size())
      throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) + ": ragged row (" +
                                  std::to_string(f.size()) + " fields, header has " +
                                  std::to_string(header.size()) + ")");
    std::vector<double> vals;
    for (std::size_t i = 1; i < f.size(); ++i) {
      double v = 0;
      const auto& s = f[i];
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument("matrix CSV line " + std::to_string(lineno) + ": bad value '" + s + "'");
      vals.push_back(v);
    }
    rows.push_back(std::move(vals));
  }
  if (header.empty() || rows.empty()) throw std::invalid_argument("matrix CSV has no data");
  TimingMatrix m(rows.size(), header.size() - 1);
  m.row_label = header[0];
  const auto us = header[1].rfind('_');
  m.col_label = us == std::string::npos ? header[1] : header[1].substr(0, us);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  return m;
}

std::string render_heatmap(const TimingMatrix& m, const Provenance& p) {
  if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("empty matrix");
  const int cw = std::clamp(static_cast<int>(800 / m.cols), 2, 24);
  const int ch = std::clamp(static_cast<int>(600 / m.rows), 2, 24);
  const int left = 70, top = 30, bottom = 50, right = 20;
  const int gw = cw * static_cast<int>(m.cols), gh = ch * static_cast<int>(m.rows);
  const int width = left + gw + right, height = top + gh + bottom;
  const double lo = m.min(), hi = m.max();

  auto gray = [&](double v) {
    const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
    const int g = static_cast<int>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", g, g, g);
    return std::string(buf);
  };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\""
    << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
    << "<!-- rascache " << kVersion << " config=" << p.config_hash << " seed=" << p.seed << " -->\n"
    << "<title>" << m.row_label << " x " << m.col_label << " (min " << fmt_double(lo) << ", max "
    << fmt_double(hi) << ")</title>\n"
    << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n"
    << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c)
      o << "<rect x=\"" << left + cw * static_cast<int>(c) << "\" y=\"" << top + ch * static_cast<int>(r)
        << "\" width=\"" << cw << "\" height=\"" << ch << "\" fill=\"" << gray(m.at(r, c)) << "\"/>\n";
  o << "</g>\n<g font-family=\"monospace\" font-size=\"10\" fill=\"#000000\">\n";
  o << "<text x=\"" << left << "\" y=\"" << top + gh + 14 << "\">0</text>\n"
    << "<text x=\"" << left + gw << "\" y=\"" << top + gh + 14 << "\" text-anchor=\"end\">" << m.cols - 1
    << "</text>\n"
    << "<text x=\"" << left + gw / 2 << "\" y=\"" << top + gh + 32 << "\" text-anchor=\"middle\">"
    << m.col_label << "</text>\n"
    << "<text x=\"" << left - 4 << "\" y=\"" << top + 8 << "\" text-anchor=\"end\">0</text>\n"
    << "<text x=\"" << left - 4 << "\" y=\"" << top + gh << "\" text-anchor=\"end\">" << m.rows - 1
    << "</text>\n"
    << "<text x=\"14\" y=\"" << top + gh / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << top + gh / 2 << ")\">" << m.row_label << "</text>\n"
    << "</g>\n</svg>\n";
  return o.str();
}

std::string metrics_json(const Metrics& m, const ExperimentConfig& cfg) {
  json j = provenance_json(cfg);
  j["defense"] = cfg.defense.label();
  j["scenario"] = cfg.scenario;
  j["cycles_total"] = m.cycles_total;
  j["l1"] = level_json(m.l1);
  j["l2"] = level_json(m.l2);
  j["shb"] = {{"ticks", m.shb.ticks},
              {"emissions", m.shb.emissions},
              {"empty_ticks", m.shb.empty_ticks},
              {"dropped_full_mshr", m.shb.dropped_full_mshr},
              {"already_resident", m.shb.already_resident},
              {"merged_pending", m.shb.merged_pending},
              {"issued", m.shb.issued},
              {"insertions", m.shb.insertions}};
  json prov = json::object();
  for (std::size_t i = 0; i < kProvenanceCount; ++i)
    prov[std::string(to_string(static_cast<FillProvenance>(i)))] = m.fills_by_provenance[i];
  j["fills_by_provenance"] = prov;
  j["random_fill_fetches"] = m.random_fill_fetches;
  j["writebacks_to_memory"] = m.writebacks_to_memory;
  return j.dump(2) + "\n";
}

std::string verdict_json(const AttackResult& r, const ExperimentConfig& cfg) {
  json j = provenance_json(cfg);
  j["attack"] = r.attack;
  j["defense"] = cfg.defense.label();
  j["guessed"] = r.verdict.guessed ? json(*r.verdict.guessed) : json(nullptr);
  j["best"] = r.verdict.best;
  j["correct"] = r.verdict.correct;
  if (std::isinf(r.verdict.separation)) j["separation"] = "inf";
  else j["separation"] = r.verdict.separation;
  j["threshold_z"] = cfg.threshold_z;
  j["trials"] = cfg.trials;
  j["expect_defeat"] = cfg.expects_defeat();
  j["defeated"] = r.defeated();
  return j.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << data;
  if (!out.flush()) throw IoError("write failed for " + path);
}

}  // namespace rascache
