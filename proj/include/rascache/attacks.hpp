#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rascache/hierarchy.hpp"
#include "rascache/metrics.hpp"
#include "rascache/recovery.hpp"

namespace rascache {

using AesKey = std::array<std::uint8_t, 16>;
using AesBlock = std::array<std::uint8_t, 16>;

// First-round T-table lookups of AES-128. Byte j reads table j % 4 at index
// D_j ^ K_j; tables are 1 KiB of 4-byte entries, packed into one 4 KiB region.
class AesModel {
 public:
  static constexpr std::uint32_t kEntryBytes = 4;
  static constexpr std::uint32_t kTableBytes = 1024;
  static constexpr std::uint32_t kTables = 4;

  AesModel(AesKey key, Addr base);

  static std::uint32_t table_of(std::uint32_t j) { return j % kTables; }
  Addr table_base(std::uint32_t t) const { return base_ + t * kTableBytes; }
  Addr access_addr(std::uint32_t j, std::uint8_t d) const {
    return table_base(table_of(j)) + static_cast<Addr>(d ^ key_[j]) * kEntryBytes;
  }
  std::array<Addr, 16> first_round(const AesBlock& plaintext) const;
  // The 64 lines of the table region.
  std::vector<Addr> table_lines(std::uint32_t line_bytes = 64) const;
  const AesKey& key() const { return key_; }
  Addr base() const { return base_; }

 private:
  AesKey key_;
  Addr base_;
};

struct AttackParams {
  DefenseMode defense;
  HierarchyConfig hierarchy;
  std::uint64_t seed = 1;
  std::uint32_t trials = 64;
  double threshold_z = 4.0;
  bool force_fill = false;    // leak-guard fault injection
  bool dummy_victim = false;  // victim accesses do not depend on the secret
  // Unrelated victim loads around the AES first round.
  std::uint32_t victim_pre_fillers = 0;
  std::uint32_t victim_post_fillers = 0;
};

struct AttackResult {
  std::string attack;
  TimingMatrix matrix;
  std::vector<double> scores;  // per-candidate statistic the verdict is drawn from
  RecoveryVerdict verdict;
  std::uint32_t truth = 0;
  Metrics metrics;
  Cycle cycles = 0;

  // Defense holds when nothing was guessed or the guess is wrong.
  bool defeated() const { return !verdict.guessed || !verdict.correct; }
};

AttackResult run_spectre_fr(const AttackParams& p, std::uint8_t secret, std::uint32_t step = 64);
AttackResult run_spectre_pp(const AttackParams& p, std::uint8_t secret);
AttackResult run_aes_pp(const AttackParams& p, const AesKey& key, std::uint32_t target_byte = 0);
AttackResult run_aes_fr(const AttackParams& p, const AesKey& key, std::uint32_t target_byte = 0);
// Sweeps D4 then D8 (byte indices 3 and 7, both in T4); guesses hi(K4 ^ K8).
AttackResult run_aes_evict_time(const AttackParams& p, const AesKey& key);
// Sweeps D1 ^ D5 (byte indices 0 and 4, both in T1); guesses hi(K1 ^ K5).
AttackResult run_aes_collision(const AttackParams& p, const AesKey& key,
                               std::uint32_t l1_mshrs = 1);

// Name-based dispatch used by the harness ("spectre-fr", "aes-pp", ...).
std::vector<std::string> attack_names();

}  // namespace rascache
