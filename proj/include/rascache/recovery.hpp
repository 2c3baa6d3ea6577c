#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rascache {

enum class Direction : std::uint8_t { Min, Max };

// Row = candidate, column = measured unit. Cells are latencies in cycles.
struct TimingMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cells;
  std::string row_label = "candidate";
  std::string col_label = "unit";

  TimingMatrix() = default;
  TimingMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), cells(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return cells[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  std::vector<double> row_means() const;
  double min() const;
  double max() const;
};

struct RecoveryVerdict {
  std::optional<std::uint32_t> guessed;
  std::uint32_t best = 0;   // best candidate even when below threshold
  double separation = 0.0;  // +inf when the others have zero spread but differ
  bool correct = false;
};

// Picks the best score by direction and reports how far it sits from the
// rest in units of their standard deviation.
RecoveryVerdict recover(const std::vector<double>& scores, Direction direction,
                        double threshold_z = 4.0);
RecoveryVerdict recover(const TimingMatrix& matrix, Direction direction, double threshold_z = 4.0);

}  // namespace rascache
