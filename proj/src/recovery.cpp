#include "rascache/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rascache {

std::vector<double> TimingMatrix::row_means() const {
  std::vector<double> out(rows, 0.0);
  if (cols == 0) return out;
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < cols; ++c) s += at(r, c);
    out[r] = s / static_cast<double>(cols);
  }
  return out;
}

double TimingMatrix::min() const {
  return cells.empty() ? 0.0 : *std::min_element(cells.begin(), cells.end());
}

double TimingMatrix::max() const {
  return cells.empty() ? 0.0 : *std::max_element(cells.begin(), cells.end());
}

RecoveryVerdict recover(const std::vector<double>& scores, Direction direction, double threshold_z) {
  if (scores.size() < 2) throw std::invalid_argument("recover needs at least two candidates");
  const auto it = direction == Direction::Min ? std::min_element(scores.begin(), scores.end())
                                              : std::max_element(scores.begin(), scores.end());
  RecoveryVerdict v;
  v.best = static_cast<std::uint32_t>(it - scores.begin());

  const double n = static_cast<double>(scores.size() - 1);
  double mean = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != v.best) mean += scores[i];
  mean /= n;
  double var = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != v.best) var += (scores[i] - mean) * (scores[i] - mean);
  // Summation order alone can leave ulp-sized residue; treat it as zero.
  const double tol = 1e-9 * std::max(1.0, std::abs(mean));
  double sd = std::sqrt(var / n);
  double gap = std::abs(*it - mean);
  if (sd < tol) sd = 0.0;
  if (gap < tol) gap = 0.0;

  if (sd == 0.0) v.separation = gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  else v.separation = gap / sd;
  if (v.separation >= threshold_z) v.guessed = v.best;
  return v;
}

RecoveryVerdict recover(const TimingMatrix& matrix, Direction direction, double threshold_z) {
  return recover(matrix.row_means(), direction, threshold_z);
}

}  // namespace rascache
