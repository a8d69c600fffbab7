#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <lcal/error.hpp>

namespace lcal {

/// Maps each value to (average rank - 1) / (N - 1), where ranks come from the empirical CDF and
/// ties share their average rank. The result is monotone and lies in [0, 1].
/// A single value or an all-equal input maps to all zeros.
inline std::vector<double> histogram_equalize(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) {
    throw ArgumentError("histogram_equalize requires at least one value");
  }
  for (const double v : values) {
    if (!std::isfinite(v)) {
      throw ArgumentError("histogram_equalize requires finite values");
    }
  }

  std::vector<double> equalized(n, 0.0);
  if (n == 1) {
    return equalized;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  if (values[order.front()] == values[order.back()]) {
    return equalized;
  }

  const double denom = static_cast<double>(n - 1);
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin + 1;
    while (end < n && values[order[end]] == values[order[begin]]) {
      end++;
    }
    // 0-based ranks begin..end-1, average (begin + end - 1) / 2
    const double rank = 0.5 * static_cast<double>(begin + end - 1);
    for (std::size_t i = begin; i < end; i++) {
      equalized[order[i]] = rank / denom;
    }
    begin = end;
  }
  return equalized;
}

}  // namespace lcal
