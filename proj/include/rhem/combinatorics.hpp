#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace rhem {

/// C(n, k), saturating at UINT64_MAX instead of overflowing.
std::uint64_t binomial_saturating(std::uint64_t n, std::uint64_t k);

/// C(n, k) as a double (exact for the magnitudes used as normalizers).
double binomial(std::uint64_t n, std::uint64_t k);

/// Calls f(subset) for every size-k subset of `items`, in lexicographic order of
/// positions. `subset` is a reused buffer; items must be sorted for the subsets
/// to be sorted.
template <class T, class F>
void for_each_combination(std::span<const T> items, std::size_t k, std::vector<T>& subset, F&& f) {
  const std::size_t n = items.size();
  if (k == 0 || k > n) return;
  std::vector<std::size_t> pos(k);
  for (std::size_t i = 0; i < k; ++i) pos[i] = i;
  subset.resize(k);
  while (true) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = items[pos[i]];
    f(static_cast<const std::vector<T>&>(subset));
    std::size_t i = k;
    while (i > 0 && pos[i - 1] == n - k + (i - 1)) --i;
    if (i == 0) return;
    ++pos[i - 1];
    for (std::size_t j = i; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
}

}  // namespace rhem
