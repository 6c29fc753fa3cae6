#pragma once

#include <functional>
#include <vector>

namespace ksdl {

/// C(n, k) with saturation at cap (returns cap + 1 once exceeded) so call
/// sites can budget enumerations without overflowing.
long long binomial_capped(int n, int k, long long cap);

/// Visits every sorted k-subset of {0, ..., n-1} in lexicographic order.
void for_each_combination(int n, int k,
                          const std::function<void(const std::vector<int>&)>& visit);

/// All sorted k-subsets of {0, ..., n-1}, lexicographic.
std::vector<std::vector<int>> all_combinations(int n, int k);

}  // namespace ksdl
