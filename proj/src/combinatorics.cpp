#include "ksdl/combinatorics.hpp"

#include <stdexcept>

namespace ksdl {

long long binomial_capped(int n, int k, long long cap) {
  if (k < 0 || n < 0 || k > n) return 0;
  long long c = 1;
  for (int i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;  // exact: partial products are binomials
    if (c > cap) return cap + 1;
  }
  return c;
}

void for_each_combination(int n, int k,
                          const std::function<void(const std::vector<int>&)>& visit) {
  if (k < 0 || n < 0 || k > n)
    throw std::invalid_argument("for_each_combination: bad sizes");
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  if (k == 0) {
    visit(idx);
    return;
  }
  while (true) {
    visit(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::vector<std::vector<int>> all_combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  for_each_combination(n, k, [&](const std::vector<int>& c) { out.push_back(c); });
  return out;
}

}  // namespace ksdl
