#include <numeric>
#include <vector>

#include "doctest.h"
#include "ksdl/tensor.hpp"

using namespace ksdl;

namespace {

Tensor iota_tensor(const std::vector<int>& dims) {
  VectorXd data(dims_product(dims));
  std::iota(data.begin(), data.end(), 0.0);
  return Tensor(dims, data);
}

// Dimension list with one mode removed, for indexing unfolding columns.
std::vector<int> drop_mode(const std::vector<int>& dims, int mode) {
  std::vector<int> rest;
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    if (k != mode) rest.push_back(dims[k]);
  return rest;
}

}  // namespace

TEST_CASE("flat index enumerates the last mode fastest") {
  const std::vector<int> dims{2, 3, 4};
  long long expected = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 4; ++k) {
        const std::vector<int> idx{i, j, k};
        CHECK(flat_index(dims, idx) == expected);
        CHECK(multi_index(dims, expected) == idx);
        ++expected;
      }
  CHECK(expected == dims_product(dims));
}

TEST_CASE("flat index on a 2x2x2 cube is the binary expansion") {
  const std::vector<int> dims{2, 2, 2};
  for (long long f = 0; f < 8; ++f) {
    const auto idx = multi_index(dims, f);
    CHECK(flat_index(dims, idx) == f);
    CHECK(idx[0] == ((f >> 2) & 1));
    CHECK(idx[1] == ((f >> 1) & 1));
    CHECK(idx[2] == (f & 1));
  }
}

TEST_CASE("index maps reject malformed input") {
  CHECK_THROWS_AS(dims_product({2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(flat_index({2, 3}, {0}), std::invalid_argument);
  CHECK_THROWS_AS(flat_index({2, 3}, {0, 3}), std::out_of_range);
  CHECK_THROWS_AS(flat_index({2, 3}, {-1, 0}), std::out_of_range);
  CHECK_THROWS_AS(multi_index({2, 3}, 6), std::out_of_range);
  CHECK_THROWS_AS(multi_index({2, 3}, -1), std::out_of_range);
  CHECK_THROWS_AS(Tensor({2, 2}, VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({}, VectorXd::Zero(1)), std::invalid_argument);
}

TEST_CASE("unfolding places every entry at its mode row and remaining-mode column") {
  const std::vector<int> dims{2, 3, 4};
  const Tensor t = iota_tensor(dims);
  for (int mode = 0; mode < 3; ++mode) {
    const MatrixXd mat = unfold(t, mode);
    REQUIRE(mat.rows() == dims[mode]);
    REQUIRE(mat.cols() == t.size() / dims[mode]);
    const std::vector<int> rest = drop_mode(dims, mode);
    for (long long f = 0; f < t.size(); ++f) {
      const auto idx = multi_index(dims, f);
      std::vector<int> rest_idx;
      for (int k = 0; k < 3; ++k)
        if (k != mode) rest_idx.push_back(idx[k]);
      CHECK(mat(idx[mode], flat_index(rest, rest_idx)) == t.data[f]);
    }
  }
}

TEST_CASE("mode-1 unfolding read row by row reproduces the flat vector") {
  const Tensor t = iota_tensor({3, 5});
  const MatrixXd mat = unfold(t, 0);
  long long f = 0;
  for (int r = 0; r < mat.rows(); ++r)
    for (int c = 0; c < mat.cols(); ++c) CHECK(mat(r, c) == t.data[f++]);
}

TEST_CASE("refold inverts unfold in every mode") {
  const std::vector<int> dims{2, 3, 2, 2};
  const Tensor t = iota_tensor(dims);
  for (int mode = 0; mode < 4; ++mode) {
    const Tensor back = refold(unfold(t, mode), dims, mode);
    CHECK(back.dims == dims);
    CHECK((back.data - t.data).lpNorm<Eigen::Infinity>() == 0.0);
  }
  CHECK_THROWS_AS(refold(MatrixXd::Zero(2, 5), dims, 0), std::invalid_argument);
  CHECK_THROWS_AS(unfold(t, 4), std::out_of_range);
  CHECK_THROWS_AS(unfold(t, -1), std::out_of_range);
}

TEST_CASE("mode product contracts one mode against an entrywise oracle") {
  const std::vector<int> dims{3, 2, 4};
  const Tensor t = iota_tensor(dims);
  MatrixXd a(2, 3);
  a << 1, -2, 0.5, 0, 3, -1;

  const Tensor got = mode_product(t, a, 0);
  REQUIRE(got.dims == std::vector<int>{2, 2, 4});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 4; ++k) {
        double expected = 0.0;
        for (int rr = 0; rr < 3; ++rr)
          expected += a(i, rr) * t.data[flat_index(dims, {rr, j, k})];
        CHECK(got.data[flat_index(got.dims, {i, j, k})] == doctest::Approx(expected).epsilon(1e-14));
      }
  CHECK_THROWS_AS(mode_product(t, a, 1), std::invalid_argument);
}

TEST_CASE("mode product matches its unfolding identity") {
  const std::vector<int> dims{2, 3, 2};
  const Tensor t = iota_tensor(dims);
  MatrixXd a(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = 0.3 * i - 0.7 * j + 0.1;
  const Tensor got = mode_product(t, a, 1);
  const MatrixXd lhs = unfold(got, 1);
  const MatrixXd rhs = a * unfold(t, 1);
  CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
}
