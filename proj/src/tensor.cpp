#include "ksdl/tensor.hpp"

#include <stdexcept>

namespace ksdl {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.empty()) throw std::invalid_argument("tensor: empty dimension list");
  for (int d : dims)
    if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension");
}

void check_mode(const std::vector<int>& dims, int mode) {
  if (mode < 0 || mode >= static_cast<int>(dims.size()))
    throw std::out_of_range("tensor: mode out of range");
}

}  // namespace

Tensor::Tensor(std::vector<int> d, VectorXd v) : dims(std::move(d)), data(std::move(v)) {
  check_dims(dims);
  if (data.size() != dims_product(dims))
    throw std::invalid_argument("tensor: data length does not match dims");
}

long long Tensor::size() const { return data.size(); }

long long dims_product(const std::vector<int>& dims) {
  check_dims(dims);
  long long n = 1;
  for (int d : dims) n *= d;
  return n;
}

long long flat_index(const std::vector<int>& dims, const std::vector<int>& index) {
  check_dims(dims);
  if (index.size() != dims.size())
    throw std::invalid_argument("flat_index: order mismatch");
  long long flat = 0;
  for (size_t k = 0; k < dims.size(); ++k) {
    if (index[k] < 0 || index[k] >= dims[k])
      throw std::out_of_range("flat_index: index out of range");
    flat = flat * dims[k] + index[k];
  }
  return flat;
}

std::vector<int> multi_index(const std::vector<int>& dims, long long flat) {
  const long long total = dims_product(dims);
  if (flat < 0 || flat >= total) throw std::out_of_range("multi_index: flat out of range");
  std::vector<int> index(dims.size());
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    index[k] = static_cast<int>(flat % dims[k]);
    flat /= dims[k];
  }
  return index;
}

// Strides for viewing the data as (outer, dims[mode], inner): inner collects
// the modes after `mode` (fastest), outer the modes before it.
static void split_strides(const std::vector<int>& dims, int mode, long long* outer,
                          long long* inner) {
  *outer = 1;
  *inner = 1;
  for (int k = 0; k < mode; ++k) *outer *= dims[k];
  for (size_t k = mode + 1; k < dims.size(); ++k) *inner *= dims[k];
}

MatrixXd unfold(const Tensor& t, int mode) {
  check_mode(t.dims, mode);
  long long outer, inner;
  split_strides(t.dims, mode, &outer, &inner);
  const int rows = t.dims[mode];
  MatrixXd mat(rows, outer * inner);
  for (long long o = 0; o < outer; ++o)
    for (int r = 0; r < rows; ++r)
      for (long long i = 0; i < inner; ++i)
        mat(r, o * inner + i) = t.data[(o * rows + r) * inner + i];
  return mat;
}

Tensor refold(const MatrixXd& mat, const std::vector<int>& dims, int mode) {
  check_mode(dims, mode);
  std::vector<int> out_dims = dims;
  out_dims[mode] = static_cast<int>(mat.rows());
  long long outer, inner;
  split_strides(dims, mode, &outer, &inner);
  if (mat.cols() != outer * inner)
    throw std::invalid_argument("refold: column count does not match dims");
  Tensor t;
  t.dims = out_dims;
  t.data.resize(dims_product(out_dims));
  const int rows = static_cast<int>(mat.rows());
  for (long long o = 0; o < outer; ++o)
    for (int r = 0; r < rows; ++r)
      for (long long i = 0; i < inner; ++i)
        t.data[(o * rows + r) * inner + i] = mat(r, o * inner + i);
  return t;
}

Tensor mode_product(const Tensor& t, const MatrixXd& a, int mode) {
  check_mode(t.dims, mode);
  if (a.cols() != t.dims[mode])
    throw std::invalid_argument("mode_product: factor columns != mode dimension");
  long long outer, inner;
  split_strides(t.dims, mode, &outer, &inner);
  const int p = t.dims[mode];
  const int m = static_cast<int>(a.rows());

  std::vector<int> out_dims = t.dims;
  out_dims[mode] = m;
  Tensor out;
  out.dims = out_dims;
  out.data.resize(dims_product(out_dims));

  using RowBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (long long o = 0; o < outer; ++o) {
    Eigen::Map<const RowBlock> src(t.data.data() + o * p * inner, p, inner);
    Eigen::Map<RowBlock> dst(out.data.data() + o * m * inner, m, inner);
    dst.noalias() = a * src;
  }
  return out;
}

}  // namespace ksdl
