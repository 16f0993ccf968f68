#include "vip/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace vip {

namespace {

// C (M x N) op= A (M x K) * B (K x N), with optional transposes applied to
// the logical operands. ikj order keeps the inner loop contiguous.
void gemm_nn(double* c, const double* a, const double* b, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::int64_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double aip = a[static_cast<std::int64_t>(i) * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + static_cast<std::int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C += A * B^T where A is m x k, B is n x k.
void gemm_nt(double* c, const double* a, const double* b, int m, int n, int k) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::int64_t>(i) * k;
    double* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::int64_t>(j) * k;
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C += A^T * B where A is k x m, B is k x n.
void gemm_tn(double* c, const double* a, const double* b, int m, int n, int k) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<std::int64_t>(p) * m;
    const double* brow = b + static_cast<std::int64_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const double api = arow[i];
      if (api == 0.0) continue;
      double* crow = c + static_cast<std::int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
}

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

std::vector<std::int64_t> strides_of(const std::vector<int>& shape) {
  std::vector<std::int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * shape[i + 1];
  return st;
}

}  // namespace

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

TensorPtr Tensor::full(std::vector<int> shape, double value,
                       bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->v.assign(static_cast<size_t>(t->size()), value);
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->v = std::move(values);
  if (static_cast<std::int64_t>(t->v.size()) != t->size())
    throw ContractError("Tensor::from: value count does not match shape " +
                        shape_str(t->shape));
  t->requires_grad = requires_grad;
  if (requires_grad) t->ensure_grad();
  return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_grad_scalar(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
}

TensorPtr Tape::make(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->v.assign(static_cast<size_t>(t->size()), 0.0);
  t->requires_grad = recording_ && requires_grad;
  if (t->requires_grad) t->ensure_grad();
  return t;
}

void Tape::record(std::function<void()> fn) {
  if (recording_) ops_.push_back(std::move(fn));
}

void Tape::check_finite(const TensorPtr& t, const char* op) {
  for (double x : t->v)
    if (!std::isfinite(x))
      throw NumericError(std::string("non-finite value produced by ") + op);
}

void Tape::backward(const TensorPtr& loss) {
  if (loss->size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(loss->shape));
  if (!loss->requires_grad)
    throw ContractError("backward: loss does not require grad");
  loss->ensure_grad();
  loss->g[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  ops_.clear();
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->ndim() != 2 || b->ndim() != 2 || a->dim(1) != b->dim(0))
    throw ContractError("matmul: incompatible shapes " + shape_str(a->shape) +
                        " x " + shape_str(b->shape));
  const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
  auto out = make({m, n}, a->requires_grad || b->requires_grad);
  gemm_nn(out->v.data(), a->v.data(), b->v.data(), m, n, k);
  check_finite(out, "matmul");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    record([a, b, out, m, n, k] {
      if (a->requires_grad)
        gemm_nt(a->g.data(), out->g.data(), b->v.data(), m, k, n);
      if (b->requires_grad)
        gemm_tn(b->g.data(), a->v.data(), out->g.data(), k, n, m);
    });
  }
  return out;
}

TensorPtr Tape::bmm(const TensorPtr& a, const TensorPtr& b) {
  if (a->ndim() != 3 || b->ndim() != 3 || a->dim(0) != b->dim(0) ||
      a->dim(2) != b->dim(1))
    throw ContractError("bmm: incompatible shapes " + shape_str(a->shape) +
                        " x " + shape_str(b->shape));
  const int bs = a->dim(0), m = a->dim(1), k = a->dim(2), n = b->dim(2);
  auto out = make({bs, m, n}, a->requires_grad || b->requires_grad);
  for (int i = 0; i < bs; ++i)
    gemm_nn(out->v.data() + static_cast<std::int64_t>(i) * m * n,
            a->v.data() + static_cast<std::int64_t>(i) * m * k,
            b->v.data() + static_cast<std::int64_t>(i) * k * n, m, n, k);
  check_finite(out, "bmm");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    record([a, b, out, bs, m, n, k] {
      for (int i = 0; i < bs; ++i) {
        const std::int64_t oa = static_cast<std::int64_t>(i) * m * k;
        const std::int64_t ob = static_cast<std::int64_t>(i) * k * n;
        const std::int64_t oc = static_cast<std::int64_t>(i) * m * n;
        if (a->requires_grad)
          gemm_nt(a->g.data() + oa, out->g.data() + oc, b->v.data() + ob, m, k,
                  n);
        if (b->requires_grad)
          gemm_tn(b->g.data() + ob, a->v.data() + oa, out->g.data() + oc, k, n,
                  m);
      }
    });
  }
  return out;
}

TensorPtr Tape::transpose2d(const TensorPtr& a) { return permute(a, {1, 0}); }

TensorPtr Tape::permute(const TensorPtr& a, const std::vector<int>& axes) {
  if (static_cast<int>(axes.size()) != a->ndim())
    throw ContractError("permute: axes rank mismatch");
  std::vector<int> out_shape(axes.size());
  for (size_t i = 0; i < axes.size(); ++i) out_shape[i] = a->dim(axes[i]);
  auto out = make(out_shape, a->requires_grad);

  const auto in_st = strides_of(a->shape);
  const auto out_st = strides_of(out_shape);
  const std::int64_t total = a->size();
  const int nd = a->ndim();
  std::vector<int> idx(static_cast<size_t>(nd), 0);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    std::int64_t src = flat;
    std::int64_t dst = 0;
    for (int d = 0; d < nd; ++d) {
      idx[static_cast<size_t>(d)] = static_cast<int>(src / in_st[d]);
      src %= in_st[d];
    }
    for (int d = 0; d < nd; ++d) dst += out_st[d] * idx[static_cast<size_t>(axes[d])];
    out->v[static_cast<size_t>(dst)] = a->v[static_cast<size_t>(flat)];
  }
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, axes, in_st, out_st, nd] {
      const std::int64_t total = a->size();
      std::vector<int> idx(static_cast<size_t>(nd), 0);
      for (std::int64_t flat = 0; flat < total; ++flat) {
        std::int64_t src = flat;
        std::int64_t dst = 0;
        for (int d = 0; d < nd; ++d) {
          idx[static_cast<size_t>(d)] = static_cast<int>(src / in_st[d]);
          src %= in_st[d];
        }
        for (int d = 0; d < nd; ++d)
          dst += out_st[d] * idx[static_cast<size_t>(axes[d])];
        a->g[static_cast<size_t>(flat)] += out->g[static_cast<size_t>(dst)];
      }
    });
  }
  return out;
}

TensorPtr Tape::reshape(const TensorPtr& a, std::vector<int> shape) {
  std::int64_t s = 1;
  for (int d : shape) s *= d;
  if (s != a->size())
    throw ContractError("reshape: element count mismatch " +
                        shape_str(a->shape) + " -> " + shape_str(shape));
  auto out = make(std::move(shape), a->requires_grad);
  out->v = a->v;
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out] {
      for (size_t i = 0; i < a->g.size(); ++i) a->g[i] += out->g[i];
    });
  }
  return out;
}

TensorPtr Tape::add(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw ContractError("add: shape mismatch " + shape_str(a->shape) + " vs " +
                        shape_str(b->shape));
  auto out = make(a->shape, a->requires_grad || b->requires_grad);
  for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] + b->v[i];
  check_finite(out, "add");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    record([a, b, out] {
      if (a->requires_grad)
        for (size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i];
      if (b->requires_grad)
        for (size_t i = 0; i < out->g.size(); ++i) b->g[i] += out->g[i];
    });
  }
  return out;
}

TensorPtr Tape::sub(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw ContractError("sub: shape mismatch " + shape_str(a->shape) + " vs " +
                        shape_str(b->shape));
  auto out = make(a->shape, a->requires_grad || b->requires_grad);
  for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] - b->v[i];
  check_finite(out, "sub");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    record([a, b, out] {
      if (a->requires_grad)
        for (size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i];
      if (b->requires_grad)
        for (size_t i = 0; i < out->g.size(); ++i) b->g[i] -= out->g[i];
    });
  }
  return out;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape)
    throw ContractError("mul: shape mismatch " + shape_str(a->shape) + " vs " +
                        shape_str(b->shape));
  auto out = make(a->shape, a->requires_grad || b->requires_grad);
  for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] * b->v[i];
  check_finite(out, "mul");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    record([a, b, out] {
      if (a->requires_grad)
        for (size_t i = 0; i < out->g.size(); ++i)
          a->g[i] += out->g[i] * b->v[i];
      if (b->requires_grad)
        for (size_t i = 0; i < out->g.size(); ++i)
          b->g[i] += out->g[i] * a->v[i];
    });
  }
  return out;
}

TensorPtr Tape::scale(const TensorPtr& a, double c) {
  auto out = make(a->shape, a->requires_grad);
  for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = a->v[i] * c;
  check_finite(out, "scale");
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, c] {
      for (size_t i = 0; i < out->g.size(); ++i) a->g[i] += out->g[i] * c;
    });
  }
  return out;
}

TensorPtr Tape::abs(const TensorPtr& a) {
  auto out = make(a->shape, a->requires_grad);
  for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = std::abs(a->v[i]);
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out] {
      for (size_t i = 0; i < out->g.size(); ++i)
        a->g[i] += out->g[i] * (a->v[i] >= 0.0 ? 1.0 : -1.0);
    });
  }
  return out;
}

TensorPtr Tape::gelu(const TensorPtr& a) {
  auto out = make(a->shape, a->requires_grad);
  for (size_t i = 0; i < out->v.size(); ++i) out->v[i] = gelu_scalar(a->v[i]);
  check_finite(out, "gelu");
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out] {
      for (size_t i = 0; i < out->g.size(); ++i)
        a->g[i] += out->g[i] * gelu_grad_scalar(a->v[i]);
    });
  }
  return out;
}

TensorPtr Tape::sum_all(const TensorPtr& a) {
  auto out = make({1}, a->requires_grad);
  out->v[0] = std::accumulate(a->v.begin(), a->v.end(), 0.0);
  check_finite(out, "sum_all");
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out] {
      for (size_t i = 0; i < a->g.size(); ++i) a->g[i] += out->g[0];
    });
  }
  return out;
}

TensorPtr Tape::mean_all(const TensorPtr& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a->size()));
}

TensorPtr Tape::l1_norm(const TensorPtr& a) { return sum_all(abs(a)); }

TensorPtr Tape::softmax_lastdim(const TensorPtr& a) {
  const int c = a->dim(a->ndim() - 1);
  const std::int64_t rows = a->size() / c;
  auto out = make(a->shape, a->requires_grad);
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = a->v.data() + r * c;
    double* o = out->v.data() + r * c;
    double mx = in[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (int j = 0; j < c; ++j) o[j] /= sum;
  }
  check_finite(out, "softmax");
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, rows, c] {
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* y = out->v.data() + r * c;
        const double* gy = out->g.data() + r * c;
        double* gx = a->g.data() + r * c;
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += y[j] * gy[j];
        for (int j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
      }
    });
  }
  return out;
}

TensorPtr Tape::layer_norm_lastdim(const TensorPtr& a, const TensorPtr& gamma,
                                   const TensorPtr& beta, double eps) {
  const int c = a->dim(a->ndim() - 1);
  if (gamma->size() != c || beta->size() != c)
    throw ContractError("layer_norm: gamma/beta length must equal last dim");
  const std::int64_t rows = a->size() / c;
  auto out = make(a->shape,
                  a->requires_grad || gamma->requires_grad || beta->requires_grad);
  std::vector<double> mean(static_cast<size_t>(rows)), inv(static_cast<size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = a->v.data() + r * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += in[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    mean[static_cast<size_t>(r)] = mu;
    inv[static_cast<size_t>(r)] = is;
    double* o = out->v.data() + r * c;
    for (int j = 0; j < c; ++j)
      o[j] = (in[j] - mu) * is * gamma->v[static_cast<size_t>(j)] +
             beta->v[static_cast<size_t>(j)];
  }
  check_finite(out, "layer_norm");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (gamma->requires_grad) gamma->ensure_grad();
    if (beta->requires_grad) beta->ensure_grad();
    record([a, gamma, beta, out, rows, c, mean, inv] {
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* in = a->v.data() + r * c;
        const double* gy = out->g.data() + r * c;
        const double mu = mean[static_cast<size_t>(r)];
        const double is = inv[static_cast<size_t>(r)];
        if (gamma->requires_grad || beta->requires_grad) {
          for (int j = 0; j < c; ++j) {
            const double xhat = (in[j] - mu) * is;
            if (gamma->requires_grad)
              gamma->g[static_cast<size_t>(j)] += gy[j] * xhat;
            if (beta->requires_grad) beta->g[static_cast<size_t>(j)] += gy[j];
          }
        }
        if (a->requires_grad) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int j = 0; j < c; ++j) {
            const double gj = gy[j] * gamma->v[static_cast<size_t>(j)];
            sum_g += gj;
            sum_gx += gj * (in[j] - mu) * is;
          }
          double* gx = a->g.data() + r * c;
          for (int j = 0; j < c; ++j) {
            const double gj = gy[j] * gamma->v[static_cast<size_t>(j)];
            const double xhat = (in[j] - mu) * is;
            gx[j] += is * (gj - sum_g / c - xhat * sum_gx / c);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Tape::add_vec_lastdim(const TensorPtr& a, const TensorPtr& bias) {
  const int c = a->dim(a->ndim() - 1);
  if (bias->size() != c)
    throw ContractError("add_vec_lastdim: bias length must equal last dim");
  const std::int64_t rows = a->size() / c;
  auto out = make(a->shape, a->requires_grad || bias->requires_grad);
  for (std::int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < c; ++j)
      out->v[static_cast<size_t>(r * c + j)] =
          a->v[static_cast<size_t>(r * c + j)] + bias->v[static_cast<size_t>(j)];
  check_finite(out, "add_vec_lastdim");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (bias->requires_grad) bias->ensure_grad();
    record([a, bias, out, rows, c] {
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
          const double gy = out->g[static_cast<size_t>(r * c + j)];
          if (a->requires_grad) a->g[static_cast<size_t>(r * c + j)] += gy;
          if (bias->requires_grad) bias->g[static_cast<size_t>(j)] += gy;
        }
    });
  }
  return out;
}

TensorPtr Tape::mul_vec_lastdim(const TensorPtr& a, const TensorPtr& w) {
  const int c = a->dim(a->ndim() - 1);
  if (w->size() != c)
    throw ContractError("mul_vec_lastdim: vector length must equal last dim");
  const std::int64_t rows = a->size() / c;
  auto out = make(a->shape, a->requires_grad || w->requires_grad);
  for (std::int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < c; ++j)
      out->v[static_cast<size_t>(r * c + j)] =
          a->v[static_cast<size_t>(r * c + j)] * w->v[static_cast<size_t>(j)];
  check_finite(out, "mul_vec_lastdim");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (w->requires_grad) w->ensure_grad();
    record([a, w, out, rows, c] {
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < c; ++j) {
          const size_t k = static_cast<size_t>(r * c + j);
          const double gy = out->g[k];
          if (a->requires_grad) a->g[k] += gy * w->v[static_cast<size_t>(j)];
          if (w->requires_grad) w->g[static_cast<size_t>(j)] += gy * a->v[k];
        }
    });
  }
  return out;
}

TensorPtr Tape::mul_vec_axis0(const TensorPtr& a, const TensorPtr& w) {
  if (a->ndim() != 2 || w->size() != a->dim(0))
    throw ContractError("mul_vec_axis0: expects 2-d tensor, vector length = rows");
  const int r = a->dim(0), c = a->dim(1);
  auto out = make(a->shape, a->requires_grad || w->requires_grad);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out->v[static_cast<size_t>(i * c + j)] =
          a->v[static_cast<size_t>(i * c + j)] * w->v[static_cast<size_t>(i)];
  check_finite(out, "mul_vec_axis0");
  if (out->requires_grad) {
    if (a->requires_grad) a->ensure_grad();
    if (w->requires_grad) w->ensure_grad();
    record([a, w, out, r, c] {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          const size_t k = static_cast<size_t>(i * c + j);
          const double gy = out->g[k];
          if (a->requires_grad) a->g[k] += gy * w->v[static_cast<size_t>(i)];
          if (w->requires_grad) w->g[static_cast<size_t>(i)] += gy * a->v[k];
        }
    });
  }
  return out;
}

TensorPtr Tape::broadcast_axis0(const TensorPtr& a, int count) {
  std::vector<int> shape;
  shape.push_back(count);
  for (int d : a->shape) shape.push_back(d);
  auto out = make(std::move(shape), a->requires_grad);
  const std::int64_t sz = a->size();
  for (int i = 0; i < count; ++i)
    std::memcpy(out->v.data() + static_cast<std::int64_t>(i) * sz, a->v.data(),
                static_cast<size_t>(sz) * sizeof(double));
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, count, sz] {
      for (int i = 0; i < count; ++i)
        for (std::int64_t j = 0; j < sz; ++j)
          a->g[static_cast<size_t>(j)] +=
              out->g[static_cast<size_t>(i * sz + j)];
    });
  }
  return out;
}

TensorPtr Tape::broadcast_axis1(const TensorPtr& a, int count) {
  if (a->ndim() != 2)
    throw ContractError("broadcast_axis1: expects a 2-d tensor");
  const int r = a->dim(0), c = a->dim(1);
  auto out = make({r, count, c}, a->requires_grad);
  for (int i = 0; i < r; ++i)
    for (int t = 0; t < count; ++t)
      std::memcpy(out->v.data() + (static_cast<std::int64_t>(i) * count + t) * c,
                  a->v.data() + static_cast<std::int64_t>(i) * c,
                  static_cast<size_t>(c) * sizeof(double));
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, r, c, count] {
      for (int i = 0; i < r; ++i)
        for (int t = 0; t < count; ++t)
          for (int j = 0; j < c; ++j)
            a->g[static_cast<size_t>(i * c + j)] +=
                out->g[static_cast<size_t>((static_cast<std::int64_t>(i) * count + t) * c + j)];
    });
  }
  return out;
}

TensorPtr Tape::gather_axis0(const TensorPtr& a, const std::vector<int>& idx) {
  const int rows = a->dim(0);
  const std::int64_t row_sz = a->size() / rows;
  for (int i : idx)
    if (i < 0 || i >= rows)
      throw ContractError("gather_axis0: index out of range");
  std::vector<int> shape = a->shape;
  shape[0] = static_cast<int>(idx.size());
  auto out = make(std::move(shape), a->requires_grad);
  for (size_t r = 0; r < idx.size(); ++r)
    std::memcpy(out->v.data() + static_cast<std::int64_t>(r) * row_sz,
                a->v.data() + static_cast<std::int64_t>(idx[r]) * row_sz,
                static_cast<size_t>(row_sz) * sizeof(double));
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, idx, row_sz] {
      for (size_t r = 0; r < idx.size(); ++r)
        for (std::int64_t j = 0; j < row_sz; ++j)
          a->g[static_cast<size_t>(idx[r] * row_sz + j)] +=
              out->g[static_cast<size_t>(static_cast<std::int64_t>(r) * row_sz + j)];
    });
  }
  return out;
}

TensorPtr Tape::gather_cols(const TensorPtr& a, const std::vector<int>& idx) {
  if (a->ndim() != 2) throw ContractError("gather_cols: expects a 2-d tensor");
  const int r = a->dim(0), c = a->dim(1);
  for (int i : idx)
    if (i < 0 || i >= c) throw ContractError("gather_cols: index out of range");
  const int cc = static_cast<int>(idx.size());
  auto out = make({r, cc}, a->requires_grad);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < cc; ++j)
      out->v[static_cast<size_t>(i * cc + j)] =
          a->v[static_cast<size_t>(i * c + idx[static_cast<size_t>(j)])];
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, idx, r, c, cc] {
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < cc; ++j)
          a->g[static_cast<size_t>(i * c + idx[static_cast<size_t>(j)])] +=
              out->g[static_cast<size_t>(i * cc + j)];
    });
  }
  return out;
}

TensorPtr Tape::slice_lastdim(const TensorPtr& a, int start, int len) {
  const int c = a->dim(a->ndim() - 1);
  if (start < 0 || len < 0 || start + len > c)
    throw ContractError("slice_lastdim: range out of bounds");
  const std::int64_t rows = a->size() / c;
  std::vector<int> shape = a->shape;
  shape.back() = len;
  auto out = make(std::move(shape), a->requires_grad);
  for (std::int64_t r = 0; r < rows; ++r)
    std::memcpy(out->v.data() + r * len, a->v.data() + r * c + start,
                static_cast<size_t>(len) * sizeof(double));
  if (out->requires_grad) {
    a->ensure_grad();
    record([a, out, rows, c, start, len] {
      for (std::int64_t r = 0; r < rows; ++r)
        for (int j = 0; j < len; ++j)
          a->g[static_cast<size_t>(r * c + start + j)] +=
              out->g[static_cast<size_t>(r * len + j)];
    });
  }
  return out;
}

TensorPtr Tape::concat_lastdim(const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw ContractError("concat_lastdim: no parts");
  std::vector<int> lead(parts[0]->shape.begin(), parts[0]->shape.end() - 1);
  int total_c = 0;
  bool rg = false;
  for (const auto& p : parts) {
    std::vector<int> pl(p->shape.begin(), p->shape.end() - 1);
    if (pl != lead)
      throw ContractError("concat_lastdim: leading dims mismatch");
    total_c += p->dim(p->ndim() - 1);
    rg = rg || p->requires_grad;
  }
  std::vector<int> shape = lead;
  shape.push_back(total_c);
  auto out = make(std::move(shape), rg);
  const std::int64_t rows = out->size() / total_c;
  int off = 0;
  for (const auto& p : parts) {
    const int pc = p->dim(p->ndim() - 1);
    for (std::int64_t r = 0; r < rows; ++r)
      std::memcpy(out->v.data() + r * total_c + off, p->v.data() + r * pc,
                  static_cast<size_t>(pc) * sizeof(double));
    off += pc;
  }
  if (out->requires_grad) {
    for (const auto& p : parts)
      if (p->requires_grad) p->ensure_grad();
    record([parts, out, rows, total_c] {
      int off = 0;
      for (const auto& p : parts) {
        const int pc = p->dim(p->ndim() - 1);
        if (p->requires_grad)
          for (std::int64_t r = 0; r < rows; ++r)
            for (int j = 0; j < pc; ++j)
              p->g[static_cast<size_t>(r * pc + j)] +=
                  out->g[static_cast<size_t>(r * total_c + off + j)];
        off += pc;
      }
    });
  }
  return out;
}

double grad_check(const std::function<TensorPtr(Tape&)>& f,
                  const std::vector<TensorPtr>& leaves, double eps) {
  // Analytic pass.
  for (const auto& leaf : leaves) {
    leaf->ensure_grad();
    leaf->zero_grad();
  }
  {
    Tape tape;
    auto loss = f(tape);
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& leaf : leaves) analytic.push_back(leaf->g);

  double worst = 0.0;
  for (size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    for (size_t i = 0; i < leaf->v.size(); ++i) {
      const double orig = leaf->v[i];
      leaf->v[i] = orig + eps;
      Tape tp(false);
      const double up = f(tp)->v[0];
      leaf->v[i] = orig - eps;
      Tape tm(false);
      const double dn = f(tm)->v[0];
      leaf->v[i] = orig;
      const double fd = (up - dn) / (2.0 * eps);
      const double err =
          std::abs(analytic[li][i] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
    leaf->zero_grad();
  }
  return worst;
}

}  // namespace vip
