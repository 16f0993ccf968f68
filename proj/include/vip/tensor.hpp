#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vip/common.hpp"

namespace vip {

// Dense double-precision tensor. Value-semantic payload held behind a
// shared_ptr so tape closures can keep operands alive across the pass.
struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;
  std::vector<double> g;  // allocated lazily, same layout as v
  bool requires_grad = false;

  std::int64_t size() const {
    std::int64_t s = 1;
    for (int d : shape) s *= d;
    return s;
  }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
  }
  void zero_grad() {
    if (!g.empty()) std::fill(g.begin(), g.end(), 0.0);
  }

  static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
  static TensorPtr full(std::vector<int> shape, double value,
                        bool requires_grad = false);
  static TensorPtr from(std::vector<int> shape, std::vector<double> values,
                        bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);
};

// Reverse-mode tape. Ops executed through a Tape record backward closures;
// Tape::backward replays them in reverse, accumulating into Tensor::g.
// Single-threaded within a pass; one tape per forward/backward.
class Tape {
 public:
  // When recording is off (evaluation passes) no closures are stored and no
  // gradients are touched.
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  // --- linear algebra ---
  TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
  // Batched matmul: a is B x r x k, b is B x k x c.
  TensorPtr bmm(const TensorPtr& a, const TensorPtr& b);
  TensorPtr transpose2d(const TensorPtr& a);
  TensorPtr permute(const TensorPtr& a, const std::vector<int>& axes);
  TensorPtr reshape(const TensorPtr& a, std::vector<int> shape);

  // --- elementwise / reductions ---
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr scale(const TensorPtr& a, double c);
  TensorPtr abs(const TensorPtr& a);
  TensorPtr gelu(const TensorPtr& a);
  TensorPtr sum_all(const TensorPtr& a);   // -> scalar
  TensorPtr mean_all(const TensorPtr& a);  // -> scalar
  TensorPtr l1_norm(const TensorPtr& a);   // sum of |a|, -> scalar

  // Softmax over the last axis, max-subtracted for stability.
  TensorPtr softmax_lastdim(const TensorPtr& a);
  // LayerNorm over the last axis with affine gamma/beta (length = last dim).
  TensorPtr layer_norm_lastdim(const TensorPtr& a, const TensorPtr& gamma,
                               const TensorPtr& beta, double eps = 1e-5);

  // --- broadcasting ---
  // Adds a vector (length = last dim) to every row.
  TensorPtr add_vec_lastdim(const TensorPtr& a, const TensorPtr& bias);
  // Multiplies every row elementwise by a vector (length = last dim).
  TensorPtr mul_vec_lastdim(const TensorPtr& a, const TensorPtr& w);
  // Multiplies row i of a 2-d tensor by w[i].
  TensorPtr mul_vec_axis0(const TensorPtr& a, const TensorPtr& w);
  // Repeats the whole tensor `count` times along a new leading axis.
  TensorPtr broadcast_axis0(const TensorPtr& a, int count);
  // 2-d (r x c) -> 3-d (r x count x c), repeating each row.
  TensorPtr broadcast_axis1(const TensorPtr& a, int count);

  // --- selection ---
  // Gathers rows (first axis) by index; gradient scatter-adds.
  TensorPtr gather_axis0(const TensorPtr& a, const std::vector<int>& idx);
  // Gathers columns of a 2-d tensor by index.
  TensorPtr gather_cols(const TensorPtr& a, const std::vector<int>& idx);
  // Contiguous slice along the last axis.
  TensorPtr slice_lastdim(const TensorPtr& a, int start, int len);
  // Concatenates along the last axis; leading dims must match.
  TensorPtr concat_lastdim(const std::vector<TensorPtr>& parts);

  // Replays the tape backward from a scalar loss.
  void backward(const TensorPtr& loss);

 private:
  TensorPtr make(std::vector<int> shape, bool requires_grad);
  void record(std::function<void()> fn);
  static void check_finite(const TensorPtr& t, const char* op);

  bool recording_;
  std::vector<std::function<void()>> ops_;
};

// Exact GeLU, x * Phi(x) with the Gaussian CDF in erf form.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Compares tape gradients of a scalar-valued function of `leaves` against
// central finite differences. Returns max_i |g_a - g_fd| / max(1, |g_fd|).
double grad_check(const std::function<TensorPtr(Tape&)>& f,
                  const std::vector<TensorPtr>& leaves, double eps = 1e-6);

}  // namespace vip
