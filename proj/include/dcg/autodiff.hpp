#pragma once

#include <functional>
#include <vector>

#include "dcg/mat.hpp"
#include "dcg/rng.hpp"

namespace dcg::ad {

class Graph;

// Lightweight handle into a Graph. Cheap to copy; valid for the lifetime of
// the graph that produced it.
struct Var {
  int id = -1;
  Graph* g = nullptr;
  bool valid() const { return id >= 0 && g != nullptr; }
};

// Reverse-mode tape over Mat values. One Graph is built per forward pass
// (training step or inference call) and discarded afterwards. Nodes are
// created in topological order, so backward() is a single reverse sweep.
class Graph {
 public:
  struct Node {
    Mat val;
    Mat grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::function<void(Graph&)> back;  // accumulates into parent grads
  };

  // Input without gradient tracking.
  Var constant(Mat value) { return make(std::move(value), false, nullptr); }

  // Input with gradient tracking (gradient readable via grad() afterwards).
  Var input(Mat value) { return make(std::move(value), true, nullptr); }

  // External parameter: gradient is accumulated into *grad_sink, which the
  // caller owns (typically nn::Param::grad).
  Var param(const Mat* value, Mat* grad_sink);

  const Mat& val(Var v) const { return nodes_[v.id].val; }
  const Mat& grad(Var v) const { return nodes_[v.id].grad; }
  double scalar(Var v) const { return nodes_[v.id].val(0, 0); }

  // Backpropagate from a scalar root (seeds d(root)/d(root) = 1).
  void backward(Var root);

  size_t num_nodes() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // --- internals used by op builders ---
  Var make(Mat value, bool requires_grad, std::function<void(Graph&)> back);
  Node& node(int id) { return nodes_[id]; }
  // Zero-initialized gradient buffer for a node, allocated on first use.
  Mat& grad_ref(int id);
  bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }

 private:
  std::vector<Node> nodes_;
};

// ---- elementwise / arithmetic ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise (Hadamard)
Var div(Var a, Var b);  // elementwise; caller guarantees b != 0
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
inline Var neg(Var a) { return scale(a, -1.0); }

// ---- broadcasting against a [1 x C] row vector or [R x 1] column ----
Var add_rowvec(Var a, Var v);
Var mul_rowvec(Var a, Var v);
Var mul_colvec(Var a, Var v);

// ---- linear algebra ----
Var matmul(Var a, Var b);     // [m x k] * [k x n]
Var matmul_nt(Var a, Var b);  // [m x k] * [n x k]^T
Var transpose(Var a);

// ---- nonlinearities ----
Var tanh_op(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var gelu(Var a);
Var relu(Var a);
Var sqrt_op(Var a);

// ---- reductions / normalization ----
Var sum_all(Var a);   // -> [1 x 1]
Var mean_all(Var a);  // -> [1 x 1]
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layernorm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
// Training-mode batch normalization over rows (per-column statistics,
// population variance). Batch statistics are written to the out pointers so
// the caller can maintain running averages.
Var batchnorm_train(Var x, Var gamma, Var beta, double eps, Mat* batch_mean,
                    Mat* batch_var);

// Per-row cosine similarity between equally-shaped a and b -> [R x 1].
// Rows where either norm is ~0 produce similarity 0 (and no gradient).
Var cosine_rows(Var a, Var b);

// ---- shape ----
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(Var a, int r0, int n);
Var slice_cols(Var a, int c0, int n);

// ---- stochastic / structured ----
// Inverted dropout; identity when rate == 0. Mask drawn from rng at build time.
Var dropout(Var a, double rate, Rng& rng);
// Depthwise 3x3 convolution over a gh x gw token grid (see kernels.hpp).
// x: [gh*gw x C], w: [C x 9], b: [1 x C].
Var dwconv3x3(Var x, Var w, Var b, int gh, int gw);

}  // namespace dcg::ad
