#include "dcg/autodiff.hpp"

#include <cassert>
#include <cmath>

#include "dcg/kernels.hpp"

namespace dcg::ad {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Var Graph::make(Mat value, bool requires_grad, std::function<void(Graph&)> back) {
  Node n;
  n.val = std::move(value);
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

Var Graph::param(const Mat* value, Mat* grad_sink) {
  Var v = make(*value, true, nullptr);
  int id = v.id;
  nodes_[id].back = [id, grad_sink](Graph& g) {
    const Mat& gd = g.node(id).grad;
    if (grad_sink->empty()) *grad_sink = Mat(gd.rows(), gd.cols());
    assert(grad_sink->same_shape(gd));
    for (size_t i = 0; i < gd.size(); ++i) (*grad_sink)[i] += gd[i];
  };
  return v;
}

Mat& Graph::grad_ref(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Mat(n.val.rows(), n.val.cols());
  return n.grad;
}

void Graph::backward(Var root) {
  assert(root.g == this);
  assert(nodes_[root.id].val.rows() == 1 && nodes_[root.id].val.cols() == 1);
  grad_ref(root.id)(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.back) continue;
    n.back(*this);
  }
}

namespace {

bool any_requires(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.g->needs_grad(v)) return true;
  return false;
}

// Creates a node and wires a backward callback that receives the node's own
// id (so it can read its gradient).
template <typename F>
Var make_op(Graph& g, Mat out, bool req, F&& back) {
  Var v = g.make(std::move(out), req, nullptr);
  if (req) {
    int self = v.id;
    g.node(self).back = [self, fn = std::forward<F>(back)](Graph& gg) { fn(gg, self); };
  }
  return v;
}

void accum(Graph& g, Var parent, const Mat& contribution) {
  if (!g.needs_grad(parent)) return;
  Mat& pg = g.grad_ref(parent.id);
  assert(pg.same_shape(contribution));
  for (size_t i = 0; i < pg.size(); ++i) pg[i] += contribution[i];
}

}  // namespace

Var add(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.same_shape(bv));
  Mat out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    accum(gg, a, gd);
    accum(gg, b, gd);
  });
}

Var sub(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.same_shape(bv));
  Mat out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    accum(gg, a, gd);
    if (gg.needs_grad(b)) {
      Mat& pg = gg.grad_ref(b.id);
      for (size_t i = 0; i < pg.size(); ++i) pg[i] -= gd[i];
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.same_shape(bv));
  Mat out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& av2 = gg.val(a);
    const Mat& bv2 = gg.val(b);
    if (gg.needs_grad(a)) {
      Mat& pg = gg.grad_ref(a.id);
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd[i] * bv2[i];
    }
    if (gg.needs_grad(b)) {
      Mat& pg = gg.grad_ref(b.id);
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd[i] * av2[i];
    }
  });
}

Var div(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.same_shape(bv));
  Mat out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& y = gg.node(self).val;
    const Mat& bv2 = gg.val(b);
    if (gg.needs_grad(a)) {
      Mat& pg = gg.grad_ref(a.id);
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd[i] / bv2[i];
    }
    if (gg.needs_grad(b)) {
      Mat& pg = gg.grad_ref(b.id);
      for (size_t i = 0; i < pg.size(); ++i) pg[i] -= gd[i] * y[i] / bv2[i];
    }
  });
}

Var scale(Var a, double c) {
  Graph& g = *a.g;
  Mat out = g.val(a);
  for (size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return make_op(g, std::move(out), g.needs_grad(a), [a, c](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    if (gg.needs_grad(a)) {
      Mat& pg = gg.grad_ref(a.id);
      for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd[i] * c;
    }
  });
}

Var add_scalar(Var a, double c) {
  Graph& g = *a.g;
  Mat out = g.val(a);
  for (size_t i = 0; i < out.size(); ++i) out[i] += c;
  return make_op(g, std::move(out), g.needs_grad(a),
                 [a](Graph& gg, int self) { accum(gg, a, gg.node(self).grad); });
}

Var add_rowvec(Var a, Var v) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& vv = g.val(v);
  assert(vv.rows() == 1 && vv.cols() == av.cols());
  Mat out = av;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) += vv(0, c);
  return make_op(g, std::move(out), any_requires({a, v}), [a, v](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    accum(gg, a, gd);
    if (gg.needs_grad(v)) {
      Mat& pg = gg.grad_ref(v.id);
      for (int r = 0; r < gd.rows(); ++r)
        for (int c = 0; c < gd.cols(); ++c) pg(0, c) += gd(r, c);
    }
  });
}

Var mul_rowvec(Var a, Var v) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& vv = g.val(v);
  assert(vv.rows() == 1 && vv.cols() == av.cols());
  Mat out = av;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) *= vv(0, c);
  return make_op(g, std::move(out), any_requires({a, v}), [a, v](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& av2 = gg.val(a);
    const Mat& vv2 = gg.val(v);
    if (gg.needs_grad(a)) {
      Mat& pg = gg.grad_ref(a.id);
      for (int r = 0; r < gd.rows(); ++r)
        for (int c = 0; c < gd.cols(); ++c) pg(r, c) += gd(r, c) * vv2(0, c);
    }
    if (gg.needs_grad(v)) {
      Mat& pg = gg.grad_ref(v.id);
      for (int r = 0; r < gd.rows(); ++r)
        for (int c = 0; c < gd.cols(); ++c) pg(0, c) += gd(r, c) * av2(r, c);
    }
  });
}

Var mul_colvec(Var a, Var v) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& vv = g.val(v);
  assert(vv.cols() == 1 && vv.rows() == av.rows());
  Mat out = av;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) *= vv(r, 0);
  return make_op(g, std::move(out), any_requires({a, v}), [a, v](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& av2 = gg.val(a);
    const Mat& vv2 = gg.val(v);
    if (gg.needs_grad(a)) {
      Mat& pg = gg.grad_ref(a.id);
      for (int r = 0; r < gd.rows(); ++r)
        for (int c = 0; c < gd.cols(); ++c) pg(r, c) += gd(r, c) * vv2(r, 0);
    }
    if (gg.needs_grad(v)) {
      Mat& pg = gg.grad_ref(v.id);
      for (int r = 0; r < gd.rows(); ++r)
        for (int c = 0; c < gd.cols(); ++c) pg(r, 0) += gd(r, c) * av2(r, c);
    }
  });
}

Var matmul(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.cols() == bv.rows());
  Mat out(av.rows(), bv.cols());
  kernels::mm_nn(av.data(), bv.data(), out.data(), av.rows(), av.cols(), bv.cols());
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& av2 = gg.val(a);
    const Mat& bv2 = gg.val(b);
    if (gg.needs_grad(a)) {
      // dA = dC * B^T
      Mat& pg = gg.grad_ref(a.id);
      kernels::mm_nt(gd.data(), bv2.data(), pg.data(), gd.rows(), gd.cols(),
                     bv2.rows(), /*accumulate=*/true);
    }
    if (gg.needs_grad(b)) {
      // dB = A^T * dC
      Mat& pg = gg.grad_ref(b.id);
      kernels::mm_tn(av2.data(), gd.data(), pg.data(), av2.rows(), av2.cols(),
                     gd.cols(), /*accumulate=*/true);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.cols() == bv.cols());
  Mat out(av.rows(), bv.rows());
  kernels::mm_nt(av.data(), bv.data(), out.data(), av.rows(), av.cols(), bv.rows());
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;  // [m x n]
    const Mat& av2 = gg.val(a);          // [m x k]
    const Mat& bv2 = gg.val(b);          // [n x k]
    if (gg.needs_grad(a)) {
      // dA = dC * B
      Mat& pg = gg.grad_ref(a.id);
      kernels::mm_nn(gd.data(), bv2.data(), pg.data(), gd.rows(), gd.cols(),
                     bv2.cols(), /*accumulate=*/true);
    }
    if (gg.needs_grad(b)) {
      // dB = dC^T * A
      Mat& pg = gg.grad_ref(b.id);
      kernels::mm_tn(gd.data(), av2.data(), pg.data(), gd.rows(), gd.cols(),
                     av2.cols(), /*accumulate=*/true);
    }
  });
}

Var transpose(Var a) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  Mat out(av.cols(), av.rows());
  for (int r = 0; r < av.rows(); ++r)
    for (int c = 0; c < av.cols(); ++c) out(c, r) = av(r, c);
  return make_op(g, std::move(out), g.needs_grad(a), [a](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    Mat& pg = gg.grad_ref(a.id);
    for (int r = 0; r < gd.rows(); ++r)
      for (int c = 0; c < gd.cols(); ++c) pg(c, r) += gd(r, c);
  });
}

namespace {

template <typename Fwd, typename Bwd>
Var unary_op(Var a, Fwd fwd, Bwd dydx_from_xy) {
  Graph& g = *a.g;
  Mat out = g.val(a);
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(out[i]);
  return make_op(g, std::move(out), g.needs_grad(a),
                 [a, dydx_from_xy](Graph& gg, int self) {
                   const Mat& gd = gg.node(self).grad;
                   const Mat& y = gg.node(self).val;
                   const Mat& x = gg.val(a);
                   Mat& pg = gg.grad_ref(a.id);
                   for (size_t i = 0; i < pg.size(); ++i)
                     pg[i] += gd[i] * dydx_from_xy(x[i], y[i]);
                 });
}

}  // namespace

Var tanh_op(Var a) {
  return unary_op(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary_op(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary_op(
      a,
      [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var gelu(Var a) {
  return unary_op(
      a,
      [](double x) { return 0.5 * x * std::erfc(-x * kInvSqrt2); },
      [](double x, double) {
        const double cdf = 0.5 * std::erfc(-x * kInvSqrt2);
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

Var relu(Var a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sqrt_op(Var a) {
  return unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Var sum_all(Var a) {
  Graph& g = *a.g;
  Mat out = Mat::scalar(g.val(a).sum());
  return make_op(g, std::move(out), g.needs_grad(a), [a](Graph& gg, int self) {
    const double gd = gg.node(self).grad(0, 0);
    Mat& pg = gg.grad_ref(a.id);
    for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd;
  });
}

Var mean_all(Var a) {
  Graph& g = *a.g;
  const double n = static_cast<double>(g.val(a).size());
  Mat out = Mat::scalar(g.val(a).sum() / n);
  return make_op(g, std::move(out), g.needs_grad(a), [a, n](Graph& gg, int self) {
    const double gd = gg.node(self).grad(0, 0) / n;
    Mat& pg = gg.grad_ref(a.id);
    for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd;
  });
}

Var softmax_rows(Var a) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  Mat out(av.rows(), av.cols());
  kernels::softmax_rows(av.data(), out.data(), av.rows(), av.cols());
  return make_op(g, std::move(out), g.needs_grad(a), [a](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& y = gg.node(self).val;
    Mat& pg = gg.grad_ref(a.id);
    for (int r = 0; r < gd.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < gd.cols(); ++c) dot += gd(r, c) * y(r, c);
      for (int c = 0; c < gd.cols(); ++c) pg(r, c) += y(r, c) * (gd(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  Mat out(av.rows(), av.cols());
  for (int r = 0; r < av.rows(); ++r) {
    double mx = av(r, 0);
    for (int c = 1; c < av.cols(); ++c) mx = std::max(mx, av(r, c));
    double denom = 0.0;
    for (int c = 0; c < av.cols(); ++c) denom += std::exp(av(r, c) - mx);
    const double lse = mx + std::log(denom);
    for (int c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) - lse;
  }
  return make_op(g, std::move(out), g.needs_grad(a), [a](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& y = gg.node(self).val;  // log-probabilities
    Mat& pg = gg.grad_ref(a.id);
    for (int r = 0; r < gd.rows(); ++r) {
      double gsum = 0.0;
      for (int c = 0; c < gd.cols(); ++c) gsum += gd(r, c);
      for (int c = 0; c < gd.cols(); ++c)
        pg(r, c) += gd(r, c) - std::exp(y(r, c)) * gsum;
    }
  });
}

Var layernorm_rows(Var x, Var gamma, Var beta, double eps) {
  Graph& g = *x.g;
  const Mat& xv = g.val(x);
  const Mat& gv = g.val(gamma);
  const Mat& bv = g.val(beta);
  assert(gv.rows() == 1 && gv.cols() == xv.cols());
  assert(bv.rows() == 1 && bv.cols() == xv.cols());
  const int R = xv.rows(), C = xv.cols();
  Mat out(R, C);
  Mat xhat(R, C);
  Mat inv_sigma(R, 1);
  for (int r = 0; r < R; ++r) {
    double mu = 0.0;
    for (int c = 0; c < C; ++c) mu += xv(r, c);
    mu /= C;
    double var = 0.0;
    for (int c = 0; c < C; ++c) {
      const double d = xv(r, c) - mu;
      var += d * d;
    }
    var /= C;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma(r, 0) = inv;
    for (int c = 0; c < C; ++c) {
      xhat(r, c) = (xv(r, c) - mu) * inv;
      out(r, c) = xhat(r, c) * gv(0, c) + bv(0, c);
    }
  }
  return make_op(
      g, std::move(out), any_requires({x, gamma, beta}),
      [x, gamma, beta, xhat = std::move(xhat),
       inv_sigma = std::move(inv_sigma)](Graph& gg, int self) {
        const Mat& gd = gg.node(self).grad;
        const Mat& gv2 = gg.val(gamma);
        const int R = gd.rows(), C = gd.cols();
        if (gg.needs_grad(gamma)) {
          Mat& pg = gg.grad_ref(gamma.id);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) pg(0, c) += gd(r, c) * xhat(r, c);
        }
        if (gg.needs_grad(beta)) {
          Mat& pg = gg.grad_ref(beta.id);
          for (int r = 0; r < R; ++r)
            for (int c = 0; c < C; ++c) pg(0, c) += gd(r, c);
        }
        if (gg.needs_grad(x)) {
          Mat& pg = gg.grad_ref(x.id);
          for (int r = 0; r < R; ++r) {
            double mean_gy = 0.0, mean_gyx = 0.0;
            for (int c = 0; c < C; ++c) {
              const double t = gd(r, c) * gv2(0, c);
              mean_gy += t;
              mean_gyx += t * xhat(r, c);
            }
            mean_gy /= C;
            mean_gyx /= C;
            for (int c = 0; c < C; ++c) {
              const double t = gd(r, c) * gv2(0, c);
              pg(r, c) += (t - mean_gy - xhat(r, c) * mean_gyx) * inv_sigma(r, 0);
            }
          }
        }
      });
}

Var batchnorm_train(Var x, Var gamma, Var beta, double eps, Mat* batch_mean,
                    Mat* batch_var) {
  Graph& g = *x.g;
  const Mat& xv = g.val(x);
  const Mat& gv = g.val(gamma);
  const Mat& bv = g.val(beta);
  const int B = xv.rows(), C = xv.cols();
  assert(gv.cols() == C && bv.cols() == C);
  Mat mu(1, C), var(1, C);
  for (int c = 0; c < C; ++c) {
    double m = 0.0;
    for (int r = 0; r < B; ++r) m += xv(r, c);
    m /= B;
    double v = 0.0;
    for (int r = 0; r < B; ++r) {
      const double d = xv(r, c) - m;
      v += d * d;
    }
    mu(0, c) = m;
    var(0, c) = v / B;
  }
  if (batch_mean) *batch_mean = mu;
  if (batch_var) *batch_var = var;
  Mat xhat(B, C), out(B, C), inv_sigma(1, C);
  for (int c = 0; c < C; ++c) inv_sigma(0, c) = 1.0 / std::sqrt(var(0, c) + eps);
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < C; ++c) {
      xhat(r, c) = (xv(r, c) - mu(0, c)) * inv_sigma(0, c);
      out(r, c) = xhat(r, c) * gv(0, c) + bv(0, c);
    }
  return make_op(
      g, std::move(out), any_requires({x, gamma, beta}),
      [x, gamma, beta, xhat = std::move(xhat),
       inv_sigma = std::move(inv_sigma)](Graph& gg, int self) {
        const Mat& gd = gg.node(self).grad;
        const Mat& gv2 = gg.val(gamma);
        const int B = gd.rows(), C = gd.cols();
        if (gg.needs_grad(gamma)) {
          Mat& pg = gg.grad_ref(gamma.id);
          for (int r = 0; r < B; ++r)
            for (int c = 0; c < C; ++c) pg(0, c) += gd(r, c) * xhat(r, c);
        }
        if (gg.needs_grad(beta)) {
          Mat& pg = gg.grad_ref(beta.id);
          for (int r = 0; r < B; ++r)
            for (int c = 0; c < C; ++c) pg(0, c) += gd(r, c);
        }
        if (gg.needs_grad(x)) {
          Mat& pg = gg.grad_ref(x.id);
          for (int c = 0; c < C; ++c) {
            double mean_gy = 0.0, mean_gyx = 0.0;
            for (int r = 0; r < B; ++r) {
              mean_gy += gd(r, c);
              mean_gyx += gd(r, c) * xhat(r, c);
            }
            mean_gy /= B;
            mean_gyx /= B;
            const double scale_c = gv2(0, c) * inv_sigma(0, c);
            for (int r = 0; r < B; ++r)
              pg(r, c) +=
                  scale_c * (gd(r, c) - mean_gy - xhat(r, c) * mean_gyx);
          }
        }
      });
}

Var cosine_rows(Var a, Var b) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const Mat& bv = g.val(b);
  assert(av.same_shape(bv));
  const int R = av.rows(), C = av.cols();
  constexpr double kTiny = 1e-24;  // squared-norm floor for the zero-norm rule
  Mat out(R, 1);
  for (int r = 0; r < R; ++r) {
    double dot = 0.0, na2 = 0.0, nb2 = 0.0;
    for (int c = 0; c < C; ++c) {
      dot += av(r, c) * bv(r, c);
      na2 += av(r, c) * av(r, c);
      nb2 += bv(r, c) * bv(r, c);
    }
    out(r, 0) = (na2 < kTiny || nb2 < kTiny) ? 0.0 : dot / std::sqrt(na2 * nb2);
  }
  return make_op(g, std::move(out), any_requires({a, b}), [a, b](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    const Mat& y = gg.node(self).val;
    const Mat& av2 = gg.val(a);
    const Mat& bv2 = gg.val(b);
    const int R = av2.rows(), C = av2.cols();
    for (int r = 0; r < R; ++r) {
      const double gr = gd(r, 0);
      if (gr == 0.0) continue;
      double na2 = 0.0, nb2 = 0.0;
      for (int c = 0; c < C; ++c) {
        na2 += av2(r, c) * av2(r, c);
        nb2 += bv2(r, c) * bv2(r, c);
      }
      if (na2 < 1e-24 || nb2 < 1e-24) continue;  // similarity pinned to 0
      const double inv_ab = 1.0 / std::sqrt(na2 * nb2);
      const double cosv = y(r, 0);
      if (gg.needs_grad(a)) {
        Mat& pg = gg.grad_ref(a.id);
        for (int c = 0; c < C; ++c)
          pg(r, c) += gr * (bv2(r, c) * inv_ab - cosv * av2(r, c) / na2);
      }
      if (gg.needs_grad(b)) {
        Mat& pg = gg.grad_ref(b.id);
        for (int c = 0; c < C; ++c)
          pg(r, c) += gr * (av2(r, c) * inv_ab - cosv * bv2(r, c) / nb2);
      }
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Graph& g = *parts.front().g;
  int total_rows = 0;
  const int C = g.val(parts.front()).cols();
  bool req = false;
  for (Var p : parts) {
    assert(g.val(p).cols() == C);
    total_rows += g.val(p).rows();
    req = req || g.needs_grad(p);
  }
  Mat out(total_rows, C);
  int r0 = 0;
  for (Var p : parts) {
    const Mat& pv = g.val(p);
    for (int r = 0; r < pv.rows(); ++r)
      for (int c = 0; c < C; ++c) out(r0 + r, c) = pv(r, c);
    r0 += pv.rows();
  }
  return make_op(g, std::move(out), req, [parts](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    int r0 = 0;
    for (Var p : parts) {
      const int pr = gg.val(p).rows();
      if (gg.needs_grad(p)) {
        Mat& pg = gg.grad_ref(p.id);
        for (int r = 0; r < pr; ++r)
          for (int c = 0; c < gd.cols(); ++c) pg(r, c) += gd(r0 + r, c);
      }
      r0 += pr;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  Graph& g = *parts.front().g;
  int total_cols = 0;
  const int R = g.val(parts.front()).rows();
  bool req = false;
  for (Var p : parts) {
    assert(g.val(p).rows() == R);
    total_cols += g.val(p).cols();
    req = req || g.needs_grad(p);
  }
  Mat out(R, total_cols);
  int c0 = 0;
  for (Var p : parts) {
    const Mat& pv = g.val(p);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < pv.cols(); ++c) out(r, c0 + c) = pv(r, c);
    c0 += pv.cols();
  }
  return make_op(g, std::move(out), req, [parts](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    int c0 = 0;
    for (Var p : parts) {
      const int pc = gg.val(p).cols();
      if (gg.needs_grad(p)) {
        Mat& pg = gg.grad_ref(p.id);
        for (int r = 0; r < gd.rows(); ++r)
          for (int c = 0; c < pc; ++c) pg(r, c) += gd(r, c0 + c);
      }
      c0 += pc;
    }
  });
}

Var slice_rows(Var a, int r0, int n) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  assert(r0 >= 0 && r0 + n <= av.rows());
  Mat out(n, av.cols());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < av.cols(); ++c) out(r, c) = av(r0 + r, c);
  return make_op(g, std::move(out), g.needs_grad(a), [a, r0, n](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    Mat& pg = gg.grad_ref(a.id);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < gd.cols(); ++c) pg(r0 + r, c) += gd(r, c);
  });
}

Var slice_cols(Var a, int c0, int n) {
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  assert(c0 >= 0 && c0 + n <= av.cols());
  Mat out(av.rows(), n);
  for (int r = 0; r < av.rows(); ++r)
    for (int c = 0; c < n; ++c) out(r, c) = av(r, c0 + c);
  return make_op(g, std::move(out), g.needs_grad(a), [a, c0, n](Graph& gg, int self) {
    const Mat& gd = gg.node(self).grad;
    Mat& pg = gg.grad_ref(a.id);
    for (int r = 0; r < gd.rows(); ++r)
      for (int c = 0; c < n; ++c) pg(r, c0 + c) += gd(r, c);
  });
}

Var dropout(Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  Graph& g = *a.g;
  const Mat& av = g.val(a);
  const double keep_scale = 1.0 / (1.0 - rate);
  Mat mask(av.rows(), av.cols());
  for (size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  Mat out = av;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op(g, std::move(out), g.needs_grad(a),
                 [a, mask = std::move(mask)](Graph& gg, int self) {
                   const Mat& gd = gg.node(self).grad;
                   Mat& pg = gg.grad_ref(a.id);
                   for (size_t i = 0; i < pg.size(); ++i) pg[i] += gd[i] * mask[i];
                 });
}

Var dwconv3x3(Var x, Var w, Var b, int gh, int gw) {
  Graph& g = *x.g;
  const Mat& xv = g.val(x);
  const Mat& wv = g.val(w);
  const Mat& bv = g.val(b);
  const int C = xv.cols();
  assert(xv.rows() == gh * gw);
  assert(wv.rows() == C && wv.cols() == 9);
  assert(bv.rows() == 1 && bv.cols() == C);
  Mat out(xv.rows(), C);
  kernels::dwconv3x3(xv.data(), wv.data(), bv.data(), out.data(), gh, gw, C);
  return make_op(
      g, std::move(out), any_requires({x, w, b}), [x, w, b, gh, gw](Graph& gg, int self) {
        const Mat& gd = gg.node(self).grad;
        const Mat& xv2 = gg.val(x);
        const Mat& wv2 = gg.val(w);
        const int C = xv2.cols();
        double* dx = gg.needs_grad(x) ? gg.grad_ref(x.id).data() : nullptr;
        double* dw = gg.needs_grad(w) ? gg.grad_ref(w.id).data() : nullptr;
        double* db = gg.needs_grad(b) ? gg.grad_ref(b.id).data() : nullptr;
        kernels::dwconv3x3_backward(xv2.data(), wv2.data(), gd.data(), dx, dw, db,
                                    gh, gw, C);
      });
}

}  // namespace dcg::ad
