#include <doctest.h>

#include <cmath>

#include "dcg/autodiff.hpp"
#include "dcg/mat.hpp"
#include "dcg/rng.hpp"
#include "fd_check.hpp"

using namespace dcg;
using namespace dcg::ad;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (size_t i = 0; i < m.size(); ++i) m[i] = scale * rng.normal();
  return m;
}

// Checks d(f)/d(x) for a scalar-valued graph builder at input x.
void check_input_grad(const std::function<Var(Graph&, Var)>& build, const Mat& x,
                      double tol = 1e-6) {
  Graph g;
  Var in = g.input(x);
  Var out = build(g, in);
  REQUIRE(g.val(out).rows() == 1);
  REQUIRE(g.val(out).cols() == 1);
  g.backward(out);
  Mat analytic = g.grad(in);

  auto f = [&](const Mat& probe) {
    Graph g2;
    Var in2 = g2.input(probe);
    return g2.scalar(build(g2, in2));
  };
  auto rep = testutil::fd_compare(f, x, analytic);
  CHECK_MESSAGE(rep.max_rel_err < tol,
                "max rel err ", rep.max_rel_err, " at index ", rep.worst_index,
                " analytic ", rep.worst_analytic, " numeric ", rep.worst_numeric);
}

}  // namespace

TEST_CASE("autodiff: elementwise and reduction gradients") {
  Rng rng(11);
  Mat x = random_mat(3, 4, rng);

  check_input_grad(
      [](Graph& g, Var v) { return sum_all(mul(v, v)); }, x);
  check_input_grad(
      [](Graph& g, Var v) { return mean_all(tanh_op(v)); }, x);
  check_input_grad(
      [](Graph& g, Var v) { return sum_all(sigmoid(scale(v, 2.0))); }, x);
  check_input_grad(
      [](Graph& g, Var v) { return sum_all(softplus(v)); }, x);
  check_input_grad(
      [](Graph& g, Var v) { return sum_all(gelu(v)); }, x);
  check_input_grad(
      [](Graph& g, Var v) {
        return sum_all(sqrt_op(add_scalar(mul(v, v), 1.0)));
      },
      x);
}

TEST_CASE("autodiff: matmul family gradients") {
  Rng rng(12);
  Mat x = random_mat(4, 3, rng);
  Mat w = random_mat(3, 5, rng);
  Mat u = random_mat(6, 3, rng);

  check_input_grad(
      [&](Graph& g, Var v) { return sum_all(matmul(v, g.constant(w))); }, x);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(matmul_nt(v, g.constant(u)), matmul_nt(v, g.constant(u))));
      },
      x);
  check_input_grad(
      [&](Graph& g, Var v) { return sum_all(transpose(mul(v, v))); }, x);

  // Gradient with respect to the weight side as well.
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(matmul(g.constant(x), v), matmul(g.constant(x), v)));
      },
      w);
}

TEST_CASE("autodiff: softmax, log-softmax, layernorm gradients") {
  Rng rng(13);
  Mat x = random_mat(3, 6, rng);
  Mat gamma = random_mat(1, 6, rng, 0.5);
  Mat beta = random_mat(1, 6, rng, 0.5);
  Mat c = random_mat(3, 6, rng);

  check_input_grad(
      [&](Graph& g, Var v) { return sum_all(mul(softmax_rows(v), g.constant(c))); },
      x);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(log_softmax_rows(v), g.constant(c)));
      },
      x);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(
            layernorm_rows(v, g.constant(gamma), g.constant(beta)), g.constant(c)));
      },
      x);
  // Through gamma.
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(
            mul(layernorm_rows(g.input(x), v, g.constant(beta)), g.constant(c)));
      },
      gamma);
}

TEST_CASE("autodiff: batchnorm training-mode gradient") {
  Rng rng(14);
  Mat x = random_mat(8, 5, rng);
  Mat gamma = random_mat(1, 5, rng, 0.5);
  Mat beta = random_mat(1, 5, rng, 0.5);
  Mat c = random_mat(8, 5, rng);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(batchnorm_train(v, g.constant(gamma), g.constant(beta),
                                           1e-5, nullptr, nullptr),
                           g.constant(c)));
      },
      x);
}

TEST_CASE("autodiff: broadcast, slice, concat, colvec gradients") {
  Rng rng(15);
  Mat x = random_mat(4, 6, rng);
  Mat v_row = random_mat(1, 6, rng);
  Mat v_col = random_mat(4, 1, rng);
  Mat c = random_mat(4, 6, rng);

  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(add_rowvec(v, g.constant(v_row)), g.constant(c)));
      },
      x);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(mul_rowvec(g.input(x), v), g.constant(c)));
      },
      v_row);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(mul_colvec(v, g.constant(v_col)), g.constant(c)));
      },
      x);
  check_input_grad(
      [&](Graph& g, Var v) {
        Var top = slice_rows(v, 0, 2);
        Var bottom = slice_rows(v, 2, 2);
        Var rejoined = concat_rows({bottom, top});
        Var left = slice_cols(rejoined, 0, 3);
        Var right = slice_cols(rejoined, 3, 3);
        return sum_all(mul(concat_cols({right, left}), g.constant(c)));
      },
      x);
}

TEST_CASE("autodiff: cosine similarity gradient") {
  Rng rng(16);
  Mat a = random_mat(5, 4, rng);
  Mat b = random_mat(5, 4, rng);
  Mat c = random_mat(5, 1, rng);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(cosine_rows(v, g.constant(b)), g.constant(c)));
      },
      a);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(cosine_rows(g.constant(a), v), g.constant(c)));
      },
      b);
}

TEST_CASE("autodiff: cosine similarity zero-norm rows yield similarity 0") {
  Graph g;
  Mat a(2, 3);
  a(0, 0) = 1.0;  // row 1 is all zeros
  Mat b(2, 3, 1.0);
  Var c = cosine_rows(g.constant(a), g.constant(b));
  CHECK(g.val(c)(0, 0) == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(g.val(c)(1, 0) == 0.0);
}

TEST_CASE("autodiff: dwconv3x3 gradient via finite differences") {
  Rng rng(17);
  const int gh = 3, gw = 4, C = 5;
  Mat x = random_mat(gh * gw, C, rng);
  Mat w = random_mat(C, 9, rng, 0.4);
  Mat bias = random_mat(1, C, rng, 0.1);
  Mat c = random_mat(gh * gw, C, rng);

  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(
            dwconv3x3(v, g.constant(w), g.constant(bias), gh, gw), g.constant(c)));
      },
      x);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(mul(
            dwconv3x3(g.constant(x), v, g.constant(bias), gh, gw), g.constant(c)));
      },
      w);
  check_input_grad(
      [&](Graph& g, Var v) {
        return sum_all(
            mul(dwconv3x3(g.constant(x), g.constant(w), v, gh, gw), g.constant(c)));
      },
      bias);
}

TEST_CASE("autodiff: dropout is identity at rate 0 and scales by kept mask") {
  Graph g;
  Rng rng(5);
  Mat x = random_mat(4, 4, rng);
  Var in = g.constant(x);
  Var out0 = dropout(in, 0.0, rng);
  CHECK(out0.id == in.id);  // rate 0 short-circuits

  Rng rng2(6);
  Var out = dropout(in, 0.5, rng2);
  const Mat& y = g.val(out);
  for (size_t i = 0; i < y.size(); ++i) {
    const bool dropped = y[i] == 0.0;
    const bool doubled = std::fabs(y[i] - 2.0 * x[i]) < 1e-15;
    CHECK((dropped || doubled));
  }
}

TEST_CASE("autodiff: gradient accumulates across fan-out") {
  Graph g;
  Var x = g.input(Mat::scalar(3.0));
  Var y = add(mul(x, x), scale(x, 4.0));  // x^2 + 4x -> dy/dx = 2x + 4 = 10
  g.backward(y);
  CHECK(g.grad(x)(0, 0) == doctest::Approx(10.0));
}
