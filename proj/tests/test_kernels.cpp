#include <doctest.h>

#include <vector>

#include "dcg/kernels.hpp"
#include "dcg/mat.hpp"
#include "dcg/rng.hpp"

using namespace dcg;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (size_t i = 0; i < m.size(); ++i) m[i] = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matmul kernels agree with naive triple loop") {
  Rng rng(7);
  const int m = 13, k = 9, n = 11;
  Mat A = random_mat(m, k, rng), B = random_mat(k, n, rng);
  Mat C(m, n);
  kernels::mm_nn(A.data(), B.data(), C.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += A(i, p) * B(p, j);
      CHECK(C(i, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("mm_nt and mm_tn match explicit transposes") {
  Rng rng(8);
  const int m = 6, k = 5, n = 7;
  Mat A = random_mat(m, k, rng);
  Mat Bt = random_mat(n, k, rng);  // will be used as B^T
  Mat C1(m, n);
  kernels::mm_nt(A.data(), Bt.data(), C1.data(), m, k, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += A(i, p) * Bt(j, p);
      CHECK(C1(i, j) == doctest::Approx(s).epsilon(1e-12));
    }

  Mat X = random_mat(m, k, rng), Y = random_mat(m, n, rng);
  Mat C2(k, n);
  kernels::mm_tn(X.data(), Y.data(), C2.data(), m, k, n);
  for (int r = 0; r < k; ++r)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += X(i, r) * Y(i, j);
      CHECK(C2(r, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("OpenMP kernels are bitwise identical to serial references") {
  Rng rng(99);
  const int m = 37, k = 23, n = 29;
  Mat A = random_mat(m, k, rng), B = random_mat(k, n, rng), Bt = random_mat(n, k, rng);

  Mat c_omp(m, n), c_ser(m, n);
  kernels::mm_nn(A.data(), B.data(), c_omp.data(), m, k, n);
  kernels::serial::mm_nn(A.data(), B.data(), c_ser.data(), m, k, n);
  for (size_t i = 0; i < c_omp.size(); ++i) CHECK(c_omp[i] == c_ser[i]);

  kernels::mm_nt(A.data(), Bt.data(), c_omp.data(), m, k, n);
  kernels::serial::mm_nt(A.data(), Bt.data(), c_ser.data(), m, k, n);
  for (size_t i = 0; i < c_omp.size(); ++i) CHECK(c_omp[i] == c_ser[i]);

  Mat Y = random_mat(m, n, rng);
  Mat t_omp(k, n), t_ser(k, n);
  kernels::mm_tn(A.data(), Y.data(), t_omp.data(), m, k, n);
  kernels::serial::mm_tn(A.data(), Y.data(), t_ser.data(), m, k, n);
  for (size_t i = 0; i < t_omp.size(); ++i) CHECK(t_omp[i] == t_ser[i]);

  const int gh = 5, gw = 6, C = 8;
  Mat x = random_mat(gh * gw, C, rng), w = random_mat(C, 9, rng);
  Mat bias = random_mat(1, C, rng);
  Mat y_omp(gh * gw, C), y_ser(gh * gw, C);
  kernels::dwconv3x3(x.data(), w.data(), bias.data(), y_omp.data(), gh, gw, C);
  kernels::serial::dwconv3x3(x.data(), w.data(), bias.data(), y_ser.data(), gh, gw, C);
  for (size_t i = 0; i < y_omp.size(); ++i) CHECK(y_omp[i] == y_ser[i]);

  Mat gy = random_mat(gh * gw, C, rng);
  Mat dx1(gh * gw, C), dw1(C, 9), db1(1, C);
  Mat dx2(gh * gw, C), dw2(C, 9), db2(1, C);
  kernels::dwconv3x3_backward(x.data(), w.data(), gy.data(), dx1.data(), dw1.data(),
                              db1.data(), gh, gw, C);
  kernels::serial::dwconv3x3_backward(x.data(), w.data(), gy.data(), dx2.data(),
                                      dw2.data(), db2.data(), gh, gw, C);
  for (size_t i = 0; i < dx1.size(); ++i) CHECK(dx1[i] == dx2[i]);
  for (size_t i = 0; i < dw1.size(); ++i) CHECK(dw1[i] == dw2[i]);
  for (size_t i = 0; i < db1.size(); ++i) CHECK(db1[i] == db2[i]);

  Mat sm_in = random_mat(17, 9, rng);
  Mat sm_omp(17, 9), sm_ser(17, 9);
  kernels::softmax_rows(sm_in.data(), sm_omp.data(), 17, 9);
  kernels::serial::softmax_rows(sm_in.data(), sm_ser.data(), 17, 9);
  for (size_t i = 0; i < sm_omp.size(); ++i) CHECK(sm_omp[i] == sm_ser[i]);

  Mat P = random_mat(12, 5, rng), Q = random_mat(9, 5, rng);
  Mat d_omp(12, 9), d_ser(12, 9);
  kernels::pairwise_sqdist(P.data(), Q.data(), d_omp.data(), 12, 9, 5);
  kernels::serial::pairwise_sqdist(P.data(), Q.data(), d_ser.data(), 12, 9, 5);
  for (size_t i = 0; i < d_omp.size(); ++i) CHECK(d_omp[i] == d_ser[i]);
}

TEST_CASE("dwconv3x3 matches hand-computed values on a tiny grid") {
  // 2x2 grid, 1 channel, kernel = all ones, zero bias: each output is the
  // sum of the in-bounds 3x3 neighborhood, i.e. the sum of all 4 cells.
  Mat x = Mat::from_rows({{1.0}, {2.0}, {3.0}, {4.0}});
  Mat w(1, 9, 1.0);
  Mat b(1, 1, 0.0);
  Mat y(4, 1);
  kernels::dwconv3x3(x.data(), w.data(), b.data(), y.data(), 2, 2, 1);
  for (int t = 0; t < 4; ++t) CHECK(y(t, 0) == doctest::Approx(10.0));

  // Identity kernel (center tap 1) reproduces the input.
  w.fill(0.0);
  w(0, 4) = 1.0;
  kernels::dwconv3x3(x.data(), w.data(), b.data(), y.data(), 2, 2, 1);
  for (int t = 0; t < 4; ++t) CHECK(y(t, 0) == x(t, 0));
}

TEST_CASE("softmax rows: normalization and shift invariance") {
  Rng rng(3);
  Mat x = random_mat(5, 7, rng);
  Mat y(5, 7);
  kernels::softmax_rows(x.data(), y.data(), 5, 7);
  for (int r = 0; r < 5; ++r) {
    double s = 0.0;
    for (int c = 0; c < 7; ++c) s += y(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  Mat xs = x;
  for (size_t i = 0; i < xs.size(); ++i) xs[i] += 5.5;
  Mat ys(5, 7);
  kernels::softmax_rows(xs.data(), ys.data(), 5, 7);
  for (size_t i = 0; i < y.size(); ++i) CHECK(ys[i] == doctest::Approx(y[i]).epsilon(1e-12));
}
