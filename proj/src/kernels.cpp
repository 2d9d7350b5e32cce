#include "dcg/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dcg::kernels {

namespace {

// Single output row of C = A*B. Shared by both implementations so the
// floating-point evaluation order is identical.
inline void mm_nn_row(const double* A, const double* B, double* C, int i, int k,
                      int n, bool accumulate) {
  const double* a = A + static_cast<size_t>(i) * k;
  double* c = C + static_cast<size_t>(i) * n;
  if (!accumulate) std::fill(c, c + n, 0.0);
  for (int p = 0; p < k; ++p) {
    const double av = a[p];
    const double* b = B + static_cast<size_t>(p) * n;
    for (int j = 0; j < n; ++j) c[j] += av * b[j];
  }
}

inline void mm_nt_row(const double* A, const double* B, double* C, int i, int k,
                      int n, bool accumulate) {
  const double* a = A + static_cast<size_t>(i) * k;
  double* c = C + static_cast<size_t>(i) * n;
  for (int j = 0; j < n; ++j) {
    const double* b = B + static_cast<size_t>(j) * k;
    double s = 0.0;
    for (int p = 0; p < k; ++p) s += a[p] * b[p];
    c[j] = accumulate ? c[j] + s : s;
  }
}

inline void mm_tn_row(const double* A, const double* B, double* C, int r, int m,
                      int k, int n, bool accumulate) {
  // Row r of C (k x n): C[r,j] = sum_i A[i,r] * B[i,j].
  double* c = C + static_cast<size_t>(r) * n;
  if (!accumulate) std::fill(c, c + n, 0.0);
  for (int i = 0; i < m; ++i) {
    const double av = A[static_cast<size_t>(i) * k + r];
    const double* b = B + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) c[j] += av * b[j];
  }
}

inline void dwconv3x3_row(const double* x, const double* w, const double* b,
                          double* y, int t, int gh, int gw, int C) {
  const int gy = t / gw;
  const int gx = t % gw;
  double* out = y + static_cast<size_t>(t) * C;
  for (int c = 0; c < C; ++c) out[c] = b ? b[c] : 0.0;
  for (int ky = 0; ky < 3; ++ky) {
    const int yy = gy + ky - 1;
    if (yy < 0 || yy >= gh) continue;
    for (int kx = 0; kx < 3; ++kx) {
      const int xx = gx + kx - 1;
      if (xx < 0 || xx >= gw) continue;
      const double* src = x + (static_cast<size_t>(yy) * gw + xx) * C;
      const int kidx = ky * 3 + kx;
      for (int c = 0; c < C; ++c) out[c] += w[static_cast<size_t>(c) * 9 + kidx] * src[c];
    }
  }
}

// Per-channel backward: depthwise channels are independent, so one thread
// owns all accumulations of a channel and the reduction order is fixed.
inline void dwconv3x3_backward_channel(const double* x, const double* w,
                                       const double* gy, double* dx, double* dw,
                                       double* db, int c, int gh, int gw, int C) {
  const int T = gh * gw;
  for (int t = 0; t < T; ++t) {
    const double g = gy[static_cast<size_t>(t) * C + c];
    if (db) db[c] += g;
    const int py = t / gw;
    const int px = t % gw;
    for (int ky = 0; ky < 3; ++ky) {
      const int yy = py + ky - 1;
      if (yy < 0 || yy >= gh) continue;
      for (int kx = 0; kx < 3; ++kx) {
        const int xx = px + kx - 1;
        if (xx < 0 || xx >= gw) continue;
        const size_t src = (static_cast<size_t>(yy) * gw + xx) * C + c;
        const int kidx = ky * 3 + kx;
        if (dx) dx[src] += w[static_cast<size_t>(c) * 9 + kidx] * g;
        if (dw) dw[static_cast<size_t>(c) * 9 + kidx] += x[src] * g;
      }
    }
  }
}

inline void softmax_row(const double* x, double* y, int r, int cols) {
  const double* in = x + static_cast<size_t>(r) * cols;
  double* out = y + static_cast<size_t>(r) * cols;
  double mx = in[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, in[j]);
  double denom = 0.0;
  for (int j = 0; j < cols; ++j) {
    out[j] = std::exp(in[j] - mx);
    denom += out[j];
  }
  const double inv = 1.0 / denom;
  for (int j = 0; j < cols; ++j) out[j] *= inv;
}

inline void sqdist_row(const double* X, const double* Y, double* D, int i, int ny,
                       int d) {
  const double* xi = X + static_cast<size_t>(i) * d;
  double* out = D + static_cast<size_t>(i) * ny;
  for (int j = 0; j < ny; ++j) {
    const double* yj = Y + static_cast<size_t>(j) * d;
    double s = 0.0;
    for (int p = 0; p < d; ++p) {
      const double diff = xi[p] - yj[p];
      s += diff * diff;
    }
    out[j] = s;
  }
}

}  // namespace

void mm_nn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_nn_row(A, B, C, i, k, n, accumulate);
}

void mm_nt(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) mm_nt_row(A, B, C, i, k, n, accumulate);
}

void mm_tn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < k; ++r) mm_tn_row(A, B, C, r, m, k, n, accumulate);
}

void dwconv3x3(const double* x, const double* w, const double* b, double* y, int gh,
               int gw, int C) {
  const int T = gh * gw;
#pragma omp parallel for schedule(static)
  for (int t = 0; t < T; ++t) dwconv3x3_row(x, w, b, y, t, gh, gw, C);
}

void dwconv3x3_backward(const double* x, const double* w, const double* gy,
                        double* dx, double* dw, double* db, int gh, int gw, int C) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c)
    dwconv3x3_backward_channel(x, w, gy, dx, dw, db, c, gh, gw, C);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) softmax_row(x, y, r, cols);
}

void pairwise_sqdist(const double* X, const double* Y, double* D, int nx, int ny,
                     int d) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nx; ++i) sqdist_row(X, Y, D, i, ny, d);
}

namespace serial {

void mm_nn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate) {
  for (int i = 0; i < m; ++i) mm_nn_row(A, B, C, i, k, n, accumulate);
}

void mm_nt(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate) {
  for (int i = 0; i < m; ++i) mm_nt_row(A, B, C, i, k, n, accumulate);
}

void mm_tn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate) {
  for (int r = 0; r < k; ++r) mm_tn_row(A, B, C, r, m, k, n, accumulate);
}

void dwconv3x3(const double* x, const double* w, const double* b, double* y, int gh,
               int gw, int C) {
  const int T = gh * gw;
  for (int t = 0; t < T; ++t) dwconv3x3_row(x, w, b, y, t, gh, gw, C);
}

void dwconv3x3_backward(const double* x, const double* w, const double* gy,
                        double* dx, double* dw, double* db, int gh, int gw, int C) {
  for (int c = 0; c < C; ++c)
    dwconv3x3_backward_channel(x, w, gy, dx, dw, db, c, gh, gw, C);
}

void softmax_rows(const double* x, double* y, int rows, int cols) {
  for (int r = 0; r < rows; ++r) softmax_row(x, y, r, cols);
}

void pairwise_sqdist(const double* X, const double* Y, double* D, int nx, int ny,
                     int d) {
  for (int i = 0; i < nx; ++i) sqdist_row(X, Y, D, i, ny, d);
}

}  // namespace serial

}  // namespace dcg::kernels
