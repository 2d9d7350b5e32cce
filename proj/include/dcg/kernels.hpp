#pragma once

#include <cstddef>

// Data-parallel inner-loop kernels. Each kernel exists twice with identical
// semantics: the default (OpenMP) version parallelizes across independent
// output elements only, keeping the per-element arithmetic order identical
// to the serial reference in kernels::serial. Results are therefore bitwise
// equal between the two, regardless of thread count — the unit tests and the
// benchmark target (tools/bench_kernels) both rely on that.
namespace dcg::kernels {

// C[m x n] = A[m x k] * B[k x n]            (+= when accumulate)
void mm_nn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate = false);

// C[m x n] = A[m x k] * B[n x k]^T          (+= when accumulate)
void mm_nt(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate = false);

// C[k x n] = A[m x k]^T * B[m x n]          (+= when accumulate)
void mm_tn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate = false);

// Depthwise 3x3 convolution over a gh x gw token grid, zero padding,
// stride 1. x and y are [gh*gw x C] row-major token matrices (row index
// t = gy*gw + gx), w is [C x 9] (kernel index ky*3+kx), b is [C] or null.
void dwconv3x3(const double* x, const double* w, const double* b, double* y,
               int gh, int gw, int C);

// Gradients of dwconv3x3. Any of dx/dw/db may be null; non-null buffers are
// accumulated into (callers zero them first).
void dwconv3x3_backward(const double* x, const double* w, const double* gy,
                        double* dx, double* dw, double* db, int gh, int gw, int C);

// Row-wise softmax: y[r,:] = softmax(x[r,:]). x and y must not alias.
void softmax_rows(const double* x, double* y, int rows, int cols);

// D[i,j] = squared Euclidean distance between rows i of X [nx x d] and
// j of Y [ny x d]. D is [nx x ny].
void pairwise_sqdist(const double* X, const double* Y, double* D, int nx, int ny,
                     int d);

// Serial reference implementations, kept for testing and benchmarking.
namespace serial {
void mm_nn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate = false);
void mm_nt(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate = false);
void mm_tn(const double* A, const double* B, double* C, int m, int k, int n,
           bool accumulate = false);
void dwconv3x3(const double* x, const double* w, const double* b, double* y,
               int gh, int gw, int C);
void dwconv3x3_backward(const double* x, const double* w, const double* gy,
                        double* dx, double* dw, double* db, int gh, int gw, int C);
void softmax_rows(const double* x, double* y, int rows, int cols);
void pairwise_sqdist(const double* X, const double* Y, double* D, int nx, int ny,
                     int d);
}  // namespace serial

}  // namespace dcg::kernels
