// Benchmark comparing the OpenMP kernels against their serial references.
// Usage: bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "dcg/kernels.hpp"
#include "dcg/mat.hpp"
#include "dcg/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace dcg;

namespace {

double time_best_of(const std::function<void()>& fn, int repeats) {
  fn();  // warmup
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (size_t i = 0; i < m.size(); ++i) m[i] = rng.normal();
  return m;
}

void report(const char* name, double serial_s, double omp_s) {
  std::printf("%-18s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx\n", name,
              serial_s * 1e3, omp_s * 1e3, serial_s / omp_s);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  Rng rng(2024);

#ifdef _OPENMP
  std::printf("threads: %d, repeats: %d\n", omp_get_max_threads(), repeats);
#else
  std::printf("OpenMP disabled, repeats: %d\n", repeats);
#endif

  {
    const int m = 512, k = 512, n = 512;
    Mat A = random_mat(m, k, rng), B = random_mat(k, n, rng), C(m, n);
    report("mm_nn 512^3",
           time_best_of([&] { kernels::serial::mm_nn(A.data(), B.data(), C.data(), m, k, n); }, repeats),
           time_best_of([&] { kernels::mm_nn(A.data(), B.data(), C.data(), m, k, n); }, repeats));
    Mat Bt = random_mat(n, k, rng);
    report("mm_nt 512^3",
           time_best_of([&] { kernels::serial::mm_nt(A.data(), Bt.data(), C.data(), m, k, n); }, repeats),
           time_best_of([&] { kernels::mm_nt(A.data(), Bt.data(), C.data(), m, k, n); }, repeats));
    Mat Y = random_mat(m, n, rng), C2(k, n);
    report("mm_tn 512^3",
           time_best_of([&] { kernels::serial::mm_tn(A.data(), Y.data(), C2.data(), m, k, n); }, repeats),
           time_best_of([&] { kernels::mm_tn(A.data(), Y.data(), C2.data(), m, k, n); }, repeats));
  }

  {
    const int gh = 128, gw = 128, C = 64;
    Mat x = random_mat(gh * gw, C, rng), w = random_mat(C, 9, rng), b = random_mat(1, C, rng);
    Mat y(gh * gw, C);
    report("dwconv3x3 128^2x64",
           time_best_of([&] { kernels::serial::dwconv3x3(x.data(), w.data(), b.data(), y.data(), gh, gw, C); }, repeats),
           time_best_of([&] { kernels::dwconv3x3(x.data(), w.data(), b.data(), y.data(), gh, gw, C); }, repeats));
  }

  {
    const int rows = 4096, cols = 256;
    Mat x = random_mat(rows, cols, rng), y(rows, cols);
    report("softmax 4096x256",
           time_best_of([&] { kernels::serial::softmax_rows(x.data(), y.data(), rows, cols); }, repeats),
           time_best_of([&] { kernels::softmax_rows(x.data(), y.data(), rows, cols); }, repeats));
  }

  {
    const int nx = 1024, ny = 1024, d = 128;
    Mat X = random_mat(nx, d, rng), Y = random_mat(ny, d, rng), D(nx, ny);
    report("sqdist 1024^2x128",
           time_best_of([&] { kernels::serial::pairwise_sqdist(X.data(), Y.data(), D.data(), nx, ny, d); }, repeats),
           time_best_of([&] { kernels::pairwise_sqdist(X.data(), Y.data(), D.data(), nx, ny, d); }, repeats));
  }

  // Sanity: parallel and serial outputs must be bitwise identical.
  {
    const int m = 64, k = 64, n = 64;
    Mat A = random_mat(m, k, rng), B = random_mat(k, n, rng);
    Mat c1(m, n), c2(m, n);
    kernels::mm_nn(A.data(), B.data(), c1.data(), m, k, n);
    kernels::serial::mm_nn(A.data(), B.data(), c2.data(), m, k, n);
    for (size_t i = 0; i < c1.size(); ++i)
      if (c1[i] != c2[i]) {
        std::fprintf(stderr, "mismatch between omp and serial kernels!\n");
        return 1;
      }
    std::printf("bitwise check: omp == serial\n");
  }
  return 0;
}
