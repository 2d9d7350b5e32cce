#pragma once

// Finite-difference gradient checking helpers shared by the unit and
// acceptance suites. The scalar function under test is re-evaluated from
// scratch for every probe, so it must be deterministic.

#include <cmath>
#include <functional>

#include "dcg/mat.hpp"

namespace dcg::testutil {

struct FdReport {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int worst_index = -1;
};

// Central finite differences of f with respect to the entries of x, compared
// against the provided analytic gradient. Relative error is measured against
// max(|a|, |n|, floor) so near-zero gradients do not blow up the ratio.
inline FdReport fd_compare(std::function<double(const Mat&)> f, const Mat& x,
                           const Mat& analytic, double h = 1e-6,
                           double floor = 1e-6) {
  FdReport rep;
  Mat probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_analytic = a;
      rep.worst_numeric = numeric;
      rep.worst_index = static_cast<int>(i);
    }
  }
  return rep;
}

}  // namespace dcg::testutil
