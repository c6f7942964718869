#pragma once

#include "maskcov/common.hpp"

namespace maskcov::lp {

/// maximize c^T x  subject to  A x <= b,  0 <= x <= upper,  with b >= 0.
/// upper entries may be +infinity. The origin is feasible, so a single
/// primal phase suffices.
struct BoundedProblem {
  Matrix a;
  Vector b;
  Vector c;
  Vector upper;
};

enum class Status { optimal, unbounded, iteration_limit };

struct Solution {
  Status status = Status::iteration_limit;
  Vector x;
  double objective = 0.0;
  int pivots = 0;
};

/// Dense-tableau bounded-variable primal simplex. Dantzig pricing, switching
/// to Bland's rule after a run of degenerate steps.
Solution solve_bounded(const BoundedProblem& problem, int max_pivots = 100000);

}  // namespace maskcov::lp
