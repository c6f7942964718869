#include "maskcov/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace maskcov::lp {
namespace {

constexpr double kPriceTol = 1e-10;
constexpr double kPivotTol = 1e-11;
constexpr int kDegenerateRunBeforeBland = 50;

}  // namespace

Solution solve_bounded(const BoundedProblem& problem, int max_pivots) {
  const Index rows = problem.a.rows();
  const Index structural = problem.a.cols();
  require_shape(problem.b.size() == rows && problem.c.size() == structural &&
                    problem.upper.size() == structural,
                "lp::solve_bounded: inconsistent problem dimensions");
  require((problem.b.array() >= 0.0).all(), "lp::solve_bounded: b must be nonnegative");
  require((problem.upper.array() >= 0.0).all(), "lp::solve_bounded: upper bounds must be nonnegative");

  const Index total = structural + rows;
  const double inf = std::numeric_limits<double>::infinity();

  Matrix tab(rows, total);
  tab.leftCols(structural) = problem.a;
  tab.rightCols(rows).setIdentity();
  Vector reduced(total);
  reduced.head(structural) = problem.c;
  reduced.tail(rows).setZero();
  Vector upper(total);
  upper.head(structural) = problem.upper;
  upper.tail(rows).setConstant(inf);

  Vector beta = problem.b;
  std::vector<Index> basis(rows);
  std::vector<char> is_basic(total, 0);
  std::vector<char> at_upper(total, 0);
  for (Index i = 0; i < rows; ++i) {
    basis[i] = structural + i;
    is_basic[structural + i] = 1;
  }

  Solution sol;
  int degenerate_run = 0;
  sol.status = Status::iteration_limit;
  for (int iter = 0; iter < max_pivots; ++iter) {
    const bool bland = degenerate_run >= kDegenerateRunBeforeBland;
    Index q = -1;
    double best = 0.0;
    for (Index j = 0; j < total; ++j) {
      if (is_basic[j]) continue;
      const double d = reduced(j);
      const bool eligible = at_upper[j] ? d < -kPriceTol : d > kPriceTol;
      if (!eligible) continue;
      if (bland) {
        q = j;
        break;
      }
      if (std::abs(d) > best) {
        best = std::abs(d);
        q = j;
      }
    }
    if (q < 0) {
      sol.status = Status::optimal;
      break;
    }
    const double dir = at_upper[q] ? -1.0 : 1.0;

    double theta = upper(q);
    Index leave = -1;
    double leave_pivot = 0.0;
    for (Index i = 0; i < rows; ++i) {
      const double g = dir * tab(i, q);
      double limit = inf;
      if (g > kPivotTol) {
        limit = std::max(beta(i), 0.0) / g;
      } else if (g < -kPivotTol && std::isfinite(upper(basis[i]))) {
        limit = std::max(upper(basis[i]) - beta(i), 0.0) / (-g);
      } else {
        continue;
      }
      bool take = false;
      if (leave < 0)
        take = limit <= theta;
      else if (limit < theta - 1e-14)
        take = true;
      else if (limit <= theta + 1e-14)
        take = bland ? basis[i] < basis[leave] : std::abs(g) > std::abs(leave_pivot);
      if (take) {
        theta = limit;
        leave = i;
        leave_pivot = g;
      }
    }
    if (!std::isfinite(theta)) {
      sol.status = Status::unbounded;
      break;
    }
    ++sol.pivots;
    degenerate_run = theta <= 1e-14 ? degenerate_run + 1 : 0;

    beta -= (dir * theta) * tab.col(q);
    if (leave < 0) {
      // Bound flip: the entering variable reaches its own opposite bound.
      at_upper[q] = !at_upper[q];
      continue;
    }

    const Index out = basis[leave];
    const double entering_value = (at_upper[q] ? upper(q) : 0.0) + dir * theta;
    at_upper[out] = leave_pivot < 0.0 ? 1 : 0;
    is_basic[out] = 0;
    is_basic[q] = 1;
    at_upper[q] = 0;
    basis[leave] = q;
    beta(leave) = entering_value;

    const double pivot = tab(leave, q);
    tab.row(leave) /= pivot;
    for (Index i = 0; i < rows; ++i) {
      if (i == leave) continue;
      const double factor = tab(i, q);
      if (factor != 0.0) tab.row(i) -= factor * tab.row(leave);
    }
    const double dq = reduced(q);
    reduced -= dq * tab.row(leave).transpose();
    reduced(q) = 0.0;
  }

  Vector x(total);
  for (Index j = 0; j < total; ++j) x(j) = at_upper[j] ? upper(j) : 0.0;
  for (Index i = 0; i < rows; ++i) x(basis[i]) = beta(i);
  sol.x = x.head(structural);
  sol.objective = problem.c.dot(sol.x);
  return sol;
}

}  // namespace maskcov::lp
