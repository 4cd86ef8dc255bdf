#pragma once

#include <functional>
#include <stdexcept>

namespace fedsched {

// Real branches of the Lambert W function, the inverse of w -> w*exp(w).
// Principal is defined on [-1/e, inf) with W >= -1; Secondary on [-1/e, 0)
// with W <= -1. Both meet at the branch point (-1/e, -1).
enum class WBranch { Principal, Secondary };

// Evaluates the requested branch to near machine precision.
// Halley iteration from a region-dependent initial guess; falls back to
// plain bisection if the iteration has not settled after 50 steps (it
// settles in < 10 on the whole domain in practice). Arguments outside the
// branch domain raise std::domain_error.
double lambert_w(WBranch branch, double x);

// Thrown by bisect_monotone when the bracket does not straddle a root.
struct BracketError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Root of a strictly decreasing continuous f on [lo, hi], located by
// bisection until the bracket is narrower than tol. Requires f(lo) > 0 and
// f(hi) < 0, otherwise throws BracketError; tol must be positive. Never
// evaluates f more than ceil(log2((hi - lo) / tol)) + 2 times.
double bisect_monotone(const std::function<double(double)>& f, double lo,
                       double hi, double tol);

}  // namespace fedsched
