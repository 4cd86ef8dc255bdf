#include "fedsched/numeric.hpp"

#include <cmath>
#include <limits>

namespace fedsched {
namespace {

// exp(-1), the left edge of both branch domains.
const double kInvE = std::exp(-1.0);

// Series around the branch point (-1/e, -1) in p = sqrt(2*(e*x + 1)).
// Principal takes +p, Secondary takes -p. Coefficients from the standard
// expansion W = -1 + p - p^2/3 + 11 p^3/72 - 43 p^4/540.
double branch_point_seed(double x, bool principal) {
  double q = 2.0 * (std::exp(1.0) * x + 1.0);
  // x within a rounding error below -1/e still belongs to the domain edge.
  double p = q > 0.0 ? std::sqrt(q) : 0.0;
  if (!principal) p = -p;
  return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 - p * 43.0 / 540.0)));
}

double initial_guess(WBranch branch, double x) {
  if (branch == WBranch::Principal) {
    if (x < -0.32) return branch_point_seed(x, true);
    if (x < std::exp(1.0)) {
      // Pade-flavoured rational fit, good to ~10% on [-0.32, e).
      return x * (1.0 + 1.21 * x) / (1.0 + x * (2.04 + 0.89 * x));
    }
    // Asymptotic log(x) - log(log(x)) + log(log(x))/log(x); needs
    // log(x) >= 1 so the nested log stays nonnegative.
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    return l1 - l2 + l2 / l1;
  }
  if (x < -0.27) return branch_point_seed(x, false);
  // Toward 0^- the branch falls like log(-x); same asymptotic with
  // l1 = log(-x) < 0 and l2 = log(-l1).
  const double l1 = std::log(-x);
  const double l2 = std::log(-l1);
  return l1 - l2 + l2 / l1;
}

// One Halley step for f(w) = w e^w - x. Quadratically convergent near the
// root and tolerant of the mediocre mid-range seeds above.
double halley_step(double w, double x) {
  const double ew = std::exp(w);
  const double f = w * ew - x;
  const double denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
  return w - f / denom;
}

// Fallback: w e^w - x is monotone on each branch (increasing on [-1, inf),
// decreasing on (-inf, -1]), so a sign-changing bracket always exists.
double bisect_w(WBranch branch, double x) {
  double lo, hi;
  if (branch == WBranch::Principal) {
    lo = -1.0;
    hi = 1.0;
    while (hi * std::exp(hi) < x) hi *= 2.0;
  } else {
    hi = -1.0;
    lo = -2.0;
    while (lo * std::exp(lo) < x) lo *= 2.0;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) return mid;
    const double fm = mid * std::exp(mid) - x;
    const bool low_side = (branch == WBranch::Principal) ? (fm < 0.0) : (fm > 0.0);
    (low_side ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double lambert_w(WBranch branch, double x) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  if (branch == WBranch::Secondary && x >= 0.0) {
    throw std::domain_error("lambert_w: secondary branch needs x in [-1/e, 0)");
  }
  // -1/e itself is not representable; anything within a few ulps of it is
  // the branch point as far as doubles can tell, and W there is exactly -1.
  if (std::abs(x + kInvE) <= 8.0 * kEps * kInvE) return -1.0;
  if (x < -kInvE) throw std::domain_error("lambert_w: x below -1/e");
  if (x == 0.0) return 0.0;

  double w = initial_guess(branch, x);
  if (w <= -1.0 + 1e-12 && branch == WBranch::Principal) w = std::max(w, -1.0);
  if (w >= -1.0 - 1e-12 && branch == WBranch::Secondary) w = std::min(w, -1.0);

  for (int i = 0; i < 50; ++i) {
    if (w == -1.0) return w;  // exact branch point, Halley denominator degenerates
    const double next = halley_step(w, x);
    if (!std::isfinite(next)) break;
    if (std::abs(next - w) <= 2.0 * std::numeric_limits<double>::epsilon() * std::abs(next)) {
      return next;
    }
    w = next;
  }
  return bisect_w(branch, x);
}

double bisect_monotone(const std::function<double(double)>& f, double lo,
                       double hi, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("bisect_monotone: tol must be > 0");
  if (!(lo < hi)) throw BracketError("bisect_monotone: need lo < hi");
  if (!(f(lo) > 0.0) || !(f(hi) < 0.0)) {
    throw BracketError("bisect_monotone: f(lo) > 0 > f(hi) required");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;  // bracket at machine resolution
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace fedsched
