"""Entire-function family behind the dissipation constants.

    f_s(y) = sum_{j>=2} j^(s+2) / j! * y^(j-1)

f_s(0) = 0 and f_s is strictly increasing on y >= 0 for every real s.  The
critical amplitude y* solves f_2(y*) = 1; data with ||h0||_2 < y* is
"medium size" and the Lyapunov functional ||h||_2 + sigma * int ||h||_6 is
non-increasing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

__all__ = [
    "eval_f_s",
    "eval_f2_closed",
    "eval_f_s_recursive",
    "recursion_polynomial",
    "solve_y_star",
    "effective_index",
    "sigma_constant",
    "truncation_order",
    "series_tail",
    "SeriesFunction",
    "DissipationConstants",
]

_MAX_TERMS = 10_000
_LOG_OVERFLOW = 709.0


def _check_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


def _log_term(s, y, j):
    return (s + 2.0) * math.log(j) - math.lgamma(j + 1.0) + (j - 1) * math.log(y)


def _tail_ratio(s, y, j):
    """Upper bound on t_{m+1}/t_m for every m >= j."""
    # ratio_m = ((m+1)/m)^(s+2) * y/(m+1), non-increasing in m
    return max(1.0, ((j + 1.0) / j) ** (s + 2.0)) * y / (j + 1.0)


def eval_f_s(s, y, tol=1e-12, max_terms=_MAX_TERMS):
    """Partial sum of f_s(y) and a rigorous bound on the neglected tail.

    Terms are accumulated with ``math.fsum``.  Summation stops at the first J
    for which the ratio bound rho of all later terms satisfies rho <= 1/2 and
    t_{J+1} / (1 - rho) <= tol.

    Returns
    -------
    (value, remainder_bound)
    """
    s = float(s)
    y = float(y)
    _check_finite(s=s, y=y, tol=float(tol))
    if y < 0:
        raise ValueError("y must be nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if y == 0.0:
        return 0.0, 0.0

    terms = []
    for j in range(2, max_terms + 2):
        lt = _log_term(s, y, j)
        if lt > _LOG_OVERFLOW:
            raise OverflowError(f"f_{s}({y}) exceeds double range")
        terms.append(math.exp(lt))
        rho = _tail_ratio(s, y, j + 1)
        if rho <= 0.5:
            nxt = math.exp(_log_term(s, y, j + 1))
            bound = nxt / (1.0 - rho)
            if bound <= tol:
                return math.fsum(terms), bound
    raise ArithmeticError(f"f_{s}({y}) did not reach tol={tol} in {max_terms} terms")


def eval_f2_closed(y):
    """(y^3 + 6y^2 + 7y + 1) e^y - 1, evaluated as written."""
    y = float(y)
    _check_finite(y=y)
    if y < 0:
        raise ValueError("y must be nonnegative")
    return (y**3 + 6.0 * y**2 + 7.0 * y + 1.0) * math.exp(y) - 1.0


def recursion_polynomial(s):
    """Integer coefficients (low to high) of P_s with f_s(y) = P_s(y) e^y - 1.

    Built from f_{-1} = e^y - 1 and f_s = d/dy (y f_{s-1}), which gives
    P_s = P_{s-1} + y P_{s-1}' + y P_{s-1}.
    """
    if int(s) != s or s < -1:
        raise ValueError("recursion is defined for integer s >= -1")
    p = [1]
    for _ in range(int(s) + 1):
        q = [0] * (len(p) + 1)
        for i, c in enumerate(p):
            q[i] += c + i * c  # P + y P'
            q[i + 1] += c  # y P
        p = q
    return p


def eval_f_s_recursive(s, y):
    """Closed-form f_s(y) for integer s >= -1 via the derivative recursion."""
    y = float(y)
    _check_finite(y=y)
    if y < 0:
        raise ValueError("y must be nonnegative")
    coeffs = recursion_polynomial(s)
    # P(0) = 1, so P(y) e^y - 1 = P(y) expm1(y) + (P(y) - 1) avoids cancellation
    p_minus_1 = 0.0
    for c in reversed(coeffs[1:]):
        p_minus_1 = (p_minus_1 + c) * y
    return (1.0 + p_minus_1) * math.expm1(y) + p_minus_1


def effective_index(s, p):
    """Series index s + 4/p - 4 attached to the F^{s,p} estimate."""
    return s + 4.0 / p - 4.0


def solve_y_star(s_eff=2.0, tol=1e-12):
    """Root of f_{s_eff}(y) = 1 on y > 0."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    s_eff = float(s_eff)
    inner = min(tol, 1e-15) * 1e-2

    def g(y):
        return eval_f_s(s_eff, y, tol=inner)[0] - 1.0

    hi = 1.0
    while g(hi) <= 0.0:
        hi *= 2.0
    # brentq: secant/inverse-quadratic steps safeguarded by bisection
    return brentq(g, 0.0, hi, xtol=1e-15, rtol=4.0 * 2.0**-52, maxiter=500)


def sigma_constant(s, p, h0_norm2, tol=1e-15):
    """Dissipation constant 1 - f_{s+4/p-4}(||h0||_2).

    A non-positive return value means the smallness hypothesis fails for this
    (s, p); the caller decides what to do about it.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    if h0_norm2 < 0:
        raise ValueError("h0_norm2 must be nonnegative")
    return 1.0 - eval_f_s(effective_index(s, p), h0_norm2, tol=tol)[0]


def truncation_order(s, y_bound, eps):
    """Smallest J >= 2 with sum_{j>J} j^(s+2)/j! y^(j-1) <= eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if y_bound < 0:
        raise ValueError("y_bound must be nonnegative")
    if y_bound == 0:
        return 2
    # tail(J) = sum_{j > J} t_j, summed directly until terms are negligible
    j_stop = 2
    while True:
        j_stop += 1
        if _tail_ratio(s, y_bound, j_stop) <= 0.5:
            lt = _log_term(s, y_bound, j_stop)
            if math.exp(lt) < 1e-30 * eps:
                break
        if j_stop > _MAX_TERMS:
            raise ArithmeticError("tail did not become negligible")
    terms = [math.exp(_log_term(s, y_bound, j)) for j in range(2, j_stop + 1)]
    tail = 0.0
    order = j_stop
    for j in range(j_stop, 1, -1):
        # tail currently holds sum_{i > j}
        if tail > eps:
            break
        order = j
        tail += terms[j - 2]
    return max(order, 2)


def series_tail(s, y, order):
    """Upper bound on sum_{j > order} j^(s+2)/j! y^(j-1)."""
    if y < 0:
        raise ValueError("y must be nonnegative")
    if y == 0:
        return 0.0
    terms = []
    j = max(int(order), 1) + 1
    while True:
        t = math.exp(_log_term(s, y, j))
        terms.append(t)
        rho = _tail_ratio(s, y, j + 1)
        if rho <= 0.5:
            nxt = math.exp(_log_term(s, y, j + 1))
            bound = nxt / (1.0 - rho)
            if bound <= 1e-17 * math.fsum(terms):
                return math.fsum(terms) + bound
        j += 1
        if j > _MAX_TERMS:
            raise ArithmeticError("tail sum did not converge")


@dataclass(frozen=True)
class SeriesFunction:
    """f_s with a fixed truncation policy."""

    s: float
    truncation_tolerance: float = 1e-12
    max_terms: int = _MAX_TERMS

    def __post_init__(self):
        if self.truncation_tolerance <= 0:
            raise ValueError("truncation_tolerance must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be positive")

    def __call__(self, y):
        return self.evaluate(y)[0]

    def evaluate(self, y):
        return eval_f_s(self.s, y, self.truncation_tolerance, self.max_terms)

    def root(self, tol=1e-12):
        return solve_y_star(self.s, tol)


@dataclass
class DissipationConstants:
    y_star: float
    sigma: dict = field(default_factory=dict)

    @classmethod
    def compute(cls, pairs, h0_norm2, tol=1e-12):
        """y* for s_eff = 2 and sigma(s, p) for each requested pair."""
        sig = {(float(s), float(p)): sigma_constant(s, p, h0_norm2) for s, p in pairs}
        return cls(y_star=solve_y_star(2.0, tol), sigma=sig)
