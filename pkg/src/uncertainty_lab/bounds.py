"""Closed-form observability constants and checks of measured ratios against them.

All constants are evaluated as natural logarithms, since exponents such as
``(c^d / gamma)^n a.b`` overflow quickly; ``exp`` of a log that is too large
gives ``inf``. Every constant ``K`` is oriented so that the inequality reads
``||f|| <= K ||f||_S``, i.e. a ratio ``rho = ||f||_S / ||f||`` passes when
``rho >= 1 / K``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .concentration import ConcentrationResult, ExtremalSearchResult, empirical_ratio
from .torus import BandLimitedFunction


@dataclass(frozen=True)
class UniversalConstants:
    """Unspecified universal constants, as configurable placeholders.

    The defaults ``c = c_tilde = 10`` are generous and carry no claim of
    optimality. ``N_d`` has no default and must be supplied where needed.
    """

    c: float = 10.0
    c_tilde: float = 10.0
    C_B: float = 1.0
    N_d: float | None = None
    C_kov: float = 10.0

    def __post_init__(self):
        for name in ("c", "c_tilde", "C_B", "C_kov"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.c_tilde < 3:
            raise ValueError(f"c_tilde must be at least 3, got {self.c_tilde}")
        if self.C_B < 1:
            raise ValueError(f"C_B must be at least 1, got {self.C_B}")
        if self.N_d is not None and not self.N_d > 0:
            raise ValueError(f"N_d must be positive, got {self.N_d}")


DEFAULT_CONSTANTS = UniversalConstants()


def safe_exp(x):
    return math.inf if x > 709 else math.exp(x)


def _inv_p(p):
    p = float(p)
    if not p >= 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return 0.0 if math.isinf(p) else 1.0 / p


def _check_gamma(gamma):
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")


def a_dot_b(a, b, d):
    a = np.broadcast_to(np.asarray(a, dtype=float), (d,))
    b = np.broadcast_to(np.asarray(b, dtype=float), (d,))
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("a and b must be positive")
    return float(a @ b)


EXPONENT_MODES = ("general", "integer-multiple")


def log_thm7_constant(gamma, a, b, p, d, consts=DEFAULT_CONSTANTS, mode="general"):
    """``log (c^d / gamma)^{c a.b + (6d+1)/p}``.

    ``mode="integer-multiple"`` uses the exponent ``c a.b + (4p+1)/p``
    available when ``2 pi L`` is an integer multiple of every ``a_j``.
    """
    _check_gamma(gamma)
    ip = _inv_p(p)
    ab = a_dot_b(a, b, d)
    if mode == "general":
        tail = (6 * d + 1) * ip
    elif mode == "integer-multiple":
        tail = 4 + ip
    else:
        raise ValueError(f"unknown exponent mode {mode!r}")
    return (consts.c * ab + tail) * math.log(consts.c ** d / gamma)


def thm7_constant(gamma, a, b, p, d, consts=DEFAULT_CONSTANTS, mode="general"):
    return safe_exp(log_thm7_constant(gamma, a, b, p, d, consts, mode))


def _power_exponent(base_log, n, ab, tail):
    """``base^n a.b + tail`` with the power taken in log space."""
    if ab == 0:
        return tail
    return safe_exp(n * base_log + math.log(ab)) + tail


def log_thm11_constant(gamma, a, b, n, p, d, consts=DEFAULT_CONSTANTS):
    """``log (c~^d / gamma)^{(c~^d / gamma)^n a.b + n - (p-1)/p}``."""
    _check_gamma(gamma)
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    ip = _inv_p(p)
    ab = a_dot_b(a, b, d)
    base_log = math.log(consts.c_tilde ** d / gamma)
    return _power_exponent(base_log, n, ab, n - (1 - ip)) * base_log


def thm11_constant(gamma, a, b, n, p, d, consts=DEFAULT_CONSTANTS):
    return safe_exp(log_thm11_constant(gamma, a, b, n, p, d, consts))


KOVRIJKINE_VARIANTS = ("line-single", "line-union", "box-single", "box-union")


def log_kovrijkine_constant(gamma, a, b, n, p, d, variant, consts=DEFAULT_CONSTANTS):
    """Logs of the reciprocals of the four reference constants on ``R^d``.

    ``line-single``: ``(gamma / C)^{C (a.b + 1)}``, ``line-union``:
    ``(gamma / C)^{a.b (C / gamma)^n + n - (p-1)/p}``, ``box-single``:
    ``(gamma / C^d)^{C (d + a.b)}`` and ``box-union``:
    ``(gamma / C^d)^{(C^d / gamma)^n a.b + n - (p-1)/p}``.
    """
    _check_gamma(gamma)
    ip = _inv_p(p)
    ab = a_dot_b(a, b, d)
    C = consts.C_kov
    if variant == "line-single":
        return C * (ab + 1) * math.log(C / gamma)
    if variant == "line-union":
        base_log = math.log(C / gamma)
        return _power_exponent(base_log, n, ab, n - (1 - ip)) * base_log
    if variant == "box-single":
        return C * (d + ab) * math.log(C ** d / gamma)
    if variant == "box-union":
        base_log = math.log(C ** d / gamma)
        return _power_exponent(base_log, n, ab, n - (1 - ip)) * base_log
    raise ValueError(f"unknown variant {variant!r}; choose from {KOVRIJKINE_VARIANTS}")


def kovrijkine_constant(gamma, a, b, n, p, d, variant, consts=DEFAULT_CONSTANTS):
    return safe_exp(log_kovrijkine_constant(gamma, a, b, n, p, d, variant, consts))


def nttv_constant(d, delta, G, Vnorm, E0, N_d):
    """``(delta / G)^{N (1 + G^{4/3} ||V||^{2/3} + G sqrt(E0))}``, a lower bound in ``(0, 1]``.

    `N_d` has no known value and is always an explicit input.
    """
    if d not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {d}")
    if not 0 < delta < G / 2:
        raise ValueError(f"need 0 < delta < G/2, got delta={delta}, G={G}")
    if Vnorm < 0 or E0 < 0:
        raise ValueError("Vnorm and E0 must be nonnegative")
    if N_d is None or not N_d > 0:
        raise ValueError("N_d must be a positive number")
    expo = N_d * (1 + G ** (4 / 3) * Vnorm ** (2 / 3) + G * math.sqrt(E0))
    return (delta / G) ** expo


# ------------------------------------------------------------- comparisons

BOUND_CSV_HEADER = "theorem,d,p,gamma,a_dot_b,n,log10_K,rho,log_slack,pass"


@dataclass(frozen=True)
class BoundReport:
    theorem: str
    d: int
    p: float
    gamma: float
    a_dot_b: float
    n: int
    log_K: float
    rho: float

    @property
    def K(self):
        return safe_exp(self.log_K)

    @property
    def log10_K(self):
        return self.log_K / math.log(10)

    @property
    def slack(self):
        """``log(K rho)``; nonnegative exactly when ``rho >= 1 / K``."""
        return self.log_K + (math.log(self.rho) if self.rho > 0 else -math.inf)

    @property
    def passed(self):
        return self.slack >= 0

    def csv_row(self):
        return ",".join([
            self.theorem, str(self.d), _fmt(self.p), _fmt(self.gamma), _fmt(self.a_dot_b),
            str(self.n), _fmt(self.log10_K), _fmt(self.rho), _fmt(self.slack),
            "1" if self.passed else "0",
        ])


def _fmt(x):
    return repr(float(x))


def observed_ratio(obj, S=None, p=2.0):
    """``rho`` from a function (needs `S`), a concentration result, a search result or a number."""
    if isinstance(obj, ConcentrationResult):
        if float(p) != 2:
            raise ValueError("a concentration result only gives the p = 2 ratio")
        return math.sqrt(obj.lambda_min)
    if isinstance(obj, ExtremalSearchResult):
        return obj.ratio
    if isinstance(obj, BandLimitedFunction):
        if S is None:
            raise ValueError("a set is needed to evaluate a function's ratio")
        return empirical_ratio(obj, S, p)
    return float(obj)


def verify_inequality(obj, S, p, K=None, *, log_K=None, theorem="thm7", d=None, gamma=math.nan,
                      a_dot_b=math.nan, n=1):
    """Compare a measured ratio with a constant given as `K` or `log_K`."""
    if (K is None) == (log_K is None):
        raise ValueError("give exactly one of K and log_K")
    if log_K is None:
        log_K = math.log(K) if K > 0 else -math.inf
    rho = observed_ratio(obj, S, p)
    if d is None:
        d = S.geometry.d if S is not None else 0
    return BoundReport(theorem, int(d), float(p), float(gamma), float(a_dot_b), int(n), float(log_K), rho)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    max_residual: float
    skipped: bool
    n_points: int


def polynomial_scaling_fit(gammas, lambdas):
    """Least-squares line of ``log(1/lambda)`` against ``log(1/gamma)``.

    Needs at least five thickness values in ``[0.05, 0.5]``. A sweep whose
    ``lambda`` values are all equal carries no slope and is skipped.
    """
    g = np.asarray(gammas, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    if g.shape != lam.shape or g.ndim != 1:
        raise ValueError("gammas and lambdas must be 1-d arrays of equal length")
    if g.size < 5:
        raise ValueError(f"need at least 5 thickness values, got {g.size}")
    if np.any(g < 0.05 - 1e-12) or np.any(g > 0.5 + 1e-12):
        raise ValueError("thickness values must lie in [0.05, 0.5]")
    if np.any(lam <= 0):
        raise ValueError("all lambda values must be positive")
    if np.ptp(lam) <= 1e-12 * lam.max():
        return ScalingFit(math.nan, math.nan, math.nan, True, int(g.size))
    x = np.log(1 / g)
    y = np.log(1 / lam)
    X = np.stack([x, np.ones_like(x)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.abs(X @ np.array([slope, icpt]) - y).max())
    return ScalingFit(float(slope), float(icpt), resid, False, int(g.size))


def slope_bound(ab, d, p, consts=DEFAULT_CONSTANTS):
    """Largest slope of ``log(1/lambda)`` in ``log(1/gamma)`` allowed by the general constant, ``2 (c a.b + (6d+1)/p)``."""
    return 2 * (consts.c * ab + (6 * d + 1) * _inv_p(p))


def calibrate_constant(instances, theorem="thm7", lo=None, hi=1e4, iters=80):
    """Smallest universal constant for which every instance passes.

    `instances` are mappings with keys ``gamma``, ``a_dot_b``, ``p``, ``d``,
    ``rho`` and (for ``thm11``) ``n``. Instances are grouped by ``(d, p)``;
    the result maps each group to its calibrated constant, or ``inf`` when
    even `hi` fails. Each constant ``K(c)`` is increasing in ``c`` on the
    searched range, so bisection applies.
    """
    groups = {}
    for inst in instances:
        groups.setdefault((int(inst["d"]), float(inst["p"])), []).append(inst)
    out = {}
    for key, items in sorted(groups.items()):
        d = key[0]
        floor = 3.0 if theorem == "thm11" else max(float(it["gamma"]) ** (1 / d) for it in items)
        a = floor if lo is None else max(lo, floor)

        def ok(c):
            for it in items:
                if theorem == "thm7":
                    consts = UniversalConstants(c=c)
                    lk = log_thm7_constant(it["gamma"], it["a_dot_b"] / d, 1.0, it["p"], d, consts)
                elif theorem == "thm11":
                    consts = UniversalConstants(c_tilde=c)
                    lk = log_thm11_constant(it["gamma"], it["a_dot_b"] / d, 1.0, it.get("n", 1), it["p"], d, consts)
                else:
                    raise ValueError(f"unknown theorem {theorem!r}")
                rho = float(it["rho"])
                if rho <= 0 or lk + math.log(rho) < 0:
                    return False
            return True

        if ok(a):
            out[key] = a
            continue
        if not ok(hi):
            out[key] = math.inf
            continue
        left, right = math.log(a), math.log(hi)
        for _ in range(iters):
            mid = 0.5 * (left + right)
            if ok(math.exp(mid)):
                right = mid
            else:
                left = mid
        out[key] = math.exp(right)
    return out
