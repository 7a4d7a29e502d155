"""Stationary solutions of the viscous system.

A time-independent gamma solves

    nu lambda_n^2 gamma_n + lambda_n^beta gamma_n gamma_{n+1}
        - lambda_{n-1}^beta gamma_{n-1}^2 = 0.

With gamma_n = -nu 2^((n-1)(2-beta)) a_n this becomes the recursion
a_n a_{n+1} = a_n + u a_{n-1}^2, u = 2^(2 beta - 6), with a_0 = 0 and
a_2 = 1 (a_1 free). For u < 1/3 the interval [A, B] is invariant for the
recursion and a_1 is chosen by bisection so that (a_n) ends up inside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

LAM = 2.0


def u_of_beta(beta: float) -> float:
    return LAM ** (2.0 * beta - 6.0)


def fixed_point_interval(u: float):
    if not u > 0:
        raise ValueError("u must be positive")
    if not u < 1.0 / 3.0:
        raise ValueError("u must be < 1/3 for the invariant interval to exist")
    s = math.sqrt((1.0 - 3.0 * u) / (1.0 + u))
    return (1.0 - s) / (2.0 * u), (1.0 + s) / (2.0 * u)


def recursion_step(a_prev: float, a_cur: float, u: float) -> float:
    if a_cur == 0:
        raise ZeroDivisionError("a_cur = 0 (gamma_n = 0): the recursion is undefined")
    if not a_cur > 0:
        raise ValueError("a_cur must be positive")
    return 1.0 + u * a_prev * a_prev / a_cur


def sequence(a1: float, u: float, n_max: int) -> np.ndarray:
    """a_1..a_{n_max} from a_1, a_2 = 1 (0-based storage, a[k] = a_{k+1})."""
    a = np.empty(n_max)
    a[0] = a1
    if n_max > 1:
        a[1] = 1.0
    with np.errstate(over="ignore"):
        for k in range(2, n_max):
            if not math.isfinite(a[k - 1]):
                a[k:] = np.inf
                break
            a[k] = 1.0 + u * a[k - 2] * a[k - 2] / a[k - 1]
    return a


class BracketError(RuntimeError):
    """No usable sign change in the a_1 bracket."""

    def __init__(self, msg, traces):
        super().__init__(msg)
        self.traces = traces


@dataclass(frozen=True)
class Trial:
    a1: float
    label: str  # "captured", "above" or "below"
    index: Optional[int]  # 1-based capture index or escape index


def classify(a1: float, u: float, n_max: int) -> Trial:
    """Captured if some consecutive pair (a_n, a_{n+1}), n >= 2, lies in
    [A, B] (it then stays there); otherwise the side of the last term."""
    A, B = fixed_point_interval(u)
    a = sequence(a1, u, n_max)
    inside = (a >= A) & (a <= B)
    both = inside[1:-1] & inside[2:]
    hits = np.nonzero(both)[0]
    if hits.size:
        return Trial(a1, "captured", int(hits[0]) + 2)
    last = a[-1]
    out = np.nonzero(~inside[1:])[0]
    idx = int(out[-1]) + 2 if out.size else None
    return Trial(a1, "above" if last > B else "below", idx)


@dataclass
class StationaryProfile:
    u: float
    A: float
    B: float
    n_max: int
    a: np.ndarray
    a1: float
    n_star: int  # first index from which (a_n) stays in [A, B]
    trace: list = field(default_factory=list)

    def to_dict(self):
        return {"u": self.u, "A": self.A, "B": self.B, "n_max": self.n_max, "a1": self.a1,
                "n_star": self.n_star, "a": self.a.tolist(),
                "trace": [{"a1": t.a1, "label": t.label, "index": t.index} for t in self.trace]}


def find_a1(u: float, n_max: int = 200, tol: float = 1e-12, n_scan: int = 33) -> StationaryProfile:
    """Bisection on a_1 over [0, B (1 + u)].

    A coarse scan first checks that the classification is monotone
    (captured for small a_1, escaping above for large a_1); otherwise a
    BracketError carrying the scan is raised. The returned a_1 is the
    captured end of the final bracket.
    """
    if n_max < 50:
        raise ValueError("n_max must be >= 50")
    A, B = fixed_point_interval(u)
    lo, hi = 0.0, B * (1.0 + u)
    scan = [classify(x, u, n_max) for x in np.linspace(lo, hi, n_scan)]
    labels = [t.label for t in scan]
    changes = sum(1 for p, q in zip(labels, labels[1:]) if p != q)
    if labels[0] != "captured" or labels[-1] == "captured" or changes != 1:
        raise BracketError(
            f"classification over [0, {hi:.6g}] is not a single captured->escaped switch: "
            f"{labels}", scan)
    trace = list(scan)
    i = labels.index(labels[-1])
    lo, hi = scan[i - 1].a1, scan[i].a1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        t = classify(mid, u, n_max)
        trace.append(t)
        if t.label == "captured":
            lo = mid
        else:
            hi = mid
    a = sequence(lo, u, n_max)
    inside = (a >= A) & (a <= B)
    outside = np.nonzero(~inside)[0]
    n_star = int(outside[-1]) + 2 if outside.size else 1
    if n_star > n_max:
        raise BracketError("returned a_1 does not stay in [A, B] up to n_max", trace)
    return StationaryProfile(u, A, B, n_max, a, lo, n_star, trace)


def gamma_weights(beta: float, n: int) -> np.ndarray:
    """2^((k-1)(2-beta)) for k = 1..n (the weight is 1 at the first shell)."""
    k = np.arange(1, n + 1, dtype=float)
    return LAM ** ((k - 1.0) * (2.0 - beta))


@dataclass
class GammaReport:
    gamma: np.ndarray
    residual: np.ndarray  # n = 1..n_max-1
    scaled_residual: np.ndarray
    max_scaled_residual: float
    partial_sums: np.ndarray  # relative partial-sum identity defect per N
    max_partial_sum_defect: float
    energy: float  # sum of gamma_n^2 (membership in H is not claimed)

    def to_dict(self):
        return {"gamma": self.gamma.tolist(), "max_scaled_residual": self.max_scaled_residual,
                "max_partial_sum_defect": self.max_partial_sum_defect, "energy": self.energy}


def stat_residual(gamma, nu: float, beta: float) -> tuple:
    """Residual of the stationary equation for n = 1..len-1 and its scale
    (sum of the absolute values of the three terms)."""
    g = np.asarray(gamma, dtype=float)
    n = np.arange(1, g.size, dtype=float)
    lam_n = LAM ** n
    lam_prev = np.where(n > 1, LAM ** (n - 1), 0.0)
    gp = np.concatenate(([0.0], g[:-2]))
    t1 = nu * lam_n ** 2 * g[:-1]
    t2 = lam_n ** beta * g[:-1] * g[1:]
    t3 = lam_prev ** beta * gp * gp
    return t1 + t2 - t3, np.abs(t1) + np.abs(t2) + np.abs(t3)


def build_gamma(profile: StationaryProfile, nu: float, beta: float) -> GammaReport:
    if not nu > 0:
        raise ValueError("nu must be positive")
    if not math.isclose(u_of_beta(beta), profile.u, rel_tol=1e-12):
        raise ValueError(f"profile u={profile.u} does not match beta={beta}")
    gamma = -nu * gamma_weights(beta, profile.n_max) * profile.a
    res, scale = stat_residual(gamma, nu, beta)
    scaled = np.divide(np.abs(res), scale, out=np.zeros_like(res), where=scale > 0)
    # nu sum_{n<=N} lambda_n^2 gamma_n^2 + lambda_N^beta gamma_N^2 gamma_{N+1} = 0
    n = np.arange(1, profile.n_max, dtype=float)
    diss = np.cumsum(nu * (LAM ** n) ** 2 * gamma[:-1] ** 2)
    flux = (LAM ** n) ** beta * gamma[:-1] ** 2 * gamma[1:]
    defect = np.abs(diss + flux) / np.maximum(np.abs(diss), np.abs(flux))
    return GammaReport(gamma, res, scaled, float(np.max(scaled)) if scaled.size else 0.0,
                       defect, float(np.max(defect)) if defect.size else 0.0,
                       float(np.sum(gamma ** 2)))


@dataclass(frozen=True)
class DecayBand:
    c1: float
    c2: float
    n0: int  # first nonzero index (1-based)
    negative_after_n0: bool


def decay_check(gamma, beta: float) -> DecayBand:
    """Observed band of lambda_n^(beta-2) |gamma_n| for n > n0."""
    g = np.asarray(gamma, dtype=float)
    nz = np.nonzero(g)[0]
    if nz.size == 0:
        raise ValueError("zero stationary profile")
    n0 = int(nz[0]) + 1
    tail = g[n0:]
    n = np.arange(n0 + 1, g.size + 1, dtype=float)
    w = (LAM ** n) ** (beta - 2.0) * np.abs(tail)
    return DecayBand(float(np.min(w)), float(np.max(w)), n0, bool(np.all(tail < 0)))
