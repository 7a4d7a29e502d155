"""The planar region A for consecutive rescaled pairs (Y_n, Y_{n+1}).

A is bounded above by g(x) = min(m x + theta, 1) and below by
h(x) = c ((x - delta)/(1 - delta))^4 (zero for x <= delta), with
0 <= x <= 1 and c = 2^(-gamma), gamma = 6 - 2 beta - 3 eps.

The module evaluates the two lower bounds that decide the sign of the
inviscid field on the curved parts of the boundary, certifies their
positivity on a grid with a per-cell derivative bound, searches for an
admissible eps, and scans the inward flux on all six boundary pieces.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

LAM = 2.0
LAM_SQ = 4  # exponent lambda^2 of the lower boundary


@dataclass(frozen=True)
class RegionSpec:
    delta: float = 0.1
    theta: float = 0.6
    m: float = 0.75
    gamma: float = 1.0
    c: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if self.theta < self.delta:
            raise ValueError("theta must be >= delta")
        if not self.m >= 0:
            raise ValueError("m must be >= 0")
        c = LAM ** (-self.gamma)
        if not 0 < c < 1:
            raise ValueError(f"c = 2^-gamma = {c} must lie in (0, 1) (gamma > 0)")
        object.__setattr__(self, "c", c)

    @classmethod
    def for_model(cls, beta: float, epsilon: float, **kw) -> "RegionSpec":
        """Region coupled to (beta, eps): gamma = 6 - 2 beta - 3 eps, c 2^gamma = 1."""
        return cls(gamma=6.0 - 2.0 * beta - 3.0 * epsilon, **kw)

    @property
    def kink(self) -> float:
        """Abscissa where the upper boundary reaches 1."""
        return min(1.0, (1.0 - self.theta) / self.m) if self.m > 0 else 1.0

    def to_dict(self) -> dict:
        return {"delta": self.delta, "theta": self.theta, "m": self.m,
                "gamma": self.gamma, "c": self.c}


def _domain(x, lo, hi, name):
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < lo) or np.any(xa > hi):
        raise ValueError(f"{name}: argument outside [{lo}, {hi}]")
    return xa


def _out(v, x):
    return float(v) if np.ndim(x) == 0 else v


def g_upper(x, spec: RegionSpec):
    xa = _domain(x, 0.0, 1.0, "g_upper")
    return _out(np.minimum(spec.m * xa + spec.theta, 1.0), x)


def _h(xa, spec):
    r = np.maximum(xa - spec.delta, 0.0) / (1.0 - spec.delta)
    return spec.c * r ** LAM_SQ


def h_lower(x, spec: RegionSpec):
    xa = _domain(x, 0.0, 1.0, "h_lower")
    return _out(_h(xa, spec), x)


def h_prime(x, spec: RegionSpec):
    xa = _domain(x, 0.0, 1.0, "h_prime")
    r = np.maximum(xa - spec.delta, 0.0) / (1.0 - spec.delta)
    return _out(spec.c * LAM_SQ * r ** (LAM_SQ - 1) / (1.0 - spec.delta), x)


def contains(point, spec: RegionSpec, tol: float = 1e-9) -> bool:
    """Closed-region membership with margin ``tol`` (also applied to x)."""
    x, y = (float(v) for v in point)
    if not (np.isfinite(x) and np.isfinite(y)):
        return False
    if x < -tol or x > 1.0 + tol:
        return False
    xc = min(max(x, 0.0), 1.0)
    return bool(_h(np.float64(xc), spec) - tol <= y <= min(spec.m * xc + spec.theta, 1.0) + tol)


def pairs_inside(values, spec: RegionSpec, tol: float = 1e-9) -> np.ndarray:
    """Membership of the consecutive pairs (Z_n, Z_{n+1}), n = 1..N-1.

    ``values`` has shape (..., N); the result has shape (..., N-1).
    """
    v = np.asarray(values, dtype=float)
    x, y = v[..., :-1], v[..., 1:]
    xc = np.clip(x, 0.0, 1.0)
    ok = (x >= -tol) & (x <= 1.0 + tol)
    ok &= y >= _h(xc, spec) - tol
    ok &= y <= np.minimum(spec.m * xc + spec.theta, 1.0) + tol
    return ok & np.isfinite(x) & np.isfinite(y)


def contains_all(values, spec: RegionSpec, tol: float = 1e-9):
    """True where every consecutive pair of a state lies in the region."""
    return np.all(pairs_inside(values, spec, tol), axis=-1)


# make RegionSpec usable directly by the RegionExit event
RegionSpec.contains_all = lambda self, values, tol=1e-9: contains_all(values, self, tol)


# ------------------------------------------------------------ psi and bounds
#
# Building blocks, all polynomials in x:
#   R = (m x + theta - delta)/(1 - delta),   r = (x - delta)/(1 - delta)
#   P = (m x + theta) R^4,  Q = x^2,  M = m x (m x + theta)
#   T1 = x^2 - theta r^4,   T2 = r^8,  T3 = r^3 (1 - x r^4)/(1 - delta)

def _blocks1(x, spec):
    R = (spec.m * x + spec.theta - spec.delta) / (1.0 - spec.delta)
    P = (spec.m * x + spec.theta) * R ** LAM_SQ
    return P, x * x, spec.m * x * (spec.m * x + spec.theta)


def _blocks2(x, spec):
    r = (x - spec.delta) / (1.0 - spec.delta)
    r4 = r ** LAM_SQ
    return x * x - spec.theta * r4, r4 * r4, r ** (LAM_SQ - 1) * (1.0 - x * r4) / (1.0 - spec.delta)


def psi1_domain(spec):
    return 0.0, spec.kink


def psi2_domain(spec):
    return spec.delta, 1.0


def psi1(x, spec: RegionSpec):
    xa = _domain(x, *psi1_domain(spec), "psi1")
    P, Q, M = _blocks1(xa, spec)
    return _out(P - Q - M, x)


def psi2(x, spec: RegionSpec):
    xa = _domain(x, *psi2_domain(spec), "psi2")
    T1, T2, T3 = _blocks2(xa, spec)
    return _out(LAM * T1 - spec.m * T2 - T3, x)


def _weights1(eps):
    return LAM ** (2 - eps), LAM ** (2 - eps), LAM ** (2 - 3 * eps)


def _weights2(eps):
    return LAM ** (2 - eps), LAM ** (1 + 2 * eps), LAM ** (1 + 3 * eps)


def trouble_bound_1(x, spec: RegionSpec, eps: float, normalized: bool = False):
    """Final eps-dependent lower bound of the inviscid flux through the
    upper sloped boundary (x in [0, (1 - theta)/m]).

    The raw chain keeps the positive factor lambda^(2 - eps) that psi1
    drops, so at eps = 0 it equals 4 psi1(x). With ``normalized`` that
    factor is divided out and eps = 0 gives psi1 exactly; the sign is the
    same either way.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    xa = _domain(x, *psi1_domain(spec), "trouble_bound_1")
    P, Q, M = _blocks1(xa, spec)
    wp, wq, wm = _weights1(eps)
    if normalized:
        return _out(P - Q - (wm / wp) * M, x)
    return _out(wp * P - wq * Q - wm * M, x)


def trouble_bound_2(x, spec: RegionSpec, eps: float, normalized: bool = False):
    """Final eps-dependent lower bound of the inviscid flux through the
    lower curved boundary (x in [delta, 1]).

    The raw chain equals 2 psi2(x) at eps = 0; ``normalized`` divides by
    lambda^(1 - eps) so that eps = 0 gives psi2 exactly.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    xa = _domain(x, *psi2_domain(spec), "trouble_bound_2")
    T1, T2, T3 = _blocks2(xa, spec)
    w1, w2, w3 = _weights2(eps)
    if normalized:
        k = LAM ** (1.0 - eps)
        return _out((w1 / k) * T1 - spec.m * (w2 / k) * T2 - (w3 / k) * T3, x)
    return _out(w1 * T1 - spec.m * w2 * T2 - w3 * T3, x)


def _poly1(spec, w=(1.0, 1.0, 1.0)):
    x = Polynomial([0.0, 1.0])
    P, Q, M = _blocks1(x, spec)
    return w[0] * P - w[1] * Q - w[2] * M


def _poly2(spec, w=(LAM, 1.0, 1.0)):
    x = Polynomial([0.0, 1.0])
    T1, T2, T3 = _blocks2(x, spec)
    return w[0] * T1 - spec.m * w[1] * T2 - w[2] * T3


def psi_polynomials(spec: RegionSpec):
    """(psi1, psi2) as numpy Polynomials (used for derivative bounds)."""
    return _poly1(spec), _poly2(spec)


# ------------------------------------------------------------ certification

@dataclass(frozen=True)
class GridCertificate:
    minimum: float
    argmin: float
    lower_bound: float  # guaranteed lower bound over the whole interval
    certified: bool


def _cell_derivative_bound(dp: Polynomial, mids, half):
    # |p'(xi)| <= sum_k |p'^{(k)}(mid)| / k! * half^k, exact Taylor for polynomials
    bound = np.zeros_like(mids)
    q = dp
    fact = 1.0
    k = 0
    while True:
        bound += np.abs(q(mids)) / fact * half ** k
        if q.degree() == 0:
            break
        q = q.deriv()
        k += 1
        fact *= k
    return bound


def certify_function(fn, poly: Polynomial, lo: float, hi: float, grid_n: int = 100_001,
                     refine: bool = True) -> GridCertificate:
    """Grid minimum of ``fn`` on [lo, hi] with a derivative-bound certificate.

    On each cell [x_i, x_{i+1}] of width w, a function with |f'| <= L is at
    least (f_i + f_{i+1} - L w)/2; L comes from the Taylor expansion of the
    polynomial form of f at the cell midpoint.
    """
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    xs = np.linspace(lo, hi, grid_n)
    fs = fn(xs)
    i = int(np.argmin(fs))
    fmin, xmin = float(fs[i]), float(xs[i])
    if refine and grid_n > 2:
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid_n - 1)]
        if b > a:
            res = minimize_scalar(lambda t: float(fn(np.float64(t))), bounds=(a, b),
                                  method="bounded", options={"xatol": 1e-14})
            if res.fun < fmin:
                fmin, xmin = float(res.fun), float(res.x)
    w = xs[1] - xs[0]
    mids = 0.5 * (xs[:-1] + xs[1:])
    L = _cell_derivative_bound(poly.deriv(), mids, 0.5 * w)
    cell_lb = 0.5 * (fs[:-1] + fs[1:] - L * w)
    lb = float(np.min(cell_lb)) if cell_lb.size else fmin
    # allow for rounding in the evaluation of f
    slack = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(fs))))
    return GridCertificate(fmin, xmin, lb, bool(fmin > 0 and lb - slack > 0))


@dataclass(frozen=True)
class PsiCertificate:
    min_psi1: float
    argmin_psi1: float
    min_psi2: float
    argmin_psi2: float
    certified: bool
    lower_bound_psi1: float
    lower_bound_psi2: float
    grid_n: int

    def to_dict(self):
        return dict(self.__dict__)


def certify_psi_positive(spec: RegionSpec = None, grid_n: int = 100_001,
                         refine: bool = True) -> PsiCertificate:
    spec = spec or RegionSpec()
    if grid_n < 1000:
        raise ValueError("grid_n must be >= 1000")
    p1, p2 = psi_polynomials(spec)
    c1 = certify_function(lambda x: psi1(x, spec), p1, *psi1_domain(spec), grid_n, refine)
    c2 = certify_function(lambda x: psi2(x, spec), p2, *psi2_domain(spec), grid_n, refine)
    return PsiCertificate(c1.minimum, c1.argmin, c2.minimum, c2.argmin,
                          c1.certified and c2.certified, c1.lower_bound, c2.lower_bound,
                          grid_n)


# ------------------------------------------------------------ eps search

def beta_grid(lo: float = 2.001, hi: float = 2.5, n: int = 64) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _as_betas(beta_range):
    if np.ndim(beta_range) == 0:
        betas = np.array([float(beta_range)])
    elif isinstance(beta_range, tuple) and len(beta_range) == 2:
        betas = beta_grid(*beta_range)
    else:
        betas = np.asarray(beta_range, dtype=float)
    if betas.size == 0 or np.any(betas <= 2.0) or np.any(betas > 2.5):
        raise ValueError("beta_range must lie in (2, 5/2]")
    return betas


def side_constraints(beta: float, eps: float) -> dict:
    """Conditions on gamma = 6 - 2 beta - 3 eps used alongside the bounds."""
    gamma = 6.0 - 2.0 * beta - 3.0 * eps
    c = LAM ** (-gamma)
    return {
        "gamma_le_2_minus_3eps": gamma <= 2.0 - 3.0 * eps + 1e-15,
        "gamma_ge_1_minus_3eps": gamma >= 1.0 - 3.0 * eps - 1e-15,
        "c_in_unit_interval": 0.0 < c < 1.0,
    }


@dataclass(frozen=True)
class EpsilonResult:
    eps_star: float
    binding: Optional[str]
    min_trouble_1: float
    min_trouble_2: float
    certified: bool
    betas: np.ndarray
    eps_grid: np.ndarray
    passed: np.ndarray
    diagnostics: dict

    def to_dict(self):
        return {
            "eps_star": self.eps_star,
            "binding": self.binding,
            "min_trouble_1": self.min_trouble_1,
            "min_trouble_2": self.min_trouble_2,
            "certified": self.certified,
            "beta_min": float(self.betas.min()),
            "beta_max": float(self.betas.max()),
            "n_beta": int(self.betas.size),
            "eps_grid_size": int(self.eps_grid.size),
            "diagnostics": self.diagnostics,
        }


def _check_eps(spec, eps, betas, grid_n):
    out = {}
    c1 = certify_function(lambda x: trouble_bound_1(x, spec, eps), _poly1(spec, _weights1(eps)),
                          *psi1_domain(spec), grid_n, refine=True)
    c2 = certify_function(lambda x: trouble_bound_2(x, spec, eps), _poly2(spec, _weights2(eps)),
                          *psi2_domain(spec), grid_n, refine=True)
    out["trouble_bound_1"] = c1.certified
    out["trouble_bound_2"] = c2.certified
    for name in ("gamma_le_2_minus_3eps", "gamma_ge_1_minus_3eps", "c_in_unit_interval"):
        out[name] = all(side_constraints(b, eps)[name] for b in betas)
    return out, c1, c2


def find_epsilon(spec: RegionSpec = None, beta_range=(2.001, 2.5), eps_grid=None,
                 grid_n: int = 20_001) -> EpsilonResult:
    """Largest eps on a logarithmic grid for which both trouble bounds are
    certified nonnegative on their domains and the gamma side conditions
    hold for every beta in ``beta_range``.

    ``beta_range`` is a float, a (lo, hi) tuple (64-point grid) or an array.
    The geometry (delta, theta, m) comes from ``spec``; c is recoupled per beta.
    """
    spec = spec or RegionSpec()
    betas = _as_betas(beta_range)
    if eps_grid is None:
        eps_grid = np.logspace(-6, np.log10(0.5), 161)
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))
    passed = np.zeros(eps_grid.size, dtype=bool)
    first_fail = {}
    best = None
    for k in range(eps_grid.size - 1, -1, -1):
        eps = float(eps_grid[k])
        checks, c1, c2 = _check_eps(spec, eps, betas, grid_n)
        passed[k] = all(checks.values())
        if passed[k]:
            best = (k, eps, c1, c2)
            break
        first_fail = {name: ok for name, ok in checks.items() if not ok}
    if best is None:
        return EpsilonResult(0.0, None, float("nan"), float("nan"), False, betas, eps_grid,
                             passed, {"reason": "no grid eps passes", "failing": list(first_fail)})
    k, eps, c1, c2 = best
    binding = next(iter(first_fail)) if first_fail else "grid_upper_end"
    # record whether every smaller grid value passes too
    smaller_ok = True
    for j in range(k - 1, -1, -1):
        ok = all(_check_eps(spec, float(eps_grid[j]), betas, max(2001, grid_n // 10))[0].values())
        passed[j] = ok
        smaller_ok &= ok
    diag = {"all_smaller_pass": bool(smaller_ok),
            "next_eps": float(eps_grid[k + 1]) if k + 1 < eps_grid.size else None,
            "failing_at_next": sorted(first_fail)}
    return EpsilonResult(eps, binding, c1.minimum, c2.minimum, True, betas, eps_grid, passed, diag)


# ------------------------------------------------------------ flux scan

SEGMENTS = ("n1", "n2", "n3", "n4", "n5", "n6")


@dataclass(frozen=True)
class SegmentFlux:
    name: str
    viscous_min: float
    viscous_arg: dict
    inviscid_min: float
    inviscid_arg: dict


@dataclass(frozen=True)
class FluxReport:
    segments: tuple

    def __post_init__(self):
        if tuple(s.name for s in self.segments) != SEGMENTS:
            raise ValueError("a flux report holds exactly the six boundary pieces n1..n6")

    def __getitem__(self, name) -> SegmentFlux:
        return self.segments[SEGMENTS.index(name)]

    @property
    def overall_min(self) -> float:
        return min(min(s.viscous_min, s.inviscid_min) for s in self.segments)

    def all_nonnegative(self, tol: float = 1e-12) -> bool:
        return self.overall_min >= -tol

    def to_dict(self):
        return {s.name: {"viscous_min": s.viscous_min, "viscous_arg": s.viscous_arg,
                         "inviscid_min": s.inviscid_min, "inviscid_arg": s.inviscid_arg}
                for s in self.segments}


def _boundary(spec, name, n):
    """Points (x, y) and inward normals (nx, ny) along one boundary piece."""
    d, th, m, k = spec.delta, spec.theta, spec.m, spec.kink
    if name == "n1":
        y = np.linspace(0.0, th, n)
        x = np.zeros(n)
        nx, ny = np.ones(n), np.zeros(n)
    elif name == "n2":
        x = np.linspace(0.0, k, n)
        y = m * x + th
        nx, ny = np.full(n, m), -np.ones(n)
    elif name == "n3":
        x = np.linspace(k, 1.0, n)
        y = np.ones(n)
        nx, ny = np.zeros(n), -np.ones(n)
    elif name == "n4":
        y = np.linspace(spec.c, 1.0, n)
        x = np.ones(n)
        nx, ny = -np.ones(n), np.zeros(n)
    elif name == "n5":
        x = np.linspace(d, 1.0, n)
        y = _h(x, spec)
        nx, ny = -h_prime(x, spec), np.ones(n)
    elif name == "n6":
        x = np.linspace(0.0, d, n)
        y = np.zeros(n)
        nx, ny = np.zeros(n), np.ones(n)
    else:
        raise KeyError(name)
    return x, y, nx, ny


def _left_neighbour_range(x, spec):
    """Interval of p with (p, x) in the closed region."""
    if spec.m > 0:
        lo = np.maximum(0.0, (x - spec.theta) / spec.m)
    else:
        lo = np.where(x <= spec.theta, 0.0, np.inf)
    hi = np.minimum(1.0, spec.delta + (1.0 - spec.delta) * (np.maximum(x, 0.0) / spec.c) ** 0.25)
    return lo, hi


def _segment_flux(spec, name, n, eps):
    x, y, nx, ny = _boundary(spec, name, n)
    lg = LAM ** spec.gamma
    # viscous part (-x, -lambda^2 y)
    visc = nx * (-x) + ny * (-LAM_SQ * y)
    # inviscid part: (Y_{n-1}^2 - lg x y, lam^{2-eps} (x^2 - lg y Y_{n+2}))
    lo, hi = _left_neighbour_range(x, spec)
    if np.any(lo > hi + 1e-15):
        raise ValueError(f"empty neighbour range on segment {name}")
    p = np.where(nx > 0, lo, np.where(nx < 0, hi, 0.0))
    p = np.minimum(p, hi)
    q_lo = _h(y, spec)
    q_hi = np.minimum(spec.m * y + spec.theta, 1.0)
    coef_q = -ny * LAM ** (2 - eps) * lg * y
    q = np.where(coef_q > 0, q_lo, q_hi)
    inv = nx * (p * p - lg * x * y) + ny * LAM ** (2 - eps) * (x * x - lg * y * q)
    iv, ii = int(np.argmin(visc)), int(np.argmin(inv))
    return (float(visc[iv]), {"x": float(x[iv]), "y": float(y[iv])},
            float(inv[ii]), {"x": float(x[ii]), "y": float(y[ii]),
                             "y_prev": float(p[ii]), "y_next2": float(q[ii])})


def flux_scan(spec: RegionSpec, params=None, resolution: int = 2001, eps: float = None) -> FluxReport:
    """Worst-case inward flux of the normalized viscous and inviscid fields
    on the six boundary pieces, minimized over admissible neighbours.

    The inviscid term is monotone in each neighbour (Y_{n-1} enters as a
    square with the sign of the normal's first component, Y_{n+2} linearly),
    so the minimum over the admissible interval sits at one of its ends;
    both ends are taken from the exact region geometry. Segment endpoints
    are included so every corner is checked against both adjacent normals.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if params is not None:
        gamma = 6.0 - 2.0 * params.beta - 3.0 * params.epsilon
        if abs(gamma - spec.gamma) > 1e-12:
            raise ValueError("region spec is not coupled to the model (c != 2^-gamma)")
        eps = params.epsilon
    if eps is None:
        raise ValueError("need params or eps")
    if spec.m <= 0:
        raise ValueError("flux scan needs m > 0")
    segs = []
    for name in SEGMENTS:
        vm, va, im, ia = _segment_flux(spec, name, resolution, eps)
        segs.append(SegmentFlux(name, vm, va, im, ia))
    return FluxReport(tuple(segs))


def flux_scan_betas(eps: float, betas: Sequence[float] = None, resolution: int = 2001,
                    delta: float = 0.1, theta: float = 0.6, m: float = 0.75) -> FluxReport:
    """Merge flux scans over a beta grid (c recoupled per beta); the
    arguments of each minimum carry the beta where it was attained."""
    betas = beta_grid() if betas is None else np.asarray(betas, dtype=float)
    best = {}
    for beta in betas:
        spec = RegionSpec.for_model(beta, eps, delta=delta, theta=theta, m=m)
        rep = flux_scan(spec, resolution=resolution, eps=eps)
        for s in rep.segments:
            cur = best.get(s.name)
            va = {**s.viscous_arg, "beta": float(beta)}
            ia = {**s.inviscid_arg, "beta": float(beta)}
            if cur is None:
                best[s.name] = [s.viscous_min, va, s.inviscid_min, ia]
                continue
            if s.viscous_min < cur[0]:
                cur[0], cur[1] = s.viscous_min, va
            if s.inviscid_min < cur[2]:
                cur[2], cur[3] = s.inviscid_min, ia
    return FluxReport(tuple(SegmentFlux(n, *best[n]) for n in SEGMENTS))


# ------------------------------------------------------------ trajectories

@dataclass(frozen=True)
class RegionExitRecord:
    t: float
    shell: int  # 1-based index n of the offending pair (Y_n, Y_{n+1})
    point: tuple


def check_invariance(traj, spec: RegionSpec, tol: float = 1e-9,
                     include_midpoints: bool = False) -> Optional[RegionExitRecord]:
    """Earliest sampled violation of pair membership, or None."""
    inside = pairs_inside(traj.values, spec, tol)
    bad_rows = np.nonzero(~np.all(inside, axis=1))[0]
    first = None
    if bad_rows.size:
        i = int(bad_rows[0])
        n = int(np.nonzero(~inside[i])[0][0])
        first = RegionExitRecord(float(traj.times[i]), n + 1,
                                 (float(traj.values[i, n]), float(traj.values[i, n + 1])))
    if include_midpoints and len(traj) > 1:
        mids = traj.midpoints()
        tm = 0.5 * (traj.times[:-1] + traj.times[1:])
        ins = pairs_inside(mids, spec, tol)
        bad = np.nonzero(~np.all(ins, axis=1))[0]
        if bad.size and (first is None or tm[bad[0]] < first.t):
            i = int(bad[0])
            n = int(np.nonzero(~ins[i])[0][0])
            first = RegionExitRecord(float(tm[i]), n + 1, (float(mids[i, n]), float(mids[i, n + 1])))
    return first


def random_initial(spec: RegionSpec, n_shells: int, rng: np.random.Generator,
                   margin: float = 0.02) -> np.ndarray:
    """Initial data with every consecutive pair strictly inside the region:
    y_1 uniform in [margin, 1 - margin], then each y_{n+1} a uniform
    fraction in [margin, 1 - margin] of the way from h(y_n) to g(y_n)."""
    y = np.empty(n_shells)
    y[0] = rng.uniform(margin, 1.0 - margin)
    for k in range(1, n_shells):
        lo = _h(np.float64(y[k - 1]), spec)
        hi = min(spec.m * y[k - 1] + spec.theta, 1.0)
        y[k] = lo + (hi - lo) * rng.uniform(margin, 1.0 - margin)
    return y
