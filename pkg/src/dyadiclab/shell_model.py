"""Finite dyadic systems: parameters, coefficient tables, vector fields.

Both formulations share the cascade form

    dZ_n/dt = -d_n Z_n + a_n Z_{n-1}^2 - b_n Z_n Z_{n+1},   n = 1..N,

with Z_0 = 0. For the X variables a_n = lambda_{n-1}^beta (lambda_0 = 0),
b_n = lambda_n^beta; for the rescaled Y_n = lambda_n^(beta-2+eps) X_n,
a_n = lambda_{n-1}^(2-eps) lambda^(beta-2+eps) and
b_n = lambda_n^(2-eps) lambda^(2-beta-eps). In both, d_n = nu lambda_n^2.

Shell indices are 1-based wherever they appear in an interface; arrays
are stored 0-based.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels

LAMBDA = 2.0


class Truncation(str, enum.Enum):
    ZERO_PAD = "ZeroPad"
    MIRROR_LAST = "MirrorLast"


class Formulation(str, enum.Enum):
    X = "X"
    Y = "Y"


class NonFiniteStateError(ValueError):
    """A state contained NaN or infinite entries."""


@dataclass(frozen=True)
class ModelParams:
    beta: float
    nu: float = 0.0
    epsilon: float = 0.0
    n_shells: int = 10
    truncation: Truncation = Truncation.ZERO_PAD
    formulation: Formulation = Formulation.X

    def __post_init__(self):
        object.__setattr__(self, "truncation", Truncation(self.truncation))
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.nu >= 0:
            raise ValueError(f"nu must be >= 0, got {self.nu}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if int(self.n_shells) != self.n_shells or self.n_shells < 1:
            raise ValueError(f"n_shells must be an integer >= 1, got {self.n_shells}")

    @property
    def lam(self) -> float:
        return LAMBDA

    @property
    def mirror(self) -> bool:
        return self.truncation is Truncation.MIRROR_LAST

    @property
    def rescale_exponent(self) -> float:
        """Exponent beta - 2 + epsilon of the X -> Y change of variables."""
        return self.beta - 2.0 + self.epsilon

    def replace(self, **changes) -> "ModelParams":
        fields = {k: getattr(self, k) for k in
                  ("beta", "nu", "epsilon", "n_shells", "truncation", "formulation")}
        fields.update(changes)
        return ModelParams(**fields)

    @cached_property
    def coefficients(self) -> "Coefficients":
        return Coefficients.build(self)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "nu": self.nu,
            "epsilon": self.epsilon,
            "n_shells": self.n_shells,
            "truncation": self.truncation.value,
            "formulation": self.formulation.value,
        }


@dataclass(frozen=True)
class Coefficients:
    """Coefficient table (a, b, d) of the cascade form, 0-based arrays."""

    a: np.ndarray
    b: np.ndarray
    d: np.ndarray
    lam_n: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, params: ModelParams) -> "Coefficients":
        n = np.arange(1, params.n_shells + 1, dtype=float)
        lam = LAMBDA
        lam_n = lam ** n
        # lambda_0 = 0 as a coefficient: the inflow into shell 1 vanishes
        lam_prev = np.concatenate(([0.0], lam_n[:-1]))
        beta, eps = params.beta, params.epsilon
        if params.formulation is Formulation.X:
            a = lam_prev ** beta
            b = lam_n ** beta
        else:
            a = lam_prev ** (2.0 - eps) * lam ** (beta - 2.0 + eps)
            b = lam_n ** (2.0 - eps) * lam ** (2.0 - beta - eps)
        d = params.nu * lam_n ** 2
        for arr in (a, b, d, lam_n):
            arr.setflags(write=False)
        return cls(a=a, b=b, d=d, lam_n=lam_n)


@dataclass(frozen=True)
class ShellState:
    t: float
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("state values must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(v)):
            raise NonFiniteStateError("state contains non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "t", float(self.t))

    def __len__(self):
        return self.values.shape[0]

    def shell(self, n: int) -> float:
        """Amplitude of shell n (1-based)."""
        if not 1 <= n <= len(self):
            raise IndexError(f"shell index {n} out of range 1..{len(self)}")
        return float(self.values[n - 1])


def _check(values, params: ModelParams) -> np.ndarray:
    v = np.asarray(values.values if isinstance(values, ShellState) else values, dtype=float)
    if v.shape != (params.n_shells,):
        raise ValueError(f"state has length {v.shape[0] if v.ndim else 0}, "
                         f"expected n_shells={params.n_shells}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteStateError("state contains non-finite entries")
    return v


def rhs(state, params: ModelParams) -> np.ndarray:
    """Vector field of ``params`` (either formulation) at ``state``."""
    v = _check(state, params)
    c = params.coefficients
    return kernels.rhs(v, c.a, c.b, c.d, params.mirror)


def rhs_viscous_x(state, params: ModelParams) -> np.ndarray:
    """dX/dt of the (viscous or inviscid) X-system."""
    if params.formulation is not Formulation.X:
        raise ValueError("rhs_viscous_x requires formulation X")
    return rhs(state, params)


def rhs_truncated_y(state, params: ModelParams) -> np.ndarray:
    """dY/dt of the truncated rescaled system."""
    if params.formulation is not Formulation.Y:
        raise ValueError("rhs_truncated_y requires formulation Y")
    return rhs(state, params)


def _rescale_weights(params: ModelParams, sign: float) -> np.ndarray:
    n = np.arange(1, params.n_shells + 1, dtype=float)
    with np.errstate(over="ignore"):
        w = LAMBDA ** (sign * n * params.rescale_exponent)
    if not np.all(np.isfinite(w)) or (sign * params.rescale_exponent < 0 and np.any(w == 0)):
        raise OverflowError("rescaling weights lambda_n^(beta-2+eps) are not representable")
    return w


def x_to_y(state, params: ModelParams):
    """Y_n = lambda_n^(beta-2+eps) X_n. Returns the same kind as given."""
    v = _check(state, params)
    with np.errstate(over="ignore"):
        out = _rescale_weights(params, 1.0) * v
    if not np.all(np.isfinite(out)):
        raise OverflowError("x_to_y overflowed")
    if isinstance(state, ShellState):
        return ShellState(state.t, out)
    return out


def y_to_x(state, params: ModelParams):
    v = _check(state, params)
    with np.errstate(over="ignore"):
        out = _rescale_weights(params, -1.0) * v
    if not np.all(np.isfinite(out)):
        raise OverflowError("y_to_x overflowed")
    if isinstance(state, ShellState):
        return ShellState(state.t, out)
    return out


def energy(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.dot(v, v))


def consistency_check(params: ModelParams, x0, t_end: float, ctrl=None, n_compare: int = 51):
    """Integrate X and the transformed Y side by side and compare.

    Both runs use ZeroPad (MirrorLast in Y has no exact X counterpart) and
    land exactly on a common grid of ``n_compare`` times. Returns a dict
    with the largest deviation |lambda_n^s X_n(t) - Y_n(t)|, the bound
    100 * (abs_tol + rel_tol * max|Y|), and ``ok``.
    """
    from .stepper import StepControl, integrate

    ctrl = ctrl or StepControl(rel_tol=1e-11, abs_tol=1e-13)
    px = params.replace(formulation=Formulation.X, truncation=Truncation.ZERO_PAD)
    py = params.replace(formulation=Formulation.Y, truncation=Truncation.ZERO_PAD)
    x0 = _check(x0, px)
    y0 = x_to_y(x0, px)
    stops = np.linspace(0.0, t_end, n_compare)
    tx = integrate(px, ShellState(0.0, x0), t_end, ctrl, t_stops=stops)
    ty = integrate(py, ShellState(0.0, y0), t_end, ctrl, t_stops=stops)
    xs = tx.at_stops(stops)
    ys = ty.at_stops(stops)
    mapped = xs * _rescale_weights(px, 1.0)
    dev = float(np.max(np.abs(mapped - ys))) if ys.size else 0.0
    scale = float(np.max(np.abs(ys))) if ys.size else 0.0
    bound = 100.0 * (ctrl.abs_tol + ctrl.rel_tol * scale)
    return {"max_deviation": dev, "bound": bound, "ok": dev <= bound,
            "times": stops, "x_traj": tx, "y_traj": ty}
