"""Survival-probability laws p(t), decay densities h(t) = -p'(t) and log-linear fits.

Every model is a small dataclass exposing ``survival`` and ``density``.  Both
accept scalars or arrays and return the same shape (a Python float for scalar
input).  All evaluations go through numpy ufuncs, so a scalar call and the
corresponding element of a vectorized call are bit-identical.

Times are raw model units.  ``time_unit`` holds the effective lifetime used to
normalize reported times; it stays 1.0 until a fit is committed.
"""

from __future__ import annotations

import dataclasses
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import bisect

from .errors import ConfigurationError, DomainError, FitError

__all__ = [
    "DecayModel",
    "Exponential",
    "Toy",
    "Tunneling",
    "PiecewisePowerTail",
    "ThreeRegime",
    "Tabulated",
    "Custom",
    "RegimeFit",
    "MODEL_KINDS",
    "make_model",
    "survival",
    "decay_density",
    "fit_effective_lifetime",
    "fit_exponential_regime",
]

DEFAULT_FIT_WINDOW = (0.5, 3.0)
DEFAULT_FIT_SAMPLES = 64


def _times(t, *, strict: bool = False) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("time is NaN")
    if strict:
        if (arr <= 0).any():
            raise DomainError(f"time must be > 0, got min {arr.min()!r}")
    elif (arr < 0).any():
        raise DomainError(f"time must be >= 0, got min {arr.min()!r}")
    return arr


def _out(value: np.ndarray, like) -> Any:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise ConfigurationError(f"must be a positive finite number, got {value!r}", key=name)
    return value


@dataclass
class DecayModel:
    """Base class: a named survival law.

    Subclasses implement ``_survival`` and (where a closed form exists)
    ``_density`` on float arrays with validated, nonnegative times.
    """

    kind: ClassVar[str] = "abstract"
    monotone: ClassVar[bool] = True

    time_unit: float = field(default=1.0, kw_only=True)

    def __post_init__(self):
        _positive("time_unit", self.time_unit)

    # public evaluation -------------------------------------------------
    def survival(self, t):
        arr = _times(t)
        return _out(self._survival(arr), t)

    def density(self, t, return_flag: bool = False):
        """Decay density h(t) = -p'(t) for t > 0.

        At a non-smooth junction the left derivative is returned; with
        ``return_flag=True`` a boolean (array) marking such points is returned
        alongside.
        """
        arr = _times(t, strict=True)
        h = self._density(arr)
        if not return_flag:
            return _out(h, t)
        flag = np.isin(arr, np.asarray(self.junctions, dtype=float))
        if np.ndim(t) == 0:
            return float(h), bool(flag)
        return h, flag

    @property
    def junctions(self) -> tuple[float, ...]:
        return ()

    @property
    def params(self) -> dict[str, Any]:
        return {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.init and f.name != "time_unit"
        }

    def with_time_unit(self, tau: float) -> "DecayModel":
        return dataclasses.replace(self, time_unit=tau)

    # to override -------------------------------------------------------
    def _survival(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _density(self, t: np.ndarray) -> np.ndarray:
        # central difference, relative step keeps cancellation in check at large t
        h = np.maximum(1e-6, 1e-6 * t)
        lo = np.maximum(t - h, 0.0)
        return (self._survival(lo) - self._survival(t + h)) / (t + h - lo)


@dataclass
class Exponential(DecayModel):
    """p(t) = exp(-gamma t)."""

    kind: ClassVar[str] = "exponential"

    gamma: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        self.gamma = _positive("gamma", self.gamma)

    def _survival(self, t):
        return np.exp(-self.gamma * t)

    def _density(self, t):
        return self.gamma * np.exp(-self.gamma * t)


@dataclass
class Toy(DecayModel):
    """Toy law with a quadratic onset and a power-law tail.

    p(t) = (exp(-gamma t^2 / (t + 1)) + 1 / (1 + t^alpha)) / 2
    """

    kind: ClassVar[str] = "toy"

    gamma: float = 1.0
    alpha: float = 2.0

    def __post_init__(self):
        super().__post_init__()
        self.gamma = _positive("gamma", self.gamma)
        self.alpha = _positive("alpha", self.alpha)

    def _survival(self, t):
        return 0.5 * (np.exp(-self.gamma * t * t / (t + 1.0)) + 1.0 / (1.0 + t**self.alpha))

    def _density(self, t):
        g_prime = (t * t + 2.0 * t) / (t + 1.0) ** 2
        ta = t**self.alpha
        return 0.5 * (
            self.gamma * g_prime * np.exp(-self.gamma * t * t / (t + 1.0))
            + self.alpha * ta / t / (1.0 + ta) ** 2
        )


@dataclass
class PiecewisePowerTail(DecayModel):
    """Exponential up to ``turnover``, then k t^alpha with alpha < 0.

    k is fixed by continuity at the turnover time.
    """

    kind: ClassVar[str] = "piecewise_power_tail"

    tau: float = 1.0
    alpha: float = -2.0
    turnover: float = 10.0

    def __post_init__(self):
        super().__post_init__()
        self.tau = _positive("tau", self.tau)
        self.turnover = _positive("turnover", self.turnover)
        self.alpha = float(self.alpha)
        if not math.isfinite(self.alpha) or self.alpha >= 0:
            raise ConfigurationError(f"tail index must be negative, got {self.alpha!r}", key="alpha")

    @property
    def k(self) -> float:
        return math.exp(-self.turnover / self.tau) * self.turnover ** (-self.alpha)

    @property
    def junctions(self):
        return (self.turnover,)

    def _survival(self, t):
        out = np.empty_like(t)
        head = t <= self.turnover
        out[head] = np.exp(-t[head] / self.tau)
        out[~head] = self.k * t[~head] ** self.alpha
        return out

    def _density(self, t):
        out = np.empty_like(t)
        head = t <= self.turnover
        out[head] = np.exp(-t[head] / self.tau) / self.tau
        out[~head] = -self.alpha * self.k * t[~head] ** (self.alpha - 1.0)
        return out


@dataclass
class ThreeRegime(DecayModel):
    """Zeno quadratic onset, exponential body Z e^{-gamma t}, tail k t^{-alpha}.

    Pieces cover (0, t_a], (t_a, t_b], (t_b, inf).  Boundaries left as None
    are placed where neighbouring pieces meet (value continuity), located by
    bisection.  User-supplied boundaries must keep p nonincreasing.
    """

    kind: ClassVar[str] = "three_regime"

    tau_z: float = 1.0
    Z: float = 1.0
    gamma: float = 1.0
    k: float = 1e-3
    alpha: float = 2.0
    t_a: float | None = None
    t_b: float | None = None

    def __post_init__(self):
        super().__post_init__()
        for name in ("tau_z", "Z", "gamma", "k", "alpha"):
            setattr(self, name, _positive(name, getattr(self, name)))
        if self.t_a is None:
            self.t_a = self._onset_junction()
        if self.t_b is None:
            self.t_b = self._tail_junction()
        self.t_a = _positive("t_a", self.t_a)
        self.t_b = _positive("t_b", self.t_b)
        if not self.t_a < self.t_b:
            raise ConfigurationError("boundaries must satisfy t_a < t_b", key="t_b")
        if not self.t_a < self.tau_z:
            raise ConfigurationError("quadratic piece must end before tau_z", key="t_a")
        if self._body(self.t_a) > self._onset(self.t_a) * (1 + 1e-12):
            raise ConfigurationError("survival would increase at t_a", key="t_a")
        if self._tail(self.t_b) > self._body(self.t_b) * (1 + 1e-12):
            raise ConfigurationError("survival would increase at t_b", key="t_b")

    def _onset(self, t):
        return 1.0 - (t / self.tau_z) ** 2

    def _body(self, t):
        return self.Z * np.exp(-self.gamma * t)

    def _tail(self, t):
        return self.k * t ** (-self.alpha)

    def _onset_junction(self) -> float:
        g = lambda t: self._onset(t) - self._body(t)
        ts = np.linspace(0.0, self.tau_z, 4097)[1:]
        vals = g(ts)
        i = int(np.argmax(vals))
        if vals[i] <= 0:
            raise ConfigurationError("quadratic onset never meets the exponential body", key="t_a")
        return float(bisect(g, ts[i], self.tau_z, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))

    def _tail_junction(self) -> float:
        # log(body) - log(tail) is concave with its maximum at alpha / gamma
        f = lambda t: math.log(self.Z) - self.gamma * t - math.log(self.k) + self.alpha * math.log(t)
        lo = max(self.t_a, self.alpha / self.gamma)
        if f(lo) <= 0:
            raise ConfigurationError("power-law tail dominates the exponential body everywhere", key="k")
        hi = 2.0 * lo
        while f(hi) > 0:
            hi *= 2.0
        return float(bisect(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=400))

    @property
    def junctions(self):
        return (self.t_a, self.t_b)

    def _survival(self, t):
        out = np.empty_like(t)
        a = t <= self.t_a
        c = t > self.t_b
        b = ~a & ~c
        out[a] = self._onset(t[a])
        out[b] = self._body(t[b])
        out[c] = self._tail(t[c])
        return out

    def _density(self, t):
        out = np.empty_like(t)
        a = t <= self.t_a
        c = t > self.t_b
        b = ~a & ~c
        out[a] = 2.0 * t[a] / self.tau_z**2
        out[b] = self.gamma * self._body(t[b])
        out[c] = self.alpha * self.k * t[c] ** (-self.alpha - 1.0)
        return out


def _limit_slopes(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Fritsch-Carlson limiting of Hermite slopes on strictly monotone stretches."""
    m = m.copy()
    delta = np.diff(y) / np.diff(x)
    n = len(delta)
    for k in range(n):
        d = delta[k]
        left = delta[k - 1] if k > 0 else d
        right = delta[k + 1] if k + 1 < n else d
        if d == 0.0:
            if left == 0.0 or right == 0.0:
                m[k] = m[k + 1] = 0.0
            continue
        if not (np.sign(left) == np.sign(d) == np.sign(right)):
            continue
        a, b = m[k] / d, m[k + 1] / d
        if a < 0:
            m[k], a = 0.0, 0.0
        if b < 0:
            m[k + 1], b = 0.0, 0.0
        r = a * a + b * b
        if r > 9.0:
            s = 3.0 / math.sqrt(r)
            m[k] = s * a * d
            m[k + 1] = s * b * d
    return m


@dataclass(eq=False)
class Tabulated(DecayModel):
    """p(t) tabulated on a grid and interpolated by a monotone-safe cubic Hermite.

    ``slopes`` are exact derivatives p'(t_k) when known (they are limited
    Fritsch-Carlson style only where the data are strictly monotone); without
    them PCHIP slopes are used.  Evaluation beyond the grid is a domain error.
    Node values are reproduced exactly.
    """

    kind: ClassVar[str] = "tabulated"

    grid: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0]))
    values: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    slopes: np.ndarray | None = None

    def __post_init__(self):
        super().__post_init__()
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 2 or self.grid.shape != self.values.shape:
            raise ConfigurationError("grid and values must be 1-d arrays of equal length >= 2", key="grid")
        if not (np.diff(self.grid) > 0).all():
            raise ConfigurationError("grid must be strictly increasing", key="grid")
        if self.grid[0] != 0.0 or self.values[0] != 1.0:
            raise ConfigurationError("table must start at (0, 1)", key="values")
        if not np.isfinite(self.values).all() or (self.values < 0).any() or (self.values > 1).any():
            raise ConfigurationError("tabulated survival must lie in [0, 1]", key="values")
        if self.slopes is None:
            m = PchipInterpolator(self.grid, self.values).derivative()(self.grid)
        else:
            self.slopes = np.asarray(self.slopes, dtype=float)
            if self.slopes.shape != self.grid.shape:
                raise ConfigurationError("slopes must match the grid", key="slopes")
            m = _limit_slopes(self.grid, self.values, self.slopes)
        self._spline = CubicHermiteSpline(self.grid, self.values, m)
        self._dspline = self._spline.derivative()

    @property
    def monotone(self) -> bool:  # type: ignore[override]
        return bool((np.diff(self.values) <= 0).all())

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    def _check_range(self, t):
        if (t > self.grid[-1]).any():
            raise DomainError(f"time {t.max()!r} beyond table coverage {self.grid[-1]!r}")

    def _survival(self, t):
        self._check_range(t)
        out = np.clip(self._spline(t), 0.0, 1.0)
        return np.where(t == self.grid[-1], self.values[-1], out)

    def _density(self, t):
        self._check_range(t)
        return -self._dspline(t)


@dataclass
class Tunneling(DecayModel):
    """Cold-atom tunneling law, log p(t) = -int_0^t (t - s) W(s) ds.

    ``a`` and ``V0`` are dimensionless internal parameters (see
    :mod:`lgdecay.config` for the physical-unit mapping).  W is tabulated once
    on [0, t_max] with ``n_table`` nodes the first time the model is
    evaluated; evaluation beyond ``t_max`` is a domain error.
    """

    kind: ClassVar[str] = "tunneling"
    monotone: ClassVar[bool] = False

    a: float = 1.0
    V0: float = 1.0
    s_cutoff: float = 50.0
    tol: float = 1e-8
    t_max: float | None = None
    n_table: int = 2049

    _wtable: Any = field(default=None, init=False, repr=False, compare=False)
    _lock: Any = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        super().__post_init__()
        self.tunneling_params  # validates a, V0, s_cutoff, tol
        if self.t_max is None:
            self.t_max = 64.0 * self.V0 / self.a
        self.t_max = _positive("t_max", self.t_max)
        if int(self.n_table) != self.n_table or self.n_table < 64:
            raise ConfigurationError("must be an integer >= 64", key="n_table")
        self.n_table = int(self.n_table)

    @property
    def tunneling_params(self):
        from .tunneling import TunnelingParams

        return TunnelingParams(a=self.a, V0=self.V0, s_cutoff=self.s_cutoff, tol=self.tol)

    @property
    def wtable(self):
        from .tunneling import load_or_build_w_table

        with self._lock:
            if self._wtable is None:
                self._wtable = load_or_build_w_table(self.tunneling_params, self.t_max, self.n_table)
            return self._wtable

    def use_wtable(self, wtable) -> "Tunneling":
        """Attach a precomputed W table (must match this model's parameters and span)."""
        if wtable.params != self.tunneling_params:
            raise ConfigurationError("W table built for different parameters", key="wtable")
        with self._lock:
            self._wtable = wtable
        return self

    def _check_range(self, t):
        if (t > self.t_max).any():
            raise DomainError(f"time {t.max()!r} beyond tunneling table coverage {self.t_max!r}")

    def _survival(self, t):
        self._check_range(t)
        return np.exp(-self.wtable.double_integral(t))

    def _density(self, t):
        self._check_range(t)
        w = self.wtable
        return np.exp(-w.double_integral(t)) * w.integral(t)


@dataclass
class Custom(DecayModel):
    """Arbitrary survival law given as a vectorized callable (synthetic checks, user laws).

    No invariants are enforced; ``is_monotone`` is the caller's claim.
    """

    kind: ClassVar[str] = "custom"

    fn: Callable[[np.ndarray], np.ndarray] = field(default=lambda t: np.exp(-t))
    is_monotone: bool = False

    @property
    def monotone(self) -> bool:  # type: ignore[override]
        return self.is_monotone

    def _survival(self, t):
        return np.asarray(self.fn(t), dtype=float) * np.ones_like(t)


MODEL_KINDS: dict[str, type[DecayModel]] = {
    cls.kind: cls for cls in (Exponential, Toy, Tunneling, PiecewisePowerTail, ThreeRegime, Tabulated)
}


def make_model(kind: str, **params) -> DecayModel:
    """Construct a model from its kind name and parameter key-values."""
    try:
        cls = MODEL_KINDS[kind]
    except KeyError:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}", key="kind")
    allowed = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(params) - allowed)
    if unknown:
        raise ConfigurationError(f"unknown parameter for kind {kind!r}", key=unknown[0])
    try:
        return cls(**params)
    except TypeError as exc:
        raise ConfigurationError(str(exc), key="kind") from exc


def survival(model: DecayModel, t):
    """Survival probability p(t) of ``model``; ``t`` scalar or array, t >= 0."""
    return model.survival(t)


def decay_density(model: DecayModel, t, return_flag: bool = False):
    """Decay density h(t) = -p'(t), t > 0.  See :meth:`DecayModel.density`."""
    return model.density(t, return_flag=return_flag)


@dataclass(frozen=True)
class RegimeFit:
    """Exponential-regime fit p(t) ~ Z exp(-gamma t) over ``window``."""

    Z: float
    gamma: float
    window: tuple[float, float]
    residual: float

    @property
    def lifetime(self) -> float:
        return 1.0 / self.gamma

    @property
    def classification(self) -> str:
        """'QZE' for Z > 1, 'IZE' for Z < 1 ('neutral' within 1e-9 of 1)."""
        if abs(self.Z - 1.0) <= 1e-9:
            return "neutral"
        return "QZE" if self.Z > 1.0 else "IZE"


def _log_linear(model: DecayModel, window, samples: int):
    start, end = (float(w) for w in window)
    if not (0 <= start < end):
        raise DomainError(f"fit window must satisfy 0 <= start < end, got {window!r}")
    if int(samples) != samples or samples < 8:
        raise DomainError(f"need at least 8 samples, got {samples!r}")
    t = np.linspace(start, end, int(samples))
    p = np.asarray(model.survival(t), dtype=float)
    if not (p > 0).all():
        raise FitError(f"survival not strictly positive on window {window!r}")
    logp = np.log(p)
    slope, intercept = np.polyfit(t, logp, 1)
    residual = float(np.sqrt(np.mean((logp - (slope * t + intercept)) ** 2)))
    if not slope < 0:
        raise FitError(f"log p not decreasing on window {window!r} (slope {slope!r})")
    return float(-slope), float(intercept), residual, (start, end)


def fit_exponential_regime(model: DecayModel, window=DEFAULT_FIT_WINDOW, samples: int = DEFAULT_FIT_SAMPLES) -> RegimeFit:
    """Least-squares fit of log p on ``samples`` uniform points of ``window``."""
    gamma, intercept, residual, window = _log_linear(model, window, samples)
    return RegimeFit(Z=math.exp(intercept), gamma=gamma, window=window, residual=residual)


def fit_effective_lifetime(
    model: DecayModel, window=DEFAULT_FIT_WINDOW, samples: int = DEFAULT_FIT_SAMPLES, commit: bool = False
) -> float:
    """Effective lifetime 1/slope of -log p over ``window``.

    With ``commit=True`` the result is stored in ``model.time_unit``; nothing
    is mutated otherwise.
    """
    gamma, _, _, _ = _log_linear(model, window, samples)
    tau = 1.0 / gamma
    if commit:
        model.time_unit = tau
    return tau
