"""Tunneling survival law from an oscillatory double integral.

    W(tau) = a^2/(2 V0) * int ds L(s - d) L(s) cos(V0^2/a * [F(s) - F(s - d)]),
    log p(t) = -int_0^t (t - tau) W(tau) dtau,

with d = a tau / V0, L(x) = 1/(1 + x^2) and F the antiderivative of
sqrt(1 + z^2).  The s-integral over [-S + min(0, d), S + max(0, d)] (S =
``s_cutoff``) uses adaptive Gauss-Kronrod with panels no wider than one
local oscillation; the two tails beyond are integrated in the reciprocal
variable u = S'/s on (0, 1], which keeps the full real line.

W depends on tau only, so it is tabulated once (:class:`WTable`); the outer
integral is the exact double antiderivative of a clamped cubic spline of W.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .decay_models import Tabulated
from .errors import ConfigurationError, DomainError, NumericalFailure

CACHE_ENV = "LGDECAY_CACHE_DIR"

# tables are immutable, so one per (params, t_max, n_grid) is shared in-process
_MEMO: dict[str, "WTable"] = {}
_MEMO_LOCK = threading.Lock()

# Gauss-Kronrod 21-point rule (QUADPACK qk21); Gauss-10 nodes are the odd Kronrod indices.
_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])           # 21 nodes, ascending
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]

MAX_PANELS = 200_000


def antiderivative_sqrt1pz2(z):
    """F(z) = (z sqrt(1 + z^2) + asinh z) / 2, the odd antiderivative of sqrt(1 + z^2)."""
    z = np.asarray(z, dtype=float)
    out = 0.5 * (z * np.sqrt(1.0 + z * z) + np.arcsinh(z))
    return float(out) if out.ndim == 0 else out


def _gk_panels(f, a: np.ndarray, b: np.ndarray):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fx = f(c[:, None] + h[:, None] * _NODES[None, :])
    k = h * (fx @ _KW)
    g = h * (fx @ _GW)
    return k, np.abs(k - g)


def adaptive_gk21(f, edges, tol: float, max_panels: int = MAX_PANELS):
    """Integrate vectorized ``f`` over the partition ``edges`` to absolute error ``tol``.

    Panels are bisected, largest error first, until the summed |K21 - G10|
    estimate is below ``tol``.  Returns ``(value, error_estimate)``.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    val, err = _gk_panels(f, a, b)
    while True:
        total = err.sum()
        if total <= tol:
            return float(val.sum()), float(total)
        if len(a) >= max_panels:
            raise NumericalFailure(f"adaptive quadrature hit {max_panels} panels", error_estimate=float(total))
        # split the fewest worst panels that would leave at most tol/2 behind
        order = np.argsort(-err, kind="stable")
        remaining = total - np.cumsum(err[order])
        n_split = int(np.searchsorted(-remaining, -0.5 * tol)) + 1
        n_split = min(n_split, len(order), max_panels - len(a))
        split = np.zeros(len(a), dtype=bool)
        split[order[:n_split]] = True
        sa, sb = a[split], b[split]
        mid = 0.5 * (sa + sb)
        na = np.concatenate([sa, mid])
        nb = np.concatenate([mid, sb])
        nval, nerr = _gk_panels(f, na, nb)
        keep = ~split
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        order = np.argsort(a, kind="stable")
        a, b, val, err = a[order], b[order], val[order], err[order]


@dataclass(frozen=True)
class TunnelingParams:
    """Dimensionless parameters of the tunneling law and its quadrature controls."""

    a: float
    V0: float
    s_cutoff: float = 50.0
    tol: float = 1e-8

    def __post_init__(self):
        for name in ("a", "V0", "s_cutoff", "tol"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigurationError(f"must be a positive finite number, got {v!r}", key=name)
            object.__setattr__(self, name, float(v))
        if self.s_cutoff < 10:
            raise ConfigurationError("must be >= 10", key="s_cutoff")
        if self.tol > 1e-4:
            raise ConfigurationError("must be <= 1e-4", key="tol")

    @property
    def amplitude(self) -> float:
        return self.a * self.a / (2.0 * self.V0)

    @property
    def phase_scale(self) -> float:
        return self.V0 * self.V0 / self.a

    def content_hash(self, **extra) -> str:
        doc = json.dumps({**asdict(self), **extra}, sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()[:16]


def _integrand(d: float, lam: float):
    def f(s):
        phase = lam * (0.5 * (s * np.sqrt(1.0 + s * s) + np.arcsinh(s))
                       - 0.5 * ((s - d) * np.sqrt(1.0 + (s - d) ** 2) + np.arcsinh(s - d)))
        return np.cos(phase) / ((1.0 + (s - d) ** 2) * (1.0 + s * s))
    return f


def _tail(f, s_edge: float):
    # int_{s_edge}^{+-inf} f(s) ds = int_0^1 f(s_edge / u) |s_edge| / u^2 du
    scale = abs(s_edge)
    return lambda u: f(s_edge / u) * scale / (u * u)


def eval_W(tau: float, params: TunnelingParams, max_panels: int = MAX_PANELS) -> float:
    """W(tau) to absolute error ``params.tol``."""
    tau = float(tau)
    if not tau >= 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}")
    d = params.a * tau / params.V0
    lam = params.phase_scale
    f = _integrand(d, lam)
    tol = params.tol / params.amplitude
    s_lo = min(0.0, d) - params.s_cutoff
    s_hi = max(0.0, d) + params.s_cutoff
    # |phase'| <= lam * d: one oscillation per panel at most
    width = min(1.0, 2.0 * math.pi / (lam * d)) if d > 0 else 1.0
    cuts = sorted({s_lo, 0.0, d, s_hi})
    edges = [cuts[0]]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, math.ceil((hi - lo) / width))
        edges.extend(np.linspace(lo, hi, n + 1)[1:])
    core, _ = adaptive_gk21(f, edges, 0.8 * tol, max_panels)
    tail_edges = np.linspace(0.0, 1.0, 17)
    right, _ = adaptive_gk21(_tail(f, s_hi), tail_edges, 0.1 * tol, max_panels)
    left, _ = adaptive_gk21(_tail(f, s_lo), tail_edges, 0.1 * tol, max_panels)
    return params.amplitude * (core + right + left)


@dataclass(frozen=True, eq=False)
class WTable:
    """W tabulated on a strictly increasing grid starting at 0."""

    grid: np.ndarray
    values: np.ndarray
    params: TunnelingParams

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 4:
            raise ConfigurationError("grid and values must be equal-length 1-d arrays", key="grid")
        if grid[0] != 0.0 or not (np.diff(grid) > 0).all():
            raise ConfigurationError("grid must start at 0 and increase strictly", key="grid")
        if not np.isfinite(values).all():
            raise ConfigurationError("W values must be finite", key="values")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def t_max(self) -> float:
        return float(self.grid[-1])

    @cached_property
    def spline(self) -> CubicSpline:
        # W is even in tau, hence W'(0) = 0
        return CubicSpline(self.grid, self.values, bc_type=((1, 0.0), "not-a-knot"))

    @cached_property
    def _first(self):
        return self.spline.antiderivative(1)

    @cached_property
    def _second(self):
        return self.spline.antiderivative(2)

    def integral(self, t):
        """int_0^t W."""
        return self._first(t)

    def double_integral(self, t):
        """int_0^t (t - tau) W(tau) dtau."""
        return self._second(t)

    def to_csv(self, path) -> None:
        _write_table(path, "wtable", self.grid, self.values, self.params)

    @classmethod
    def from_csv(cls, path, params: TunnelingParams | None = None) -> "WTable":
        header, grid, values = _read_table(path)
        stored = TunnelingParams(**header["params"])
        if params is not None and params != stored:
            raise ConfigurationError(f"{path}: table built for {stored}, not {params}", key="wtable")
        if header["hash"] != stored.content_hash():
            raise ConfigurationError(f"{path}: parameter hash mismatch", key="wtable")
        return cls(grid, values, stored)


def build_w_table(params: TunnelingParams, t_max: float, n_grid: int, workers: int = 1) -> WTable:
    """Tabulate W on ``n_grid`` uniform nodes of [0, t_max].

    Nodes are independent; ``workers`` > 1 evaluates them on a thread pool
    without affecting the result.
    """
    if not t_max > 0:
        raise DomainError(f"t_max must be > 0, got {t_max!r}")
    grid = np.linspace(0.0, float(t_max), int(n_grid))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = list(pool.map(lambda t: eval_W(t, params), grid))
    else:
        values = [eval_W(t, params) for t in grid]
    return WTable(grid, np.array(values), params)


def load_or_build_w_table(params: TunnelingParams, t_max: float, n_grid: int, cache_dir=None) -> WTable:
    """Like :func:`build_w_table`, reusing a CSV cache when a cache directory is set.

    The directory comes from ``cache_dir`` or the ``LGDECAY_CACHE_DIR``
    environment variable; the file name carries the parameter content hash.
    """
    key = params.content_hash(t_max=float(t_max), n_grid=int(n_grid))
    with _MEMO_LOCK:
        if key in _MEMO:
            return _MEMO[key]
        table = _load_or_build(params, t_max, n_grid, key, cache_dir or os.environ.get(CACHE_ENV))
        _MEMO[key] = table
        return table


def _load_or_build(params, t_max, n_grid, key, cache_dir) -> WTable:
    if not cache_dir:
        return build_w_table(params, t_max, n_grid)
    path = Path(cache_dir) / f"wtable-{key}.csv"
    if path.exists():
        table = WTable.from_csv(path, params)
        if len(table.grid) == int(n_grid) and table.t_max == float(np.linspace(0.0, float(t_max), int(n_grid))[-1]):
            return table
    table = build_w_table(params, t_max, n_grid)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path)
    return table


def eval_log_p(t, params: TunnelingParams, wtable: WTable):
    """log p(t) = -int_0^t (t - tau) W(tau) dtau, evaluated on the tabulated W."""
    if wtable.params != params:
        raise ConfigurationError("W table was built for different parameters", key="wtable")
    arr = np.asarray(t, dtype=float)
    if (arr < 0).any() or np.isnan(arr).any():
        raise DomainError("t must be >= 0")
    if (arr > wtable.t_max).any():
        raise DomainError(f"t={arr.max()!r} beyond table coverage {wtable.t_max!r}")
    out = -wtable.double_integral(arr)
    return float(out) if out.ndim == 0 else out


def build_p_interpolant(
    params: TunnelingParams, t_max: float, n_grid: int, wtable: WTable | None = None, n_w: int = 2049
) -> Tabulated:
    """Tabulate p on ``n_grid`` uniform nodes of [0, t_max] as a Tabulated model.

    Node values are exp(eval_log_p) exactly; node slopes are the exact
    derivative -p * int_0^t W, limited only where p is strictly monotone.
    """
    if int(n_grid) != n_grid or n_grid < 64:
        raise ConfigurationError("must be an integer >= 64", key="n_grid")
    if wtable is None:
        wtable = load_or_build_w_table(params, t_max, n_w)
    grid = np.linspace(0.0, float(t_max), int(n_grid))
    values = np.exp(eval_log_p(grid, params, wtable))
    slopes = -values * wtable.integral(grid)
    return Tabulated(grid=grid, values=values, slopes=slopes)


def tabulated_to_csv(model: Tabulated, path, params: TunnelingParams | None = None) -> None:
    """Export a tabulated survival law as ``t,value`` CSV."""
    _write_table(path, "survival", model.grid, model.values, params)


def tabulated_from_csv(path) -> Tabulated:
    """Import a ``t,value`` survival table (slopes re-derived with PCHIP)."""
    _, grid, values = _read_table(path)
    return Tabulated(grid=grid, values=values)


def _write_table(path, what: str, grid, values, params: TunnelingParams | None) -> None:
    lines = [f"# lgdecay {__version__} {what}"]
    if params is not None:
        lines.append(f"# params_hash: {params.content_hash()}")
        lines.append(f"# params: {json.dumps(asdict(params), sort_keys=True)}")
    lines.append("t,value")
    lines.extend(f"{float(t)!r},{float(v)!r}" for t, v in zip(grid, values))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_table(path):
    header = {"hash": None, "params": None}
    rows = []
    seen_columns = False
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if line.startswith("#"):
            if line.startswith("# params_hash:"):
                header["hash"] = line.split(":", 1)[1].strip()
            elif line.startswith("# params:"):
                header["params"] = json.loads(line.split(":", 1)[1])
            continue
        if not seen_columns:
            if line.strip() != "t,value":
                raise ConfigurationError(f"{path}:{lineno}: expected header 't,value'", key="file")
            seen_columns = True
            continue
        try:
            t, v = line.split(",")
            rows.append((float(t), float(v)))
        except ValueError:
            raise ConfigurationError(f"{path}:{lineno}: malformed row {line!r}", key="file")
    if not rows:
        raise ConfigurationError(f"{path}: no data rows", key="file")
    arr = np.array(rows)
    return header, arr[:, 0], arr[:, 1]
