"""Monte Carlo trajectories of sequential U/D measurements on an unstable system.

Three trajectory semantics:

``realist``
    one decay time t* per trial drawn by inverse-CDF sampling; the outcome at
    t_k is U iff t* > t_k (measurements do not disturb anything);
``collapse``
    sequential Bernoulli survival: the first window survives with probability
    p(t_1), each later window with p(t_{k+1} - t_k) given a U outcome before;
``clock_reset``
    a classical system whose decay time is redrawn from zero after every U
    observation.

Randomness comes from Philox (counter-based).  Trials are grouped in fixed
chunks of ``CHUNK`` consecutive trial indices; chunk c of stream s under
ontology o uses key ``seed`` and counter words (0, o, c, s).  The numbers a
trial sees depend only on (seed, ontology, stream, trial index), so
different ontologies draw independent samples and results do not depend on how
chunks are spread over workers.  Counts merge by exact integer summation.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, HorizonError

__all__ = [
    "McOntology",
    "McEstimate",
    "sample_decay_time",
    "run_trials",
    "estimate_correlator",
    "estimate_k3",
    "CHUNK",
]

CHUNK = 1 << 16
P_FLOOR = 1e-12
P_TOL = 1e-12
_HALF_ULP = 2.0**-54


class McOntology(enum.Enum):
    REALIST = "realist"
    COLLAPSE = "collapse"
    CLOCK_RESET = "clock_reset"

    @classmethod
    def parse(cls, value) -> "McOntology":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("-", "_")
        aliases = {"classical": "realist", "classical_realist": "realist", "quantum": "collapse",
                   "quantum_collapse": "collapse", "classical_clock_reset": "clock_reset", "reset": "clock_reset"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown Monte Carlo ontology {value!r}") from None


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_trials: int
    seed: int

    def as_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_trials": self.n_trials, "seed": self.seed}


class _Inverter:
    """Vectorized inverse of a nonincreasing survival law."""

    def __init__(self, model, t_cap: float = 1e300):
        self.model = model
        t = float(model.time_unit)
        while model.survival(t) >= P_FLOOR:
            if 2.0 * t > t_cap or not math.isfinite(t):
                break
            t *= 2.0
        self.t_max = t
        self.p_max = float(model.survival(t))
        lin = np.linspace(0.0, min(t, 32.0 * model.time_unit), 1025)
        geo = np.geomspace(lin[-1], t, 1025)[1:] if t > lin[-1] else np.empty(0)
        self.nodes = np.concatenate([lin, geo])
        self.p_nodes = np.asarray(model.survival(self.nodes), dtype=float)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Decay times with p(t) = u; +inf where u is below p(t_max)."""
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, np.inf)
        ok = u >= self.p_max
        uu = u[ok]
        # nodes are ordered by decreasing p: bracket via the reversed table
        rev = self.p_nodes[::-1]
        j = np.searchsorted(rev, uu, side="left")
        lo_idx = np.clip(len(self.nodes) - 1 - j, 0, len(self.nodes) - 2)
        lo = self.nodes[lo_idx]
        hi = self.nodes[lo_idx + 1]
        mid = 0.5 * (lo + hi)
        done = np.zeros(len(uu), dtype=bool)
        for _ in range(200):
            pm = np.asarray(self.model.survival(mid), dtype=float)
            diff = pm - uu
            done |= np.abs(diff) <= P_TOL
            if done.all():
                break
            above = (diff > 0) & ~done
            below = (diff <= 0) & ~done
            lo = np.where(above, mid, lo)
            hi = np.where(below, mid, hi)
            new_mid = 0.5 * (lo + hi)
            # bracket collapsed to adjacent floats
            done |= (new_mid == lo) | (new_mid == hi)
            mid = np.where(done, mid, new_mid)
        out[ok] = mid
        return out


def sample_decay_time(model, u):
    """Decay time t with p(t) = u for u in (0, 1), found by bracketing plus bisection.

    The search horizon doubles from ``model.time_unit`` until p < 1e-12;
    a ``u`` below the survival reached there raises :class:`HorizonError`.
    """
    arr = np.asarray(u, dtype=float)
    if not ((arr > 0) & (arr < 1)).all():
        raise DomainError("u must lie in (0, 1)")
    inv = _Inverter(model)
    if (arr < inv.p_max).any():
        raise HorizonError(f"u={arr.min()!r} below reachable survival {inv.p_max!r}", t_max=inv.t_max)
    out = inv(arr)
    return float(out) if out.ndim == 0 else out


def _outcome_strings(m: int) -> list[str]:
    return ["".join(s) for s in itertools.product("UD", repeat=m)]


def _validate_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) not in (2, 3):
        raise DomainError("need 2 or 3 measurement times")
    if t[0] < 0 or not (np.diff(t) > 0).all():
        raise DomainError(f"times must be nonnegative and strictly increasing, got {list(times)!r}")
    return t


_ONTOLOGY_WORD = {McOntology.REALIST: 1, McOntology.COLLAPSE: 2, McOntology.CLOCK_RESET: 3}


def _chunk_uniforms(seed: int, ontology: McOntology, stream: int, chunk: int, size: int, m: int) -> np.ndarray:
    bitgen = np.random.Philox(key=seed, counter=[0, _ONTOLOGY_WORD[ontology], chunk, stream])
    # (k + 1/2) / 2^53, strictly inside (0, 1)
    return np.random.Generator(bitgen).random((m, size)) + _HALF_ULP


def _chunk_alive(model, times, ontology, u, inverter) -> np.ndarray:
    """Boolean (m, size) array: trial is U at each measurement time."""
    m, size = u.shape
    alive = np.empty((m, size), dtype=bool)
    if ontology is McOntology.REALIST:
        t_star = inverter(u[0])
        for k in range(m):
            alive[k] = t_star > times[k]
    elif ontology is McOntology.COLLAPSE:
        prev = np.ones(size, dtype=bool)
        start = 0.0
        for k in range(m):
            p_window = float(model.survival(times[k] - start))
            prev = prev & (u[k] < p_window)
            alive[k] = prev
            start = times[k]
    else:
        prev = np.ones(size, dtype=bool)
        start = 0.0
        for k in range(m):
            # a fresh clock started at the last U observation
            t_star = start + inverter(u[k])
            prev = prev & (t_star > times[k])
            alive[k] = prev
            start = times[k]
    return alive


def _count_chunk(model, times, ontology, seed, stream, chunk, size, inverter) -> np.ndarray:
    m = len(times)
    u = _chunk_uniforms(seed, ontology, stream, chunk, size, m)
    alive = _chunk_alive(model, times, ontology, u, inverter)
    code = np.zeros(size, dtype=np.int64)
    for k in range(m):
        code = 2 * code + (~alive[k]).astype(np.int64)
    return np.bincount(code, minlength=2**m)


def _counts(model, times, ontology, n, seed, stream, workers) -> np.ndarray:
    ontology = McOntology.parse(ontology)
    times = _validate_times(times)
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError("seed must be a 64-bit unsigned integer")
    n = int(n)
    inverter = _Inverter(model) if ontology is not McOntology.COLLAPSE else None
    chunks = [(c, min(CHUNK, n - c * CHUNK)) for c in range(math.ceil(n / CHUNK))]
    job = lambda cs: _count_chunk(model, times, ontology, seed, stream, cs[0], cs[1], inverter)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(cs) for cs in chunks]
    return np.sum(parts, axis=0)


def _frequency(count: int, n: int, seed: int) -> McEstimate:
    f = count / n
    return McEstimate(value=f, std_error=math.sqrt(f * (1.0 - f) / n), n_trials=n, seed=seed)


def run_trials(model, times, ontology, n: int, seed: int, *, stream: int = 0, workers: int = 1) -> dict[str, McEstimate]:
    """Outcome-string frequencies ('UU', 'UD', ... or 'UUU', ...) over ``n`` trials.

    Strings with a U after a D are impossible under every ontology and come
    out exactly zero.
    """
    counts = _counts(model, times, ontology, n, seed, stream, workers)
    labels = _outcome_strings(len(times))
    return {label: _frequency(int(c), int(n), int(seed)) for label, c in zip(labels, counts)}


def _qq_mean(counts, labels, i, j, n) -> tuple[float, float]:
    s = sum(int(c) * (1 if lab[i] == lab[j] else -1) for c, lab in zip(counts, labels))
    mean = s / n
    return mean, math.sqrt(max(0.0, 1.0 - mean * mean) / n)


def estimate_correlator(model, t_i, t_j, ontology, n: int, seed: int, *, stream: int = 0, workers: int = 1) -> McEstimate:
    """C_ij as the sample mean of Q_i Q_j in a two-measurement experiment."""
    counts = _counts(model, (t_i, t_j), ontology, n, seed, stream, workers)
    mean, se = _qq_mean(counts, _outcome_strings(2), 0, 1, int(n))
    return McEstimate(mean, se, int(n), int(seed))


def estimate_k3(
    model, t1, t2, t3, ontology, n: int, seed: int, *, protocol: str = "pairwise", workers: int = 1
) -> McEstimate:
    """K3 = C12 + C23 - C13 from simulated trajectories.

    ``protocol="pairwise"`` (default) estimates each C_ij from its own batch
    of n trials measured only at (t_i, t_j), on streams 1, 2, 3.
    ``protocol="sequential"`` is the optional three-measurement mode: one
    batch measured at t1, t2 and t3, all three C's read from it (the middle
    measurement then disturbs C13 under invasive ontologies).
    """
    if protocol == "pairwise":
        parts = [
            estimate_correlator(model, a, b, ontology, n, seed, stream=s, workers=workers)
            for s, (a, b) in enumerate(((t1, t2), (t2, t3), (t1, t3)), start=1)
        ]
        value = parts[0].value + parts[1].value - parts[2].value
        se = math.sqrt(sum(p.std_error**2 for p in parts))
        return McEstimate(value, se, int(n), int(seed))
    if protocol == "sequential":
        counts = _counts(model, (t1, t2, t3), ontology, n, seed, 4, workers)
        labels = _outcome_strings(3)
        c12, _ = _qq_mean(counts, labels, 0, 1, int(n))
        c23, _ = _qq_mean(counts, labels, 1, 2, int(n))
        c13, _ = _qq_mean(counts, labels, 0, 2, int(n))
        # per-trial K3 contribution and its sample variance
        per = np.array([
            (1 if lab[0] == lab[1] else -1) + (1 if lab[1] == lab[2] else -1) - (1 if lab[0] == lab[2] else -1)
            for lab in labels
        ], dtype=float)
        w = np.asarray(counts, dtype=float) / n
        value = c12 + c23 - c13
        var = float(w @ (per - value) ** 2)
        return McEstimate(value, math.sqrt(var / n), int(n), int(seed))
    raise ValueError(f"unknown protocol {protocol!r}; expected 'pairwise' or 'sequential'")
