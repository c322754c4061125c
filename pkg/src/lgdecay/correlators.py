"""Two-time joint probabilities, correlators C_ij and the three-time string K3.

Outcomes are Q = +1 (undecayed, U) and Q = -1 (decayed, D).  Two probability
rules are available:

* classical (macro-realism + non-invasive measurement): UU = p(t_j),
  UD = p(t_i) - p(t_j), DD = 1 - p(t_i);
* quantum collapse (a U outcome restarts the decay clock):
  UU = p(t_i) p(t_j - t_i), UD = p(t_i) [1 - p(t_j - t_i)], DD = 1 - p(t_i).

DU vanishes in both.  K3 = C12 + C23 - C13 is never clamped.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidOntologyError

__all__ = [
    "Ontology",
    "JointTable",
    "K3Result",
    "joint_table",
    "correlator",
    "k3",
    "k3_components",
    "k3_closed_form",
    "k3_exponential_regime",
]

# classical tables on slightly non-monotone interpolants: tolerated violation
MONOTONE_SLACK = 1e-9


class Ontology(enum.Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"

    @classmethod
    def parse(cls, value) -> "Ontology":
        if isinstance(value, cls):
            return value
        aliases = {"classical": cls.CLASSICAL, "mrnim": cls.CLASSICAL, "realist": cls.CLASSICAL,
                   "quantum": cls.QUANTUM, "collapse": cls.QUANTUM}
        try:
            return aliases[str(value).lower().replace("-", "").replace("_", "")]
        except KeyError:
            raise ValueError(f"unknown ontology {value!r}; expected 'classical' or 'quantum'") from None


@dataclass(frozen=True)
class JointTable:
    t_i: float
    t_j: float
    uu: float
    ud: float
    du: float
    dd: float

    @property
    def total(self) -> float:
        return self.uu + self.ud + self.du + self.dd

    @property
    def correlator(self) -> float:
        """Sum over outcomes of Q_i Q_j P(Q_i, Q_j)."""
        return self.uu + self.dd - self.ud - self.du


@dataclass(frozen=True)
class K3Result:
    t1: float
    t2: float
    t3: float
    c12: float
    c23: float
    c13: float

    @property
    def k3(self) -> float:
        return self.c12 + self.c23 - self.c13

    @property
    def violation(self) -> float:
        """K3 - 1: positive values break the Leggett-Garg bound."""
        return self.k3 - 1.0


def _pair(t_i, t_j):
    ti = np.asarray(t_i, dtype=float)
    tj = np.asarray(t_j, dtype=float)
    if np.isnan(ti).any() or np.isnan(tj).any():
        raise DomainError("times must not be NaN")
    if (ti < 0).any() or not (ti < tj).all():
        raise DomainError(f"need 0 <= t_i < t_j, got t_i={t_i!r}, t_j={t_j!r}")
    return ti, tj


def _classical_pj(model, ti, tj):
    """p(t_i), p(t_j) with the classical monotonicity requirement enforced."""
    pi = np.asarray(model.survival(ti), dtype=float)
    pj = np.asarray(model.survival(tj), dtype=float)
    excess = pj - pi
    if (excess > MONOTONE_SLACK).any():
        raise InvalidOntologyError(
            f"classical ontology needs p(t_i) >= p(t_j); survival rises by {excess.max():.3g}"
        )
    return pi, np.minimum(pj, pi)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def joint_table(model, t_i: float, t_j: float, ontology="quantum") -> JointTable:
    ontology = Ontology.parse(ontology)
    ti, tj = _pair(t_i, t_j)
    if np.ndim(ti) or np.ndim(tj):
        raise DomainError("joint_table takes scalar times")
    if ontology is Ontology.CLASSICAL:
        pi, pj = _classical_pj(model, ti, tj)
        uu, ud = float(pj), float(pi - pj)
    else:
        pi = np.asarray(model.survival(ti), dtype=float)
        pd = float(model.survival(tj - ti))
        uu, ud = float(pi * pd), float(pi * (1.0 - pd))
    return JointTable(float(ti), float(tj), uu=uu, ud=ud, du=0.0, dd=float(1.0 - pi))


def correlator(model, t_i, t_j, ontology="quantum"):
    """C_ij from the closed forms 1 + 2p(t_j) - 2p(t_i) (classical) or 1 + 2p(t_i)p(t_j - t_i) - 2p(t_i)."""
    ontology = Ontology.parse(ontology)
    ti, tj = _pair(t_i, t_j)
    if ontology is Ontology.CLASSICAL:
        pi, pj = _classical_pj(model, ti, tj)
        return _scalar(1.0 + 2.0 * pj - 2.0 * pi)
    pi = np.asarray(model.survival(ti), dtype=float)
    pd = np.asarray(model.survival(tj - ti), dtype=float)
    return _scalar(1.0 + 2.0 * pi * pd - 2.0 * pi)


def _triple(t1, t2, t3):
    t1, t2, t3 = (np.asarray(t, dtype=float) for t in (t1, t2, t3))
    if (t1 < 0).any() or not ((t1 < t2) & (t2 < t3)).all():
        raise DomainError(f"need 0 <= t1 < t2 < t3, got ({t1!r}, {t2!r}, {t3!r})")
    return t1, t2, t3


def k3_components(model, t1, t2, t3, ontology="quantum"):
    """Vectorized (c12, c23, c13) over broadcast time arrays.

    :func:`k3` and the scanners share this path, so a grid cell and a direct
    call at the same triple agree bit for bit.
    """
    t1, t2, t3 = _triple(t1, t2, t3)
    return (
        np.asarray(correlator(model, t1, t2, ontology)),
        np.asarray(correlator(model, t2, t3, ontology)),
        np.asarray(correlator(model, t1, t3, ontology)),
    )


def k3(model, t1: float, t2: float, t3: float, ontology="quantum") -> K3Result:
    c12, c23, c13 = k3_components(model, t1, t2, t3, ontology)
    if c12.ndim:
        raise DomainError("k3 takes scalar times; use k3_components for arrays")
    return K3Result(float(t1), float(t2), float(t3), float(c12), float(c23), float(c13))


def k3_closed_form(model, t1, t2, t3):
    """Quantum K3 written directly in terms of p.

    1 + 2p(t1)[p(t2 - t1) - p(t3 - t1)] + 2p(t2)p(t3 - t2) - 2p(t2); when t1 = 0
    the p(t1) factor is dropped (p(0) = 1), which gives the reduced t1 = 0 form.
    """
    t1, t2, t3 = _triple(t1, t2, t3)
    p = model.survival
    bracket = np.asarray(p(t2 - t1)) - np.asarray(p(t3 - t1))
    lead = np.where(t1 == 0, bracket, np.asarray(p(t1)) * bracket)
    p2 = np.asarray(p(t2))
    return _scalar(1.0 + 2.0 * lead + 2.0 * p2 * np.asarray(p(t3 - t2)) - 2.0 * p2)


def k3_exponential_regime(Z: float, gamma: float, t: float, t1_zero: bool = False) -> float:
    """K3 for p(t) = Z exp(-gamma t) in the exponential regime.

    ``t`` is t2 (all times interior, 1 + 2Z(Z-1)e^{-gamma t2}) or, with
    ``t1_zero=True``, t3 (t1 = 0, 1 + 2Z(Z-1)e^{-gamma t3}).
    """
    if not (Z > 0 and gamma > 0):
        raise DomainError(f"need Z > 0 and gamma > 0, got Z={Z!r}, gamma={gamma!r}")
    if not t >= 0:
        raise DomainError(f"time must be >= 0, got {t!r}")
    return 1.0 + 2.0 * Z * (Z - 1.0) * math.exp(-gamma * t)
