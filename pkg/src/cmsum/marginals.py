"""Univariate marginal distributions with exact cdf/inverse/moment computations.

Six parametric families are supported: Gamma, Poisson, Normal, Uniform,
Degenerate (point mass) and EmpiricalDiscrete.  Every marginal exposes the
cdf, the left/right generalized inverses and their alpha-blend, the mean,
and the list of probability levels where the left inverse jumps (needed by
the crossing machinery to seed breakpoints).

Conventions for the inverses follow the usual generalized-inverse
definitions, with practical endpoint behaviour: the left inverse at p=0
returns the lower support bound (-inf when unbounded below) and the right
inverse at p=1 returns the upper support bound (+inf when unbounded above).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import CapExceeded

__all__ = [
    "SupportBounds",
    "Marginal",
    "Gamma",
    "Poisson",
    "Normal",
    "Uniform",
    "Degenerate",
    "EmpiricalDiscrete",
    "from_descriptor",
]

_POISSON_TABLE_MAX = 4_000_000


@dataclass(frozen=True)
class SupportBounds:
    """Extended-real support interval of a marginal."""

    lower: float
    upper: float

    @property
    def lower_finite(self) -> bool:
        return math.isfinite(self.lower)

    @property
    def upper_finite(self) -> bool:
        return math.isfinite(self.upper)


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _check_prob(p) -> None:
    arr = np.asarray(p, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"probability level outside [0, 1]: {p!r}")


class Marginal(ABC):
    """A univariate distribution; instances are immutable and thread-safe."""

    family: str

    def cdf(self, x):
        """P[X <= x]; accepts a float or an ndarray."""
        arr, scalar = _as_array(x)
        out = self._cdf(arr)
        return float(out) if scalar else out

    def quantile_left(self, p):
        """Left inverse F^{-1}(p) = inf{x : F(x) >= p}.

        At p=0 returns the lower support bound (-inf when unbounded below);
        left-continuous in p.  Accepts a float or an ndarray.
        """
        _check_prob(p)
        arr, scalar = _as_array(p)
        out = self._quantile_left(arr)
        return float(out) if scalar else out

    def quantile_right(self, p):
        """Right inverse F^{-1+}(p) = sup{x : F(x) <= p}.

        At p=1 returns the upper support bound (+inf when unbounded above).
        Equals the left inverse wherever F is continuous and strictly
        increasing.  Accepts a float or an ndarray.
        """
        _check_prob(p)
        arr, scalar = _as_array(p)
        out = self._quantile_right(arr)
        return float(out) if scalar else out

    def quantile_alpha(self, p, alpha: float):
        """Generalized alpha-inverse (1-a) F^{-1}(p) + a F^{-1+}(p).

        Raises ValueError if either inverse is infinite at p.
        """
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha outside [0, 1]: {alpha!r}")
        lo = self.quantile_left(p)
        hi = self.quantile_right(p)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError(f"infinite inverse at p={p!r}")
        return (1.0 - alpha) * lo + alpha * hi

    def atoms(self, plo: float, phi: float, cap: int = 100_000) -> list[float]:
        """Probability levels in (plo, phi) where the left inverse jumps.

        Empty for continuous families.  Raises CapExceeded when the list
        would exceed ``cap`` entries.
        """
        if not 0.0 <= plo < phi <= 1.0:
            raise ValueError(f"invalid level window ({plo}, {phi})")
        return self._atoms(plo, phi, cap)

    @abstractmethod
    def mean(self) -> float: ...

    @abstractmethod
    def support(self) -> SupportBounds: ...

    @abstractmethod
    def to_descriptor(self) -> dict: ...

    @abstractmethod
    def _cdf(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _quantile_left(self, p: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _quantile_right(self, p: np.ndarray) -> np.ndarray: ...

    def _atoms(self, plo: float, phi: float, cap: int) -> list[float]:
        return []

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.to_descriptor().items() if k != "family")
        return f"{type(self).__name__}({args})"


class Gamma(Marginal):
    family = "gamma"

    def __init__(self, shape: float, scale: float):
        if not (shape > 0.0 and scale > 0.0):
            raise ValueError("Gamma requires shape > 0 and scale > 0")
        self.shape = float(shape)
        self.scale = float(scale)

    def mean(self) -> float:
        return self.shape * self.scale

    def support(self) -> SupportBounds:
        return SupportBounds(0.0, math.inf)

    def to_descriptor(self) -> dict:
        return {"family": "gamma", "shape": self.shape, "scale": self.scale}

    def _cdf(self, x):
        return np.where(x > 0.0, special.gammainc(self.shape, np.maximum(x, 0.0) / self.scale), 0.0)

    def _quantile_left(self, p):
        return self.scale * special.gammaincinv(self.shape, p)

    _quantile_right = _quantile_left


class Poisson(Marginal):
    family = "poisson"

    def __init__(self, rate: float):
        if not rate > 0.0:
            raise ValueError("Poisson requires rate > 0")
        self.rate = float(rate)
        self._table = None  # lazy cumulative cdf values F(0), F(1), ...

    def mean(self) -> float:
        return self.rate

    def support(self) -> SupportBounds:
        return SupportBounds(0.0, math.inf)

    def to_descriptor(self) -> dict:
        return {"family": "poisson", "rate": self.rate}

    def _cdf_at(self, k: float) -> float:
        # P[X <= k] = Q(floor(k)+1, rate), exact via the upper incomplete gamma
        if k < 0.0:
            return 0.0
        return float(special.gammaincc(math.floor(k) + 1.0, self.rate))

    def _ensure_table(self) -> np.ndarray:
        if self._table is None:
            n = int(self.rate + 12.0 * math.sqrt(self.rate) + 30.0)
            while True:
                tab = special.gammaincc(np.arange(1.0, n + 1.0), self.rate)
                if tab[-1] >= 1.0 or n >= _POISSON_TABLE_MAX:
                    break
                n *= 2
            self._table = tab
        return self._table

    def _cdf(self, x):
        k = np.floor(x)
        return np.where(x >= 0.0, special.gammaincc(np.maximum(k, 0.0) + 1.0, self.rate), 0.0)

    def _quantile_left(self, p):
        tab = self._ensure_table()
        if tab[-1] < 1.0 and np.any((p > tab[-1]) & (p < 1.0)):
            raise CapExceeded(f"Poisson cdf table capped below requested level (rate={self.rate})")
        out = np.searchsorted(tab, p, side="left").astype(float)
        return np.where(p >= 1.0, math.inf, out)

    def _quantile_right(self, p):
        tab = self._ensure_table()
        if tab[-1] < 1.0 and np.any((p > tab[-1]) & (p < 1.0)):
            raise CapExceeded(f"Poisson cdf table capped below requested level (rate={self.rate})")
        out = np.searchsorted(tab, p, side="right").astype(float)
        return np.where(p >= 1.0, math.inf, out)

    def _atoms(self, plo, phi, cap):
        tab = self._ensure_table()
        i = int(np.searchsorted(tab, plo, side="right"))
        j = int(np.searchsorted(tab, phi, side="left"))
        if j - i > cap:
            raise CapExceeded(f"Poisson atom count {j - i} exceeds cap {cap}")
        return [float(v) for v in tab[i:j]]


class Normal(Marginal):
    family = "normal"

    def __init__(self, mean: float, sd: float):
        if not sd > 0.0:
            raise ValueError("Normal requires sd > 0")
        self.mu = float(mean)
        self.sd = float(sd)

    def mean(self) -> float:
        return self.mu

    def support(self) -> SupportBounds:
        return SupportBounds(-math.inf, math.inf)

    def to_descriptor(self) -> dict:
        return {"family": "normal", "mean": self.mu, "sd": self.sd}

    def _cdf(self, x):
        return special.ndtr((x - self.mu) / self.sd)

    def _quantile_left(self, p):
        with np.errstate(divide="ignore"):
            return self.mu + self.sd * special.ndtri(p)

    _quantile_right = _quantile_left


class Uniform(Marginal):
    family = "uniform"

    def __init__(self, lo: float, hi: float):
        if not lo < hi:
            raise ValueError("Uniform requires lo < hi")
        self.lo = float(lo)
        self.hi = float(hi)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def support(self) -> SupportBounds:
        return SupportBounds(self.lo, self.hi)

    def to_descriptor(self) -> dict:
        return {"family": "uniform", "lo": self.lo, "hi": self.hi}

    def _cdf(self, x):
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def _quantile_left(self, p):
        return self.lo + p * (self.hi - self.lo)

    _quantile_right = _quantile_left


class Degenerate(Marginal):
    family = "degenerate"

    def __init__(self, point: float):
        if not math.isfinite(point):
            raise ValueError("Degenerate requires a finite point")
        self.point = float(point)

    def mean(self) -> float:
        return self.point

    def support(self) -> SupportBounds:
        return SupportBounds(self.point, self.point)

    def to_descriptor(self) -> dict:
        return {"family": "degenerate", "point": self.point}

    def _cdf(self, x):
        return np.where(x >= self.point, 1.0, 0.0)

    def _quantile_left(self, p):
        return np.full_like(np.asarray(p, dtype=float), self.point)

    _quantile_right = _quantile_left


class EmpiricalDiscrete(Marginal):
    """Finite discrete distribution on sorted distinct points."""

    family = "empirical"

    def __init__(self, points, probs):
        pts = np.asarray(points, dtype=float)
        pr = np.asarray(probs, dtype=float)
        if pts.ndim != 1 or pts.shape != pr.shape or pts.size == 0:
            raise ValueError("points and probs must be equal-length 1-d sequences")
        if np.any(np.diff(pts) <= 0.0):
            raise ValueError("points must be sorted and distinct")
        if np.any(pr <= 0.0):
            raise ValueError("probabilities must be positive")
        if abs(float(pr.sum()) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {pr.sum()!r}, not 1")
        pr = pr / pr.sum()
        self.points = pts
        self.probs = pr
        self._cum = np.cumsum(pr)
        self._cum[-1] = 1.0

    def mean(self) -> float:
        return float(self.points @ self.probs)

    def support(self) -> SupportBounds:
        return SupportBounds(float(self.points[0]), float(self.points[-1]))

    def to_descriptor(self) -> dict:
        return {
            "family": "empirical",
            "points": [float(v) for v in self.points],
            "probs": [float(v) for v in self.probs],
        }

    def _cdf(self, x):
        idx = np.searchsorted(self.points, x, side="right")
        cum = np.concatenate(([0.0], self._cum))
        return cum[idx]

    def _quantile_left(self, p):
        idx = np.minimum(np.searchsorted(self._cum, p, side="left"), self.points.size - 1)
        return self.points[idx]

    def _quantile_right(self, p):
        idx = np.minimum(np.searchsorted(self._cum, p, side="right"), self.points.size - 1)
        return self.points[idx]

    def _atoms(self, plo, phi, cap):
        interior = self._cum[:-1]
        vals = interior[(interior > plo) & (interior < phi)]
        if vals.size > cap:
            raise CapExceeded(f"empirical atom count {vals.size} exceeds cap {cap}")
        return [float(v) for v in vals]


_FAMILIES = {
    "gamma": lambda d: Gamma(d["shape"], d["scale"]),
    "poisson": lambda d: Poisson(d["rate"]),
    "normal": lambda d: Normal(d["mean"], d["sd"]),
    "uniform": lambda d: Uniform(d["lo"], d["hi"]),
    "degenerate": lambda d: Degenerate(d["point"]),
    "empirical": lambda d: EmpiricalDiscrete(d["points"], d["probs"]),
}


def from_descriptor(desc: dict) -> Marginal:
    """Build a marginal from its JSON descriptor, e.g. {"family": "gamma", ...}."""
    try:
        family = desc["family"]
    except (TypeError, KeyError):
        raise ValueError(f"descriptor lacks a 'family' key: {desc!r}") from None
    try:
        builder = _FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}") from None
    try:
        return builder(desc)
    except KeyError as exc:
        raise ValueError(f"descriptor for {family!r} missing field {exc}") from None
