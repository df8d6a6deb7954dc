"""Core quantities of the Lee metric on the integer residue ring Z/qZ.

Everything downstream (channels, decoders, bounds, spectra) builds on the
objects here: the ring description, Lee weights, the max-entropy symbol
distribution with a prescribed mean Lee weight, sphere/ball counting, and
the base-2 information measures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "RingSpec",
    "ring",
    "lee_weight",
    "vector_lee_weight",
    "expected_lee_weight",
    "expected_lee_weight_exact",
    "BoltzmannParams",
    "solve_boltzmann",
    "validate_prob_vec",
    "entropy",
    "kl_divergence",
    "tv_distance",
    "LogCount",
    "sphere_size",
    "ball_size",
    "sphere_sizes",
    "log2_sphere_sizes",
    "log2_ball_sizes",
    "sphere_table",
    "surface_spectrum",
    "volume_spectrum",
    "entropy_rate_H",
    "entropy_rate_H_plus",
]

NEG_INF = float("-inf")


class RingSpec:
    """Precomputed structure of Z/qZ: weights, units, multiplicative orbits.

    Orbits are the sets a*U for the unit group U; they are indexed by the
    divisors d of q via orbit_of(a) = gcd(a, q), with 0 sitting in the
    orbit of the divisor q itself.
    """

    def __init__(self, q: int):
        if q < 2:
            raise ValueError("q must be >= 2")
        self.q = q
        self.rmax = q // 2  # largest Lee weight of a single symbol
        a = np.arange(q)
        self.weights = np.minimum(a, q - a)
        self.weights[0] = 0
        self.neg = (-a) % q
        self.units = np.array([u for u in range(1, q) if math.gcd(u, q) == 1])
        self.unit_density = len(self.units) / q
        inv = np.zeros(q, dtype=np.int64)
        for u in self.units:
            inv[u] = pow(int(u), -1, q)
        self.inv = inv  # 0 for non-units
        self.divisors = [d for d in range(1, q + 1) if q % d == 0]
        self.orbit_of = np.array([math.gcd(x, q) if x else q for x in range(q)])
        self.orbit_sizes = {d: _euler_phi(q // d) for d in self.divisors}
        self.orbit_members = {
            d: np.flatnonzero(self.orbit_of == d) for d in self.divisors
        }
        # multiplicity of each Lee weight value among ring elements
        mult = np.zeros(self.rmax + 1, dtype=np.int64)
        for x in range(q):
            mult[self.weights[x]] += 1
        self.weight_multiplicity = mult

    def __repr__(self):
        return f"RingSpec(q={self.q})"

    def __eq__(self, other):
        return isinstance(other, RingSpec) and other.q == self.q

    def __hash__(self):
        return hash(("RingSpec", self.q))


@lru_cache(maxsize=None)
def ring(q: int) -> RingSpec:
    return RingSpec(q)


def _euler_phi(n: int) -> int:
    if n == 1:
        return 1
    out, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            while m % p == 0:
                m //= p
            out -= out // p
        p += 1
    if m > 1:
        out -= out // m
    return out


def lee_weight(a: int, q: int) -> int:
    a %= q
    return min(a, q - a)


def vector_lee_weight(x, q: int) -> int:
    x = np.asarray(x) % q
    return int(np.minimum(x, q - x).sum())


def expected_lee_weight(q: int) -> float:
    """Mean Lee weight of a uniform symbol: (q^2-1)/(4q) for odd q, q/4 for even."""
    return float(expected_lee_weight_exact(q))


def expected_lee_weight_exact(q: int) -> Fraction:
    if q % 2:
        return Fraction(q * q - 1, 4 * q)
    return Fraction(q, 4)


# ---------------------------------------------------------------------------
# Boltzmann symbol distribution:  P(a) = exp(-beta * w_L(a)) / Z(beta)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoltzmannParams:
    q: int
    delta: float
    beta: float
    dist: np.ndarray        # length q, indexed by ring element
    log_dist: np.ndarray    # natural log of dist

    @property
    def log2_normalizer(self) -> float:
        # log2 Z(beta), recovered from P(0) = 1/Z
        return -self.log_dist[0] / math.log(2.0)


def _boltzmann_dist(q: int, beta: float):
    w = ring(q).weights.astype(float)
    logits = -beta * w
    logits -= logits.max()  # beta may be negative; keep exp() in range
    p = np.exp(logits)
    p /= p.sum()
    return p, np.log(p)


def _mean_weight(q: int, beta: float) -> float:
    p, _ = _boltzmann_dist(q, beta)
    return float(p @ ring(q).weights)


def solve_boltzmann(delta: float, q: int, tol: float = 1e-12) -> BoltzmannParams:
    """Solve for the exponent beta giving mean Lee weight delta.

    The mean weight is strictly decreasing in beta, so plain bisection on
    [-50, 50] is enough; that bracket covers every delta of practical
    interest strictly inside (0, q//2).  delta == expected_lee_weight(q)
    short-circuits to beta = 0 (the uniform distribution), which is also
    the only place beta changes sign.
    """
    rs = ring(q)
    if not (0.0 < delta < rs.rmax):
        raise ValueError(f"delta must lie in (0, {rs.rmax}) for q={q}")
    if delta == expected_lee_weight(q):
        p, logp = _boltzmann_dist(q, 0.0)
        return BoltzmannParams(q, delta, 0.0, p, logp)
    lo, hi = -50.0, 50.0  # mean weight: decreasing, f(lo) ~ rmax, f(hi) ~ 0
    if not (_mean_weight(q, hi) <= delta <= _mean_weight(q, lo)):
        raise ValueError(f"delta={delta} unreachable within the solver bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = _mean_weight(q, mid)
        if abs(f - delta) <= tol:
            lo = hi = mid
            break
        if f > delta:
            lo = mid
        else:
            hi = mid
    beta = 0.5 * (lo + hi)
    p, logp = _boltzmann_dist(q, beta)
    return BoltzmannParams(q, delta, beta, p, logp)


# ---------------------------------------------------------------------------
# Information measures, base 2 throughout
# ---------------------------------------------------------------------------

def validate_prob_vec(p, tol: float = 1e-12) -> np.ndarray:
    """Check a length-q probability vector: nonnegative, sums to 1 within tol."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("probability vector must be 1-D")
    if np.any(p < 0):
        raise ValueError("negative probability entry")
    if abs(float(p.sum()) - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    return p


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    mask = p > 0
    return float(-(p[mask] @ np.log2(p[mask])))


def kl_divergence(p, r) -> float:
    """D(p || r) in bits; +inf when p puts mass where r has none."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    mask = p > 0
    if np.any(r[mask] == 0):
        return float("inf")
    return float(p[mask] @ (np.log2(p[mask]) - np.log2(r[mask])))


def tv_distance(p, r) -> float:
    p = np.asarray(p, dtype=float)
    r = np.asarray(r, dtype=float)
    return 0.5 * float(np.abs(p - r).sum())


# ---------------------------------------------------------------------------
# Exact and log-domain counting of Lee spheres and balls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogCount:
    """A nonnegative count carried as log2.  Zero is log2 = -inf.

    Exact integer counting stays authoritative for small tables; this is
    the representation once spheres get astronomically large (n ~ 1000).
    """
    log2: float

    @classmethod
    def from_int(cls, v: int) -> "LogCount":
        if v < 0:
            raise ValueError("counts are nonnegative")
        if v == 0:
            return cls(NEG_INF)
        # exact-ish log2 of a big integer via frexp on the top bits
        k = v.bit_length() - 53
        if k <= 0:
            return cls(math.log2(v))
        return cls(math.log2(v >> k) + k)

    def __add__(self, other: "LogCount") -> "LogCount":
        return LogCount(float(np.logaddexp2(self.log2, other.log2)))

    def __mul__(self, other: "LogCount") -> "LogCount":
        return LogCount(self.log2 + other.log2)

    def __float__(self) -> float:
        return 2.0 ** self.log2

    @property
    def is_zero(self) -> bool:
        return self.log2 == NEG_INF


# Upper bound on exact big-integer DP size before switching to log domain.
EXACT_CELL_BUDGET = 10**6


def _weight_poly(q: int):
    # per-symbol generating coefficients: mult[w] symbols of Lee weight w
    return ring(q).weight_multiplicity


@lru_cache(maxsize=None)
def sphere_sizes(n: int, q: int) -> tuple:
    """Exact |S_{t,q}| for all t = 0..n*(q//2), as a tuple of ints."""
    mult = _weight_poly(q)
    tmax = n * (q // 2)
    if (n + 1) * (tmax + 1) > 10 * EXACT_CELL_BUDGET:
        raise ValueError("table too large; use log2_sphere_sizes")
    row = [0] * (tmax + 1)
    row[0] = 1
    for _ in range(n):
        new = [0] * (tmax + 1)
        for t in range(tmax + 1):
            c = row[t]
            if c:
                for w, mw in enumerate(mult):
                    if t + w > tmax:
                        break
                    new[t + w] += c * int(mw)
        row = new
    return tuple(row)


def sphere_size(n: int, t: int, q: int) -> int:
    """Number of vectors in (Z/qZ)^n of Lee weight exactly t."""
    if t < 0 or t > n * (q // 2):
        return 0
    return sphere_sizes(n, q)[t]


def ball_size(n: int, t: int, q: int) -> int:
    t = min(t, n * (q // 2))
    if t < 0:
        return 0
    return sum(sphere_sizes(n, q)[: t + 1])


@lru_cache(maxsize=None)
def log2_sphere_sizes(n: int, q: int) -> np.ndarray:
    """log2 |S_{t,q}| over t = 0..n*(q//2); float DP, -inf for empty spheres."""
    mult = _weight_poly(q)
    tmax = n * (q // 2)
    logm = np.where(mult > 0, np.log2(mult.astype(float)), NEG_INF)
    row = np.full(tmax + 1, NEG_INF)
    row[0] = 0.0
    for _ in range(n):
        new = np.full(tmax + 1, NEG_INF)
        for w in range(len(mult)):
            if logm[w] == NEG_INF:
                continue
            shifted = np.full(tmax + 1, NEG_INF)
            shifted[w:] = row[: tmax + 1 - w] + logm[w]
            new = np.logaddexp2(new, shifted)
        row = new
    row.flags.writeable = False
    return row


@lru_cache(maxsize=None)
def log2_ball_sizes(n: int, q: int) -> np.ndarray:
    s = log2_sphere_sizes(n, q)
    out = np.empty_like(s)
    acc = NEG_INF
    for t, v in enumerate(s):
        acc = float(np.logaddexp2(acc, v))
        out[t] = acc
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def sphere_table(n: int, tmax: int, q: int) -> tuple:
    """Rows |S_{t}| for lengths m = 0..n, t = 0..tmax.  Exact integers.

    Feeds the sequential constant-weight sampler, which conditions on the
    remaining weight budget position by position.
    """
    if (n + 1) * (tmax + 1) > 10 * EXACT_CELL_BUDGET:
        raise ValueError("sphere table exceeds the exact-count budget")
    mult = _weight_poly(q)
    rows = [[0] * (tmax + 1) for _ in range(n + 1)]
    rows[0][0] = 1
    for m in range(1, n + 1):
        prev, cur = rows[m - 1], rows[m]
        for t in range(tmax + 1):
            acc = 0
            for w, mw in enumerate(mult):
                if w > t:
                    break
                if mw:
                    acc += prev[t - w] * int(mw)
            cur[t] = acc
    return tuple(tuple(r) for r in rows)


def surface_spectrum(n: int, t: int, q: int) -> float:
    """(1/n) log2 |S_{t,q}|; -inf when the sphere is empty."""
    if t < 0 or t > n * (q // 2):
        return NEG_INF
    if (n + 1) * (n * (q // 2) + 1) <= 10 * EXACT_CELL_BUDGET:
        v = sphere_size(n, t, q)
        return NEG_INF if v == 0 else LogCount.from_int(v).log2 / n
    return float(log2_sphere_sizes(n, q)[t]) / n


def volume_spectrum(n: int, t: int, q: int) -> float:
    """(1/n) log2 |B_{t,q}| for the Lee ball of radius t."""
    if t < 0:
        return NEG_INF
    t = min(t, n * (q // 2))
    if (n + 1) * (n * (q // 2) + 1) <= 10 * EXACT_CELL_BUDGET:
        return LogCount.from_int(ball_size(n, t, q)).log2 / n
    return float(log2_ball_sizes(n, q)[t]) / n


def entropy_rate_H(delta: float, q: int) -> float:
    """Asymptotic surface spectrum: entropy of the mean-delta Boltzmann law.

    Defined on the closed interval [0, q//2]; the endpoints are the
    degenerate limits (all mass on 0, or on the max-weight symbols).
    """
    rs = ring(q)
    if delta == 0.0:
        return 0.0
    if delta == rs.rmax:
        return math.log2(int(rs.weight_multiplicity[rs.rmax]))
    return entropy(solve_boltzmann(delta, q).dist)


def entropy_rate_H_plus(delta: float, q: int) -> float:
    """Asymptotic volume spectrum: clamps at log2 q once delta passes the
    uniform mean weight (balls then swallow a constant fraction of the space)."""
    if delta >= expected_lee_weight(q):
        return math.log2(q)
    return entropy_rate_H(delta, q)
