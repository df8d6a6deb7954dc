"""Finite-length error probability bounds for the two Lee channel models.

Achievability side: random coding union bounds for the constant-weight
channel (list/ML and minimum-distance rules) and for the memoryless
channel, each in two flavors, the finite-n form built from the exact
sphere or ball spectrum and a loosened form that swaps the spectrum for
its asymptotic entropy rate.  Converse side: a sphere-packing lower
bound on the memoryless channel.  On top of that sits the weight
enumerator union bound, driven by exact per-symbol decision statistics
(lattice convolutions, no sampling).

Every bound value travels in log2 domain; probabilities this small
overflow doubles long before n reaches interesting sizes.  Counts are
float log2 throughout, which the exact big-integer tables in ring
validate at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ring import (
    NEG_INF,
    LogCount,
    ball_size,
    entropy_rate_H,
    entropy_rate_H_plus,
    expected_lee_weight,
    log2_ball_sizes,
    log2_sphere_sizes,
    ring,
    solve_boltzmann,
    sphere_sizes,
)

__all__ = [
    "BoundCurve",
    "LambdaDist",
    "evaluate_curve",
    "lambda_dist",
    "lee_weight_law",
    "pep",
    "pep_worstcase",
    "rcu_constant_md",
    "rcu_constant_ml",
    "rcu_memoryless",
    "sphere_packing",
    "union_bound",
    "union_bound_exact",
]

LOG2E = math.log2(math.e)


def _logsumexp2(terms) -> float:
    terms = np.asarray(terms, dtype=float)
    terms = terms[terms > NEG_INF]
    if terms.size == 0:
        return NEG_INF
    m = float(terms.max())
    return m + math.log2(float(np.exp2(terms - m).sum()))


def _logsub2(a: float, b: float) -> float:
    """log2(2^a - 2^b) for a >= b; collapses to -inf when they cancel."""
    if b == NEG_INF:
        return a
    rest = -math.expm1((b - a) * math.log(2.0))  # 1 - 2^(b-a), accurate near 0
    if rest <= 0.0:
        return NEG_INF
    return a + math.log2(rest)


def _clamp_pos(x: float) -> float:
    # the [.]^+ bracket of the exponent
    return x if x > 0.0 else 0.0


def _integral_weight(n: int, delta: float, q: int) -> int:
    t = delta * n
    t_int = int(round(t))
    if abs(t - t_int) > 1e-9:
        raise ValueError(f"delta*n = {t!r} is not an integer Lee weight")
    if not 0 <= t_int <= n * (q // 2):
        raise ValueError(f"weight {t_int} outside [0, {n * (q // 2)}]")
    return t_int


def _require_subuniform(delta: float, q: int) -> None:
    # beta > 0 is what lets the likelihood ratio order outputs by weight
    # difference; past the uniform mean weight the order flips.
    if not 0.0 < delta < expected_lee_weight(q):
        raise ValueError(
            f"delta={delta} must lie in (0, {expected_lee_weight(q)}) for q={q}"
        )


# ---------------------------------------------------------------------------
# Random coding union bounds, constant Lee weight channel
# ---------------------------------------------------------------------------

def rcu_constant_ml(n: int, R2: float, delta: float, q: int, form: str = "exact") -> float:
    """log2 random-coding bound on ML block error, constant-weight channel.

    form="exact" evaluates the finite-n sphere spectrum at weight delta*n
    (which must be integral); form="entropy" loosens the spectrum to its
    asymptotic entropy rate and accepts any delta in [0, q//2].  The
    loosened form is never below the exact one.
    """
    if form == "exact":
        t = _integral_weight(n, delta, q)
        sigma = float(log2_sphere_sizes(n, q)[t]) / n
    elif form == "entropy":
        sigma = entropy_rate_H(float(delta), q)
    else:
        raise ValueError(f"unknown form {form!r}, expected 'exact' or 'entropy'")
    return -n * _clamp_pos(math.log2(q) - sigma - R2)


def rcu_constant_md(n: int, R2: float, delta: float, q: int, form: str = "exact") -> float:
    """Same as rcu_constant_ml but for the minimum-distance rule.

    The decoder may pick any word within radius delta*n, so the ball
    spectrum replaces the sphere spectrum; the loosened form clamps at
    log2 q once delta passes the uniform mean weight.
    """
    if form == "exact":
        t = _integral_weight(n, delta, q)
        nu = float(log2_ball_sizes(n, q)[t]) / n
    elif form == "entropy":
        nu = entropy_rate_H_plus(float(delta), q)
    else:
        raise ValueError(f"unknown form {form!r}, expected 'exact' or 'entropy'")
    return -n * _clamp_pos(math.log2(q) - nu - R2)


# ---------------------------------------------------------------------------
# Memoryless channel: random coding union bound and sphere packing
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def lee_weight_law(n: int, delta: float, q: int) -> np.ndarray:
    """Exact pmf of the total Lee weight of n iid mean-delta Boltzmann symbols.

    Plain n-fold convolution of the per-symbol weight pmf; the first
    moment survives the float DP to ~1e-12 relative, which downstream
    sanity checks rely on.
    """
    bp = solve_boltzmann(delta, q)
    rs = ring(q)
    per_symbol = np.bincount(rs.weights, weights=bp.dist, minlength=rs.rmax + 1)
    law = np.ones(1)
    for _ in range(n):
        law = np.convolve(law, per_symbol)
    law.flags.writeable = False
    return law


@lru_cache(maxsize=8)
def _entropy_plus_grid(n: int, q: int) -> np.ndarray:
    # clamped entropy rate at every realizable normalized weight t/n
    tmax = n * (q // 2)
    vals = np.empty(tmax + 1)
    for t in range(tmax + 1):
        vals[t] = entropy_rate_H_plus(t / n, q)
    vals.flags.writeable = False
    return vals


def _rcu_from_weight_law(law: np.ndarray, n: int, R2: float, q: int, form: str) -> float:
    if form == "exact":
        nu = np.asarray(log2_ball_sizes(n, q)) / n
    elif form == "entropy":
        nu = _entropy_plus_grid(n, q)
    else:
        raise ValueError(f"unknown form {form!r}, expected 'exact' or 'entropy'")
    gaps = math.log2(q) - nu[: len(law)] - R2
    exponents = -n * np.clip(gaps, 0.0, None)
    mask = law > 0.0
    total = _logsumexp2(np.log2(law[mask]) + exponents[mask])
    return min(total, 0.0)


def rcu_memoryless(n: int, R2: float, delta: float, q: int, form: str = "exact") -> float:
    """log2 random-coding bound on ML/MD block error, memoryless channel.

    Averages the constant-weight ball-spectrum bound over the exact law
    of the error weight (lee_weight_law).  form="entropy" replaces the
    finite-n ball spectrum with the clamped entropy rate at each
    realized normalized weight.
    """
    _require_subuniform(delta, q)
    return _rcu_from_weight_law(lee_weight_law(n, float(delta), q), n, R2, q, form)


def _exact_d0(n: int, q: int, R2: float, target_log2: float, d0_float: int) -> int:
    """Resolve a near-tie d0 decision with exact integers when possible.

    Only output budgets of the clean forms q^m or 2^m admit an exact
    comparison; anything else keeps the float (conservative, larger-d0)
    choice.  Small-n only: the exact count table has a size budget.
    """
    log2q = math.log2(q)
    m_q = n * (log2q - R2) / log2q
    target_int = None
    if abs(m_q - round(m_q)) < 1e-9:
        target_int = q ** int(round(m_q))
    elif abs(target_log2 - round(target_log2)) < 1e-9:
        target_int = 2 ** int(round(target_log2))
    if target_int is None:
        return d0_float
    try:
        sizes = sphere_sizes(n, q)
    except ValueError:
        return d0_float
    acc = 0
    for d, s in enumerate(sizes):
        acc += s
        if acc >= target_int:
            return d
    return len(sizes) - 1


def sphere_packing(n: int, R2: float, delta: float, q: int) -> float:
    """log2 sphere-packing lower bound on block error, memoryless channel.

    Fills decision regions greedily with the most likely outputs: whole
    spheres up to radius d0 - 1 plus a fraction xi of the radius-d0
    sphere exhaust the per-codeword output budget 2^{n(log2 q - R2)};
    everything further out is error mass.  Rates at or above log2 q have
    no packing constraint and report bound 0 (-inf in log2).
    """
    log2q = math.log2(q)
    if R2 < 0.0:
        raise ValueError("R2 must be nonnegative")
    if R2 >= log2q:
        return NEG_INF
    _require_subuniform(delta, q)
    bp = solve_boltzmann(delta, q)
    rmax = q // 2
    target = n * (log2q - R2)  # log2 of the output budget per codeword
    cum = np.asarray(log2_ball_sizes(n, q))
    # float noise in the cumulative table can push the budget past the whole
    # space at R2 ~ 0; the last sphere is then the boundary
    d0 = min(int(np.searchsorted(cum, target, side="left")), n * rmax)
    near = abs(cum[d0] - target) < 1e-9 or (d0 > 0 and abs(cum[d0 - 1] - target) < 1e-9)
    if near:
        d0 = _exact_d0(n, q, R2, target, d0)
    log2_xi = target if d0 == 0 else _logsub2(target, float(cum[d0 - 1]))

    spheres = np.asarray(log2_sphere_sizes(n, q))
    weight_cost = bp.beta * LOG2E  # log2 e^{-beta d} = -d * beta * log2(e)
    lz = n * bp.log2_normalizer
    tail = spheres[d0 + 1 :] - weight_cost * np.arange(d0 + 1, n * rmax + 1) - lz
    terms = list(tail)
    partial = _logsub2(float(spheres[d0]), log2_xi)  # |S_{d0}| - xi, may cancel
    if partial > NEG_INF:
        terms.append(partial - weight_cost * d0 - lz)
    return min(_logsumexp2(terms), 0.0)


# ---------------------------------------------------------------------------
# Per-symbol decision statistic S = w(y - c) - w(y) and pairwise errors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaDist:
    """Law of S = w_L(y - c) - w_L(y) for y Boltzmann, c of Lee weight ell.

    The log-likelihood ratio of the true word against the competitor is
    beta * S per symbol, so decision events only care about the sign of
    accumulated S.  The channel's symbol symmetry makes the law depend
    on c only through its Lee weight class.
    """

    q: int
    ell: int
    delta: float
    beta: float
    support: np.ndarray  # integers -q//2 .. q//2
    pmf: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.support @ self.pmf)


def lambda_dist(ell: int, delta: float, q: int) -> LambdaDist:
    rs = ring(q)
    if not 1 <= ell <= rs.rmax:
        raise ValueError(f"ell={ell} outside 1..{rs.rmax}")
    bp = solve_boltzmann(delta, q)
    y = np.arange(q)
    s = rs.weights[(y - ell) % q] - rs.weights[y]
    pmf = np.zeros(2 * rs.rmax + 1)
    np.add.at(pmf, s + rs.rmax, bp.dist)
    support = np.arange(-rs.rmax, rs.rmax + 1)
    pmf.flags.writeable = False
    support.flags.writeable = False
    return LambdaDist(q, ell, float(delta), bp.beta, support, pmf)


def _class_pmf(ell: int, delta: float, q: int):
    # trimmed pmf plus the lattice offset of its first entry
    ld = lambda_dist(ell, delta, q)
    nz = np.flatnonzero(ld.pmf)
    return ld.pmf[nz[0] : nz[-1] + 1].copy(), int(ld.support[nz[0]])


def _convolve_power(pmf: np.ndarray, lo: int, m: int):
    """m-fold self-convolution of a lattice pmf by binary exponentiation."""
    out, out_lo = np.ones(1), 0
    base, base_lo = pmf, lo
    while m:
        if m & 1:
            out = np.convolve(out, base)
            out_lo += base_lo
        m >>= 1
        if m:
            base = np.convolve(base, base)
            base_lo *= 2
    return out, out_lo


def _prob_nonpositive(pmf: np.ndarray, lo: int, strict: bool) -> float:
    hi = -lo + (0 if strict else 1)  # entries s < 0, or s <= 0
    if hi <= 0:
        return 0.0
    return float(pmf[:hi].sum())


def pep(theta, n: int, delta: float, q: int, strict: bool = False) -> float:
    """Pairwise error probability against a competitor of Lee type theta.

    theta is the per-weight-class fraction vector (length q//2 + 1,
    summing to 1, with n*theta integral).  The decision statistic is the
    lattice sum of independent per-class draws; its law is convolved
    exactly and the mass at or below zero returned.  Ties count as
    errors unless strict=True.
    """
    rs = ring(q)
    _require_subuniform(delta, q)
    th = np.asarray(getattr(theta, "theta", theta), dtype=float)
    if th.shape != (rs.rmax + 1,):
        raise ValueError(f"type vector must have length {rs.rmax + 1}")
    if np.any(th < 0) or abs(float(th.sum()) - 1.0) > 1e-9:
        raise ValueError("type fractions must be nonnegative and sum to 1")
    counts = th * n
    m = np.rint(counts).astype(np.int64)
    if float(np.max(np.abs(counts - m))) > 1e-6:
        raise ValueError(f"type does not embed in length n={n}")
    if int(m[1:].sum()) == 0:
        return 0.0  # competitor is the transmitted word itself
    acc, lo = np.ones(1), 0
    for ell in range(1, rs.rmax + 1):
        if m[ell]:
            cls, cls_lo = _class_pmf(ell, delta, q)
            powed, powed_lo = _convolve_power(cls, cls_lo, int(m[ell]))
            acc = np.convolve(acc, powed)
            lo += powed_lo
    return _prob_nonpositive(acc, lo, strict)


def pep_worstcase(t: int, n: int, delta: float, q: int, strict: bool = False) -> float:
    """Dominant pairwise error probability among weight-t competitors.

    The all-unit-weight type maximizes the PEP at fixed total weight, so
    min(t, n) copies of the weight-1 statistic give an upper bound that
    only needs the total weight, not the full type.
    """
    if t < 0 or t > n * (q // 2):
        raise ValueError(f"t={t} outside 0..{n * (q // 2)}")
    if t == 0:
        return 0.0
    _require_subuniform(delta, q)
    cls, cls_lo = _class_pmf(1, delta, q)
    pmf, lo = _convolve_power(cls, cls_lo, min(int(t), n))
    return _prob_nonpositive(pmf, lo, strict)


def _log2_count(v) -> float:
    if isinstance(v, LogCount):
        return v.log2
    if isinstance(v, (int, np.integer)):
        if v < 0:
            raise ValueError("weight enumerator entries are nonnegative")
        return NEG_INF if v == 0 else LogCount.from_int(int(v)).log2
    f = float(v)
    if f < 0.0:
        raise ValueError("weight enumerator entries are nonnegative")
    return NEG_INF if f == 0.0 else math.log2(f)


def union_bound_exact(type_enumerator, n: int, delta: float, q: int, strict: bool = False) -> float:
    """log2 union bound from exact per-type pairwise error probabilities.

    type_enumerator yields (theta, multiplicity) pairs covering the
    nonzero codewords (multiplicities may be ints, floats or LogCount).
    Slower than the weight-enumerator route but free of the worst-case
    slack, which matters for short codes whose weights mostly exceed n:
    there the min(t, n) cap stops the worst-case terms from decaying.
    """
    _require_subuniform(delta, q)
    terms = []
    for theta, mult in type_enumerator:
        logm = _log2_count(mult)
        if logm == NEG_INF:
            continue
        p = pep(theta, n, delta, q, strict=strict)
        if p > 0.0:
            terms.append(logm + math.log2(p))
    return min(_logsumexp2(terms), 0.0)


def union_bound(weight_enumerator, n: int, delta: float, q: int, strict: bool = False) -> float:
    """log2 union bound on ML block error from a Lee weight enumerator.

    weight_enumerator is indexed by Lee weight; the weight-0 entry (the
    transmitted word) is excluded.  Entries may be plain counts or
    LogCount values, so ensemble averages plug in directly.  Each weight
    class is charged its dominant pairwise error probability; the total
    is clamped at 1.
    """
    _require_subuniform(delta, q)
    logw = [_log2_count(v) for v in weight_enumerator]
    if not logw:
        return NEG_INF
    cap = min(n, len(logw) - 1)
    if cap >= 1:
        # one shared convolution ladder covers every weight class
        cls, cls_lo = _class_pmf(1, delta, q)
        prob_leq = np.empty(cap + 1)
        prob_leq[0] = 0.0
        acc, lo = np.ones(1), 0
        for k in range(1, cap + 1):
            acc = np.convolve(acc, cls)
            lo += cls_lo
            prob_leq[k] = _prob_nonpositive(acc, lo, strict)
    terms = []
    for ell in range(1, len(logw)):
        if logw[ell] == NEG_INF:
            continue
        p = prob_leq[min(ell, n)]
        if p > 0.0:
            terms.append(logw[ell] + math.log2(p))
    return min(_logsumexp2(terms), 0.0)


# ---------------------------------------------------------------------------
# Curve plumbing: named bound families over a delta grid, CSV out
# ---------------------------------------------------------------------------

@dataclass
class BoundCurve:
    """Evaluated bound values over a delta grid, tagged by bound kind."""

    channel: str  # "constant" or "memoryless"
    q: int
    n: int
    R2: float
    points: list  # of (delta, log2_value, kind)

    def __post_init__(self):
        last_delta = {}
        for d, v, kind in self.points:
            if v > 1e-12:
                raise ValueError(f"bound 2^{v} exceeds 1 at delta={d}")
            if kind in last_delta and d <= last_delta[kind]:
                raise ValueError(f"delta grid must increase within kind {kind!r}")
            last_delta[kind] = d

    def kinds(self):
        seen = []
        for _, _, kind in self.points:
            if kind not in seen:
                seen.append(kind)
        return seen

    def values(self, kind: str):
        pts = [(d, v) for d, v, k in self.points if k == kind]
        return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("delta,log2_value,kind\n")
            for d, v, kind in self.points:
                fh.write(f"{d!r},{v!r},{kind}\n")


_CONSTANT_KINDS = {
    "rcu-ml-exact": lambda n, R2, d, q: rcu_constant_ml(n, R2, d, q, form="exact"),
    "rcu-ml-entropy": lambda n, R2, d, q: rcu_constant_ml(n, R2, d, q, form="entropy"),
    "rcu-md-exact": lambda n, R2, d, q: rcu_constant_md(n, R2, d, q, form="exact"),
    "rcu-md-entropy": lambda n, R2, d, q: rcu_constant_md(n, R2, d, q, form="entropy"),
}

_MEMORYLESS_KINDS = {
    "rcu-exact": lambda n, R2, d, q: rcu_memoryless(n, R2, d, q, form="exact"),
    "rcu-entropy": lambda n, R2, d, q: rcu_memoryless(n, R2, d, q, form="entropy"),
    "sphere-packing": sphere_packing,
}


def evaluate_curve(channel: str, q: int, n: int, R2: float, deltas, kinds=None) -> BoundCurve:
    """Evaluate named bound kinds over a delta grid, kind-major row order.

    Constant-channel kinds: rcu-ml-exact, rcu-ml-entropy, rcu-md-exact,
    rcu-md-entropy (exact kinds need integral delta*n).  Memoryless
    kinds: rcu-exact, rcu-entropy, sphere-packing.
    """
    if channel == "constant":
        table = _CONSTANT_KINDS
    elif channel == "memoryless":
        table = _MEMORYLESS_KINDS
    else:
        raise ValueError(f"unknown channel {channel!r}")
    if kinds is None:
        kinds = list(table)
    points = []
    for kind in kinds:
        if kind not in table:
            raise ValueError(f"unknown kind {kind!r} for {channel}; have {sorted(table)}")
        fn = table[kind]
        for d in deltas:
            points.append((float(d), fn(n, R2, float(d), q), kind))
    return BoundCurve(channel, q, n, R2, points)
