"""Additive Lee channels and decoder-facing likelihoods.

Two error models over Z/qZ:

* constant weight: the error vector is uniform on the Lee sphere of
  radius t.  Sampling is exact (sequential conditional draws from the
  big-integer sphere tables), not rejection based.
* memoryless: i.i.d. symbols from the Boltzmann law with mean Lee
  weight delta.

Decoders run on per-symbol likelihoods in both cases.  The constant
weight channel is not memoryless, so there the Boltzmann marginal at
delta = t/n is used as a per-symbol stand-in; that is an approximation
(good for large n, where the sphere's marginal converges to it).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ring import ring, sphere_size, sphere_table, solve_boltzmann

__all__ = [
    "Channel",
    "constant_weight_channel",
    "memoryless_channel",
    "trial_stream",
    "sample_constant_weight",
    "sample_memoryless",
    "apply_error",
    "likelihood_vec",
    "likelihood_matrix",
    "error_to_str",
    "error_from_str",
]


def trial_stream(master_seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one Monte Carlo trial.

    Keyed by (master seed, trial index), so trial i produces the same
    draws no matter which worker runs it or in what order.
    """
    key = np.array([master_seed, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrary-precision bounds."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound <= 1 << 62:
        return int(rng.integers(0, bound))
    k = bound.bit_length()
    words = (k + 63) // 64
    while True:
        draw = 0
        for w in rng.integers(0, 1 << 64, size=words, dtype=np.uint64):
            draw = (draw << 64) | int(w)
        draw &= (1 << k) - 1
        if draw < bound:
            return draw


def sample_constant_weight(n: int, t: int, q: int, rng: np.random.Generator) -> np.ndarray:
    """Exactly uniform draw from the Lee sphere of radius t in (Z/qZ)^n.

    Symbol i is drawn from its conditional law given the weight still to
    be placed: P(a | w left, m symbols left) = |S^{m-1}_{w - w_L(a)}| / |S^m_w|.
    The chain rule then makes the full vector exactly uniform.
    """
    if sphere_size(n, t, q) == 0:
        raise ValueError(f"empty sphere: n={n}, t={t}, q={q}")
    rs = ring(q)
    table = sphere_table(n, t, q)
    weights = rs.weights
    out = np.zeros(n, dtype=np.int64)
    w = t
    for i in range(n):
        m = n - i
        r = _randbelow(rng, table[m][w])
        for a in range(q):
            wa = int(weights[a])
            if wa > w:
                continue
            c = table[m - 1][w - wa]
            if r < c:
                out[i] = a
                w -= wa
                break
            r -= c
        else:  # pragma: no cover - chain rule guarantees a hit
            raise AssertionError("conditional mass did not cover the draw")
    assert w == 0
    return out


def sample_memoryless(n: int, delta: float, q: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. error symbols from the mean-delta Boltzmann law."""
    dist = solve_boltzmann(delta, q).dist
    return rng.choice(q, size=n, p=dist).astype(np.int64)


def apply_error(x, e, q: int) -> np.ndarray:
    x = np.asarray(x)
    e = np.asarray(e)
    if x.shape != e.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {e.shape}")
    return (x + e) % q


def likelihood_vec(y_symbol: int, q: int, delta: float) -> np.ndarray:
    """Posterior-shaped channel vector: entry x holds B_delta(y - x)."""
    dist = solve_boltzmann(delta, q).dist
    return dist[(y_symbol - np.arange(q)) % q]


def likelihood_matrix(y, q: int, delta: float) -> np.ndarray:
    """Row v holds likelihood_vec(y[v]); shape (n, q)."""
    y = np.asarray(y)
    dist = solve_boltzmann(delta, q).dist
    return dist[(y[:, None] - np.arange(q)[None, :]) % q]


@dataclass(frozen=True)
class Channel:
    """One channel instance: kind is 'constant_weight' or 'memoryless'."""
    kind: str
    q: int
    n: int
    t: int = 0          # constant-weight radius
    delta: float = 0.0  # memoryless mean weight

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "constant_weight":
            return sample_constant_weight(self.n, self.t, self.q, rng)
        return sample_memoryless(self.n, self.delta, self.q, rng)

    @property
    def decoding_delta(self) -> float:
        # the per-symbol law handed to decoders (marginal for constant weight)
        if self.kind == "constant_weight":
            return self.t / self.n
        return self.delta

    def likelihoods(self, y) -> np.ndarray:
        return likelihood_matrix(y, self.q, self.decoding_delta)


def constant_weight_channel(n: int, t: int, q: int) -> Channel:
    if not 0 <= t <= n * (q // 2):
        raise ValueError(f"radius t={t} outside [0, {n * (q // 2)}]")
    return Channel("constant_weight", q=q, n=n, t=t)


def memoryless_channel(n: int, delta: float, q: int) -> Channel:
    if not 0.0 < delta < q // 2:
        raise ValueError(f"delta={delta} outside (0, {q // 2})")
    return Channel("memoryless", q=q, n=n, delta=delta)


def error_to_str(e) -> str:
    return ",".join(str(int(a)) for a in np.asarray(e).ravel())


def error_from_str(s: str) -> np.ndarray:
    return np.array([int(tok) for tok in s.split(",")], dtype=np.int64)
