"""Iterative decoders over Z/qZ: belief propagation, symbol message
passing, and Lee symbol flipping, plus a brute-force MAP oracle.

All three run batched over many received words at once; the single-word
entry points wrap a batch of one.  Check-node arithmetic follows the
sign convention that makes a converged estimate an actual codeword: the
node solves its own parity equation for the target edge, so every
outgoing message carries a factor -h^{-1}.

BP works in the probability domain (circular convolution is the check
primitive).  Exact zero vectors after a Schur product are reset to
uniform and counted in the diagnostics rather than propagated as NaNs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codes import TannerCode
from .ring import ring, validate_prob_vec

__all__ = [
    "DecodeResult",
    "BatchDecodeResult",
    "SmpParams",
    "qsc_log_factor",
    "cn_convolution",
    "bp_decode",
    "bp_decode_batch",
    "smp_decode",
    "smp_decode_batch",
    "lsf_decode",
    "lsf_decode_batch",
    "map_decode_oracle",
]


@dataclass(frozen=True)
class DecodeResult:
    estimate: np.ndarray
    converged: bool
    iterations_used: int
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BatchDecodeResult:
    estimates: np.ndarray      # (B, n)
    converged: np.ndarray      # (B,) bool
    iterations_used: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, b) -> DecodeResult:
        return DecodeResult(
            self.estimates[b],
            bool(self.converged[b]),
            int(self.iterations_used[b]),
            self.diagnostics,
        )


@dataclass(frozen=True)
class SmpParams:
    xi_schedule: tuple
    l_max: int

    def __post_init__(self):
        if self.l_max < 0:
            raise ValueError("l_max must be >= 0")
        if len(self.xi_schedule) < self.l_max:
            raise ValueError("xi schedule shorter than l_max")
        for xi in self.xi_schedule:
            if not 0.0 < xi < 1.0:
                raise ValueError(f"xi={xi} outside (0, 1)")


def qsc_log_factor(xi: float, q: int) -> float:
    """Log-likelihood weight of one agreeing symbol under a qSC(xi)."""
    return math.log((1.0 - xi) * (q - 1) / xi)


# ---------------------------------------------------------------------------
# circular convolution of probability vectors
# ---------------------------------------------------------------------------

def cn_convolution(messages, method: str = "fft") -> np.ndarray:
    """Distribution of the mod-q sum of independent symbols.

    method 'fft' multiplies size-q DFTs; 'direct' is the O(q^2) fold
    kept as the correctness reference.
    """
    msgs = [validate_prob_vec(m) for m in messages]
    q = len(msgs[0])
    if method == "direct":
        out = msgs[0]
        for m in msgs[1:]:
            new = np.zeros(q)
            for s in range(q):
                new[s] = sum(out[a] * m[(s - a) % q] for a in range(q))
            out = new
        return out
    spec = np.ones(q // 2 + 1, dtype=complex)
    for m in msgs:
        spec = spec * np.fft.rfft(m)
    out = np.fft.irfft(spec, n=q)
    out = np.clip(out, 0.0, None)
    return out / out.sum()


# ---------------------------------------------------------------------------
# belief propagation
# ---------------------------------------------------------------------------

def _bp_tables(code: TannerCode):
    """Per-edge permutation gathers, cached on the code object."""
    cache = getattr(code, "_bp_cache", None)
    if cache is not None:
        return cache
    q = code.q
    rs = ring(q)
    h = code.edge_label
    h_inv = rs.inv[h]
    sym = np.arange(q)
    # incoming permutation: distribution of h*x from the message on x
    gather_in = (h_inv[:, None] * sym[None, :]) % q
    # outgoing: message on a reads the sum-distribution at -h*a
    gather_out = (-h[:, None] * sym[None, :]) % q
    cache = (gather_in, gather_out, code.vn_edge_matrix)
    code._bp_cache = cache
    return cache


def _leave_one_out_prod(x: np.ndarray, axis: int) -> np.ndarray:
    """Product over `axis` excluding each position, via prefix/suffix."""
    x = np.moveaxis(x, axis, 0)
    d = x.shape[0]
    pre = np.ones_like(x)
    suf = np.ones_like(x)
    for k in range(1, d):
        pre[k] = pre[k - 1] * x[k - 1]
        suf[d - 1 - k] = suf[d - k] * x[d - k]
    return np.moveaxis(pre * suf, 0, axis)


def _renorm(msg: np.ndarray, counter: dict, key: str) -> np.ndarray:
    """Normalize along the last axis; exact-zero rows become uniform."""
    s = msg.sum(axis=-1, keepdims=True)
    dead = s == 0.0
    if np.any(dead):
        counter[key] = counter.get(key, 0) + int(dead.sum())
        msg = np.where(dead, 1.0, msg)
        s = msg.sum(axis=-1, keepdims=True)
    return msg / s


def _syndrome_ok(code: TannerCode, est: np.ndarray) -> np.ndarray:
    """(B,) bool: True where all checks are satisfied."""
    if code.d_c is not None:
        contrib = code.edge_label * est[:, code.edge_vn]
        s = contrib.reshape(est.shape[0], code.m, code.d_c).sum(axis=2) % code.q
        return ~s.any(axis=1)
    from .codes import syndrome
    return ~syndrome(code, est).any(axis=1)


def bp_decode_batch(
    code: TannerCode,
    likelihoods: np.ndarray,
    l_max: int,
    early_exit: bool = True,
    iteration_hook=None,
) -> BatchDecodeResult:
    """Nonbinary BP over a batch of received words.

    likelihoods: (B, n, q) channel vectors.  One iteration is a check
    pass (permute, convolve all-but-one, permute back) followed by a
    variable pass (Schur products with the channel vector); the running
    decision is the normalized APP argmax, checked against the syndrome
    after every iteration.
    """
    q, n, m = code.q, code.n, code.m
    lik = np.asarray(likelihoods, dtype=float)
    if lik.ndim == 2:
        lik = lik[None]
    B = lik.shape[0]
    diag: dict = {}

    estimates = np.argmax(lik, axis=2).astype(np.int64)
    converged = _syndrome_ok(code, estimates)
    iters = np.zeros(B, dtype=np.int64)
    if l_max == 0 or (early_exit and converged.all()):
        return BatchDecodeResult(estimates, converged, iters, diag)
    if code.d_c is None or code.d_v is None:
        return _bp_generic(code, lik, l_max, early_exit)

    gather_in, gather_out, vn_mat = _bp_tables(code)
    d_c, d_v = code.d_c, code.d_v
    active = (
        np.flatnonzero(~converged) if early_exit else np.arange(B)
    )
    edge_ids = np.arange(code.num_edges)
    msg_vc = lik[active][:, code.edge_vn, :]
    lik_act = lik[active]

    for it in range(1, l_max + 1):
        # check pass
        perm = msg_vc[:, edge_ids[:, None], gather_in]
        spec = np.fft.rfft(perm, axis=-1).reshape(len(active), m, d_c, -1)
        loo = _leave_one_out_prod(spec, axis=2).reshape(len(active), code.num_edges, -1)
        conv = np.fft.irfft(loo, n=q, axis=-1)
        conv = np.clip(conv, 0.0, None)
        msg_cv = conv[:, edge_ids[:, None], gather_out]
        msg_cv = _renorm(msg_cv, diag, "cn_resets")
        # variable pass
        incoming = msg_cv[:, vn_mat, :]                      # (b, n, d_v, q)
        ext = _leave_one_out_prod(incoming, axis=2) * lik_act[:, :, None, :]
        ext = _renorm(ext, diag, "vn_resets")
        msg_vc = np.empty_like(msg_cv)
        msg_vc[:, vn_mat, :] = ext
        # decision
        app = incoming.prod(axis=2) * lik_act
        app = _renorm(app, diag, "app_resets")
        if iteration_hook is not None:
            iteration_hook(it, msg_cv, ext, app)
        est = np.argmax(app, axis=2).astype(np.int64)
        ok = _syndrome_ok(code, est)
        estimates[active] = est
        iters[active] = it
        if early_exit:
            converged[active] = ok
            if ok.any():
                keep = ~ok
                active = active[keep]
                if active.size == 0:
                    break
                msg_vc = msg_vc[keep]
                lik_act = lik_act[keep]
        else:
            converged[active] = ok
    return BatchDecodeResult(estimates, converged, iters, diag)


def _bp_generic(code: TannerCode, lik: np.ndarray, l_max: int, early_exit: bool) -> BatchDecodeResult:
    """Loop-based BP for irregular graphs (oracle scale, e.g. tree tests)."""
    q = code.q
    rs = ring(q)
    B = lik.shape[0]
    sym = np.arange(q)
    by_cn = [[] for _ in range(code.m)]
    by_vn = [[] for _ in range(code.n)]
    for e, (c, v, h) in enumerate(zip(code.edge_cn, code.edge_vn, code.edge_label)):
        by_cn[int(c)].append(e)
        by_vn[int(v)].append(e)
    h = code.edge_label
    h_inv = rs.inv[h]
    diag: dict = {}
    estimates = np.zeros((B, code.n), dtype=np.int64)
    converged = np.zeros(B, dtype=bool)
    iters = np.zeros(B, dtype=np.int64)
    from .codes import syndrome as full_syndrome

    for b in range(B):
        msg_vc = {e: lik[b, int(code.edge_vn[e])] for e in range(code.num_edges)}
        est = np.argmax(lik[b], axis=1).astype(np.int64)
        used = 0
        ok = not full_syndrome(code, est).any()
        for it in range(1, l_max + 1):
            if ok and early_exit:
                break
            msg_cv = {}
            for c, edges in enumerate(by_cn):
                perms = {
                    e: msg_vc[e][(int(h_inv[e]) * sym) % q] for e in edges
                }
                for e in edges:
                    others = [perms[e2] for e2 in edges if e2 != e]
                    if others:
                        u = cn_convolution(others)
                    else:
                        # empty sum: the check pins h*x to 0 on its own
                        u = np.zeros(q)
                        u[0] = 1.0
                    out = u[(-int(h[e]) * sym) % q]
                    tot = out.sum()
                    msg_cv[e] = out / tot if tot > 0 else np.full(q, 1.0 / q)
            app = lik[b].copy()
            for v, edges in enumerate(by_vn):
                for e in edges:
                    prod = lik[b, v].copy()
                    for e2 in edges:
                        if e2 != e:
                            prod = prod * msg_cv[e2]
                    tot = prod.sum()
                    if tot == 0:
                        diag["vn_resets"] = diag.get("vn_resets", 0) + 1
                        prod = np.full(q, 1.0 / q)
                        tot = 1.0
                    msg_vc[e] = prod / tot
                    app[v] = app[v] * msg_cv[e]
            est = np.argmax(app, axis=1).astype(np.int64)
            used = it
            ok = not full_syndrome(code, est).any()
        estimates[b] = est
        converged[b] = ok
        iters[b] = used
    return BatchDecodeResult(estimates, converged, iters, diag)


def bp_decode(code: TannerCode, likelihoods, l_max: int, early_exit: bool = True) -> DecodeResult:
    res = bp_decode_batch(code, np.asarray(likelihoods)[None], l_max, early_exit)
    return res[0]


# ---------------------------------------------------------------------------
# symbol message passing
# ---------------------------------------------------------------------------

def smp_decode_batch(
    code: TannerCode,
    y: np.ndarray,
    delta: float,
    params: SmpParams,
    early_exit: bool = True,
) -> BatchDecodeResult:
    """Hard-symbol message passing with the qSC extrinsic model.

    Check rule: the outgoing symbol solves the check for the target
    edge, m = -h_e^{-1} sum_{e' != e} h_{e'} m_{e'}.  Variable rule:
    score each candidate x by ln B_delta(y - x) plus C(xi_l) times the
    number of agreeing incoming symbols, argmax with the lowest symbol
    winning ties.  The running decision applies the same rule over all
    d_v incoming messages.
    """
    from .ring import solve_boltzmann

    q, n, m = code.q, code.n, code.m
    rs = ring(q)
    y = np.asarray(y, dtype=np.int64)
    if y.ndim == 1:
        y = y[None]
    B = y.shape[0]
    logB = solve_boltzmann(delta, q).log_dist
    h = code.edge_label
    h_inv = rs.inv[h]
    cn_of_edge = code.edge_cn
    vn_mat = code.vn_edge_matrix
    d_v = code.d_v
    sym = np.arange(q)
    # channel scores (B, n, q): ln B(y_v - x)
    chan = logB[(y[..., None] - sym[None, None, :]) % q]

    estimates = y.copy()
    converged = _syndrome_ok(code, estimates)
    iters = np.zeros(B, dtype=np.int64)
    diag: dict = {}
    if params.l_max == 0:
        # no iterations: the decision is the channel argmax
        estimates = np.argmax(chan, axis=2).astype(np.int64)
        converged = _syndrome_ok(code, estimates)
        return BatchDecodeResult(estimates, converged, iters, diag)
    if early_exit and converged.all():
        return BatchDecodeResult(estimates, converged, iters, diag)

    active = np.flatnonzero(~converged) if early_exit else np.arange(B)
    msg_vc = y[active][:, code.edge_vn]     # (b, E) hard symbols
    chan_act = chan[active]

    for it in range(1, params.l_max + 1):
        xi = params.xi_schedule[it - 1]
        C = qsc_log_factor(xi, q)
        # check pass: per-check weighted sums, then solve for each edge
        weighted = (h * msg_vc) % q
        S = np.zeros((len(active), m), dtype=np.int64)
        np.add.at(S, (slice(None), cn_of_edge), weighted)
        msg_cv = (-h_inv * (S[:, cn_of_edge] - weighted)) % q
        # variable pass: count agreement among d_v-1 extrinsic symbols
        incoming = msg_cv[:, vn_mat]                        # (b, n, d_v)
        onehot = incoming[..., None] == sym                 # (b, n, d_v, q)
        counts = onehot.sum(axis=2)                         # (b, n, q)
        ext_counts = counts[:, :, None, :] - onehot
        scores = chan_act[:, :, None, :] + C * ext_counts
        new_msgs = np.argmax(scores, axis=3).astype(np.int64)
        msg_vc = np.empty_like(msg_cv)
        msg_vc[:, vn_mat] = new_msgs
        # decision: all d_v messages plus the channel
        dec = np.argmax(chan_act + C * counts, axis=2).astype(np.int64)
        ok = _syndrome_ok(code, dec)
        estimates[active] = dec
        iters[active] = it
        if early_exit:
            converged[active] = ok
            if ok.any():
                keep = ~ok
                active = active[keep]
                if active.size == 0:
                    break
                msg_vc = msg_vc[keep]
                chan_act = chan_act[keep]
        else:
            converged[active] = ok
    return BatchDecodeResult(estimates, converged, iters, diag)


def smp_decode(code, y, delta, params, early_exit=True) -> DecodeResult:
    res = smp_decode_batch(code, np.asarray(y)[None], delta, params, early_exit)
    return res[0]


# ---------------------------------------------------------------------------
# Lee symbol flipping
# ---------------------------------------------------------------------------

def lsf_decode_batch(
    code: TannerCode,
    y: np.ndarray,
    tau: float,
    l_max: int = 100,
) -> BatchDecodeResult:
    """Serial symbol-flipping sweeps, batched across received words.

    Per sweep, each variable in index order counts its unsatisfied
    checks; at tau or more, it tries a +-1 shift and keeps the one that
    strictly lowers the summed Lee weight of its adjacent syndrome
    entries (+1 wins ties).  Stops on a zero syndrome, a sweep with no
    flips anywhere, or l_max sweeps.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    q, n = code.q, code.n
    w = ring(q).weights
    y = np.asarray(y, dtype=np.int64)
    if y.ndim == 1:
        y = y[None]
    B = y.shape[0]
    est = y.copy()
    # dense per-VN adjacency (checks and labels), n small in practice
    vn_cns = [[] for _ in range(n)]
    vn_lbl = [[] for _ in range(n)]
    for c, v, lab in zip(code.edge_cn, code.edge_vn, code.edge_label):
        vn_cns[int(v)].append(int(c))
        vn_lbl[int(v)].append(int(lab))
    vn_cns = [np.array(a) for a in vn_cns]
    vn_lbl = [np.array(a) for a in vn_lbl]

    from .codes import syndrome as full_syndrome

    s = full_syndrome(code, est)
    converged = ~s.any(axis=1)
    iters = np.zeros(B, dtype=np.int64)
    active = np.flatnonzero(~converged)
    for sweep in range(1, l_max + 1):
        if active.size == 0:
            break
        flipped = np.zeros(B, dtype=bool)
        for v in range(n):
            cns, lbl = vn_cns[v], vn_lbl[v]
            sv = s[np.ix_(active, cns)]
            unsat = (sv != 0).sum(axis=1)
            cand = unsat >= tau
            if not cand.any():
                continue
            cur = w[sv].sum(axis=1)
            up = (sv + lbl) % q
            dn = (sv - lbl) % q
            w_up = w[up].sum(axis=1)
            w_dn = w[dn].sum(axis=1)
            better = cand & (np.minimum(w_up, w_dn) < cur)
            if not better.any():
                continue
            go_up = w_up <= w_dn  # tie shifts by +1
            rows = active[better]
            est[rows, v] = (est[rows, v] + np.where(go_up[better], 1, -1)) % q
            news = np.where(go_up[better, None], up[better], dn[better])
            s[np.ix_(rows, cns)] = news
            flipped[rows] = True
        iters[active] = sweep
        ok = ~s[active].any(axis=1)
        converged[active] = ok
        # drop words that converged or made no flip this sweep (stalled)
        active = active[(~ok) & flipped[active]]
    return BatchDecodeResult(est, converged, iters, {})


def lsf_decode(code, y, tau: float, l_max: int = 100) -> DecodeResult:
    res = lsf_decode_batch(code, np.asarray(y)[None], tau, l_max)
    return res[0]


# ---------------------------------------------------------------------------
# MAP oracle
# ---------------------------------------------------------------------------

def map_decode_oracle(code: TannerCode, likelihoods) -> np.ndarray:
    """Blockwise MAP over the enumerated codebook (test oracle).

    Ties resolve to the lexicographically lowest codeword; enumeration
    emits codewords in ascending lexicographic order, so the first
    maximum is that word.
    """
    from .codes import enumerate_codewords

    lik = np.asarray(likelihoods, dtype=float)
    words = enumerate_codewords(code)
    with np.errstate(divide="ignore"):
        logl = np.where(lik > 0, np.log(lik, where=lik > 0), -np.inf)
    scores = logl[np.arange(code.n)[None, :], words].sum(axis=1)
    return words[int(np.argmax(scores))]
