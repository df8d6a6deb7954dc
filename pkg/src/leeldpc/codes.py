"""Regular LDPC codes over Z/qZ: Tanner graphs, PEG construction, syndromes.

A code is a sparse parity-check matrix whose nonzero entries are units
of the ring.  Graphs come from a deterministic PEG construction (girth
driven, fixed tie-breaks) and get fresh uniform unit labels per sampled
code.  A separate configuration-model sampler backs the ensemble-average
spectrum checks; it allows multi-edges (labels add up), matching the
ensemble the average enumerator formulas are computed over.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ring import ring

__all__ = [
    "EnsembleSpec",
    "PegGraph",
    "TannerCode",
    "peg_construct",
    "graph_girth",
    "sample_code",
    "syndrome",
    "is_codeword",
    "enumerate_codewords",
    "is_free_code",
    "code_cardinality",
    "write_parity_file",
    "read_parity_file",
    "sample_ensemble_matrix",
    "ensemble_kernel",
    "codewords_from_generator",
]


@dataclass(frozen=True)
class EnsembleSpec:
    q: int
    n: int
    d_v: int
    d_c: int

    def __post_init__(self):
        if self.d_v < 1 or self.d_c < 1:
            raise ValueError("degrees must be positive")
        if (self.n * self.d_v) % self.d_c:
            raise ValueError("n*d_v must be divisible by d_c")
        if self.q < 2:
            raise ValueError("q must be >= 2")

    @property
    def m(self) -> int:
        return self.n * self.d_v // self.d_c

    @property
    def design_rate(self) -> float:
        return 1.0 - self.d_v / self.d_c


@dataclass(frozen=True)
class PegGraph:
    n: int
    m: int
    d_v: int
    d_c: int
    edges: tuple        # ((cn, vn), ...) sorted by (cn, vn)
    girth: float        # inf for a forest


def _peg_attempt(n: int, m: int, d_v: int, d_c: int, vn_order) -> list | None:
    """One PEG pass; returns edge list or None if it wedges on capacity."""
    vn_adj = [[] for _ in range(n)]
    cn_adj = [[] for _ in range(m)]
    cn_deg = [0] * m
    for v in vn_order:
        for _ in range(d_v):
            # BFS distances from v to every CN through the current graph
            dist = [-1] * m
            seen_v = [False] * n
            seen_v[v] = True
            frontier = [v]
            depth = 0
            while frontier:
                nxt = []
                for u in frontier:
                    for c in vn_adj[u]:
                        if dist[c] == -1:
                            dist[c] = depth
                            nxt.extend(
                                w for w in cn_adj[c] if not seen_v[w]
                            )
                            for w in cn_adj[c]:
                                seen_v[w] = True
                frontier = nxt
                depth += 1
            taken = set(vn_adj[v])
            best = None
            # prefer CNs not reachable at all; otherwise maximal distance
            for c in range(m):
                if cn_deg[c] >= d_c or c in taken:
                    continue
                d = dist[c] if dist[c] >= 0 else math.inf
                key = (d, -cn_deg[c], -c)  # max dist, then min degree, then min index
                if best is None or key > best[0]:
                    best = (key, c)
            if best is None:
                return None
            c = best[1]
            vn_adj[v].append(c)
            cn_adj[c].append(v)
            cn_deg[c] += 1
    return sorted((c, v) for v in range(n) for c in vn_adj[v])


@lru_cache(maxsize=None)
def _peg_graph_cached(n: int, d_v: int, d_c: int) -> PegGraph:
    if (n * d_v) % d_c:
        raise ValueError("infeasible degree sequence")
    m = n * d_v // d_c
    for attempt in range(n):
        order = [(v + attempt) % n for v in range(n)]
        edges = _peg_attempt(n, m, d_v, d_c, order)
        if edges is not None:
            g = graph_girth(n, m, edges)
            return PegGraph(n, m, d_v, d_c, tuple(edges), g)
    raise RuntimeError(f"PEG failed for (n={n}, d_v={d_v}, d_c={d_c})")


def peg_construct(spec: EnsembleSpec, rng=None) -> PegGraph:
    """Girth-driven graph for the given regular ensemble.

    Fully deterministic: edge selection uses fixed tie-breaks (new CNs
    first by lowest degree then lowest index, else the CN farthest from
    the variable's subtree).  The rng argument is accepted for interface
    uniformity and ignored.
    """
    return _peg_graph_cached(spec.n, spec.d_v, spec.d_c)


def graph_girth(n: int, m: int, edges) -> float:
    """Shortest cycle length in the bipartite graph; inf for a forest."""
    adj = [[] for _ in range(n + m)]
    for c, v in edges:
        adj[v].append(n + c)
        adj[n + c].append(v)
    best = math.inf
    for src in range(n):
        dist = {src: 0}
        parent = {src: -1}
        frontier = [src]
        while frontier and 2 * dist[frontier[0]] < best - 1:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if w not in dist:
                        dist[w] = dist[u] + 1
                        parent[w] = u
                        nxt.append(w)
                    elif parent[u] != w and parent[w] != u:
                        best = min(best, dist[u] + dist[w] + 1)
            frontier = nxt
    return best


class TannerCode:
    """Sparse parity-check code with unit labels, in edge-array form.

    Edges are sorted by (check, variable).  For regular codes the edge
    ids reshape into (m, d_c) and, through vn_edge_order, into (n, d_v)
    matrices; the decoders lean on those two views.
    """

    def __init__(self, q: int, n: int, m: int, edge_cn, edge_vn, edge_label):
        self.ring = ring(q)
        self.q = q
        self.n = n
        self.m = m
        order = np.lexsort((np.asarray(edge_vn), np.asarray(edge_cn)))
        self.edge_cn = np.asarray(edge_cn, dtype=np.int64)[order]
        self.edge_vn = np.asarray(edge_vn, dtype=np.int64)[order]
        self.edge_label = np.asarray(edge_label, dtype=np.int64)[order]
        E = len(self.edge_cn)
        units = set(int(u) for u in self.ring.units)
        for h in self.edge_label:
            if int(h) not in units:
                raise ValueError(f"label {h} is not a unit of Z/{q}Z")
        pairs = set(zip(self.edge_cn.tolist(), self.edge_vn.tolist()))
        if len(pairs) != E:
            raise ValueError("repeated (CN, VN) edge")
        self.cn_degrees = np.bincount(self.edge_cn, minlength=m)
        self.vn_degrees = np.bincount(self.edge_vn, minlength=n)
        self.vn_edge_order = np.argsort(self.edge_vn, kind="stable")
        self.d_v = int(self.vn_degrees[0]) if len(set(self.vn_degrees)) == 1 else None
        self.d_c = int(self.cn_degrees[0]) if len(set(self.cn_degrees)) == 1 else None
        self.girth = math.nan  # filled in by sample_code when known

    @property
    def num_edges(self) -> int:
        return len(self.edge_cn)

    @property
    def cn_edge_matrix(self) -> np.ndarray:
        if self.d_c is None:
            raise ValueError("not check-regular")
        return np.arange(self.num_edges).reshape(self.m, self.d_c)

    @property
    def vn_edge_matrix(self) -> np.ndarray:
        if self.d_v is None:
            raise ValueError("not variable-regular")
        return self.vn_edge_order.reshape(self.n, self.d_v)

    def adjacency(self):
        """Per-CN sorted list of (vn, label) pairs."""
        out = [[] for _ in range(self.m)]
        for c, v, h in zip(self.edge_cn, self.edge_vn, self.edge_label):
            out[int(c)].append((int(v), int(h)))
        return out

    def dense_matrix(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.int64)
        H[self.edge_cn, self.edge_vn] = self.edge_label
        return H


def sample_code(spec: EnsembleSpec, rng: np.random.Generator) -> TannerCode:
    """PEG graph for the spec plus i.i.d. uniform unit labels."""
    g = peg_construct(spec)
    units = ring(spec.q).units
    labels = units[rng.integers(0, len(units), size=len(g.edges))]
    cns = [c for c, _ in g.edges]
    vns = [v for _, v in g.edges]
    code = TannerCode(spec.q, spec.n, spec.m, cns, vns, labels)
    code.girth = g.girth
    return code


def syndrome(code: TannerCode, x) -> np.ndarray:
    """Per-check sums sum_v h_cv * x_v mod q.  Accepts (n,) or (B, n)."""
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-1] != code.n:
        raise ValueError(f"expected length {code.n}, got {x.shape[-1]}")
    contrib = code.edge_label * x[..., code.edge_vn]
    if x.ndim == 1:
        s = np.zeros(code.m, dtype=np.int64)
        np.add.at(s, code.edge_cn, contrib)
    else:
        s = np.zeros((x.shape[0], code.m), dtype=np.int64)
        np.add.at(s, (slice(None), code.edge_cn), contrib)
    return s % code.q


def is_codeword(code: TannerCode, x) -> bool:
    return not syndrome(code, x).any()


def enumerate_codewords(code: TannerCode) -> np.ndarray:
    """All kernel vectors, by exhaustive scan.  Oracle-sized inputs only."""
    q, n = code.q, code.n
    if n > 12 or q**n > 10**7:
        raise ValueError("enumeration guard: n <= 12 and q^n <= 1e7")
    out = []
    block = 1 << 14
    total = q**n
    radix = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, block):
        idx = np.arange(start, min(start + block, total), dtype=np.int64)
        vecs = (idx[:, None] // radix[None, :]) % q
        s = syndrome(code, vecs)
        out.append(vecs[~s.any(axis=1)])
    return np.concatenate(out, axis=0)


def _unit_pivot_rank(H: np.ndarray, q: int) -> int:
    """Pivot count from Gaussian elimination restricted to unit pivots.

    Sweeps until no further unit pivot appears anywhere (elimination can
    expose new units in earlier columns, hence the repeat).  For prime q
    this is ordinary full-rank computation; for composite q a result
    below the row count means "not shown free", not a proven rank.
    """
    H = H.copy() % q
    rows, cols = H.shape
    r = 0
    progress = True
    while progress and r < rows:
        progress = False
        for col in range(cols):
            piv = None
            for i in range(r, rows):
                if math.gcd(int(H[i, col]), q) == 1:
                    piv = i
                    break
            if piv is None:
                continue
            H[[r, piv]] = H[[piv, r]]
            inv = pow(int(H[r, col]), -1, q)
            H[r] = (H[r] * inv) % q
            for i in range(rows):
                if i != r and H[i, col]:
                    H[i] = (H[i] - H[i, col] * H[r]) % q
            r += 1
            progress = True
            if r == rows:
                break
    return r


def is_free_code(code: TannerCode) -> bool:
    """True when H row-reduces to full row rank with unit pivots only."""
    return _unit_pivot_rank(code.dense_matrix(), code.q) == code.m


def code_cardinality(code: TannerCode) -> int:
    """|C| = q^(n-m) for free codes; falls back to enumeration otherwise."""
    if is_free_code(code):
        return code.q ** (code.n - code.m)
    return len(enumerate_codewords(code))


# ---- parity-check file format ----
# header `q n m`, then one line per CN: `cn_idx vn_idx:label ...`

def write_parity_file(code: TannerCode, path) -> None:
    lines = [f"{code.q} {code.n} {code.m}"]
    for c, row in enumerate(code.adjacency()):
        toks = " ".join(f"{v}:{h}" for v, h in row)
        lines.append(f"{c} {toks}".rstrip())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_parity_file(path) -> TannerCode:
    with open(path) as fh:
        header = fh.readline().split()
        q, n, m = int(header[0]), int(header[1]), int(header[2])
        cns, vns, labels = [], [], []
        for line in fh:
            toks = line.split()
            if not toks:
                continue
            c = int(toks[0])
            for tok in toks[1:]:
                v, h = tok.split(":")
                cns.append(c)
                vns.append(int(v))
                labels.append(int(h))
    return TannerCode(q, n, m, cns, vns, labels)


# ---- configuration-model ensemble (spectrum averages are over this) ----

def sample_ensemble_matrix(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """Dense parity matrix from the socket-pairing ensemble.

    Each of the n*d_v variable sockets is matched to a check socket by a
    uniform permutation and carries its own uniform unit label; parallel
    sockets between the same (CN, VN) pair add up mod q.  This is the
    ensemble the average weight enumerator is defined over, so entries
    may be zero divisors or vanish.
    """
    q, n, m, d_v, d_c = spec.q, spec.n, spec.m, spec.d_v, spec.d_c
    units = ring(q).units
    vn_sockets = np.repeat(np.arange(n), d_v)
    cn_sockets = np.repeat(np.arange(m), d_c)
    perm = rng.permutation(n * d_v)
    labels = units[rng.integers(0, len(units), size=n * d_v)]
    H = np.zeros((m, n), dtype=np.int64)
    np.add.at(H, (cn_sockets[perm], vn_sockets), labels)
    return H % q


def ensemble_kernel(H: np.ndarray, q: int) -> np.ndarray:
    """Brute-force kernel of a dense matrix over Z/qZ (oracle sized)."""
    m, n = H.shape
    if q**n > 10**7:
        raise ValueError("kernel enumeration guard")
    radix = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    out = []
    block = 1 << 14
    for start in range(0, q**n, block):
        idx = np.arange(start, min(start + block, q**n), dtype=np.int64)
        vecs = (idx[:, None] // radix[None, :]) % q
        s = (vecs @ H.T) % q
        out.append(vecs[~s.any(axis=1)])
    return np.concatenate(out, axis=0)


def codewords_from_generator(G: np.ndarray, q: int) -> np.ndarray:
    """All q^k words u*G mod q for a k x n generator matrix."""
    G = np.asarray(G, dtype=np.int64)
    k, _ = G.shape
    if q**k > 10**7:
        raise ValueError("generator enumeration guard")
    radix = q ** np.arange(k - 1, -1, -1, dtype=np.int64)
    idx = np.arange(q**k, dtype=np.int64)
    msgs = (idx[:, None] // radix[None, :]) % q
    return (msgs @ G) % q
