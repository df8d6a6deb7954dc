"""Decoder tests: BP, SMP, LSF, and the MAP oracle.

Check-node outputs are verified against brute-force enumeration of
check-satisfying assignments; BP posteriors are verified against
symbolwise MAP computed from the full codebook on tree graphs; the SMP
hand example is re-derived in the test from frozen Boltzmann values.
"""
import math

import numpy as np
import pytest

import leeldpc.codes as cd
import leeldpc.decoders as dec
import leeldpc.ring as rg
from leeldpc.channels import trial_stream


def single_check_code(q=5):
    return cd.TannerCode(q, 2, 1, [0, 0], [0, 1], [1, 1])


def sharp_likelihoods(symbols, q, peak=0.9):
    lik = np.full((len(symbols), q), (1 - peak) / (q - 1))
    for v, s in enumerate(symbols):
        lik[v, s] = peak
    return lik


# ---- circular convolution ----

def test_cn_convolution_examples():
    point = np.zeros(5)
    point[0] = 1.0
    p = np.array([0.1, 0.2, 0.3, 0.25, 0.15])
    assert np.allclose(dec.cn_convolution([p, point]), p)
    u = np.full(7, 1 / 7)
    assert np.allclose(dec.cn_convolution([u, u]), u)
    a = np.zeros(5)
    a[2] = 1.0
    b = np.zeros(5)
    b[4] = 1.0
    out = dec.cn_convolution([a, b])
    assert np.argmax(out) == 1 and out[1] == pytest.approx(1.0)


@pytest.mark.parametrize("q", [5, 8, 12])
def test_cn_convolution_fft_matches_direct(q):
    rng = trial_stream(21, q)
    for _ in range(20):
        msgs = rng.dirichlet(np.ones(q), size=3)
        fast = dec.cn_convolution(msgs, method="fft")
        slow = dec.cn_convolution(msgs, method="direct")
        assert np.max(np.abs(fast - slow)) < 1e-10
    # commutative
    m1, m2 = rng.dirichlet(np.ones(q), size=2)
    assert np.allclose(dec.cn_convolution([m1, m2]), dec.cn_convolution([m2, m1]))


# ---- BP ----

def test_bp_lmax_zero_is_channel_argmax():
    code = single_check_code(5)
    lik = sharp_likelihoods([3, 3], 5)
    res = dec.bp_decode(code, lik, l_max=0)
    assert np.array_equal(res.estimate, [3, 3])
    assert res.iterations_used == 0
    assert not res.converged  # 3+3=1 mod 5


def test_bp_single_check_parity_forcing():
    code = single_check_code(5)
    lik = sharp_likelihoods([1, 4], 5)
    res = dec.bp_decode(code, lik, l_max=5)
    assert res.converged
    assert np.array_equal(res.estimate, [1, 4])
    assert res.iterations_used <= 1


def test_bp_messages_stay_normalized():
    spec = cd.EnsembleSpec(q=7, n=24, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(22, 0))
    rng = trial_stream(22, 1)
    lik = rng.dirichlet(np.ones(7), size=(4, 24))
    seen = []

    def hook(it, msg_cv, ext, app):
        seen.append(it)
        for arr in (msg_cv, ext, app):
            sums = arr.sum(axis=-1)
            assert np.all(np.abs(sums - 1.0) < 1e-9)
            assert arr.min() >= 0

    dec.bp_decode_batch(code, lik, l_max=4, early_exit=False, iteration_hook=hook)
    assert seen == [1, 2, 3, 4]


def brute_cn_message(labels, msgs, target, q):
    """Message to edge `target` by enumerating check-satisfying others."""
    others = [j for j in range(len(labels)) if j != target]
    out = np.zeros(q)
    idx = np.zeros(len(others), dtype=int)
    total = q ** len(others)
    for flat in range(total):
        rem = flat
        acc = 0
        p = 1.0
        for pos, j in enumerate(others):
            x = rem % q
            rem //= q
            acc += labels[j] * x
            p *= msgs[j][x]
        for a in range(q):
            if (labels[target] * a + acc) % q == 0:
                out[a] += p
    return out / out.sum()


def test_bp_cn_rule_matches_enumeration():
    q = 5
    spec = cd.EnsembleSpec(q=q, n=8, d_v=2, d_c=4)
    code = cd.sample_code(spec, trial_stream(23, 0))
    rng = trial_stream(23, 1)
    lik = rng.dirichlet(np.ones(q), size=(1, 8))
    captured = {}

    def hook(it, msg_cv, ext, app):
        if it == 1:
            captured["cv"] = msg_cv.copy()

    dec.bp_decode_batch(code, lik, l_max=1, early_exit=False, iteration_hook=hook)
    adj = code.adjacency()
    for c in range(code.m):
        edges = [e for e in range(code.num_edges) if code.edge_cn[e] == c]
        labels = [int(code.edge_label[e]) for e in edges]
        msgs = [lik[0, int(code.edge_vn[e])] for e in edges]
        for pos, e in enumerate(edges):
            want = brute_cn_message(labels, msgs, pos, q)
            assert np.max(np.abs(captured["cv"][0, e] - want)) < 1e-12


def union_find_tree_code(rng, q, n, m):
    """Random forest-shaped Tanner graph with unit labels."""
    parent = list(range(n + m))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for c in range(m):
        deg = int(rng.integers(2, 4))
        for _ in range(deg):
            cands = [v for v in range(n) if find(v) != find(n + c)]
            if not cands:
                break
            v = int(rng.choice(cands))
            edges.append((c, v))
            parent[find(v)] = find(n + c)
    units = rg.ring(q).units
    labels = units[rng.integers(0, len(units), size=len(edges))]
    cns = [c for c, _ in edges]
    vns = [v for _, v in edges]
    return cd.TannerCode(q, n, m, cns, vns, labels)


def symbolwise_map(code, lik):
    words = cd.enumerate_codewords(code)
    weights = np.prod(lik[np.arange(code.n)[None, :], words], axis=1)
    est = np.zeros(code.n, dtype=np.int64)
    for v in range(code.n):
        marg = np.zeros(code.q)
        np.add.at(marg, words[:, v], weights)
        est[v] = int(np.argmax(marg))
    return est


def test_bp_equals_symbolwise_map_on_trees():
    rng = trial_stream(24, 0)
    for trial in range(10):
        q = int(rng.choice([4, 5]))
        n = int(rng.integers(5, 9))
        m = int(rng.integers(1, 4))
        code = union_find_tree_code(rng, q, n, m)
        assert cd.graph_girth(n, m, list(zip(code.edge_cn, code.edge_vn))) == math.inf
        for _ in range(100):
            lik = rng.dirichlet(np.ones(q), size=n)
            res = dec.bp_decode(code, lik, l_max=10, early_exit=False)
            assert np.array_equal(res.estimate, symbolwise_map(code, lik))


def test_bp_one_iteration_exact_on_star_forests():
    # with d_v = 1 every VN sees its full tree after a single iteration
    rng = trial_stream(24, 1)
    spec = cd.EnsembleSpec(q=5, n=8, d_v=1, d_c=4)
    code = cd.sample_code(spec, rng)
    for _ in range(50):
        lik = rng.dirichlet(np.ones(5), size=8)
        res = dec.bp_decode(code, lik, l_max=1, early_exit=False)
        assert np.array_equal(res.estimate, symbolwise_map(code, lik))


def test_bp_underflow_reset_flagged():
    code = single_check_code(5)
    lik = np.zeros((2, 5))
    lik[0, 1] = 1.0  # conflicting one-hots: no assignment satisfies both
    lik[1, 1] = 1.0
    res = dec.bp_decode(code, lik, l_max=3)
    assert np.isfinite(res.estimate).all()
    assert res.diagnostics.get("app_resets", 0) > 0
    if res.converged:
        assert cd.is_codeword(code, res.estimate)


def test_bp_batch_matches_single():
    spec = cd.EnsembleSpec(q=5, n=12, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(25, 0))
    rng = trial_stream(25, 1)
    lik = rng.dirichlet(np.ones(5), size=(6, 12))
    batch = dec.bp_decode_batch(code, lik, l_max=8)
    for b in range(6):
        single = dec.bp_decode(code, lik[b], l_max=8)
        assert np.array_equal(batch.estimates[b], single.estimate)
        assert batch.converged[b] == single.converged
        assert batch.iterations_used[b] == single.iterations_used


# ---- SMP ----

def test_smp_lmax_zero_returns_channel_argmax():
    code = single_check_code(5)
    params = dec.SmpParams(xi_schedule=(), l_max=0)
    res = dec.smp_decode(code, [2, 1], 0.6, params)
    assert np.array_equal(res.estimate, [2, 1])
    assert res.iterations_used == 0


def test_smp_hand_example_qsc_overcomes_channel():
    # H = [1 1] over Z/5Z, y = (1,1), delta = 0.6, one iteration.
    # Check node sends -y2 = 4 to v1 (and -y1 = 4 to v2).  With xi = 0.1
    # the agreement bonus C = ln(0.9*4/0.1) = ln 36 beats the channel
    # log-ratio ln B(0) - ln B(2), so both symbols move to 4.
    beta = 1.0741294577057463  # frozen independent solve at (q=5, 0.6)
    lnB0 = math.log(0.5217670016874737)
    lnB2 = lnB0 - 2 * beta
    C = math.log(0.9 * 4 / 0.1)
    assert C > lnB0 - lnB2  # qSC evidence wins
    code = single_check_code(5)
    params = dec.SmpParams(xi_schedule=(0.1,), l_max=1)
    res = dec.smp_decode(code, [1, 1], 0.6, params)
    assert np.array_equal(res.estimate, [4, 4])
    assert not res.converged  # 4 + 4 = 3 mod 5
    assert res.iterations_used == 1
    # with weak extrinsic confidence the channel keeps both symbols at 1
    C_weak = math.log(0.55 * 4 / 0.45)
    assert C_weak < lnB0 - lnB2
    params2 = dec.SmpParams(xi_schedule=(0.45,), l_max=1)
    res2 = dec.smp_decode(code, [1, 1], 0.6, params2)
    assert np.array_equal(res2.estimate, [1, 1])


def test_smp_codeword_input_converges_immediately():
    spec = cd.EnsembleSpec(q=5, n=8, d_v=2, d_c=4)
    code = cd.sample_code(spec, trial_stream(26, 0))
    params = dec.SmpParams(xi_schedule=(0.2,) * 5, l_max=5)
    res = dec.smp_decode(code, np.zeros(8, dtype=int), 0.4, params)
    assert res.converged
    assert res.iterations_used == 0
    assert np.array_equal(res.estimate, np.zeros(8))


def test_smp_invalid_xi():
    with pytest.raises(ValueError):
        dec.SmpParams(xi_schedule=(0.0,), l_max=1)
    with pytest.raises(ValueError):
        dec.SmpParams(xi_schedule=(1.0,), l_max=1)
    with pytest.raises(ValueError):
        dec.SmpParams(xi_schedule=(0.1,), l_max=2)  # schedule too short


def test_smp_cn_output_flat_off_true_symbol():
    # qSC-like behavior of h*M for prime q: conditioned on being wrong,
    # the check output is uniform over the q-1 wrong symbols.
    q, xi, N = 5, 0.2, 100_000
    rng = trial_stream(27, 0)
    units = rg.ring(q).units
    h = units[rng.integers(0, len(units), size=(N, 3))]
    x2 = rng.integers(0, q, size=N)
    x3 = rng.integers(0, q, size=N)
    inv = rg.ring(q).inv
    x1 = (-inv[h[:, 0]] * (h[:, 1] * x2 + h[:, 2] * x3)) % q
    # incoming messages pass through a qSC(xi)
    def qsc(x):
        flip = rng.random(N) < xi
        err = rng.integers(1, q, size=N)
        return (x + flip * err) % q
    m2, m3 = qsc(x2), qsc(x3)
    m1 = (-inv[h[:, 0]] * (h[:, 1] * m2 + h[:, 2] * m3)) % q
    errs = (m1 - x1) % q
    off = np.bincount(errs, minlength=q)[1:]
    n_off = off.sum()
    expect = n_off / (q - 1)
    sigma = math.sqrt(n_off * (1 / (q - 1)) * (1 - 1 / (q - 1)))
    assert np.all(np.abs(off - expect) < 3 * sigma)


def test_smp_batch_matches_single():
    spec = cd.EnsembleSpec(q=7, n=14, d_v=2, d_c=4)
    code = cd.sample_code(spec, trial_stream(28, 0))
    rng = trial_stream(28, 1)
    y = rng.integers(0, 7, size=(5, 14))
    params = dec.SmpParams(xi_schedule=(0.3, 0.25, 0.2, 0.15), l_max=4)
    batch = dec.smp_decode_batch(code, y, 0.5, params)
    for b in range(5):
        single = dec.smp_decode(code, y[b], 0.5, params)
        assert np.array_equal(batch.estimates[b], single.estimate)
        assert batch.converged[b] == single.converged


# ---- LSF ----

def test_lsf_codeword_passthrough():
    spec = cd.EnsembleSpec(q=5, n=12, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(29, 0))
    res = dec.lsf_decode(code, np.zeros(12, dtype=int), tau=1.5)
    assert res.converged
    assert res.iterations_used == 0
    assert np.array_equal(res.estimate, np.zeros(12))


def test_lsf_corrects_single_errors():
    spec = cd.EnsembleSpec(q=5, n=256, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(29, 1))
    rng = trial_stream(29, 2)
    trials = 1000
    y = np.zeros((trials, 256), dtype=np.int64)
    pos = rng.integers(0, 256, size=trials)
    sign = rng.choice([1, 4], size=trials)  # Lee weight 1 either way
    y[np.arange(trials), pos] = sign
    res = dec.lsf_decode_batch(code, y, tau=1.5, l_max=50)
    fixed = res.converged & ~res.estimates.any(axis=1)
    assert fixed.mean() >= 0.99
    # converged always means zero syndrome
    for b in np.flatnonzero(res.converged)[:20]:
        assert cd.is_codeword(code, res.estimates[b])


def test_lsf_threshold_above_degree_never_flips():
    spec = cd.EnsembleSpec(q=5, n=24, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(29, 3))
    rng = trial_stream(29, 4)
    y = rng.integers(0, 5, size=24)
    res = dec.lsf_decode(code, y, tau=3.5, l_max=10)
    assert np.array_equal(res.estimate, y)
    with pytest.raises(ValueError):
        dec.lsf_decode(code, y, tau=0.0)


def test_lsf_batch_matches_single():
    spec = cd.EnsembleSpec(q=5, n=24, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(29, 5))
    rng = trial_stream(29, 6)
    y = rng.integers(0, 5, size=(5, 24))
    batch = dec.lsf_decode_batch(code, y, tau=1.5, l_max=30)
    for b in range(5):
        single = dec.lsf_decode(code, y[b], tau=1.5, l_max=30)
        assert np.array_equal(batch.estimates[b], single.estimate)
        assert batch.converged[b] == single.converged
        assert batch.iterations_used[b] == single.iterations_used


# ---- MAP oracle and determinism ----

def test_map_oracle_examples():
    code = single_check_code(5)
    lik = sharp_likelihoods([2, 3], 5)
    assert np.array_equal(dec.map_decode_oracle(code, lik), [2, 3])
    uniform = np.full((2, 5), 0.2)
    assert np.array_equal(dec.map_decode_oracle(code, uniform), [0, 0])


def test_decoders_deterministic():
    spec = cd.EnsembleSpec(q=5, n=24, d_v=3, d_c=6)
    code = cd.sample_code(spec, trial_stream(30, 0))
    rng = trial_stream(30, 1)
    lik = rng.dirichlet(np.ones(5), size=(3, 24))
    y = rng.integers(0, 5, size=(3, 24))
    params = dec.SmpParams(xi_schedule=(0.3, 0.2, 0.1), l_max=3)
    for _ in range(2):
        r1 = dec.bp_decode_batch(code, lik, l_max=5)
        r2 = dec.bp_decode_batch(code, lik, l_max=5)
        assert np.array_equal(r1.estimates, r2.estimates)
        s1 = dec.smp_decode_batch(code, y, 0.5, params)
        s2 = dec.smp_decode_batch(code, y, 0.5, params)
        assert np.array_equal(s1.estimates, s2.estimates)
        l1 = dec.lsf_decode_batch(code, y, tau=1.5)
        l2 = dec.lsf_decode_batch(code, y, tau=1.5)
        assert np.array_equal(l1.estimates, l2.estimates)
