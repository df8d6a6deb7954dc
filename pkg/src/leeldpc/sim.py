"""Batch experiment harness: Monte Carlo block-error simulation on the
Lee channels, plus the dispatchers that turn flat key=value configs into
bound, spectrum and threshold CSVs.

Reproducibility contract.  Every trial draws from its own counter-based
stream keyed by (per-grid-point master word, trial index), and the
aggregator consumes wave results strictly in wave order, so the emitted
CSV is byte-identical for any worker count.  A decoder's trial count is
the end of the wave in which it collected its min_errors-th block
error, capped at max_trials; waves decoded beyond a decoder's stopping
wave are discarded, never averaged in.

Configs are flat key=value text with no nesting.  Unknown keys are
rejected, every diagnostic names the offending field.
"""
from __future__ import annotations

import hashlib
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import bounds as bounds_mod
from . import de as de_mod
from . import spectrum as spectrum_mod
from .channels import (
    Channel,
    constant_weight_channel,
    error_from_str,
    error_to_str,
    memoryless_channel,
    trial_stream,
)
from .codes import EnsembleSpec, TannerCode, read_parity_file, sample_code
from .decoders import (
    DecodeResult,
    SmpParams,
    bp_decode_batch,
    lsf_decode_batch,
    smp_decode_batch,
)
from .ring import solve_boltzmann

__all__ = [
    "ConfigError",
    "TraceMismatch",
    "ExperimentConfig",
    "SimRecord",
    "parse_kv_text",
    "format_kv",
    "wilson_halfwidth",
    "smp_schedule",
    "build_code",
    "run_simulation",
    "run_bounds",
    "run_spectrum",
    "run_thresholds",
    "record_trace",
    "replay_trial",
    "write_sim_csv",
]

# distinct Philox master words per grid point: golden-ratio stride keeps
# them apart for any seed; the bare seed itself labels the code sampler
_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

DECODER_NAMES = ("bp", "smp", "lsf")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


class TraceMismatch(RuntimeError):
    """A replay trace disagrees with what the environment reproduces."""


# ---------------------------------------------------------------------------
# flat key=value config text
# ---------------------------------------------------------------------------

def parse_kv_text(text: str) -> dict:
    """Parse flat key=value lines; '#' starts a comment, blanks skipped."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key=value, got {body!r}")
        key, val = body.split("=", 1)
        key, val = key.strip(), val.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = val
    return pairs


def format_kv(pairs: dict) -> str:
    lines = []
    for key in sorted(pairs):
        val = pairs[key]
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"


def _get_int(pairs, key, default=None, lo=None, hi=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"{key}: required")
        return default
    try:
        v = int(pairs[key])
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {pairs[key]!r}") from None
    if lo is not None and v < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(f"{key}: must be <= {hi}, got {v}")
    return v


def _get_float(pairs, key, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"{key}: required")
        return default
    try:
        return float(pairs[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {pairs[key]!r}") from None


def _get_bool(pairs, key, default=False):
    if key not in pairs:
        return default
    val = pairs[key].lower()
    if val in ("true", "1", "yes"):
        return True
    if val in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {pairs[key]!r}")


def _get_floats(pairs, key):
    if key not in pairs or not pairs[key]:
        raise ConfigError(f"{key}: required, nonempty comma list")
    try:
        grid = tuple(float(tok) for tok in pairs[key].split(","))
    except ValueError:
        raise ConfigError(f"{key}: not a comma list of numbers: {pairs[key]!r}") from None
    return grid


def _get_names(pairs, key, allowed, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"{key}: required")
        return default
    names = tuple(tok.strip() for tok in pairs[key].split(",") if tok.strip())
    if not names:
        raise ConfigError(f"{key}: empty list")
    for name in names:
        if name not in allowed:
            raise ConfigError(f"{key}: unknown entry {name!r}; allowed {sorted(allowed)}")
    if len(set(names)) != len(names):
        raise ConfigError(f"{key}: repeated entry")
    return names


_FIELDS = {
    "simulate": {
        "q", "n", "d_v", "d_c", "channel", "delta_grid", "decoders",
        "l_max", "tau", "min_errors", "max_trials", "batch", "workers",
        "seed", "out", "code_file", "ser", "union_guard", "trace_out",
    },
    "bounds": {"q", "n", "k", "rate2", "channel", "delta_grid", "kinds", "out"},
    "spectrum": {"q", "n", "d_v", "d_c", "delta_grid", "method", "out", "random_out"},
    "thresholds": {
        "q", "d_v", "d_c", "decoders", "tol", "population", "seed",
        "l_max", "out",
    },
    "replay": {"trace"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters for one subcommand invocation."""

    subcommand: str
    q: int = 0
    n: int = 0
    d_v: int = 0
    d_c: int = 0
    channel: str = "memoryless"
    delta_grid: tuple = ()
    decoders: tuple = ()
    l_max: int = 100
    tau: float = 0.0
    min_errors: int = 100
    max_trials: int = 10_000_000
    batch: int = 1000
    workers: int = 1
    seed: int = 1
    out: str = ""
    code_file: str = ""
    ser: bool = False
    union_guard: bool = False
    trace_out: str = ""
    kinds: tuple = ()
    rate2: float = 0.0
    method: str = "hayman"
    tol: float = 5e-4
    population: int = 100_000
    trace: str = ""
    random_out: str = ""

    @classmethod
    def from_pairs(cls, subcommand: str, pairs: dict) -> "ExperimentConfig":
        if subcommand not in _FIELDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        unknown = set(pairs) - _FIELDS[subcommand]
        if unknown:
            raise ConfigError(
                f"unknown keys for {subcommand}: {', '.join(sorted(unknown))}"
            )
        builder = getattr(cls, f"_build_{subcommand}")
        return builder(pairs)

    @classmethod
    def _build_simulate(cls, pairs):
        code_file = pairs.get("code_file", "")
        q = _get_int(pairs, "q", default=0 if code_file else None, lo=2)
        n = _get_int(pairs, "n", default=0 if code_file else None, lo=1)
        d_v = _get_int(pairs, "d_v", default=0 if code_file else None, lo=1)
        d_c = _get_int(pairs, "d_c", default=0 if code_file else None, lo=2)
        channel = pairs.get("channel", "memoryless")
        if channel not in ("memoryless", "constant_weight"):
            raise ConfigError(f"channel: expected memoryless or constant_weight, got {channel!r}")
        grid = _get_floats(pairs, "delta_grid")
        decoders = _get_names(pairs, "decoders", DECODER_NAMES)
        cfg = cls(
            subcommand="simulate",
            q=q, n=n, d_v=d_v, d_c=d_c,
            channel=channel,
            delta_grid=grid,
            decoders=decoders,
            l_max=_get_int(pairs, "l_max", default=100, lo=0),
            tau=_get_float(pairs, "tau", default=(d_v / 2 if d_v else 1.5)),
            min_errors=_get_int(pairs, "min_errors", default=100, lo=1),
            max_trials=_get_int(pairs, "max_trials", default=10_000_000, lo=1),
            batch=_get_int(pairs, "batch", default=1000, lo=1),
            workers=_get_int(pairs, "workers", default=1, lo=1),
            seed=_get_int(pairs, "seed", default=1, lo=0),
            out=pairs.get("out", ""),
            code_file=code_file,
            ser=_get_bool(pairs, "ser"),
            union_guard=_get_bool(pairs, "union_guard"),
            trace_out=pairs.get("trace_out", ""),
        )
        if q:
            half = q // 2
            for d in grid:
                if not 0.0 <= d < half:
                    raise ConfigError(f"delta_grid: {d} outside [0, {half})")
        return cfg

    @classmethod
    def _build_bounds(cls, pairs):
        q = _get_int(pairs, "q", lo=2)
        n = _get_int(pairs, "n", lo=1)
        channel = pairs.get("channel", "")
        if channel not in ("constant", "memoryless"):
            raise ConfigError(f"channel: expected constant or memoryless, got {channel!r}")
        if "k" in pairs and "rate2" in pairs:
            raise ConfigError("k: give either k or rate2, not both")
        if "k" in pairs:
            k = _get_int(pairs, "k", lo=1, hi=n)
            rate2 = k / n * math.log2(q)
        else:
            rate2 = _get_float(pairs, "rate2")
            if not 0.0 < rate2 < math.log2(q):
                raise ConfigError(f"rate2: must lie in (0, log2 q), got {rate2}")
        grid = _get_floats(pairs, "delta_grid")
        if list(grid) != sorted(set(grid)):
            raise ConfigError("delta_grid: must be strictly increasing")
        kinds = ()
        if "kinds" in pairs:
            kinds = tuple(tok.strip() for tok in pairs["kinds"].split(",") if tok.strip())
            if not kinds:
                raise ConfigError("kinds: empty list")
        out = pairs.get("out", "")
        if not out:
            raise ConfigError("out: required")
        return cls(
            subcommand="bounds", q=q, n=n, channel=channel,
            delta_grid=grid, rate2=rate2, kinds=kinds, out=out,
        )

    @classmethod
    def _build_spectrum(cls, pairs):
        q = _get_int(pairs, "q", lo=2)
        d_v = _get_int(pairs, "d_v", lo=1)
        d_c = _get_int(pairs, "d_c", lo=2)
        method = pairs.get("method", "hayman")
        if method not in ("hayman", "exact"):
            raise ConfigError(f"method: expected hayman or exact, got {method!r}")
        n = _get_int(pairs, "n", default=0, lo=1)
        if method == "exact" and not n:
            raise ConfigError("n: required for method=exact")
        grid = _get_floats(pairs, "delta_grid")
        half = q // 2
        for d in grid:
            if not 0.0 < d < half:
                raise ConfigError(f"delta_grid: {d} outside (0, {half})")
        out = pairs.get("out", "")
        if not out:
            raise ConfigError("out: required")
        return cls(
            subcommand="spectrum", q=q, n=n, d_v=d_v, d_c=d_c,
            delta_grid=grid, method=method, out=out,
            random_out=pairs.get("random_out", ""),
        )

    @classmethod
    def _build_thresholds(cls, pairs):
        q = _get_int(pairs, "q", lo=2)
        d_v = _get_int(pairs, "d_v", lo=1)
        d_c = _get_int(pairs, "d_c", lo=2)
        decoders = _get_names(pairs, "decoders", ("smp", "bp", "shannon"))
        out = pairs.get("out", "")
        if not out:
            raise ConfigError("out: required")
        tol = _get_float(pairs, "tol", default=5e-4)
        if tol <= 0:
            raise ConfigError(f"tol: must be positive, got {tol}")
        return cls(
            subcommand="thresholds", q=q, d_v=d_v, d_c=d_c,
            decoders=decoders, out=out, tol=tol,
            population=_get_int(pairs, "population", default=100_000, lo=1),
            seed=_get_int(pairs, "seed", default=1, lo=0),
            l_max=_get_int(pairs, "l_max", default=0, lo=0),
        )

    @classmethod
    def _build_replay(cls, pairs):
        trace = pairs.get("trace", "")
        if not trace:
            raise ConfigError("trace: required")
        return cls(subcommand="replay", trace=trace)


# ---------------------------------------------------------------------------
# simulation records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimRecord:
    """One decoder at one grid point: counts and the Wilson interval."""

    delta: float
    decoder: str
    trials: int
    errors: int
    ci_half: float
    mean_iters: float
    ser: float = -1.0  # negative: not measured

    @property
    def bler(self) -> float:
        return self.errors / self.trials


def wilson_halfwidth(errors: int, trials: int, z: float = 1.959963984540054) -> float:
    """Half-width of the 95% Wilson score interval for errors/trials."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= errors <= trials:
        raise ValueError("errors must lie in [0, trials]")
    p = errors / trials
    z2 = z * z / trials
    return z * math.sqrt(p * (1.0 - p) / trials + z2 / (4 * trials)) / (1.0 + z2)


@lru_cache(maxsize=None)
def smp_schedule(q: int, d_v: int, d_c: int, delta: float, l_max: int) -> tuple:
    """xi per decoder iteration, from the DE recursion at this delta.

    The DE trajectory stops early on success or plateau; the decoder may
    run longer, so the last xi is held for the remaining iterations.
    """
    if l_max == 0:
        return ()
    traj = de_mod.smp_de(q, d_v, d_c, delta)
    xs = list(traj.xi)
    if not xs:
        raise RuntimeError("DE produced an empty schedule")
    if len(xs) < l_max:
        xs.extend([xs[-1]] * (l_max - len(xs)))
    return tuple(xs[:l_max])


def build_code(cfg: ExperimentConfig) -> TannerCode:
    """The code under test: parity file if given, else PEG plus labels
    drawn from the master seed's own stream."""
    if cfg.code_file:
        code = read_parity_file(cfg.code_file)
        for field_name, want, got in (
            ("q", cfg.q, code.q), ("n", cfg.n, code.n),
            ("d_v", cfg.d_v, code.d_v), ("d_c", cfg.d_c, code.d_c),
        ):
            if want and want != got:
                raise ConfigError(
                    f"{field_name}: config says {want}, code file has {got}"
                )
        return code
    spec = EnsembleSpec(cfg.q, cfg.n, cfg.d_v, cfg.d_c)
    return sample_code(spec, trial_stream(cfg.seed, 0))


def _point_master(seed: int, point: int) -> int:
    return (seed + (point + 1) * _GOLDEN) & _MASK64


def _build_channel(cfg: ExperimentConfig, delta: float) -> Channel | None:
    """None encodes the degenerate zero-error grid point."""
    if cfg.channel == "memoryless":
        if delta == 0.0:
            return None
        return memoryless_channel(cfg.n, delta, cfg.q)
    t_float = delta * cfg.n
    t = int(round(t_float))
    if abs(t_float - t) > 1e-9:
        raise ConfigError(
            f"delta_grid: constant_weight needs integral delta*n, got {t_float}"
        )
    if t == 0:
        return None
    return constant_weight_channel(cfg.n, t, cfg.q)


def _decode_wave(code, channel, cfg, decoders, master, start, stop):
    """Pure function of (config, wave): per-decoder wave statistics.

    Returns {decoder: (errors, iters_sum, symbol_err_sum, first_bad)}
    where first_bad is the first failing trial index, -1 if none.
    """
    q, n = code.q, code.n
    errs = np.empty((stop - start, n), dtype=np.int64)
    for i, trial in enumerate(range(start, stop)):
        errs[i] = channel.sample(trial_stream(master, trial))
    dd = channel.decoding_delta
    out = {}
    for dec in decoders:
        if dec == "bp":
            dist = solve_boltzmann(dd, q).dist
            lik = dist[(errs[:, :, None] - np.arange(q)[None, None, :]) % q]
            res = bp_decode_batch(code, lik, cfg.l_max)
        elif dec == "smp":
            params = SmpParams(smp_schedule(q, code.d_v, code.d_c, dd, cfg.l_max),
                               cfg.l_max)
            res = smp_decode_batch(code, errs, dd, params)
        else:
            res = lsf_decode_batch(code, errs, cfg.tau, cfg.l_max)
        bad = (res.estimates != 0).any(axis=1)
        first = int(np.argmax(bad)) + start if bad.any() else -1
        out[dec] = (
            int(bad.sum()),
            int(res.iterations_used.sum()),
            float((res.estimates != 0).mean(axis=1).sum()),
            first,
        )
    return out


def _simulate_point(code, cfg, delta, point_index):
    """All requested decoders at one grid point, wave by wave."""
    channel = _build_channel(cfg, delta)
    if channel is None:
        # deterministic channel: the all-zero error occurs with
        # probability 1, so every trial converges at iteration 0 and the
        # stopping rule runs to max_trials without new information
        recs = [
            SimRecord(delta, dec, cfg.max_trials, 0,
                      wilson_halfwidth(0, cfg.max_trials), 0.0,
                      0.0 if cfg.ser else -1.0)
            for dec in cfg.decoders
        ]
        return recs, {}
    master = _point_master(cfg.seed, point_index)
    n_waves = -(-cfg.max_trials // cfg.batch)
    agg = {dec: [0, 0, 0.0, -1] for dec in cfg.decoders}  # err, iters, ser, first
    stopped_at = {dec: None for dec in cfg.decoders}

    def active_now():
        return tuple(d for d in cfg.decoders if stopped_at[d] is None)

    def wave_bounds(w):
        return w * cfg.batch, min((w + 1) * cfg.batch, cfg.max_trials)

    pending = {}
    next_submit = 0
    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        for w in range(n_waves):
            while next_submit < min(w + cfg.workers + 1, n_waves):
                ws, we = wave_bounds(next_submit)
                pending[next_submit] = ex.submit(
                    _decode_wave, code, channel, cfg, active_now(),
                    master, ws, we,
                )
                next_submit += 1
            result = pending.pop(w).result()
            _, wave_end = wave_bounds(w)
            for dec in cfg.decoders:
                if stopped_at[dec] is not None:
                    continue
                e, it, se, first = result[dec]
                agg[dec][0] += e
                agg[dec][1] += it
                agg[dec][2] += se
                if agg[dec][3] < 0 and first >= 0:
                    agg[dec][3] = first
                if agg[dec][0] >= cfg.min_errors or wave_end >= cfg.max_trials:
                    stopped_at[dec] = wave_end
            if all(v is not None for v in stopped_at.values()):
                break
        for fut in pending.values():
            fut.cancel()
    recs = []
    first_bad = {}
    for dec in cfg.decoders:
        trials = stopped_at[dec]
        e, it, se, first = agg[dec]
        recs.append(SimRecord(
            delta, dec, trials, e,
            wilson_halfwidth(e, trials),
            it / trials,
            se / trials if cfg.ser else -1.0,
        ))
        if first >= 0:
            first_bad[dec] = first
    return recs, first_bad


def run_simulation(cfg: ExperimentConfig) -> list:
    """Zero-codeword Monte Carlo over the delta grid; list of SimRecord.

    Writes the CSV when cfg.out is set, one replay trace per grid point
    and decoder (the first failing trial) when cfg.trace_out is set.
    """
    if cfg.subcommand != "simulate":
        raise ConfigError(f"subcommand: expected simulate, got {cfg.subcommand!r}")
    code = build_code(cfg)
    cfg = _reconcile_code(cfg, code)
    if "smp" in cfg.decoders and (code.d_v is None or code.d_c is None):
        raise ConfigError("decoders: smp needs a regular code for its DE schedule")
    records = []
    traces = []
    for p, delta in enumerate(cfg.delta_grid):
        recs, first_bad = _simulate_point(code, cfg, delta, p)
        records.extend(recs)
        if cfg.trace_out:
            for dec, trial in sorted(first_bad.items()):
                traces.append((p, delta, dec, trial))
    if cfg.union_guard:
        _union_guard(code, cfg, records)
    if cfg.out:
        write_sim_csv(cfg.out, cfg, records)
    if cfg.trace_out and traces:
        os.makedirs(cfg.trace_out, exist_ok=True)
        code_path = os.path.join(cfg.trace_out, "code.txt")
        if not cfg.code_file:
            from .codes import write_parity_file
            write_parity_file(code, code_path)
        else:
            code_path = cfg.code_file
        for p, delta, dec, trial in traces:
            name = f"trace_p{p}_{dec}.txt"
            record_trace(
                os.path.join(cfg.trace_out, name), code_path, cfg,
                delta, dec, _point_master(cfg.seed, p), trial,
            )
    return records


def _reconcile_code(cfg: ExperimentConfig, code: TannerCode) -> ExperimentConfig:
    """Fill ensemble fields from a loaded code file."""
    if not cfg.code_file:
        return cfg
    from dataclasses import replace
    return replace(
        cfg, q=code.q, n=code.n,
        d_v=code.d_v or 0, d_c=code.d_c or 0,
        tau=cfg.tau if cfg.tau else (code.d_v or 3) / 2,
    )


def _union_guard(code, cfg, records):
    """Warn when a simulated point beats the code's exact union bound."""
    from .codes import code_cardinality, enumerate_codewords
    from .ring import lee_weight

    if code_cardinality(code) > 2_000_000:
        raise ConfigError("union_guard: code too large to enumerate")
    cws = enumerate_codewords(code)
    wtab = np.minimum(np.arange(code.q), code.q - np.arange(code.q))
    type_counts = {}
    for cw in cws:
        if not cw.any():
            continue
        counts = np.bincount(wtab[cw], minlength=code.q // 2 + 1)
        key = tuple(int(c) for c in counts)
        type_counts[key] = type_counts.get(key, 0) + 1
    enum = sorted(
        (tuple(c / code.n for c in key), mult)
        for key, mult in type_counts.items()
    )
    for rec in records:
        if rec.delta <= 0.0:
            continue
        log2_ub = bounds_mod.union_bound_exact(enum, code.n, rec.delta, code.q)
        floor = rec.bler - 3.0 * rec.ci_half
        if floor > 0.0 and log2_ub < math.log2(floor):
            warnings.warn(
                f"union bound 2^{log2_ub:.3f} below simulated "
                f"{rec.decoder} BLER {rec.bler:.3g} - 3ci at delta={rec.delta}",
                RuntimeWarning,
                stacklevel=2,
            )


def write_sim_csv(path, cfg: ExperimentConfig, records) -> None:
    """delta,decoder,trials,errors,bler,ci_half,mean_iters[,ser] rows.

    The header comment pins everything that shapes the numbers; worker
    count deliberately excluded, results must not depend on it.
    """
    meta = (
        f"# q={cfg.q} n={cfg.n} d_v={cfg.d_v} d_c={cfg.d_c}"
        f" channel={cfg.channel} decoders={','.join(cfg.decoders)}"
        f" l_max={cfg.l_max} tau={cfg.tau!r} seed={cfg.seed}"
        f" min_errors={cfg.min_errors} max_trials={cfg.max_trials}"
        f" batch={cfg.batch}"
    )
    cols = "delta,decoder,trials,errors,bler,ci_half,mean_iters"
    if cfg.ser:
        cols += ",ser"
    lines = [meta, cols]
    for r in records:
        row = (
            f"{r.delta!r},{r.decoder},{r.trials},{r.errors},"
            f"{r.bler!r},{r.ci_half!r},{r.mean_iters!r}"
        )
        if cfg.ser:
            row += f",{r.ser!r}"
        lines.append(row)
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# bound / spectrum / threshold dispatchers
# ---------------------------------------------------------------------------

def run_bounds(cfg: ExperimentConfig):
    """Evaluate the requested bound kinds; writes delta,log2_value,kind."""
    if cfg.subcommand != "bounds":
        raise ConfigError(f"subcommand: expected bounds, got {cfg.subcommand!r}")
    curve = bounds_mod.evaluate_curve(
        cfg.channel, cfg.q, cfg.n, cfg.rate2, cfg.delta_grid,
        kinds=list(cfg.kinds) or None,
    )
    curve.to_csv(cfg.out)
    return curve


def run_spectrum(cfg: ExperimentConfig) -> dict:
    """Ensemble growth-rate curve, plus the random-code reference when a
    second output path is configured."""
    if cfg.subcommand != "spectrum":
        raise ConfigError(f"subcommand: expected spectrum, got {cfg.subcommand!r}")
    grid = cfg.delta_grid
    if cfg.method == "hayman":
        rates = [
            spectrum_mod.growth_rate_spectrum(d, cfg.d_v, cfg.d_c, cfg.q)
            for d in grid
        ]
    else:
        rates = []
        for d in grid:
            w_float = d * cfg.n
            w = int(round(w_float))
            if abs(w_float - w) > 1e-9:
                raise ConfigError(
                    f"delta_grid: method=exact needs integral delta*n, got {w_float}"
                )
            cnt = spectrum_mod.avg_weight_enumerator(
                w, cfg.n, cfg.d_v, cfg.d_c, cfg.q
            )
            rates.append(cnt.log2 / cfg.n)
    spectrum_mod.write_spectrum_csv(
        cfg.out, grid, rates, cfg.q, cfg.d_v, cfg.d_c, cfg.method
    )
    out = {"spectrum": cfg.out}
    if cfg.random_out:
        rate2 = (1.0 - cfg.d_v / cfg.d_c) * math.log2(cfg.q)
        rc = [spectrum_mod.random_code_growth_rate(d, rate2, cfg.q) for d in grid]
        spectrum_mod.write_spectrum_csv(
            cfg.random_out, grid, rc, cfg.q, cfg.d_v, cfg.d_c, "exact"
        )
        out["random"] = cfg.random_out
    return out


_THRESH_HEADER = "q,d_v,d_c,decoder,delta_star,bracket_lo,bracket_hi"


def run_thresholds(cfg: ExperimentConfig) -> list:
    """Threshold rows, upserted into the results table keyed by
    (q, d_v, d_c, decoder); rewrites the table sorted by key."""
    if cfg.subcommand != "thresholds":
        raise ConfigError(f"subcommand: expected thresholds, got {cfg.subcommand!r}")
    table = {}
    if os.path.exists(cfg.out):
        with open(cfg.out) as fh:
            header = fh.readline().strip()
            if header != _THRESH_HEADER:
                raise ConfigError("out: existing file is not a threshold table")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                toks = line.split(",")
                key = (int(toks[0]), int(toks[1]), int(toks[2]), toks[3])
                table[key] = (float(toks[4]), float(toks[5]), float(toks[6]))
    fresh = []
    for dec in cfg.decoders:
        if dec == "shannon":
            rate2 = (1.0 - cfg.d_v / cfg.d_c) * math.log2(cfg.q)
            ds = de_mod.shannon_limit(cfg.q, rate2, tol=min(cfg.tol, 1e-9))
            row = (ds, ds, ds)
        else:
            res = de_mod.threshold_search(
                dec.upper(), cfg.q, cfg.d_v, cfg.d_c, tol=cfg.tol,
                population=cfg.population, seed=cfg.seed,
                l_max=cfg.l_max or None,
            )
            row = (res.delta_star, res.bracket[0], res.bracket[1])
        key = (cfg.q, cfg.d_v, cfg.d_c, dec)
        table[key] = row
        fresh.append((key, row))
    with open(cfg.out, "w", newline="") as fh:
        fh.write(_THRESH_HEADER + "\n")
        for key in sorted(table):
            q, d_v, d_c, dec = key
            ds, lo, hi = table[key]
            fh.write(f"{q},{d_v},{d_c},{dec},{ds!r},{lo!r},{hi!r}\n")
    return fresh


# ---------------------------------------------------------------------------
# replay traces
# ---------------------------------------------------------------------------

def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _canonical_hash(pairs: dict) -> str:
    body = "\n".join(f"{k}={pairs[k]}" for k in sorted(pairs))
    return hashlib.sha256(body.encode()).hexdigest()


def _result_hash(res: DecodeResult) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(res.estimate, dtype=np.int64).tobytes())
    h.update(b"|%d|%d" % (int(res.converged), res.iterations_used))
    return h.hexdigest()


def _decode_single(code, channel, pairs, error) -> DecodeResult:
    dec = pairs["decoder"]
    l_max = int(pairs["l_max"])
    dd = channel.decoding_delta
    y = error[None]
    if dec == "bp":
        dist = solve_boltzmann(dd, code.q).dist
        lik = dist[(y[:, :, None] - np.arange(code.q)[None, None, :]) % code.q]
        return bp_decode_batch(code, lik, l_max)[0]
    if dec == "smp":
        sched = tuple(float(tok) for tok in pairs["xi_schedule"].split(","))
        return smp_decode_batch(code, y, dd, SmpParams(sched, l_max))[0]
    if dec == "lsf":
        return lsf_decode_batch(code, y, float(pairs["tau"]), l_max)[0]
    raise TraceMismatch(f"unknown decoder {dec!r} in trace")


def record_trace(path, code_path, cfg: ExperimentConfig, delta, decoder,
                 master: int, trial: int) -> None:
    """Freeze one trial: code reference, error, decoder config, result hash."""
    code = read_parity_file(code_path)
    error = _build_channel(cfg, delta).sample(trial_stream(master, trial))
    pairs = {
        "version": "1",
        "code_file": os.path.basename(code_path)
        if os.path.dirname(code_path) == os.path.dirname(path) else code_path,
        "code_sha256": _sha256_file(code_path),
        "channel": cfg.channel,
        "delta": repr(float(delta)),
        "n": str(cfg.n),
        "q": str(cfg.q),
        "decoder": decoder,
        "l_max": str(cfg.l_max),
        "seed": str(master),
        "trial": str(trial),
        "error": error_to_str(error),
    }
    if decoder == "smp":
        sched = smp_schedule(cfg.q, cfg.d_v, cfg.d_c,
                             _build_channel(cfg, delta).decoding_delta, cfg.l_max)
        pairs["xi_schedule"] = ",".join(repr(x) for x in sched)
    if decoder == "lsf":
        pairs["tau"] = repr(cfg.tau)
    res = _decode_single(code, _build_channel(cfg, delta), pairs, error)
    pairs["result_sha256"] = _result_hash(res)
    pairs["trace_sha256"] = _canonical_hash(
        {k: v for k, v in pairs.items() if k != "trace_sha256"}
    )
    with open(path, "w", newline="") as fh:
        fh.write(format_kv(pairs))


def replay_trial(path) -> DecodeResult:
    """Bit-identical rerun of a recorded trial; refuses on any drift."""
    with open(path) as fh:
        pairs = parse_kv_text(fh.read())
    stored = pairs.get("trace_sha256", "")
    computed = _canonical_hash({k: v for k, v in pairs.items() if k != "trace_sha256"})
    if stored != computed:
        raise TraceMismatch(
            f"trace hash mismatch: stored {stored or '(missing)'}, computed {computed}"
        )
    code_path = pairs["code_file"]
    if not os.path.isabs(code_path):
        code_path = os.path.join(os.path.dirname(os.path.abspath(path)), code_path)
    if not os.path.exists(code_path):
        raise TraceMismatch(f"code file missing: {code_path}")
    have = _sha256_file(code_path)
    if have != pairs["code_sha256"]:
        raise TraceMismatch(
            f"code file hash mismatch: trace {pairs['code_sha256']}, file {have}"
        )
    code = read_parity_file(code_path)
    n, q = int(pairs["n"]), int(pairs["q"])
    delta = float(pairs["delta"])
    if pairs["channel"] == "memoryless":
        channel = memoryless_channel(n, delta, q)
    else:
        channel = constant_weight_channel(n, int(round(delta * n)), q)
    error = error_from_str(pairs["error"])
    resampled = channel.sample(trial_stream(int(pairs["seed"]), int(pairs["trial"])))
    if not np.array_equal(error, resampled):
        first = int(np.argmax(error != resampled))
        raise TraceMismatch(
            f"error vector drift at symbol {first}: "
            f"trace {error[first]}, resampled {resampled[first]}"
        )
    res = _decode_single(code, channel, pairs, error)
    have = _result_hash(res)
    if have != pairs["result_sha256"]:
        raise TraceMismatch(
            f"decode result mismatch: trace {pairs['result_sha256']}, rerun {have}"
        )
    return res
