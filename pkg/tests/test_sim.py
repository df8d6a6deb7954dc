"""Harness tests: config parsing, stopping rule, determinism across
worker counts, trace record/replay, and the CSV dispatchers.

Runs are kept tiny (short codes, few errors) so the whole file stays in
the seconds range; the statistical quality of the estimates is not the
subject here, the bookkeeping is.
"""
import math
import os
import warnings

import numpy as np
import pytest

from leeldpc import de
from leeldpc.bounds import evaluate_curve
from leeldpc.codes import EnsembleSpec, sample_code, write_parity_file
from leeldpc.channels import trial_stream
from leeldpc.sim import (
    ConfigError,
    ExperimentConfig,
    SimRecord,
    TraceMismatch,
    _canonical_hash,
    _union_guard,
    build_code,
    format_kv,
    parse_kv_text,
    replay_trial,
    run_bounds,
    run_simulation,
    run_spectrum,
    run_thresholds,
    smp_schedule,
    wilson_halfwidth,
    write_sim_csv,
)
from leeldpc.spectrum import (
    avg_weight_enumerator,
    growth_rate_spectrum,
    random_code_growth_rate,
)


def sim_pairs(**over):
    base = {
        "q": "5", "n": "30", "d_v": "3", "d_c": "6",
        "delta_grid": "0.05", "decoders": "lsf",
        "l_max": "20", "min_errors": "5", "max_trials": "600",
        "batch": "100", "seed": "7",
    }
    base.update(over)
    return base


class TestKvText:
    def test_parse_skips_comments_and_blanks(self):
        pairs = parse_kv_text("# header\n\nq=5  # trailing\n n = 30 \n")
        assert pairs == {"q": "5", "n": "30"}

    def test_value_may_contain_equals(self):
        assert parse_kv_text("expr=a=b")["expr"] == "a=b"

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate key 'q'"):
            parse_kv_text("q=5\nq=7")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_kv_text("q=5\njust words")

    def test_empty_key_rejected(self):
        with pytest.raises(ConfigError, match="empty key"):
            parse_kv_text("=5")

    def test_format_sorts_keys(self):
        text = format_kv({"b": "2", "a": "1"})
        assert text == "a=1\nb=2\n"
        assert parse_kv_text(text) == {"a": "1", "b": "2"}


class TestConfigValidation:
    def test_simulate_defaults(self):
        cfg = ExperimentConfig.from_pairs("simulate", {
            "q": "7", "n": "64", "d_v": "3", "d_c": "6",
            "delta_grid": "0.1,0.2", "decoders": "bp,smp",
        })
        assert cfg.l_max == 100
        assert cfg.min_errors == 100
        assert cfg.max_trials == 10_000_000
        assert cfg.batch == 1000
        assert cfg.seed == 1
        assert cfg.tau == 1.5
        assert cfg.delta_grid == (0.1, 0.2)

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="unknown keys for simulate: qq"):
            ExperimentConfig.from_pairs("simulate", sim_pairs(qq="3"))

    def test_bad_int_names_field(self):
        with pytest.raises(ConfigError, match="min_errors: not an integer"):
            ExperimentConfig.from_pairs("simulate", sim_pairs(min_errors="five"))

    def test_delta_outside_half_ring(self):
        with pytest.raises(ConfigError, match=r"delta_grid: 2\.5"):
            ExperimentConfig.from_pairs("simulate", sim_pairs(delta_grid="0.1,2.5"))

    def test_bad_decoder_listed(self):
        with pytest.raises(ConfigError, match="decoders: unknown entry 'viterbi'"):
            ExperimentConfig.from_pairs("simulate", sim_pairs(decoders="bp,viterbi"))

    def test_repeated_decoder(self):
        with pytest.raises(ConfigError, match="repeated"):
            ExperimentConfig.from_pairs("simulate", sim_pairs(decoders="bp,bp"))

    def test_bounds_k_and_rate2_conflict(self):
        with pytest.raises(ConfigError, match="either k or rate2"):
            ExperimentConfig.from_pairs("bounds", {
                "q": "7", "n": "100", "k": "50", "rate2": "1.0",
                "channel": "memoryless", "delta_grid": "0.4", "out": "x",
            })

    def test_bounds_k_converts_to_bits(self):
        cfg = ExperimentConfig.from_pairs("bounds", {
            "q": "7", "n": "100", "k": "50",
            "channel": "memoryless", "delta_grid": "0.4", "out": "x",
        })
        assert cfg.rate2 == pytest.approx(0.5 * math.log2(7))

    def test_bounds_grid_must_increase(self):
        with pytest.raises(ConfigError, match="strictly increasing"):
            ExperimentConfig.from_pairs("bounds", {
                "q": "7", "n": "100", "k": "50", "channel": "memoryless",
                "delta_grid": "0.4,0.3", "out": "x",
            })

    def test_spectrum_exact_needs_n(self):
        with pytest.raises(ConfigError, match="n: required for method=exact"):
            ExperimentConfig.from_pairs("spectrum", {
                "q": "4", "d_v": "3", "d_c": "6",
                "delta_grid": "0.5", "method": "exact", "out": "x",
            })

    def test_spectrum_delta_domain_open(self):
        with pytest.raises(ConfigError, match="delta_grid: 0.0"):
            ExperimentConfig.from_pairs("spectrum", {
                "q": "4", "d_v": "3", "d_c": "6",
                "delta_grid": "0.0,0.5", "out": "x",
            })

    def test_thresholds_tol_positive(self):
        with pytest.raises(ConfigError, match="tol: must be positive"):
            ExperimentConfig.from_pairs("thresholds", {
                "q": "5", "d_v": "3", "d_c": "6", "decoders": "smp",
                "out": "x", "tol": "-1",
            })

    def test_replay_needs_trace(self):
        with pytest.raises(ConfigError, match="trace: required"):
            ExperimentConfig.from_pairs("replay", {})

    def test_unknown_subcommand(self):
        with pytest.raises(ConfigError, match="unknown subcommand"):
            ExperimentConfig.from_pairs("train", {})


class TestWilson:
    @pytest.mark.parametrize("errors,trials", [(0, 50), (5, 100), (99, 100), (37, 412)])
    def test_halfwidth_matches_quadratic_roots(self, errors, trials):
        # the Wilson endpoints solve (p - phat)^2 = z^2 p (1-p) / n;
        # recover them as polynomial roots instead of the closed form
        z = 1.959963984540054
        phat = errors / trials
        a = 1.0 + z * z / trials
        b = -(2 * phat + z * z / trials)
        c = phat * phat
        roots = np.roots([a, b, c])
        want = (roots.max() - roots.min()) / 2
        assert wilson_halfwidth(errors, trials) == pytest.approx(want.real, rel=1e-12)

    def test_zero_errors_still_positive(self):
        assert wilson_halfwidth(0, 1000) > 0.0

    def test_coverage_near_nominal(self):
        rng = np.random.default_rng(3)
        p, trials = 0.1, 400
        hits = 0
        draws = 2000
        for k in rng.binomial(trials, p, size=draws):
            phat = k / trials
            z2 = 1.959963984540054 ** 2 / trials
            center = (phat + z2 / 2) / (1 + z2)
            if abs(center - p) <= wilson_halfwidth(int(k), trials):
                hits += 1
        assert 0.92 <= hits / draws <= 0.99

    def test_input_validation(self):
        with pytest.raises(ValueError):
            wilson_halfwidth(5, 0)
        with pytest.raises(ValueError):
            wilson_halfwidth(7, 5)


class TestSmpSchedule:
    def test_prefix_matches_de_trajectory(self):
        traj = de.smp_de(5, 3, 6, 0.08)
        sched = smp_schedule(5, 3, 6, 0.08, len(traj.xi))
        assert list(sched) == traj.xi

    def test_extends_by_holding_last_value(self):
        traj = de.smp_de(5, 3, 6, 0.08)
        L = len(traj.xi) + 7
        sched = smp_schedule(5, 3, 6, 0.08, L)
        assert len(sched) == L
        assert all(x == traj.xi[-1] for x in sched[len(traj.xi):])

    def test_zero_iterations(self):
        assert smp_schedule(5, 3, 6, 0.08, 0) == ()


class TestBuildCode:
    def test_ensemble_build_is_seed_deterministic(self):
        cfg = ExperimentConfig.from_pairs("simulate", sim_pairs())
        a = build_code(cfg)
        b = build_code(cfg)
        assert np.array_equal(a.edge_label, b.edge_label)
        assert a.d_v == 3 and a.d_c == 6

    def test_different_seed_different_labels(self):
        a = build_code(ExperimentConfig.from_pairs("simulate", sim_pairs(seed="1")))
        b = build_code(ExperimentConfig.from_pairs("simulate", sim_pairs(seed="2")))
        assert not np.array_equal(a.edge_label, b.edge_label)

    def test_code_file_mismatch_diagnosed(self, tmp_path):
        code = sample_code(EnsembleSpec(5, 30, 3, 6), trial_stream(1, 0))
        path = tmp_path / "code.txt"
        write_parity_file(code, path)
        with pytest.raises(ConfigError, match="q: config says 7"):
            run_simulation(ExperimentConfig.from_pairs(
                "simulate", sim_pairs(q="7", code_file=str(path)),
            ))


class TestRunSimulation:
    def test_delta_zero_is_errorless_without_decoding(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate",
            sim_pairs(delta_grid="0", decoders="bp,smp,lsf", max_trials="10000000"),
        )
        recs = run_simulation(cfg)
        assert len(recs) == 3
        for r in recs:
            assert r.errors == 0
            assert r.trials == 10_000_000
            assert r.bler == 0.0
            assert r.mean_iters == 0.0

    def test_stopping_rule_at_wave_boundary(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate",
            sim_pairs(delta_grid="0.25,1.2", decoders="lsf,bp",
                      min_errors="5", max_trials="600", batch="100"),
        )
        recs = run_simulation(cfg)
        for r in recs:
            assert r.trials % cfg.batch == 0 or r.trials == cfg.max_trials
            if r.trials < cfg.max_trials:
                assert r.errors >= cfg.min_errors
                # ... and the previous wave had not yet reached the quota,
                # else it would have stopped there
            else:
                assert r.trials == cfg.max_trials

    def test_hopeless_point_stops_after_one_wave(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate", sim_pairs(delta_grid="1.9", decoders="lsf"),
        )
        rec, = run_simulation(cfg)
        assert rec.trials == cfg.batch
        assert rec.errors > rec.trials * 0.9

    def test_deterministic_and_worker_independent(self, tmp_path):
        outs = []
        for workers in ("1", "3"):
            out = tmp_path / f"w{workers}.csv"
            cfg = ExperimentConfig.from_pairs(
                "simulate",
                sim_pairs(delta_grid="0.3,1.0", decoders="bp,smp,lsf",
                          workers=workers, out=str(out), min_errors="8",
                          max_trials="900", batch="150"),
            )
            run_simulation(cfg)
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        assert b"workers" not in outs[0]

    def test_records_cover_grid_times_decoders_in_order(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate", sim_pairs(delta_grid="0.3,0.9", decoders="smp,lsf"),
        )
        recs = run_simulation(cfg)
        assert [(r.delta, r.decoder) for r in recs] == [
            (0.3, "smp"), (0.3, "lsf"), (0.9, "smp"), (0.9, "lsf"),
        ]

    def test_ser_column(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate", sim_pairs(delta_grid="1.0", ser="true"),
        )
        rec, = run_simulation(cfg)
        assert 0.0 < rec.ser <= rec.bler

    def test_ser_unmeasured_sentinel(self):
        cfg = ExperimentConfig.from_pairs("simulate", sim_pairs(delta_grid="1.0"))
        rec, = run_simulation(cfg)
        assert rec.ser < 0

    def test_constant_weight_channel_runs(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate",
            sim_pairs(channel="constant_weight", delta_grid="0.2,1.0"),
        )
        recs = run_simulation(cfg)
        assert recs[0].bler < recs[1].bler

    def test_constant_weight_needs_integral_radius(self):
        cfg = ExperimentConfig.from_pairs(
            "simulate",
            sim_pairs(channel="constant_weight", delta_grid="0.105"),
        )
        with pytest.raises(ConfigError, match="integral delta\\*n"):
            run_simulation(cfg)

    def test_csv_shape(self, tmp_path):
        out = tmp_path / "sim.csv"
        cfg = ExperimentConfig.from_pairs(
            "simulate", sim_pairs(delta_grid="0,1.0", decoders="lsf",
                                  out=str(out), ser="true"),
        )
        recs = run_simulation(cfg)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# q=5 n=30 d_v=3 d_c=6 channel=memoryless")
        assert lines[1] == "delta,decoder,trials,errors,bler,ci_half,mean_iters,ser"
        assert len(lines) == 2 + len(recs)
        row = lines[2].split(",")
        assert row[0] == "0.0" and row[1] == "lsf"
        assert float(row[4]) == recs[0].bler


class TestUnionGuard:
    def make_code(self):
        return sample_code(EnsembleSpec(5, 8, 2, 4), trial_stream(3, 0))

    def test_consistent_point_passes_silently(self):
        code = self.make_code()
        rec = SimRecord(0.2, "bp", 1000, 2, wilson_halfwidth(2, 1000), 3.0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            _union_guard(code, None, [rec])

    def test_impossible_point_warns(self):
        code = self.make_code()
        rec = SimRecord(0.05, "bp", 100000, 99000,
                        wilson_halfwidth(99000, 100000), 3.0)
        with pytest.warns(RuntimeWarning, match="union bound"):
            _union_guard(code, None, [rec])


class TestTraceReplay:
    def run_with_traces(self, tmp_path):
        cfg = ExperimentConfig.from_pairs(
            "simulate",
            sim_pairs(delta_grid="1.0", decoders="bp,smp,lsf",
                      trace_out=str(tmp_path / "traces"), min_errors="3",
                      max_trials="200", batch="50"),
        )
        run_simulation(cfg)
        traces = sorted((tmp_path / "traces").glob("trace_*.txt"))
        assert len(traces) == 3
        return traces

    def test_replay_reproduces_failing_trials(self, tmp_path):
        for trace in self.run_with_traces(tmp_path):
            res = replay_trial(trace)
            again = replay_trial(trace)
            assert np.array_equal(res.estimate, again.estimate)
            assert res.estimate.any()  # it was recorded as a block error

    def test_replay_insensitive_to_cwd(self, tmp_path, monkeypatch):
        trace = self.run_with_traces(tmp_path)[0]
        monkeypatch.chdir(tmp_path.parent)
        assert replay_trial(str(trace)).iterations_used >= 0

    def test_corrupted_body_refused(self, tmp_path):
        trace = self.run_with_traces(tmp_path)[0]
        text = trace.read_text().replace("trial=", "trial=9")
        trace.write_text(text)
        with pytest.raises(TraceMismatch, match="trace hash mismatch"):
            replay_trial(trace)

    def test_missing_hash_refused(self, tmp_path):
        trace = self.run_with_traces(tmp_path)[0]
        lines = [ln for ln in trace.read_text().splitlines()
                 if not ln.startswith("trace_sha256=")]
        trace.write_text("\n".join(lines) + "\n")
        with pytest.raises(TraceMismatch, match="stored \\(missing\\)"):
            replay_trial(trace)

    def test_tampered_code_file_refused(self, tmp_path):
        trace = self.run_with_traces(tmp_path)[0]
        code_path = tmp_path / "traces" / "code.txt"
        code_path.write_text(code_path.read_text() + "\n")
        with pytest.raises(TraceMismatch, match="code file hash mismatch"):
            replay_trial(trace)

    def test_wrong_result_hash_refused(self, tmp_path):
        trace = self.run_with_traces(tmp_path)[0]
        pairs = parse_kv_text(trace.read_text())
        pairs["result_sha256"] = "0" * 64
        pairs["trace_sha256"] = _canonical_hash(
            {k: v for k, v in pairs.items() if k != "trace_sha256"}
        )
        trace.write_text(format_kv(pairs))
        with pytest.raises(TraceMismatch, match="decode result mismatch"):
            replay_trial(trace)


class TestRunBounds:
    def test_rows_match_direct_evaluation(self, tmp_path):
        out = tmp_path / "b.csv"
        cfg = ExperimentConfig.from_pairs("bounds", {
            "q": "7", "n": "64", "k": "32", "channel": "memoryless",
            "delta_grid": "0.5,0.7", "kinds": "rcu-exact,sphere-packing",
            "out": str(out),
        })
        run_bounds(cfg)
        want = evaluate_curve("memoryless", 7, 64, 0.5 * math.log2(7),
                              (0.5, 0.7), kinds=["rcu-exact", "sphere-packing"])
        lines = out.read_text().splitlines()
        assert lines[0] == "delta,log2_value,kind"
        rows = [ln.split(",") for ln in lines[1:]]
        assert len(rows) == 4
        for (d, v, kind), (dw, vw, kw) in zip(rows, want.points):
            assert float(d) == dw and float(v) == vw and kind == kw

    def test_constant_channel_kind(self, tmp_path):
        out = tmp_path / "b.csv"
        cfg = ExperimentConfig.from_pairs("bounds", {
            "q": "5", "n": "20", "k": "10", "channel": "constant",
            "delta_grid": "0.5,1.0", "kinds": "rcu-ml-exact", "out": str(out),
        })
        curve = run_bounds(cfg)
        assert [k for k in curve.kinds()] == ["rcu-ml-exact"]


class TestRunSpectrum:
    def test_hayman_and_random_reference(self, tmp_path):
        out = tmp_path / "s.csv"
        rnd = tmp_path / "r.csv"
        cfg = ExperimentConfig.from_pairs("spectrum", {
            "q": "4", "d_v": "3", "d_c": "6", "delta_grid": "0.4,1.0",
            "out": str(out), "random_out": str(rnd),
        })
        paths = run_spectrum(cfg)
        assert paths == {"spectrum": str(out), "random": str(rnd)}
        srows = out.read_text().splitlines()
        assert srows[0] == "# q=4 d_v=3 d_c=6 method=hayman"
        got = [float(r.split(",")[1]) for r in srows[2:]]
        assert got[0] == growth_rate_spectrum(0.4, 3, 6, 4)
        rrows = rnd.read_text().splitlines()
        rate2 = 0.5 * math.log2(4)
        assert float(rrows[2].split(",")[1]) == random_code_growth_rate(0.4, rate2, 4)

    def test_exact_method_small_code(self, tmp_path):
        out = tmp_path / "s.csv"
        cfg = ExperimentConfig.from_pairs("spectrum", {
            "q": "3", "n": "8", "d_v": "2", "d_c": "4",
            "delta_grid": "0.25,0.5", "method": "exact", "out": str(out),
        })
        run_spectrum(cfg)
        rows = out.read_text().splitlines()
        assert rows[0] == "# q=3 d_v=2 d_c=4 method=exact"
        want = avg_weight_enumerator(2, 8, 2, 4, 3).log2 / 8
        assert float(rows[2].split(",")[1]) == pytest.approx(want, rel=1e-12)

    def test_exact_method_needs_integral_weight(self, tmp_path):
        cfg = ExperimentConfig.from_pairs("spectrum", {
            "q": "3", "n": "8", "d_v": "2", "d_c": "4",
            "delta_grid": "0.3", "method": "exact",
            "out": str(tmp_path / "s.csv"),
        })
        with pytest.raises(ConfigError, match="integral delta\\*n"):
            run_spectrum(cfg)


class TestRunThresholds:
    def test_shannon_row_and_upsert(self, tmp_path):
        out = tmp_path / "t.csv"
        cfg5 = ExperimentConfig.from_pairs("thresholds", {
            "q": "5", "d_v": "3", "d_c": "6", "decoders": "shannon",
            "out": str(out),
        })
        run_thresholds(cfg5)
        cfg7 = ExperimentConfig.from_pairs("thresholds", {
            "q": "7", "d_v": "3", "d_c": "6", "decoders": "shannon",
            "out": str(out),
        })
        run_thresholds(cfg7)
        # rerun q=5: replaces its row rather than duplicating
        run_thresholds(cfg5)
        lines = out.read_text().splitlines()
        assert lines[0] == "q,d_v,d_c,decoder,delta_star,bracket_lo,bracket_hi"
        assert len(lines) == 3
        ds5 = float(lines[1].split(",")[4])
        ds7 = float(lines[2].split(",")[4])
        assert ds5 == pytest.approx(de.shannon_limit(5, 0.5 * math.log2(5)), abs=1e-9)
        assert ds7 == pytest.approx(de.shannon_limit(7, 0.5 * math.log2(7)), abs=1e-9)

    def test_smp_row_brackets_threshold(self, tmp_path):
        out = tmp_path / "t.csv"
        cfg = ExperimentConfig.from_pairs("thresholds", {
            "q": "5", "d_v": "3", "d_c": "6", "decoders": "smp",
            "out": str(out), "tol": "0.002",
        })
        (key, (ds, lo, hi)), = run_thresholds(cfg)
        assert key == (5, 3, 6, "smp")
        assert lo <= ds <= hi
        assert hi - lo <= 0.002
        assert ds == pytest.approx(0.1039, abs=0.003)

    def test_foreign_table_rejected(self, tmp_path):
        out = tmp_path / "t.csv"
        out.write_text("delta,log2_value,kind\n")
        cfg = ExperimentConfig.from_pairs("thresholds", {
            "q": "5", "d_v": "3", "d_c": "6", "decoders": "shannon",
            "out": str(out),
        })
        with pytest.raises(ConfigError, match="not a threshold table"):
            run_thresholds(cfg)
