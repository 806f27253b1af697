import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qda import harness
from qda import quantum_core as qc
from qda.errors import InvalidInput

seeds = st.integers(0, 2 ** 32 - 1)


class TestSpec:
    def test_validation(self):
        with pytest.raises(InvalidInput):
            harness.ExperimentSpec("fly")
        with pytest.raises(InvalidInput):
            harness.ExperimentSpec("run-search", trials=0)
        with pytest.raises(InvalidInput):
            harness.ExperimentSpec("run-search", d=1)
        with pytest.raises(InvalidInput):
            harness.ExperimentSpec("run-search", mode="maybe")

    def test_knobs(self):
        spec = harness.ExperimentSpec("run-search", overrides={"diagonal": "false", "n": "7"})
        assert spec.knob("diagonal", True) is False
        assert spec.knob("n", 3) == 7
        assert spec.knob("missing", 0.5) == 0.5

    def test_search_overrides(self):
        spec = harness.ExperimentSpec("run-search", overrides={"noise_mean_factor": "6",
                                                               "n_override": "12"})
        cfg = harness._search_config(spec)
        assert cfg.noise_mean_factor == 6.0 and cfg.n_override == 12

    def test_parse_overrides(self):
        assert harness._parse_overrides(["a=1", " b = x=y "]) == {"a": "1", "b": "x=y"}
        with pytest.raises(InvalidInput):
            harness._parse_overrides(["oops"])


class TestStatistics:
    def test_clopper_pearson_values(self):
        rate, lo, hi = harness.proportion_ci(0, 10)
        assert rate == 0 and lo == 0
        # upper limit solves (1 - p)^10 = 0.025
        assert hi == pytest.approx(1 - 0.025 ** 0.1, abs=1e-9)
        rate, lo, hi = harness.proportion_ci(10, 10)
        assert hi == 1 and lo == pytest.approx(0.025 ** 0.1, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 500), st.data())
    def test_interval_contains_rate(self, n, data):
        k = data.draw(st.integers(0, n))
        rate, lo, hi = harness.proportion_ci(k, n)
        assert 0 <= lo <= rate <= hi <= 1

    def test_fit_exact_curve(self):
        ms = [2, 4, 8, 16]
        vals = [3 + 5 * math.log2(m) ** 2 for m in ms]
        coef, resid = harness.fit_log_squared(ms, vals)
        assert coef == pytest.approx((3.0, 5.0))
        assert resid < 1e-12
        coef, _ = harness.fit_log_squared(ms, [5 * math.log2(m) ** 2 for m in ms], intercept=False)
        assert coef == pytest.approx((5.0,))

    def test_fit_rejects_linear_growth(self):
        ms = [2, 4, 8, 16, 32]
        _, resid = harness.fit_log_squared(ms, [2.0 ** m for m in ms])
        assert resid > 0.25


class TestGenerators:
    @pytest.mark.parametrize("kind", ["random-events", "promise", "planted-search",
                                      "hypothesis-set", "adversarial-stream"])
    def test_same_seed_same_instance(self, kind):
        a = harness.generate_instance(kind, 2, 4, 17)
        b = harness.generate_instance(kind, 2, 4, 17)
        np.testing.assert_array_equal(a.rho.matrix, b.rho.matrix)
        for x, y in zip(a.events, b.events):
            np.testing.assert_array_equal(x.matrix, y.matrix)
        assert a.thresholds == b.thresholds and a.metadata == b.metadata

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(1, 6))
    def test_promise_plants_a_high_event(self, seed, m):
        inst = harness.generate_instance("promise", 2, m, seed)
        assert inst.expectations()[inst.metadata["planted"]] >= 0.75 - 1e-12

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(1, 4), st.sampled_from(["above", "below"]))
    def test_planted_search_answers(self, seed, m, answer):
        inst = harness.generate_instance("planted-search", 2, m, seed, answer=answer,
                                         epsilon=0.25)
        ex, th = inst.expectations(), np.array(inst.thresholds)
        planted = inst.metadata.get("planted")
        for i in range(m):
            if i == planted:
                assert ex[i] > th[i]
            else:
                assert ex[i] <= th[i] - 0.25 + 1e-12 or th[i] == 1.0

    @settings(max_examples=20, deadline=None)
    @given(seeds, st.integers(2, 4), st.booleans())
    def test_hypothesis_separation(self, seed, m, diagonal):
        inst = harness.generate_instance("hypothesis-set", 2, m, seed, alpha_min=0.2,
                                         noise=0.1, diagonal=diagonal)
        hyp = inst.hypotheses
        for i in range(m):
            for j in range(i + 1, m):
                assert qc.trace_distance(hyp[i], hyp[j]) >= 0.2
        planted = hyp[inst.metadata["planted"]]
        assert qc.trace_distance(inst.rho, planted) <= 0.1 + 1e-9

    def test_infeasible_separation(self):
        with pytest.raises(InvalidInput):
            harness.generate_instance("hypothesis-set", 2, 6, 0, alpha_min=0.9, diagonal=True)

    def test_adversary_is_a_function_of_history(self):
        inst = harness.generate_instance("adversarial-stream", 2, 5, 3)
        e1, t1 = inst.adversary(2, ["pass", "pass"])
        e2, t2 = inst.adversary(2, ["pass", "pass"])
        assert e1 is e2 and t1 == t2
        choices = {id(inst.adversary(0, h)[0]) for h in ([], [0.1], [0.2], [0.37])}
        assert len(choices) > 1

    def test_unknown_kind(self):
        with pytest.raises(InvalidInput):
            harness.generate_instance("mystery", 2, 2, 0)


class TestRuns:
    def test_deterministic_records(self):
        spec = harness.ExperimentSpec("run-search", m=3, trials=5, seed=9)
        a, b = harness.run_experiment(spec), harness.run_experiment(spec)
        assert a.rows == b.rows and a.rates == b.rates and a.copies_used == b.copies_used

    def test_record_counts(self):
        rec = harness.run_experiment(harness.ExperimentSpec("run-decision", m=2, trials=4))
        assert len(rec.rows) == 4
        for r in rec.rates.values():
            assert 0 <= r["ci_low"] <= r["rate"] <= r["ci_high"] <= 1

    def test_sweep_shape(self):
        rec = harness.run_experiment(harness.ExperimentSpec("sweep", trials=1))
        assert [r["m"] for r in rec.rows] == [2, 4, 8]
        assert rec.passed and rec.notes["max_residual"] < 0.25

    def test_write_outputs(self, tmp_path):
        rec = harness.run_experiment(harness.ExperimentSpec("sweep", trials=1))
        csv_path, json_path = harness.write_outputs(rec, tmp_path / "sub" / "sweep")
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("m,copies_used") and len(lines) == 4
        summary = json.loads(json_path.read_text())
        assert summary["experiment"] == "sweep" and summary["trials"] == 3


class TestCli:
    def test_pass(self, tmp_path, capsys):
        out = tmp_path / "cls"
        assert harness.main(["--cmd", "verify-quantum", "--trials", "5", "--out", str(out)]) == 0
        assert (tmp_path / "cls.csv").exists() and (tmp_path / "cls.json").exists()
        assert json.loads(capsys.readouterr().out)["passed"] is True

    def test_selection_rate_one(self, capsys):
        code = harness.main(["--cmd", "run-search", "--m", "1", "--trials", "30"])
        summary = json.loads(capsys.readouterr().out)
        assert summary["rates"]["correct"]["rate"] == 1.0
        # 30/30 puts the wrong-rate upper bound at 1 - 0.025^(1/30) < delta
        assert code == harness.EXIT_PASS

    def test_too_few_trials_fail(self, capsys):
        # 5/5 correct still leaves the wrong-rate upper bound near 0.52
        code = harness.main(["--cmd", "run-search", "--m", "1", "--trials", "5"])
        summary = json.loads(capsys.readouterr().out)
        assert summary["rates"]["wrong"]["ci_high"] > 0.2
        assert code == harness.EXIT_FAIL

    def test_invalid_flags(self):
        assert harness.main(["--cmd", "nope"]) == harness.EXIT_INVALID
        assert harness.main(["--cmd", "run-search", "--trials", "0"]) == harness.EXIT_INVALID
        assert harness.main(["--cmd", "run-search", "--set", "broken"]) == harness.EXIT_INVALID

    def test_help_exits_cleanly(self, capsys):
        assert harness.main(["--help"]) == harness.EXIT_PASS
        assert "--cmd" in capsys.readouterr().out

    def test_resource_cap(self):
        code = harness.main(["--cmd", "run-search", "--trials", "1", "--set", "diagonal=false"])
        assert code == harness.EXIT_CAP

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        code = harness.main(["--cmd", "sweep", "--trials", "1", "--out", str(blocker / "res")])
        assert code == harness.EXIT_UNWRITABLE

    def test_codes_distinct(self):
        codes = [harness.EXIT_PASS, harness.EXIT_FAIL, harness.EXIT_INVALID, harness.EXIT_CAP,
                 harness.EXIT_UNWRITABLE]
        assert len(set(codes)) == len(codes)
