import csv
import io
import json
import math

import pytest

from ensembleqc.bell import BellOutcome, DetectorModel, MeasurementConfig, acceptance_probability
from ensembleqc.harness import (
    Z_95,
    ConfigError,
    ExperimentSpec,
    TrialStats,
    binomial_halfwidth,
    csv_columns,
    emit,
    format_float,
    render,
    run_sweep,
    run_trials,
    sweep_grid,
    trial_rng,
)


def spec(**kw):
    kw.setdefault("seed", 7)
    return ExperimentSpec(**kw)


class TestValidation:
    @pytest.mark.parametrize(
        "kw",
        [
            {"protocol": "teleport"},
            {"trials": 0},
            {"seed": -1},
            {"seed": 2 ** 64},
            {"backend": "quantum"},
            {"efficiency": 1.5},
            {"dark_count_prob": 1.0},
            {"state": "phi"},
            {"protocol": "bell", "config": "random"},
            {"protocol": "cnot", "state": "0x"},
            {"protocol": "dj", "oracle": "F5"},
            {"protocol": "dj", "cnot": "magic"},
        ],
    )
    def test_rejected_before_running(self, kw):
        with pytest.raises(ConfigError):
            run_trials(spec(**kw))

    def test_defaults_valid(self):
        for protocol in ("bell", "chi", "cnot", "dj"):
            spec(protocol=protocol).validate()


class TestRunTrials:
    def test_bell_psi_plus_ideal(self):
        stats = run_trials(spec(protocol="bell", state="psi+", trials=10_000))
        assert stats.acceptance_rate == 1.0
        assert stats.verdicts["PsiPlus"] == 10_000
        assert stats.verdicts["PsiMinus"] == 0
        assert stats.conditional_fidelity_min == 1.0

    def test_dj_f3(self):
        stats = run_trials(spec(protocol="dj", oracle="F3", trials=100))
        assert stats.verdicts == {"Constant": 0, "Balanced": 100, "Discard": 0}

    def test_counts_sum(self):
        stats = run_trials(spec(protocol="bell", state="phi+", efficiency=0.7, dark_count_prob=0.05, trials=500))
        assert sum(stats.verdicts.values()) == stats.n_trials == 500
        assert stats.acceptance_rate == stats.n_accepted / stats.n_trials

    def test_no_accepted_runs(self):
        stats = run_trials(spec(protocol="bell", state="phi+", trials=50))
        assert stats.n_accepted == 0
        assert stats.conditional_fidelity_mean is None
        assert stats.verdicts["PhiSubspace"] == 50

    def test_ideal_bell_backend(self):
        stats = run_trials(spec(protocol="bell", state="phi-", backend="ideal", trials=100))
        assert stats.verdicts["PhiMinus"] == 100

    def test_chi_and_cnot(self):
        chi = run_trials(spec(protocol="chi", backend="ideal", trials=20))
        assert chi.acceptance_rate == 1.0 and chi.conditional_fidelity_min >= 1 - 1e-10
        cnot = run_trials(spec(protocol="cnot", state="1+", backend="ideal", trials=20))
        assert cnot.acceptance_rate == 1.0 and cnot.conditional_fidelity_min >= 1 - 1e-10

    def test_deterministic(self):
        s = spec(protocol="bell", state="psi-", efficiency=0.6, dark_count_prob=0.02, trials=2000)
        a, b = run_trials(s), run_trials(s)
        a.wall_time_seconds = b.wall_time_seconds = 0.0
        assert a == b

    def test_trial_streams_independent_of_order(self):
        assert trial_rng(3, 5).random() == trial_rng(3, 5).random()
        assert trial_rng(3, 5).random() != trial_rng(3, 6).random()

    def test_parallel_matches_serial(self):
        s = spec(protocol="bell", state="psi+", efficiency=0.8, trials=600)
        serial, parallel = run_trials(s), run_trials(s, workers=3)
        assert render(serial, timing=False) == render(parallel, timing=False)


class TestHalfwidth:
    def test_hand_case(self):
        # p = 0.8, n = 100: 1.96 * sqrt(0.16 / 100) = 1.96 * 0.04
        assert binomial_halfwidth(80, 100) == pytest.approx(Z_95 * 0.04, rel=1e-12)
        assert binomial_halfwidth(80, 100) == pytest.approx(0.0784, abs=1e-4)

    def test_degenerate(self):
        assert binomial_halfwidth(0, 10) == 0.0
        assert binomial_halfwidth(10, 10) == 0.0


class TestSweep:
    def test_grid(self):
        assert sweep_grid(0.5, 1.0, 0.1) == [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        assert sweep_grid(0.3, 0.3, 0.1) == [0.3]

    @pytest.mark.parametrize("args", [(0.5, 1.0, 0.0), (1.0, 0.5, 0.1)])
    def test_bad_grid(self, args):
        with pytest.raises(ConfigError):
            sweep_grid(*args)

    def test_out_of_range_values(self):
        with pytest.raises(ConfigError):
            run_sweep(spec(trials=10), "efficiency", 0.8, 1.2, 0.1)

    def test_bad_parameter(self):
        with pytest.raises(ConfigError):
            run_sweep(spec(trials=10), "trials", 1, 2, 1)

    def test_efficiency_matches_eta_squared(self):
        result = run_sweep(spec(protocol="bell", state="psi+", trials=4000), "efficiency", 0.5, 1.0, 0.1)
        assert len(result.rows) == 6
        for eta, row in zip(result.values, result.rows):
            p = eta ** 2
            sigma = math.sqrt(p * (1 - p) / row.n_trials)
            assert abs(row.acceptance_rate - p) <= 4 * sigma + 1e-12
            assert row.acceptance_rate == pytest.approx(
                acceptance_probability(BellOutcome.PSI_PLUS, MeasurementConfig.PSI, DetectorModel(eta)), abs=4 * sigma + 1e-12
            )

    def test_single_point_equals_run_trials(self):
        base = spec(protocol="bell", state="psi-", trials=300)
        sweep = run_sweep(base, "efficiency", 0.7, 0.7, 0.1)
        direct = run_trials(base.replace(efficiency=0.7))
        assert render(sweep.rows[0], timing=False) == render(direct, timing=False)

    def test_dj_error_rate_monotone_in_dark_counts(self):
        base = spec(protocol="dj", oracle="F2", efficiency=0.5, trials=3000)
        result = run_sweep(base, "dark_count_prob", 0.0, 0.01, 0.005)
        errors = [row.conditional_error_rate for row in result.rows]
        assert errors[0] == 0.0
        for row_a, row_b, ea, eb in zip(result.rows, result.rows[1:], errors, errors[1:]):
            sa = math.sqrt(max(ea, 1 / row_a.n_accepted) / row_a.n_accepted)
            sb = math.sqrt(max(eb, 1 / row_b.n_accepted) / row_b.n_accepted)
            assert eb >= ea - 3 * math.hypot(sa, sb)
        assert errors[-1] > errors[0]


@pytest.fixture(scope="module")
def stats():
    return run_trials(spec(protocol="bell", state="psi+", efficiency=0.9, trials=200))


class TestEmit:
    def test_json_round_trip(self, stats, tmp_path):
        path = tmp_path / "out.json"
        emit(stats, "json", path)
        back = TrialStats.from_dict(json.loads(path.read_text()))
        assert back == stats

    def test_json_schema(self, stats):
        data = json.loads(render(stats))
        assert set(data) == {
            "spec", "n_trials", "n_accepted", "acceptance_rate", "acceptance_halfwidth", "verdicts",
            "conditional_fidelity_mean", "conditional_fidelity_min", "wall_time_seconds",
        }
        assert data["verdicts"]["PsiMinus"] == 0

    def test_empty_verdicts_are_zero(self):
        text = render(run_trials(spec(protocol="bell", state="psi+", trials=10)))
        assert '"PsiMinus": 0' in text and '"Discard": 0' in text

    def test_csv_single(self, stats):
        rows = list(csv.reader(io.StringIO(render(stats, "csv"))))
        assert rows[0] == csv_columns(stats)
        assert len(rows) == 2
        record = dict(zip(rows[0], rows[1]))
        assert int(record["n_trials"]) == 200
        assert float(record["acceptance_rate"]) == stats.acceptance_rate
        assert record["verdicts.PsiMinus"] == "0"

    def test_csv_sweep_rows(self):
        result = run_sweep(spec(protocol="bell", trials=50), "efficiency", 0.6, 0.9, 0.1)
        rows = list(csv.reader(io.StringIO(render(result, "csv"))))
        assert len(rows) == 1 + 4

    def test_sweep_json(self):
        result = run_sweep(spec(protocol="bell", trials=50), "dark_count_prob", 0.0, 0.02, 0.01)
        data = json.loads(render(result))
        assert data["parameter"] == "dark_count_prob"
        assert [r["spec"]["dark_count_prob"] for r in data["rows"]] == [0.0, 0.01, 0.02]

    def test_seventeen_digits(self):
        assert format_float(0.1) == "0.10000000000000001"
        assert format_float(1.0) == "1.0"
        assert float(format_float(2 / 3)) == 2 / 3

    def test_timing_excluded(self, stats):
        assert json.loads(render(stats, timing=False))["wall_time_seconds"] == 0.0

    def test_io_error_has_path(self, stats, tmp_path):
        bad = tmp_path / "missing" / "out.json"
        with pytest.raises(OSError, match="missing"):
            emit(stats, "json", bad)

    def test_stdout(self, stats, capsys):
        emit(stats, "json")
        assert json.loads(capsys.readouterr().out)["n_trials"] == 200
