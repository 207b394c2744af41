import math

import numpy as np
import pytest

from conftest import ket_sum
from ensembleqc.bell import DetectorModel
from ensembleqc.dj import (
    AUX,
    QUERY,
    CnotKind,
    DJBackend,
    DJVerdict,
    OracleForm,
    OracleId,
    WorkingState,
    apply_oracle,
    decomposition_matrix,
    expected_verdict,
    oracle_unitary,
    phase_pattern,
    prepare_dj_input,
    run_dj,
    verify_oracle_equivalence,
)
from ensembleqc.fock import ModeRegister, fidelity, inner_product, total_excitation, vacuum_state
from ensembleqc.qubits import logical_view, prepare_entangled, prepare_logical
from ensembleqc.teleport import MeasurementBackend

S = 1 / math.sqrt(2)
MINUS = np.array([S, -S])

# query factor after each oracle, written out by hand from f
AFTER_ORACLE = {
    OracleId.F1: np.array([S, S]),
    OracleId.F2: np.array([-S, -S]),
    OracleId.F3: np.array([S, -S]),
    OracleId.F4: np.array([-S, S]),
}

BACKENDS = [
    DJBackend(OracleForm.DIRECT),
    DJBackend(OracleForm.DECOMPOSED, CnotKind.DIRECT),
    DJBackend(OracleForm.DECOMPOSED, CnotKind.TELEPORTED),
]
BACKEND_IDS = ["direct", "decomposed-direct", "decomposed-teleported"]


@pytest.fixture(scope="module")
def dj_input():
    return prepare_dj_input(vacuum_state(ModeRegister.for_ensembles([QUERY, AUX])))


def after_oracle(state, oracle, backend, seed=0):
    return apply_oracle(WorkingState(state), oracle, backend, np.random.default_rng(seed))


class TestInput:
    def test_amplitudes(self, dj_input):
        r = dj_input.register
        expected = ket_sum(r, [(0.5, ["h9", "h10"]), (-0.5, ["h9", "v10"]), (0.5, ["v9", "h10"]), (-0.5, ["v9", "v10"])])
        assert inner_product(expected, dj_input) == pytest.approx(1)

    def test_same_as_prepare_logical(self, dj_input):
        direct = prepare_logical(prepare_logical(vacuum_state(dj_input.register), QUERY, S, S), AUX, S, -S)
        assert fidelity(direct, dj_input) == pytest.approx(1)

    def test_one_excitation_each(self, dj_input):
        for e in (QUERY, AUX):
            assert total_excitation(dj_input, [f"h{e}", f"v{e}"]) == pytest.approx({1: 1.0})

    def test_rejects_occupied(self, dj_input):
        with pytest.raises(ValueError):
            prepare_dj_input(dj_input)


class TestOracleUnitary:
    def test_f1_identity(self):
        assert np.array_equal(oracle_unitary(OracleId.F1), np.eye(4))

    def test_f3_flips_on_one(self):
        assert oracle_unitary(OracleId.F3)[:, 2].tolist() == [0, 0, 0, 1]

    def test_f4_flips_on_zero(self):
        assert oracle_unitary(OracleId.F4)[:, 0].tolist() == [0, 1, 0, 0]

    @pytest.mark.parametrize("oracle", list(OracleId))
    def test_decomposition_equivalent(self, oracle):
        report = verify_oracle_equivalence(oracle)
        assert report.equal
        assert report.phase == pytest.approx(1)
        assert np.allclose(decomposition_matrix(oracle), oracle_unitary(oracle), atol=1e-12)

    def test_table(self):
        assert [o.table for o in OracleId] == [(0, 0), (1, 1), (0, 1), (1, 0)]
        assert [o.is_constant for o in OracleId] == [True, True, False, False]


class TestOracleOutputs:
    @pytest.mark.parametrize("oracle", list(OracleId))
    @pytest.mark.parametrize("backend", BACKENDS[:2], ids=BACKEND_IDS[:2])
    def test_exact_output_with_phase(self, dj_input, oracle, backend):
        work = after_oracle(dj_input, oracle, backend)
        expected = prepare_entangled(vacuum_state(work.state.register), [QUERY, AUX], np.kron(AFTER_ORACLE[oracle], MINUS))
        assert inner_product(expected, work.state) == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("oracle", list(OracleId))
    @pytest.mark.parametrize("seed", range(3))
    def test_teleported_output(self, dj_input, oracle, seed):
        work = after_oracle(dj_input, oracle, BACKENDS[2], seed)
        assert work.log.accepted
        expected = prepare_entangled(
            vacuum_state(work.state.register), [work.query, work.aux], np.kron(AFTER_ORACLE[oracle], MINUS)
        )
        assert fidelity(expected, work.state) >= 1 - 1e-10

    @pytest.mark.parametrize("oracle", list(OracleId))
    def test_auxiliary_invariant(self, dj_input, oracle):
        for backend in BACKENDS:
            work = after_oracle(dj_input, oracle, backend)
            aux = logical_view(work.state, work.aux)
            assert aux.factorizable
            assert abs(np.vdot(aux.vector, MINUS)) == pytest.approx(1, abs=1e-10)

    @pytest.mark.parametrize("oracle", list(OracleId))
    def test_phase_pattern(self, dj_input, oracle):
        work = after_oracle(dj_input, oracle, BACKENDS[1])
        q = logical_view(work.state, work.query)
        assert abs(np.vdot(q.vector, phase_pattern(oracle))) == pytest.approx(1, abs=1e-10)


class TestRun:
    @pytest.mark.parametrize("oracle", list(OracleId))
    @pytest.mark.parametrize("backend", BACKENDS, ids=BACKEND_IDS)
    def test_verdict_deterministic(self, oracle, backend):
        rng = np.random.default_rng(2)
        for _ in range(5):
            res = run_dj(oracle, backend, DetectorModel(), rng)
            assert res.verdict is expected_verdict(oracle)

    def test_query_state_f1(self):
        res = run_dj(OracleId.F1, rng=np.random.default_rng(0))
        assert abs(res.query_state.alpha) == pytest.approx(1)
        assert res.verdict is DJVerdict.CONSTANT

    def test_f4_balanced(self):
        assert run_dj(OracleId.F4, rng=np.random.default_rng(0)).verdict is DJVerdict.BALANCED

    @pytest.mark.parametrize("oracle", list(OracleId))
    def test_physical_readout_ideal(self, oracle):
        rng = np.random.default_rng(3)
        backend = DJBackend(physical_readout=True)
        for _ in range(20):
            res = run_dj(oracle, backend, DetectorModel(), rng)
            assert res.verdict is expected_verdict(oracle)
            assert sum(res.clicks) == 1

    def test_teleported_physical_f3(self):
        rng = np.random.default_rng(4)
        backend = DJBackend(
            OracleForm.DECOMPOSED,
            CnotKind.TELEPORTED,
            MeasurementBackend.physical("random"),
            physical_readout=True,
        )
        accepted = 0
        for _ in range(200):
            res = run_dj(OracleId.F3, backend, DetectorModel(), rng)
            if res.accepted:
                accepted += 1
                assert res.verdict is DJVerdict.BALANCED
        assert accepted > 0

    @pytest.mark.parametrize("eta", [0.4, 0.8])
    def test_loss_only_discards(self, eta):
        rng = np.random.default_rng(5)
        backend = DJBackend(physical_readout=True)
        det = DetectorModel(efficiency=eta)
        for oracle in OracleId:
            results = [run_dj(oracle, backend, det, rng) for _ in range(300)]
            assert all(r.verdict in (None, expected_verdict(oracle)) for r in results)
            rate = sum(r.accepted for r in results) / len(results)
            assert abs(rate - eta) <= 4 * math.sqrt(eta * (1 - eta) / len(results))

    def test_dark_counts_cause_errors(self):
        rng = np.random.default_rng(6)
        backend = DJBackend(physical_readout=True)
        det = DetectorModel(efficiency=0.5, dark_count_prob=0.3)
        results = [run_dj(OracleId.F2, backend, det, rng) for _ in range(600)]
        assert any(r.verdict is DJVerdict.BALANCED for r in results)

    def test_seed_reproducible(self):
        backend = DJBackend(cnot=CnotKind.TELEPORTED, measurement=MeasurementBackend.physical("random"))
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(9)
            runs.append([(r.verdict, len(r.log.outcomes)) for r in (run_dj(OracleId.F2, backend, rng=rng) for _ in range(10))])
        assert runs[0] == runs[1]
