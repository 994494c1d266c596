import math

import numpy as np
import pytest

from cvmet.cvspace import (
    CvState,
    FockDim,
    Operator,
    ProbeSpec,
    build_quadrature,
    converge_dimension,
    evolve,
    moment,
    operator_power,
    prepare_probe,
    propagator,
    variance,
)
from cvmet.errors import (
    ContractViolationError,
    InvalidDimensionError,
    TruncationLeakageError,
)

SQ2 = math.sqrt(2)


class TestQuadratures:
    def test_x_matrix_elements(self):
        x = build_quadrature(4, "X")
        assert x.mat[0, 1] == pytest.approx(1 / SQ2, abs=1e-15)
        assert np.abs(np.diag(x.mat)).max() == 0.0
        assert x.hermitian

    def test_p_matrix_elements(self):
        p = build_quadrature(4, "P")
        assert p.mat[1, 0] == pytest.approx(1j / SQ2, abs=1e-15)
        assert p.mat[0, 1] == pytest.approx(-1j / SQ2, abs=1e-15)

    def test_dimension_below_two_rejected(self):
        with pytest.raises(InvalidDimensionError):
            build_quadrature(1, "X")

    def test_truncated_commutator_d5(self):
        x = build_quadrature(5, "X").mat
        p = build_quadrature(5, "P").mat
        comm = x @ p - p @ x
        expected = 1j * np.diag([1.0, 1.0, 1.0, 1.0, -4.0])
        assert np.abs(comm - expected).max() < 1e-12

    @pytest.mark.parametrize("d", [2, 7, 16, 64])
    def test_truncated_commutator_structure_everywhere(self, d):
        x = build_quadrature(d, "X").mat
        p = build_quadrature(d, "P").mat
        comm = x @ p - p @ x
        expected = 1j * np.eye(d)
        expected[d - 1, d - 1] = 1j * (1 - d)
        assert np.abs(comm - expected).max() < 1e-12


class TestOperatorPower:
    def test_p_squared_vacuum_energy(self):
        p2 = operator_power(build_quadrature(6, "P"), 2)
        assert p2.mat[0, 0].real == pytest.approx(0.5, abs=1e-14)
        assert p2.hermitian

    def test_power_one_is_identity_case(self):
        x = build_quadrature(5, "X")
        assert np.array_equal(operator_power(x, 1).mat, x.mat)

    def test_cube_matches_naive_triple_loop(self):
        d = 8
        p = build_quadrature(d, "P").mat
        cube = operator_power(build_quadrature(d, "P"), 3).mat
        naive = np.zeros((d, d), dtype=complex)
        for i in range(d):
            for j in range(d):
                acc = 0.0 + 0.0j
                for k in range(d):
                    for l in range(d):
                        acc += p[i, k] * p[k, l] * p[l, j]
                naive[i, j] = acc
        assert np.abs(cube - naive).max() < 1e-12

    def test_power_zero_warns_and_returns_identity(self):
        with pytest.warns(UserWarning):
            ident = operator_power(build_quadrature(4, "X"), 0)
        assert np.array_equal(ident.mat, np.eye(4))


class TestProbes:
    def test_vacuum(self):
        state = prepare_probe(ProbeSpec.vacuum(), 8)
        assert state.vec[0] == 1.0
        assert np.abs(state.vec[1:]).max() == 0.0

    def test_coherent_mean_x(self):
        state = prepare_probe(ProbeSpec.coherent(0.5), 16)
        x = build_quadrature(16, "X")
        assert moment(state, x, 1) == pytest.approx(SQ2 * 0.5, abs=1e-8)

    def test_coherent_variance_p(self):
        state = prepare_probe(ProbeSpec.coherent(0.5), 16)
        p = build_quadrature(16, "P")
        assert moment(state, p, 2) == pytest.approx(0.5, abs=1e-8)

    def test_squeezed_variance_x(self):
        state = prepare_probe(ProbeSpec.squeezed_vacuum(0.3), 32)
        x = build_quadrature(32, "X")
        assert variance(state, x) == pytest.approx(math.exp(-0.6) / 2, abs=1e-6)

    def test_coherent_leakage_rejected(self):
        with pytest.raises(TruncationLeakageError):
            prepare_probe(ProbeSpec.coherent(3.0), 8)

    def test_fock_outside_basis_rejected(self):
        with pytest.raises(TruncationLeakageError):
            prepare_probe(ProbeSpec.fock(8), 8)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ContractViolationError):
            ProbeSpec("thermal")


class TestEvolve:
    def test_tau_zero_identity(self):
        state = prepare_probe(ProbeSpec.coherent(0.4), 32)
        out = evolve(state, build_quadrature(32, "X"), 0.0)
        assert np.array_equal(out.vec, state.vec)

    def test_x_generator_shifts_p(self):
        d = 64
        state = evolve(prepare_probe(ProbeSpec.vacuum(), d), build_quadrature(d, "X"), 0.7)
        assert moment(state, build_quadrature(d, "P"), 1) == pytest.approx(-0.7, abs=1e-8)

    def test_p_generator_shifts_x(self):
        d = 64
        state = evolve(prepare_probe(ProbeSpec.vacuum(), d), build_quadrature(d, "P"), 0.7)
        assert moment(state, build_quadrature(d, "X"), 1) == pytest.approx(0.7, abs=1e-8)

    @pytest.mark.parametrize("tau", [1e-3, 0.7, 13.0, 1e3])
    def test_norm_preserved(self, tau):
        d = 48
        state = evolve(prepare_probe(ProbeSpec.vacuum(), d), build_quadrature(d, "X"), tau)
        assert abs(np.linalg.norm(state.vec) - 1.0) < 1e-10

    def test_semigroup_in_tau(self):
        d = 64
        h = build_quadrature(d, "X")
        probe = prepare_probe(ProbeSpec.vacuum(), d)
        two_step = evolve(evolve(probe, h, 0.3), h, 0.45)
        one_step = evolve(probe, h, 0.75)
        assert np.abs(two_step.vec - one_step.vec).max() < 1e-9

    def test_non_hermitian_generator_rejected(self):
        bad = Operator(FockDim(4), np.triu(np.ones((4, 4))), hermitian=False)
        with pytest.raises(ContractViolationError):
            propagator(bad, 0.5)


class TestMoments:
    def test_vacuum_x_squared(self):
        state = prepare_probe(ProbeSpec.vacuum(), 16)
        assert moment(state, build_quadrature(16, "X"), 2) == pytest.approx(0.5, abs=1e-12)

    def test_vacuum_p_mean_zero(self):
        state = prepare_probe(ProbeSpec.vacuum(), 16)
        assert moment(state, build_quadrature(16, "P"), 1) == pytest.approx(0.0, abs=1e-14)

    def test_hermitian_moment_is_real_float(self):
        state = prepare_probe(ProbeSpec.coherent(0.3), 16)
        value = moment(state, build_quadrature(16, "X"), 2)
        assert isinstance(value, float)


class TestContracts:
    def test_false_hermitian_claim_rejected(self):
        with pytest.raises(ContractViolationError):
            Operator(FockDim(3), np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]],
                                          dtype=complex), hermitian=True)

    def test_false_unitary_claim_rejected(self):
        with pytest.raises(ContractViolationError):
            Operator(FockDim(3), 2 * np.eye(3), unitary=True)

    def test_state_norm_enforced(self):
        with pytest.raises(ContractViolationError):
            CvState(FockDim(4), np.array([1.0, 1.0, 0, 0]))


class TestDimensionLoop:
    def test_moment_stable_under_doubling(self):
        def mean_x(d):
            state = evolve(prepare_probe(ProbeSpec.vacuum(), d),
                           build_quadrature(d, "P"), 0.7)
            return moment(state, build_quadrature(d, "X"), 1)

        scan = converge_dimension(mean_x)
        assert scan.converged
        assert scan.dim_used == 128
        assert scan.value == pytest.approx(0.7, abs=1e-8)
        d_vals = [d for d, _ in scan.history]
        assert d_vals == [64, 128]

    def test_non_convergence_is_reported_not_silent(self):
        scan = converge_dimension(lambda d: float(d), start=64, cap=256)
        assert not scan.converged
        assert scan.dim_used == 256
