import math
from dataclasses import replace

import numpy as np
import pytest

from cvmet.cvspace import FockDim, ProbeSpec, build_quadrature, evolve, prepare_probe
from cvmet.errors import (
    LargeNGateError,
    UnidentifiableParameterError,
    UnsupportedConfigurationError,
)
from cvmet.qfi import (
    THETA1,
    THETA2,
    QfiEstimate,
    asymptotic_qfi,
    crb_precision,
    large_n_gate,
    precision_ratio,
    qfi_converged,
    qfi_fd,
    qfi_generator,
    ratio_formula,
)
from cvmet.strategies import (
    COHERENT_SUPERPOSITION,
    COMPOSITE,
    SWITCH,
    StrategyConfig,
    cs_output,
)


class TestFiniteDifference:
    def test_pure_momentum_displacement_on_vacuum(self):
        # single-branch family e^{-i theta P}|0>: F = 4 Var P = 2
        d = 64
        probe = prepare_probe(ProbeSpec.vacuum(), d)
        p = build_quadrature(d, "P")
        est = qfi_fd(lambda t: evolve(probe, p, t), 0.3)
        assert est.converged
        assert est.value == pytest.approx(2.0, rel=1e-6)

    def test_switch_linear_first_coupling(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=1, strategy=SWITCH)
        est = qfi_converged(cfg, THETA1, method="fd")
        assert est.converged
        assert est.value == pytest.approx(34.56, rel=1e-4)

    def test_cs_linear_second_coupling(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        est = qfi_converged(cfg, THETA2, method="fd")
        assert est.value == pytest.approx(168.96, rel=1e-3)
        assert est.diagnostics["dim_used"] >= 128

    def test_richardson_flags_non_smooth_builder(self):
        d = 32
        probe = prepare_probe(ProbeSpec.vacuum(), d)
        p = build_quadrature(d, "P")

        def kinked(theta):
            return evolve(probe, p, theta + 0.5 * abs(theta - 0.100004))

        est = qfi_fd(kinked, 0.1)
        assert not est.converged
        assert "step_history" in est.diagnostics


class TestGeneratorRoute:
    def test_cs_linear_value(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        est = qfi_generator(cfg, THETA2, FockDim(64))
        assert est.value == pytest.approx(168.96, rel=1e-12)
        assert est.method == "generator_exact"

    def test_switch_linear_second_coupling_matches_closed_form(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.07, n_queries=4, m=1, strategy=SWITCH)
        est = qfi_generator(cfg, THETA2, FockDim(64))
        expected = cfg.theta1 ** 2 * 4 ** 4 + 4 * 4 ** 2 * 0.5
        assert est.value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("strategy", [SWITCH, COHERENT_SUPERPOSITION])
    @pytest.mark.parametrize("m", [1, 2])
    def test_oracle_triangle_fd_vs_generator(self, strategy, m):
        cfg = StrategyConfig(theta1=0.06, theta2=0.04, n_queries=3, m=m,
                             strategy=strategy)
        fd = qfi_converged(cfg, THETA2, method="fd")
        gen = qfi_converged(cfg, THETA2, method="generator")
        assert fd.converged and gen.converged
        assert fd.value == pytest.approx(gen.value, rel=1e-3)

    def test_theta1_linear_supported(self):
        cfg = StrategyConfig(theta1=0.08, theta2=0.06, n_queries=3, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        fd = qfi_converged(cfg, THETA1, method="fd")
        gen = qfi_converged(cfg, THETA1, method="generator")
        assert fd.value == pytest.approx(gen.value, rel=1e-3)

    def test_theta1_nonlinear_unsupported(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=3, m=2, strategy=SWITCH)
        with pytest.raises(UnsupportedConfigurationError):
            qfi_generator(cfg, THETA1, FockDim(64))

    def test_composite_treated_as_cs(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=1, strategy=COMPOSITE)
        est = qfi_generator(cfg, THETA2, FockDim(64))
        assert est.value == pytest.approx(168.96, rel=1e-12)

    def test_leading_order_diagnostic_reported(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        est = qfi_generator(cfg, THETA2, FockDim(64))
        # |<g>|^2 form: (2 N^2 theta1)^2 * 4 = leading term only
        assert est.diagnostics["expectation_squared_form"] == pytest.approx(
            16 * 4 ** 4 * 0.1 ** 2, rel=1e-12)


class TestAsymptotics:
    def test_switch_linear_example(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=1, strategy=SWITCH)
        assert asymptotic_qfi(cfg, THETA1).value == pytest.approx(34.56, rel=1e-12)

    def test_cs_cubic_example(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.05, n_queries=6, m=3,
                             strategy=COHERENT_SUPERPOSITION)
        expected = 2 ** 10 * 0.1 ** 6 * 6 ** 8 / 16
        assert asymptotic_qfi(cfg, THETA2).value == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(107.4954, rel=1e-4)

    @pytest.mark.parametrize("strategy", [SWITCH, COHERENT_SUPERPOSITION])
    def test_generator_approaches_asymptote(self, strategy):
        cfg = StrategyConfig(theta1=0.75, theta2=0.05, n_queries=24, m=2,
                             strategy=strategy)
        assert large_n_gate(cfg)
        exact = qfi_converged(cfg, THETA2, method="generator").value
        asym = asymptotic_qfi(cfg, THETA2).value
        assert exact / asym == pytest.approx(1.0, abs=0.05)

    def test_nonlinear_theta1_asymptote_unsupported(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=4, m=2, strategy=SWITCH)
        with pytest.raises(UnsupportedConfigurationError):
            asymptotic_qfi(cfg, THETA1)


class TestPrecision:
    def test_simple_crb(self):
        res = crb_precision(QfiEstimate(100.0, "asymptotic"), nu=1)
        assert res.delta_theta == pytest.approx(0.1, abs=1e-15)

    def test_switch_leading_order_precision(self):
        # F ~ theta2^2 N^4 alone gives delta theta1 = 1/(sqrt(nu) theta2 N^2)
        n, theta2, nu = 6, 0.2, 9
        res = crb_precision(QfiEstimate(theta2 ** 2 * n ** 4, "asymptotic"), nu=nu)
        assert res.delta_theta == pytest.approx(1 / (math.sqrt(nu) * theta2 * n ** 2),
                                                rel=1e-12)

    def test_cs_leading_order_precision(self):
        n, theta1 = 5, 0.3
        res = crb_precision(QfiEstimate(16 * n ** 4 * theta1 ** 2, "asymptotic"))
        assert res.delta_theta == pytest.approx(1 / (4 * theta1 * n ** 2), rel=1e-12)

    def test_nu_scaling_symbolic_form(self):
        res = crb_precision(QfiEstimate(64.0, "generator_exact"), nu=16)
        assert res.delta_sqrt_nu == pytest.approx(1 / 8, rel=1e-12)

    def test_nonpositive_information_rejected(self):
        with pytest.raises(UnidentifiableParameterError):
            crb_precision(QfiEstimate(0.0, "finite_difference"))


class TestRatios:
    def test_formula_values(self):
        assert ratio_formula(1) == pytest.approx(0.25)
        assert ratio_formula(2) == pytest.approx(3 / 16)
        assert ratio_formula(3) == pytest.approx(1 / 8)

    def test_formula_strictly_decreasing(self):
        values = [ratio_formula(m) for m in (1, 2, 3, 4)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_linear_ratio_measured(self):
        measured = precision_ratio(1, 0.75, 24)
        assert measured == pytest.approx(0.25, rel=0.02)

    def test_gate_enforced(self):
        with pytest.raises(LargeNGateError):
            precision_ratio(1, 0.05, 4)

    def test_gate_predicate(self):
        hot = StrategyConfig(theta1=1.0, theta2=0.05, n_queries=12, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        cold = replace(hot, n_queries=4)
        assert large_n_gate(hot)
        assert not large_n_gate(cold)


class TestProperties:
    def test_gauge_invariance_under_global_phase(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=3, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        dim = FockDim(64)
        builder = lambda t: cs_output(replace(cfg, theta2=t), dim)
        phase = np.exp(1.234j)

        def phased(t):
            state = builder(t)
            return phase * state.amplitudes

        plain = qfi_fd(builder, cfg.theta2).value
        rotated = qfi_fd(phased, cfg.theta2).value
        assert abs(plain - rotated) <= 1e-10 * max(1.0, plain)

    def test_flat_builder_gives_exact_zero(self):
        cfg = StrategyConfig(theta1=0.1, theta2=0.1, n_queries=3, m=1,
                             strategy=COHERENT_SUPERPOSITION)
        frozen = cs_output(cfg, FockDim(64))
        est = qfi_fd(lambda t: frozen, cfg.theta2)
        assert est.value == 0.0

    def test_qfi_nonnegative_across_methods(self):
        cfg = StrategyConfig(theta1=0.05, theta2=0.08, n_queries=2, m=2,
                             strategy=SWITCH)
        assert qfi_converged(cfg, THETA2, method="fd").value >= 0.0
        assert qfi_generator(cfg, THETA2, FockDim(64)).value >= 0.0

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_monotone_scaling_slope(self, m):
        from cvmet.applications import fit_scaling

        points = []
        for n in (14, 18, 22, 26):
            cfg = StrategyConfig(theta1=1.2, theta2=0.05, n_queries=n, m=m,
                                 strategy=COHERENT_SUPERPOSITION)
            points.append((n, qfi_converged(cfg, THETA2, method="generator").value))
        fit = fit_scaling(points)
        assert fit.slope == pytest.approx(2 * (m + 1), abs=0.05)
