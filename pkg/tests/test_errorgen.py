import numpy as np
import pytest

from noise_tailor.errorgen import (
    BranchCutError,
    ErrorGenError,
    error_budget,
    error_generator,
    hamiltonian_generator,
    project_hs,
    reconstruct_channel,
    stochastic_generator,
    weight_maps,
)
from noise_tailor.paulis import all_labels
from noise_tailor.superop import (
    PauliChannel,
    SuperOp,
    compose,
    identity_superop,
    pauli_twirl,
    process_infidelity,
    ptm_from_kraus,
    ptm_from_unitary,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)


def rx(theta):
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * SX


def random_near_identity_cptp(n, rng, scale=0.05):
    d = 2**n
    ks = [np.eye(d, dtype=complex)]
    ks += [scale * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) for _ in range(2)]
    total = sum(k.conj().T @ k for k in ks)
    w, v = np.linalg.eigh(total)
    inv_half = v @ np.diag(w**-0.5) @ v.conj().T
    return ptm_from_kraus([k @ inv_half for k in ks])


class TestErrorGenerator:
    def test_ideal_gate_gives_zero(self):
        ident = identity_superop(2)
        gen = error_generator(ident, ident)
        assert np.max(np.abs(gen.l)) < 1e-14
        assert gen.residual < 1e-14

    def test_rotation_h_coefficient(self):
        theta = 0.1
        gen = error_generator(ptm_from_unitary(rx(theta)), identity_superop(1))
        assert gen.h_coeffs["X"] == pytest.approx(theta / 2, abs=1e-6)
        assert max(abs(v) for v in gen.s_coeffs.values()) < 1e-9
        assert gen.residual < 1e-9

    def test_pauli_channel_s_coefficient(self):
        # scalar-log oracle on the diagonal: s_Z = -ln(1 - 2 * 0.01) / 2
        ch = PauliChannel.from_error_rates(1, {"Z": 0.01}).to_superop()
        gen = error_generator(ch, identity_superop(1))
        want = -0.5 * np.log(1 - 2 * 0.01)
        assert gen.s_coeffs["Z"] == pytest.approx(want, abs=1e-10)
        assert abs(gen.h_coeffs["Z"]) < 1e-10

    def test_round_trip_random_gates(self):
        rng = np.random.default_rng(8)
        ideal = ptm_from_unitary(rx(np.pi / 2))
        for _ in range(100):
            err = random_near_identity_cptp(1, rng)
            gate = compose(err, ideal)
            if process_infidelity(gate, ideal) >= 0.1:
                continue
            gen = error_generator(gate, ideal)
            back = reconstruct_channel(gen, ideal)
            assert np.max(np.abs(back.m - gate.m)) < 1e-9

    def test_branch_cut_failure(self):
        # a pi rotation has eigenvalues on the negative real axis
        gate = ptm_from_unitary(rx(np.pi))
        with pytest.raises(BranchCutError) as err:
            error_generator(gate, identity_superop(1))
        assert err.value.eigenvalue.real < 0


class TestProjectHS:
    def test_zero_matrix(self):
        h, s, res = project_hs(np.zeros((16, 16)))
        assert all(v == 0 for v in h.values()) and all(v == 0 for v in s.values())
        assert res == 0

    def test_completeness_on_synthesized_generators(self):
        rng = np.random.default_rng(13)
        labels = [lbl for lbl in all_labels(2) if lbl != "II"]
        h_true = {lbl: rng.normal(scale=0.05) for lbl in labels}
        s_true = {lbl: abs(rng.normal(scale=0.01)) for lbl in labels}
        l_mat = sum(h_true[lbl] * hamiltonian_generator(2, lbl) for lbl in labels)
        l_mat = l_mat + sum(s_true[lbl] * stochastic_generator(2, lbl) for lbl in labels)
        h, s, res = project_hs(l_mat)
        for lbl in labels:
            assert h[lbl] == pytest.approx(h_true[lbl], abs=1e-9)
            assert s[lbl] == pytest.approx(s_true[lbl], abs=1e-9)
        assert res < 1e-9

    def test_finite_difference_generator_action(self):
        # d/dtheta PTM(R_x(theta)) at 0 equals H_X / 2
        eps = 1e-6
        diff = (ptm_from_unitary(rx(eps)).m - ptm_from_unitary(rx(-eps)).m) / (2 * eps)
        assert np.allclose(diff, hamiltonian_generator(1, "X") / 2, atol=1e-9)

    def test_twirled_rotation_projection(self):
        theta = 0.1
        tw = pauli_twirl(ptm_from_unitary(rx(theta)))
        gen = error_generator(tw, identity_superop(1))
        assert max(abs(v) for v in gen.h_coeffs.values()) < 1e-10
        assert gen.s_coeffs["X"] == pytest.approx(-0.5 * np.log(np.cos(theta)), abs=1e-9)

    def test_twirl_kills_hamiltonian_part(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            err = random_near_identity_cptp(2, rng)
            gen = error_generator(pauli_twirl(err), identity_superop(2))
            assert max(abs(v) for v in gen.h_coeffs.values()) < 1e-10

    @pytest.mark.parametrize("theta", [0.02, 0.05, 0.1])
    def test_quadratic_suppression(self, theta):
        tw = pauli_twirl(ptm_from_unitary(rx(theta)))
        gen = error_generator(tw, identity_superop(1))
        s_agg = sum(gen.s_coeffs.values())
        assert s_agg / theta**2 == pytest.approx(0.25, rel=0.05)


class TestErrorBudget:
    def test_pure_stochastic(self):
        b = error_budget({"X": 0.0}, {"X": 0.01, "Z": 0.002})
        assert b.stochastic_fraction == pytest.approx(1.0)
        assert b.eps_tot == pytest.approx(0.012)

    def test_pure_rotation(self):
        b = error_budget({"X": 0.05}, {"X": 0.0})
        assert b.stochastic_fraction == 0.0
        assert b.theta_agg == pytest.approx(0.05)

    def test_mixed_arithmetic(self):
        b = error_budget({"X": 0.03}, {"Z": 0.001})
        assert b.eps_tot == pytest.approx(0.031)
        assert b.stochastic_fraction == pytest.approx(0.001 / 0.031)
        assert b.eps_tot == pytest.approx(b.eps_agg + b.theta_agg)

    def test_negative_rate_flagged(self):
        b = error_budget({}, {"X": -1e-6})
        assert b.warnings and "s_X" in b.warnings[0]


class TestWeightMaps:
    def test_single_weight1(self):
        wm = weight_maps({"XI": 0.01})
        assert wm.marginal[0]["X"] == pytest.approx(0.01)
        assert all(v == 0 for v in wm.joint[(0, 1)].values())

    def test_weight2_appears_in_both(self):
        wm = weight_maps({"XZ": 0.004})
        assert wm.joint[(0, 1)][("X", "Z")] == pytest.approx(0.004)
        assert wm.marginal[0]["X"] == pytest.approx(0.004)
        assert wm.marginal[1]["Z"] == pytest.approx(0.004)

    def test_zz_coupling(self):
        wm = weight_maps({"ZZ": 0.02})
        assert wm.joint[(0, 1)][("Z", "Z")] == pytest.approx(0.02)
        assert wm.marginal[0]["Z"] == pytest.approx(0.02)
        assert wm.marginal[1]["Z"] == pytest.approx(0.02)

    def test_marginal_consistency_cross_check(self):
        rng = np.random.default_rng(3)
        coeffs = {lbl: float(abs(rng.normal(scale=0.01))) for lbl in all_labels(2) if lbl != "II"}
        wm = weight_maps(coeffs)
        # marginal of the joint plus the weight-1 row reproduces marginal_w1
        for p in "XYZ":
            joint_sum = sum(v for (a, _), v in wm.joint[(0, 1)].items() if a == p)
            w1 = coeffs[p + "I"]
            assert wm.marginal[0][p] == pytest.approx(joint_sum + w1, abs=1e-12)

    def test_four_qubit_pairs(self):
        wm = weight_maps({"XIIZ": 0.005, "IYII": 0.002})
        assert wm.n == 4
        assert wm.joint[(0, 3)][("X", "Z")] == pytest.approx(0.005)
        assert wm.marginal[1]["Y"] == pytest.approx(0.002)
        assert wm.joint[(1, 2)][("Y", "Y")] == 0.0
