import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noise_tailor.paulis import PauliString, all_paulis
from noise_tailor.superop import (
    ChoiMatrix,
    PauliChannel,
    SuperOp,
    SuperOpError,
    choi_from_superop,
    compose,
    effect_vec,
    identity_superop,
    invert_ideal,
    is_cptp,
    pauli_twirl,
    process_fidelity,
    process_infidelity,
    ptm_from_kraus,
    ptm_from_unitary,
    state_vec,
    superop_from_choi,
    tvd,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def rx(theta):
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * SX


def random_unitary(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_cptp(n, rng, n_kraus=3):
    d = 2**n
    gs = [rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(n_kraus)]
    s = sum(g.conj().T @ g for g in gs)
    w, v = np.linalg.eigh(s)
    s_inv_half = v @ np.diag(w**-0.5) @ v.conj().T
    return ptm_from_kraus([g @ s_inv_half for g in gs])


def bell_fidelity(err: SuperOp) -> float:
    """Independent oracle: F = <psi| (I x E)(rho) |psi> with a maximally
    entangled |psi>, evaluated through the (ancilla-first) Choi state."""
    d = 2**err.n
    omega = np.zeros(d * d)
    omega[:: d + 1] = 1 / np.sqrt(d)
    j = choi_from_superop(err).c
    return float(np.real(omega @ j @ omega))


class TestPtmFromUnitary:
    def test_identity(self):
        s = ptm_from_unitary(np.eye(2, dtype=complex))
        assert np.allclose(s.m, np.eye(4), atol=1e-14)

    @pytest.mark.parametrize("theta", [0.1, 0.7, 2.0])
    def test_rx_block_structure(self, theta):
        s = ptm_from_unitary(rx(theta))
        want = np.eye(4)
        want[2:, 2:] = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        assert np.allclose(s.m, want, atol=1e-12)

    def test_x90_rows(self):
        s = ptm_from_unitary(rx(np.pi / 2))
        # Y -> Z and Z -> -Y columns with exact +-1 entries
        assert s.m[3, 2] == pytest.approx(1.0, abs=1e-12)
        assert s.m[2, 3] == pytest.approx(-1.0, abs=1e-12)
        assert abs(s.m[2, 2]) < 1e-12 and abs(s.m[3, 3]) < 1e-12

    def test_rejects_non_unitary(self):
        with pytest.raises(SuperOpError):
            ptm_from_unitary(np.array([[1, 0], [0, 0.5]], dtype=complex))

    def test_tp_and_unital(self):
        rng = np.random.default_rng(7)
        s = ptm_from_unitary(random_unitary(4, rng))
        assert s.is_tp() and s.is_unital()

    def test_homomorphism(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            u, v = random_unitary(4, rng), random_unitary(4, rng)
            lhs = ptm_from_unitary(u @ v).m
            rhs = compose(ptm_from_unitary(u), ptm_from_unitary(v)).m
            assert np.max(np.abs(lhs - rhs)) < 1e-10


class TestPtmFromKraus:
    def test_bitflip_mixture(self):
        s = ptm_from_kraus([np.sqrt(0.99) * np.eye(2, dtype=complex), np.sqrt(0.01) * SX])
        assert np.allclose(s.m, np.diag([1, 1, 0.98, 0.98]), atol=1e-12)

    def test_amplitude_damping_zero(self):
        k0 = np.array([[1, 0], [0, 1]], dtype=complex)
        s = ptm_from_kraus([k0])
        assert np.allclose(s.m, np.eye(4), atol=1e-14)

    def test_amplitude_damping_full(self):
        k0 = np.array([[1, 0], [0, 0]], dtype=complex)
        k1 = np.array([[0, 1], [0, 0]], dtype=complex)
        s = ptm_from_kraus([k0, k1])
        want = np.zeros((4, 4))
        want[0, 0] = 1.0
        want[3, 0] = 1.0
        assert np.allclose(s.m, want, atol=1e-12)

    def test_completeness_violation(self):
        with pytest.raises(SuperOpError):
            ptm_from_kraus([0.9 * np.eye(2, dtype=complex)])


class TestCompose:
    def test_identity(self):
        rng = np.random.default_rng(3)
        s = random_cptp(1, rng)
        assert np.allclose(compose(s, identity_superop(1)).m, s.m)

    def test_rotation_addition(self):
        a, b = 0.3, 0.5
        lhs = compose(ptm_from_unitary(rx(a)), ptm_from_unitary(rx(b))).m
        rhs = ptm_from_unitary(rx(a + b)).m
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_repeated_overrotation_quadratic_infidelity(self):
        # M applications of exp(-i theta X) on |0>: Pr(0) = cos^2(M theta)
        theta, m_reps = 0.02, 10
        step = ptm_from_unitary(rx(2 * theta))
        total = identity_superop(1)
        for _ in range(m_reps):
            total = compose(step, total)
        rho0 = np.array([[1, 0], [0, 0]], dtype=complex)
        pr0 = float(effect_vec(rho0) @ total.m @ state_vec(rho0))
        assert pr0 == pytest.approx(np.cos(m_reps * theta * 2 / 2) ** 2, abs=1e-12)
        assert 1 - pr0 == pytest.approx((m_reps * theta) ** 2, rel=0.05)

    def test_dimension_mismatch(self):
        with pytest.raises(SuperOpError):
            compose(identity_superop(1), identity_superop(2))


class TestProcessFidelity:
    def test_equal_channels(self):
        rng = np.random.default_rng(5)
        u = random_unitary(4, rng)
        s = ptm_from_unitary(u)
        assert process_fidelity(s, s) == pytest.approx(1.0, abs=1e-12)
        assert process_infidelity(s, s) == pytest.approx(0.0, abs=1e-12)

    def test_pauli_channel_value(self):
        ch = PauliChannel.from_error_rates(2, {"XI": 0.01})
        assert process_fidelity(ch.to_superop()) == pytest.approx(0.99, abs=1e-12)

    @pytest.mark.parametrize("theta", [0.05, 0.1, 0.4])
    def test_rotation_vs_bell_state_oracle(self, theta):
        err = ptm_from_unitary(rx(theta))
        assert process_infidelity(err) == pytest.approx(np.sin(theta / 2) ** 2, abs=1e-12)
        assert process_fidelity(err) == pytest.approx(bell_fidelity(err), abs=1e-12)

    def test_fidelity_matches_bell_oracle_on_random_cptp(self):
        rng = np.random.default_rng(17)
        for n in (1, 2):
            s = random_cptp(n, rng)
            assert process_fidelity(s) == pytest.approx(bell_fidelity(s), abs=1e-10)

    def test_singular_target_rejected(self):
        sing = SuperOp(1, np.diag([1.0, 0.0, 0.0, 0.0]))
        with pytest.raises(SuperOpError):
            process_fidelity(identity_superop(1), sing)


class TestChoi:
    def test_round_trip(self):
        rng = np.random.default_rng(23)
        for n in (1, 2):
            s = random_cptp(n, rng)
            back = superop_from_choi(choi_from_superop(s))
            assert np.max(np.abs(back.m - s.m)) < 1e-12

    def test_cp_detection(self):
        rng = np.random.default_rng(29)
        s = random_cptp(2, rng)
        ch = choi_from_superop(s)
        assert ch.is_cp()
        # push one eigenvalue to -1e-3
        w, v = np.linalg.eigh(ch.c)
        w[0] = -1e-3
        bad = ChoiMatrix(2, v @ np.diag(w) @ v.conj().T)
        assert not bad.is_cp()

    def test_tp_condition(self):
        rng = np.random.default_rng(31)
        s = random_cptp(1, rng)
        d = 2
        j = choi_from_superop(s).c
        partial = np.einsum("abcb->ac", j.reshape(d, d, d, d))
        assert np.allclose(partial, np.eye(d) / d, atol=1e-10)

    def test_is_cptp(self):
        rng = np.random.default_rng(37)
        assert is_cptp(random_cptp(2, rng))


class TestTwirl:
    def test_full_twirl_of_rotation(self):
        theta = 0.3
        s = ptm_from_unitary(rx(theta))
        tw = pauli_twirl(s)
        assert np.allclose(tw.m, np.diag([1, 1, np.cos(theta), np.cos(theta)]), atol=1e-15)

    def test_full_twirl_exactly_diagonal(self):
        rng = np.random.default_rng(41)
        s = random_cptp(2, rng)
        tw = pauli_twirl(s)
        off = tw.m - np.diag(np.diag(tw.m))
        assert np.max(np.abs(off)) < 1e-12
        assert np.allclose(np.diag(tw.m), np.diag(s.m), atol=1e-12)

    def test_identity_subset_is_noop(self):
        rng = np.random.default_rng(43)
        s = random_cptp(2, rng)
        tw = pauli_twirl(s, [PauliString.from_label("II")])
        assert np.array_equal(tw.m, s.m)

    def test_idempotent(self):
        rng = np.random.default_rng(47)
        s = random_cptp(2, rng)
        once = pauli_twirl(s)
        twice = pauli_twirl(once)
        assert np.array_equal(once.m, twice.m)

    def test_fidelity_invariant(self):
        rng = np.random.default_rng(53)
        s = random_cptp(2, rng)
        assert process_fidelity(pauli_twirl(s)) == pytest.approx(process_fidelity(s), abs=1e-12)

    def test_empty_subset_rejected(self):
        with pytest.raises(SuperOpError):
            pauli_twirl(identity_superop(1), [])


class TestTvd:
    def test_equal(self):
        assert tvd({"0": 1.0}, {"0": 1.0}) == 0.0

    def test_half(self):
        assert tvd({"0": 1.0}, {"0": 0.5, "1": 0.5}) == pytest.approx(0.5)

    def test_hand_sum(self):
        p = {"00": 0.7, "01": 0.1, "10": 0.1, "11": 0.1}
        q = {k: 0.25 for k in p}
        want = 0.5 * sum(abs(p[k] - q[k]) for k in p)
        assert tvd(p, q) == pytest.approx(want) == pytest.approx(0.45)

    def test_negative_mass(self):
        with pytest.raises(SuperOpError):
            tvd({"0": 1.5, "1": -0.5}, {"0": 1.0})

    @settings(max_examples=25)
    @given(st.lists(st.floats(0.01, 1), min_size=2, max_size=4),
           st.lists(st.floats(0.01, 1), min_size=2, max_size=4))
    def test_symmetry_and_bounds(self, a, b):
        k = max(len(a), len(b))
        a = a + [0.0] * (k - len(a))
        b = b + [0.0] * (k - len(b))
        p = {str(i): v / sum(a) for i, v in enumerate(a)}
        q = {str(i): v / sum(b) for i, v in enumerate(b)}
        assert tvd(p, q) == pytest.approx(tvd(q, p))
        assert 0.0 <= tvd(p, q) <= 1.0 + 1e-12


class TestPauliChannel:
    def test_superop_is_diagonal(self):
        ch = PauliChannel.from_error_rates(2, {"XI": 0.02, "ZZ": 0.01})
        s = ch.to_superop()
        assert np.allclose(s.m, np.diag(np.diag(s.m)))
        assert is_cptp(s)

    def test_bad_normalization(self):
        with pytest.raises(SuperOpError):
            PauliChannel(1, {"I": 0.5, "X": 0.1})


class TestSerialization:
    def test_json_round_trip(self):
        rng = np.random.default_rng(59)
        s = random_cptp(2, rng)
        back = SuperOp.loads(s.dumps())
        assert np.array_equal(back.m, s.m)
        assert "pauli-IXYZ-msbfirst" in s.dumps()


class TestInvertIdeal:
    def test_orthogonal_uses_transpose(self):
        rng = np.random.default_rng(61)
        s = ptm_from_unitary(random_unitary(4, rng))
        inv = invert_ideal(s)
        assert np.allclose(inv.m @ s.m, np.eye(16), atol=1e-12)
        assert np.array_equal(inv.m, s.m.T)
