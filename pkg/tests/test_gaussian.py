import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qscatter import gaussian as gs
from qscatter.circuits import haar_unitary

BS50 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)

# Closed forms for the displaced squeezed source used throughout: r=0.35, alpha=3.
R_SRC, ALPHA_SRC = 0.35, 3.0
N_SRC = 9 + np.sinh(R_SRC) ** 2
VAR_SRC = 9 * np.exp(-2 * R_SRC) + 2 * np.sinh(R_SRC) ** 2 * np.cosh(R_SRC) ** 2


def squeezed_displaced_source():
    return gs.displace(gs.squeeze(gs.vacuum_state(1), 0, R_SRC), 0, ALPHA_SRC)


def random_pure_state(rng, m):
    state = gs.vacuum_state(m)
    for k in range(m):
        state = gs.squeeze(state, k, rng.uniform(0, 1.2), rng.uniform(0, 2 * np.pi))
        state = gs.displace(state, k, rng.uniform(0, 2) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
    if m > 1:
        state = gs.apply_interferometer(state, haar_unitary(m, rng))
    return state


class TestStates:
    def test_vacuum_single_mode(self):
        v = gs.vacuum_state(1)
        assert np.allclose(v.displacement, [0, 0])
        assert np.allclose(v.covariance, np.diag([0.5, 0.5]))

    def test_vacuum_three_modes(self):
        assert np.allclose(gs.vacuum_state(3).covariance, np.eye(6) / 2)

    def test_vacuum_moments_vanish(self):
        pm = gs.photon_moments(gs.vacuum_state(2))
        assert np.allclose(pm.means, 0) and np.allclose(pm.number_covariance, 0)

    @pytest.mark.parametrize("m", [0, -1])
    def test_vacuum_rejects_nonpositive(self, m):
        with pytest.raises(ValueError):
            gs.vacuum_state(m)

    def test_state_is_immutable(self):
        v = gs.vacuum_state(1)
        with pytest.raises(ValueError):
            v.covariance[0, 0] = 3.0

    def test_asymmetric_covariance_rejected(self):
        with pytest.raises(ValueError):
            gs.GaussianState(np.zeros(2), np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_xpxp_ordering(self):
        # displacement along x lives in slot 0, along p in slot 1
        s = gs.displace(gs.vacuum_state(2), 1, 1j)
        assert np.allclose(s.displacement, [0, 0, 0, np.sqrt(2)])


class TestSqueezeDisplace:
    def test_zero_squeeze_is_identity(self):
        s = squeezed_displaced_source()
        t = gs.squeeze(s, 0, 0.0, 1.3)
        assert np.allclose(t.covariance, s.covariance) and np.allclose(t.displacement, s.displacement)

    def test_squeezed_vacuum_moments(self):
        pm = gs.photon_moments(gs.squeeze(gs.vacuum_state(1), 0, 0.5))
        assert np.isclose(pm.means[0], np.sinh(0.5) ** 2, atol=1e-12)
        assert np.isclose(pm.means[0], 0.271540317, atol=1e-9)
        assert np.isclose(pm.total_variance, 0.690548680, atol=1e-9)
        assert np.isclose(pm.fano_total, 2 * np.cosh(0.5) ** 2, atol=1e-12)

    def test_x_quadrature_is_squeezed(self):
        s = gs.squeeze(gs.vacuum_state(1), 0, 0.5)
        assert np.isclose(s.covariance[0, 0], np.exp(-1) / 2, atol=1e-12)
        assert np.isclose(s.covariance[0, 0], 0.183940, atol=1e-6)

    def test_zero_displacement_is_identity(self):
        s = squeezed_displaced_source()
        assert np.allclose(gs.displace(s, 0, 0).displacement, s.displacement)

    def test_coherent_two(self):
        pm = gs.photon_moments(gs.displace(gs.vacuum_state(1), 0, 2.0))
        assert np.isclose(pm.means[0], 4) and np.isclose(pm.total_variance, 4) and np.isclose(pm.fano_total, 1)

    def test_coherent_one_and_a_half(self):
        pm = gs.photon_moments(gs.coherent_state(1.5))
        assert np.isclose(pm.means[0], 2.25) and np.isclose(pm.total_variance, 2.25)

    def test_displaced_squeezed_source(self):
        pm = gs.photon_moments(squeezed_displaced_source())
        assert np.isclose(pm.total_mean, N_SRC, atol=1e-12)
        assert np.isclose(pm.total_variance, VAR_SRC, atol=1e-12)
        assert np.isclose(pm.total_mean, 9.12758, atol=1e-5)
        assert np.isclose(pm.total_variance, 4.75700, atol=1e-5)
        assert np.isclose(pm.fano_total, 0.52117, atol=1e-5)

    def test_rotation_by_pi_over_two_moves_squeezing_to_p(self):
        s = gs.rotate(gs.squeeze(gs.vacuum_state(1), 0, 0.4), 0, np.pi / 2)
        assert np.isclose(s.covariance[1, 1], np.exp(-0.8) / 2)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            gs.squeeze(gs.vacuum_state(1), 0, np.nan)


class TestInterferometer:
    def test_identity(self):
        s = random_pure_state(np.random.default_rng(1), 2)
        t = gs.apply_interferometer(s, np.eye(2))
        assert np.allclose(t.covariance, s.covariance)

    def test_coherent_on_splitter(self):
        s = gs.apply_interferometer(gs.displace(gs.vacuum_state(2), 0, 2.0), BS50)
        pm = gs.photon_moments(s)
        assert np.allclose(pm.means, [2, 2])
        assert np.isclose(pm.number_covariance[0, 1], 0, atol=1e-12)

    def test_squeezed_source_on_splitter(self):
        src = squeezed_displaced_source()
        cov = 0.5 * np.eye(4)
        cov[:2, :2] = src.covariance
        d = np.concatenate([src.displacement, [0, 0]])
        s = gs.apply_interferometer(gs.GaussianState(d, cov), BS50)
        pm = gs.photon_moments(s)
        c01 = pm.number_covariance[0, 1]
        assert np.isclose(c01, (VAR_SRC - N_SRC) / 4, atol=1e-12)
        assert np.isclose(c01, -1.092648, atol=1e-6)
        corr = c01 / (pm.means[0] * pm.means[1])
        assert np.isclose(corr, (VAR_SRC / N_SRC - 1) / N_SRC, atol=1e-12)
        assert np.isclose(corr, -0.052460, atol=1e-6)

    def test_non_unitary_reports_residual(self):
        with pytest.raises(ValueError, match="residual|unitar"):
            gs.apply_interferometer(gs.vacuum_state(2), np.array([[1, 0.1], [0, 1]]))


class TestLoss:
    def test_full_transmission_is_identity(self):
        s = squeezed_displaced_source()
        assert np.allclose(gs.apply_loss(s, [0], 1.0).covariance, s.covariance)

    def test_zero_transmission_gives_vacuum(self):
        s = gs.apply_loss(squeezed_displaced_source(), [0], 0.0)
        assert np.allclose(s.covariance, np.eye(2) / 2) and np.allclose(s.displacement, 0)

    def test_detected_fano(self):
        # F = 0.72 source: a displaced squeezed state tuned to that Fano factor
        from qscatter.transport import QuantumSourceSpec, source_prepare

        state, F, _ = source_prepare(QuantumSourceSpec(F_a=0.72, n_mean=20.0))
        assert np.isclose(F, 0.72, atol=1e-9)
        F_after = gs.fano_factor(gs.apply_loss(state, [0], 0.37))
        assert np.isclose(F_after, 0.8964, atol=1e-9)

    @pytest.mark.parametrize("eta", [-0.1, 1.1])
    def test_eta_range(self, eta):
        with pytest.raises(ValueError):
            gs.apply_loss(gs.vacuum_state(1), [0], eta)


class TestMoments:
    def test_fano_nan_for_vacuum(self):
        assert np.isnan(gs.photon_moments(gs.vacuum_state(1)).fano_total)

    def test_subset_ordering(self):
        s = gs.displace(gs.displace(gs.vacuum_state(3), 0, 1.0), 2, 2.0)
        pm = gs.photon_moments(s, [2, 0])
        assert pm.mode_ids == (2, 0)
        assert np.allclose(pm.means, [4, 1])


# ---- properties -------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, m=st.integers(1, 4), eta=st.floats(0, 1))
def test_uncertainty_after_every_operation(seed, m, eta):
    rng = np.random.default_rng(seed)
    s = random_pure_state(rng, m)
    assert np.all(gs.symplectic_eigenvalues(s.covariance) > 0.5 - 1e-9)
    assert np.allclose(gs.symplectic_eigenvalues(s.covariance), 0.5, atol=1e-9)
    s = gs.apply_loss(s, [int(rng.integers(m))], eta)
    assert np.all(gs.symplectic_eigenvalues(s.covariance) > 0.5 - 1e-9)
    assert np.allclose(s.covariance, s.covariance.T, atol=1e-12)
    pm = gs.photon_moments(s)
    assert np.all(np.diag(pm.number_covariance) >= -1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, m=st.integers(2, 5))
def test_interferometer_conserves_energy(seed, m):
    rng = np.random.default_rng(seed)
    s = random_pure_state(rng, m)
    before = gs.photon_moments(s).total_mean
    after = gs.photon_moments(gs.apply_interferometer(s, haar_unitary(m, rng))).total_mean
    assert np.isclose(after, before, rtol=1e-9)


@settings(max_examples=80, deadline=None)
@given(seed=seeds, eta=st.floats(0.0, 1.0))
def test_loss_law(seed, eta):
    assume(eta > 1e-6)
    s = random_pure_state(np.random.default_rng(seed), 1)
    F = gs.fano_factor(s)
    assert np.isclose(gs.fano_factor(gs.apply_loss(s, [0], eta)), 1 + eta * (F - 1), atol=1e-9)


@settings(max_examples=80, deadline=None)
@given(seed=seeds, eta=st.floats(0.0, 1.0))
def test_two_mode_splitter_correlation(seed, eta):
    rng = np.random.default_rng(seed)
    single = gs.apply_loss(random_pure_state(rng, 1), [0], eta)
    pm1 = gs.photon_moments(single)
    # the ratio loses relative precision as the means shrink
    assume(pm1.total_mean > 1e-2)
    cov = 0.5 * np.eye(4)
    cov[:2, :2] = single.covariance
    two = gs.GaussianState(np.concatenate([single.displacement, [0, 0]]), cov)
    pm = gs.photon_moments(gs.apply_interferometer(two, BS50))
    corr = pm.number_covariance[0, 1] / (pm.means[0] * pm.means[1])
    assert np.isclose(corr, (pm1.fano_total - 1) / pm1.total_mean, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=seeds, m=st.integers(1, 4))
def test_fano_total_definition(seed, m):
    pm = gs.photon_moments(random_pure_state(np.random.default_rng(seed), m))
    assert np.isclose(pm.fano_total, pm.total_variance / pm.total_mean)
    assert np.isclose(pm.total_variance, pm.number_covariance.sum())
