import math
import numpy as np
import pytest

from app.core.errors import ContractViolationError, DomainError
from app.schemas.sensor import Scheme, SensorConfig
from app.schemas.state import Basis, PairTag, TwoPhotonState
from app.services.photonics_service import PhotonicsService


def _overlapped(phase: float = 0.0) -> TwoPhotonState:
    forward = PhotonicsService.apply_sample_phase(PhotonicsService.prepare_pair(PairTag.FORWARD), phase, 0.0)
    backward = PhotonicsService.prepare_pair(PairTag.BACKWARD)
    return PhotonicsService.apply_wswp_and_overlap(forward, backward)


@pytest.mark.unit
@pytest.mark.service
class TestStateEngineering:
    """Pair state, sample phase, WSWP overlap and sigma_x projection."""

    def test_prepare_pair_is_vv(self):
        """Fresh pairs are |V,s>|V,i> with the requested tag."""
        state = PhotonicsService.prepare_pair(PairTag.BACKWARD)
        assert state.amplitude(Basis.VV) == 1
        assert state.tag == PairTag.BACKWARD

    def test_prepare_pair_rejects_overlapped(self):
        """A generated pair cannot already be overlapped."""
        with pytest.raises(ContractViolationError):
            PhotonicsService.prepare_pair(PairTag.OVERLAPPED)

    def test_sample_phase_adds_signal_and_idler(self):
        """Forward pair picks up dPhi_s + dPhi_i as a global phase."""
        state = PhotonicsService.apply_sample_phase(PhotonicsService.prepare_pair(), 0.3, 0.2)
        assert state.amplitude(Basis.VV) == pytest.approx(complex(math.cos(0.5), math.sin(0.5)), abs=1e-15)
        assert abs(state.norm() - 1) < 1e-12

    def test_sample_phase_on_backward_pair_is_contract_violation(self):
        """Only the forward contribution reaches the sample mirror."""
        with pytest.raises(ContractViolationError):
            PhotonicsService.apply_sample_phase(PhotonicsService.prepare_pair(PairTag.BACKWARD), 0.1, 0.1)

    def test_overlap_zero_phase(self):
        """Zero phase gives (|V_s V_i> + |H_s V_i>)/sqrt(2)."""
        state = _overlapped(0.0)
        assert state.tag == PairTag.OVERLAPPED
        assert state.amplitude(Basis.VV) == pytest.approx(1 / math.sqrt(2))
        assert state.amplitude(Basis.HV) == pytest.approx(1 / math.sqrt(2))
        assert abs(state.amplitude(Basis.VH)) < 1e-15

    def test_overlap_pi_phase(self):
        """Phase pi flips the sign of the rotated contribution."""
        state = _overlapped(math.pi)
        assert state.amplitude(Basis.HV) == pytest.approx(-1 / math.sqrt(2), abs=1e-12)

    @pytest.mark.parametrize("phase", [0.0, 0.4, 1.7, math.pi, 5.5])
    def test_overlap_preserves_normalization(self, phase):
        """|sum |a|^2 - 1| < 1e-12 after every operation."""
        assert abs(_overlapped(phase).norm() - 1) < 1e-12

    def test_overlap_requires_orthogonal_contributions(self):
        """Two backward-like contributions would interfere and are rejected."""
        forward = TwoPhotonState(amplitudes={Basis.HV: -1 + 0j}, tag=PairTag.FORWARD)
        backward = PhotonicsService.prepare_pair(PairTag.BACKWARD)
        with pytest.raises(ContractViolationError):
            PhotonicsService.apply_wswp_and_overlap(forward, backward)

    def test_overlap_tag_mismatch(self):
        """Forward and backward slots must carry the matching tags."""
        pair = PhotonicsService.prepare_pair(PairTag.FORWARD)
        with pytest.raises(ContractViolationError):
            PhotonicsService.apply_wswp_and_overlap(pair, pair)

    @pytest.mark.parametrize(
        "phase, expected_plus",
        [(0.0, 1.0), (math.pi, 0.0), (math.pi / 2, 0.5)],
    )
    def test_sigma_x_projection(self, phase, expected_plus):
        """p+ = (1 + cos phase)/2 for the overlapped state."""
        p_plus, p_minus = PhotonicsService.project_sigma_x(_overlapped(phase))
        assert p_plus == pytest.approx(expected_plus, abs=1e-12)
        assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)

    def test_sigma_x_requires_overlapped_state(self):
        """Projection before the overlap is a contract violation."""
        with pytest.raises(ContractViolationError):
            PhotonicsService.project_sigma_x(PhotonicsService.prepare_pair())

    def test_reject_idler_density_matrix(self):
        """Signal density matrix after tracing out the idler is Hermitian with unit trace."""
        rho = PhotonicsService.reject_idler(_overlapped(0.7))
        assert np.allclose(rho, rho.conj().T)
        assert np.trace(rho).real == pytest.approx(1.0)

    def test_unnormalized_state_is_rejected(self):
        """States must be normalized at construction."""
        with pytest.raises(ValueError, match="normalized"):
            TwoPhotonState(amplitudes={Basis.VV: 0.9 + 0j}, tag=PairTag.FORWARD)


@pytest.mark.unit
@pytest.mark.service
class TestFringesAndPhase:
    """Fringe intensities and displacement-to-phase conversion."""

    def test_fringe_intensity_values(self):
        """I+ at phase 0 with full visibility is 1; I- is 0."""
        assert PhotonicsService.fringe_intensity(0.0, 1.0, 1) == pytest.approx(1.0)
        assert PhotonicsService.fringe_intensity(0.0, 1.0, -1) == pytest.approx(0.0)
        assert PhotonicsService.fringe_intensity(1.2, 0.0, 1) == pytest.approx(0.5)

    def test_fringe_intensity_rejects_bad_inputs(self):
        """Visibility must be in [0, 1] and sign +-1."""
        with pytest.raises(DomainError):
            PhotonicsService.fringe_intensity(0.0, 1.2, 1)
        with pytest.raises(DomainError):
            PhotonicsService.fringe_intensity(0.0, 0.5, 0)

    def test_classical_displacement_to_phase(self, classical_sensor):
        """Half a wavelength of mirror travel is 2 pi."""
        assert PhotonicsService.displacement_to_phase(532.0, classical_sensor) == pytest.approx(2 * math.pi)

    def test_quantum_displacement_to_phase(self, quantum_sensor):
        """266 nm with the 1109/1023 nm pair gives about 2 pi (1.9995 pi)."""
        phase = PhotonicsService.displacement_to_phase(266.0, quantum_sensor)
        assert phase / math.pi == pytest.approx(1.99951, abs=1e-4)

    def test_displacement_to_phase_accepts_arrays(self, classical_sensor):
        """Array in, array out."""
        phase = PhotonicsService.displacement_to_phase(np.array([0.0, 266.0]), classical_sensor)
        assert phase.shape == (2,)
        assert phase[1] == pytest.approx(math.pi)

    def test_non_finite_displacement(self, classical_sensor):
        """NaN displacement is a domain error."""
        with pytest.raises(DomainError):
            PhotonicsService.displacement_to_phase(float("nan"), classical_sensor)

    def test_fringe_count(self):
        """4 pi of phase is two fringes."""
        assert PhotonicsService.fringe_count(0.0, 4 * math.pi) == pytest.approx(2.0)


@pytest.mark.unit
@pytest.mark.service
class TestSensitivities:
    """S_c, S_q, advantage criterion and scaling limits."""

    def test_ideal_classical_sensitivity(self, classical_sensor):
        """Ideal classical sensor sits at the SNL: S_c = 1."""
        assert PhotonicsService.classical_sensitivity(classical_sensor) == pytest.approx(1.0)

    def test_ideal_quantum_sensitivity(self):
        """Lossless quantum sensor: S_q = 1/sqrt(2)."""
        config = SensorConfig(scheme=Scheme.QUANTUM)
        assert PhotonicsService.quantum_sensitivity(config) == pytest.approx(1 / math.sqrt(2))

    def test_reported_quantum_sensitivity(self, quantum_sensor):
        """eta_int 0.74, visibility 0.85: S_q = 1/sqrt(1.74 * 0.7225)."""
        assert PhotonicsService.sensitivity(quantum_sensor) == pytest.approx(1 / math.sqrt(1.74 * 0.7225))

    def test_zero_visibility_is_singular(self):
        """No fringe, no sensitivity."""
        with pytest.raises(DomainError):
            PhotonicsService.classical_sensitivity(SensorConfig(visibility=0.0))

    def test_advantage_factor_reported_values(self):
        """(0.74, 0.85) -> sqrt(1.74 * 0.7225) in [1.120, 1.122]."""
        factor = PhotonicsService.quantum_advantage_factor(0.74, 0.85)
        assert factor == pytest.approx(math.sqrt(1.74 * 0.7225), rel=1e-12)
        assert 1.120 <= factor <= 1.122

    def test_advantage_factor_ideal(self):
        """Lossless quantum sensor: sqrt(2)."""
        assert PhotonicsService.quantum_advantage_factor(1.0, 1.0) == pytest.approx(math.sqrt(2))

    def test_advantage_factor_range_checks(self):
        """Inputs outside [0, 1] are rejected."""
        with pytest.raises(DomainError):
            PhotonicsService.quantum_advantage_factor(1.5, 0.85)

    def test_scaling_limits(self):
        """SNL 1/sqrt(N), Heisenberg 1/N, enhancement sqrt(N)."""
        assert PhotonicsService.snl_phase_noise(100) == pytest.approx(0.1)
        assert PhotonicsService.heisenberg_limit(100) == pytest.approx(0.01)
        assert PhotonicsService.heisenberg_enhancement(100) == pytest.approx(10.0)
        with pytest.raises(DomainError):
            PhotonicsService.snl_phase_noise(0)

    def test_pair_regime(self, quantum_sensor):
        """1.65e8 pairs/s is far below the 7.02e12 threshold."""
        regime = PhotonicsService.check_pair_regime(quantum_sensor)
        assert regime.below_threshold
        assert regime.margin == pytest.approx(7.02e12 / 1.65e8)

    def test_pair_regime_above_threshold(self):
        """Flux above threshold is reported, not raised."""
        config = SensorConfig(scheme=Scheme.QUANTUM, pair_flux=1e13)
        assert not PhotonicsService.check_pair_regime(config).below_threshold


@pytest.mark.unit
@pytest.mark.service
class TestPhotonicsProperties:
    """Randomised checks of the state engine and the sensitivity algebra."""

    def test_literal_projection(self):
        """Signal and idler at pi/2 each: <sigma_x> = p+ - p- = -1."""
        forward = PhotonicsService.apply_sample_phase(
            PhotonicsService.prepare_pair(PairTag.FORWARD), math.pi / 2, math.pi / 2
        )
        state = PhotonicsService.apply_wswp_and_overlap(forward, PhotonicsService.prepare_pair(PairTag.BACKWARD))
        p_plus, p_minus = PhotonicsService.project_sigma_x(state)
        assert p_plus - p_minus == pytest.approx(-1.0, abs=1e-12)

    def test_projection_matches_fringe_intensity(self):
        """State-engine probabilities equal the nu = 1 fringe over 1000 random phases."""
        rng = np.random.default_rng(2024)
        for phase in rng.uniform(-4 * math.pi, 4 * math.pi, 1000):
            p_plus, p_minus = PhotonicsService.project_sigma_x(_overlapped(float(phase)))
            assert p_plus == pytest.approx(PhotonicsService.fringe_intensity(float(phase), 1.0, 1), abs=1e-12)
            assert p_minus == pytest.approx(PhotonicsService.fringe_intensity(float(phase), 1.0, -1), abs=1e-12)

    def test_overlap_norm_over_random_phases(self):
        rng = np.random.default_rng(7)
        for signal, idler in rng.uniform(-10.0, 10.0, (100, 2)):
            forward = PhotonicsService.apply_sample_phase(PhotonicsService.prepare_pair(), float(signal), float(idler))
            assert abs(forward.norm() - 1) < 1e-12
            state = PhotonicsService.apply_wswp_and_overlap(forward, PhotonicsService.prepare_pair(PairTag.BACKWARD))
            assert abs(state.norm() - 1) < 1e-12

    def test_fringe_outputs_sum_to_one(self):
        """I+ + I- = 1 for any phase and visibility."""
        rng = np.random.default_rng(11)
        for phase, visibility in zip(rng.uniform(-20.0, 20.0, 1000), rng.uniform(0.0, 1.0, 1000)):
            total = PhotonicsService.fringe_intensity(float(phase), float(visibility), 1) + (
                PhotonicsService.fringe_intensity(float(phase), float(visibility), -1)
            )
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_break_even(self):
        """No internal efficiency, full visibility: exactly the ideal classical sensor."""
        assert PhotonicsService.quantum_advantage_factor(0.0, 1.0) == pytest.approx(1.0, abs=1e-15)

    def test_advantage_factor_is_monotonic(self):
        grid = np.linspace(0.0, 1.0, 51)
        by_eta = [PhotonicsService.quantum_advantage_factor(float(eta), 0.85) for eta in grid]
        by_visibility = [PhotonicsService.quantum_advantage_factor(0.74, float(nu)) for nu in grid]
        assert np.all(np.diff(by_eta) > 0)
        assert np.all(np.diff(by_visibility) > 0)

    def test_quantum_beats_classical_when_factor_is_large_enough(self):
        """S_q < S_c exactly when the advantage factor exceeds sqrt(eta_int_c) nu_c (1000 draws)."""
        rng = np.random.default_rng(31)
        draws = rng.uniform(0.05, 1.0, (1000, 5))
        for eta_ext, eta_c, nu_c, eta_q, nu_q in draws:
            classical = SensorConfig(eta_ext=eta_ext, eta_int=eta_c, visibility=nu_c)
            quantum = SensorConfig(scheme=Scheme.QUANTUM, eta_ext=eta_ext, eta_int=eta_q, visibility=nu_q)
            factor = PhotonicsService.quantum_advantage_factor(float(eta_q), float(nu_q))
            threshold = math.sqrt(eta_c) * nu_c
            if abs(factor - threshold) < 1e-9:
                continue
            beats = PhotonicsService.quantum_sensitivity(quantum) < PhotonicsService.classical_sensitivity(classical)
            assert beats == (factor > threshold)
