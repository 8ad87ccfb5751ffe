from __future__ import annotations

import cmath
import math
import numpy as np
import numpy.typing as npt
from pydantic import BaseModel
from typing import overload

from app.core.errors import ContractViolationError, DomainError
from app.schemas.detection import FloatArray
from app.schemas.sensor import Scheme, SensorConfig
from app.schemas.state import NORM_TOLERANCE, Basis, PairTag, TwoPhotonState

_SQRT_HALF = math.sqrt(0.5)

# |+> and |-> of the signal polarization (V, H components)
_PLUS = np.array([_SQRT_HALF, _SQRT_HALF], dtype=np.complex128)
_MINUS = np.array([_SQRT_HALF, -_SQRT_HALF], dtype=np.complex128)


class PairRegime(BaseModel):
    below_threshold: bool
    margin: float


def _as_matrix(state: TwoPhotonState) -> npt.NDArray[np.complex128]:
    """Amplitudes as a 2x2 matrix, rows = signal (V, H), columns = idler (V, H)."""
    return np.array(
        [
            [state.amplitude(Basis.VV), state.amplitude(Basis.VH)],
            [state.amplitude(Basis.HV), state.amplitude(Basis.HH)],
        ],
        dtype=np.complex128,
    )


def _from_matrix(matrix: npt.NDArray[np.complex128], tag: PairTag) -> TwoPhotonState:
    return TwoPhotonState(
        amplitudes={
            Basis.VV: complex(matrix[0, 0]),
            Basis.VH: complex(matrix[0, 1]),
            Basis.HV: complex(matrix[1, 0]),
            Basis.HH: complex(matrix[1, 1]),
        },
        tag=tag,
    )


def _require_tag(state: TwoPhotonState, tag: PairTag, operation: str) -> None:
    if state.tag != tag:
        raise ContractViolationError(
            f"{operation} requires a state tagged {tag.value!r}, got {state.tag.value!r}",
            details={"expected": tag.value, "actual": state.tag.value},
        )


class PhotonicsService:
    """Analytic model: pair state, fringes, sensitivities and limits."""

    # ---- State engineering ----
    @staticmethod
    def prepare_pair(tag: PairTag = PairTag.FORWARD) -> TwoPhotonState:
        """Type-0 pair |V,s>|V,i> generated in the forward or backward pass."""
        if tag == PairTag.OVERLAPPED:
            raise ContractViolationError("a freshly generated pair cannot be overlapped")
        return TwoPhotonState(amplitudes={Basis.VV: 1 + 0j}, tag=tag)

    @staticmethod
    def apply_sample_phase(
        state: TwoPhotonState, delta_phi_s: float, delta_phi_i: float
    ) -> TwoPhotonState:
        """Forward pair reflected at the sample mirror picks up dPhi_s + dPhi_i."""
        _require_tag(state, PairTag.FORWARD, "apply_sample_phase")
        factor = cmath.exp(1j * (delta_phi_s + delta_phi_i))
        return TwoPhotonState(
            amplitudes={basis: a * factor for basis, a in state.amplitudes.items()},
            tag=PairTag.FORWARD,
        )

    @staticmethod
    def apply_wswp_and_overlap(
        forward: TwoPhotonState, backward: TwoPhotonState
    ) -> TwoPhotonState:
        """
        Double pass through the wavelength-selective wave plate rotates the
        forward signal photon by 90 deg (V -> H, H -> -V), idler untouched;
        both contributions then share one spatial mode.
        """
        _require_tag(forward, PairTag.FORWARD, "apply_wswp_and_overlap")
        _require_tag(backward, PairTag.BACKWARD, "apply_wswp_and_overlap")
        for name, state in (("forward", forward), ("backward", backward)):
            if abs(state.norm() - 1.0) >= NORM_TOLERANCE:
                raise DomainError(f"{name} contribution is not normalized")

        rotation = np.array([[0, -1], [1, 0]], dtype=np.complex128)
        rotated = rotation @ _as_matrix(forward)
        reference = _as_matrix(backward)

        # contributions must be distinguishable (cross-polarized), no interference term
        overlap = complex(np.vdot(reference, rotated))
        if abs(overlap) > 1e-9:
            raise ContractViolationError(
                "forward and backward contributions are not orthogonal after the WSWP",
                details={"overlap": abs(overlap)},
            )

        combined = (reference + rotated) * _SQRT_HALF
        return _from_matrix(combined, PairTag.OVERLAPPED)

    @staticmethod
    def reject_idler(state: TwoPhotonState) -> npt.NDArray[np.complex128]:
        """Bandpass filter: trace out the idler, return the signal density matrix."""
        _require_tag(state, PairTag.OVERLAPPED, "reject_idler")
        matrix = _as_matrix(state)
        return matrix @ matrix.conj().T

    @staticmethod
    def project_sigma_x(state: TwoPhotonState) -> tuple[float, float]:
        _require_tag(state, PairTag.OVERLAPPED, "project_sigma_x")
        rho = PhotonicsService.reject_idler(state)
        p_plus = float(np.real(np.vdot(_PLUS, rho @ _PLUS)))
        p_minus = float(np.real(np.vdot(_MINUS, rho @ _MINUS)))
        return p_plus, p_minus

    # ---- Fringes and phase ----
    @staticmethod
    def fringe_intensity(phase: float, visibility: float, sign: int) -> float:
        if not 0 <= visibility <= 1:
            raise DomainError("visibility must be in [0, 1]", details={"visibility": visibility})
        if sign not in (1, -1):
            raise DomainError("sign must be +1 or -1", details={"sign": sign})
        return (1 + sign * visibility * math.cos(phase)) / 2

    @staticmethod
    def phase_per_nm(config: SensorConfig) -> float:
        """Double-pass phase slope in rad/nm of the configured scheme."""
        if config.scheme == Scheme.CLASSICAL:
            return 4 * math.pi / config.lambda_classical
        return 4 * math.pi * (1 / config.lambda_signal + 1 / config.lambda_idler)

    @overload
    @staticmethod
    def displacement_to_phase(d: float, config: SensorConfig) -> float: ...

    @overload
    @staticmethod
    def displacement_to_phase(d: FloatArray, config: SensorConfig) -> FloatArray: ...

    @staticmethod
    # Mirror displacement (nm) -> optical phase; scalars stay scalars
    def displacement_to_phase(d: float | FloatArray, config: SensorConfig) -> float | FloatArray:
        arr = np.asarray(d, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise DomainError("displacement must be finite")
        phase = arr * PhotonicsService.phase_per_nm(config)
        return float(phase) if phase.ndim == 0 else phase

    @staticmethod
    def fringe_count(phase_start: float, phase_end: float) -> float:
        return abs(phase_end - phase_start) / (2 * math.pi)

    # ---- Sensitivities ----
    @staticmethod
    def classical_sensitivity(config: SensorConfig) -> float:
        product = config.eta_ext * config.eta_int * config.visibility ** 2
        if product <= 0:
            raise DomainError(
                "classical sensitivity is singular for zero efficiency or visibility",
                details={"eta_ext": config.eta_ext, "eta_int": config.eta_int, "visibility": config.visibility},
            )
        return 1 / math.sqrt(product)

    @staticmethod
    def quantum_sensitivity(config: SensorConfig) -> float:
        product = config.eta_ext * (config.eta_int + 1) * config.visibility ** 2
        if product <= 0:
            raise DomainError(
                "quantum sensitivity is singular for zero efficiency or visibility",
                details={"eta_ext": config.eta_ext, "eta_int": config.eta_int, "visibility": config.visibility},
            )
        return 1 / math.sqrt(product)

    @staticmethod
    def sensitivity(config: SensorConfig) -> float:
        if config.scheme == Scheme.CLASSICAL:
            return PhotonicsService.classical_sensitivity(config)
        return PhotonicsService.quantum_sensitivity(config)

    @staticmethod
    def quantum_advantage_factor(eta_int_q: float, nu_q: float) -> float:
        """> 1 means the quantum sensor beats the ideal classical one."""
        if not 0 <= eta_int_q <= 1:
            raise DomainError("eta_int_q must be in [0, 1]", details={"eta_int_q": eta_int_q})
        if not 0 <= nu_q <= 1:
            raise DomainError("nu_q must be in [0, 1]", details={"nu_q": nu_q})
        return math.sqrt((eta_int_q + 1) * nu_q ** 2)

    # ---- Scaling limits ----
    @staticmethod
    def snl_phase_noise(n: float) -> float:
        if not n > 0:
            raise DomainError("photon number must be > 0", details={"N": n})
        return 1 / math.sqrt(n)

    @staticmethod
    def heisenberg_limit(n: float) -> float:
        if not n > 0:
            raise DomainError("photon number must be > 0", details={"N": n})
        return 1 / n

    @staticmethod
    def heisenberg_enhancement(n: float) -> float:
        return PhotonicsService.snl_phase_noise(n) / PhotonicsService.heisenberg_limit(n)

    @staticmethod
    def check_pair_regime(config: SensorConfig) -> PairRegime:
        margin = config.parametric_threshold / config.pair_flux
        return PairRegime(below_threshold=config.pair_flux < config.parametric_threshold, margin=margin)
