"""Performance functionals and the smoothed max-min surrogate.

Communication SINR, sensing SCNR, the weighted min-rate utility, softmin
simplex weights, and the quadratic-transform surrogate terms whose
block-wise maximizers the solver uses. All rates are natural-log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ZeroCombiner
from .scenario import Scenario


@dataclass
class BeamformerState:
    """Precoder W (Nt, K) and combiner F (Nr, M)."""

    W: np.ndarray
    F: np.ndarray


@dataclass
class AuxState:
    """Auxiliaries of the surrogate problem.

    z_c (K,) and z_s (M,) are simplex weights; xi_c / xi_s are the
    current SINR / SCNR values; theta_c (K,) and Theta_s (M, K) are the
    quadratic-transform auxiliaries.
    """

    z_c: np.ndarray
    z_s: np.ndarray
    xi_c: np.ndarray
    xi_s: np.ndarray
    theta_c: np.ndarray
    Theta_s: np.ndarray

    def validate(self, atol: float = 1e-12) -> None:
        for name, z in (("z_c", self.z_c), ("z_s", self.z_s)):
            if np.any(z < 0) or abs(float(np.sum(z)) - 1.0) > atol:
                raise ValueError(f"{name} is not a simplex weight vector")
        if np.any(self.xi_c < 0) or np.any(self.xi_s < 0):
            raise ValueError("xi entries must be nonnegative")


@dataclass
class RateVector:
    """Per-user and per-target rates log(1 + gamma), in nats."""

    r_c: np.ndarray
    r_s: np.ndarray


def _check_w(scn: Scenario, W: np.ndarray) -> np.ndarray:
    W = np.asarray(W)
    if W.shape != (scn.config.Nt, scn.config.K):
        raise DimensionMismatch(
            f"W must be ({scn.config.Nt}, {scn.config.K}), got {W.shape}"
        )
    return W


def _check_f(scn: Scenario, F: np.ndarray) -> np.ndarray:
    F = np.asarray(F)
    if F.shape != (scn.config.Nr, scn.config.M):
        raise DimensionMismatch(
            f"F must be ({scn.config.Nr}, {scn.config.M}), got {F.shape}"
        )
    return F


def sinr_comm(scn: Scenario, W: np.ndarray) -> np.ndarray:
    """Per-user SINR |h_k^H w_k|^2 / (sum_{j!=k} |h_k^H w_j|^2 + sigma_ck^2)."""
    W = _check_w(scn, W)
    cross = scn.H.conj().T @ W  # (K, K): row k holds h_k^H w_j
    power = np.abs(cross) ** 2
    signal = np.diag(power)
    total = power.sum(axis=1) + np.asarray(scn.config.sigma_c2)
    return signal / (total - signal)


def sensing_powers(scn: Scenario, W: np.ndarray, F: np.ndarray):
    """Echo powers p[j, m] = ||f_m^H G_j W||^2 and noise floor per target.

    Returns (p, noise) with noise_m = Nr * sigma_s^2 * ||f_m||^2.
    """
    fg = np.einsum("rm,jrn->jmn", F.conj(), scn.G)  # (J, M, Nt)
    fgw = fg @ W  # (J, M, K)
    p = np.sum(np.abs(fgw) ** 2, axis=2)  # (J, M)
    noise = scn.config.Nr * scn.config.sigma_s2 * np.sum(np.abs(F) ** 2, axis=0)
    return p, noise


def scnr_sense(scn: Scenario, W: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Per-target SCNR with the M + C clutter sum and Nr-scaled noise floor."""
    W = _check_w(scn, W)
    F = _check_f(scn, F)
    col_norms = np.linalg.norm(F, axis=0)
    if np.any(col_norms == 0):
        raise ZeroCombiner("combiner has a zero column")
    p, noise = sensing_powers(scn, W, F)
    m_idx = np.arange(scn.config.M)
    signal = p[m_idx, m_idx]
    total = p.sum(axis=0) + noise
    return signal / (total - signal)


def rates(scn: Scenario, W: np.ndarray, F: np.ndarray) -> RateVector:
    """Rates log(1 + SINR) and log(1 + SCNR)."""
    return RateVector(
        r_c=np.log1p(sinr_comm(scn, W)),
        r_s=np.log1p(scnr_sense(scn, W, F)),
    )


def utility_h(scn: Scenario, W: np.ndarray, F: np.ndarray, delta: float) -> float:
    """Weighted max-min utility min_k r_ck + delta * min_m r_sm."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    r = rates(scn, W, F)
    return float(np.min(r.r_c) + delta * np.min(r.r_s))


def softmin_weights(r: np.ndarray, mu: float) -> np.ndarray:
    """Simplex weights exp(-mu * r_i) / sum_j exp(-mu * r_j).

    Shift-stabilized by subtracting min(r) before exponentiation, so
    large mu * r cannot overflow. mu = 0 gives uniform weights.
    """
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    r = np.asarray(r, dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise ValueError("rates must be finite")
    e = np.exp(-mu * (r - r.min()))
    return e / e.sum()


def surrogate_terms(scn: Scenario, W: np.ndarray, F: np.ndarray, aux: AuxState):
    """Quadratic-transform surrogate terms (O_c length K, O_s length M).

    O_ck = log(1+xi_ck) + 2 sqrt(1+xi_ck) Re{h_k^H w_k theta_ck^*}
           - xi_ck - |theta_ck|^2 (sum_j |h_k^H w_j|^2 + sigma_ck^2)
    and analogously for O_sm with the full M + C echo sum plus the
    Nr sigma_s^2 ||f_m||^2 noise term.
    """
    W = _check_w(scn, W)
    F = _check_f(scn, F)
    if aux.Theta_s.shape != (scn.config.M, scn.config.K):
        raise DimensionMismatch(
            f"Theta_s must be ({scn.config.M}, {scn.config.K}), got {aux.Theta_s.shape}"
        )

    cross = scn.H.conj().T @ W
    denom_c = np.sum(np.abs(cross) ** 2, axis=1) + np.asarray(scn.config.sigma_c2)
    o_c = (
        np.log1p(aux.xi_c)
        + 2.0 * np.sqrt(1.0 + aux.xi_c) * np.real(np.diag(cross) * aux.theta_c.conj())
        - aux.xi_c
        - np.abs(aux.theta_c) ** 2 * denom_c
    )

    p, noise = sensing_powers(scn, W, F)
    denom_s = p.sum(axis=0) + noise  # (M,)
    fgw_own = np.einsum("rm,mrn,nk->mk", F.conj(), scn.G[: scn.config.M], W)  # (M, K)
    inner = np.real(np.sum(fgw_own * aux.Theta_s.conj(), axis=1))  # Re{f_m^H G_m W theta_sm^H}
    o_s = (
        np.log1p(aux.xi_s)
        + 2.0 * np.sqrt(1.0 + aux.xi_s) * inner
        - aux.xi_s
        - np.sum(np.abs(aux.Theta_s) ** 2, axis=1) * denom_s
    )
    return o_c, o_s


def surrogate_objective(
    scn: Scenario, W: np.ndarray, F: np.ndarray, aux: AuxState, delta: float
) -> float:
    """Simplex-weighted surrogate sum(z_c * O_c) + delta * sum(z_s * O_s)."""
    o_c, o_s = surrogate_terms(scn, W, F, aux)
    return float(aux.z_c @ o_c + delta * (aux.z_s @ o_s))
