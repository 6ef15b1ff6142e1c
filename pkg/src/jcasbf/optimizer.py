"""Alternating optimizer for the fairness beamforming problem.

Each outer layer refreshes the softmin weights and quadratic-transform
auxiliaries in closed form, solves the combiner block exactly, then runs
projected gradient steps on the precoder with normalized gradients. Step
sizes are fixed, found by backtracking line search, or taken from a
trained per-layer grid (the unfolded mode).
"""

from __future__ import annotations

import csv
import dataclasses
import time
from dataclasses import dataclass, field

import numpy as np

from . import metrics, numerics
from .errors import (
    DimensionMismatch,
    NonFiniteError,
    ScheduleMismatch,
    ZeroCombiner,
    ZeroTheta,
)
from .metrics import AuxState, BeamformerState
from .scenario import Scenario

GRAD_NORM_FLOOR = 1e-14
ROW_POWER_FLOOR_RTOL = 1e-12
ZERO_THETA_TOL = 1e-14

MODES = ("fixed_step", "backtracking", "unfolded")
PROJECTIONS = ("boundary_normalize", "true_projection")


@dataclass(frozen=True)
class BacktrackingConfig:
    """Armijo line-search settings for the dynamic-step baseline."""

    beta0: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_halvings: int = 30

    def __post_init__(self):
        if self.beta0 <= 0 or not 0 < self.shrink < 1 or self.armijo_c <= 0:
            raise ValueError("invalid backtracking parameters")


@dataclass(frozen=True)
class SolverConfig:
    """Layer schedule, mode, and step-size policy for one solve.

    `stop_tol` enables early stopping for run-until-convergence
    baselines: stop when |h_l - h_{l-window}| <= stop_tol * |h_{l-window}|.
    """

    delta: float = 1.0
    L_out: int = 50
    L_in: int = 3
    I_w: int = 2
    mode: str = "fixed_step"
    fixed_beta: float = 0.01
    backtracking: BacktrackingConfig = field(default_factory=BacktrackingConfig)
    projection_mode: str = "boundary_normalize"
    mu_c: float = 10.0
    mu_s: float = 10.0
    stop_tol: float | None = None
    stop_window: int = 5

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.L_out < 1 or self.L_in < 0 or self.I_w < 1:
            raise ValueError("layer counts out of range")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.projection_mode not in PROJECTIONS:
            raise ValueError(f"projection_mode must be one of {PROJECTIONS}")
        if self.fixed_beta <= 0:
            raise ValueError("fixed_beta must be positive")


@dataclass
class GradientPieces:
    """Fixed coefficients of the convex precoder subproblem.

    x is (K, Nt); y is (Nt, Nt) Hermitian PSD; sigma1 / sigma2 hold the
    diagonals of the two K x K weight matrices.
    """

    x: np.ndarray
    y: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray


@dataclass
class IterTrace:
    """Per-outer-layer record of one solve.

    `surrogate` is evaluated at the layer's fresh auxiliaries on the
    state entering the layer (where it matches the weighted true rates);
    the other columns describe the state after the layer's updates.
    Length equals the number of layers actually executed.
    """

    h: list = field(default_factory=list)
    min_sinr: list = field(default_factory=list)
    min_scnr: list = field(default_factory=list)
    surrogate: list = field(default_factory=list)
    elapsed_s: list = field(default_factory=list)

    def __len__(self):
        return len(self.h)

    def append(self, h, min_sinr, min_scnr, surrogate, elapsed_s):
        self.h.append(float(h))
        self.min_sinr.append(float(min_sinr))
        self.min_scnr.append(float(min_scnr))
        self.surrogate.append(float(surrogate))
        self.elapsed_s.append(float(elapsed_s))

    def to_csv(self, path) -> None:
        """Write columns layer,h,min_sinr_db,min_scnr_db,surrogate,elapsed_s."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer", "h", "min_sinr_db", "min_scnr_db", "surrogate", "elapsed_s"])
            for i in range(len(self.h)):
                writer.writerow(
                    [
                        i + 1,
                        repr(self.h[i]),
                        repr(float(10.0 * np.log10(self.min_sinr[i]))),
                        repr(float(10.0 * np.log10(self.min_scnr[i]))),
                        repr(self.surrogate[i]),
                        repr(self.elapsed_s[i]),
                    ]
                )


def update_aux(
    scn: Scenario, W: np.ndarray, F: np.ndarray, mu_c: float, mu_s: float
) -> AuxState:
    """Closed-form refresh of (z, xi, theta) from the current (W, F).

    xi takes the current SINR / SCNR values; z are softmin weights of the
    corresponding rates; theta are the quadratic-transform maximizers.
    """
    gamma_c = metrics.sinr_comm(scn, W)
    gamma_s = metrics.scnr_sense(scn, W, F)

    cross = scn.H.conj().T @ W
    denom_c = np.sum(np.abs(cross) ** 2, axis=1) + np.asarray(scn.config.sigma_c2)
    theta_c = np.sqrt(1.0 + gamma_c) * np.diag(cross) / denom_c

    p, noise = metrics.sensing_powers(scn, W, F)
    denom_s = p.sum(axis=0) + noise
    fgw_own = np.einsum("rm,mrn,nk->mk", F.conj(), scn.G[: scn.config.M], W)
    Theta_s = np.sqrt(1.0 + gamma_s)[:, None] * fgw_own / denom_s[:, None]

    return AuxState(
        z_c=metrics.softmin_weights(np.log1p(gamma_c), mu_c),
        z_s=metrics.softmin_weights(np.log1p(gamma_s), mu_s),
        xi_c=gamma_c,
        xi_s=gamma_s,
        theta_c=theta_c,
        Theta_s=Theta_s,
    )


def _echo_covariance(scn: Scenario, W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sum_j G_j W W^H G_j^H + Nr sigma_s^2 I, stacked G_j W)."""
    gw = scn.G @ W  # (J, Nr, K)
    cov = np.einsum("jrk,jsk->rs", gw, gw.conj())
    cov = cov + scn.config.Nr * scn.config.sigma_s2 * np.eye(scn.config.Nr)
    return 0.5 * (cov + cov.conj().T), gw


def update_combiner(scn: Scenario, W: np.ndarray, aux: AuxState) -> np.ndarray:
    """Exact combiner maximizing each surrogate sensing term.

    f_m = sqrt(1+xi_sm) / ||theta_sm||^2
          * (sum_j G_j W W^H G_j^H + Nr sigma_s^2 I)^{-1} G_m W theta_sm^H
    """
    theta_norms2 = np.sum(np.abs(aux.Theta_s) ** 2, axis=1)
    if np.any(np.sqrt(theta_norms2) <= ZERO_THETA_TOL):
        raise ZeroTheta("a sensing auxiliary row is numerically zero")
    cov, gw = _echo_covariance(scn, W)
    rhs = np.stack(
        [gw[m] @ aux.Theta_s[m].conj() for m in range(scn.config.M)], axis=1
    )  # (Nr, M)
    scale = np.sqrt(1.0 + aux.xi_s) / theta_norms2
    return numerics.hermitian_solve(cov, rhs) * scale[None, :]


def gradient_pieces(scn: Scenario, aux: AuxState, F: np.ndarray, delta: float) -> GradientPieces:
    """Coefficients of the precoder subproblem at fixed auxiliaries."""
    cfg = scn.config
    if F.shape != (cfg.Nr, cfg.M):
        raise DimensionMismatch(f"F must be ({cfg.Nr}, {cfg.M}), got {F.shape}")
    weights = aux.z_s * np.sqrt(1.0 + aux.xi_s)  # (M,)
    fg = np.einsum("rm,mrn->mn", F.conj(), scn.G[: cfg.M])  # rows f_m^H G_m
    x = delta * np.einsum("m,mk,mn->kn", weights, aux.Theta_s.conj(), fg)

    theta_norms2 = np.sum(np.abs(aux.Theta_s) ** 2, axis=1)
    p_mid = (F * (aux.z_s * theta_norms2)[None, :]) @ F.conj().T  # (Nr, Nr)
    y = delta * np.einsum("jrn,rs,jsm->nm", scn.G.conj(), p_mid, scn.G)
    y = 0.5 * (y + y.conj().T)

    sigma1 = aux.z_c * np.sqrt(1.0 + aux.xi_c) * aux.theta_c
    sigma2 = aux.z_c * np.abs(aux.theta_c) ** 2
    return GradientPieces(x=x, y=y, sigma1=sigma1, sigma2=sigma2)


def _quad_lin(pieces: GradientPieces, H: np.ndarray):
    """(B, A) with g(W) = Re tr(W^H B W) - 2 Re tr(W A); grad = 2(B W - A^H)."""
    b = pieces.y + (H * pieces.sigma2[None, :]) @ H.conj().T
    a = pieces.x + pieces.sigma1.conj()[:, None] * H.conj().T  # (K, Nt)
    return b, a


def g_value(pieces: GradientPieces, H: np.ndarray, W: np.ndarray) -> float:
    """Convex subproblem objective g(W) minimized by the precoder steps."""
    b, a = _quad_lin(pieces, H)
    quad = np.vdot(W, b @ W).real
    lin = np.einsum("nk,kn->", W, a)
    return float(quad - 2.0 * lin.real)


def grad_W(pieces: GradientPieces, H: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Gradient 2 (Y + H Sigma2 H^H) W - 2 (H Sigma1 + X^H)."""
    if H.shape[0] != W.shape[0] or pieces.x.shape != (W.shape[1], W.shape[0]):
        raise DimensionMismatch("gradient pieces do not match (H, W)")
    b, a = _quad_lin(pieces, H)
    return 2.0 * (b @ W - a.conj().T)


def project_S(W: np.ndarray, Pt: float, mode: str = "boundary_normalize") -> np.ndarray:
    """Map onto the per-antenna power set diag(W W^H) <= (Pt/Nt) 1.

    boundary_normalize scales every row to power exactly Pt/Nt (row
    powers floored at 1e-12 * Pt/Nt before inversion); true_projection
    is the Euclidean projection, scaling down only offending rows.
    """
    if Pt <= 0:
        raise ValueError("Pt must be positive")
    nt = W.shape[0]
    cap = Pt / nt
    row_power = np.sum(np.abs(W) ** 2, axis=1)
    if mode == "boundary_normalize":
        floored = np.maximum(row_power, ROW_POWER_FLOOR_RTOL * cap)
        return W * np.sqrt(cap / floored)[:, None]
    if mode == "true_projection":
        scale = np.ones(nt)
        over = row_power > cap
        scale[over] = np.sqrt(cap / row_power[over])
        return W * scale[:, None]
    raise ValueError(f"unknown projection mode {mode!r}")


def pgd_step(
    W: np.ndarray,
    grad: np.ndarray,
    beta: float,
    Pt: float,
    mode: str = "boundary_normalize",
) -> np.ndarray:
    """One projected step along the normalized gradient.

    Returns project(W - beta * grad / ||grad||_F); a vanishing gradient
    degenerates to project(W).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    norm = numerics.fro_norm(grad)
    if norm <= GRAD_NORM_FLOOR:
        return project_S(W, Pt, mode)
    return project_S(W - beta * grad / norm, Pt, mode)


def init_state(scn: Scenario) -> BeamformerState:
    """Matched-filter precoder and per-target max-SCNR combiner.

    W0 normalizes the channel matrix onto the power boundary; each f_m
    solves the generalized eigenproblem pairing its own echo covariance
    against clutter plus noise.
    """
    cfg = scn.config
    W0 = project_S(scn.H, cfg.Pt, "boundary_normalize")
    gw = scn.G @ W0
    outer = np.einsum("jrk,jsk->jrs", gw, gw.conj())  # (J, Nr, Nr)
    total = outer.sum(axis=0)
    noise = cfg.Nr * cfg.sigma_s2 * np.eye(cfg.Nr)
    F0 = np.empty((cfg.Nr, cfg.M), dtype=np.complex128)
    for m in range(cfg.M):
        a = 0.5 * (outer[m] + outer[m].conj().T)
        b = total - outer[m] + noise
        F0[:, m] = numerics.max_generalized_eigvec(a, 0.5 * (b + b.conj().T))
    return BeamformerState(W=W0, F=F0)


def _armijo_beta(W, grad, gnorm, g_fn, Pt, bt: BacktrackingConfig, proj_mode) -> float:
    """Largest tested step passing the sufficient-decrease condition.

    Returns 0.0 when no tested step qualifies, in which case the caller
    keeps W unchanged so g never increases.
    """
    g0 = g_fn(W)
    direction = grad / gnorm
    beta = bt.beta0
    for _ in range(bt.max_halvings + 1):
        cand = project_S(W - beta * direction, Pt, proj_mode)
        if g_fn(cand) <= g0 - bt.armijo_c * beta * gnorm:
            return beta
        beta *= bt.shrink
    return 0.0


def _check_finite(W, F, trace):
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(F))):
        raise NonFiniteError("iterate contains NaN or Inf", trace=trace)


def _noise_normalized(scn: Scenario):
    """Scenario with powers divided by sigma_s^2, plus the amplitude scale.

    SINR, SCNR, and h are invariant under (Pt, sigma^2, W) ->
    (Pt/s^2, sigma^2/s^2, W/s); working at sigma_s^2 = 1 puts
    ||W||_F = sqrt(Pt/sigma_s^2) at the scale the step sizes assume.
    """
    sigma_s2 = scn.config.sigma_s2
    if sigma_s2 == 1.0 and all(s == 1.0 for s in scn.config.sigma_c2):
        return scn, 1.0
    cfg = dataclasses.replace(
        scn.config,
        Pt=scn.config.Pt / sigma_s2,
        sigma_s2=1.0,
        sigma_c2=tuple(s / sigma_s2 for s in scn.config.sigma_c2),
    )
    return dataclasses.replace(scn, config=cfg), float(np.sqrt(sigma_s2))


def solve(
    scn: Scenario,
    cfg: SolverConfig,
    params=None,
    init: BeamformerState | None = None,
    on_layer=None,
    on_w_update=None,
):
    """Run the alternating optimizer and return (BeamformerState, IterTrace).

    `params` supplies the trained per-layer step sizes and softmin
    temperatures (required shape-compatible in unfolded mode; defaults to
    the standard initialization otherwise). Baseline modes run one loop
    of L_in steps per layer; unfolded mode repeats the inner block I_w
    times with its learned steps. Optional hooks observe every precoder
    update (`on_w_update(W)`) and every layer (`on_layer(l, W, F, aux)`).

    Internally the problem is rescaled to sigma_s^2 = 1 so that step
    sizes act on precoder amplitudes measured in noise units; every
    reported metric and the returned state are in the caller's units.
    """
    from .training import default_params

    if not (np.all(np.isfinite(scn.H)) and np.all(np.isfinite(scn.G))):
        raise NonFiniteError("scenario contains NaN or Inf", trace=IterTrace())
    if params is None:
        params = default_params(cfg.L_out, cfg.L_in, cfg.I_w, mu_c=cfg.mu_c, mu_s=cfg.mu_s)
    if cfg.mode == "unfolded" and params.beta.shape != (cfg.L_out, cfg.L_in):
        raise ScheduleMismatch(
            f"step grid {params.beta.shape} does not match schedule "
            f"({cfg.L_out}, {cfg.L_in})"
        )
    mu_c, mu_s = params.mu_c, params.mu_s

    state = init if init is not None else init_state(scn)
    scn, w_scale = _noise_normalized(scn)
    cfg_sys = scn.config
    W = project_S(
        np.asarray(state.W, dtype=np.complex128) / w_scale, cfg_sys.Pt, cfg.projection_mode
    )
    F = np.asarray(state.F, dtype=np.complex128)
    if np.any(np.linalg.norm(F, axis=0) == 0):
        raise ZeroCombiner("initial combiner has a zero column")

    i_w = cfg.I_w if cfg.mode == "unfolded" else 1
    trace = IterTrace()
    t0 = time.perf_counter()

    for ell in range(1, cfg.L_out + 1):
        aux = update_aux(scn, W, F, mu_c, mu_s)
        surr = metrics.surrogate_objective(scn, W, F, aux, cfg.delta)
        F = update_combiner(scn, W, aux)
        _check_finite(W, F, trace)
        pieces = gradient_pieces(scn, aux, F, cfg.delta)
        b_mat, a_mat = _quad_lin(pieces, scn.H)
        a_h = a_mat.conj().T

        def g_of(Wc):
            return float(
                np.vdot(Wc, b_mat @ Wc).real
                - 2.0 * np.einsum("nk,kn->", Wc, a_mat).real
            )

        for _ in range(i_w):
            for i in range(cfg.L_in):
                grad = 2.0 * (b_mat @ W - a_h)
                gnorm = numerics.fro_norm(grad)
                if gnorm <= GRAD_NORM_FLOOR:
                    W = project_S(W, cfg_sys.Pt, cfg.projection_mode)
                else:
                    if cfg.mode == "fixed_step":
                        beta = cfg.fixed_beta
                    elif cfg.mode == "unfolded":
                        beta = float(params.beta[ell - 1, i])
                    else:
                        beta = _armijo_beta(
                            W, grad, gnorm, g_of, cfg_sys.Pt,
                            cfg.backtracking, cfg.projection_mode,
                        )
                        if beta == 0.0:
                            if on_w_update is not None:
                                on_w_update(W * w_scale)
                            continue
                    W = pgd_step(W, grad, beta, cfg_sys.Pt, cfg.projection_mode)
                if on_w_update is not None:
                    on_w_update(W * w_scale)

        _check_finite(W, F, trace)
        gamma_c = metrics.sinr_comm(scn, W)
        gamma_s = metrics.scnr_sense(scn, W, F)
        h = float(np.min(np.log1p(gamma_c)) + cfg.delta * np.min(np.log1p(gamma_s)))
        if not np.isfinite(h) or not np.isfinite(surr):
            raise NonFiniteError("objective is not finite", trace=trace)
        trace.append(h, gamma_c.min(), gamma_s.min(), surr, time.perf_counter() - t0)
        if on_layer is not None:
            on_layer(ell, W * w_scale, F, aux)

        if cfg.stop_tol is not None and len(trace) > cfg.stop_window:
            prev = trace.h[-1 - cfg.stop_window]
            if abs(trace.h[-1] - prev) <= cfg.stop_tol * max(abs(prev), 1e-300):
                break

    return BeamformerState(W=W * w_scale, F=F), trace
