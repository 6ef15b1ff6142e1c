"""Problem-instance generation and persistence.

A scenario bundles Rician user channels, rank-one line-of-sight response
matrices for targets and clutter, and the power/noise bookkeeping the
solver needs. Generation is a pure function of (config, seed); datasets
round-trip through JSON bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FormatError, NonPositiveDistance, SeparationInfeasible

_REJECTION_LIMIT = 1000


@dataclass(frozen=True)
class SystemConfig:
    """Static system parameters.

    Powers are linear mW. `rician_kappa` is the linear Rician factor
    (3 dB ~ 1.995). `zeta0_db` is the reference path gain at 1 m;
    `pathloss_decay=True` selects gain decaying as d^(-eps), while the
    default False keeps the d^(+eps) convention, which places rates at
    the O(1) scale the solver's step sizes and softmin temperatures are
    tuned for.
    """

    Nt: int = 8
    Nr: int = 8
    K: int = 4
    M: int = 2
    C: int = 2
    Pt: float = 1e-6  # -60 dBm
    sigma_s2: float = 1e-8  # -80 dBm
    sigma_c2: tuple = ()  # per-user noise powers; filled to K copies of 1e-8
    rician_kappa: float = 10.0 ** 0.3
    zeta0_db: float = -30.0
    eps_c: float = 3.0
    eps_s: float = 2.0
    angle_range_deg: float = 60.0
    min_sep_deg: float = 10.0
    pathloss_decay: bool = False

    def __post_init__(self):
        if min(self.Nt, self.Nr, self.K, self.M) < 1 or self.C < 0:
            raise ValueError("antenna/user/target counts out of range")
        sigma_c2 = tuple(self.sigma_c2) or (1e-8,) * self.K
        if len(sigma_c2) != self.K:
            raise ValueError(f"sigma_c2 must have length K={self.K}")
        if self.Pt <= 0 or self.sigma_s2 <= 0 or min(sigma_c2) <= 0:
            raise ValueError("powers must be positive")
        if self.rician_kappa < 0 or self.min_sep_deg < 0:
            raise ValueError("rician_kappa and min_sep_deg must be nonnegative")
        object.__setattr__(self, "sigma_c2", sigma_c2)

    def with_users(self, K: int) -> "SystemConfig":
        """Same system with a different user count (noise replicated)."""
        return replace(self, K=K, sigma_c2=(self.sigma_c2[0],) * K)


@dataclass
class Scenario:
    """One problem instance.

    H is (Nt, K) with user channels as columns; G stacks the M + C
    response matrices as (M + C, Nr, Nt), targets first. Angles are
    radians, distances meters.
    """

    config: SystemConfig
    H: np.ndarray
    G: np.ndarray
    user_angles: np.ndarray
    target_angles: np.ndarray
    clutter_angles: np.ndarray
    d_c: np.ndarray
    d_s: np.ndarray
    alpha_s: np.ndarray
    seed: int


@dataclass
class Dataset:
    config: SystemConfig
    scenarios: list
    split_tag: str = "train"

    def __post_init__(self):
        if self.split_tag not in ("train", "test"):
            raise ValueError(f"split_tag must be 'train' or 'test', got {self.split_tag!r}")
        seeds = [s.seed for s in self.scenarios]
        if len(set(seeds)) != len(seeds):
            raise ValueError("scenario seeds must be distinct")


def steering_vector(N: int, phi: float) -> np.ndarray:
    """Unit-norm steering vector of a half-wavelength ULA.

    Entry n is exp(j * pi * n * sin(phi)) / sqrt(N), phase referenced to
    element 0.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    n = np.arange(N)
    return np.exp(1j * np.pi * n * np.sin(phi)) / np.sqrt(N)


def path_gain(zeta0_db: float, d: float, eps: float, decay: bool = True) -> float:
    """Linear path gain 10^(zeta0_db/10) * d^(-eps).

    `decay=False` selects the literal growing convention d^(+eps).
    """
    if d <= 0:
        raise NonPositiveDistance(f"distance must be positive, got {d}")
    exponent = -eps if decay else eps
    return 10.0 ** (zeta0_db / 10.0) * float(d) ** exponent


def make_user_channel(cfg: SystemConfig, angle: float, d: float, rng) -> np.ndarray:
    """Draw one Rician user channel of length Nt.

    h = sqrt(zeta) * (sqrt(kappa/(1+kappa)) * a_t(angle) * sqrt(Nt)
                      + sqrt(1/(1+kappa)) * g)
    with g ~ CN(0, I), so E||h||^2 = zeta * Nt.
    """
    zeta = path_gain(cfg.zeta0_db, d, cfg.eps_c, cfg.pathloss_decay)
    kappa = cfg.rician_kappa
    if math.isinf(kappa):
        los_frac, nlos_frac = 1.0, 0.0
    else:
        los_frac = kappa / (1.0 + kappa)
        nlos_frac = 1.0 / (1.0 + kappa)
    scatter = (rng.standard_normal(cfg.Nt) + 1j * rng.standard_normal(cfg.Nt)) / np.sqrt(2.0)
    los = steering_vector(cfg.Nt, angle) * np.sqrt(cfg.Nt)
    return np.sqrt(zeta) * (np.sqrt(los_frac) * los + np.sqrt(nlos_frac) * scatter)


def make_response_matrix(cfg: SystemConfig, angle: float, d: float, alpha: complex) -> np.ndarray:
    """Rank-one (Nr, Nt) response gain * alpha * a_r(angle) a_t(angle)^H."""
    gain = path_gain(cfg.zeta0_db, d, cfg.eps_s, cfg.pathloss_decay)
    a_r = steering_vector(cfg.Nr, angle)
    a_t = steering_vector(cfg.Nt, angle)
    return gain * alpha * np.outer(a_r, a_t.conj())


def _min_pairwise_sep(angles_deg: np.ndarray) -> float:
    if len(angles_deg) < 2:
        return np.inf
    s = np.sort(angles_deg)
    return float(np.min(np.diff(s)))


def generate_scenario(cfg: SystemConfig, seed: int) -> Scenario:
    """Draw a full problem instance, deterministic given (cfg, seed).

    Target and clutter directions are redrawn wholesale until their
    pairwise separation clears `min_sep_deg`; user directions carry no
    separation constraint. Distances follow the affine-Gaussian model
    (users 100 + 20 eta, sensing 10 + 2 eta, eta ~ N(0,1)) clamped to
    1 m. Complex sensing gains are CN(0, 1).
    """
    n_dir = cfg.M + cfg.C
    width = 2.0 * cfg.angle_range_deg
    if n_dir >= 2 and cfg.min_sep_deg > 0 and (n_dir - 1) * cfg.min_sep_deg >= width:
        raise SeparationInfeasible(
            f"{n_dir} directions at {cfg.min_sep_deg} deg separation do not fit "
            f"in a {width} deg sector"
        )
    rng = np.random.default_rng(seed)

    for attempt in range(_REJECTION_LIMIT + 1):
        sensing_deg = rng.uniform(-cfg.angle_range_deg, cfg.angle_range_deg, n_dir)
        if _min_pairwise_sep(sensing_deg) >= cfg.min_sep_deg:
            break
    else:
        raise SeparationInfeasible(
            f"rejection sampling failed {_REJECTION_LIMIT} times for "
            f"{n_dir} directions at {cfg.min_sep_deg} deg"
        )
    user_deg = rng.uniform(-cfg.angle_range_deg, cfg.angle_range_deg, cfg.K)

    d_c = np.maximum(100.0 + 20.0 * rng.standard_normal(cfg.K), 1.0)
    d_s = np.maximum(10.0 + 2.0 * rng.standard_normal(n_dir), 1.0)
    alpha_s = (rng.standard_normal(n_dir) + 1j * rng.standard_normal(n_dir)) / np.sqrt(2.0)

    user_angles = np.deg2rad(user_deg)
    sensing_angles = np.deg2rad(sensing_deg)

    H = np.empty((cfg.Nt, cfg.K), dtype=np.complex128)
    for k in range(cfg.K):
        H[:, k] = make_user_channel(cfg, user_angles[k], d_c[k], rng)
    G = np.empty((n_dir, cfg.Nr, cfg.Nt), dtype=np.complex128)
    for i in range(n_dir):
        G[i] = make_response_matrix(cfg, sensing_angles[i], d_s[i], alpha_s[i])

    return Scenario(
        config=cfg,
        H=H,
        G=G,
        user_angles=user_angles,
        target_angles=sensing_angles[: cfg.M],
        clutter_angles=sensing_angles[cfg.M :],
        d_c=d_c,
        d_s=d_s,
        alpha_s=alpha_s,
        seed=int(seed),
    )


def make_dataset(cfg: SystemConfig, size: int, base_seed: int, split_tag: str) -> Dataset:
    """Dataset of `size` scenarios with seeds base_seed .. base_seed+size-1."""
    scenarios = [generate_scenario(cfg, base_seed + i) for i in range(size)]
    return Dataset(config=cfg, scenarios=scenarios, split_tag=split_tag)


# --- JSON persistence ------------------------------------------------------
# Complex scalars are [re, im]; matrices are nested row-major lists. Floats
# serialize via repr so the round trip is bit-exact.


def _c_to_json(z: complex):
    return [float(np.real(z)), float(np.imag(z))]


def _cvec_to_json(v: np.ndarray):
    return [_c_to_json(z) for z in v]


def _cmat_to_json(a: np.ndarray):
    return [_cvec_to_json(row) for row in a]


def _config_to_json(cfg: SystemConfig) -> dict:
    return {
        "Nt": cfg.Nt,
        "Nr": cfg.Nr,
        "K": cfg.K,
        "M": cfg.M,
        "C": cfg.C,
        "Pt": cfg.Pt,
        "sigma_s2": cfg.sigma_s2,
        "sigma_c2": list(cfg.sigma_c2),
        "rician_kappa": cfg.rician_kappa,
        "zeta0_db": cfg.zeta0_db,
        "eps_c": cfg.eps_c,
        "eps_s": cfg.eps_s,
        "angle_range_deg": cfg.angle_range_deg,
        "min_sep_deg": cfg.min_sep_deg,
        "pathloss_decay": cfg.pathloss_decay,
    }


def _scenario_to_json(s: Scenario) -> dict:
    return {
        "seed": s.seed,
        "user_angles": [float(x) for x in s.user_angles],
        "target_angles": [float(x) for x in s.target_angles],
        "clutter_angles": [float(x) for x in s.clutter_angles],
        "d_c": [float(x) for x in s.d_c],
        "d_s": [float(x) for x in s.d_s],
        "alpha_s": _cvec_to_json(s.alpha_s),
        "H": _cmat_to_json(s.H),
        "G": [_cmat_to_json(g) for g in s.G],
    }


def dataset_to_json(ds: Dataset) -> dict:
    return {
        "config": _config_to_json(ds.config),
        "split_tag": ds.split_tag,
        "scenarios": [_scenario_to_json(s) for s in ds.scenarios],
    }


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(ds), fh)


def _expect(obj, key, kind, path):
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected an object")
    if key not in obj:
        raise FormatError(f"{path}.{key}: missing")
    val = obj[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool) and kind is not bool:
        raise FormatError(f"{path}.{key}: expected {kind.__name__}")
    return val


def _complex_from_json(v, path) -> complex:
    if (
        not isinstance(v, list)
        or len(v) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
    ):
        raise FormatError(f"{path}: expected [re, im]")
    return complex(v[0], v[1])


def _cmat_from_json(rows, shape, path) -> np.ndarray:
    if not isinstance(rows, list) or len(rows) != shape[0]:
        raise FormatError(f"{path}: expected {shape[0]} rows")
    out = np.empty(shape, dtype=np.complex128)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != shape[1]:
            raise FormatError(f"{path}[{i}]: expected {shape[1]} entries")
        for j, v in enumerate(row):
            out[i, j] = _complex_from_json(v, f"{path}[{i}][{j}]")
    return out


def _float_list_from_json(vals, n, path) -> np.ndarray:
    if not isinstance(vals, list) or len(vals) != n:
        raise FormatError(f"{path}: expected {n} numbers")
    for i, v in enumerate(vals):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise FormatError(f"{path}[{i}]: expected a number")
    return np.asarray(vals, dtype=np.float64)


def config_from_json(obj, path="config") -> SystemConfig:
    try:
        return SystemConfig(
            Nt=_expect(obj, "Nt", int, path),
            Nr=_expect(obj, "Nr", int, path),
            K=_expect(obj, "K", int, path),
            M=_expect(obj, "M", int, path),
            C=_expect(obj, "C", int, path),
            Pt=_expect(obj, "Pt", float, path),
            sigma_s2=_expect(obj, "sigma_s2", float, path),
            sigma_c2=tuple(_expect(obj, "sigma_c2", list, path)),
            rician_kappa=_expect(obj, "rician_kappa", float, path),
            zeta0_db=_expect(obj, "zeta0_db", float, path),
            eps_c=_expect(obj, "eps_c", float, path),
            eps_s=_expect(obj, "eps_s", float, path),
            angle_range_deg=_expect(obj, "angle_range_deg", float, path),
            min_sep_deg=_expect(obj, "min_sep_deg", float, path),
            pathloss_decay=_expect(obj, "pathloss_decay", bool, path),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _scenario_from_json(obj, cfg: SystemConfig, path) -> Scenario:
    n_dir = cfg.M + cfg.C
    g_rows = _expect(obj, "G", list, path)
    if len(g_rows) != n_dir:
        raise FormatError(f"{path}.G: expected {n_dir} matrices")
    G = np.empty((n_dir, cfg.Nr, cfg.Nt), dtype=np.complex128)
    for i, entry in enumerate(g_rows):
        G[i] = _cmat_from_json(entry, (cfg.Nr, cfg.Nt), f"{path}.G[{i}]")
    return Scenario(
        config=cfg,
        H=_cmat_from_json(_expect(obj, "H", list, path), (cfg.Nt, cfg.K), f"{path}.H"),
        G=G,
        user_angles=_float_list_from_json(
            _expect(obj, "user_angles", list, path), cfg.K, f"{path}.user_angles"
        ),
        target_angles=_float_list_from_json(
            _expect(obj, "target_angles", list, path), cfg.M, f"{path}.target_angles"
        ),
        clutter_angles=_float_list_from_json(
            _expect(obj, "clutter_angles", list, path), cfg.C, f"{path}.clutter_angles"
        ),
        d_c=_float_list_from_json(_expect(obj, "d_c", list, path), cfg.K, f"{path}.d_c"),
        d_s=_float_list_from_json(_expect(obj, "d_s", list, path), n_dir, f"{path}.d_s"),
        alpha_s=np.asarray(
            [
                _complex_from_json(v, f"{path}.alpha_s[{i}]")
                for i, v in enumerate(_expect(obj, "alpha_s", list, path))
            ],
            dtype=np.complex128,
        ),
        seed=_expect(obj, "seed", int, path),
    )


def dataset_from_json(obj) -> Dataset:
    cfg = config_from_json(_expect(obj, "config", dict, "$"))
    tag = _expect(obj, "split_tag", str, "$")
    raw = _expect(obj, "scenarios", list, "$")
    scenarios = [_scenario_from_json(s, cfg, f"scenarios[{i}]") for i, s in enumerate(raw)]
    for i, s in enumerate(scenarios):
        if len(s.alpha_s) != cfg.M + cfg.C:
            raise FormatError(f"scenarios[{i}].alpha_s: expected {cfg.M + cfg.C} entries")
    try:
        return Dataset(config=cfg, scenarios=scenarios, split_tag=tag)
    except ValueError as exc:
        raise FormatError(f"$: {exc}") from exc


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"$: invalid JSON ({exc})") from exc
    return dataset_from_json(obj)
