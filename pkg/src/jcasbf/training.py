"""Learning the per-layer step sizes and softmin temperatures.

The unfolded solver's scalars are tuned by minimizing a layer-weighted
negative-utility loss over a scenario dataset. Gradients come from a
black-box estimator (SPSA by default, per-coordinate forward differences
for small test schedules); updates are moment-smoothed with Adam-style
constants and clamped to the parameter floors.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, NonFiniteError, ScheduleMismatch
from .scenario import Dataset, dataset_to_json

BETA_FLOOR = 1e-5
MU_FLOOR = 0.0
ESTIMATORS = ("spsa", "forward_fd")


@dataclass
class UnfoldedParams:
    """Trainable scalars: temperatures mu_s / mu_c and step grid beta.

    beta has shape (L_out, L_in) and is floored at 1e-5 entrywise;
    schedule is (L_out, L_in, I_w).
    """

    mu_s: float
    mu_c: float
    beta: np.ndarray
    schedule: tuple

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        l_out, l_in, i_w = self.schedule
        if self.beta.shape != (l_out, l_in):
            raise ValueError(
                f"beta shape {self.beta.shape} does not match schedule ({l_out}, {l_in})"
            )
        if i_w < 1:
            raise ValueError("I_w must be >= 1")
        if self.mu_s < MU_FLOOR or self.mu_c < MU_FLOOR:
            raise ValueError("temperatures must be nonnegative")
        if self.beta.size and self.beta.min() < BETA_FLOOR:
            raise ValueError(f"step sizes must be >= {BETA_FLOOR}")


def default_params(L_out: int, L_in: int, I_w: int, mu_c: float = 10.0, mu_s: float = 10.0):
    """Standard initialization: beta = 0.01 everywhere, mu = 10."""
    return UnfoldedParams(
        mu_s=mu_s,
        mu_c=mu_c,
        beta=np.full((L_out, L_in), 0.01),
        schedule=(L_out, L_in, I_w),
    )


def params_to_vector(params: UnfoldedParams) -> np.ndarray:
    """Flatten to [mu_s, mu_c, beta row-major]."""
    return np.concatenate(([params.mu_s, params.mu_c], params.beta.ravel()))


def vector_to_params(vec: np.ndarray, schedule: tuple) -> UnfoldedParams:
    l_out, l_in, _ = schedule
    return UnfoldedParams(
        mu_s=float(vec[0]),
        mu_c=float(vec[1]),
        beta=vec[2:].reshape(l_out, l_in).copy(),
        schedule=schedule,
    )


def _floors(schedule: tuple) -> np.ndarray:
    l_out, l_in, _ = schedule
    return np.concatenate(([MU_FLOOR, MU_FLOOR], np.full(l_out * l_in, BETA_FLOOR)))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    estimator: str = "spsa"
    learning_rate: float = 1e-3
    spsa_perturb: float = 1e-3
    spsa_probes: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.spsa_probes < 1:
            raise ValueError("invalid training counts")
        if self.learning_rate <= 0 or self.spsa_perturb <= 0:
            raise ValueError("learning_rate and spsa_perturb must be positive")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")


def training_loss(params: UnfoldedParams, batch, delta: float) -> float:
    """Layer-weighted negative utility, averaged over the batch.

    loss = -(1/B) sum_b sum_l (1/l) h_l(b), with h_l read from the
    unfolded solve's trace. Lower is better.
    """
    from .optimizer import SolverConfig, solve

    if not batch:
        raise ValueError("batch must be nonempty")
    l_out, l_in, i_w = params.schedule
    cfg = SolverConfig(delta=delta, L_out=l_out, L_in=l_in, I_w=i_w, mode="unfolded")
    weights = 1.0 / np.arange(1, l_out + 1)
    total = 0.0
    for scn in batch:
        _, trace = solve(scn, cfg, params=params)
        total += float(weights @ np.asarray(trace.h))
    return -total / len(batch)


def _eval_loss(loss_fn, vec, schedule, batch, delta) -> float:
    val = float(loss_fn(vector_to_params(vec, schedule), batch, delta))
    if not np.isfinite(val):
        raise NonFiniteError(f"loss evaluated to {val}")
    return val


def _spsa_probe(vec, floors, schedule, batch, delta, c, rng, loss_fn):
    """One two-sided probe; returns (gradient estimate, midpoint loss)."""
    delta_dirs = rng.choice((-1.0, 1.0), size=vec.size)
    lo = _eval_loss(loss_fn, np.maximum(vec - c * delta_dirs, floors), schedule, batch, delta)
    hi = _eval_loss(loss_fn, np.maximum(vec + c * delta_dirs, floors), schedule, batch, delta)
    return (hi - lo) / (2.0 * c) * delta_dirs, 0.5 * (hi + lo)


def estimate_gradient(
    params: UnfoldedParams,
    batch,
    delta: float,
    estimator: str = "spsa",
    rng=None,
    perturb: float = 1e-3,
    probes: int = 1,
    loss_fn=None,
) -> np.ndarray:
    """Stochastic gradient of the loss over the flattened parameters.

    SPSA draws a Rademacher direction, evaluates the loss at the two
    perturbed points (clamped to the parameter floors) and scales the
    difference back along the direction; `probes` > 1 averages
    independent draws. forward_fd is exact per-coordinate forward
    differencing, intended for small schedules only.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}")
    loss_fn = loss_fn if loss_fn is not None else training_loss
    vec = params_to_vector(params)
    floors = _floors(params.schedule)
    if estimator == "forward_fd":
        base = _eval_loss(loss_fn, vec, params.schedule, batch, delta)
        grad = np.zeros_like(vec)
        for i in range(vec.size):
            stepped = vec.copy()
            stepped[i] += perturb
            grad[i] = (
                _eval_loss(loss_fn, stepped, params.schedule, batch, delta) - base
            ) / perturb
        return grad
    rng = rng if rng is not None else np.random.default_rng(0)
    grad = np.zeros_like(vec)
    for _ in range(probes):
        g, _ = _spsa_probe(vec, floors, params.schedule, batch, delta, perturb, rng, loss_fn)
        grad += g
    return grad / probes


def train(
    ds: Dataset,
    cfg: TrainConfig,
    solver_cfg,
    delta: float,
    test_ds: Dataset | None = None,
    freeze_mu: bool = False,
):
    """Tune the unfolded parameters on a training dataset.

    Runs epochs of shuffled minibatches; each step estimates a gradient,
    applies an Adam-style update (decay 0.9 / 0.999, epsilon 1e-8) and
    clamps to the floors. Returns (params, history) where history holds
    the per-epoch mean train loss and, when `test_ds` is given, the mean
    final utility on the test set (index 0 is the pre-training value).
    A non-finite evaluation aborts and returns the last valid parameters.
    """
    from .optimizer import SolverConfig, solve

    if not ds.scenarios:
        raise ValueError("training dataset is empty")
    schedule = (solver_cfg.L_out, solver_cfg.L_in, solver_cfg.I_w)
    params = default_params(*schedule)
    vec = params_to_vector(params)
    floors = _floors(schedule)
    rng = np.random.default_rng(cfg.seed)

    def test_mean_h(current_vec) -> float:
        run_cfg = SolverConfig(
            delta=delta,
            L_out=schedule[0],
            L_in=schedule[1],
            I_w=schedule[2],
            mode="unfolded",
            projection_mode=solver_cfg.projection_mode,
        )
        p = vector_to_params(current_vec, schedule)
        vals = [solve(s, run_cfg, params=p)[1].h[-1] for s in test_ds.scenarios]
        return float(np.mean(vals))

    history = {"train_loss": [], "test_mean_h": []}
    if test_ds is not None:
        history["test_mean_h"].append(test_mean_h(vec))

    m = np.zeros_like(vec)
    v = np.zeros_like(vec)
    t = 0
    scns = ds.scenarios
    try:
        for _ in range(cfg.epochs):
            order = rng.permutation(len(scns))
            step_losses = []
            for start in range(0, len(scns), cfg.batch_size):
                batch = [scns[i] for i in order[start : start + cfg.batch_size]]
                grad = np.zeros_like(vec)
                probe_losses = []
                for _ in range(cfg.spsa_probes):
                    g, mid = _spsa_probe(
                        vec, floors, schedule, batch, delta,
                        cfg.spsa_perturb, rng, training_loss,
                    )
                    grad += g
                    probe_losses.append(mid)
                grad /= cfg.spsa_probes
                step_losses.append(float(np.mean(probe_losses)))
                if freeze_mu:
                    grad[:2] = 0.0
                t += 1
                m = 0.9 * m + 0.1 * grad
                v = 0.999 * v + 0.001 * grad**2
                m_hat = m / (1.0 - 0.9**t)
                v_hat = v / (1.0 - 0.999**t)
                vec = np.maximum(vec - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + 1e-8), floors)
            history["train_loss"].append(float(np.mean(step_losses)))
            if test_ds is not None:
                history["test_mean_h"].append(test_mean_h(vec))
    except NonFiniteError:
        pass  # keep the last parameters that evaluated cleanly
    return vector_to_params(vec, schedule), history


def dataset_digest(ds: Dataset) -> str:
    """Stable sha256 digest of a dataset's JSON form."""
    blob = json.dumps(dataset_to_json(ds), sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(params: UnfoldedParams, path, train_meta: dict | None = None) -> None:
    """Persist parameters as JSON (bit-exact float round trip)."""
    l_out, l_in, i_w = params.schedule
    payload = {
        "mu_s": params.mu_s,
        "mu_c": params.mu_c,
        "beta": [[float(x) for x in row] for row in params.beta],
        "schedule": {"L_out": l_out, "L_in": l_in, "I_w": i_w},
        "train_meta": train_meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path, solver_cfg=None) -> UnfoldedParams:
    """Restore parameters; verify the layer schedule when a solver config
    is given (I_w is a run-time choice and is not compared)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"$: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise FormatError("$: expected an object")
    for key in ("mu_s", "mu_c", "beta", "schedule"):
        if key not in obj:
            raise FormatError(f"$.{key}: missing")
    sched = obj["schedule"]
    if not isinstance(sched, dict) or not all(
        isinstance(sched.get(k), int) for k in ("L_out", "L_in", "I_w")
    ):
        raise FormatError("$.schedule: expected {L_out, L_in, I_w} integers")
    l_out, l_in, i_w = sched["L_out"], sched["L_in"], sched["I_w"]
    beta = obj["beta"]
    if (
        not isinstance(beta, list)
        or len(beta) != l_out
        or any(not isinstance(row, list) or len(row) != l_in for row in beta)
    ):
        raise FormatError(f"$.beta: expected a {l_out} x {l_in} array")
    if not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for row in beta for x in row
    ):
        raise FormatError("$.beta: entries must be numbers")
    if not isinstance(obj["mu_s"], (int, float)) or not isinstance(obj["mu_c"], (int, float)):
        raise FormatError("$.mu_s/mu_c: expected numbers")
    if solver_cfg is not None and (l_out, l_in) != (solver_cfg.L_out, solver_cfg.L_in):
        raise ScheduleMismatch(
            f"checkpoint schedule ({l_out}, {l_in}) does not match solver "
            f"({solver_cfg.L_out}, {solver_cfg.L_in})"
        )
    try:
        return UnfoldedParams(
            mu_s=float(obj["mu_s"]),
            mu_c=float(obj["mu_c"]),
            beta=np.asarray(beta, dtype=np.float64),
            schedule=(l_out, l_in, i_w),
        )
    except ValueError as exc:
        raise FormatError(f"$: {exc}") from exc
