import numpy as np
import pytest

from jcasbf.scenario import Scenario, SystemConfig


def make_synth_scenario(H, G, sigma_c2, sigma_s2, Pt=1.0, C=0):
    """Scenario wrapper around explicit H (Nt, K) and G (M+C, Nr, Nt)."""
    H = np.asarray(H, dtype=np.complex128)
    G = np.asarray(G, dtype=np.complex128)
    if G.ndim == 2:
        G = G[None, :, :]
    nt, k = H.shape
    j, nr, nt2 = G.shape
    assert nt2 == nt
    m = j - C
    sigma_c2 = tuple(np.broadcast_to(sigma_c2, (k,)).astype(float))
    cfg = SystemConfig(
        Nt=nt, Nr=nr, K=k, M=m, C=C, Pt=Pt, sigma_s2=float(sigma_s2), sigma_c2=sigma_c2,
    )
    return Scenario(
        config=cfg,
        H=H,
        G=G,
        user_angles=np.zeros(k),
        target_angles=np.zeros(m),
        clutter_angles=np.zeros(C),
        d_c=np.ones(k),
        d_s=np.ones(j),
        alpha_s=np.ones(j, dtype=np.complex128),
        seed=0,
    )


def random_scenario(rng, nt=4, nr=4, k=3, m=2, c=1, sigma_c2=1.0, sigma_s2=1.0, Pt=1.0):
    """Random dense synthetic instance (not from the channel model)."""
    H = rng.standard_normal((nt, k)) + 1j * rng.standard_normal((nt, k))
    G = rng.standard_normal((m + c, nr, nt)) + 1j * rng.standard_normal((m + c, nr, nt))
    return make_synth_scenario(H, G, sigma_c2, sigma_s2, Pt=Pt, C=c)


def random_feasible_w(rng, scn):
    from jcasbf.optimizer import project_S

    cfg = scn.config
    W = rng.standard_normal((cfg.Nt, cfg.K)) + 1j * rng.standard_normal((cfg.Nt, cfg.K))
    return project_S(W, cfg.Pt)


def random_combiner(rng, scn):
    cfg = scn.config
    return rng.standard_normal((cfg.Nr, cfg.M)) + 1j * rng.standard_normal((cfg.Nr, cfg.M))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
