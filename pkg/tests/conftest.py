"""Shared plants, weights and oracle helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import quad_vec

from mrilqr import ContinuousPlant, CostWeights


@pytest.fixture
def souza_plant() -> ContinuousPlant:
    """Two-state oscillator whose hold-only discretization degrades at
    periods that are multiples of 2*pi/sqrt(23)."""
    return ContinuousPlant(
        A=[[0.0, 1.0], [-6.0, 1.0]],
        B=[[0.0], [1.0]],
        Btilde=[[1.0], [1.0]],
    )


@pytest.fixture
def souza_weights() -> CostWeights:
    return CostWeights(Q=[[1.0, 0.0], [0.0, 0.0]], Rc=[[1.0]], Ri=[[1.0]])


@pytest.fixture
def rotation_plant() -> ContinuousPlant:
    """Pure rotation: both channels lose controllability at T = 2*pi."""
    return ContinuousPlant(
        A=[[0.0, -1.0], [1.0, 0.0]],
        B=[[0.0], [1.0]],
        Btilde=[[1.0], [0.0]],
    )


@pytest.fixture
def insulin_plant() -> ContinuousPlant:
    return ContinuousPlant(
        A=np.diag([-0.0167, -0.01, -0.0083, -0.0143, -0.0091, -0.008]),
        B=[[15.0], [-75.0], [60.0], [0.0], [0.0], [0.0]],
        Btilde=[[0.0], [0.0], [0.0], [1.5909], [-9.1667], [7.5758]],
    )


INSULIN_CTILDE = np.array([[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]])


@pytest.fixture
def insulin_weights() -> CostWeights:
    return CostWeights(Q=INSULIN_CTILDE.T @ INSULIN_CTILDE, Rc=[[1.0]], Ri=[[1.0]])


def random_stable_plant(rng: np.random.Generator, n: int, m: int, margin: float = 0.3) -> ContinuousPlant:
    """Random plant with spectral abscissa pushed below -margin."""
    A = rng.normal(size=(n, n))
    shift = max(np.real(np.linalg.eigvals(A)).max(), 0.0) + margin
    A = A - shift * np.eye(n)
    B = rng.normal(size=(n, m))
    return ContinuousPlant(A, B, rng.normal(size=(n, 1)))


def random_controllable_plant(
    rng: np.random.Generator, n: int, m: int = 1, scale: float = 0.6
) -> ContinuousPlant:
    """Rejection-sample a controllable (A, B); generic draws almost always are.

    A is normalized to spectral norm ``scale`` so that e^{AT} stays well
    within double precision over the sampling periods the tests sweep;
    otherwise the Kalman rank oracle itself becomes untrustworthy.
    """
    from mrilqr import kalman_controllable

    for _ in range(100):
        A = rng.normal(size=(n, n))
        A *= scale / max(np.linalg.norm(A, 2), 1e-12)
        B = rng.normal(size=(n, m))
        if kalman_controllable(A, B):
            return ContinuousPlant(A, B, rng.normal(size=(n, 1)))
    raise AssertionError("failed to sample a controllable pair")


def quadrature_cost_matrices(plant: ContinuousPlant, weights: CostWeights, T: float):
    """Adaptive-quadrature oracle for the discrete-equivalent cost blocks.

    Independent of the block-exponential route: the hold response uses
    the closed form A^{-1}(e^{As} - I)B, so A must be invertible.
    """
    A, B, Q = plant.A, plant.B, weights.Q
    n = A.shape[0]
    Ainv = np.linalg.inv(A)

    def eAs(s):
        return scipy.linalg.expm(A * s)

    def Bdi(s):
        E = eAs(s)
        return np.hstack([Ainv @ (E - np.eye(n)) @ B, E @ B])

    kw = dict(epsabs=1e-13, epsrel=1e-13)
    Q_d, _ = quad_vec(lambda s: eAs(s).T @ Q @ eAs(s), 0, T, **kw)
    S_d, _ = quad_vec(lambda s: eAs(s).T @ Q @ Bdi(s), 0, T, **kw)
    R_g, _ = quad_vec(lambda s: Bdi(s).T @ Q @ Bdi(s), 0, T, **kw)
    m = B.shape[1]
    R_d = R_g.copy()
    R_d[:m, :m] += T * weights.Rc
    R_d[m:, m:] += weights.Ri
    return Q_d, S_d, R_d


def closed_loop_cost_matrix(A_d, B_sel, Q_d, S_sel, R_sel, K):
    """Exact infinite-horizon cost matrix of the feedback u = K x.

    Solves the closed-loop Lyapunov equation directly, independent of
    any Riccati machinery.
    """
    A_cl = A_d + B_sel @ K
    L = Q_d + S_sel @ K + K.T @ S_sel.T + K.T @ R_sel @ K
    return scipy.linalg.solve_discrete_lyapunov(A_cl.T, 0.5 * (L + L.T))


def relerr(got, expected) -> float:
    got = np.asarray(got, dtype=float)
    expected = np.asarray(expected, dtype=float)
    denom = max(np.linalg.norm(expected.ravel()), 1e-300)
    return float(np.linalg.norm((got - expected).ravel()) / denom)
