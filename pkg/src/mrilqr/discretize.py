"""Sampled-data model and discrete-equivalent cost for mixed inputs.

A continuous-time LTI plant xdot = A x + B u is driven by an input made
of two components per sampling interval [kT, (k+1)T): a zero-order-hold
term u_c held constant, and an impulsive term u_i applied as a Dirac
weight at the sampling instant (a state jump x <- x + B u_i). The exact
sampled model is

    x_{k+1} = A_d x_k + B_d u_{c,k} + B_i u_{i,k}
    A_d = e^{AT},  Atilde = int_0^T e^{As} ds,  B_d = Atilde B,  B_i = A_d B

and the continuous quadratic cost with weights (Q, Rc, Ri) equals, along
sampled trajectories, the discrete sum

    sum_k  x_k' Q_d x_k + 2 x_k' S_d v_k + v_k' R_d v_k,   v_k = [u_c; u_i]

whose matrices are exact integrals of the intra-sample response. All
integrals here are evaluated through block matrix exponentials, so the
only error source is the matrix exponential itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numkernel
from .numkernel import as_matrix

__all__ = [
    "ContinuousPlant",
    "CostWeights",
    "SampledModel",
    "SampledCost",
    "sample_plant",
    "cost_matrices",
    "restrict_input_mode",
    "MODES",
]

MODES = ("regular", "impulsive", "mri")

#: Sampling periods below this are rejected rather than extrapolated.
MIN_PERIOD = 1e-12


@dataclass(frozen=True)
class ContinuousPlant:
    """Continuous-time LTI plant with a disturbance input channel.

    A is n x n (state), B is n x m (control), Btilde is n x r and maps
    impulsive disturbances into the state. Btilde defaults to a single
    zero column when the scenario has no disturbance.
    """

    A: np.ndarray
    B: np.ndarray
    Btilde: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != A.shape[0]:
            raise ValueError(f"B has {B.shape[0]} rows, expected {A.shape[0]}")
        Bt = self.Btilde
        Bt = np.zeros((A.shape[0], 1)) if Bt is None else as_matrix(Bt, "Btilde")
        if Bt.shape[0] != A.shape[0]:
            raise ValueError(f"Btilde has {Bt.shape[0]} rows, expected {A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Btilde", Bt)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def r(self) -> int:
        return self.Btilde.shape[1]


@dataclass(frozen=True)
class CostWeights:
    """Quadratic weights: Q psd on the state, Rc and Ri pd on the inputs."""

    Q: np.ndarray
    Rc: np.ndarray
    Ri: np.ndarray

    def __post_init__(self):
        Q = as_matrix(self.Q, "Q")
        Rc = as_matrix(self.Rc, "Rc")
        Ri = as_matrix(self.Ri, "Ri")
        numkernel.check_psd(Q, "Q")
        numkernel.check_pd(Rc, "Rc")
        numkernel.check_pd(Ri, "Ri")
        if Rc.shape != Ri.shape:
            raise ValueError(f"Rc {Rc.shape} and Ri {Ri.shape} must have equal shape")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "Rc", 0.5 * (Rc + Rc.T))
        object.__setattr__(self, "Ri", 0.5 * (Ri + Ri.T))


@dataclass(frozen=True)
class SampledModel:
    """Exact discretization at period T; B_i = A_d B by construction."""

    T: float
    A_d: np.ndarray
    Atilde: np.ndarray
    B_d: np.ndarray
    B_i: np.ndarray


@dataclass(frozen=True)
class SampledCost:
    """Discrete-equivalent cost blocks: Q_d (n x n), S_d (n x 2m), R_d (2m x 2m)."""

    Q_d: np.ndarray
    S_d: np.ndarray
    R_d: np.ndarray


def _check_period(T: float) -> float:
    T = float(T)
    if not (T > MIN_PERIOD):
        raise ValueError(f"sampling period must exceed {MIN_PERIOD}, got {T}")
    return T


def sample_plant(plant: ContinuousPlant, T: float) -> SampledModel:
    """Exact ZOH + impulse discretization of the plant at period T."""
    T = _check_period(T)
    A_d, Atilde, B_d = numkernel.expm_block_integrals(plant.A, plant.B, T)
    return SampledModel(T=T, A_d=A_d, Atilde=Atilde, B_d=B_d, B_i=A_d @ plant.B)


def cost_matrices(plant: ContinuousPlant, weights: CostWeights, T: float) -> SampledCost:
    """Exact discrete-equivalent cost matrices over one sampling interval.

    The intra-sample state response to a constant u_c and an initial
    impulse u_i is x(s) = e^{As} x + [int_0^s e^{At} dt B, e^{As} B] v,
    v = [u_c; u_i]. With the augmented generator E = [[A, B], [0, 0]] the
    three response maps are linear images of e^{Es}, so one Gram integral
    of size 2(n+m) yields Q_d, S_d and R_d jointly:

        H = int_0^T e^{E's} diag(Q, 0) e^{Es} ds,    G = L' H L

    where L stacks the constant selectors of [e^{As}, int e B, e^{As} B].
    The quadratic input penalties contribute the additive block
    diag(T Rc, Ri) to R_d.
    """
    T = _check_period(T)
    if weights.Q.shape[0] != plant.n:
        raise ValueError(f"Q has shape {weights.Q.shape}, expected ({plant.n}, {plant.n})")
    if weights.Rc.shape[0] != plant.m:
        raise ValueError(f"Rc has shape {weights.Rc.shape}, expected ({plant.m}, {plant.m})")
    n, m = plant.n, plant.m

    E = np.zeros((n + m, n + m))
    E[:n, :n] = plant.A
    E[:n, n:] = plant.B
    Qbar = np.zeros((n + m, n + m))
    Qbar[:n, :n] = weights.Q
    H = numkernel.expm_gram_integral(E, Qbar, T)

    # Columns of [e^{As}, int_0^s e^{At} dt B, e^{As} B] as images of e^{Es}.
    L = np.zeros((n + m, n + 2 * m))
    L[:n, :n] = np.eye(n)
    L[n:, n : n + m] = np.eye(m)
    L[:n, n + m :] = plant.B
    G = L.T @ H @ L
    G = 0.5 * (G + G.T)

    R_d = G[n:, n:].copy()
    R_d[:m, :m] += T * weights.Rc
    R_d[m:, m:] += weights.Ri
    return SampledCost(Q_d=G[:n, :n], S_d=G[:n, n:], R_d=0.5 * (R_d + R_d.T))


def restrict_input_mode(
    model: SampledModel, cost: SampledCost, mode: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Input-channel selection shared by all three controller variants.

    mri keeps both channels ([B_d B_i] with the full S_d, R_d); regular
    keeps the hold channel only (first m columns/blocks); impulsive keeps
    the impulse channel only (last m).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    m = model.B_d.shape[1]
    if mode == "mri":
        return np.hstack([model.B_d, model.B_i]), cost.S_d, cost.R_d
    if mode == "regular":
        return model.B_d, cost.S_d[:, :m], cost.R_d[:m, :m]
    return model.B_i, cost.S_d[:, m:], cost.R_d[m:, m:]
