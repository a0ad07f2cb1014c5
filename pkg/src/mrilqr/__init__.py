"""Sampled-data LQR synthesis for plants driven by mixed hold and impulsive inputs.

The package covers the full pipeline: exact discretization of the mixed
input class, controllability diagnosis including pathological sampling
periods, infinite-horizon LQR through a cross-term discrete Riccati
equation, preview control against a known future impulsive disturbance,
and a continuous-time simulation oracle that verifies every synthesis
result against the cost it claims.
"""

from .controllability import (
    ControllabilityReport,
    PathologicalCandidate,
    ResonantSet,
    candidate_pathological_periods,
    is_pathological,
    kalman_controllable,
    reduced_hautus_mri,
    resonant_eigenvalues,
)
from .discretize import (
    ContinuousPlant,
    CostWeights,
    SampledCost,
    SampledModel,
    cost_matrices,
    restrict_input_mode,
    sample_plant,
)
from .errors import (
    DareDivergenceError,
    NumericalError,
    SimulationDivergence,
    UncontrollablePlantError,
)
from .numkernel import (
    eigenvalues,
    expm,
    expm_block_integrals,
    expm_gram_integral,
    null_space_dim,
)
from .preview import (
    PreviewPlan,
    closed_loop_G,
    feedforward_sequence,
    gamma_and_cost,
    multi_impulse_measure,
    preview_plan,
)
from .riccati import (
    MriLqrDesign,
    RiccatiSolution,
    dare_residual,
    design,
    infinite_horizon_cost,
    mri_gains,
    solve_dare,
)
from .simulate import (
    DisturbanceSpec,
    InputPolicy,
    Trajectory,
    certified_horizon,
    continuous_cost,
    impulse_hold_matrix,
    cost_equivalence_check,
    simulate_closed_loop,
    simulate_inputs,
)

__version__ = "0.1.0"
