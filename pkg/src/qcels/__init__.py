"""Phase estimation by complex-exponential least squares.

Builds small spectral models, simulates shot-noisy Hadamard-test time
series, fits them with a single complex exponential, refines the phase over
doubling time steps, and adds a Fourier-filtered pipeline for small initial
overlaps plus a textbook QPE baseline for comparison sweeps.
"""

from .backend import active_backend, set_backend
from .spectrum import (
    HamiltonianMatrix,
    IntervalPair,
    SpectralModel,
    build_hubbard,
    build_tfim,
    eigendecompose,
    load_model,
    make_spectral_model,
    model_from_hamiltonian,
    normalize,
    paper_interval_recipe,
    relative_overlap,
    save_model,
)
from .sampler import (
    ShotRecord,
    TimeSeriesDataset,
    expectation,
    generate_dataset,
    generate_filtered_dataset,
    hadamard_shot,
    hadamard_shot_pair,
    load_dataset,
    noise_bound,
    noise_residual,
    save_dataset,
)
from .filters import (
    FourierFilter,
    build_filter,
    build_filter_paper_preset,
    constant_one_filter,
    eval_filter,
    filter_digest,
    load_filter,
    save_filter,
    shift_distribution,
)
from .estimator import (
    FitResult,
    alpha_constant,
    dirichlet_kernel,
    feasibility_delta,
    fit,
    geom_kernel_real,
    loss,
    objective,
    objective_many,
    optimal_amplitude,
    wrapped_distance,
)
from .multilevel import (
    EstimateResult,
    LevelRecord,
    LevelSchedule,
    build_schedule,
    cost_report,
    gap_limited_delta,
    rough_estimate,
    run_gsee_small_overlap,
    run_multilevel,
)
from .qpe import QpeConfig, QpeResult, qpe_distribution, qpe_estimate

__version__ = "0.1.0"
