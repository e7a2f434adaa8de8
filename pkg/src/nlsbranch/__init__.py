"""Continuation and bifurcation toolkit for 1D NLS bound states.

Computes, traces and classifies branches of stationary states of

    i u_t = (-Laplacian + V(x)) u + gamma |u|^p u

on a truncated line with Dirichlet boundaries: Newton and pseudo-arclength
solvers, Morse-index bookkeeping for the linearized operators, bifurcation
detection and branch switching, a Grillakis-Shatah-Strauss stability
classifier, a constrained-minimization oracle, large-E scaling diagnostics,
and split-step time evolution for dynamic cross-checks.
"""

from .grid import Grid, build_grid, inner_product, laplacian_apply
from .model import (
    Functionals,
    ModelSpec,
    PotentialSpec,
    charge,
    energy,
    linearization,
    pohozaev_residual,
    potential_eval,
    residual,
)
from .spectral import SpectralSummary, eig_count_below, smallest_eigenpairs, summarize
from .solver import NewtonOpts, bordered_corrector, newton_fixed_E, seed_primary_branch
from .continuation import Branch, BranchPoint, ContinuationControls, trace_branch
from .bifurcation import BifurcationEvent, detect_events, locate_event, switch_branch
from .stability import StabilityTag, annotate_branch, classify_gss
from .variational import FlowOpts, asymmetry, minimize_at_charge
from .asymptotics import (
    ScalingRow,
    limit_profile_residual,
    predicted_morse,
    rescale_profile,
    scaling_diagnostics,
)
from .evolution import evolve, orbital_distance, stability_probe

__version__ = "0.1.0"
