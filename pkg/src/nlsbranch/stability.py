"""Orbital-stability classification by the Grillakis-Shatah-Strauss criterion.

With n the total count of negative eigenvalues of (L_plus, L_minus): saddles
with n >= 2 are unstable; n = 1 states are stable when the squared L2 norm
grows with E along the branch and unstable when it shrinks; n = 0 states are
constrained minimizers, stable. The gauge kernel of L_minus carries
eigenvalue zero and is never part of n. Slopes within tolerance of zero and
degenerate L_plus ground states stay indeterminate.
"""

from dataclasses import dataclass

from .continuation import Branch, BranchPoint


@dataclass(frozen=True)
class StabilityTag:
    value: str  # 'stable' / 'unstable' / 'indeterminate'
    reason: str


def default_slope_tol(point: BranchPoint) -> float:
    return 1e-6 * max(1.0, point.Q)


def classify_gss(point: BranchPoint, slope_tol: float | None = None) -> StabilityTag:
    """GSS decision table from the Morse counts and the slope dQ/dE."""
    if point.spectral is None:
        raise ValueError("point carries no spectral summary")
    if slope_tol is None:
        slope_tol = default_slope_tol(point)
    spec = point.spectral
    n = spec.n_total
    slope = point.slope_dQdE
    if abs(spec.lambda_min_plus) <= 10.0 * spec.kernel_tol:
        return StabilityTag("indeterminate", "kernel degenerate")
    if n == 0:
        return StabilityTag("stable", "n=0")
    if n >= 2:
        return StabilityTag("unstable", "n>=2")
    if slope != slope:  # nan slope near a singular L_plus
        return StabilityTag("indeterminate", "kernel degenerate")
    if slope > slope_tol:
        return StabilityTag("stable", "n=1 & slope>0")
    if slope < -slope_tol:
        return StabilityTag("unstable", "n=1 & slope<0")
    return StabilityTag("indeterminate", "slope within tolerance of 0")


def annotate_branch(branch: Branch, slope_tol: float | None = None) -> list:
    """Tag every point in place; returns contiguous (start, end, tag) segments."""
    segments = []
    current = None
    start = 0
    for i, pt in enumerate(branch.points):
        tag = classify_gss(pt, slope_tol)
        pt.stability = tag.value
        if tag.value != current:
            if current is not None:
                segments.append((start, i - 1, current))
            current = tag.value
            start = i
    if current is not None:
        segments.append((start, len(branch.points) - 1, current))
    return segments
