"""Gravitational response to a flash: phase kicks and the smoothed potential.

In the sharp (delta-in-time, delta-in-space) limit the Poisson-sourced field
of a flash acts on the wavefunction as one instantaneous position-diagonal
unitary.  After particle k flashes at x_f, each particle l picks up the phase

    phi_l(x) = r_G(k, l) / |x - x_f|            (sharp sourcing)
    phi_l(x) = r_G(k, l) * erf(|x - x_f| / w) / |x - x_f|   (gaussian, width w)

per point x of its grid, with r_G(k, l) = G m_k m_l / (hbar lam).  The field
itself is never stored: only its time integral (the phase) is physical.

On a lattice the sharp 1/r is undefined at a node coinciding with x_f, so a
Plummer regulator 1/sqrt(r^2 + a^2) with a of order half a grid cell stands
in; its far-field error is below (a/r)^2/2.  The dim=1 harness keeps the same
radial profile with |x - x_f| the 1D distance (a > 0 mandatory there): it is
a test fixture preserving the 3D kernel structure, not 1D physics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .collapse import FlashEvent
from .state import GridSpec, WaveFunction
from .units import PhysicalParams


def softened_inverse_distance(r: np.ndarray, a: float) -> np.ndarray:
    """Plummer-regularized 1/r."""
    return 1.0 / np.sqrt(r**2 + a**2)


def smeared_newton_potential(d, r_C: float):
    """Shape of 1/r convolved with the collapse Gaussian; finite at contact.

    Returns erf(d/r_C)/d, with the analytic limit 2/(sqrt(pi) r_C) at d = 0;
    equal to the convolution of 1/r with the normalized Gaussian
    (pi r_C^2)^(-3/2) exp(-r^2/r_C^2).  Strictly decreasing in d and bounded
    by min(1/d, 2/(sqrt(pi) r_C)).
    """
    if not r_C > 0:
        raise ValueError("r_C must be positive")
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be nonnegative")
    u = d / r_C
    small = u < 1e-6
    # Series of erf(u)/u around 0 keeps the contact value exact.
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, (2 / np.sqrt(np.pi)) * (1 - u**2 / 3), erf(u) / u)
    out = out / r_C
    return out if out.shape else float(out)


def smeared_newton_gradient(d, r_C: float):
    """d/dd of :func:`smeared_newton_potential`; negative for d > 0."""
    d = np.asarray(d, dtype=float)
    u = d / r_C
    small = u < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(
            small,
            (2 / np.sqrt(np.pi)) * (-2 * u / 3) / r_C**2,
            ((2 / np.sqrt(np.pi)) * np.exp(-(u**2)) * u - erf(u)) / d**2,
        )
    return out if out.shape else float(out)


@dataclass(frozen=True)
class PhaseProfile:
    """Phase imprinted by one flash, tabulated per target particle.

    ``values[l]`` holds the real phase on particle l's grid (shape
    (n_points,)*dim).  In sharp mode with zero softening the value at x is
    exactly r_G(k, l)/|x - x_f| away from the singularity; with a > 0 all
    values are finite.
    """

    flash: FlashEvent
    pair_scales: tuple[float, ...]
    smearing_kind: str
    softening: float
    values: tuple[np.ndarray, ...]

    def total_phase(self, joint_shape: tuple[int, ...], dim: int) -> np.ndarray:
        """Broadcast sum of per-particle phases over the joint grid."""
        total = np.zeros(joint_shape)
        for l, vals in enumerate(self.values):
            shape = [1] * len(joint_shape)
            for a in range(dim):
                shape[l * dim + a] = vals.shape[a]
            total = total + vals.reshape(shape)
        return total


def phase_profile(
    x_f,
    params: PhysicalParams,
    k: int,
    grid: GridSpec,
    softening: float = 0.0,
) -> PhaseProfile:
    """Phase kick of a flash of particle k at x_f, on every particle's grid.

    Sharp smearing gives r_G(k,l)/sqrt(r^2 + a^2); gaussian smearing of
    width w gives r_G(k,l) * erf(r/w)/r, already finite at coincidence.
    Sharp mode with a = 0 is refused whenever a grid point coincides with
    x_f (the phase is undefined there) and always in the 1D harness.
    """
    n = params.n_particles
    if not 0 <= k < n:
        raise IndexError(f"particle index {k} out of range")
    if softening < 0:
        raise ValueError("softening must be nonnegative")
    x_f = np.atleast_1d(np.asarray(x_f, dtype=float))
    if x_f.shape != (grid.dim,):
        raise ValueError(f"flash position must have {grid.dim} components")

    points = grid.points()
    r = np.linalg.norm(points - x_f, axis=1).reshape((grid.n_points,) * grid.dim)

    kind = params.smearing.kind
    if kind == "sharp":
        if softening == 0.0:
            if grid.dim == 1:
                raise ValueError("the 1D harness requires softening a > 0")
            if np.min(r) == 0.0:
                raise ValueError(
                    "sharp phase undefined: flash position coincides with a "
                    "grid point and softening is zero"
                )
        shape = softened_inverse_distance(r, softening)
    else:
        shape = smeared_newton_potential(r, params.smearing.width)

    scales = tuple(float(s) for s in params.r_G_matrix()[k])
    values = tuple(scales[l] * shape for l in range(n))
    flash = FlashEvent(time=0.0, particle=k, position=tuple(x_f))
    return PhaseProfile(
        flash=flash,
        pair_scales=scales,
        smearing_kind=kind,
        softening=softening,
        values=values,
    )


def apply_gravitational_kick(psi: WaveFunction, profile: PhaseProfile) -> WaveFunction:
    """Multiply amplitudes by exp(i * sum_l phi_l(x_l)).

    The phase is position-diagonal, so the norm and every position density
    are preserved exactly.
    """
    if len(profile.values) != psi.n_particles:
        raise ValueError("profile and state disagree on particle count")
    for vals in profile.values:
        if vals.shape != (psi.grid.n_points,) * psi.grid.dim:
            raise ValueError("profile grid does not match the state grid")
    total = profile.total_phase(psi.amplitudes.shape, psi.grid.dim)
    return psi.with_amplitudes(psi.amplitudes * np.exp(1j * total))
