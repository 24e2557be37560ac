"""GRW jump machinery: collapse operators and flash statistics.

A flash on particle k at continuum position x_f multiplies the wavefunction
by the Gaussian localizer

    L_k(x_f) = (pi r_C^2)^(-dim/4) * exp(-(x_k - x_f)^2 / (2 r_C^2)),

and the squared norm of the unnormalized result is the probability density
for x_f.  Flash positions are kept in the continuum (never snapped to the
grid): the Gaussian is evaluated at the exact x_f on grid points, which
avoids grid-artifact bias in kernel estimates.

Randomness comes from counter-based Philox streams so runs are bitwise
reproducible and trivially parallel: stream i of master seed s is
Philox(key=(s, i)).  Flash waiting times for N particles are exponential
with total rate N*lam; the flashing particle is uniform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .state import WaveFunction, position_density


@dataclass(frozen=True)
class FlashEvent:
    """One collapse event: when, which particle, where."""

    time: float
    particle: int
    position: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "position", tuple(float(c) for c in np.atleast_1d(self.position))
        )


def rng_stream(master_seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic Philox generator for (master seed, stream id)."""
    key = np.array([master_seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class FlashClock:
    """Value-semantics Poisson clock for N independent flash processes.

    Holds the full bit-generator state; :func:`next_flash` never mutates its
    argument, so replaying from a stored clock reproduces the draw exactly.
    """

    n_particles: int
    lam: float
    rng_state: dict

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if not self.lam > 0:
            raise ValueError("flash rate must be positive")

    @staticmethod
    def from_seed(n_particles: int, lam: float, master_seed: int, stream: int = 0):
        gen = rng_stream(master_seed, stream)
        return FlashClock(n_particles, lam, gen.bit_generator.state)

    def generator(self) -> np.random.Generator:
        """Live generator positioned at this clock's state."""
        gen = np.random.Generator(np.random.Philox())
        gen.bit_generator.state = self.rng_state
        return gen

    def advanced_to(self, gen: np.random.Generator) -> "FlashClock":
        return replace(self, rng_state=gen.bit_generator.state)


def next_flash(clock: FlashClock) -> tuple[float, int, FlashClock]:
    """Draw (waiting time, flashing particle, advanced clock).

    Waiting times are exponential with rate N*lam and the particle choice is
    uniform, which together realize N independent rate-lam processes.
    """
    gen = clock.generator()
    dt = gen.standard_exponential() / (clock.n_particles * clock.lam)
    k = int(gen.integers(clock.n_particles))
    return float(dt), k, clock.advanced_to(gen)


def collapse_factor(coords: np.ndarray, x_f: np.ndarray, r_C: float) -> np.ndarray:
    """L_k values at per-axis coordinate arrays for a flash at x_f."""
    x_f = np.atleast_1d(x_f)
    dim = len(coords)
    prefactor = (np.pi * r_C**2) ** (-dim / 4.0)
    out = None
    for a in range(dim):
        g = np.exp(-((coords[a] - x_f[a]) ** 2) / (2 * r_C**2))
        out = g if out is None else np.multiply.outer(out, g)
    return prefactor * out


def apply_collapse(
    psi: WaveFunction, k: int, x_f, r_C: float | None = None
) -> WaveFunction:
    """Apply L_k(x_f); the result is intentionally unnormalized.

    Its squared norm equals the flash-position density at x_f up to
    discretization, which is exactly what the jump law requires.
    """
    if not 0 <= k < psi.n_particles:
        raise IndexError(f"particle index {k} out of range")
    x_f = np.atleast_1d(np.asarray(x_f, dtype=float))
    grid = psi.grid
    if x_f.shape != (grid.dim,):
        raise ValueError(f"flash position must have {grid.dim} components")
    if not grid.contains(x_f):
        raise ValueError(
            f"flash position {tuple(x_f)} outside the grid extent; "
            "this signals a sampling bug"
        )
    if r_C is None:
        raise ValueError("collapse width r_C is required")
    factor = collapse_factor(grid.axes(), x_f, r_C)
    full_shape = [1] * psi.amplitudes.ndim
    for a in psi.particle_axes(k):
        full_shape[a] = grid.n_points
    return psi.with_amplitudes(psi.amplitudes * factor.reshape(full_shape))


def flash_position_density(psi: WaveFunction, k: int, r_C: float) -> np.ndarray:
    """Density of flash centers for particle k, on the particle grid.

    Equals the position density convolved with a normalized Gaussian of
    variance r_C^2/2 per axis (the squared collapse operator), evaluated at
    the grid nodes.  Integrates to 1 up to boundary leakage.
    """
    dens = position_density(psi, k)
    grid = psi.grid
    # Per-axis kernel matrix K[j, i] = g(x_j - x_i); the Gaussian is
    # separable, so convolve one axis at a time.
    out = dens
    for a in range(grid.dim):
        xa = grid.axis(a)
        kernel = np.exp(-np.subtract.outer(xa, xa) ** 2 / r_C**2) / (
            np.sqrt(np.pi) * r_C
        )
        out = np.moveaxis(np.tensordot(kernel, out, axes=(1, a)), 0, a)
    return out * grid.cell_volume


def sample_flash_position(
    psi: WaveFunction, k: int, rng: np.random.Generator, r_C: float,
    max_tries: int = 1000,
) -> np.ndarray:
    """Two-step flash-position sampler.

    Draw a grid cell from the position density (uniform within the cell),
    then add Gaussian noise of variance r_C^2/2 per axis.  Rejection outside
    the grid extent preserves normalization without reflecting mass;
    experiments are sized so that rejections are ~1e-6 rare.
    """
    dens = position_density(psi, k)
    grid = psi.grid
    p = (dens * grid.cell_volume).ravel()
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    points = grid.points()
    sigma = r_C / np.sqrt(2.0)
    for _ in range(max_tries):
        cell = rng.choice(len(p), p=p)
        u = rng.uniform(-grid.spacing / 2, grid.spacing / 2, size=grid.dim)
        x = points[cell] + u + sigma * rng.standard_normal(grid.dim)
        if grid.contains(x):
            return x
    raise RuntimeError(
        f"flash position rejected {max_tries} times; grid is far too small "
        "relative to r_C"
    )
