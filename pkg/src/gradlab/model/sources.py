"""Source terms and their sampling onto grids.

Every variant knows how to evaluate itself at cell centers and how to answer
the Lebesgue-membership question that decides whether a declared integrability
target ``q`` is honest.  Only the radial power is genuinely singular; the
others are bounded and belong to every class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, MembershipError, ParameterError
from ..grid import Grid, ScalarField


@dataclass(frozen=True)
class CosineProduct:
    """Separable cosine product, compatible with the Neumann boundary."""

    amplitude: float
    modes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        if any(m < 0 for m in self.modes):
            raise ParameterError("cosine modes must be nonnegative integers")


@dataclass(frozen=True)
class RadialSingular:
    """``f(x) = amplitude * max(|x - center|, core_radius)^(-power)``.

    With zero core radius the sample is the true singular power.  The
    constructor records the supremal integrability exponent and rejects a
    declared target the profile does not actually reach.
    """

    center: tuple[float, ...]
    power: float
    amplitude: float = 1.0
    core_radius: float = 0.0
    target_q: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.power <= 0:
            raise ParameterError("radial singular power must be positive")
        if self.core_radius < 0:
            raise ParameterError("core radius must be nonnegative")
        if self.target_q is not None and self.core_radius == 0.0:
            if self.power * self.target_q >= len(self.center):
                raise MembershipError(
                    f"|x|^(-{self.power}) is not in L^{self.target_q} in "
                    f"dimension {len(self.center)}: need power*q < N"
                )

    @property
    def q_sup(self) -> float:
        """Supremal q with finite L^q norm (infinite once a core is cut)."""
        if self.core_radius > 0:
            return np.inf
        return len(self.center) / self.power


@dataclass(frozen=True)
class Scaled:
    base: "SourceSpec"
    factor: float


@dataclass(frozen=True)
class SeededSmoothRandom:
    """Low-frequency random cosine series, reproducible from the seed."""

    seed: int
    cutoff: int = 3

    def __post_init__(self):
        if self.cutoff < 1:
            raise ParameterError("frequency cutoff must be at least 1")


@dataclass(eq=False)
class Tabulated:
    """Raw cell values, used for manufactured right-hand sides."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


SourceSpec = CosineProduct | RadialSingular | Scaled | SeededSmoothRandom | Tabulated


def lq_membership(source: SourceSpec, q: float, ndim: int) -> bool:
    """Does the source belong to ``L^q`` over the box?"""
    if isinstance(source, Scaled):
        return lq_membership(source.base, q, ndim)
    if isinstance(source, RadialSingular):
        if source.core_radius > 0:
            return True
        return source.power * q < ndim
    return True


def sample_source(source: SourceSpec, grid: Grid) -> ScalarField:
    """Evaluate the source at cell centers."""
    if isinstance(source, Tabulated):
        if source.values.shape != grid.shape:
            raise ContractError(
                f"tabulated source shape {source.values.shape} does not match "
                f"grid {grid.shape}"
            )
        return ScalarField(grid, source.values.copy())
    if isinstance(source, Scaled):
        base = sample_source(source.base, grid)
        return ScalarField(grid, source.factor * base.values)
    if isinstance(source, CosineProduct):
        if len(source.modes) != grid.ndim:
            raise ContractError("cosine mode vector must match the grid dimension")
        vals = np.full(grid.shape, source.amplitude)
        centers = grid.centers()
        for d in range(grid.ndim):
            vals = vals * np.cos(
                source.modes[d] * np.pi * centers[d] / grid.domain.extents[d]
            )
        return ScalarField(grid, vals)
    if isinstance(source, RadialSingular):
        if len(source.center) != grid.ndim:
            raise ContractError("singularity center must match the grid dimension")
        centers = grid.centers()
        dist2 = np.zeros(grid.shape)
        for d in range(grid.ndim):
            dist2 += (centers[d] - source.center[d]) ** 2
        dist = np.sqrt(dist2)
        if source.core_radius > 0:
            dist = np.maximum(dist, source.core_radius)
        if np.any(dist == 0.0):
            raise ParameterError(
                "a cell center coincides with the singularity; shift the center "
                "or use an even cell count"
            )
        return ScalarField(grid, source.amplitude * dist ** (-source.power))
    if isinstance(source, SeededSmoothRandom):
        rng = np.random.default_rng(source.seed)
        vals = np.zeros(grid.shape)
        centers = grid.centers()
        ranges = [range(source.cutoff + 1)] * grid.ndim
        modes = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(
            -1, grid.ndim
        )
        for m in modes:
            if not m.any():
                continue
            c = rng.standard_normal() / (1.0 + float(m @ m))
            term = np.full(grid.shape, c)
            for d in range(grid.ndim):
                term = term * np.cos(m[d] * np.pi * centers[d] / grid.domain.extents[d])
            vals += term
        return ScalarField(grid, vals)
    raise ParameterError(f"unknown source kind: {type(source).__name__}")
