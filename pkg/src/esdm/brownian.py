"""Reproducible Brownian increments with dyadic refinement.

Draws come from a counter-based Philox generator keyed by
``(seed, stream)``, so every (path, refinement level) combination is a
deterministic, order-independent function of its key: regenerating a
grid never depends on how many other grids were generated first.

A grid stores the *fine* increments; coarse increments are derived by
summing each group of ``refinement`` consecutive fine increments
left-to-right.  Integrating at the coarse step with those aggregated
increments and at the fine step with the raw ones therefore follows the
same underlying Brownian path, which is exactly what the strong-error
estimator needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .model import N_STATE

#: Hard cap on fine-grid size; beyond this the request is almost
#: certainly a unit mistake and would exhaust memory anyway.
MAX_FINE_STEPS = 2 ** 31


@dataclass(frozen=True)
class BrownianGrid:
    """Fine-step Brownian increments for one path of all four components.

    ``fine_increments`` has shape (n_fine, 4), each entry distributed
    Normal(0, dt_fine) with dt_fine = dt_coarse / refinement.
    """

    dt_coarse: float
    refinement: int
    fine_increments: np.ndarray

    @property
    def n_fine(self) -> int:
        return self.fine_increments.shape[0]

    @property
    def n_coarse(self) -> int:
        return self.n_fine // self.refinement

    @property
    def dt_fine(self) -> float:
        return self.dt_coarse / self.refinement

    def coarse_increments(self) -> np.ndarray:
        """Aggregate fine increments into coarse ones (shape (n_coarse, 4)).

        Summation is left-to-right within each group so the result is
        bitwise reproducible.
        """
        return aggregate_increments(self.fine_increments, self.refinement)


def aggregate_increments(fine: np.ndarray, refinement: int) -> np.ndarray:
    """Sum groups of ``refinement`` consecutive steps, left-to-right.

    Works on any array whose second-to-last axis is the step axis, so
    both single grids (n_fine, 4) and batches (paths, n_fine, 4) pass
    through the same code.
    """
    n_fine = fine.shape[-2]
    if n_fine % refinement != 0:
        raise InvalidInputError(
            f"fine step count {n_fine} is not a multiple of refinement {refinement}")
    if refinement == 1:
        return fine.copy()
    blocks = fine.reshape(
        fine.shape[:-2] + (n_fine // refinement, refinement, fine.shape[-1]))
    acc = blocks[..., 0, :].copy()
    for j in range(1, refinement):
        acc += blocks[..., j, :]
    return acc


def philox_key(seed: int, stream: int) -> np.ndarray:
    """128-bit Philox key for an (ensemble seed, path stream) pair."""
    return np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)


def generate_brownian(seed: int,
                      n_coarse: int,
                      refinement: int = 1,
                      dt_coarse: float = 0.01,
                      stream: int = 0) -> BrownianGrid:
    """Generate the Brownian grid for one path.

    Deterministic function of ``(seed, stream, n_coarse, refinement)``;
    identical inputs give a bit-identical grid.  Distinct ``stream``
    values (used as the path index by ensemble drivers) give independent
    increments under the same master seed.
    """
    if n_coarse < 1:
        raise InvalidInputError(f"n_coarse must be >= 1, got {n_coarse}")
    if refinement < 1:
        raise InvalidInputError(f"refinement must be >= 1, got {refinement}")
    if not np.isfinite(dt_coarse) or dt_coarse <= 0:
        raise InvalidInputError(f"dt_coarse must be positive, got {dt_coarse}")
    n_fine = n_coarse * refinement
    if n_fine > MAX_FINE_STEPS:
        raise InvalidInputError(
            f"n_coarse*refinement = {n_fine} exceeds the supported maximum {MAX_FINE_STEPS}")
    if not (0 <= seed < 2 ** 64):
        raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}")
    if not (0 <= stream < 2 ** 64):
        raise InvalidInputError(f"stream must be an unsigned 64-bit integer, got {stream}")

    rng = np.random.Generator(np.random.Philox(key=philox_key(seed, stream)))
    dt_fine = dt_coarse / refinement
    draws = rng.standard_normal((n_fine, N_STATE)) * np.sqrt(dt_fine)
    return BrownianGrid(dt_coarse=float(dt_coarse),
                        refinement=int(refinement),
                        fine_increments=draws)
