"""Numeric tolerances and random-number plumbing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """All numeric thresholds in one place.

    Every function that validates a state takes an optional ``tol`` argument
    defaulting to :data:`DEFAULT_TOLERANCES`.
    """

    norm: float = 1e-10
    psd: float = 1e-9
    unitary: float = 1e-12
    subspace: float = 1e-10
    max_pure_qubits: int = 22
    max_mixed_qubits: int = 12


DEFAULT_TOLERANCES = Tolerances()


def make_rng(seed: int | np.random.Generator | None = None) -> np.random.Generator:
    """Return a PCG64 generator; generators are passed through untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(seed: int | np.random.Generator | None, n: int) -> list[np.random.Generator]:
    """Split ``seed`` into ``n`` independent child streams."""
    return make_rng(seed).spawn(n)
