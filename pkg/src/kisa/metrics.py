"""Normalised Amari distance for block separation, and power-law curve fits."""

import logging
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .model import BlockStructure

__all__ = ["AmariReport", "amari_index", "block_mass", "PowerLawFit", "power_law_fit"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AmariReport:
    r: float
    B: np.ndarray
    blocks: BlockStructure

    @property
    def percent(self) -> float:
        return 100.0 * self.r


def block_mass(B: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    """``M x M`` matrix of summed absolute values (moduli) of the ``d x d`` blocks."""
    M, d = blocks.M, blocks.d
    return np.abs(B).reshape(M, d, M, d).sum(axis=(1, 3))


def amari_index(B, blocks: BlockStructure) -> AmariReport:
    """Normalised block Amari distance of ``B = W A``.

    Zero exactly when ``B`` is a block-permutation matrix with ``d x d``
    blocks, one for the all-ones matrix.

    Raises
    ------
    ValueError
        If ``M < 2`` (the normalisation is undefined) or ``B`` is not
        ``D x D`` / not finite.
    """
    B = np.asarray(B)
    if blocks.M < 2:
        raise ValueError("Amari distance is undefined for a single subspace (M < 2)")
    if B.shape != (blocks.D, blocks.D):
        raise ValueError(f"B is {B.shape}, block structure needs {blocks.D}x{blocks.D}")
    if not np.all(np.isfinite(B)):
        raise ValueError("B contains NaN or Inf")
    b = block_mass(B, blocks)
    M = blocks.M
    rows = np.sum(b.sum(axis=1) / b.max(axis=1) - 1.0)
    cols = np.sum(b.sum(axis=0) / b.max(axis=0) - 1.0)
    r = float((rows + cols) / (2.0 * M * (M - 1)))
    return AmariReport(r=r, B=B, blocks=blocks)


@dataclass(frozen=True)
class PowerLawFit:
    """``r(T) ~ C * T^(-c)`` fitted on log-log axes."""

    c: float
    log10_C: float
    r2: float
    n_points: int


def power_law_fit(points: Iterable[Tuple[float, float]]) -> PowerLawFit:
    """Least-squares line through ``(log T, log r)``; ``c`` is minus the slope.

    Points with ``r <= 0`` cannot be placed on log axes; they are dropped
    with a warning.
    """
    pts = [(float(T), float(r)) for T, r in points]
    if any(T <= 0 for T, _ in pts):
        raise ValueError("sample sizes must be positive")
    kept = [(T, r) for T, r in pts if r > 0]
    if len(kept) < len(pts):
        logger.warning("power_law_fit: dropped %d point(s) with r <= 0", len(pts) - len(kept))
    if len(kept) < 3:
        raise ValueError(f"need at least 3 points with r > 0, got {len(kept)}")
    x = np.log10([T for T, _ in kept])
    y = np.log10([r for _, r in kept])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(c=-float(slope), log10_C=float(intercept), r2=r2, n_points=len(kept))
