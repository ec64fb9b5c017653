"""Grouping of ICA coordinates into subspaces by greedy pairwise swaps.

The ISA separation matrix is sought as ``W_isa = P W_ica``: ``P`` permutes
the ICA outputs so that dependent coordinates land in the same subspace.
"""

import itertools
import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .fcov import FunctionSet, GramCost
from .ica import IcaResult, fastica
from .model import (
    BlockStructure,
    SeedLike,
    WhiteningTransform,
    apply_whitening,
    check_samples,
    fit_whitening,
)

__all__ = [
    "PermutationMap",
    "SweepTrace",
    "IsaResult",
    "greedy_permutation",
    "exhaustive_permutation",
    "estimate_isa",
    "estimate_isa_given_w",
]

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_D = 8


@dataclass(frozen=True)
class PermutationMap:
    """Row permutation ``y = P x``.

    ``order[p]`` is the input row placed at output position ``p``;
    ``perm[i]`` is the output position of input row ``i``.
    """

    order: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.intp)
        if sorted(order.tolist()) != list(range(order.size)):
            raise ValueError(f"not a permutation: {order.tolist()}")
        object.__setattr__(self, "order", order)

    @classmethod
    def identity(cls, D: int) -> "PermutationMap":
        return cls(np.arange(D))

    @classmethod
    def from_perm(cls, perm) -> "PermutationMap":
        return cls(np.argsort(np.asarray(perm)))

    @property
    def perm(self) -> np.ndarray:
        return np.argsort(self.order)

    @property
    def D(self) -> int:
        return self.order.size

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.D, self.D))
        P[np.arange(self.D), self.order] = 1.0
        return P

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.order]

    def is_identity(self) -> bool:
        return bool(np.all(self.order == np.arange(self.D)))


@dataclass
class SweepTrace:
    initial_cost: float
    sweeps: int = 0
    accepted_swaps: List[int] = field(default_factory=list)
    events: List[Tuple[int, int, int, float]] = field(default_factory=list)
    hit_cap: bool = False

    @property
    def cost_history(self) -> List[float]:
        return [e[3] for e in self.events]

    @property
    def final_cost(self) -> float:
        return self.events[-1][3] if self.events else self.initial_cost

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps({"sweep": s, "swap": [p, q], "cost": c}) + "\n"
            for s, p, q, c in self.events
        )


def greedy_permutation(
    s_hat,
    blocks: BlockStructure,
    fset: FunctionSet = FunctionSet(),
    max_sweeps: int = 100,
    swap_threshold: float = 1e-12,
):
    """Greedy coordinate exchange minimising the cross-subspace f-covariance cost.

    Starting from the identity, every pair of output positions ``p < q`` that
    lie in different subspaces is visited in ascending order; the two
    coordinates are exchanged when that lowers the cost by more than
    ``swap_threshold`` relative. Sweeps repeat until one sweep accepts no
    exchange (or ``max_sweeps`` is reached).

    Returns
    -------
    PermutationMap, SweepTrace
    """
    s_hat = check_samples(s_hat)
    if s_hat.shape[0] != blocks.D:
        raise ValueError(f"input has {s_hat.shape[0]} rows, block structure needs {blocks.D}")
    gram = GramCost(s_hat, fset, blocks)
    D, d = blocks.D, blocks.d
    pairs = [(p, q) for p in range(D) for q in range(p + 1, D) if p // d != q // d]

    order = np.arange(D)
    cost = gram.cost(order)
    trace = SweepTrace(initial_cost=cost)
    while True:
        if trace.sweeps >= max_sweeps:
            trace.hit_cap = True
            logger.warning("greedy permutation search stopped at the %d sweep cap", max_sweeps)
            break
        trace.sweeps += 1
        accepted = 0
        for p, q in pairs:
            delta = gram.swap_delta(order, p, q)
            if delta < -swap_threshold * abs(cost):
                order[p], order[q] = order[q], order[p]
                cost += delta
                accepted += 1
                trace.events.append((trace.sweeps, p, q, cost))
        trace.accepted_swaps.append(accepted)
        if accepted == 0:
            break
    return PermutationMap(order), trace


def exhaustive_permutation(s_hat, blocks: BlockStructure, fset: FunctionSet = FunctionSet()):
    """Globally optimal permutation by enumerating all ``D!`` orderings.

    Among (numerically) tied minimisers the lexicographically first ``perm``
    array wins, so a single subspace yields the identity.
    """
    s_hat = check_samples(s_hat)
    if blocks.D > MAX_EXHAUSTIVE_D:
        raise ValueError(f"exhaustive search limited to D <= {MAX_EXHAUSTIVE_D}, got {blocks.D}")
    if s_hat.shape[0] != blocks.D:
        raise ValueError(f"input has {s_hat.shape[0]} rows, block structure needs {blocks.D}")
    gram = GramCost(s_hat, fset, blocks)
    perms = np.array(list(itertools.permutations(range(blocks.D))), dtype=np.intp)
    costs = gram.costs_for_perms(perms)
    best = costs.min()
    k = int(np.flatnonzero(costs <= best + 1e-12 * abs(best))[0])
    return PermutationMap.from_perm(perms[k])


@dataclass
class IsaResult:
    """Outcome of the two-stage separation.

    ``W`` maps raw observations to the grouped outputs: ``s_hat = W (z - mean)``
    when a whitening stage ran, ``s_hat = W z`` otherwise.
    """

    W: np.ndarray
    s_hat: np.ndarray
    permutation: PermutationMap
    trace: SweepTrace
    ica: Optional[IcaResult] = None
    whitening: Optional[WhiteningTransform] = None


def estimate_isa(
    z,
    blocks: BlockStructure,
    fset: FunctionSet = FunctionSet(),
    seed: SeedLike = None,
    ica_max_iter: int = 500,
    ica_tol: float = 1e-6,
    max_sweeps: int = 100,
    swap_threshold: float = 1e-12,
) -> IsaResult:
    """Whiten, run FastICA, then group the ICA outputs by greedy search."""
    z = check_samples(z)
    if np.iscomplexobj(z):
        raise ValueError("complex data: supply a separation matrix to estimate_isa_given_w")
    if z.shape[0] != blocks.D:
        raise ValueError(f"observation has {z.shape[0]} rows, block structure needs {blocks.D}")
    wt = fit_whitening(z)
    ica = fastica(apply_whitening(wt, z), seed=seed, max_iter=ica_max_iter, tol=ica_tol)
    perm, trace = greedy_permutation(ica.s_hat, blocks, fset, max_sweeps, swap_threshold)
    W = perm.apply(ica.W) @ wt.V
    return IsaResult(W=W, s_hat=perm.apply(ica.s_hat), permutation=perm, trace=trace,
                     ica=ica, whitening=wt)


def estimate_isa_given_w(
    z,
    W,
    blocks: BlockStructure,
    fset: FunctionSet = FunctionSet(),
    max_sweeps: int = 100,
    swap_threshold: float = 1e-12,
) -> IsaResult:
    """Group the outputs of an externally supplied separation matrix.

    Works for real and complex data; for complex data each complex
    coordinate (its re/im pair in the embedding) moves as one unit.
    """
    z = check_samples(z)
    W = np.asarray(W)
    if W.shape != (z.shape[0], z.shape[0]):
        raise ValueError(f"separation matrix is {W.shape}, observation has {z.shape[0]} rows")
    if z.shape[0] != blocks.D:
        raise ValueError(f"observation has {z.shape[0]} rows, block structure needs {blocks.D}")
    if not np.isfinite(np.linalg.cond(W)) or np.linalg.cond(W) > 1e12:
        raise ValueError("separation matrix is singular")
    y = W @ z
    perm, trace = greedy_permutation(y, blocks, fset, max_sweeps, swap_threshold)
    return IsaResult(W=perm.apply(W), s_hat=perm.apply(y), permutation=perm, trace=trace)
