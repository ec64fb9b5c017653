"""f-covariance matrices and the two decorrelation costs.

For an output ``y`` (``D x T``) and a scalar map ``f`` applied coordinate-wise,
the f-covariance is the empirical covariance of ``f(phi(y))`` where ``phi`` is
the identity for real data and the re/im interleaving embedding for complex
data. Cross-subspace blocks of that matrix measure dependence between
subspaces.
"""

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Sequence, Tuple, Union

import numpy as np

from .model import BlockStructure, check_samples, covariance

__all__ = [
    "FUNCTIONS",
    "FunctionSet",
    "SingularCovarianceError",
    "phi_c",
    "unphi_c",
    "embed",
    "unit_size",
    "f_covariance",
    "block",
    "make_mask",
    "masked_cost",
    "cost_q",
    "cost_q_theta",
    "q_theta_from_cov",
    "GramCost",
]

RIDGE = 1e-10


class SingularCovarianceError(ValueError):
    """Raised when an f-covariance is singular even after ridge regularisation."""


FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "cos": np.cos,
    "cos2": lambda x: np.cos(2.0 * x),
    "identity": lambda x: x,
    "square": np.square,
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class FunctionSet:
    """Named coordinate-wise maps; the default is ``{cos(z), cos(2z)}``."""

    names: Tuple[str, ...] = ("cos", "cos2")

    def __post_init__(self):
        if not self.names:
            raise ValueError("function set is empty")
        unknown = [n for n in self.names if n not in FUNCTIONS]
        if unknown:
            raise ValueError(f"unknown functions {unknown}; known: {sorted(FUNCTIONS)}")

    @classmethod
    def parse(cls, text: Union[str, Iterable[str]]) -> "FunctionSet":
        if isinstance(text, str):
            text = text.split(",")
        return cls(tuple(t.strip() for t in text if t.strip()))

    @property
    def funcs(self):
        return [FUNCTIONS[n] for n in self.names]

    def __iter__(self):
        return iter(self.funcs)

    def __len__(self):
        return len(self.names)

    def __str__(self):
        return ",".join(self.names)


def _as_func(f) -> Callable[[np.ndarray], np.ndarray]:
    return FUNCTIONS[f] if isinstance(f, str) else f


def phi_c(v) -> np.ndarray:
    """Map complex ``v`` of length ``L`` to ``[Re v1, Im v1, Re v2, ...]``.

    Works along the first axis, so a complex ``(D, T)`` sample matrix maps
    to a real ``(2D, T)`` one.
    """
    v = np.asarray(v, dtype=np.complex128)
    out = np.empty((2 * v.shape[0],) + v.shape[1:])
    out[0::2] = v.real
    out[1::2] = v.imag
    return out


def unphi_c(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[0::2] + 1j * x[1::2]


def embed(y: np.ndarray) -> np.ndarray:
    return phi_c(y) if np.iscomplexobj(y) else np.asarray(y, dtype=np.float64)


def unit_size(y_or_field) -> int:
    """Rows of the real embedding per original coordinate (1 real, 2 complex)."""
    if isinstance(y_or_field, np.ndarray):
        return 2 if np.iscomplexobj(y_or_field) else 1
    return 2 if str(getattr(y_or_field, "value", y_or_field)) == "complex" else 1


def f_covariance(y, f) -> np.ndarray:
    """Empirical covariance (``T - 1`` normalised) of ``f(phi(y))``."""
    y = check_samples(y)
    fy = _as_func(f)(embed(y))
    if not np.all(np.isfinite(fy)):
        raise ValueError("function produced non-finite values")
    sigma = covariance(fy)
    return (sigma + sigma.T) / 2


def block(sigma: np.ndarray, blocks: BlockStructure, i: int, j: int) -> np.ndarray:
    """Block ``(i, j)`` (zero based) of an f-covariance.

    The block side is ``d`` for a ``D x D`` matrix and ``2d`` for the
    ``2D x 2D`` complex embedding.
    """
    side = sigma.shape[0] // blocks.M
    if sigma.shape[0] != side * blocks.M or side % blocks.d:
        raise ValueError(f"matrix of side {sigma.shape[0]} does not fit {blocks}")
    for k in (i, j):
        if not 0 <= k < blocks.M:
            raise IndexError(f"block index {k} out of range for M={blocks.M}")
    return sigma[i * side:(i + 1) * side, j * side:(j + 1) * side]


def make_mask(blocks: BlockStructure, field="real") -> np.ndarray:
    """0/1 matrix that is zero on the diagonal subspace blocks, one elsewhere."""
    b = blocks.d * unit_size(field)
    side = blocks.M * b
    return np.ones((side, side)) - np.kron(np.eye(blocks.M), np.ones((b, b)))


def masked_cost(sigma: np.ndarray, blocks: BlockStructure) -> float:
    """Squared Frobenius norm of the cross-subspace part of ``sigma``."""
    field = "complex" if sigma.shape[0] == 2 * blocks.D else "real"
    return float(np.sum((make_mask(blocks, field) * sigma) ** 2))


def cost_q(fset: FunctionSet, y, blocks: BlockStructure) -> float:
    """Sum over ``f`` in ``fset`` of the masked squared Frobenius norm."""
    y = check_samples(y)
    if y.shape[0] != blocks.D:
        raise ValueError(f"output has {y.shape[0]} rows, block structure needs {blocks.D}")
    return float(sum(masked_cost(f_covariance(y, f), blocks) for f in fset))


def _logdet(a: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError("f-covariance is not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diagonal(L))))


def q_theta_from_cov(sigma: np.ndarray, blocks: BlockStructure) -> float:
    """``-1/2 log(det S / prod_m det S_mm)`` for a given covariance ``S``."""
    sigma = np.asarray(sigma, dtype=np.float64)
    n = sigma.shape[0]
    side = n // blocks.M
    if side * blocks.M != n:
        raise ValueError(f"matrix of side {n} does not fit {blocks}")
    ridge = RIDGE * np.trace(sigma) / n
    if not ridge > 0:
        raise SingularCovarianceError("f-covariance has zero trace")
    s = sigma + ridge * np.eye(n)
    whole = _logdet(s)
    parts = sum(_logdet(s[m * side:(m + 1) * side, m * side:(m + 1) * side])
                for m in range(blocks.M))
    return max(0.0, -0.5 * (whole - parts))


def cost_q_theta(f, y, blocks: BlockStructure) -> float:
    """Log-determinant dependence cost of the f-covariance of ``y``."""
    y = check_samples(y)
    if y.shape[0] != blocks.D:
        raise ValueError(f"output has {y.shape[0]} rows, block structure needs {blocks.D}")
    return q_theta_from_cov(f_covariance(y, f), blocks)


class GramCost:
    """``cost_q`` evaluated under coordinate reorderings without touching the samples.

    A permutation only reorders the rows of ``f(phi(y))``, so every entry of
    each f-covariance is fixed once computed. The cost of placing coordinate
    ``order[p]`` at output position ``p`` is the sum of ``K[a, b]`` over
    coordinates ``a, b`` sitting in different subspaces, where
    ``K = sum_f Sigma_f ** 2`` with the re/im rows of a complex coordinate
    summed together.
    """

    def __init__(self, y, fset: FunctionSet, blocks: BlockStructure):
        y = check_samples(y)
        if y.shape[0] != blocks.D:
            raise ValueError(f"output has {y.shape[0]} rows, block structure needs {blocks.D}")
        u = unit_size(y)
        K = sum(f_covariance(y, f) ** 2 for f in fset)
        D = blocks.D
        self.K = K.reshape(D, u, D, u).sum(axis=(1, 3))
        self.blocks = blocks

    def cost(self, order: np.ndarray) -> float:
        labels = self.blocks.block_of(np.argsort(order))
        return float(np.sum(self.K[labels[:, None] != labels[None, :]]))

    def costs_for_perms(self, perms: np.ndarray) -> np.ndarray:
        """Cost of many permutations at once; row ``k`` of ``perms`` maps source
        coordinate ``i`` to output position ``perms[k, i]``."""
        labels = self.blocks.block_of(perms)
        cross = labels[:, :, None] != labels[:, None, :]
        return np.einsum("nij,ij->n", cross, self.K)

    def swap_delta(self, order: np.ndarray, p: int, q: int) -> float:
        """Cost change when output positions ``p`` and ``q`` exchange coordinates."""
        d = self.blocks.d
        a, b = order[p], order[q]
        g1 = order[(p // d) * d:(p // d + 1) * d]
        g2 = order[(q // d) * d:(q // d + 1) * d]
        Ka, Kb = self.K[a], self.K[b]
        s_a1 = Ka[g1].sum() - Ka[a]
        s_b1 = Kb[g1].sum() - Kb[a]
        s_b2 = Kb[g2].sum() - Kb[b]
        s_a2 = Ka[g2].sum() - Ka[b]
        return float(2.0 * (s_a1 + s_b2 - s_b1 - s_a2))
