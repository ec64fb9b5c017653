"""Core types, the linear mixing model and whitening.

Sample matrices are plain ``numpy`` arrays of shape ``(D, T)``: rows are
coordinates, columns are time points. The field (real or complex) is carried
by the dtype.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

__all__ = [
    "Field",
    "BlockStructure",
    "WhiteningTransform",
    "SingularDataError",
    "as_generator",
    "field_of",
    "check_samples",
    "covariance",
    "mix",
    "random_orthogonal",
    "random_unitary",
    "fit_whitening",
    "apply_whitening",
]

EIG_FLOOR = 1e-12

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


class SingularDataError(ValueError):
    """Raised when a covariance matrix is (numerically) rank deficient."""


class Field(Enum):
    REAL = "real"
    COMPLEX = "complex"

    @property
    def tag(self) -> int:
        return 0 if self is Field.REAL else 1

    @classmethod
    def from_tag(cls, tag: int) -> "Field":
        if tag not in (0, 1):
            raise ValueError(f"unknown field tag {tag}")
        return cls.REAL if tag == 0 else cls.COMPLEX


@dataclass(frozen=True)
class BlockStructure:
    """``M`` subspaces of common dimension ``d``; coordinates ``m*d .. (m+1)*d - 1``
    form subspace ``m`` (zero based)."""

    M: int
    d: int

    def __post_init__(self):
        if int(self.M) < 1 or int(self.d) < 1:
            raise ValueError(f"need M >= 1 and d >= 1, got M={self.M}, d={self.d}")

    @property
    def D(self) -> int:
        return self.M * self.d

    def group(self, m: int) -> range:
        if not 0 <= m < self.M:
            raise IndexError(f"subspace index {m} out of range for M={self.M}")
        return range(m * self.d, (m + 1) * self.d)

    def block_of(self, index) -> np.ndarray:
        return np.asarray(index) // self.d


@dataclass(frozen=True)
class WhiteningTransform:
    mean: np.ndarray
    V: np.ndarray

    @property
    def D(self) -> int:
        return self.V.shape[0]


def as_generator(seed: SeedLike) -> np.random.Generator:
    """PCG64 generator from an int, a ``SeedSequence`` or an existing generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def field_of(x: np.ndarray) -> Field:
    return Field.COMPLEX if np.iscomplexobj(x) else Field.REAL


def check_samples(x, min_T: int = 2) -> np.ndarray:
    """Validate a ``(D, T)`` sample matrix and return it as a float/complex array."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"sample matrix must be 2-D, got shape {x.shape}")
    D, T = x.shape
    if D < 1 or T < min_T:
        raise ValueError(f"need D >= 1 and T >= {min_T}, got shape {x.shape}")
    x = x.astype(np.complex128 if np.iscomplexobj(x) else np.float64, copy=False)
    if not np.all(np.isfinite(x)):
        raise ValueError("sample matrix contains NaN or Inf")
    return x


def covariance(x: np.ndarray) -> np.ndarray:
    """Empirical covariance of the rows of ``x`` with ``T - 1`` normalisation."""
    xc = x - x.mean(axis=1, keepdims=True)
    return (xc @ xc.conj().T) / (x.shape[1] - 1)


def mix(A, s) -> np.ndarray:
    """Observation ``z(t) = A s(t)`` for every column of ``s``."""
    A = np.asarray(A)
    s = check_samples(s)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"mixing matrix must be square, got shape {A.shape}")
    if A.shape[1] != s.shape[0]:
        raise ValueError(f"mixing matrix is {A.shape}, sources have {s.shape[0]} rows")
    if field_of(A) is not field_of(s):
        raise ValueError(
            f"field mismatch: mixing is {field_of(A).value}, sources are {field_of(s).value}"
        )
    return A @ s


def _haar(D: int, rng: np.random.Generator, complex_: bool) -> np.ndarray:
    if D < 1:
        raise ValueError(f"dimension must be >= 1, got {D}")
    g = rng.standard_normal((D, D))
    if complex_:
        g = (g + 1j * rng.standard_normal((D, D))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    # phase correction of R's diagonal makes Q Haar distributed
    diag = np.diagonal(r)
    phase = diag / np.abs(diag)
    return q * phase[np.newaxis, :]


def random_orthogonal(D: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-distributed ``D x D`` orthogonal matrix."""
    return _haar(D, as_generator(seed), complex_=False)


def random_unitary(D: int, seed: SeedLike = None) -> np.ndarray:
    """Haar-distributed ``D x D`` unitary matrix."""
    return _haar(D, as_generator(seed), complex_=True)


def fit_whitening(z) -> WhiteningTransform:
    """Fit the symmetric whitening ``V = U diag(lambda)^{-1/2} U^H``.

    Raises
    ------
    SingularDataError
        If the smallest covariance eigenvalue is below ``1e-12`` times the
        largest one.
    """
    z = check_samples(z)
    D, T = z.shape
    if T <= D:
        raise ValueError(f"whitening needs T > D, got D={D}, T={T}")
    mean = z.mean(axis=1)
    lam, U = np.linalg.eigh(covariance(z))
    if lam[0] <= EIG_FLOOR * max(lam[-1], 0.0) or lam[-1] <= 0:
        raise SingularDataError(
            f"covariance is rank deficient (eigenvalues {lam[0]:.3g} .. {lam[-1]:.3g})"
        )
    V = (U / np.sqrt(lam)) @ U.conj().T
    return WhiteningTransform(mean=mean, V=V)


def apply_whitening(w: WhiteningTransform, z) -> np.ndarray:
    z = check_samples(z)
    if z.shape[0] != w.D:
        raise ValueError(f"transform is for D={w.D}, data has {z.shape[0]} rows")
    return w.V @ (z - w.mean[:, np.newaxis])
