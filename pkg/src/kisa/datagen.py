"""Synthetic ISA benchmarks: the d-spherical database and the letter (A-omega)
database, plus the source -> observation pipeline used by experiments."""

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import List, Sequence, Tuple

import numpy as np

from .model import SeedLike, as_generator, mix, random_orthogonal

__all__ = [
    "RhoSpec",
    "GlyphSet",
    "load_glyphs",
    "gen_d_spherical",
    "gen_a_omega",
    "standardize",
    "make_observation",
    "pair_to_complex",
    "LATIN",
    "GREEK",
]

LATIN = tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ")
GREEK = (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi", "rho",
    "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega",
)
# lower case Greek code points, final sigma skipped
_GREEK_CHARS = {chr(0x3B1 + i + (i >= 17)): name for i, name in enumerate(GREEK)}


@dataclass(frozen=True)
class RhoSpec:
    """Distribution of the radius ``rho`` of a d-spherical source.

    ``kind`` is one of ``"uniform"`` (on ``[0, 1]``), ``"exponential"``
    (``params = (rate,)``) or ``"lognormal"`` (``params = (mu, sigma)``).
    """

    kind: str
    params: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "uniform":
            if self.params:
                raise ValueError("uniform rho takes no parameters")
        elif self.kind == "exponential":
            if len(self.params) != 1 or not self.params[0] > 0:
                raise ValueError(f"exponential rho needs rate > 0, got {self.params}")
        elif self.kind == "lognormal":
            if len(self.params) != 2 or not self.params[1] > 0:
                raise ValueError(f"lognormal rho needs (mu, sigma > 0), got {self.params}")
        else:
            raise ValueError(f"unknown rho distribution {self.kind!r}")

    @classmethod
    def uniform(cls) -> "RhoSpec":
        return cls("uniform")

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "RhoSpec":
        return cls("exponential", (float(rate),))

    @classmethod
    def lognormal(cls, mu: float = 0.0, sigma: float = 1.0) -> "RhoSpec":
        return cls("lognormal", (float(mu), float(sigma)))

    @classmethod
    def parse(cls, text: str) -> "RhoSpec":
        """Parse ``uniform``, ``exp:RATE`` or ``lognormal:MU:SIGMA``."""
        name, *args = text.strip().split(":")
        name = {"exp": "exponential", "unif": "uniform"}.get(name, name)
        try:
            params = tuple(float(a) for a in args)
        except ValueError as exc:
            raise ValueError(f"bad rho specification {text!r}") from exc
        if name == "exponential" and not params:
            params = (1.0,)
        if name == "lognormal" and not params:
            params = (0.0, 1.0)
        return cls(name, params)

    def __str__(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        if self.kind == "exponential":
            return f"exp:{self.params[0]!r}"
        return f"lognormal:{self.params[0]!r}:{self.params[1]!r}"

    def second_moment(self) -> float:
        """``E[rho^2]`` in closed form."""
        if self.kind == "uniform":
            return 1.0 / 3.0
        if self.kind == "exponential":
            return 2.0 / self.params[0] ** 2
        mu, sigma = self.params
        return float(np.exp(2 * mu + 2 * sigma**2))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(0.0, 1.0, size)
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.params[0], size)
        return rng.lognormal(self.params[0], self.params[1], size)


DEFAULT_RHOS = (RhoSpec.uniform(), RhoSpec.exponential(1.0), RhoSpec.lognormal(0.0, 1.0))


@dataclass(frozen=True)
class GlyphSet:
    names: Tuple[str, ...]
    masks: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.names) != len(self.masks):
            raise ValueError("names and masks differ in length")
        shapes = {m.shape for m in self.masks}
        if len(shapes) > 1:
            raise ValueError(f"glyph masks have different resolutions: {shapes}")
        for name, m in zip(self.names, self.masks):
            if not m.any():
                raise ValueError(f"glyph {name!r} is empty")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.masks[self.index(name)]

    def index(self, name: str) -> int:
        key = _GREEK_CHARS.get(name, name)
        try:
            return self.names.index(key)
        except ValueError:
            raise KeyError(f"unknown letter {name!r}") from None

    def resolve(self, which) -> List[str]:
        """Expand ``"all"``, a comma separated string or a list of names."""
        if isinstance(which, str):
            if which.strip().lower() == "all":
                return list(self.names)
            which = [w for w in which.split(",") if w.strip()]
        names = [self.names[self.index(w.strip())] for w in which]
        if not names:
            raise ValueError("empty letter subset")
        return names


def parse_glyphs(text: str) -> GlyphSet:
    names: List[str] = []
    masks: List[np.ndarray] = []
    stanzas = [s for s in text.strip().split("\n\n") if s.strip()]
    for stanza in stanzas:
        name, *rows = stanza.strip().splitlines()
        mask = np.array([[c == "#" for c in row.strip()] for row in rows], dtype=bool)
        names.append(name.strip())
        masks.append(mask)
    return GlyphSet(tuple(names), tuple(masks))


@lru_cache(maxsize=None)
def load_glyphs() -> GlyphSet:
    """The bundled 16x16 raster glyphs for A-Z and alpha-omega."""
    text = resources.files("kisa").joinpath("data/glyphs.txt").read_text()
    return parse_glyphs(text)


def gen_d_spherical(M: int, d: int, T: int, rhos: Sequence[RhoSpec], seed: SeedLike = None):
    """``M`` independent d-spherical sources ``rho_m * u``, stacked into ``(M*d, T)``.

    ``u`` is uniform on the unit sphere of ``R^d`` (a normalised standard
    normal vector) and ``rho_m`` an independent radius drawn per time point.
    """
    if len(rhos) != M:
        raise ValueError(f"need {M} radius distributions, got {len(rhos)}")
    if d < 1 or T < 2:
        raise ValueError(f"need d >= 1 and T >= 2, got d={d}, T={T}")
    rng = as_generator(seed)
    out = np.empty((M * d, T))
    for m, rho in enumerate(rhos):
        g = rng.standard_normal((d, T))
        u = g / np.linalg.norm(g, axis=0)
        out[m * d:(m + 1) * d] = rho.sample(rng, T) * u
    return out


def gen_a_omega(glyphs: GlyphSet, which, T: int, seed: SeedLike = None) -> np.ndarray:
    """Sources uniform on letter shapes, two rows (x, y) per letter.

    A set pixel is picked uniformly, then the point is jittered uniformly
    inside the pixel cell. The raster is mapped onto ``[-1, 1]^2`` with the
    first raster row at the top.
    """
    names = glyphs.resolve(which)
    if T < 2:
        raise ValueError(f"need T >= 2, got {T}")
    rng = as_generator(seed)
    out = np.empty((2 * len(names), T))
    for k, name in enumerate(names):
        mask = glyphs[name]
        n_rows, n_cols = mask.shape
        rows, cols = np.nonzero(mask)
        pick = rng.integers(0, rows.size, T)
        jitter = rng.uniform(0.0, 1.0, (2, T))
        out[2 * k] = -1.0 + 2.0 * (cols[pick] + jitter[0]) / n_cols
        out[2 * k + 1] = 1.0 - 2.0 * (rows[pick] + jitter[1]) / n_rows
    return out


def standardize(s: np.ndarray) -> np.ndarray:
    """Zero mean, unit (``T - 1`` normalised) variance for every row."""
    s = s - s.mean(axis=1, keepdims=True)
    return s / s.std(axis=1, ddof=1, keepdims=True)


def pair_to_complex(s: np.ndarray) -> np.ndarray:
    """Fold a real ``(2D, T)`` matrix into a complex ``(D, T)`` one, rows
    ``2k`` and ``2k + 1`` becoming the real and imaginary part of row ``k``."""
    if s.shape[0] % 2:
        raise ValueError("need an even number of rows")
    return s[0::2] + 1j * s[1::2]


def make_observation(spec, seed: SeedLike = None, T=None):
    """Sources, mixing matrix and observation for one experiment trial.

    Parameters
    ----------
    spec : ExperimentSpec
        Database and mixing settings.
    seed :
        Trial seed; sources and mixing draw from independent child streams.
    T : int, optional
        Sample count, defaults to the first entry of ``spec.T_list``.

    Returns
    -------
    z, A, s : ndarray
        Observation ``(D, T)``, mixing matrix ``(D, D)`` and standardised
        sources ``(D, T)`` with ``z = A s``.
    """
    T = spec.T_list[0] if T is None else int(T)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    src_seed, mix_seed = ss.spawn(2)
    if spec.database == "dspherical":
        s = gen_d_spherical(spec.M, spec.d, T, spec.rhos, src_seed)
    elif spec.database == "aomega":
        s = gen_a_omega(load_glyphs(), spec.letters, T, src_seed)
    else:
        raise ValueError(f"unknown database {spec.database!r}")
    s = standardize(s)
    D = s.shape[0]
    if spec.mixing == "identity":
        A = np.eye(D)
    elif spec.mixing == "orthogonal":
        A = random_orthogonal(D, mix_seed)
    else:
        raise ValueError(f"unknown mixing {spec.mixing!r}")
    return mix(A, s), A, s
