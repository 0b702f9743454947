"""States, effects and the probability pairing ``(A, X) = Tr[A X]``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_matrix,
    expectation,
    frozen,
    hermiticity_residual,
    projector,
    range_projector,
)


class ValidationError(ValueError):
    """A matrix failed the invariants of the type it was wrapped in."""


def _spectrum(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh((m + m.conj().T) / 2)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Positive semidefinite unit-trace matrix."""

    matrix: np.ndarray
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        m = frozen(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValidationError(f"density operator must be square, got {m.shape}")
        h = hermiticity_residual(m)
        if h > self.tol.herm:
            raise ValidationError(f"density operator not Hermitian (residual {h:.3e})")
        lo = _spectrum(m)[0]
        if lo < -self.tol.psd:
            raise ValidationError(f"density operator not positive (min eigenvalue {lo:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1) > self.tol.trace:
            raise ValidationError(f"density operator trace is {tr!r}, not 1")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, vec, tol: ToleranceConfig = DEFAULT_TOL) -> "DensityOperator":
        return cls(projector(vec), tol)

    @classmethod
    def basis(cls, index: int, dim: int, tol: ToleranceConfig = DEFAULT_TOL) -> "DensityOperator":
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[index, index] = 1
        return cls(m, tol)

    @classmethod
    def maximally_mixed(cls, dim: int, tol: ToleranceConfig = DEFAULT_TOL) -> "DensityOperator":
        return cls(np.eye(dim) / dim, tol)

    def is_pure(self) -> bool:
        vals = _spectrum(self.matrix)
        return bool(vals[-2] <= self.tol.rank) if self.dim > 1 else True

    def __eq__(self, other):
        if not isinstance(other, DensityOperator):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Effect:
    """Hermitian matrix with spectrum inside [0, 1]."""

    matrix: np.ndarray
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        m = frozen(self.matrix)
        if m.shape[0] != m.shape[1]:
            raise ValidationError(f"effect must be square, got {m.shape}")
        h = hermiticity_residual(m)
        if h > self.tol.herm:
            raise ValidationError(f"effect not Hermitian (residual {h:.3e})")
        vals = _spectrum(m)
        if vals[0] < -self.tol.psd or vals[-1] > 1 + self.tol.psd:
            raise ValidationError(
                f"effect spectrum [{vals[0]:.3e}, {vals[-1]:.3e}] outside [0, 1]"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int, tol: ToleranceConfig = DEFAULT_TOL) -> "Effect":
        return cls(np.eye(dim), tol)

    @classmethod
    def zero(cls, dim: int, tol: ToleranceConfig = DEFAULT_TOL) -> "Effect":
        return cls(np.zeros((dim, dim)), tol)

    @classmethod
    def projector(cls, vec, tol: ToleranceConfig = DEFAULT_TOL) -> "Effect":
        return cls(projector(vec), tol)

    def __eq__(self, other):
        if not isinstance(other, Effect):
            return NotImplemented
        return self.matrix.shape == other.matrix.shape and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True)
class Weights:
    """Mixing weights ``|c1|^2, |c2|^2`` and the relative phase of ``c1* c2``."""

    c1_sq: float
    c2_sq: float
    relative_phase: float = 0.0

    def __post_init__(self):
        for name in ("c1_sq", "c2_sq"):
            v = float(getattr(self, name))
            if not -DEFAULT_TOL.trace <= v <= 1 + DEFAULT_TOL.trace:
                raise ValidationError(f"{name}={v} outside [0, 1]")
            object.__setattr__(self, name, min(max(v, 0.0), 1.0))
        if abs(self.c1_sq + self.c2_sq - 1) > DEFAULT_TOL.trace:
            raise ValidationError(f"weights {self.c1_sq} + {self.c2_sq} do not sum to 1")
        object.__setattr__(self, "relative_phase", float(self.relative_phase))

    def with_phase(self, phase: float) -> "Weights":
        return Weights(self.c1_sq, self.c2_sq, phase)


def _check_dims(a, b) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def probability(a: Effect, x: DensityOperator) -> float:
    """``Tr[A X]``; not clamped, so numerical excursions stay visible."""
    _check_dims(a, x)
    return expectation(a.matrix, x.matrix)


def complement(a: Effect) -> Effect:
    return Effect(np.eye(a.dim) - a.matrix, a.tol)


def mix(w: Weights, x1: DensityOperator, x2: DensityOperator) -> DensityOperator:
    _check_dims(x1, x2)
    return DensityOperator(w.c1_sq * x1.matrix + w.c2_sq * x2.matrix, x1.tol)


def are_orthogonal(x1: DensityOperator, x2: DensityOperator) -> bool:
    """Orthogonal ranges, tested as ``Tr[X1 X2] <= tol.orth``."""
    _check_dims(x1, x2)
    return expectation(x1.matrix, x2.matrix) <= x1.tol.orth


def support_projector(x: DensityOperator) -> Effect:
    return Effect(range_projector(x.matrix, x.tol.rank, x.tol), x.tol)


def random_state(dim: int, rng: np.random.Generator, tol: ToleranceConfig = DEFAULT_TOL) -> DensityOperator:
    """Full-rank state ``G G^dagger / Tr[G G^dagger]`` from a Ginibre matrix G."""
    return DensityOperator(random_state_matrix(dim, rng), tol)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (g + g.conj().T) / 2


def random_effect_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian matrix with its spectrum affinely mapped into [0, 1].

    The target interval ``[lo, hi]`` is itself random so that the sampled
    effects are not all spread across the full unit interval.
    """
    h = random_hermitian(dim, rng)
    vals = np.linalg.eigvalsh(h)
    lo, hi = np.sort(rng.uniform(0.0, 1.0, size=2))
    span = vals[-1] - vals[0]
    eye = np.eye(dim)
    if span <= 0:
        return lo * eye.astype(np.complex128)
    # affine map of the operator itself moves the spectrum without diagonalizing
    return lo * eye + (hi - lo) * (h - vals[0] * eye) / span


def random_effect(dim: int, rng: np.random.Generator, tol: ToleranceConfig = DEFAULT_TOL) -> Effect:
    return Effect(random_effect_matrix(dim, rng), tol)


def random_state_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_pure_state(dim: int, rng: np.random.Generator, tol: ToleranceConfig = DEFAULT_TOL) -> DensityOperator:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return DensityOperator.pure(v, tol)


def as_state(x, tol: ToleranceConfig = DEFAULT_TOL) -> DensityOperator:
    return x if isinstance(x, DensityOperator) else DensityOperator(as_matrix(x), tol)


def as_effect(a, tol: ToleranceConfig = DEFAULT_TOL) -> Effect:
    return a if isinstance(a, Effect) else Effect(as_matrix(a), tol)
