"""Superpositions of two orthogonal states defined through probabilities.

A state X belongs to the family ``S(|c1|^2 X1, |c2|^2 X2)`` when every effect
that never fires on X1 fires on X with probability ``|c2|^2 (A, X2)`` and
symmetrically for X2. Membership is decided through the projector
characterisation ``P_i X P_i = |c_i|^2 X_i`` with ``P1`` the support of X1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import PreconditionError, ToleranceConfig, hermitian_eig, psd_sqrt
from .quantum import (
    DensityOperator,
    Effect,
    ValidationError,
    Weights,
    are_orthogonal,
    mix,
    probability,
    random_effect,
    support_projector,
)

DEFAULT_PHASES = tuple(2 * np.pi * k / 8 for k in range(8))


class ConsistencyError(RuntimeError):
    """Two independent routes to the same answer disagreed."""


@dataclass(frozen=True)
class SuperpositionFamily:
    x1: DensityOperator
    x2: DensityOperator
    w: Weights

    def __post_init__(self):
        if self.x1.dim != self.x2.dim:
            raise ValidationError(f"family states differ in dimension: {self.x1.dim} vs {self.x2.dim}")
        if not are_orthogonal(self.x1, self.x2):
            raise ValidationError("family states are not orthogonal")

    @property
    def dim(self) -> int:
        return self.x1.dim

    @property
    def tol(self) -> ToleranceConfig:
        return self.x1.tol

    @property
    def is_pure(self) -> bool:
        return self.x1.is_pure() and self.x2.is_pure()

    def with_weights(self, w: Weights) -> "SuperpositionFamily":
        return SuperpositionFamily(self.x1, self.x2, w)

    def mixture(self) -> DensityOperator:
        return mix(self.w, self.x1, self.x2)


@dataclass(frozen=True)
class SuperpositionWitness:
    p1: Effect
    p2: Effect


@dataclass
class ProjectionReport:
    """Outcome of sampling effects that vanish on one component."""

    max_residual: float
    residual_x1_null: float
    residual_x2_null: float
    samples: int
    worst: dict = field(default_factory=dict)


def dominant_vector(x: DensityOperator) -> np.ndarray:
    """Unit vector spanning the range of a pure state, phase-fixed.

    The largest-magnitude component is made real and positive so that the
    relative phase of a coherent superposition is reproducible.
    """
    vals, vecs = hermitian_eig(x.matrix, x.tol)
    if x.dim > 1 and vals[1] > x.tol.rank:
        raise PreconditionError(f"state is not pure (second eigenvalue {vals[1]:.3e})")
    v = vecs[:, 0]
    k = int(np.argmax(np.abs(v)))
    return (v * np.exp(-1j * np.angle(v[k]))).reshape(-1, 1)


def coherent(fam: SuperpositionFamily, phase: float | None = None) -> DensityOperator:
    """``|phi><phi|`` with ``phi = c1 phi1 + c2 phi2``.

    ``c1 = sqrt(|c1|^2)`` and ``c2 = sqrt(|c2|^2) exp(i phase)``; ``phase``
    defaults to the family's relative phase.
    """
    if phase is None:
        phase = fam.w.relative_phase
    phi1, phi2 = dominant_vector(fam.x1), dominant_vector(fam.x2)
    phi = np.sqrt(fam.w.c1_sq) * phi1 + np.sqrt(fam.w.c2_sq) * np.exp(1j * phase) * phi2
    return DensityOperator(phi @ phi.conj().T, fam.tol)


def member(fam: SuperpositionFamily, phase: float | None = None, coupling=None) -> DensityOperator:
    """A family member with an explicit off-diagonal block.

    Builds ``c1 X1 + c2 X2 + B + B^dagger`` with
    ``B = sqrt(c1 c2) exp(-i phase) X1^(1/2) K X2^(1/2)``. Any ``K`` with
    operator norm at most 1 gives a positive result. The default ``K`` pairs
    the eigenvectors of X1 and X2 in order of decreasing eigenvalue, which
    reduces to :func:`coherent` for pure components.
    """
    if phase is None:
        phase = fam.w.relative_phase
    tol = fam.tol
    if coupling is None:
        v1, a = hermitian_eig(fam.x1.matrix, tol)
        v2, b = hermitian_eig(fam.x2.matrix, tol)
        r = min(int(np.sum(v1 > tol.rank)), int(np.sum(v2 > tol.rank)))
        if fam.x1.is_pure() and fam.x2.is_pure():
            a = dominant_vector(fam.x1)
            b = dominant_vector(fam.x2)
            r = 1
        coupling = a[:, :r] @ b[:, :r].conj().T
    k = np.asarray(coupling, dtype=np.complex128)
    if np.linalg.norm(k, 2) > 1 + tol.recon:
        raise PreconditionError("coupling must have operator norm <= 1")
    s1, s2 = psd_sqrt(fam.x1.matrix, tol), psd_sqrt(fam.x2.matrix, tol)
    b = np.sqrt(fam.w.c1_sq * fam.w.c2_sq) * np.exp(-1j * phase) * (s1 @ k @ s2)
    m = fam.w.c1_sq * fam.x1.matrix + fam.w.c2_sq * fam.x2.matrix + b + b.conj().T
    return DensityOperator(m, tol)


def is_member(x: DensityOperator, fam: SuperpositionFamily) -> tuple[bool, SuperpositionWitness | None]:
    """Projector test with ``P1`` fixed to the support of X1 and ``P2 = I - P1``.

    Conservative: a pair of projectors other than this one is never tried.
    """
    if x.dim != fam.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {fam.dim}")
    tol = fam.tol
    p1 = support_projector(fam.x1)
    p2 = Effect(np.eye(fam.dim) - p1.matrix, tol)
    if probability(p1, fam.x2) > tol.orth:
        return False, None
    for p, xi, c in ((p1, fam.x1, fam.w.c1_sq), (p2, fam.x2, fam.w.c2_sq)):
        r = np.linalg.norm(p.matrix @ x.matrix @ p.matrix - c * xi.matrix)
        if r > tol.member:
            return False, None
    return True, SuperpositionWitness(p1, p2)


def _compressed_effects(p: np.ndarray, n: int, rng: np.random.Generator, tol: ToleranceConfig):
    yield Effect(p, tol)
    for _ in range(n):
        b = random_effect(p.shape[0], rng, tol).matrix
        yield Effect(p @ b @ p, tol)


def check_eq15(x: DensityOperator, fam: SuperpositionFamily, trials: int, rng_seed=0) -> ProjectionReport:
    """Sample effects vanishing on one component and compare weighted probabilities.

    Effects with ``(A, X1) = 0`` are ``P2 B P2`` for random effects B; the
    projector ``P2`` itself is always included, so a state lying entirely in
    one component reports the full weight discrepancy. The mirrored check uses
    ``P1``.
    """
    rng = np.random.default_rng(rng_seed)
    tol = fam.tol
    p1 = support_projector(fam.x1).matrix
    p2 = np.eye(fam.dim) - p1
    worst: dict = {}
    res = []
    for label, p, other, c in (("x1_null", p2, fam.x2, fam.w.c2_sq), ("x2_null", p1, fam.x1, fam.w.c1_sq)):
        best = 0.0
        for i, a in enumerate(_compressed_effects(p, trials, rng, tol)):
            r = abs(probability(a, x) - c * probability(a, other))
            if r > best:
                best = r
                if r >= max(res, default=0.0):
                    worst = {"branch": label, "sample": i}
        res.append(best)
    return ProjectionReport(max(res), res[0], res[1], 2 * (trials + 1), worst)


def off_diagonal(a: Effect, fam: SuperpositionFamily) -> float:
    """Size of the block of ``a`` coupling the supports of X1 and X2.

    For pure components this is ``|<phi1|A|phi2>|``.
    """
    if fam.is_pure:
        return float(abs((dominant_vector(fam.x1).conj().T @ a.matrix @ dominant_vector(fam.x2))[0, 0]))
    q1 = support_projector(fam.x1).matrix
    q2 = support_projector(fam.x2).matrix
    return float(np.linalg.norm(q1 @ a.matrix @ q2, 2))


def phase_deviation(a: Effect, fam: SuperpositionFamily, phase_grid=DEFAULT_PHASES) -> float:
    """Largest ``|(A, X(phase)) - (A, mixture)|`` over the grid."""
    base = probability(a, fam.mixture())
    return max(abs(probability(a, member(fam, ph)) - base) for ph in phase_grid)


def is_insensitive(a: Effect, fam: SuperpositionFamily, phase_grid=DEFAULT_PHASES) -> bool:
    """Whether ``(A, X)`` is blind to the relative phase inside the family.

    Decided by a phase sweep over :func:`member`. For pure components the
    algebraic criterion ``<phi1|A|phi2> = 0`` is evaluated as well and must
    agree whenever both weights are nonzero.
    """
    tol = fam.tol
    swept = phase_deviation(a, fam, phase_grid) <= tol.prob
    if not fam.is_pure or min(fam.w.c1_sq, fam.w.c2_sq) <= tol.trace:
        return swept
    algebraic = off_diagonal(a, fam) <= tol.orth
    if swept != algebraic:
        raise ConsistencyError(
            f"phase sweep says insensitive={swept} but off-diagonal {off_diagonal(a, fam):.3e} says {algebraic}"
        )
    return swept
