"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Kets are column
vectors of shape ``(d, 1)``. Tensor factors are ordered object first, then
probe/channel factors, and the Kronecker product keeps the left operand's
indices outermost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

import numpy as np


class LayoutError(ValueError):
    """Dimension layout inconsistent with the operator it is applied to."""


class PreconditionError(ValueError):
    """An operation was called with input violating its precondition."""


@dataclass(frozen=True)
class ToleranceConfig:
    herm: float = 1e-10
    recon: float = 1e-8
    psd: float = 1e-9
    trace: float = 1e-9
    prob: float = 1e-8
    rank: float = 1e-9
    orth: float = 1e-9
    member: float = 1e-8
    disc: float = 1e-9
    sel: float = 1e-12

    def scaled(self, factor: float) -> "ToleranceConfig":
        """Every tolerance multiplied by ``factor``."""
        if not factor > 0:
            raise ValueError(f"tolerance scale must be positive, got {factor}")
        return replace(self, **{f.name: getattr(self, f.name) * factor for f in fields(self)})

    def updated(self, **overrides: float) -> "ToleranceConfig":
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


DEFAULT_TOL = ToleranceConfig()


@dataclass(frozen=True)
class DimensionLayout:
    """Dimensions of the tensor factors of a composite space."""

    factor_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise LayoutError(f"factor dimensions must be positive integers, got {self.factor_dims}")
        object.__setattr__(self, "factor_dims", dims)

    @property
    def total(self) -> int:
        return math.prod(self.factor_dims)

    def __len__(self) -> int:
        return len(self.factor_dims)

    def sub_dim(self, factors: Iterable[int]) -> int:
        return math.prod(self.factor_dims[i] for i in factors)

    def check(self, m: np.ndarray) -> None:
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise LayoutError(f"expected a square matrix, got shape {m.shape}")
        if m.shape[0] != self.total:
            raise LayoutError(
                f"layout {self.factor_dims} has total dimension {self.total}, matrix has {m.shape[0]}"
            )


def as_matrix(m, *, square: bool = False) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def frozen(m) -> np.ndarray:
    """Read-only complex copy of ``m``."""
    a = np.array(as_matrix(m), copy=True)
    a.flags.writeable = False
    return a


def _kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.kron carries heavy per-call overhead for the small matrices used here
    (p, q), (r, t) = a.shape, b.shape
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(p * r, q * t)


def tensor(*mats) -> np.ndarray:
    """Kronecker product, leftmost operand outermost."""
    if not mats:
        raise ValueError("tensor() needs at least one operand")
    out = as_matrix(mats[0])
    for m in mats[1:]:
        out = _kron(out, as_matrix(m))
    return out


def dagger(m) -> np.ndarray:
    return as_matrix(m).conj().T


def mat_mul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def trace(m) -> complex:
    return complex(np.trace(as_matrix(m, square=True)))


def frobenius_distance(a, b) -> float:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))


def hermiticity_residual(m) -> float:
    m = as_matrix(m, square=True)
    return float(np.max(np.abs(m - m.conj().T)))


def is_hermitian(m, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    return hermiticity_residual(m) <= tol.herm


def unitarity_residual(u) -> float:
    """``||U U^dagger - I||_F``."""
    u = as_matrix(u, square=True)
    return float(np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0])))


def is_unitary(u, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    return unitarity_residual(u) <= tol.recon


def hermitian_eig(m, tol: ToleranceConfig = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching eigenvector columns.

    Raises PreconditionError when ``m`` is not Hermitian within ``tol.herm``.
    """
    m = as_matrix(m, square=True)
    r = hermiticity_residual(m)
    if r > tol.herm:
        raise PreconditionError(f"matrix is not Hermitian (max |m - m^dagger| = {r:.3e})")
    # LAPACK only reads one triangle; symmetrize so the other contributes too.
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    return vals[::-1].copy(), vecs[:, ::-1].copy()


def psd_sqrt(m, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Square root of a positive semidefinite matrix (negative noise clipped)."""
    vals, vecs = hermitian_eig(m, tol)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def range_projector(m, threshold: float, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Projector onto the eigenspaces of Hermitian ``m`` with eigenvalue > threshold."""
    vals, vecs = hermitian_eig(m, tol)
    v = vecs[:, vals > threshold]
    return v @ v.conj().T


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros((dim, 1), dtype=np.complex128)
    v[index, 0] = 1.0
    return v


def projector(vec) -> np.ndarray:
    """``|v><v|`` for a normalised copy of ``vec``."""
    v = as_matrix(vec).reshape(-1, 1)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot project onto the zero vector")
    v = v / n
    return v @ v.conj().T


def _check_factor_set(layout: DimensionLayout, factors: Iterable[int]) -> list[int]:
    fs = sorted(set(int(i) for i in factors))
    for i in fs:
        if not 0 <= i < len(layout):
            raise LayoutError(f"factor index {i} out of range for layout {layout.factor_dims}")
    return fs


def partial_trace(m, layout: DimensionLayout | Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not in ``keep``.

    Kept factors appear in ascending index order in the result.
    """
    if not isinstance(layout, DimensionLayout):
        layout = DimensionLayout(tuple(layout))
    m = as_matrix(m)
    layout.check(m)
    keep = _check_factor_set(layout, keep)
    dims = layout.factor_dims
    n = len(dims)
    t = m.reshape(dims + dims)
    # einsum labels: row index i for factor i, column index n+i; traced factors share a label
    row = list(range(n))
    col = [i if i not in keep else n + i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    r = np.einsum(t, row + col, out)
    d = layout.sub_dim(keep)
    return r.reshape(d, d)


def embed(op, layout: DimensionLayout, factors: Iterable[int]) -> np.ndarray:
    """Lift ``op`` acting on ``factors`` (ascending order) to the full space.

    Identity is placed on every other factor.
    """
    return embed_product(layout, [(factors, op)])


def embed_product(layout: DimensionLayout, parts) -> np.ndarray:
    """Tensor product of operators on disjoint factor sets, identity elsewhere.

    ``parts`` is a sequence of ``(factors, op)`` pairs; each ``op`` acts on its
    factors in ascending index order.
    """
    dims = layout.factor_dims
    n = len(dims)
    order: list[int] = []
    big = None
    for factors, op in parts:
        fs = _check_factor_set(layout, factors)
        if set(fs) & set(order):
            raise LayoutError(f"factor sets overlap at {sorted(set(fs) & set(order))}")
        op = as_matrix(op, square=True)
        if op.shape[0] != layout.sub_dim(fs):
            raise LayoutError(
                f"operator of dimension {op.shape[0]} does not fit factors {fs} (dim {layout.sub_dim(fs)})"
            )
        big = op if big is None else _kron(big, op)
        order += fs
    rest = [i for i in range(n) if i not in order]
    if rest:
        eye = np.eye(layout.sub_dim(rest))
        big = eye if big is None else _kron(big, eye)
    order += rest
    if order == list(range(n)):
        return np.array(big, dtype=np.complex128)  # never alias a caller's operator
    t = big.reshape([dims[i] for i in order] * 2)
    inv = list(np.argsort(order))
    t = t.transpose(inv + [n + i for i in inv])
    return t.reshape(layout.total, layout.total)


def expectation(op, rho) -> float:
    """``Re Tr[op rho]`` for Hermitian ``op``, computed elementwise."""
    return float(np.real(np.vdot(op, rho)))


def product_expectation(layout: DimensionLayout, parts, rho) -> float:
    """``Re Tr[(op_1 (x) op_2 (x) ... (x) I) rho]`` without forming the full operator.

    Traces ``rho`` down to the factors the parts act on, then contracts there.
    """
    covered = sorted(f for factors, _ in parts for f in _check_factor_set(layout, factors))
    if not covered:
        return float(np.real(np.trace(as_matrix(rho))))
    reduced = partial_trace(rho, layout, covered)
    index = {f: k for k, f in enumerate(covered)}
    sub = DimensionLayout(tuple(layout.factor_dims[f] for f in covered))
    local = [(tuple(index[f] for f in factors), op) for factors, op in parts]
    return expectation(embed_product(sub, local), reduced)
