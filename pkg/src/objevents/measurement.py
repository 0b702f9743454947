"""Multi-channel measurements realised as unitary dilations.

A model evolves ``X (x) X_m -> S (X (x) X_m) S^dagger``. The final space is
split into tensor factors (object first) and channels are named groups of
those factors. The coincidence probability of readings on several channels
is the expectation of their tensor product, with identity on every factor
that is not read.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    DimensionLayout,
    LayoutError,
    ToleranceConfig,
    embed,
    embed_product,
    product_expectation,
    expectation,
    frozen,
    partial_trace,
    psd_sqrt,
    unitarity_residual,
)
from .quantum import (
    DensityOperator,
    Effect,
    ValidationError,
    random_effect_matrix,
    random_state_matrix,
)
from .superposition import ConsistencyError


class UnknownChannelError(KeyError):
    pass


class DegenerateSelectionError(ValueError):
    """Conditioning on a reading that (almost) never fires."""


@dataclass(frozen=True)
class ChannelLayout:
    """Named, disjoint groups of factors of the final space."""

    layout: DimensionLayout
    channels: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        chans = {}
        seen: set[int] = set()
        for name, factors in self.channels.items():
            fs = tuple(sorted(int(i) for i in factors))
            if not fs:
                raise LayoutError(f"channel {name!r} has no factors")
            if len(set(fs)) != len(fs):
                raise LayoutError(f"channel {name!r} repeats a factor")
            for i in fs:
                if not 0 <= i < len(self.layout):
                    raise LayoutError(f"channel {name!r}: factor {i} out of range")
            if seen & set(fs):
                raise LayoutError(f"channel {name!r} overlaps another channel")
            seen |= set(fs)
            chans[str(name)] = fs
        object.__setattr__(self, "channels", chans)

    @classmethod
    def per_factor(cls, factor_dims, names=None) -> "ChannelLayout":
        """One channel per factor, named ``ch1, ch2, ...`` unless given."""
        layout = DimensionLayout(tuple(factor_dims))
        names = names or [f"ch{i + 1}" for i in range(len(layout))]
        return cls(layout, {n: (i,) for i, n in enumerate(names)})

    @property
    def names(self) -> list[str]:
        return sorted(self.channels)

    @property
    def unobserved(self) -> tuple[int, ...]:
        used = {i for fs in self.channels.values() for i in fs}
        return tuple(i for i in range(len(self.layout)) if i not in used)

    def factors(self, name: str) -> tuple[int, ...]:
        try:
            return self.channels[name]
        except KeyError:
            raise UnknownChannelError(f"unknown channel {name!r}; have {self.names}") from None

    def dim(self, name: str) -> int:
        return self.layout.sub_dim(self.factors(name))

    def merged(self, names, new_name: str) -> "ChannelLayout":
        """Combine several channels into one named group."""
        names = list(names)
        fs = tuple(i for n in names for i in self.factors(n))
        chans = {k: v for k, v in self.channels.items() if k not in names}
        if new_name in chans:
            raise LayoutError(f"channel name {new_name!r} already in use")
        chans[new_name] = fs
        return ChannelLayout(self.layout, chans)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Object dimension, probe state ``X_m``, unitary ``S`` and channel layout.

    ``checked=False`` skips the unitarity test; it exists so that corrupted
    models can be fed to the axiom verifier as negative controls.
    """

    object_dim: int
    probe_state: DensityOperator
    s: np.ndarray
    channel_layout: ChannelLayout
    checked: bool = True
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        s = frozen(self.s)
        total = self.object_dim * self.probe_state.dim
        if s.shape != (total, total):
            raise LayoutError(
                f"S has shape {s.shape}; object {self.object_dim} x probe {self.probe_state.dim} needs {total}"
            )
        if self.channel_layout.layout.total != total:
            raise LayoutError(
                f"channel layout spans dimension {self.channel_layout.layout.total}, S acts on {total}"
            )
        if self.checked:
            r = unitarity_residual(s)
            if r > self.tol.recon:
                raise ValidationError(f"S is not unitary (||S S^dagger - I||_F = {r:.3e})")
        object.__setattr__(self, "s", s)

    @property
    def layout(self) -> DimensionLayout:
        return self.channel_layout.layout

    @property
    def channels(self) -> list[str]:
        return self.channel_layout.names

    def evolve(self, x) -> np.ndarray:
        """Final matrix ``S (X (x) X_m) S^dagger`` without validation."""
        x = x.matrix if isinstance(x, DensityOperator) else np.asarray(x)
        if x.shape != (self.object_dim, self.object_dim):
            raise LayoutError(f"object state has shape {x.shape}, model expects dimension {self.object_dim}")
        return self.s @ np.kron(x, self.probe_state.matrix) @ self.s.conj().T


Readings = Mapping[str, Effect]


@dataclass
class CoincidenceDistribution:
    """Joint distribution of the binary outcomes of several channel readings."""

    channels: tuple[str, ...]
    probabilities: dict[tuple[int, ...], float]

    def disagreement(self) -> float:
        """Total probability of outcome tuples that are not all equal."""
        return sum(p for k, p in self.probabilities.items() if len(set(k)) > 1)


def _reading_matrix(a) -> np.ndarray:
    return a.matrix if isinstance(a, Effect) else np.asarray(a, dtype=np.complex128)


def _reading_parts(model: MeasurementModel, readings: Readings) -> list:
    cl = model.channel_layout
    parts = []
    for name in sorted(readings):
        a = _reading_matrix(readings[name])
        d = cl.dim(name)
        if a.shape != (d, d):
            raise LayoutError(f"reading on {name!r} has shape {a.shape}, channel dimension is {d}")
        parts.append((cl.factors(name), a))
    return parts


def reading_operator(model: MeasurementModel, readings: Readings) -> np.ndarray:
    """``(x)_mu A^mu (x) I_rest`` on the final space."""
    return embed_product(model.layout, _reading_parts(model, readings))


def final_state(model: MeasurementModel, x: DensityOperator) -> DensityOperator:
    return DensityOperator(model.evolve(x), model.tol)


def m_total(model: MeasurementModel, a_total, x) -> float:
    """Probability of an arbitrary final-space effect."""
    a = _reading_matrix(a_total)
    model.layout.check(a)
    return expectation(a, model.evolve(x))


def m_coincidence(model: MeasurementModel, readings: Readings, x) -> float:
    """Probability that every listed reading fires. No readings gives ``Tr`` of the final state."""
    return product_expectation(model.layout, _reading_parts(model, readings), model.evolve(x))


def coincidence_distribution(model: MeasurementModel, readings: Readings, x) -> CoincidenceDistribution:
    """All ``2^k`` outcome probabilities; outcome 0 uses the complement reading.

    Channels are ordered by name, and so are the entries of each outcome tuple.
    """
    if not readings:
        raise ValueError("need at least one reading")
    names = tuple(sorted(readings))
    rho = model.evolve(x)
    mats = {n: _reading_matrix(readings[n]) for n in names}
    probs = {}
    for bits in itertools.product((1, 0), repeat=len(names)):
        chosen = {n: (mats[n] if b else np.eye(mats[n].shape[0]) - mats[n]) for n, b in zip(names, bits)}
        probs[bits] = product_expectation(model.layout, _reading_parts(model, chosen), rho)
    return CoincidenceDistribution(names, probs)


# ---------------------------------------------------------------- axioms


@dataclass
class AxiomCheck:
    name: str
    max_residual: float = 0.0
    samples: int = 0
    worst: dict = field(default_factory=dict)

    def record(self, residual: float, **witness) -> None:
        residual = float(residual)
        if self.samples == 0 or residual > self.max_residual:
            self.max_residual = residual
            self.worst = witness
        self.samples += 1


@dataclass
class AxiomReport:
    checks: dict[str, AxiomCheck]

    def __getitem__(self, key: str) -> AxiomCheck:
        return self.checks[key]

    def failures(self, tol: float) -> list[str]:
        return [k for k, c in self.checks.items() if c.max_residual > tol]


AXIOMS = ("M0", "M1", "M2", "M3", "M4", "M5", "complement_sum", "joint_bound")


def _bound_violation(p: float) -> float:
    return max(0.0, -p, p - 1.0)


def verify_axioms(model: MeasurementModel, samples: int, rng_seed=0) -> AxiomReport:
    """Sample random states and readings and measure how far each axiom is violated.

    Residuals per key:

    * ``M0`` ``|m(;X) - 1|``
    * ``M1`` distance of any sampled probability from [0, 1]
    * ``M2`` affinity in the state
    * ``M3`` linearity over final-space effects
    * ``M4`` the separability identity plus independence of the marginal from
      the ignored reading, for channel pairs and for disjoint channel groups
    * ``M5`` linearity in a single channel's reading
    * ``complement_sum`` the separability identity alone; ``joint_bound`` ``max(0, m(A,B) - m(A))``
    """
    rng = np.random.default_rng(rng_seed)
    checks = {k: AxiomCheck(k) for k in AXIOMS}
    cl = model.channel_layout
    names = cl.names
    layout = cl.layout
    d_obj, d_tot = model.object_dim, layout.total

    def m(ops, rho):
        return product_expectation(layout, ops, rho)

    for i in range(samples):
        x1 = random_state_matrix(d_obj, rng)
        x2 = random_state_matrix(d_obj, rng)
        t = rng.uniform()
        rho1, rho2 = model.evolve(x1), model.evolve(x2)
        rho_t = model.evolve(t * x1 + (1 - t) * x2)
        reads = {n: random_effect_matrix(cl.dim(n), rng) for n in names}
        all_ops = [(cl.factors(n), reads[n]) for n in names]
        b = random_effect_matrix(d_tot, rng)
        c = random_effect_matrix(d_tot, rng)

        checks["M0"].record(abs(np.trace(rho1).real - 1.0), sample=i)

        p_all = m(all_ops, rho1)
        p_b = expectation(b, rho1)
        p_c = expectation(c, rho1)
        checks["M1"].record(max(_bound_violation(p) for p in (p_all, p_b, p_c, np.trace(rho1).real)), sample=i)

        checks["M2"].record(
            max(
                abs(m(all_ops, rho_t) - t * p_all - (1 - t) * m(all_ops, rho2)),
                abs(expectation(b, rho_t) - t * p_b - (1 - t) * expectation(b, rho2)),
            ),
            sample=i,
            t=t,
        )

        alpha, beta = rng.dirichlet([1.0, 1.0, 1.0])[:2]
        checks["M3"].record(abs(expectation(alpha * b + beta * c, rho1) - alpha * p_b - beta * p_c), sample=i)

        mu = names[rng.integers(len(names))]
        other = [(cl.factors(n), reads[n]) for n in names if n != mu]
        b_mu = random_effect_matrix(cl.dim(mu), rng)
        c_mu = random_effect_matrix(cl.dim(mu), rng)
        lhs = m([(cl.factors(mu), alpha * b_mu + beta * c_mu)] + other, rho1)
        rhs = alpha * m([(cl.factors(mu), b_mu)] + other, rho1) + beta * m([(cl.factors(mu), c_mu)] + other, rho1)
        checks["M5"].record(abs(lhs - rhs), sample=i, channel=mu)

        if len(names) < 2:
            continue
        # channel pair
        mu, nu = rng.choice(names, size=2, replace=False)
        mu, nu = str(mu), str(nu)
        a_mu, a_nu = reads[mu], reads[nu]
        a_nu2 = random_effect_matrix(cl.dim(nu), rng)
        fm, fn = cl.factors(mu), cl.factors(nu)
        marg = m([(fm, a_mu)], rho1)
        both = m([(fm, a_mu), (fn, a_nu)], rho1)
        split = both + m([(fm, a_mu), (fn, np.eye(len(a_nu)) - a_nu)], rho1)
        split2 = m([(fm, a_mu), (fn, a_nu2)], rho1) + m([(fm, a_mu), (fn, np.eye(len(a_nu2)) - a_nu2)], rho1)
        r_sum = abs(split - marg)
        checks["complement_sum"].record(r_sum, sample=i, mu=mu, nu=nu)
        checks["joint_bound"].record(max(0.0, both - marg), sample=i, mu=mu, nu=nu)
        checks["M4"].record(max(r_sum, abs(split - split2)), sample=i, mu=mu, nu=nu)

        # disjoint channel groups with non-product readings on each group
        perm = [str(n) for n in rng.permutation(names)]
        cut = int(rng.integers(1, len(perm)))
        g, h = perm[:cut], perm[cut:]
        if len(h) > 1 and rng.uniform() < 0.5:
            h = h[:-1]
        fg = tuple(f for n in g for f in cl.factors(n))
        fh = tuple(f for n in h for f in cl.factors(n))
        a_g = random_effect_matrix(layout.sub_dim(fg), rng)
        a_h = random_effect_matrix(layout.sub_dim(fh), rng)
        a_h2 = random_effect_matrix(layout.sub_dim(fh), rng)
        gm = m([(fg, a_g)], rho1)
        s1 = m([(fg, a_g), (fh, a_h)], rho1) + m([(fg, a_g), (fh, np.eye(len(a_h)) - a_h)], rho1)
        s2 = m([(fg, a_g), (fh, a_h2)], rho1) + m([(fg, a_g), (fh, np.eye(len(a_h2)) - a_h2)], rho1)
        rg = abs(s1 - gm)
        checks["complement_sum"].record(rg, sample=i, groups=[sorted(g), sorted(h)])
        checks["M4"].record(max(rg, abs(s1 - s2)), sample=i, groups=[sorted(g), sorted(h)])
    return AxiomReport(checks)


# ---------------------------------------------------------------- induced effects and output states


def _spanning_states(d: int):
    """``d^2`` pure states whose projectors span the Hermitian matrices."""
    for i in range(d):
        v = np.zeros(d, dtype=np.complex128)
        v[i] = 1
        yield v
    for i, j in itertools.combinations(range(d), 2):
        for ph in (1, 1j):
            v = np.zeros(d, dtype=np.complex128)
            v[i], v[j] = 1 / np.sqrt(2), ph / np.sqrt(2)
            yield v


def induced_effect(model: MeasurementModel, readings: Readings) -> Effect:
    """Object-space effect F with ``(F, X) = m(readings; X)`` for every X.

    Pulls the reading operator back through S and compresses it against the
    probe state. The result is checked against :func:`m_coincidence` on a
    spanning set of object states.
    """
    e = reading_operator(model, readings)
    pulled = model.s.conj().T @ e @ model.s
    d_obj, d_probe = model.object_dim, model.probe_state.dim
    root = np.kron(np.eye(d_obj), psd_sqrt(model.probe_state.matrix, model.tol))
    f = partial_trace(root @ pulled @ root, (d_obj, d_probe), keep=[0])
    f = (f + f.conj().T) / 2
    for v in _spanning_states(d_obj):
        x = np.outer(v, v.conj())
        gap = abs(expectation(f, x) - m_coincidence(model, readings, x))
        if gap > model.tol.prob:
            raise ConsistencyError(f"induced effect disagrees with the coincidence functional by {gap:.3e}")
    return Effect(f, model.tol)


def output_state(model: MeasurementModel, channel: str, x: DensityOperator) -> DensityOperator:
    """State prepared on ``channel``: the final state with every other factor traced out."""
    rho = model.evolve(x)
    return DensityOperator(partial_trace(rho, model.layout, model.channel_layout.factors(channel)), model.tol)


def conditional_output_state(
    model: MeasurementModel, channel: str, selection: str, a_mu: Effect, x: DensityOperator
) -> DensityOperator:
    """State on ``channel`` given that ``a_mu`` fired on the selection channel.

    Uses the compression ``sqrt(A) rho sqrt(A)`` on the selection channel,
    renormalised by the selection probability.
    """
    cl = model.channel_layout
    if channel == selection:
        raise ValueError("selection channel must differ from the prepared channel")
    sel = cl.factors(selection)
    a = _reading_matrix(a_mu)
    if a.shape != (cl.dim(selection),) * 2:
        raise LayoutError(f"selection reading has shape {a.shape}, channel dimension is {cl.dim(selection)}")
    k = embed(psd_sqrt(a, model.tol), model.layout, sel)
    rho = model.evolve(x)
    compressed = k @ rho @ k.conj().T
    p = np.trace(compressed).real
    if p <= model.tol.sel:
        raise DegenerateSelectionError(f"selection probability {p:.3e} is too small to condition on")
    out = partial_trace(compressed, model.layout, cl.factors(channel)) / p
    return DensityOperator(out, model.tol)


# ---------------------------------------------------------------- builders


def controlled_shift(d: int) -> np.ndarray:
    """``|i>|j> -> |i>|j + i mod d>``; CNOT for ``d = 2``."""
    u = np.zeros((d * d, d * d), dtype=np.complex128)
    for i in range(d):
        for j in range(d):
            u[i * d + (j + i) % d, i * d + j] = 1
    return u


CNOT = controlled_shift(2)


def copy_model(d: int = 2, names=("ch1", "ch2"), tol: ToleranceConfig = DEFAULT_TOL) -> MeasurementModel:
    """``phi_i (x) psi_0 -> phi_i (x) psi_i`` with computational bases on both sides."""
    return MeasurementModel(
        d,
        DensityOperator.basis(0, d, tol),
        controlled_shift(d),
        ChannelLayout.per_factor((d, d), list(names)),
        tol=tol,
    )


def compose(
    model: MeasurementModel,
    channel: str,
    u,
    probe_state: DensityOperator,
    new_channel: str,
) -> MeasurementModel:
    """Follow ``model`` by a unitary coupling ``channel`` to a fresh probe.

    ``u`` acts on the channel's factors followed by the new probe factor. The
    new factor becomes channel ``new_channel``; existing channels keep their
    factors.
    """
    cl = model.channel_layout
    if new_channel in cl.channels:
        raise LayoutError(f"channel name {new_channel!r} already in use")
    new_index = len(cl.layout)
    layout = DimensionLayout(cl.layout.factor_dims + (probe_state.dim,))
    fs = list(cl.factors(channel)) + [new_index]
    big_u = embed(np.asarray(u, dtype=np.complex128), layout, fs)
    s = big_u @ np.kron(model.s, np.eye(probe_state.dim))
    chans = dict(cl.channels)
    chans[new_channel] = (new_index,)
    return MeasurementModel(
        model.object_dim,
        DensityOperator(np.kron(model.probe_state.matrix, probe_state.matrix), model.tol),
        s,
        ChannelLayout(layout, chans),
        checked=model.checked,
        tol=model.tol,
    )


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary: QR of a Ginibre matrix with the R-diagonal phases divided out."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_model(object_dim: int, probe_dims, rng: np.random.Generator, tol: ToleranceConfig = DEFAULT_TOL) -> MeasurementModel:
    """Haar-random S, random probe state, one channel per final factor."""
    probe_dims = tuple(int(p) for p in probe_dims)
    d_probe = int(np.prod(probe_dims))
    probe = DensityOperator(random_state_matrix(d_probe, rng), tol)
    s = haar_unitary(object_dim * d_probe, rng)
    return MeasurementModel(
        object_dim, probe, s, ChannelLayout.per_factor((object_dim,) + probe_dims), tol=tol
    )
