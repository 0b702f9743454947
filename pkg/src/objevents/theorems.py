"""Discriminating measurements and the consequences checked on them.

Given a measurement model, two orthogonal object states X1, X2 and, for some
channels, a reading that fires with certainty on X1 and never on X2, this
module checks on grids of superpositions that

* each such reading fires with probability ``|c1|^2`` (``verify_theorem1``),
* observations leaving out one of those channels cannot see the relative
  phase (``verify_theorem2``),
* two such channels never disagree (``verify_theorem3``),

and samples individual trials from the joint outcome distribution.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .linalg import PreconditionError, embed_product, partial_trace, range_projector
from .measurement import (
    MeasurementModel,
    Readings,
    coincidence_distribution,
    induced_effect,
    m_coincidence,
    m_total,
    output_state,
)
from .quantum import DensityOperator, Effect, Weights, complement, probability
from .superposition import DEFAULT_PHASES, SuperpositionFamily, member

DEFAULT_WEIGHTS = (
    Weights(1.0, 0.0),
    Weights(0.75, 0.25),
    Weights(0.5, 0.5),
    Weights(0.36, 0.64),
    Weights(0.0, 1.0),
)


class UnsupportedAnalysisError(ValueError):
    """The effect handed to the consistency analysis is not a product over channels."""


class FilterInconsistencyError(RuntimeError):
    """Channels identified different states in the same trial."""


@dataclass
class SuiteResult:
    """Max residual of one verification sweep, with the point where it occurred."""

    name: str
    passed: bool
    max_residual: float
    tolerance: float
    samples: int
    worst: dict = field(default_factory=dict)
    components: dict = field(default_factory=dict)
    notice: str = ""


class _Tracker:
    def __init__(self):
        self.max = 0.0
        self.worst: dict = {}
        self.samples = 0
        self.components: dict[str, float] = {}

    def add(self, component: str, residual: float, **witness):
        residual = float(residual)
        self.samples += 1
        self.components[component] = max(self.components.get(component, 0.0), residual)
        if residual > self.max or not self.worst:
            self.max = max(self.max, residual)
            self.worst = {"component": component, **witness}


@dataclass
class DiscriminationCheck:
    channel: str
    ok: bool
    r1: float
    r2: float
    complement_discriminates: bool


@dataclass(frozen=True)
class DiscriminationScenario:
    """A model, the discriminated family, and the readings claimed to discriminate.

    Construction does not enforce the premises, so broken scenarios can be
    built deliberately; see :meth:`premises`.
    """

    model: MeasurementModel
    fam: SuperpositionFamily
    discriminating: Mapping[str, Effect]

    def __post_init__(self):
        if self.fam.dim != self.model.object_dim:
            raise ValueError("family dimension does not match the model's object dimension")
        for name, a in self.discriminating.items():
            d = self.model.channel_layout.dim(name)
            if a.dim != d:
                raise ValueError(f"reading on {name!r} has dimension {a.dim}, channel has {d}")

    @property
    def channels(self) -> list[str]:
        return sorted(self.discriminating)

    def premises(self) -> dict[str, DiscriminationCheck]:
        return {
            n: check_discrimination(self.model, self.fam, n, self.discriminating[n]) for n in self.channels
        }

    def premises_hold(self) -> bool:
        return all(c.ok for c in self.premises().values())


def check_discrimination(model: MeasurementModel, fam: SuperpositionFamily, channel: str, a: Effect) -> DiscriminationCheck:
    """``r1 = |m(A; X1) - 1|``, ``r2 = m(A; X2)``; discriminates iff both are within ``tol.disc``."""
    tol = model.tol
    r1 = abs(m_coincidence(model, {channel: a}, fam.x1) - 1.0)
    r2 = abs(m_coincidence(model, {channel: a}, fam.x2))
    ok = r1 <= tol.disc and r2 <= tol.disc
    # the complement then fires on X2 and never on X1
    ca = complement(a)
    c_ok = (
        abs(m_coincidence(model, {channel: ca}, fam.x2) - 1.0) <= tol.disc
        and abs(m_coincidence(model, {channel: ca}, fam.x1)) <= tol.disc
    )
    return DiscriminationCheck(channel, ok, r1, r2, c_ok)


def _grid(fam: SuperpositionFamily, weights_grid, phases):
    """Yield ``(weights, phase_label, state)`` over the mixture and each phase."""
    for w in weights_grid:
        fw = fam.with_weights(w)
        yield w, "mixture", fw.mixture(), fw
        for ph in phases:
            yield w, float(ph), member(fw, ph), fw


def _w(w: Weights) -> list[float]:
    return [w.c1_sq, w.c2_sq]


def verify_theorem1(
    scenario: DiscriminationScenario,
    phases: Sequence[float] = DEFAULT_PHASES,
    weights_grid: Sequence[Weights] = DEFAULT_WEIGHTS,
    tolerance: float | None = None,
) -> SuiteResult:
    """``|m(A^mu; X) - |c1|^2|`` for every discriminating reading and grid state."""
    tol = scenario.model.tol.prob if tolerance is None else tolerance
    tr = _Tracker()
    for w, ph, x, _ in _grid(scenario.fam, weights_grid, phases):
        for mu in scenario.channels:
            p = m_coincidence(scenario.model, {mu: scenario.discriminating[mu]}, x)
            tr.add("branch_probability", abs(p - w.c1_sq), weights=_w(w), phase=ph, channel=mu, m=p)
    return SuiteResult("theorem1", tr.max <= tol, tr.max, tol, tr.samples, tr.worst, tr.components)


def verify_theorem2(
    scenario: DiscriminationScenario,
    readings_nu: Sequence[Readings],
    phases: Sequence[float] = DEFAULT_PHASES,
    weights_grid: Sequence[Weights] = DEFAULT_WEIGHTS,
    tolerance: float | None = None,
) -> SuiteResult:
    """Interference blindness of observations that leave out a discriminating channel.

    For each reading set ``A^nu`` and each discriminating channel ``mu`` it
    does not touch, compares on every grid state X against the mixture:
    ``m(A^nu, A^mu; X)`` (component ``joint``), ``m(A^nu; X)`` (``single``), and
    the mixture value against ``|c1|^2 m(A^nu; X1) + |c2|^2 m(A^nu; X2)``
    (``affine``).
    """
    tol = scenario.model.tol.prob if tolerance is None else tolerance
    model, fam = scenario.model, scenario.fam
    tr = _Tracker()
    usable = 0
    for k, r_nu in enumerate(readings_nu):
        excluded = [mu for mu in scenario.channels if mu not in r_nu]
        if not excluded:
            continue
        usable += 1
        p1 = m_coincidence(model, r_nu, fam.x1)
        p2 = m_coincidence(model, r_nu, fam.x2)
        for w in weights_grid:
            fw = fam.with_weights(w)
            mixture = fw.mixture()
            m_mix = m_coincidence(model, r_nu, mixture)
            tr.add("affine", abs(m_mix - w.c1_sq * p1 - w.c2_sq * p2), reading=k, weights=_w(w))
            joint_mix = {mu: m_coincidence(model, {**r_nu, mu: scenario.discriminating[mu]}, mixture) for mu in excluded}
            for ph in phases:
                x = member(fw, ph)
                tr.add("single", abs(m_coincidence(model, r_nu, x) - m_mix), reading=k, weights=_w(w), phase=float(ph))
                for mu in excluded:
                    joint = m_coincidence(model, {**r_nu, mu: scenario.discriminating[mu]}, x)
                    tr.add(
                        "joint", abs(joint - joint_mix[mu]), reading=k, weights=_w(w), phase=float(ph), channel=mu
                    )
    if not usable:
        raise PreconditionError("every reading set covers all discriminating channels")
    return SuiteResult("theorem2", tr.max <= tol, tr.max, tol, tr.samples, tr.worst, tr.components)


def verify_theorem3(
    scenario: DiscriminationScenario,
    phases: Sequence[float] = DEFAULT_PHASES,
    weights_grid: Sequence[Weights] = DEFAULT_WEIGHTS,
    tolerance: float | None = None,
    spread_tolerance: float | None = None,
) -> SuiteResult:
    """Disagreement coincidences and the spread of ``m(A,B), m(A), m(B)``.

    Passes iff every disagreement is within ``tolerance`` and every spread
    within ``spread_tolerance`` (three times ``tolerance`` by default).
    """
    if len(scenario.channels) < 2:
        raise PreconditionError("need at least two discriminating channels")
    tol = scenario.model.tol.prob if tolerance is None else tolerance
    spread_tol = 3 * tol if spread_tolerance is None else spread_tolerance
    model = scenario.model
    tr = _Tracker()
    comps = {"disagreement": 0.0, "channel_spread": 0.0}
    worst_ratio = -1.0
    worst: dict = {}
    for w, ph, x, _ in _grid(scenario.fam, weights_grid, phases):
        single = {mu: m_coincidence(model, {mu: scenario.discriminating[mu]}, x) for mu in scenario.channels}
        for mu, nu in itertools.permutations(scenario.channels, 2):
            a, b = scenario.discriminating[mu], scenario.discriminating[nu]
            d1 = m_coincidence(model, {mu: a, nu: complement(b)}, x)
            d2 = m_coincidence(model, {mu: complement(a), nu: b}, x)
            both = m_coincidence(model, {mu: a, nu: b}, x)
            vals = (both, single[mu], single[nu])
            dis = max(abs(d1), abs(d2))
            spread = max(vals) - min(vals)
            tr.samples += 1
            comps["disagreement"] = max(comps["disagreement"], dis)
            comps["channel_spread"] = max(comps["channel_spread"], spread)
            ratio = max(dis / tol, spread / spread_tol)
            if ratio > worst_ratio:
                worst_ratio = ratio
                worst = {"weights": _w(w), "phase": ph, "pair": [mu, nu], "disagreement": dis, "spread": spread}
    passed = comps["disagreement"] <= tol and comps["channel_spread"] <= spread_tol
    res = SuiteResult("theorem3", passed, comps["disagreement"], tol, tr.samples, worst, comps)
    res.notice = f"channel spread tolerance {spread_tol:g}"
    return res


# ---------------------------------------------------------------- trial sampling


@dataclass(frozen=True, slots=True)
class TrialRecord:
    trial_index: int
    outcomes: dict
    agreed: bool


@dataclass
class TrialSummary:
    n_trials: int
    channels: list[str]
    disagreements: int
    frequency_e1: float
    channel_frequencies: dict[str, float]
    predicted: dict[str, float]
    disagreement_probability: float
    seed: int

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``frequency_e1`` around the first channel's prediction."""
        p = self.predicted[self.channels[0]]
        return float(np.sqrt(max(p * (1 - p), 0.0) / self.n_trials))


def sampler(seed) -> np.random.Generator:
    """Counter-based (Philox) generator so draws do not depend on platform RNG state."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _draw(probs: dict, n: int, seed) -> list:
    """Inverse-CDF draws of the keys of ``probs`` in sorted key order."""
    keys = sorted(probs)
    p = np.clip(np.array([probs[k] for k in keys], dtype=float), 0.0, None)
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    u = sampler(seed).random(n)
    idx = np.searchsorted(cdf, u, side="right")
    return [keys[i] for i in np.minimum(idx, len(keys) - 1)]


def sample_trials(
    scenario: DiscriminationScenario, x: DensityOperator, n_trials: int, rng_seed=0
) -> tuple[list[TrialRecord], TrialSummary]:
    """Draw outcome tuples of all discriminating channels from their joint distribution."""
    names = scenario.channels
    dist = coincidence_distribution(scenario.model, dict(scenario.discriminating), x)
    draws = _draw(dist.probabilities, n_trials, rng_seed)
    records = []
    ones = np.zeros(len(names))
    dis = all_one = 0
    for i, bits in enumerate(draws):
        agreed = len(set(bits)) == 1
        dis += not agreed
        all_one += agreed and bits[0] == 1
        ones += bits
        records.append(TrialRecord(i, dict(zip(names, bits)), agreed))
    predicted = {mu: m_coincidence(scenario.model, {mu: scenario.discriminating[mu]}, x) for mu in names}
    summary = TrialSummary(
        n_trials=n_trials,
        channels=list(names),
        disagreements=int(dis),
        frequency_e1=all_one / n_trials if n_trials else 0.0,
        channel_frequencies={n: float(f) / n_trials if n_trials else 0.0 for n, f in zip(names, ones)},
        predicted=predicted,
        disagreement_probability=dist.disagreement(),
        seed=int(rng_seed),
    )
    return records, summary


# ---------------------------------------------------------------- consistency of interference-sensitive observations


@dataclass
class ConsistencyReport:
    sensitive: bool
    phase_min: float
    phase_max: float
    off_diagonals: dict[str, float]
    counterexample: bool
    factors: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


def factorize(model: MeasurementModel, a_total) -> dict[str, np.ndarray]:
    """Split a final-space effect into one factor per channel.

    Factors are scaled to unit largest eigenvalue; channels whose factor is
    proportional to the identity are still listed. Raises
    UnsupportedAnalysisError when the effect is not a tensor product over
    channels or acts non-trivially on unobserved factors.
    """
    cl = model.channel_layout
    layout = cl.layout
    a = a_total.matrix if isinstance(a_total, Effect) else np.asarray(a_total, dtype=np.complex128)
    layout.check(a)
    groups = [(n, cl.factors(n)) for n in cl.names]
    if cl.unobserved:
        groups.append((None, cl.unobserved))
    tr = np.trace(a).real
    scale = max(1.0, float(np.linalg.norm(a)))
    if abs(tr) <= model.tol.recon:
        if np.linalg.norm(a) <= model.tol.recon:
            return {n: np.zeros((cl.dim(n),) * 2, dtype=np.complex128) for n in cl.names}
        raise UnsupportedAnalysisError("traceless non-zero operator is not a product effect")
    reduced = {n: partial_trace(a, layout, fs) for n, fs in groups}
    candidate = embed_product(layout, [(fs, reduced[n]) for n, fs in groups]) / tr ** (len(groups) - 1)
    gap = np.linalg.norm(candidate - a)
    if gap > model.tol.recon * scale:
        raise UnsupportedAnalysisError(f"effect is not a product over channels (residual {gap:.3e})")
    if None in reduced:
        r = reduced[None]
        d = r.shape[0]
        if np.linalg.norm(r - np.trace(r) / d * np.eye(d)) > model.tol.recon * scale:
            raise UnsupportedAnalysisError("effect acts on unobserved factors")
    out = {}
    for n in cl.names:
        f = reduced[n]
        top = np.max(np.abs(np.linalg.eigvalsh((f + f.conj().T) / 2)))
        out[n] = f / top if top > 0 else f
    return out


def _channel_off_diagonal(model: MeasurementModel, fam: SuperpositionFamily, channel: str, factor: np.ndarray) -> float:
    y1 = output_state(model, channel, fam.x1).matrix
    y2 = output_state(model, channel, fam.x2).matrix
    q1 = range_projector(y1, model.tol.rank, model.tol)
    q2 = range_projector(y2, model.tol.rank, model.tol)
    return float(np.linalg.norm(q1 @ factor @ q2, 2))


def consistency_analysis(
    scenario: DiscriminationScenario,
    a_total,
    phases: Sequence[float] = DEFAULT_PHASES,
    weights: Weights | None = None,
) -> ConsistencyReport:
    """Check that an interference-sensitive product observation reads every discriminating channel.

    ``a_total`` is either a mapping of channel name to Effect (channels left
    out read the identity) or an operator on the whole final space. A channel
    factor "reads" the interference when its block between the two channel
    states prepared from X1 and X2 is non-zero.
    """
    model = scenario.model
    tol = model.tol
    cl = model.channel_layout
    if isinstance(a_total, Mapping):
        op = embed_product(cl.layout, [(cl.factors(n), a_total[n].matrix) for n in sorted(a_total)])
    else:
        op = a_total.matrix if isinstance(a_total, Effect) else np.asarray(a_total, dtype=np.complex128)
    factors = factorize(model, op)
    fam = scenario.fam if weights is None else scenario.fam.with_weights(weights)
    vals = [m_total(model, op, member(fam, ph)) for ph in phases]
    lo, hi = min(vals), max(vals)
    sensitive = hi - lo > tol.prob
    offd = {n: _channel_off_diagonal(model, fam, n, f) for n, f in factors.items()}
    counter = sensitive and any(offd[mu] <= tol.orth for mu in scenario.channels)
    return ConsistencyReport(sensitive, lo, hi, offd, counter, factors)


# ---------------------------------------------------------------- multiway filtering


@dataclass(frozen=True)
class MultiwayScenario:
    """Mutually orthogonal object states and, per channel, one reading for each of them."""

    model: MeasurementModel
    states: tuple[DensityOperator, ...]
    readings: Mapping[str, tuple[Effect, ...]]

    def __post_init__(self):
        k = len(self.states)
        for n, rs in self.readings.items():
            if len(rs) != k:
                raise ValueError(f"channel {n!r} has {len(rs)} readings for {k} states")
            self.model.channel_layout.factors(n)

    @property
    def channels(self) -> list[str]:
        return sorted(self.readings)

    def premise_residual(self) -> float:
        """Max ``|m(A^mu_i; X_j) - delta_ij|`` over channels and index pairs."""
        worst = 0.0
        for n in self.channels:
            for i, a in enumerate(self.readings[n]):
                for j, x in enumerate(self.states):
                    worst = max(worst, abs(m_coincidence(self.model, {n: a}, x) - (i == j)))
        return worst


@dataclass
class FilterResult:
    indices: np.ndarray
    frequencies: np.ndarray
    expected: np.ndarray
    inconsistencies: int
    n_trials: int

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(np.clip(self.expected * (1 - self.expected), 0, None) / self.n_trials)


def multiway_filter(
    scenario: MultiwayScenario, x: DensityOperator, n_trials: int, rng_seed=0, strict: bool = True
) -> FilterResult:
    """Per trial, the index of the state singled out by every channel at once.

    Each channel is read with its family of readings; if those do not sum to
    the identity a "none fired" outcome (index -1) absorbs the remainder.
    Trials where channels name different indices, or none, are inconsistent
    and marked -1; with ``strict`` they raise FilterInconsistencyError.
    """
    model = scenario.model
    names = scenario.channels
    k = len(scenario.states)
    if scenario.premise_residual() > model.tol.disc:
        raise PreconditionError("readings do not discriminate the states")
    outcome_sets = {}
    for n in names:
        rs = {i: a.matrix for i, a in enumerate(scenario.readings[n])}
        rest = np.eye(model.channel_layout.dim(n)) - sum(rs.values())
        if np.linalg.norm(rest) > model.tol.recon:
            rs[-1] = rest
        outcome_sets[n] = rs
    probs = {}
    for combo in itertools.product(*(sorted(outcome_sets[n]) for n in names)):
        probs[combo] = m_coincidence(model, {n: outcome_sets[n][i] for n, i in zip(names, combo)}, x)
    draws = _draw(probs, n_trials, rng_seed)
    idx = np.array([c[0] if len(set(c)) == 1 and c[0] >= 0 else -1 for c in draws], dtype=int)
    bad = int(np.sum(idx < 0))
    if strict and bad:
        raise FilterInconsistencyError(f"{bad} of {n_trials} trials had no unique identified index")
    freqs = np.array([np.mean(idx == i) if n_trials else 0.0 for i in range(k)])
    first = names[0]
    expected = np.array([probability(induced_effect(model, {first: scenario.readings[first][i]}), x) for i in range(k)])
    return FilterResult(idx, freqs, expected, bad, n_trials)
