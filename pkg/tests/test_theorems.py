import numpy as np
import pytest

from objevents.linalg import PreconditionError
from objevents.measurement import ChannelLayout, MeasurementModel, controlled_shift, m_coincidence
from objevents.quantum import DensityOperator, Effect, Weights, complement
from objevents.superposition import member
from objevents.theorems import (
    DiscriminationScenario,
    MultiwayScenario,
    UnsupportedAnalysisError,
    check_discrimination,
    consistency_analysis,
    factorize,
    multiway_filter,
    sample_trials,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)


def test_discrimination_checks(cnot, fam, p0, plus):
    assert check_discrimination(cnot, fam, "ch2", p0).ok
    ident = check_discrimination(cnot, fam, "ch2", Effect.identity(2))
    assert not ident.ok and abs(ident.r2 - 1) < 1e-12
    broken = check_discrimination(cnot, fam, "ch2", plus)
    assert not broken.ok and abs(broken.r1 - 0.5) < 1e-12 and abs(broken.r2 - 0.5) < 1e-12


def test_complement_discriminates_the_other_way(cnot, fam, p0):
    assert check_discrimination(cnot, fam, "ch1", p0).complement_discriminates


def test_branch_probability_over_grid(disc):
    res = verify_theorem1(disc)
    assert res.passed and res.max_residual <= 1e-9


def test_branch_probability_worked_values(disc):
    fam = disc.fam
    for w, want in ((Weights(0.36, 0.64), 0.36), (Weights(1, 0), 1.0)):
        for ph in np.linspace(0, 2 * np.pi, 5):
            x = member(fam.with_weights(w), ph)
            assert abs(m_coincidence(disc.model, {"ch2": disc.discriminating["ch2"]}, x) - want) < 1e-12
    half = fam.with_weights(Weights(0.5, 0.5)).mixture()
    assert abs(m_coincidence(disc.model, {"ch1": disc.discriminating["ch1"]}, half) - 0.5) < 1e-12


def test_object_readings_ignore_phase(disc, plus, p0):
    res = verify_theorem2(disc, [{"ch1": plus}, {"ch1": p0}, {"ch1": Effect.identity(2)}])
    assert res.passed
    for ph in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        x = member(disc.fam, ph)
        assert abs(m_coincidence(disc.model, {"ch1": plus}, x) - 0.5) < 1e-12
        assert abs(m_coincidence(disc.model, {"ch1": p0}, x) - 0.36) < 1e-12


def test_phase_blindness_needs_an_excluded_channel(disc, p0):
    with pytest.raises(PreconditionError):
        verify_theorem2(disc, [{"ch1": p0, "ch2": p0}])


def test_channels_agree_for_two_and_three_copies(disc, disc3):
    for sc in (disc, disc3):
        res = verify_theorem3(sc, tolerance=1e-9, spread_tolerance=3e-9)
        assert res.passed
        assert res.components["disagreement"] <= 1e-9


def test_agreement_worked_values(disc, phi, p0):
    assert abs(m_coincidence(disc.model, {"ch1": p0, "ch2": complement(p0)}, phi)) < 1e-12
    assert abs(m_coincidence(disc.model, {"ch1": p0, "ch2": p0}, phi) - 0.36) < 1e-12


def test_agreement_fails_for_broken_reading(cnot, fam, p0, plus):
    broken = DiscriminationScenario(cnot, fam, {"ch1": p0, "ch2": plus})
    assert not broken.premises_hold()
    res = verify_theorem3(broken)
    assert not res.passed and abs(res.max_residual - 0.5) < 1e-9


def test_agreement_needs_two_channels(cnot, fam, p0):
    with pytest.raises(PreconditionError):
        verify_theorem3(DiscriminationScenario(cnot, fam, {"ch1": p0}))


def test_sampler_statistics(disc, phi):
    records, summary = sample_trials(disc, phi, 100_000, 42)
    assert summary.disagreements == 0
    assert 0.355 <= summary.frequency_e1 <= 0.365
    assert len(records) == 100_000 and records[5].trial_index == 5


def test_sampler_is_deterministic(disc, phi):
    a = sample_trials(disc, phi, 1000, 7)[0]
    b = sample_trials(disc, phi, 1000, 7)[0]
    c = sample_trials(disc, phi, 1000, 8)[0]
    assert a == b and a != c


def test_sampler_on_second_state(disc):
    records, summary = sample_trials(disc, disc.fam.x2, 500, 1)
    assert all(set(r.outcomes.values()) == {0} for r in records)


def test_sampler_broken_scenario(cnot, fam, p0, plus, phi):
    broken = DiscriminationScenario(cnot, fam, {"ch1": p0, "ch2": plus})
    _, summary = sample_trials(broken, phi, 10_000, 3)
    assert summary.disagreements > 0
    assert abs(summary.disagreement_probability - 0.5) < 1e-12


def test_consistency_plus_plus_is_sensitive(disc, plus):
    rep = consistency_analysis(disc, {"ch1": plus, "ch2": plus})
    assert rep.sensitive and not rep.counterexample
    assert abs(rep.phase_min - 0.01) < 1e-8 and abs(rep.phase_max - 0.49) < 1e-8
    assert all(abs(v - 0.5) < 1e-12 for v in rep.off_diagonals.values())


def test_consistency_insensitive_cases(disc, plus, p0):
    rep = consistency_analysis(disc, {"ch1": plus, "ch2": p0})
    assert not rep.sensitive and rep.off_diagonals["ch2"] < 1e-12
    assert not consistency_analysis(disc, {}).sensitive


def test_factorize_rejects_entangled_effect(cnot):
    bell = np.zeros(4)
    bell[[0, 3]] = 1 / np.sqrt(2)
    with pytest.raises(UnsupportedAnalysisError):
        factorize(cnot, np.outer(bell, bell))


def _qutrit():
    model = MeasurementModel(3, DensityOperator.basis(0, 3), controlled_shift(3), ChannelLayout.per_factor((3, 3)))
    states = tuple(DensityOperator.basis(i, 3) for i in range(3))
    reads = tuple(Effect.projector(np.eye(3)[i]) for i in range(3))
    return MultiwayScenario(model, states, {"ch1": reads, "ch2": reads})


def test_multiway_filter_frequencies():
    sc = _qutrit()
    w = np.array([0.2, 0.3, 0.5])
    x = DensityOperator(np.diag(w).astype(complex))
    r = multiway_filter(sc, x, 100_000, 9)
    assert r.inconsistencies == 0
    assert np.all(np.abs(r.frequencies - w) <= 3 * r.sigma)


def test_multiway_filter_basis_state():
    r = multiway_filter(_qutrit(), DensityOperator.basis(2, 3), 1000, 0)
    assert np.all(r.indices == 2)


def test_multiway_filter_coherent_superposition():
    x = DensityOperator.pure(np.ones(3))
    r = multiway_filter(_qutrit(), x, 30_000, 4)
    assert r.inconsistencies == 0
    assert np.allclose(r.expected, 1 / 3)
    assert np.all(np.abs(r.frequencies - 1 / 3) <= 3 * r.sigma)


def test_multiway_filter_rejects_swapped_readings():
    sc = _qutrit()
    swapped = {"ch1": sc.readings["ch1"], "ch2": sc.readings["ch2"][::-1]}
    with pytest.raises(PreconditionError):
        multiway_filter(MultiwayScenario(sc.model, sc.states, swapped), DensityOperator.basis(0, 3), 10, 0)


def test_multiway_filter_rejects_noisy_readings():
    sc = _qutrit()
    noisy = tuple(Effect(0.98 * r.matrix + 0.01 * np.eye(3)) for r in sc.readings["ch2"])
    bad = MultiwayScenario(sc.model, sc.states, {"ch1": sc.readings["ch1"], "ch2": noisy})
    with pytest.raises(PreconditionError):
        multiway_filter(bad, DensityOperator.basis(0, 3), 1000, 0)
