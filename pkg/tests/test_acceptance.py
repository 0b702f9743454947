"""End-to-end acceptance checks at their stated tolerances.

Each test prints a single PASS/FAIL line (visible even under output capture)
before asserting, so the run log doubles as a checklist.
"""
import itertools
import json
import time

import numpy as np
import pytest

from objevents.cli import main
from objevents.measurement import (
    conditional_output_state,
    induced_effect,
    m_coincidence,
    output_state,
    random_model,
    verify_axioms,
)
from objevents.quantum import DensityOperator, Effect, Weights, probability, random_effect_matrix, random_state
from objevents.runner import effect_dictionary
from objevents.scenario import load_scenario
from objevents.superposition import check_eq15, coherent, is_member
from objevents.theorems import (
    check_discrimination,
    consistency_analysis,
    multiway_filter,
    sample_trials,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)

W = Weights(0.36, 0.64)


@pytest.fixture
def verdict(capsys):
    def emit(label: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        assert ok, f"{label}: {detail}"

    return emit


def _built(name):
    return load_scenario(name)[0].build()


def test_axioms_on_random_dilations(verdict):
    rng = np.random.default_rng(2024)
    worst: dict[str, float] = {}
    t0 = time.perf_counter()
    for _ in range(200):
        d = int(rng.integers(2, 5))
        probes = [int(rng.integers(2, 4)) for _ in range(int(rng.integers(1, 4)))]
        model = random_model(d, probes, rng)
        rep = verify_axioms(model, 50, int(rng.integers(2**32)))
        for name, check in rep.checks.items():
            worst[name] = max(worst.get(name, 0.0), check.max_residual)
    elapsed = time.perf_counter() - t0
    bound = max(v for k, v in worst.items() if k != "joint_bound")
    ok = bound <= 1e-8 and worst["joint_bound"] <= 1e-9 and elapsed <= 60
    verdict(
        "axiom suite, 200 random models x 50 tuples",
        ok,
        f"max residual {bound:.2e} (<=1e-8), joint bound {worst['joint_bound']:.2e} (<=1e-9), {elapsed:.1f}s (<=60s)",
    )


def test_branch_probability_on_copy_model(verdict):
    b = _built("cnot2")
    res = verify_theorem1(b.discrimination, b.spec.phase_grid(), b.spec.weight_grid(), tolerance=1e-9)
    fam = b.discrimination.fam.with_weights(W)
    worked = max(
        abs(m_coincidence(b.model, {"ch2": b.discrimination.discriminating["ch2"]}, coherent(fam, ph)) - 0.36)
        for ph in b.spec.phase_grid()
    )
    assert len(b.spec.phase_grid()) == 8
    verdict(
        "discriminating-channel probability equals |c1|^2",
        res.passed and worked <= 1e-9,
        f"max residual {res.max_residual:.2e} over {res.samples} states, w=(0.36,0.64) deviation {worked:.2e} (<=1e-9)",
    )


def test_interference_blindness_without_discriminating_channel(verdict):
    b = _built("cnot2")
    rng = np.random.default_rng(7)
    sets = [{"ch1": Effect(random_effect_matrix(2, rng))} for _ in range(100)]
    res = verify_theorem2(b.discrimination, sets, b.spec.phase_grid(), b.spec.weight_grid(), tolerance=1e-8)
    plus = Effect.projector([1, 1])
    fam = b.discrimination.fam.with_weights(W)
    plus_dev = max(abs(m_coincidence(b.model, {"ch1": plus}, coherent(fam, ph)) - 0.5) for ph in b.spec.phase_grid())
    verdict(
        "observations excluding a discriminating channel ignore the phase",
        res.passed and plus_dev <= 1e-8,
        f"joint {res.components['joint']:.2e}, single {res.components['single']:.2e} (<=1e-8); "
        f"|+><+| deviation from 0.5 {plus_dev:.2e}",
    )


def test_discriminating_channels_agree(verdict):
    lines = []
    ok = True
    for name in ("cnot2", "cnot3"):
        b = _built(name)
        res = verify_theorem3(b.discrimination, b.spec.phase_grid(), b.spec.weight_grid(), 1e-9, 3e-9)
        ok &= res.passed
        lines.append(
            f"{name}: disagreement {res.components['disagreement']:.2e} (<=1e-9), "
            f"spread {res.components['channel_spread']:.2e} (<=3e-9)"
        )
    verdict("pairwise agreement of discriminating channels", ok, "; ".join(lines))


def test_sampler_objective_events(verdict, tmp_path, capsys):
    outs = []
    for k in range(2):
        dest = tmp_path / f"run{k}.json"
        code = main(["sample", "cnot2", "--trials", "100000", "--seed", "42", "--output", str(dest)])
        outs.append((code, dest.read_bytes()))
    capsys.readouterr()
    report = json.loads(outs[0][1])
    s = report["summary"]
    sigma = np.sqrt(0.36 * 0.64 / 1e5)
    dev = abs(s["frequency_e1"] - 0.36)
    ok = outs[0][0] == 0 and s["disagreements"] == 0 and dev <= 3 * sigma and outs[0][1] == outs[1][1]
    verdict(
        "sampled trials on cnot2, seed 42",
        ok,
        f"{s['disagreements']} disagreements, e=1 frequency {s['frequency_e1']:.5f} "
        f"(|dev| {dev:.5f} <= 3 sigma {3 * sigma:.5f}), repeat run byte-identical: {outs[0][1] == outs[1][1]}",
    )


def test_negative_control_is_caught(verdict):
    b = _built("cnot2-broken")
    sc = b.discrimination
    chk = check_discrimination(b.model, sc.fam, "ch2", sc.discriminating["ch2"])
    _, summary = sample_trials(sc, coherent(sc.fam.with_weights(W), 0.0), 100_000, 42)
    freq = summary.disagreements / summary.n_trials
    sigma = np.sqrt(0.25 / summary.n_trials)
    ok = (not chk.ok) and abs(chk.r1 - 0.5) <= 1e-9 and abs(chk.r2 - 0.5) <= 1e-9 and abs(freq - 0.5) <= 3 * sigma
    verdict(
        "corrupted reading fails discrimination and disagrees",
        ok,
        f"residuals r1={chk.r1:.3f}, r2={chk.r2:.3f}; disagreement frequency {freq:.4f} (0.5 +- {3 * sigma:.4f})",
    )


def test_induced_effect_matches_coincidences(verdict):
    b = _built("cnot2")
    rng = np.random.default_rng(11)
    worst = 0.0
    valid = True
    for _ in range(20):
        reads = {n: Effect(random_effect_matrix(2, rng)) for n in b.model.channels if rng.uniform() < 0.8}
        f = induced_effect(b.model, reads)
        valid &= isinstance(f, Effect)
        for _ in range(50):
            x = random_state(2, rng)
            worst = max(worst, abs(probability(f, x) - m_coincidence(b.model, reads, x)))
    verdict("induced object effect", valid and worst <= 1e-8, f"max |(F,X) - m| {worst:.2e} over 1000 pairs (<=1e-8)")


def test_output_states(verdict):
    b = _built("cnot2")
    x = coherent(b.discrimination.fam.with_weights(W), 0.0)
    y = output_state(b.model, "ch1", x).matrix
    yc = conditional_output_state(b.model, "ch1", "ch2", Effect.projector([0, 1]), x).matrix
    d1 = np.linalg.norm(y - np.diag([0.36, 0.64]))
    d2 = np.linalg.norm(yc - np.diag([0.0, 1.0]))
    verdict(
        "object output states",
        d1 <= 1e-9 and d2 <= 1e-9,
        f"unconditional distance {d1:.2e}, conditioned on ch2=|1><1| distance {d2:.2e} (<=1e-9)",
    )


def test_consistency_sweep(verdict):
    b = _built("cnot2")
    sc = b.discrimination
    dictionary = effect_dictionary(2)
    assert len(dictionary) == 12
    counter = sensitive = 0
    for (_, a), (_, c) in itertools.product(dictionary, repeat=2):
        rep = consistency_analysis(sc, {"ch1": Effect(a), "ch2": Effect(c)}, b.spec.phase_grid(), W)
        counter += rep.counterexample
        sensitive += rep.sensitive
    plus = Effect.projector([1, 1])
    pp = consistency_analysis(sc, {"ch1": plus, "ch2": plus}, np.linspace(0, 2 * np.pi, 8, endpoint=False), W)
    range_ok = pp.sensitive and abs(pp.phase_min - 0.01) <= 1e-8 and abs(pp.phase_max - 0.49) <= 1e-8
    verdict(
        "sensitive product effects read every discriminating channel",
        counter == 0 and range_ok,
        f"{counter} counterexamples in 144 effects ({sensitive} sensitive); "
        f"|++><++| range [{pp.phase_min:.6f}, {pp.phase_max:.6f}]",
    )


def test_multiway_filter(verdict):
    b = _built("qutrit3")
    w = np.array([0.2, 0.3, 0.5])
    assert np.allclose(b.filter_weights, w)
    x = DensityOperator(sum(wi * s.matrix for wi, s in zip(w, b.multiway.states)))
    r = multiway_filter(b.multiway, x, 100_000, 42, strict=False)
    within = np.all(np.abs(r.frequencies - w) <= 3 * r.sigma)
    verdict(
        "three-way filter on qutrit copy model",
        bool(within) and r.inconsistencies == 0,
        f"frequencies {np.round(r.frequencies, 4).tolist()} vs {w.tolist()} (3 sigma), "
        f"{r.inconsistencies} inconsistencies",
    )


def test_superposition_membership(verdict):
    b = _built("cnot2")
    fam = b.discrimination.fam
    accepted = 0
    total = 0
    worst = 0.0
    for i, w in enumerate(b.spec.weight_grid()):
        fw = fam.with_weights(w)
        for x in [fw.mixture()] + [coherent(fw, ph) for ph in b.spec.phase_grid()]:
            total += 1
            accepted += is_member(x, fw)[0]
            worst = max(worst, check_eq15(x, fw, 100, i).max_residual)
    rejected = not is_member(fam.x1, fam.with_weights(Weights(0.5, 0.5)))[0]
    verdict(
        "superposition family membership",
        accepted == total and rejected and worst <= 1e-8,
        f"{accepted}/{total} members accepted, X1 at (0.5,0.5) rejected: {rejected}, "
        f"projection residual {worst:.2e} over 200 effects each (<=1e-8)",
    )
