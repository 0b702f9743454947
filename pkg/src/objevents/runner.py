"""Run the verification suites named in a scenario and assemble the report."""
from __future__ import annotations

import itertools
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import projector
from .measurement import (
    conditional_output_state,
    induced_effect,
    m_coincidence,
    output_state,
    verify_axioms,
)
from .quantum import DensityOperator, Effect, Weights, probability, random_effect_matrix, random_state_matrix
from .scenario import SUITES, BuiltScenario
from .superposition import check_eq15, is_member, member
from .theorems import (
    SuiteResult,
    consistency_analysis,
    multiway_filter,
    sample_trials,
    verify_theorem1,
    verify_theorem2,
    verify_theorem3,
)

log = logging.getLogger(__name__)


@dataclass
class VerificationReport:
    scenario: str
    seed: int
    tolerances: dict
    suites: list[SuiteResult]
    wall_time: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    @property
    def failing(self) -> list[str]:
        return [s.name for s in self.suites if not s.passed]

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "seed": self.seed,
            "passed": self.passed,
            "failing": self.failing,
            "tolerances": self.tolerances,
            "suites": [_suite_dict(s) for s in self.suites],
        }
        out.update(self.extra)
        if self.wall_time is not None:
            out["wall_time"] = self.wall_time
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_text(self) -> str:
        rows = [("suite", "status", "max residual", "tolerance", "samples")]
        for s in self.suites:
            rows.append((s.name, _status(s), f"{s.max_residual:.3e}", f"{s.tolerance:.1e}", str(s.samples)))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = [f"scenario {self.scenario}  seed {self.seed}"]
        for k, r in enumerate(rows):
            lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        for s in self.suites:
            if s.notice:
                lines.append(f"  {s.name}: {s.notice}")
        lines.append("PASS" if self.passed else f"FAIL: {', '.join(self.failing)}")
        return "\n".join(lines) + "\n"


def _status(s: SuiteResult) -> str:
    if s.components.get("skipped"):
        return "skip"
    return "pass" if s.passed else "fail"


def _suite_dict(s: SuiteResult) -> dict:
    return {
        "name": s.name,
        "status": _status(s),
        "passed": s.passed,
        "max_residual": s.max_residual,
        "tolerance": s.tolerance,
        "samples": s.samples,
        "worst": s.worst,
        "components": {k: v for k, v in s.components.items() if k != "skipped"},
        "notice": s.notice,
    }


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def _skip(name: str, why: str) -> SuiteResult:
    return SuiteResult(name, True, 0.0, 0.0, 0, {}, {"skipped": True}, f"skipped: {why}")


def effect_dictionary(d: int) -> list[tuple[str, np.ndarray]]:
    """Twelve effects built on the first two basis levels, for exhaustive sweeps."""
    e0, e1 = np.eye(d)[0], np.eye(d)[1]
    pr = {
        "0": projector(e0),
        "1": projector(e1),
        "+": projector(e0 + e1),
        "-": projector(e0 - e1),
        "+i": projector(e0 + 1j * e1),
        "-i": projector(e0 - 1j * e1),
    }
    eye = np.eye(d, dtype=complex)
    return [
        ("zero", np.zeros((d, d), dtype=complex)),
        ("I", eye),
        ("I/2", eye / 2),
        *[(k, v) for k, v in pr.items()],
        ("0.5(0++i)", 0.5 * (pr["0"] + pr["+i"])),
        ("0.3*0+0.7*+", 0.3 * pr["0"] + 0.7 * pr["+"]),
        ("I/4+-/2", eye / 4 + pr["-"] / 2),
    ]


# ---------------------------------------------------------------- suites


def _suite_axioms(b: BuiltScenario, rng) -> SuiteResult:
    seed = int(rng.integers(2**63))
    rep = verify_axioms(b.model, b.spec.samples, seed)
    comps = {k: c.max_residual for k, c in rep.checks.items()}
    tol = b.tol.prob
    ok = all(v <= tol for k, v in comps.items() if k != "joint_bound") and comps["joint_bound"] <= b.tol.psd
    worst_key = max(comps, key=lambda k: comps[k])
    worst = {"axiom": worst_key, **rep.checks[worst_key].worst}
    return SuiteResult("axioms", ok, max(comps.values()), tol, b.spec.samples, worst, comps, f"joint_bound tolerance {b.tol.psd:g}")


def _suite_discrimination(b: BuiltScenario, rng) -> SuiteResult:
    sc = b.discrimination
    if sc is None or not sc.discriminating:
        return _skip("discrimination", "no discriminated family or readings in scenario")
    checks = sc.premises()
    worst_ch = max(checks, key=lambda n: max(checks[n].r1, checks[n].r2))
    res = max(max(c.r1, c.r2) for c in checks.values())
    comps = {f"{n}.r1": c.r1 for n, c in checks.items()} | {f"{n}.r2": c.r2 for n, c in checks.items()}
    ok = all(c.ok for c in checks.values())
    return SuiteResult("discrimination", ok, res, b.tol.disc, len(checks), {"channel": worst_ch}, comps)


def _premise_gate(b: BuiltScenario, name: str, min_channels: int = 1):
    sc = b.discrimination
    if sc is None or len(sc.discriminating) < min_channels:
        return _skip(name, f"needs at least {min_channels} discriminating reading(s)")
    return None


def _suite_theorem1(b, rng):
    return _premise_gate(b, "theorem1") or verify_theorem1(b.discrimination, b.spec.phase_grid(), b.spec.weight_grid())


def _suite_theorem2(b, rng):
    gate = _premise_gate(b, "theorem2")
    if gate:
        return gate
    sc = b.discrimination
    cl = b.model.channel_layout
    disc = sc.channels
    sets = []
    for k in range(100):
        excluded = disc[k % len(disc)]
        others = [n for n in cl.names if n != excluded]
        if not others:
            continue
        chosen = [n for n in others if rng.uniform() < 0.7] or [others[int(rng.integers(len(others)))]]
        sets.append({n: Effect(random_effect_matrix(cl.dim(n), rng), b.tol) for n in chosen})
    if not sets:
        return _skip("theorem2", "no channel other than the discriminating one")
    return verify_theorem2(sc, sets, b.spec.phase_grid(), b.spec.weight_grid())


def _suite_theorem3(b, rng):
    return _premise_gate(b, "theorem3", 2) or verify_theorem3(
        b.discrimination, b.spec.phase_grid(), b.spec.weight_grid()
    )


def _suite_induced(b: BuiltScenario, rng) -> SuiteResult:
    model, cl = b.model, b.model.channel_layout
    worst, best = {}, 0.0
    n = 0
    for k in range(20):
        chosen = [c for c in cl.names if rng.uniform() < 0.6]
        reads = {c: Effect(random_effect_matrix(cl.dim(c), rng), b.tol) for c in chosen}
        f = induced_effect(model, reads)
        for j in range(50):
            x = DensityOperator(random_state_matrix(model.object_dim, rng), b.tol)
            r = abs(probability(f, x) - m_coincidence(model, reads, x))
            n += 1
            if r > best or not worst:
                best = max(best, r)
                worst = {"reading_set": k, "state": j, "channels": chosen}
    return SuiteResult("induced", best <= b.tol.prob, best, b.tol.prob, n, worst, {"induced_effect": best})


def _suite_output(b: BuiltScenario, rng) -> SuiteResult:
    model, cl = b.model, b.model.channel_layout
    comps = {"marginal_output": 0.0, "conditional_output": 0.0}
    worst: dict = {}
    best = 0.0
    n = 0
    for k in range(20):
        x = DensityOperator(random_state_matrix(model.object_dim, rng), b.tol)
        nu = cl.names[int(rng.integers(len(cl.names)))]
        a_nu = Effect(random_effect_matrix(cl.dim(nu), rng), b.tol)
        r_marg = abs(probability(a_nu, output_state(model, nu, x)) - m_coincidence(model, {nu: a_nu}, x))
        comps["marginal_output"] = max(comps["marginal_output"], r_marg)
        n += 1
        if r_marg > best or not worst:
            best, worst = max(best, r_marg), {"component": "marginal_output", "sample": k, "channel": nu}
        others = [c for c in cl.names if c != nu]
        if not others:
            continue
        mu = others[int(rng.integers(len(others)))]
        a_mu = Effect(random_effect_matrix(cl.dim(mu), rng), b.tol)
        sel = m_coincidence(model, {mu: a_mu}, x)
        if sel <= b.tol.sel:
            continue
        cond = conditional_output_state(model, nu, mu, a_mu, x)
        r_cond = abs(probability(a_nu, cond) - m_coincidence(model, {nu: a_nu, mu: a_mu}, x) / sel)
        comps["conditional_output"] = max(comps["conditional_output"], r_cond)
        n += 1
        if r_cond > best:
            best, worst = r_cond, {"component": "conditional_output", "sample": k, "channel": nu, "selection": mu}
    return SuiteResult("output", best <= b.tol.prob, best, b.tol.prob, n, worst, comps)


def _suite_membership(b: BuiltScenario, rng) -> SuiteResult:
    sc = b.discrimination
    if sc is None:
        return _skip("membership", "no discriminated family in scenario")
    fam = sc.fam
    tol = b.tol.member + b.tol.prob
    rejected = 0
    best, worst, n = 0.0, {}, 0
    for w in b.spec.weight_grid():
        fw = fam.with_weights(w)
        cands = [("mixture", fw.mixture())] + [(float(ph), member(fw, ph)) for ph in b.spec.phase_grid()]
        for label, x in cands:
            ok, _ = is_member(x, fw)
            rep = check_eq15(x, fw, 200, int(rng.integers(2**63)))
            n += 1
            r = rep.max_residual if ok else max(1.0, rep.max_residual)
            rejected += not ok
            if r > best or not worst:
                best, worst = max(best, r), {"weights": [w.c1_sq, w.c2_sq], "phase": label, "member": ok}
    half = fam.with_weights(Weights(0.5, 0.5))
    negative_ok = not is_member(fam.x1, half)[0]
    neg = check_eq15(fam.x1, half, 200, int(rng.integers(2**63)))
    passed = rejected == 0 and best <= tol and negative_ok
    res = best if negative_ok else max(best, 1.0)
    comps = {"projection": best, "members_rejected": rejected, "negative_control_residual": neg.max_residual}
    return SuiteResult("membership", passed, res, tol, n, worst, comps,
                       "negative control x1 at weights (0.5, 0.5) " + ("rejected" if negative_ok else "ACCEPTED"))


def _suite_consistency(b: BuiltScenario, rng) -> SuiteResult:
    sc = b.discrimination
    if sc is None or not sc.discriminating:
        return _skip("consistency", "no discriminating readings in scenario")
    cl = b.model.channel_layout
    names = cl.names
    dicts = [effect_dictionary(cl.dim(n)) if cl.dim(n) >= 2 else [("I", np.eye(1))] for n in names]
    counter, sensitive, n = 0, 0, 0
    worst: dict = {}
    for combo in itertools.product(*dicts):
        reads = {nm: Effect(m, b.tol) for nm, (_, m) in zip(names, combo)}
        rep = consistency_analysis(sc, reads, b.spec.phase_grid())
        n += 1
        sensitive += rep.sensitive
        if rep.counterexample:
            counter += 1
            if not worst:
                worst = {"effects": {nm: lab for nm, (lab, _) in zip(names, combo)}}
    return SuiteResult(
        "consistency", counter == 0, float(counter), 0.0, n, worst,
        {"counterexamples": counter, "sensitive": sensitive},
        f"{sensitive} of {n} product effects interference-sensitive",
    )


def _sample_state(b: BuiltScenario) -> DensityOperator:
    fam = b.discrimination.fam.with_weights(Weights(*b.spec.sample_weights))
    return member(fam, b.spec.sample_phase)


def _suite_sampling(b: BuiltScenario, rng, trials: int | None = None, seed: int | None = None):
    gate = _premise_gate(b, "sampling")
    if gate:
        return gate, None
    n = b.spec.trials if trials is None else trials
    seed = b.spec.seed if seed is None else seed
    x = _sample_state(b)
    records, summary = sample_trials(b.discrimination, x, n, seed)
    dis_freq = summary.disagreements / n if n else 0.0
    dev = abs(summary.frequency_e1 - summary.predicted[summary.channels[0]])
    excess = max(0.0, dev - 3 * summary.sigma)
    res = max(dis_freq, excess)
    comps = {
        "disagreement_frequency": dis_freq,
        "frequency_e1": summary.frequency_e1,
        "predicted": summary.predicted[summary.channels[0]],
        "sigma": summary.sigma,
        "excess_beyond_3sigma": excess,
    }
    notice = f"{summary.disagreements} disagreeing trials of {n}"
    return SuiteResult("sampling", res <= 0.0, res, 0.0, n, {"seed": seed}, comps, notice), (records, summary)


def _suite_multiway(b: BuiltScenario, rng, trials: int | None = None, seed: int | None = None) -> SuiteResult:
    if b.multiway is None:
        return _skip("multiway", "no multiway family in scenario")
    n = b.spec.trials if trials is None else trials
    seed = b.spec.seed if seed is None else seed
    x = DensityOperator(sum(w * s.matrix for w, s in zip(b.filter_weights, b.multiway.states)), b.tol)
    r = multiway_filter(b.multiway, x, n, seed, strict=False)
    excess = float(np.max(np.clip(np.abs(r.frequencies - r.expected) - 3 * r.sigma, 0, None)))
    bad = r.inconsistencies / n if n else 0.0
    res = max(bad, excess)
    comps = {
        "inconsistencies": r.inconsistencies,
        "frequencies": r.frequencies.tolist(),
        "expected": r.expected.tolist(),
        "excess_beyond_3sigma": excess,
    }
    return SuiteResult("multiway", res <= 0.0, res, 0.0, n, {"seed": seed}, comps)


_RUNNERS = {
    "axioms": _suite_axioms,
    "discrimination": _suite_discrimination,
    "theorem1": _suite_theorem1,
    "theorem2": _suite_theorem2,
    "theorem3": _suite_theorem3,
    "induced": _suite_induced,
    "output": _suite_output,
    "membership": _suite_membership,
    "consistency": _suite_consistency,
    "sampling": lambda b, rng: _suite_sampling(b, rng)[0],
    "multiway": _suite_multiway,
}
assert set(_RUNNERS) == set(SUITES)


def run(built: BuiltScenario, seed: int | None = None, suites=None, timing: bool = False) -> VerificationReport:
    """Run each requested suite once, in scenario order, with a per-suite seeded stream."""
    seed = built.spec.seed if seed is None else seed
    names = list(suites if suites is not None else built.spec.suites)
    if built.spec.seed != seed:
        built = _reseeded(built, seed)
    t0 = time.perf_counter()
    results = []
    for name in dict.fromkeys(names):
        rng = np.random.default_rng([seed, SUITES.index(name)])
        res = _RUNNERS[name](built, rng)
        log.info("%s: %s (max residual %.3e)", name, _status(res), res.max_residual)
        results.append(res)
    report = VerificationReport(built.spec.name, seed, built.tol.as_dict(), results)
    if timing:
        report.wall_time = time.perf_counter() - t0
    return report


def run_sampling(built: BuiltScenario, trials: int, seed: int | None = None):
    """The sampling suite alone, returning the report and the trial records."""
    seed = built.spec.seed if seed is None else seed
    rng = np.random.default_rng([seed, SUITES.index("sampling")])
    if built.multiway is not None and built.discrimination is None:
        res = _suite_multiway(built, rng, trials, seed)
        return VerificationReport(built.spec.name, seed, built.tol.as_dict(), [res]), None
    res, out = _suite_sampling(built, rng, trials, seed)
    report = VerificationReport(built.spec.name, seed, built.tol.as_dict(), [res])
    if out is not None:
        summary = out[1]
        report.extra["summary"] = {
            "n_trials": summary.n_trials,
            "channels": summary.channels,
            "disagreements": summary.disagreements,
            "frequency_e1": summary.frequency_e1,
            "channel_frequencies": summary.channel_frequencies,
            "predicted": summary.predicted,
            "sigma": summary.sigma,
            "disagreement_probability": summary.disagreement_probability,
        }
    return report, out


def _reseeded(built: BuiltScenario, seed: int) -> BuiltScenario:
    return replace(built, spec=replace(built.spec, seed=seed))
