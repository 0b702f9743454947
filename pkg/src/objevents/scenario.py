"""JSON scenario files: parsing, validation, serialisation and builtins.

A scenario names a measurement model (object dimension, probe factors, a
sequence of unitary stages, probe state, channel layout), optionally a
discriminated pair of states with the readings claimed to discriminate them,
optionally a multiway family, and the suites to run. Complex numbers are
written as ``[re, im]`` pairs; plain real numbers are accepted too.

State and effect specs are objects with exactly one of the keys ``basis``
(index), ``ket`` (vector, normalised on load), ``matrix`` (square matrix) or,
for effects only, ``identity``/``zero`` (``true``).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .linalg import DEFAULT_TOL, DimensionLayout, ToleranceConfig, embed, projector, unitarity_residual
from .measurement import ChannelLayout, MeasurementModel, controlled_shift, haar_unitary
from .quantum import DensityOperator, Effect, Weights, random_state_matrix
from .superposition import SuperpositionFamily
from .theorems import DEFAULT_WEIGHTS, DiscriminationScenario, MultiwayScenario

SUITES = (
    "axioms",
    "discrimination",
    "theorem1",
    "theorem2",
    "theorem3",
    "induced",
    "output",
    "membership",
    "consistency",
    "sampling",
    "multiway",
)

BUILTIN_UNITARIES = ("cnot", "qutrit-shift", "controlled-shift", "identity")


class ScenarioError(ValueError):
    """Scenario text that cannot be turned into a valid model.

    ``field`` is a dotted path into the document, ``line`` the 1-based line
    where the problem was located (when known).
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class ScenarioFile:
    name: str
    object_dim: int
    probe_dims: list
    unitary: list
    probe_state: dict
    channels: dict
    family: dict | None = None
    readings: dict = field(default_factory=dict)
    multiway: dict | None = None
    weights: list = field(default_factory=lambda: [[w.c1_sq, w.c2_sq] for w in DEFAULT_WEIGHTS])
    phases: int | list = 8
    sample_weights: list = field(default_factory=lambda: [0.36, 0.64])
    sample_phase: float = 0.0
    suites: list = field(default_factory=list)
    seed: int = 0
    trials: int = 10000
    samples: int = 50
    tolerances: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    # derived objects -------------------------------------------------

    def tolerance_config(self, scale: float = 1.0) -> ToleranceConfig:
        tol = DEFAULT_TOL.updated(**self.tolerances)
        return tol.scaled(scale) if scale != 1.0 else tol

    def phase_grid(self) -> tuple[float, ...]:
        if isinstance(self.phases, int):
            return tuple(2 * math.pi * k / self.phases for k in range(self.phases))
        return tuple(float(p) for p in self.phases)

    def weight_grid(self) -> tuple[Weights, ...]:
        return tuple(Weights(a, b) for a, b in self.weights)

    def build(self, tol: ToleranceConfig | None = None) -> "BuiltScenario":
        return _build(self, tol or self.tolerance_config(), text=None)


@dataclass
class BuiltScenario:
    spec: ScenarioFile
    tol: ToleranceConfig
    model: MeasurementModel
    discrimination: DiscriminationScenario | None
    multiway: MultiwayScenario | None
    filter_weights: np.ndarray | None


# ---------------------------------------------------------------- value decoding


def _complex(v, path):
    if isinstance(v, bool):
        raise ScenarioError("expected a number or [re, im] pair", path)
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in v):
        return complex(float(v[0]), float(v[1]))
    raise ScenarioError(f"expected a number or [re, im] pair, got {v!r}", path)


def _vector(v, path) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ScenarioError("expected a non-empty list of entries", path)
    return np.array([_complex(e, f"{path}[{i}]") for i, e in enumerate(v)])


def _matrix(v, path) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ScenarioError("expected a list of rows", path)
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(v)]
    if len({len(r) for r in rows}) != 1:
        raise ScenarioError("rows have different lengths", path)
    m = np.array(rows)
    if not np.all(np.isfinite(m)):
        raise ScenarioError("matrix has non-finite entries", path)
    return m


def encode_matrix(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _one_key(spec, path, allowed):
    if not isinstance(spec, dict):
        raise ScenarioError(f"expected an object with one of {allowed}", path)
    keys = [k for k in spec if k in allowed]
    if len(keys) != 1 or len(spec) != 1:
        raise ScenarioError(f"expected exactly one of {allowed}, got {sorted(spec)}", path)
    return keys[0]


def _operator(spec, dim, path, *, effect: bool) -> np.ndarray:
    allowed = ("basis", "ket", "matrix") + (("identity", "zero") if effect else ())
    key = _one_key(spec, path, allowed)
    val = spec[key]
    if key == "basis":
        if not isinstance(val, int) or isinstance(val, bool) or not 0 <= val < dim:
            raise ScenarioError(f"basis index must be an integer in [0, {dim})", f"{path}.basis")
        m = np.zeros((dim, dim), dtype=complex)
        m[val, val] = 1
        return m
    if key == "ket":
        v = _vector(val, f"{path}.ket")
        if len(v) != dim:
            raise ScenarioError(f"ket has {len(v)} entries, expected {dim}", f"{path}.ket")
        if np.linalg.norm(v) == 0:
            raise ScenarioError("ket is zero", f"{path}.ket")
        return projector(v)
    if key == "matrix":
        m = _matrix(val, f"{path}.matrix")
        if m.shape != (dim, dim):
            raise ScenarioError(f"matrix has shape {m.shape}, expected ({dim}, {dim})", f"{path}.matrix")
        return m
    if val is not True:
        raise ScenarioError(f"'{key}' must be true", f"{path}.{key}")
    return np.eye(dim, dtype=complex) if key == "identity" else np.zeros((dim, dim), dtype=complex)


def _state(spec, dim, path, tol) -> DensityOperator:
    m = _operator(spec, dim, path, effect=False)
    try:
        return DensityOperator(m, tol)
    except ValueError as e:
        raise ScenarioError(str(e), path) from None


def _effect(spec, dim, path, tol) -> Effect:
    m = _operator(spec, dim, path, effect=True)
    try:
        return Effect(m, tol)
    except ValueError as e:
        raise ScenarioError(str(e), path) from None


def _stage_matrix(stage, layout: DimensionLayout, path, tol) -> np.ndarray:
    if not isinstance(stage, dict):
        raise ScenarioError("unitary stage must be an object", path)
    extra = set(stage) - {"builtin", "matrix", "factors"}
    if extra:
        raise ScenarioError(f"unknown keys {sorted(extra)}", path)
    factors = stage.get("factors", list(range(len(layout))))
    if (
        not isinstance(factors, list)
        or not factors
        or not all(isinstance(i, int) and not isinstance(i, bool) for i in factors)
        or factors != sorted(set(factors))
        or not all(0 <= i < len(layout) for i in factors)
    ):
        raise ScenarioError("factors must be ascending distinct factor indices", f"{path}.factors")
    dims = [layout.factor_dims[i] for i in factors]
    d = int(np.prod(dims))
    if ("builtin" in stage) == ("matrix" in stage):
        raise ScenarioError("stage needs exactly one of 'builtin' or 'matrix'", path)
    if "builtin" in stage:
        name = stage["builtin"]
        if name == "identity":
            u = np.eye(d)
        elif name in ("cnot", "qutrit-shift", "controlled-shift"):
            want = {"cnot": 2, "qutrit-shift": 3}.get(name)
            if len(dims) != 2 or dims[0] != dims[1] or (want and dims[0] != want):
                raise ScenarioError(
                    f"builtin {name!r} needs two factors of equal dimension{f' {want}' if want else ''}, got {dims}",
                    f"{path}.builtin",
                )
            u = controlled_shift(dims[0])
        else:
            raise ScenarioError(f"unknown builtin unitary {name!r}; known: {list(BUILTIN_UNITARIES)}", f"{path}.builtin")
    else:
        u = _matrix(stage["matrix"], f"{path}.matrix")
        if u.shape != (d, d):
            raise ScenarioError(f"matrix has shape {u.shape}, factors {factors} need ({d}, {d})", f"{path}.matrix")
        r = unitarity_residual(u)
        if r > tol.recon:
            raise ScenarioError(f"matrix is not unitary: ||U U^dagger - I||_F = {r:.6g}", f"{path}.matrix")
    return embed(u, layout, factors)


def _weights(v, path) -> Weights:
    if not isinstance(v, list) or len(v) != 2:
        raise ScenarioError("weights must be a [c1_sq, c2_sq] pair", path)
    try:
        return Weights(float(v[0]), float(v[1]))
    except (TypeError, ValueError) as e:
        raise ScenarioError(str(e), path) from None


def _build(sf: ScenarioFile, tol: ToleranceConfig, text: str | None) -> BuiltScenario:
    if not isinstance(sf.object_dim, int) or sf.object_dim < 2:
        raise ScenarioError("object dimension must be an integer >= 2", "object_dim")
    if (
        not isinstance(sf.probe_dims, list)
        or not sf.probe_dims
        or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in sf.probe_dims)
    ):
        raise ScenarioError("probe_dims must be a non-empty list of positive integers", "probe_dims")
    layout = DimensionLayout((sf.object_dim, *sf.probe_dims))
    d_probe = int(np.prod(sf.probe_dims))

    stages = sf.unitary
    if not isinstance(stages, list) or not stages:
        raise ScenarioError("unitary must be a non-empty list of stages", "unitary")
    s = np.eye(layout.total, dtype=complex)
    for i, st in enumerate(stages):
        s = _stage_matrix(st, layout, f"unitary[{i}]", tol) @ s

    probe = _state(sf.probe_state, d_probe, "probe_state", tol)

    if not isinstance(sf.channels, dict) or not sf.channels:
        raise ScenarioError("channels must map names to factor index lists", "channels")
    try:
        cl = ChannelLayout(layout, {k: tuple(v) for k, v in sf.channels.items()})
    except (ValueError, TypeError) as e:
        raise ScenarioError(str(e), "channels") from None
    model = MeasurementModel(sf.object_dim, probe, s, cl, tol=tol)

    disc = None
    if sf.family is not None:
        if not isinstance(sf.family, dict) or set(sf.family) != {"x1", "x2"}:
            raise ScenarioError("family needs exactly the keys 'x1' and 'x2'", "family")
        x1 = _state(sf.family["x1"], sf.object_dim, "family.x1", tol)
        x2 = _state(sf.family["x2"], sf.object_dim, "family.x2", tol)
        try:
            fam = SuperpositionFamily(x1, x2, _weights(sf.sample_weights, "sample_weights").with_phase(sf.sample_phase))
        except ScenarioError:
            raise
        except ValueError as e:
            overlap = float(np.real(np.vdot(x1.matrix, x2.matrix)))
            raise ScenarioError(f"{e} (Tr[X1 X2] = {overlap:.6g})", "family") from None
        reads = {}
        for ch, spec in (sf.readings or {}).items():
            if ch not in cl.channels:
                raise ScenarioError(f"unknown channel {ch!r}", f"readings.{ch}")
            reads[ch] = _effect(spec, cl.dim(ch), f"readings.{ch}", tol)
        disc = DiscriminationScenario(model, fam, reads)
    elif sf.readings:
        raise ScenarioError("readings given without a family", "readings")

    multi = fw = None
    if sf.multiway is not None:
        mw = sf.multiway
        if not isinstance(mw, dict) or set(mw) - {"states", "readings", "weights"} or "states" not in mw:
            raise ScenarioError("multiway needs 'states', 'readings' and optional 'weights'", "multiway")
        states = tuple(_state(st, sf.object_dim, f"multiway.states[{i}]", tol) for i, st in enumerate(mw["states"]))
        for i in range(len(states)):
            for j in range(i):
                if np.real(np.vdot(states[i].matrix, states[j].matrix)) > tol.orth:
                    raise ScenarioError(f"states {j} and {i} are not orthogonal", "multiway.states")
        mreads = {}
        for ch, specs in mw.get("readings", {}).items():
            if ch not in cl.channels:
                raise ScenarioError(f"unknown channel {ch!r}", f"multiway.readings.{ch}")
            mreads[ch] = tuple(_effect(sp, cl.dim(ch), f"multiway.readings.{ch}[{i}]", tol) for i, sp in enumerate(specs))
            if len(mreads[ch]) != len(states):
                raise ScenarioError(f"{len(mreads[ch])} readings for {len(states)} states", f"multiway.readings.{ch}")
        multi = MultiwayScenario(model, states, mreads)
        fw = np.array(mw.get("weights", [1 / len(states)] * len(states)), dtype=float)
        if len(fw) != len(states) or np.any(fw < 0) or abs(fw.sum() - 1) > tol.trace:
            raise ScenarioError("weights must be a probability vector over the states", "multiway.weights")

    for i, w in enumerate(sf.weights):
        _weights(w, f"weights[{i}]")
    for s_name in sf.suites:
        if s_name not in SUITES:
            raise ScenarioError(f"unknown suite {s_name!r}; known: {list(SUITES)}", "suites")
    return BuiltScenario(sf, tol, model, disc, multi, fw)


# ---------------------------------------------------------------- parse / serialise


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


_INT_FIELDS = ("object_dim", "seed", "trials", "samples")


def from_dict(doc: dict) -> ScenarioFile:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    known = {f.name for f in fields(ScenarioFile)}
    unknown = set(doc) - known
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}", sorted(unknown)[0])
    for req in ("name", "object_dim", "probe_dims", "unitary", "probe_state", "channels"):
        if req not in doc:
            raise ScenarioError("required field missing", req)
    for k in _INT_FIELDS:
        if k in doc and (not isinstance(doc[k], int) or isinstance(doc[k], bool)):
            raise ScenarioError("expected an integer", k)
    doc = dict(doc)
    if isinstance(doc["unitary"], dict):
        doc["unitary"] = [doc["unitary"]]
    return ScenarioFile(**doc)


def parse_scenario(text: str, tol: ToleranceConfig | None = None) -> ScenarioFile:
    """Parse and validate scenario JSON; raises ScenarioError with a located diagnostic."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"syntax error: {e.msg} (column {e.colno})", line=e.lineno) from None
    try:
        sf = from_dict(doc)
        _build(sf, tol or sf.tolerance_config(), text)
    except ScenarioError as e:
        if e.line is None and e.field:
            top = e.field.split(".")[0].split("[")[0]
            leaf = e.field.split(".")[-1].split("[")[0]
            e = ScenarioError(str(e).split(": ", 1)[-1], e.field, _line_of(text, leaf) or _line_of(text, top))
        raise e from None
    except ValueError as e:
        raise ScenarioError(str(e)) from None
    return sf


def serialize_scenario(sf: ScenarioFile) -> str:
    return sf.to_json()


def builtin_names() -> list[str]:
    pkg = resources.files("objevents") / "scenarios"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def builtin_text(name: str) -> str:
    path = resources.files("objevents") / "scenarios" / f"{name}.json"
    if not path.is_file():
        raise ScenarioError(f"no builtin scenario {name!r}; known: {builtin_names()}")
    return path.read_text(encoding="utf-8")


def load_scenario(ref: str) -> tuple[ScenarioFile, str]:
    """Load from a file path, or from a builtin name when no such file exists."""
    p = Path(ref)
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    else:
        text = builtin_text(ref)
    return parse_scenario(text), text


def generate_random_scenario(object_dim: int, probe_dims, seed: int) -> ScenarioFile:
    """Haar-random S and random probe state, one channel per final factor, no family."""
    probe_dims = [int(d) for d in probe_dims]
    if object_dim < 2:
        raise ValueError("object_dim >= 2 required")
    if not probe_dims or any(d < 2 for d in probe_dims):
        raise ValueError("probe dimensions >= 2 required")
    rng = np.random.default_rng(seed)
    d_probe = int(np.prod(probe_dims))
    u = haar_unitary(object_dim * d_probe, rng)
    probe = random_state_matrix(d_probe, rng)
    n = 1 + len(probe_dims)
    return ScenarioFile(
        name=f"random-{object_dim}x{'x'.join(map(str, probe_dims))}-{seed}",
        object_dim=object_dim,
        probe_dims=probe_dims,
        unitary=[{"matrix": encode_matrix(u)}],
        probe_state={"matrix": encode_matrix(probe)},
        channels={f"ch{i + 1}": [i] for i in range(n)},
        suites=["axioms", "induced", "output", "discrimination", "theorem1", "theorem3"],
        seed=int(seed),
    )


__all__ = [
    "SUITES",
    "BuiltScenario",
    "ScenarioError",
    "ScenarioFile",
    "builtin_names",
    "builtin_text",
    "encode_matrix",
    "from_dict",
    "generate_random_scenario",
    "load_scenario",
    "parse_scenario",
    "serialize_scenario",
]
