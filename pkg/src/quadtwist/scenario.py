"""
Scenario presets and the INI-style scenario file format.

A scenario file has one section per configuration object::

    [scenario]
    preset = variation          # optional base, explicit keys override it
    payload_mass = 0.8
    inertia_inflation = mass_ratio
    delta_I = 0 0.0044 -0.0077; 0.0044 0 0.0115; -0.0077 0.0115 0

    [quad]
    I = 8.85e-3 15.5e-3 23.09e-3

    [sliding]
    mu = 0.25

    [sim]
    t_end = 5

    [schedule]
    steps = 0.5 phi -10; 1.0 theta 10; 2.0 psi 45   # seconds, axis, degrees

    [disturbance]
    kind = constant_bias
    magnitude = 0.5

Per-axis values are whitespace separated (a single value is broadcast);
matrices and schedules use ``;`` between rows and ``#`` starts a comment.
Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .controllers import SlidingConfig
from .dynamics import QuadParams
from .errors import ParseError, QuadTwistError, UnknownPreset, ValidationError
from .sim import AXES, DisturbanceSource, ReferenceSchedule, RunLog, SimConfig, StepEvent, run_closed_loop

SCENARIO_NAMES = ("nominal", "disturbance", "variation", "custom")
PAYLOAD_MAX = 0.8
DELTA_I_VARIATION = (
    (0.0, 0.0044, -0.0077),
    (0.0044, 0.0, 0.0115),
    (-0.0077, 0.0115, 0.0),
)
ZERO3x3 = ((0.0,) * 3,) * 3
NOMINAL_STEPS = ((0.5, "phi", -10.0), (1.0, "theta", 10.0), (2.0, "psi", 45.0))

DEFAULT_SIM = SimConfig()


@dataclass(frozen=True)
class ScenarioSpec:
    """Declarative description of one closed-loop experiment.

    ``steps`` holds ``(time_s, axis_name, angle_deg)``; degrees are kept here
    so a file round-trips exactly. ``inertia_inflation`` scales the nominal
    inertia of the plant before ``delta_I`` is added; ``"mass_ratio"`` means
    ``(m + payload_mass) / m``.
    """

    name: str = "custom"
    quad: QuadParams = field(default_factory=QuadParams)
    sliding: SlidingConfig = field(default_factory=SlidingConfig)
    sim: SimConfig = DEFAULT_SIM
    steps: tuple = NOMINAL_STEPS
    disturbance_kind: str = "none"
    disturbance_magnitude: float = 0.0
    payload_mass: float = 0.0
    delta_I: tuple = ZERO3x3
    inertia_inflation: object = 1.0

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValidationError(f"scenario name must be one of {SCENARIO_NAMES}, got {self.name!r}")
        steps = tuple((float(t), _axis_name(a), float(deg)) for t, a, deg in self.steps)
        object.__setattr__(self, "steps", steps)
        dI = np.asarray(self.delta_I, dtype=float)
        if dI.shape != (3, 3):
            raise ValidationError("delta_I must be 3x3")
        if not np.array_equal(dI, dI.T):
            raise ValidationError("delta_I must be symmetric")
        object.__setattr__(self, "delta_I", tuple(tuple(float(v) for v in row) for row in dI))
        if not (0.0 <= self.payload_mass <= PAYLOAD_MAX + 1e-12):
            raise ValidationError(f"payload_mass must lie in [0, {PAYLOAD_MAX}] kg")
        if self.inertia_inflation != "mass_ratio":
            value = float(self.inertia_inflation)
            if not value > 0:
                raise ValidationError("inertia_inflation must be positive or 'mass_ratio'")
            object.__setattr__(self, "inertia_inflation", value)
        # build everything derived once so invalid combinations fail here
        self.schedule
        DisturbanceSource(self.disturbance_kind, self.disturbance_magnitude, self.sim.seed)
        self.plant_params()

    @property
    def schedule(self) -> ReferenceSchedule:
        return ReferenceSchedule(tuple(StepEvent(t, AXES.index(a), math.radians(deg)) for t, a, deg in self.steps))

    @property
    def inflation_factor(self) -> float:
        if self.inertia_inflation == "mass_ratio":
            return (self.quad.m + self.payload_mass) / self.quad.m
        return float(self.inertia_inflation)

    def plant_params(self) -> QuadParams:
        """The true vehicle: payload mass added, inertia inflated and perturbed."""
        inertia = self.inflation_factor * self.quad.inertia + np.array(self.delta_I)
        try:
            plant = self.quad.with_inertia(inertia)
        except ValidationError as exc:
            raise ValidationError(
                f"perturbed plant inertia is not physical ({exc}); eigenvalues "
                f"{np.round(np.linalg.eigvalsh(inertia), 6).tolist()}") from None
        return dataclasses.replace(plant, m=self.quad.m + self.payload_mass)

    def controller_params(self) -> QuadParams:
        """What the controller is told: the nominal vehicle."""
        return self.quad

    def disturbance(self) -> DisturbanceSource:
        return DisturbanceSource(self.disturbance_kind, self.disturbance_magnitude, self.sim.seed)

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, seed=seed))

    def config_hash(self) -> str:
        return hashlib.sha256(serialize(self).encode("utf-8")).hexdigest()


def _axis_name(axis) -> str:
    if isinstance(axis, (int, np.integer)):
        return AXES[int(axis)]
    name = str(axis).strip().lower()
    if name not in AXES:
        raise ValidationError(f"axis must be one of {AXES}, got {axis!r}")
    return name


def preset(name: str) -> ScenarioSpec:
    """Built-in scenarios reproducing the three Solo experiments."""
    if name == "nominal":
        return ScenarioSpec(name="nominal")
    if name == "disturbance":
        return ScenarioSpec(name="disturbance", disturbance_kind="constant_bias", disturbance_magnitude=0.5)
    if name == "variation":
        return ScenarioSpec(name="variation", payload_mass=PAYLOAD_MAX, delta_I=DELTA_I_VARIATION,
                            inertia_inflation="mass_ratio")
    raise UnknownPreset(f"unknown scenario preset {name!r} (expected nominal, disturbance or variation)")


PRESETS = ("nominal", "disturbance", "variation")


# -- serialization -----------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return "; ".join(" ".join(_fmt(x) for x in row) for row in v)
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def serialize(spec: ScenarioSpec) -> str:
    """Render ``spec`` as a complete scenario file (every key explicit)."""
    lines = ["[scenario]", f"name = {spec.name}", f"payload_mass = {_fmt(float(spec.payload_mass))}",
             f"inertia_inflation = {_fmt(spec.inertia_inflation)}", f"delta_I = {_fmt(spec.delta_I)}", ""]
    for section, obj in (("quad", spec.quad), ("sliding", spec.sliding), ("sim", spec.sim)):
        lines.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        lines.append("")
    lines += ["[schedule]", "steps = " + "; ".join(f"{_fmt(t)} {a} {_fmt(d)}" for t, a, d in spec.steps), ""]
    lines += ["[disturbance]", f"kind = {spec.disturbance_kind}",
              f"magnitude = {_fmt(float(spec.disturbance_magnitude))}", ""]
    return "\n".join(lines)


# -- parsing -----------------------------------------------------------------

def _floats(text: str, key: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split())
    except ValueError:
        raise ParseError(f"{key}: expected numbers, got {text!r}") from None


def _matrix(text: str, key: str) -> tuple:
    rows = [r for r in text.split(";") if r.strip()]
    if len(rows) == 1:
        vals = _floats(rows[0], key)
        if len(vals) == 3:
            return tuple(np.diag(vals).tolist())
        if len(vals) == 9:
            return tuple(tuple(vals[i:i + 3]) for i in range(0, 9, 3))
        raise ParseError(f"{key}: expected 3 or 9 values")
    parsed = tuple(_floats(r, key) for r in rows)
    if len(parsed) != 3 or any(len(r) != 3 for r in parsed):
        raise ParseError(f"{key}: expected three rows of three values")
    return parsed


def _scalar(text: str, key: str, kind=float):
    try:
        return kind(text.strip())
    except ValueError:
        raise ParseError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None


def _field_value(obj_cls, fname: str, text: str, key: str):
    default = next(f for f in dataclasses.fields(obj_cls) if f.name == fname)
    probe = default.default if default.default is not dataclasses.MISSING else default.default_factory()
    if fname == "I":
        return _matrix(text, key)
    if isinstance(probe, tuple):
        vals = _floats(text, key)
        if len(vals) not in (1, 3):
            raise ParseError(f"{key}: expected 1 or 3 values, got {len(vals)}")
        return vals[0] if len(vals) == 1 else vals
    if isinstance(probe, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(probe, int):
        return _scalar(text, key, int)
    if isinstance(probe, float):
        return _scalar(text, key, float)
    return text.strip()


def _steps(text: str) -> tuple:
    out = []
    for chunk in (c for c in text.split(";") if c.strip()):
        parts = chunk.split()
        if len(parts) != 3:
            raise ParseError(f"schedule step {chunk.strip()!r}: expected 'time axis degrees'")
        out.append((_scalar(parts[0], "steps"), parts[1], _scalar(parts[2], "steps")))
    return tuple(out)


_SECTIONS = {"scenario", "quad", "sliding", "sim", "schedule", "disturbance"}
_SCENARIO_KEYS = {"name", "preset", "payload_mass", "inertia_inflation", "delta_I"}


def parse_scenario(text: str, source: str = "<string>") -> ScenarioSpec:
    """Build a :class:`ScenarioSpec` from scenario-file text."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ParseError(f"{source}: {exc}") from None

    unknown = set(cp.sections()) - _SECTIONS
    if unknown:
        raise ParseError(f"{source}: unknown section(s) {sorted(unknown)}")

    def section(name, allowed):
        if not cp.has_section(name):
            return {}
        items = dict(cp.items(name))
        bad = set(items) - set(allowed)
        if bad:
            raise ParseError(f"{source}: unknown key(s) {sorted(bad)} in [{name}]")
        return items

    scen = section("scenario", _SCENARIO_KEYS)
    base = preset(scen["preset"].strip()) if "preset" in scen else ScenarioSpec()
    updates = {}
    if "name" in scen:
        updates["name"] = scen["name"].strip()
    elif "preset" in scen:
        updates["name"] = scen["preset"].strip()
    if "payload_mass" in scen:
        updates["payload_mass"] = _scalar(scen["payload_mass"], "payload_mass")
    if "inertia_inflation" in scen:
        raw = scen["inertia_inflation"].strip()
        updates["inertia_inflation"] = raw if raw == "mass_ratio" else _scalar(raw, "inertia_inflation")
    if "delta_I" in scen:
        updates["delta_I"] = _matrix(scen["delta_I"], "delta_I")

    for sec, cls, attr in (("quad", QuadParams, "quad"), ("sliding", SlidingConfig, "sliding"),
                           ("sim", SimConfig, "sim")):
        names = [f.name for f in dataclasses.fields(cls)]
        items = section(sec, names)
        if items:
            values = {k: _field_value(cls, k, v, f"[{sec}] {k}") for k, v in items.items()}
            updates[attr] = dataclasses.replace(getattr(base, attr), **values)

    sched = section("schedule", {"steps"})
    if "steps" in sched:
        updates["steps"] = _steps(sched["steps"])
    dist = section("disturbance", {"kind", "magnitude"})
    if "kind" in dist:
        updates["disturbance_kind"] = dist["kind"].strip()
    if "magnitude" in dist:
        updates["disturbance_magnitude"] = _scalar(dist["magnitude"], "magnitude")
    return dataclasses.replace(base, **updates)


def load_scenario(source: str) -> ScenarioSpec:
    """Preset name or path to a scenario file.

    Raises
    ------
    UnknownPreset
        ``source`` is neither a preset nor an existing file.
    ParseError, ValidationError
        The file is malformed or breaks an invariant.
    """
    if source in PRESETS:
        return preset(source)
    if not os.path.isfile(source):
        raise UnknownPreset(f"{source!r} is not a preset ({', '.join(PRESETS)}) or a readable file")
    with open(source, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_scenario(text, source)
    except QuadTwistError:
        raise
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{source}: {exc}") from None


def run_scenario(spec: ScenarioSpec, controller, *, seed: int | None = None) -> RunLog:
    """Run one controller on ``spec``; the plant is perturbed, the controller is not."""
    if seed is not None:
        spec = spec.with_seed(seed)
    log = run_closed_loop(controller, spec.plant_params(), spec.sliding, spec.sim, spec.schedule,
                          disturbance=spec.disturbance(), controller_params=spec.controller_params(),
                          scenario=spec.name)
    log.meta.update(scenario_hash=spec.config_hash(), seed=spec.sim.seed)
    return log
