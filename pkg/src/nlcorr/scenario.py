"""Declarative experiments: configs, presets, time series, locality audits and export."""

from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import hamfun, measure, qstate
from .dynamics import DetectionSchedule
from .errors import NumericalError, ValidationError

LOCALITY_TOL = 1e-9

VI_C = {
    "initial_state": "vi_c",
    "functional1": {"kind": "curie_weiss", "coeff": 8.0},
    "functional2": {"kind": "curie_weiss", "coeff": 0.5},
    "schedule": [3.5, 8.0],
    "axis1": "x",
    "axis2": "x",
    "observables": ["XX", "XI", "IX"],
    "t_max": 10.0,
    "dt": 1e-3,
    "sample_stride": 10,
    "algorithm": "open",
    "engine": "auto",
    "emit_branches": True,
}
PRESETS = {
    "vi_c": VI_C,
    "figure1": dict(VI_C, algorithm="open"),
    "figure2": dict(VI_C, algorithm="projection_standard"),
}
PARTICLE_FIELDS = {
    1: {"functional1", "A", "t1", "axis1"},
    2: {"functional2", "B", "t2", "axis2"},
}


def _schema():
    with resources.files("nlcorr").joinpath("data/config.schema.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


_VALIDATOR = jsonschema.Draft202012Validator(_schema())


def _complex(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)


def _matrix(rows) -> np.ndarray:
    return np.array([[_complex(x) for x in row] for row in rows], dtype=complex)


def _functional(spec):
    if spec["kind"] == "curie_weiss":
        return hamfun.curie_weiss(spec["coeff"])
    return hamfun.linear_functional(_matrix(spec["matrix"]))


def _observable(name: str, axis1, axis2) -> np.ndarray:
    ops = []
    for ch, axis in zip(name, (axis1, axis2)):
        ops.append(qstate.spin_operator(axis) if ch == "A" else qstate.PAULI[ch])
    return np.kron(*ops)


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description. Build it with :meth:`from_dict`."""

    data: dict = field(repr=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: list(e.absolute_path))
        if errors:
            msgs = []
            for e in errors:
                where = "/".join(str(p) for p in e.absolute_path) or "<root>"
                msgs.append(f"{where}: {e.message}")
            raise ValidationError("invalid config: " + "; ".join(msgs))
        raw = copy.deepcopy(raw)
        data = copy.deepcopy(PRESETS[raw.pop("preset", "vi_c")])
        data.update(raw)
        cfg = cls(data)
        cfg._check_semantics()
        return cfg

    @classmethod
    def preset(cls, name: str, **overrides) -> "ExperimentConfig":
        return cls.from_dict(dict(overrides, preset=name))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from None
        except OSError as exc:
            raise ValidationError(f"{path}: cannot read config ({exc.strerror})") from None
        return cls.from_dict(raw)

    def with_overrides(self, **fields) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(dict(self.to_dict(), **fields))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def _check_semantics(self):
        d = self.data
        t1, t2 = d["schedule"]
        if not (t1 <= d["t_max"] and t2 <= d["t_max"]):
            raise ValidationError(f"schedule: detection times {t1}, {t2} must not exceed t_max={d['t_max']}")
        if not isinstance(d["initial_state"], str):
            amps = np.array([_complex(x) for x in d["initial_state"]])
            if np.linalg.norm(amps) == 0:
                raise ValidationError("initial_state: amplitudes are all zero")
        for name in ("axis1", "axis2"):
            try:
                qstate.bloch_axis(d[name], normalize=True)
            except ValidationError as exc:
                raise ValidationError(f"{name}: {exc}") from None
        for name in ("functional1", "functional2"):
            try:
                _functional(d[name])
            except ValidationError as exc:
                raise ValidationError(f"{name}: {exc}") from None
        labels = [self._label(o) for o in d["observables"]]
        if len(set(labels)) != len(labels):
            raise ValidationError("observables: labels must be unique")
        for i, o in enumerate(d["observables"]):
            if isinstance(o, dict) and not qstate.is_hermitian(_matrix(o["matrix"])):
                raise ValidationError(f"observables/{i}/matrix: not Hermitian")

    @staticmethod
    def _label(o) -> str:
        return o if isinstance(o, str) else o["label"]

    # derived objects

    def psi0(self) -> np.ndarray:
        s = self.data["initial_state"]
        if s == "vi_c":
            return qstate.vi_c_state()
        if s == "singlet":
            return qstate.bell_singlet()
        return qstate.state_vector([_complex(x) for x in s])

    def functionals(self):
        return _functional(self.data["functional1"]), _functional(self.data["functional2"])

    def schedule(self) -> DetectionSchedule:
        return DetectionSchedule(*self.data["schedule"])

    def axes(self):
        return (qstate.bloch_axis(self.data["axis1"], normalize=True),
                qstate.bloch_axis(self.data["axis2"], normalize=True))

    def observables(self) -> list[tuple[str, np.ndarray]]:
        a1, a2 = self.axes()
        out = []
        for o in self.data["observables"]:
            if isinstance(o, str):
                out.append((o, _observable(o, a1, a2)))
            else:
                out.append((o["label"], _matrix(o["matrix"])))
        return out

    @property
    def algorithm(self) -> str:
        return self.data["algorithm"]

    @property
    def engine(self) -> str | None:
        e = self.data["engine"]
        return None if e == "auto" else e


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples (t, value). A detection time may appear twice (left, then right limit)."""

    label: str
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValidationError(f"series {self.label!r}: times and values differ in shape")
        if np.any(np.diff(t) < 0):
            raise ValidationError(f"series {self.label!r}: times are not non-decreasing")
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"series {self.label!r}: non-finite values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.values.tolist()))

    def at(self, t: float, side: str = "right") -> float:
        """Value at an abscissa; for a doubled point pick the left or right limit."""
        idx = np.flatnonzero(self.t == t)
        if idx.size == 0:
            raise KeyError(t)
        return float(self.values[idx[-1] if side == "right" else idx[0]])

    def jump_at(self, t: float) -> float:
        """Right limit minus left limit at a sampled abscissa (0 if sampled once)."""
        return self.at(t, "right") - self.at(t, "left")


def sample_points(t_max: float, step: float, detection_times, doubled: bool, t1: float):
    """Uniform grid 0, step, 2 step, ... <= t_max with the detection times inserted exactly.

    Returns (times, post) where ``post`` marks samples after the particle-1
    measurement. With ``doubled`` each detection time is emitted twice, as a
    left limit and then a right limit.
    """
    n = int(math.floor(t_max / step + 1e-9))
    grid = [k * step for k in range(n + 1)]
    if abs(grid[-1] - t_max) < 1e-9 * step:
        grid[-1] = t_max
    dets = sorted({float(x) for x in detection_times if x <= t_max})
    for x in dets:
        grid = [g for g in grid if abs(g - x) > 1e-9 * step]
    points = [(g, False) for g in grid]
    for x in dets:
        points.append((x, False))
        if doubled:
            points.append((x, True))
    points.sort(key=lambda p: (p[0], p[1]))
    times = np.array([p[0] for p in points])
    right = np.array([p[1] for p in points])
    post = (times > t1) | ((times == t1) & (right | (not doubled)))
    return times, post


def _ensemble(cfg: ExperimentConfig, extra_detection_times=()):
    d = cfg.data
    sched = cfg.schedule()
    doubled = cfg.algorithm != "open"
    times, post = sample_points(d["t_max"], d["dt"] * d["sample_stride"],
                                [sched.t1, sched.t2, *extra_detection_times], doubled, sched.t1)
    f1, f2 = cfg.functionals()
    axis1, _ = cfg.axes()
    return measure.ensemble(cfg.psi0(), f1, f2, sched, axis1, times, post,
                            algorithm=cfg.algorithm, engine=cfg.engine, dt=d["dt"])


def run(config: ExperimentConfig) -> list[TimeSeries]:
    """One series per configured observable, plus per-branch curves for projection algorithms."""
    ens = _ensemble(config)
    out = []
    for label, op in config.observables():
        out.append(TimeSeries(label, ens.times, ens.expect(op)))
    if config.algorithm != "open" and config.data["emit_branches"] and ens.labels != ("all",):
        live = [j for j in range(len(ens.labels)) if ens.weights[-1, j] > 0]
        for label, op in config.observables():
            branch = ens.branch_expect(op)
            for j in live:
                out.append(TimeSeries(f"{label}[{ens.labels[j]}]", ens.times, branch[:, j]))
    return out


def measurement_footprint(config: ExperimentConfig, observable: str = "IX") -> dict:
    """How much the particle-1 measurement at t1 shows up in ``observable``.

    ``value_jump`` is the right-minus-left limit at t1. ``trend_break`` is the
    largest deviation, over samples after t1, from the same curve computed
    with particle 1 never detected.
    """
    d = config.data
    sched = config.schedule()
    f1, f2 = config.functionals()
    axis1, axis2 = config.axes()
    op = _observable(observable, axis1, axis2)
    ens = _ensemble(config)
    measured = ens.expect(op)
    unmeasured = measure.ensemble(config.psi0(), f1, f2, DetectionSchedule(math.inf, sched.t2), axis1,
                                  ens.times, None, algorithm="open", engine=config.engine,
                                  dt=d["dt"]).expect(op)
    series = TimeSeries(observable, ens.times, measured)
    after = ens.times > sched.t1
    return {
        "value_jump": abs(series.jump_at(sched.t1)),
        "trend_break": float(np.abs(measured - unmeasured)[after].max(initial=0.0)),
    }


def _apply_perturbation(data: dict, key: str, value) -> dict:
    data = copy.deepcopy(data)
    if key in ("A", "B"):
        data["functional1" if key == "A" else "functional2"] = {"kind": "curie_weiss", "coeff": float(value)}
    elif key in ("t1", "t2"):
        data["schedule"][0 if key == "t1" else 1] = float(value)
    else:
        data[key] = value
    return data


@dataclass(frozen=True)
class AuditEntry:
    perturbation: dict
    deviation: float
    passed: bool


@dataclass(frozen=True)
class AuditReport:
    target: int
    algorithm: str
    tolerance: float
    entries: tuple

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "algorithm": self.algorithm,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "entries": [
                {"perturbation": e.perturbation, "deviation": e.deviation, "result": "PASS" if e.passed else "FAIL"}
                for e in self.entries
            ],
        }


def locality_audit(base: ExperimentConfig, perturbations: list[dict], target: int = 1) -> AuditReport:
    """Check that the target particle's reduced-state trajectory ignores changes made to the other particle.

    Each perturbation is a mapping of field overrides; allowed keys are the
    other particle's ``functionalK``, coefficient (``A``/``B``), detection time
    (``tK``) and measurement axis (``axisK``). The base config's algorithm is
    used for every rerun. Deviation is the largest entrywise difference of the
    target's reduced density matrix over the shared sample grid.
    """
    if target not in (1, 2):
        raise ValidationError(f"audit target must be 1 or 2, got {target!r}")
    allowed = PARTICLE_FIELDS[3 - target]
    entries = []
    for pert in perturbations:
        bad = set(pert) - allowed
        if bad:
            raise ValidationError(
                f"perturbation {sorted(bad)} touches fields outside particle {3 - target}; allowed: {sorted(allowed)}"
            )
        data = base.to_dict()
        for k, v in pert.items():
            data = _apply_perturbation(data, k, v)
        other = ExperimentConfig.from_dict(data)
        dets = [*base.data["schedule"], *other.data["schedule"]]
        ref = _ensemble(base, dets).reduced(target)
        new = _ensemble(other, dets).reduced(target)
        dev = float(np.abs(ref - new).max())
        entries.append(AuditEntry(dict(pert), dev, dev <= LOCALITY_TOL))
    return AuditReport(target, base.algorithm, LOCALITY_TOL, tuple(entries))


def _fmt(x: float) -> str:
    return f"{x:.15g}"


def to_csv(series: list[TimeSeries]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [s.label for s in series])
    if series:
        t = series[0].t
        for s in series[1:]:
            if not np.array_equal(s.t, t):
                raise ValidationError(f"series {s.label!r} is sampled on a different grid")
        for i, ti in enumerate(t):
            writer.writerow([_fmt(ti)] + [_fmt(s.values[i]) for s in series])
    return buf.getvalue()


def to_json(series: list[TimeSeries], config: ExperimentConfig | None = None) -> str:
    doc = {
        "config_echo": config.to_dict() if config is not None else None,
        "series": [{"label": s.label, "samples": [list(p) for p in s.samples]} for s in series],
    }
    return json.dumps(doc, indent=2) + "\n"


def export(series: list[TimeSeries], fmt: str, path, config: ExperimentConfig | None = None) -> Path:
    """Write series as CSV (``t,<label>,...``, 15 significant digits) or JSON."""
    if fmt == "csv":
        text = to_csv(series)
    elif fmt == "json":
        text = to_json(series, config)
    else:
        raise ValidationError(f"unknown export format {fmt!r}; expected csv or json")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
