"""Boundary-bus trajectories: synthetic generation, CSV I/O, splitting, batching.

The generator stands in for a co-simulated transmission/distribution network.
Each trajectory is a fault event seen from the boundary bus: flat pre-fault
voltage, a dip while the fault is on, and first-order recovery after it
clears, with the bus angle ringing as a damped oscillation. Power is either a
pure ZIP response or a ZIP response blended with an exponential-recovery load
state ``dx/dt = (P_zip(V) - x) / T_r`` (the aggregate-motor stand-in).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, SchemaError, SplitError
from .models import OperatingPoint, ZipParams, make_features, zip_forward

SCENARIOS = ("dist_fault", "trans_fault_zload", "trans_fault_composite")
DEFAULT_COUNTS = {"dist_fault": 20, "trans_fault_zload": 50, "trans_fault_composite": 50}

PQ_COLUMNS = ("traj_id", "t", "v", "theta_v", "p_star", "q_star")
PHASOR_COLUMNS = ("traj_id", "t", "v", "theta_v", "i", "theta_i")

CSV_NAME = "trajectories.csv"
MANIFEST_NAME = "manifest.json"

_TIME_TOL = 1e-9


def power_from_measurements(v, i, theta_v, theta_i):
    """Real and reactive power drawn, from voltage and current phasors."""
    phi = np.subtract(theta_v, theta_i)
    s = np.multiply(v, i)
    return s * np.cos(phi), s * np.sin(phi)


@dataclass(frozen=True)
class Sample:
    t: float
    v: float
    theta_v: float
    p_star: float
    q_star: float


@dataclass
class Trajectory:
    """One recorded event. Samples are stored column-wise as float arrays."""

    id: str
    scenario: str
    t: np.ndarray
    v: np.ndarray
    theta_v: np.ndarray
    p_star: np.ndarray
    q_star: np.ndarray
    operating_point: OperatingPoint = None

    def __post_init__(self):
        cols = [np.asarray(c, dtype=np.float64).reshape(-1)
                for c in (self.t, self.v, self.theta_v, self.p_star, self.q_star)]
        self.t, self.v, self.theta_v, self.p_star, self.q_star = cols
        if len({len(c) for c in cols}) != 1 or len(self.t) == 0:
            raise SchemaError(f"trajectory {self.id!r}: columns must be nonempty and equal length")
        if np.any(np.diff(self.t) < 0):
            raise SchemaError(f"trajectory {self.id!r}: time is not non-decreasing")
        if np.any(self.v <= 0):
            raise SchemaError(f"trajectory {self.id!r}: voltage magnitude must be positive")
        if self.operating_point is None:
            self.operating_point = OperatingPoint(
                float(self.v[0]), float(self.p_star[0]), float(self.q_star[0]), float(self.theta_v[0]))

    def __len__(self):
        return len(self.t)

    @property
    def samples(self) -> list[Sample]:
        return [Sample(*map(float, row))
                for row in zip(self.t, self.v, self.theta_v, self.p_star, self.q_star)]


# ---------------------------------------------------------------------------
# synthetic generator


@dataclass
class GeneratorConfig:
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    duration: float = 10.0
    dt: float = 0.02
    fault_start: float = 1.0
    fault_duration: float = 0.1
    depth_range: tuple = (0.2, 0.7)
    alpha: tuple = (0.4, 0.3, 0.3)
    beta: tuple = (0.5, 0.2, 0.3)
    # Properties of the downstream network: every fault sees the same load mix and
    # electromechanical modes, so these vary only slightly between trajectories.
    # exponential-recovery load (composite scenarios only)
    recovery_time_range: tuple = (0.8, 1.2)
    dynamic_fraction_range: tuple = (0.4, 0.5)
    # post-fault voltage recovery and angle swing
    voltage_recovery_range: tuple = (0.4, 0.6)
    angle_swing_range: tuple = (0.2, 0.25)
    angle_damping_range: tuple = (0.8, 1.0)
    angle_freq_range: tuple = (1.0, 1.2)
    # pre-fault operating point of the boundary bus
    v0_range: tuple = (0.98, 1.02)
    p0_range: tuple = (0.9, 1.1)
    q0_range: tuple = (0.25, 0.35)
    theta0_range: tuple = (-0.2, 0.2)
    noise_std: float = 0.0
    seed: int = 0

    def validate(self):
        unknown = set(self.counts) - set(SCENARIOS)
        if unknown:
            raise ConfigError(f"unknown scenario(s): {sorted(unknown)}")
        if any(int(n) != n or n < 0 for n in self.counts.values()) or sum(self.counts.values()) == 0:
            raise ConfigError(f"trajectory counts must be non-negative integers, not all zero: {self.counts}")
        if not self.dt > 0 or not self.duration > 0:
            raise ConfigError("dt and duration must be positive")
        if self.fault_start < 0 or self.fault_duration < 0:
            raise ConfigError("fault_start and fault_duration must be non-negative")
        if not self.fault_start + self.fault_duration < self.duration:
            raise ConfigError("fault must clear before the end of the record")
        for name in ("fault_start", "fault_duration"):
            steps = getattr(self, name) / self.dt
            if abs(steps - round(steps)) > 1e-6:
                raise ConfigError(f"{name} must be a whole number of dt steps")
        for name in ("depth_range", "recovery_time_range", "dynamic_fraction_range",
                     "voltage_recovery_range", "angle_swing_range", "angle_damping_range",
                     "angle_freq_range", "v0_range", "p0_range", "q0_range", "theta0_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{name}: lower bound exceeds upper bound")
        if not (0 <= self.depth_range[0] and self.depth_range[1] < 1):
            raise ConfigError("dip depth must lie in [0, 1)")
        if not (0 <= self.dynamic_fraction_range[0] and self.dynamic_fraction_range[1] <= 1):
            raise ConfigError("dynamic fraction must lie in [0, 1]")
        if self.recovery_time_range[0] <= 0 or self.voltage_recovery_range[0] <= 0:
            raise ConfigError("time constants must be positive")
        if self.v0_range[0] <= 0:
            raise ConfigError("operating-point voltage must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        return self


@dataclass(frozen=True)
class _Event:
    """Randomly drawn parameters of one fault trajectory."""

    op: OperatingPoint
    depth: float
    tau_v: float
    swing: float
    damping: float
    omega: float
    t_r: float
    dyn_frac: float


def _draw_event(cfg: GeneratorConfig, rng: np.random.Generator) -> _Event:
    u = lambda rng_range: float(rng.uniform(*rng_range))  # noqa: E731
    op = OperatingPoint(v0=u(cfg.v0_range), p0=u(cfg.p0_range), q0=u(cfg.q0_range),
                        theta0=u(cfg.theta0_range))
    depth = u(cfg.depth_range)
    return _Event(
        op=op,
        depth=depth,
        tau_v=u(cfg.voltage_recovery_range),
        swing=u(cfg.angle_swing_range) * depth,
        damping=u(cfg.angle_damping_range),
        omega=2 * math.pi * u(cfg.angle_freq_range),
        t_r=u(cfg.recovery_time_range),
        dyn_frac=u(cfg.dynamic_fraction_range),
    )


def _voltage(t, ev: _Event, t_f, t_c, right=False):
    """Bus voltage magnitude. The step at fault inception is sampled left-continuous
    unless ``right`` asks for the post-step value. Continuous at clearing."""
    t = np.asarray(t, dtype=np.float64)
    v0 = ev.op.v0
    faulted = (t >= t_f - _TIME_TOL) if right else (t > t_f + _TIME_TOL)
    s = np.maximum(t - t_c, 0.0)
    return np.where(faulted, v0 * (1.0 - ev.depth * np.exp(-s / ev.tau_v)), v0)


def _angle(t, ev: _Event, t_f, t_c):
    t = np.asarray(t, dtype=np.float64)
    s = np.maximum(t - t_c, 0.0)
    ring = np.exp(-ev.damping * s) * np.cos(ev.omega * s)
    return np.where(t > t_f + _TIME_TOL, ev.op.theta0 - ev.swing * ring, ev.op.theta0)


def integrate_recovery(u_left, u_right, x0, h, t_r):
    """Trapezoidal steps of ``dx/dt = (u - x) / t_r`` with piecewise input.

    ``u_left[j]``/``u_right[j]`` are the input at the start/end of step j, so a
    jump in ``u`` exactly at a step boundary is honoured. Returns the state at
    the end of every step (shape ``(steps,) + x0.shape``).
    """
    k = h / (2.0 * t_r)
    decay = (1.0 - k) / (1.0 + k)
    gain = k / (1.0 + k)
    x = np.array(x0, dtype=np.float64)
    out = np.empty((len(u_left),) + x.shape)
    for j in range(len(u_left)):
        x = decay * x + gain * (u_left[j] + u_right[j])
        out[j] = x
    return out


def _simulate(cfg: GeneratorConfig, scenario: str, ev: _Event, dt: float | None = None):
    dt = cfg.dt if dt is None else dt
    n = int(round(cfg.duration / dt))
    t = np.arange(n + 1) * dt
    t_f = cfg.fault_start
    t_c = cfg.fault_start + cfg.fault_duration
    zip_true = ZipParams.from_triples(cfg.alpha, cfg.beta)

    v = _voltage(t, ev, t_f, t_c)
    theta = _angle(t, ev, t_f, t_c)
    p_zip, q_zip = zip_forward(zip_true, ev.op, v)
    if scenario == "trans_fault_zload":
        return t, v, theta, p_zip, q_zip

    # sub-step so the integrator never steps past the recovery time constant
    m = max(1, math.ceil(dt / ev.t_r))
    h = dt / m
    tau = np.arange(n * m + 1) * h
    pl, ql = zip_forward(zip_true, ev.op, _voltage(tau[:-1], ev, t_f, t_c, right=True))
    pr, qr = zip_forward(zip_true, ev.op, _voltage(tau[1:], ev, t_f, t_c))
    u_left = np.stack([pl, ql], axis=1)
    u_right = np.stack([pr, qr], axis=1)
    x0 = np.array([p_zip[0], q_zip[0]])
    states = integrate_recovery(u_left, u_right, x0, h, ev.t_r)
    x = np.vstack([x0, states[m - 1::m]])
    w = ev.dyn_frac
    p = (1.0 - w) * p_zip + w * x[:, 0]
    q = (1.0 - w) * q_zip + w * x[:, 1]
    return t, v, theta, p, q


def trajectory_rng(seed: int, scenario: str, index: int) -> np.random.Generator:
    """Independent stream per (seed, trajectory); generation order does not matter."""
    return np.random.default_rng([int(seed), SCENARIOS.index(scenario), int(index)])


def generate_trajectory(cfg: GeneratorConfig, scenario: str, index: int, dt: float | None = None):
    rng = trajectory_rng(cfg.seed, scenario, index)
    ev = _draw_event(cfg, rng)
    t, v, theta, p, q = _simulate(cfg, scenario, ev, dt)
    if cfg.noise_std > 0:
        noise = rng.normal(0.0, cfg.noise_std, size=(4, len(t)))
        v, theta, p, q = v + noise[0], theta + noise[1], p + noise[2], q + noise[3]
    return Trajectory(f"{scenario}-{index:03d}", scenario, t, v, theta, p, q)


def generate_dataset(cfg: GeneratorConfig) -> list[Trajectory]:
    cfg.validate()
    return [generate_trajectory(cfg, scenario, k)
            for scenario in SCENARIOS
            for k in range(cfg.counts.get(scenario, 0))]


# ---------------------------------------------------------------------------
# CSV and manifest


def _fmt(x: float) -> str:
    return repr(float(x))


def save_csv(trajectories, path):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PQ_COLUMNS)
        for tr in trajectories:
            for row in zip(tr.t, tr.v, tr.theta_v, tr.p_star, tr.q_star):
                writer.writerow([tr.id, *map(_fmt, row)])


def load_csv(path) -> list[Trajectory]:
    """Read a trajectory CSV in either the power or the phasor column layout."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not any(h.strip() for h in header):
            raise ParseError(f"{path}: empty file", line=1)
        header = tuple(h.strip() for h in header)
        if header == PQ_COLUMNS:
            phasor = False
        elif header == PHASOR_COLUMNS:
            phasor = True
        elif {"p_star", "q_star"} & set(header) and {"i", "theta_i"} & set(header):
            raise SchemaError(f"{path}: header mixes power and phasor columns: {header}")
        else:
            raise SchemaError(f"{path}: unrecognised header {header}; expected "
                              f"{','.join(PQ_COLUMNS)} or {','.join(PHASOR_COLUMNS)}")

        groups: dict[str, list] = {}
        order: list[str] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            tid = row[0].strip()
            try:
                values = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise ParseError(f"non-numeric field ({exc})", line=line) from None
            if tid not in groups:
                groups[tid] = []
                order.append(tid)
            elif order[-1] != tid:
                raise ParseError(f"rows of trajectory {tid!r} are not contiguous", line=line)
            rows = groups[tid]
            if rows and values[0] < rows[-1][0]:
                raise ParseError(f"time goes backwards in trajectory {tid!r}", line=line)
            if values[1] <= 0:
                raise ParseError(f"voltage magnitude must be positive, got {values[1]}", line=line)
            rows.append(values)
    if not order:
        raise ParseError(f"{path}: no data rows", line=2)

    out = []
    for tid in order:
        arr = np.array(groups[tid])
        t, v, theta_v = arr[:, 0], arr[:, 1], arr[:, 2]
        if phasor:
            p, q = power_from_measurements(v, arr[:, 3], theta_v, arr[:, 4])
        else:
            p, q = arr[:, 3], arr[:, 4]
        out.append(Trajectory(tid, "unknown", t, v, theta_v, p, q))
    return out


def manifest(trajectories) -> dict:
    entries = []
    for tr in trajectories:
        op = tr.operating_point
        entries.append({"id": tr.id, "scenario": tr.scenario, "n_samples": len(tr),
                        "v0": op.v0, "p0": op.p0, "q0": op.q0, "theta0": op.theta0})
    return {"format": "neurozip-manifest", "version": 1, "trajectories": entries}


def manifest_hash(trajectories) -> str:
    text = json.dumps(manifest(trajectories), sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_dataset(trajectories, directory, generator: GeneratorConfig | None = None):
    """Write ``trajectories.csv`` plus the ``manifest.json`` sidecar into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_csv(trajectories, directory / CSV_NAME)
    doc = manifest(trajectories)
    if generator is not None:
        doc["generator"] = asdict(generator)
    (directory / MANIFEST_NAME).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    return directory


def load_dataset(path) -> list[Trajectory]:
    """Load a dataset directory (CSV + optional manifest) or a bare CSV file."""
    path = Path(path)
    if path.is_dir():
        csv_path, manifest_path = path / CSV_NAME, path / MANIFEST_NAME
    else:
        csv_path, manifest_path = path, path.with_name(MANIFEST_NAME)
    if not csv_path.exists():
        raise FileNotFoundError(f"no trajectory file at {csv_path}")
    trajectories = load_csv(csv_path)
    if manifest_path.exists():
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
        tags = {e["id"]: e["scenario"] for e in doc.get("trajectories", [])}
        missing = [tr.id for tr in trajectories if tr.id not in tags]
        if missing:
            raise SchemaError(f"{manifest_path}: no entry for trajectories {missing[:5]}")
        for tr in trajectories:
            tr.scenario = tags[tr.id]
    return trajectories


# ---------------------------------------------------------------------------
# splitting and batching


def split_sizes(n: int, ratios) -> tuple[int, int, int]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    buckets = sum(r > 0 for r in ratios)
    if n < buckets:
        raise SplitError(f"{n} trajectories cannot fill {buckets} non-empty split buckets")
    n_val = math.floor(ratios[1] * n + 1e-9)
    n_test = math.floor(ratios[2] * n + 1e-9)
    # a requested bucket never ends up empty
    n_val = max(n_val, 1) if ratios[1] > 0 else 0
    n_test = max(n_test, 1) if ratios[2] > 0 else 0
    n_train = n - n_val - n_test
    if ratios[0] > 0 and n_train < 1:
        n_train, n_val = 1, n_val - 1
    return n_train, n_val, n_test


def split_dataset(trajectories, ratios=(0.6, 0.2, 0.2), seed=0):
    """Shuffle whole trajectories by ``seed`` into (train, val, test)."""
    trajectories = list(trajectories)
    n_train, n_val, _ = split_sizes(len(trajectories), ratios)
    order = np.random.default_rng(seed).permutation(len(trajectories))
    shuffled = [trajectories[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:]


@dataclass
class Batch:
    """Trajectories stacked into N x 1 columns, aligned by (trajectory, time)."""

    ids: list
    offsets: np.ndarray
    v: np.ndarray
    theta_v: np.ndarray
    p_star: np.ndarray
    q_star: np.ndarray
    op: OperatingPoint
    features: np.ndarray

    @classmethod
    def from_trajectories(cls, trajectories, feature_mode="relative"):
        trajectories = list(trajectories)
        if not trajectories:
            raise SplitError("cannot build a batch from zero trajectories")
        col = lambda xs: np.concatenate(xs).reshape(-1, 1)  # noqa: E731
        lengths = [len(tr) for tr in trajectories]
        rep = lambda attr: col([np.full(len(tr), getattr(tr.operating_point, attr))  # noqa: E731
                                for tr in trajectories])
        op = OperatingPoint(rep("v0"), rep("p0"), rep("q0"), rep("theta0"))
        v = col([tr.v for tr in trajectories])
        theta = col([tr.theta_v for tr in trajectories])
        return cls(
            ids=[tr.id for tr in trajectories],
            offsets=np.concatenate([[0], np.cumsum(lengths)]),
            v=v,
            theta_v=theta,
            p_star=col([tr.p_star for tr in trajectories]),
            q_star=col([tr.q_star for tr in trajectories]),
            op=op,
            features=make_features(v, theta, op, feature_mode),
        )

    def __len__(self):
        return len(self.v)
