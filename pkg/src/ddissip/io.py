"""File formats: trajectory and controller CSVs, parameter sidecars, run configs."""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dissipativity import SupplyRate
from .lti import Channel, StateSpace, Trajectory
from .synthesis import ControllerBasis, DissipativitySpec, fir_basis, pi_basis


def _fmt(x) -> str:
    # repr of a Python float is the shortest string that round-trips exactly
    return repr(float(x))


def write_columns(path, header, columns) -> None:
    columns = [np.asarray(c).ravel() for c in columns]
    n = columns[0].size
    if any(c.size != n for c in columns):
        raise ValueError("all columns must have equal length")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row])


def read_columns(path, header) -> dict:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    got = [h.strip() for h in rows[0]]
    if got != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def write_trajectory(path, traj: Trajectory) -> None:
    write_columns(path, ("k", "u", "y"), (np.arange(traj.N), traj.u.astype(float), traj.y.astype(float)))


def read_trajectory(path) -> Trajectory:
    cols = read_columns(path, ("k", "u", "y"))
    if not np.array_equal(cols["k"], np.arange(cols["k"].size)):
        raise ValueError(f"{path}: sample index k must run 0, 1, 2, ...")
    return Trajectory(cols["u"], cols["y"])


def sidecar_path(controller_path) -> Path:
    p = Path(controller_path)
    return p.with_name(p.stem + ".params.json")


def write_controller(path, a, basis: ControllerBasis | None = None, p=None) -> None:
    """Impulse-response CSV ``k,a``; with ``basis`` and ``p`` also a JSON sidecar."""
    a = np.asarray(a, dtype=float).ravel()
    write_columns(path, ("k", "a"), (np.arange(a.size), a))
    if basis is not None and p is not None:
        side = {"basis": basis_to_string(basis), "labels": list(basis.labels),
                "p": [float(x) for x in np.ravel(p)]}
        sidecar_path(path).write_text(json.dumps(side, indent=2) + "\n")


def read_controller(path) -> tuple[np.ndarray, dict | None]:
    cols = read_columns(path, ("k", "a"))
    side = sidecar_path(path)
    params = json.loads(side.read_text()) if side.exists() else None
    return cols["a"], params


def read_state_space(path) -> StateSpace:
    """JSON object with keys A, B, C, D (nested lists or scalars)."""
    d = json.loads(Path(path).read_text())
    try:
        return StateSpace(d["A"], d["B"], d["C"], d.get("D", 0.0))
    except KeyError as exc:
        raise ValueError(f"{path}: state-space file lacks key {exc}") from None


_BASIS_RE = re.compile(r"^\s*(pi|fir)\s+(Ts|d)\s*=\s*([0-9.eE+-]+)\s*$")


def parse_basis(text: str, horizon: int) -> ControllerBasis:
    """``"pi Ts=0.5"`` or ``"fir d=3"``."""
    m = _BASIS_RE.match(text)
    if not m or (m.group(1) == "pi") != (m.group(2) == "Ts"):
        raise ValueError(f"basis must read 'pi Ts=<x>' or 'fir d=<k>', got {text!r}")
    if m.group(1) == "pi":
        return pi_basis(horizon, float(m.group(3)))
    return fir_basis(horizon, int(m.group(3)))


def basis_to_string(basis: ControllerBasis) -> str:
    if basis.name == "pi":
        return f"pi Ts={basis.meta['Ts']!r}"
    if basis.name == "fir":
        return f"fir d={basis.meta['d']}"
    raise ValueError(f"basis {basis.name!r} has no text form")


def _spec_from_dict(d: dict, horizon: int) -> DissipativitySpec:
    s = d["supply"]
    filt = d.get("filter")
    if filt is not None:
        filt = np.asarray(filt, dtype=float).ravel()
        if filt.size > horizon:
            raise ValueError(f"filter has {filt.size} taps, horizon is {horizon}")
        # shorter impulse responses are zero-padded to the horizon
        filt = np.concatenate([filt, np.zeros(horizon - filt.size)])
    return DissipativitySpec(Channel.parse(d.get("channel", "r_to_z")),
                             SupplyRate(s["Q"], s["S"], s["R"]), filt, float(d.get("delta", 0.0)))


def _spec_to_dict(spec: DissipativitySpec) -> dict:
    out = {"channel": spec.channel.value, "supply": spec.sr.to_dict()}
    if spec.filter is not None:
        out["filter"] = [float(x) for x in spec.filter]
    if spec.delta:
        out["delta"] = spec.delta
    return out


@dataclass
class RunConfig:
    L: int
    nu: int
    n_bound: int
    specs: list = field(default_factory=list)
    basis: str = "pi Ts=1.0"
    solver: dict = field(default_factory=dict)
    small_gain_bound: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.n_bound <= self.nu < self.L):
            raise ValueError(f"need 1 <= n_bound <= nu < L, got n_bound={self.n_bound}, "
                             f"nu={self.nu}, L={self.L}")

    @property
    def horizon(self) -> int:
        return self.L - self.nu

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        L, nu = int(d["L"]), int(d["nu"])
        specs = [_spec_from_dict(s, L - nu) for s in d.get("specs", [])]
        return cls(L, nu, int(d.get("n_bound", nu)), specs, d.get("basis", "pi Ts=1.0"),
                   dict(d.get("solver", {})), d.get("small_gain_bound"), int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        return {"L": self.L, "nu": self.nu, "n_bound": self.n_bound,
                "specs": [_spec_to_dict(s) for s in self.specs], "basis": self.basis,
                "solver": self.solver, "small_gain_bound": self.small_gain_bound, "seed": self.seed}

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def controller_basis(self) -> ControllerBasis:
        return parse_basis(self.basis, self.horizon)
