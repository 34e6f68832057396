"""End-to-end pipelines shared by the command line and the acceptance suite."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from scipy import signal

from .closed_loop import closed_loop_l2_gain, closed_loop_response, oracle_closed_loop, validate_closed_loop
from .dissipativity import SupplyRate, check_open_loop, oracle_l2_gain
from .io import RunConfig, write_columns, write_controller, write_trajectory
from .lti import (TWO_TANK_TS, Channel, StateSpace, Trajectory, feedback_interconnect, fir_realization,
                  pe_input_uniform, pi_controller, simulate, two_tank_plant)
from .qmi import SolverOptions, solve_feasibility
from .synthesis import ControllerBasis, DissipativitySpec, assemble_all
from .trajectory import DataPage, build_data_page, excitation_order

log = logging.getLogger(__name__)

MODEL_NOTE = "plotting this magnitude plot requires knowledge of the plant model"

# published PI gains (K_p, K_i) of the two-tank example
PUBLISHED_PI = (0.1551, 0.0084)

TWO_TANK_N, TWO_TANK_L, TWO_TANK_NU = 223, 110, 2

# toolkit choice, not published data: W_e accumulates the tracking error
# (a discrete integrator truncated to the horizon) and W_u is a constant
TWO_TANK_WE_GAIN = 0.0425
TWO_TANK_WU_GAIN = 1.2


def solver_options(d: dict | None) -> SolverOptions:
    d = dict(d or {})
    if d.get("p0") is not None:
        d["p0"] = np.asarray(d["p0"], dtype=float)
    return SolverOptions(**d)


def page_from_config(traj: Trajectory, cfg: RunConfig) -> DataPage:
    return build_data_page(traj, cfg.L, cfg.nu, cfg.n_bound)


def check(page: DataPage, specs) -> list[dict]:
    """Open-loop verdict for the supply rate of every spec."""
    out = []
    for s in specs:
        cert = check_open_loop(page, s.sr)
        out.append({"supply": s.sr.to_dict(), **cert.to_dict()})
    return out


def validate(page: DataPage, a, specs) -> list[dict]:
    out = []
    for s in specs:
        cert = validate_closed_loop(page, a, s.channel, s.sr, filter=s.filter)
        out.append({"channel": s.channel.value, "supply": s.sr.to_dict(),
                    "filtered": s.filter is not None, **cert.to_dict()})
    return out


def synthesize(page: DataPage, cfg: RunConfig, basis: ControllerBasis | None = None) -> dict:
    """Assemble and solve the synthesis QMI, then re-validate every spec from data."""
    basis = basis or cfg.controller_basis()
    if not cfg.specs:
        raise ValueError("config has no specs to synthesize against")
    problem = assemble_all(page, cfg.specs, basis, cfg.small_gain_bound)
    rep = solve_feasibility(problem, solver_options(cfg.solver))
    result = {"solve": rep.to_dict(), "basis": basis, "labels": list(basis.labels),
              "p": rep.p, "a": basis.impulse_response(rep.p), "validation": []}
    if rep.feasible:
        result["validation"] = validate(page, result["a"], cfg.specs)
    return result


def controller_realization(basis: ControllerBasis, p) -> StateSpace:
    """Causal realization of the controller with parameters ``p`` (PI or FIR basis)."""
    p = np.asarray(p, dtype=float).ravel()
    if basis.name == "pi":
        return pi_controller(p[0], p[1], basis.meta["Ts"])
    if basis.name == "fir":
        return fir_realization(p)
    raise ValueError(f"no realization known for basis {basis.name!r}")


def _freq(sys: StateSpace, w):
    return signal.dfreqresp(signal.dlti(sys.A, sys.B, sys.C, [[sys.D]]), w=w)[1]


def sensitivity_magnitudes(plant: StateSpace, controller: StateSpace, we, wu, ts: float,
                           omega=None) -> dict:
    """|S_e|, |S_u| of the model loop and the inverse filter magnitudes, on an omega grid in rad/s."""
    if omega is None:
        omega = np.logspace(-4, np.log10(np.pi / ts), 200)
    theta = np.asarray(omega, dtype=float) * ts
    Se = _freq(feedback_interconnect(plant, controller, Channel.r_to_e), theta)
    Su = _freq(feedback_interconnect(plant, controller, Channel.r_to_u), theta)
    We = signal.freqz(we, worN=theta)[1]
    Wu = signal.freqz(wu, worN=theta)[1]
    return {"omega": omega, "mag_Se": np.abs(Se), "mag_Su": np.abs(Su),
            "bound_We_inv": 1.0 / np.abs(We), "bound_Wu_inv": 1.0 / np.abs(Wu)}


def two_tank_filters(horizon: int) -> tuple[np.ndarray, np.ndarray]:
    we = np.full(horizon, TWO_TANK_WE_GAIN)
    wu = np.zeros(horizon)
    wu[0] = TWO_TANK_WU_GAIN
    return we, wu


def two_tank_config(seed: int = 0) -> RunConfig:
    h = TWO_TANK_L - TWO_TANK_NU
    we, wu = two_tank_filters(h)
    gain1 = SupplyRate.l2_gain(1.0)
    specs = [DissipativitySpec(Channel.r_to_e, gain1, we), DissipativitySpec(Channel.r_to_u, gain1, wu)]
    return RunConfig(TWO_TANK_L, TWO_TANK_NU, 2, specs, f"pi Ts={TWO_TANK_TS!r}", {}, None, seed)


def published_gain_check(page: DataPage, plant: StateSpace, margin: float = 0.01) -> list[dict]:
    """Validate the published PI against gamma set ``margin`` above its oracle closed-loop gain."""
    h = page.horizon
    a = np.full(h, PUBLISHED_PI[1] * TWO_TANK_TS)
    a[0] = PUBLISHED_PI[0]
    out = []
    for ch in Channel:
        g = oracle_l2_gain(oracle_closed_loop(plant, a, ch), h)
        gamma = (1.0 + margin) * g
        cert = validate_closed_loop(page, a, ch, SupplyRate.l2_gain(gamma))
        out.append({"channel": ch.value, "oracle_gain": g, "gamma": gamma, **cert.to_dict()})
    return out


def reproduce_two_tank(seed: int = 0, outdir=None, plant_model: bool = True) -> dict:
    """Data generation, synthesis, validation and response of the two-tank example.

    With ``outdir`` the artifact files are written there. The magnitude data
    need the plant model and are only produced when ``plant_model`` is set.
    """
    plant = two_tank_plant()
    cfg = two_tank_config(seed)
    traj = simulate(plant, pe_input_uniform(TWO_TANK_N, seed=seed))
    pe_order = excitation_order(traj.u)
    page = page_from_config(traj, cfg)
    basis = cfg.controller_basis()
    syn = synthesize(page, cfg, basis)
    h = page.horizon
    report = {"N": traj.N, "L": cfg.L, "nu": cfg.nu, "n_bound": cfg.n_bound, "Ts": TWO_TANK_TS,
              "seed": seed, "pe_order": pe_order, "pe_required": cfg.L + cfg.n_bound,
              "pe_ok": pe_order >= cfg.L + cfg.n_bound, "solve": syn["solve"],
              "feasible": syn["solve"]["feasible"], "validation": syn["validation"]}
    r = np.ones(h)
    z = None
    if report["feasible"]:
        a = syn["a"]
        report["p"] = dict(zip(syn["labels"], (float(x) for x in syn["p"])))
        z = closed_loop_response(page, a, Channel.r_to_z, r)
        report["step_max_error_k100"] = float(np.max(np.abs(z[100:] - 1.0))) if h > 100 else None
        report["closed_loop_gains"] = {ch.value: closed_loop_l2_gain(page, a, ch) for ch in Channel}
    report["published_gains"] = published_gain_check(page, plant)

    mags = None
    if plant_model and report["feasible"]:
        we, wu = two_tank_filters(h)
        mags = sensitivity_magnitudes(plant, controller_realization(basis, syn["p"]), we, wu, TWO_TANK_TS)
        report["note"] = MODEL_NOTE

    if outdir is not None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory(out / "data.csv", traj)
        cfg.save(out / "config.json")
        if z is not None:
            write_controller(out / "controller.csv", syn["a"], basis, syn["p"])
            write_columns(out / "step_response.csv", ("k", "r", "z"), (np.arange(h), r, z))
        if mags is not None:
            write_columns(out / "magnitude.csv", tuple(mags), tuple(mags.values()))
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    return report
