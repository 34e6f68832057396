"""Command-line front end.

Exit status: 0 on success (dissipative / feasible), 2 when the run completed
but a verdict is negative or the QMI is infeasible, 1 on errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import workflow
from .closed_loop import closed_loop_response
from .io import RunConfig, read_columns, read_controller, read_state_space, read_trajectory, write_columns, \
    write_controller, write_trajectory
from .lti import Channel, pe_input_uniform, random_stable_siso, simulate, two_tank_plant, unit_delay
from .trajectory import excitation_order

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2

FIXTURES = {"two_tank": two_tank_plant, "unit_delay": unit_delay}

_OUTPUT_NAME = {Channel.r_to_z: "z", Channel.r_to_e: "e", Channel.r_to_u: "u"}


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _emit(report: dict, path) -> None:
    if path:
        Path(path).write_text(json.dumps(report, indent=2, default=_json_default) + "\n")


def resolve_plant(name: str):
    """Fixture name, ``random:<n>:<seed>``, or a JSON state-space file."""
    if name in FIXTURES:
        return FIXTURES[name]()
    if name.startswith("random:"):
        try:
            _, n, seed = name.split(":")
            return random_stable_siso(int(n), int(seed))
        except ValueError:
            raise ValueError(f"random fixture must read random:<n>:<seed>, got {name!r}") from None
    if Path(name).is_file():
        return read_state_space(name)
    raise ValueError(f"unknown plant {name!r}: use {', '.join(FIXTURES)}, random:<n>:<seed> or a JSON file")


def _verdict_lines(rows, label) -> list[str]:
    return [f"{label(r)}: {'dissipative' if r['dissipative'] else 'NOT dissipative'} "
            f"(margin {r['margin']:.6g}, tolerance {r['tolerance']:.2g})" for r in rows]


def cmd_generate(args) -> int:
    plant = resolve_plant(args.plant)
    traj = simulate(plant, pe_input_uniform(args.N, args.lo, args.hi, seed=args.seed))
    write_trajectory(args.out, traj)
    order = excitation_order(traj.u)
    print(f"wrote {traj.N} samples to {args.out}")
    print(f"input persistently exciting of order {order}")
    if args.require is not None:
        ok = order >= args.require
        print(f"order {args.require} required: {'yes' if ok else 'NO'}")
        if not ok:
            logging.warning("input only persistently exciting of order %d < %d", order, args.require)
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = RunConfig.load(args.config)
    page = workflow.page_from_config(read_trajectory(args.data), cfg)
    rows = workflow.check(page, cfg.specs)
    for line in _verdict_lines(rows, lambda r: "supply Q={Q:g} S={S:g} R={R:g}".format(**r["supply"])):
        print(line)
    _emit({"horizon": page.horizon, "checks": rows}, args.report)
    return EXIT_OK if all(r["dissipative"] for r in rows) else EXIT_NEGATIVE


def cmd_validate(args) -> int:
    cfg = RunConfig.load(args.config)
    page = workflow.page_from_config(read_trajectory(args.data), cfg)
    a, _ = read_controller(args.controller)
    rows = workflow.validate(page, a, cfg.specs)
    for line in _verdict_lines(rows, lambda r: r["channel"]):
        print(line)
    _emit({"horizon": page.horizon, "validation": rows}, args.report)
    return EXIT_OK if all(r["dissipative"] for r in rows) else EXIT_NEGATIVE


def cmd_synthesize(args) -> int:
    cfg = RunConfig.load(args.config)
    page = workflow.page_from_config(read_trajectory(args.data), cfg)
    res = workflow.synthesize(page, cfg)
    solve = res["solve"]
    report = {"basis": cfg.basis, "labels": res["labels"], **solve, "validation": res["validation"]}
    if solve["feasible"]:
        write_controller(args.out, res["a"], res["basis"], res["p"])
        params = ", ".join(f"{k}={v:.6g}" for k, v in zip(res["labels"], res["p"]))
        print(f"feasible after {solve['iterations']} iterations: {params}")
        print(f"margin lambda_max = {solve['final_margin']:.6g}; controller written to {args.out}")
        for line in _verdict_lines(res["validation"], lambda r: f"  validation {r['channel']}"):
            print(line)
    else:
        print(f"infeasible: {solve['message']} (best lambda_max {solve['final_margin']:.6g})")
    _emit(report, args.report)
    return EXIT_OK if solve["feasible"] else EXIT_NEGATIVE


def cmd_respond(args) -> int:
    cfg = RunConfig.load(args.config)
    page = workflow.page_from_config(read_trajectory(args.data), cfg)
    a, _ = read_controller(args.controller)
    h = page.horizon
    if args.reference == "step":
        r = np.ones(h)
    else:
        r = read_columns(args.reference, ("k", "r"))["r"]
    channel = Channel.parse(args.channel)
    w = closed_loop_response(page, a, channel, r)
    write_columns(args.out, ("k", "r", _OUTPUT_NAME[channel]), (np.arange(h), r, w))
    print(f"wrote {h}-sample {channel.value} response to {args.out}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    rep = workflow.reproduce_two_tank(args.seed, args.outdir, plant_model=not args.no_model)
    print(f"N={rep['N']} L={rep['L']} nu={rep['nu']} Ts={rep['Ts']}")
    print(f"input persistently exciting of order {rep['pe_order']} (need {rep['pe_required']})")
    if rep["feasible"]:
        print("PI controller: " + ", ".join(f"{k}={v:.6g}" for k, v in rep["p"].items()))
        for line in _verdict_lines(rep["validation"], lambda r: f"  spec {r['channel']}"):
            print(line)
        print(f"step response: max |z_k - 1| for k >= 100 is {rep['step_max_error_k100']:.4g}")
    else:
        print("synthesis infeasible")
    for line in _verdict_lines(rep["published_gains"],
                               lambda r: f"  published PI, {r['channel']} gamma={r['gamma']:.6g}"):
        print(line)
    if "note" in rep:
        print(f"note: {rep['note']}")
    print(f"artifacts in {args.outdir}")
    return EXIT_OK if rep["feasible"] else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddissip", description="Data-driven dissipativity checks and "
                                 "controller synthesis from one input/output trajectory.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a fixture under a random input")
    g.add_argument("--plant", default="two_tank")
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lo", type=float, default=-10.0)
    g.add_argument("--hi", type=float, default=10.0)
    g.add_argument("--require", type=int, help="excitation order to confirm")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    for name, func, hlp in (("check", cmd_check, "open-loop dissipativity from data"),
                            ("validate", cmd_validate, "closed-loop dissipativity of a given controller"),
                            ("synthesize", cmd_synthesize, "find controller parameters")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("data")
        if name == "validate":
            p.add_argument("controller")
        p.add_argument("--config", required=True)
        if name == "synthesize":
            p.add_argument("--out", required=True, help="controller CSV")
        p.add_argument("--report", help="machine-readable JSON report")
        p.set_defaults(func=func)

    r = sub.add_parser("respond", help="closed-loop response computed from data")
    r.add_argument("data")
    r.add_argument("controller")
    r.add_argument("--config", required=True)
    r.add_argument("--reference", default="step", help="'step' or a CSV with header k,r")
    r.add_argument("--channel", default="r_to_z", choices=[c.value for c in Channel])
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_respond)

    x = sub.add_parser("reproduce", help="two-tank design example")
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--outdir", default="two_tank_out")
    x.add_argument("--no-model", action="store_true", help="skip outputs that need the plant model")
    x.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
