"""Scenario-driven command line front end.

A scenario is a single JSON document holding the plant and cost data
plus simulation defaults; three are bundled (souza, rotation, insulin)
and can be referenced by bare name. Subcommands cover discretization,
controllability reports, LQR and preview synthesis, cost sweeps over
the sampling period, and closed-loop simulation. Results go to the
console (12 significant digits) or, with --out, to CSV or JSON files
written with 17 significant digits so every float round-trips exactly.

Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import preview as preview_mod
from . import riccati, simulate
from .controllability import (
    candidate_pathological_periods,
    is_pathological,
    kalman_controllable,
    reduced_hautus_mri,
)
from .discretize import ContinuousPlant, CostWeights, cost_matrices, sample_plant
from .errors import NumericalError, UncontrollablePlantError, DareDivergenceError
from .numkernel import as_matrix

__all__ = ["ScenarioConfig", "load_scenario", "bundled_scenario_names", "main"]

CONSOLE_DIGITS = 12
FILE_DIGITS = 17

SIMULATE_MODES = ("regular", "impulsive", "mri", "open_loop")


@dataclass
class ScenarioConfig:
    """Parsed scenario: plant and cost data plus run defaults."""

    name: str
    A: np.ndarray
    B: np.ndarray
    Btilde: np.ndarray
    Q: np.ndarray
    Rc: np.ndarray
    Ri: np.ndarray
    T: float
    N: int = 0
    mode: str = "mri"
    epsilon: float | None = None
    saturate_nonnegative: bool = False
    horizon_steps: int | None = None
    substeps: int = 32
    disturbance_scale: float = 1.0
    output_row: np.ndarray | None = None

    def plant(self) -> ContinuousPlant:
        return ContinuousPlant(self.A, self.B, self.Btilde)

    def weights(self) -> CostWeights:
        return CostWeights(self.Q, self.Rc, self.Ri)


def bundled_scenario_names() -> list[str]:
    root = resources.files("mrilqr").joinpath("scenarios")
    return sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))


def _scenario_text(spec: str) -> tuple[str, str]:
    """Resolve a path or bundled name to (label, raw JSON text)."""
    p = Path(spec)
    if p.suffix == ".json" or p.exists():
        return str(p), p.read_text()
    names = bundled_scenario_names()
    if spec in names:
        return spec, resources.files("mrilqr").joinpath(f"scenarios/{spec}.json").read_text()
    raise ValueError(f"scenario {spec!r} is neither a file nor one of the bundled names {names}")


def load_scenario(spec: str) -> ScenarioConfig:
    """Load a scenario from a JSON file path or a bundled scenario name."""
    label, text = _scenario_text(spec)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{label}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"{label}: top-level JSON value must be an object")

    def matrix(key, required=True):
        if key not in raw:
            if required:
                raise ValueError(f"{label}: missing required field {key!r}")
            return None
        try:
            return as_matrix(raw[key], key)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{label}: field {key!r}: {exc}") from exc

    A = matrix("A")
    B = matrix("B")
    Btilde = matrix("Btilde", required=False)
    if "Q" in raw:
        Q = matrix("Q")
    elif "Ctilde" in raw:
        C = matrix("Ctilde")
        Q = C.T @ C
    else:
        raise ValueError(f"{label}: provide either 'Q' or a 'Ctilde' row to form Q")
    Rc = matrix("Rc")
    Ri = matrix("Ri")

    mode = raw.get("mode", "mri")
    if mode not in SIMULATE_MODES:
        raise ValueError(f"{label}: field 'mode' must be one of {SIMULATE_MODES}, got {mode!r}")
    T = float(raw.get("T", 0.0))
    if not (T > 0.0):
        raise ValueError(f"{label}: field 'T' must be a positive sampling period")
    N = int(raw.get("N", 0))
    if N < 0:
        raise ValueError(f"{label}: field 'N' must be >= 0")
    eps = raw.get("epsilon", None)
    out_row = matrix("output_row", required=False)
    if out_row is None and "Ctilde" in raw:
        out_row = matrix("Ctilde")
    horizon = raw.get("horizon_steps", None)

    return ScenarioConfig(
        name=str(raw.get("name", label)),
        A=A,
        B=B,
        Btilde=Btilde if Btilde is not None else np.zeros((A.shape[0], 1)),
        Q=Q,
        Rc=Rc,
        Ri=Ri,
        T=T,
        N=N,
        mode=mode,
        epsilon=float(eps) if eps is not None else None,
        saturate_nonnegative=bool(raw.get("saturate_nonnegative", False)),
        horizon_steps=int(horizon) if horizon is not None else None,
        substeps=int(raw.get("substeps", 32)),
        disturbance_scale=float(raw.get("disturbance_scale", 1.0)),
        output_row=out_row,
    )


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x: float, digits: int) -> str:
    return format(float(x), f".{digits}g")


class _Sink:
    """Accumulates (section, rows) pairs and renders to console/CSV/JSON."""

    def __init__(self):
        self.scalars: dict[str, object] = {}
        self.matrices: dict[str, np.ndarray] = {}
        self.tables: dict[str, tuple[list[str], list[list[object]]]] = {}

    def scalar(self, name, value):
        self.scalars[name] = value

    def matrix(self, name, M):
        self.matrices[name] = np.atleast_2d(np.asarray(M, dtype=float))

    def table(self, name, header, rows):
        self.tables[name] = (header, rows)

    def _cell(self, v, digits):
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return _fmt(v, digits)
        return "" if v is None else str(v)

    def to_console(self, out=None):
        out = out or sys.stdout
        for name, value in self.scalars.items():
            out.write(f"{name} = {self._cell(value, CONSOLE_DIGITS)}\n")
        for name, M in self.matrices.items():
            out.write(f"{name} ({M.shape[0]}x{M.shape[1]}):\n")
            for row in M:
                out.write("  " + "  ".join(_fmt(v, CONSOLE_DIGITS) for v in row) + "\n")
        for name, (header, rows) in self.tables.items():
            out.write(f"[{name}]\n")
            out.write(",".join(header) + "\n")
            for row in rows:
                out.write(",".join(self._cell(v, CONSOLE_DIGITS) for v in row) + "\n")

    def to_csv(self) -> str:
        lines = []
        if self.scalars:
            lines.append("section,name,row,col,value")
            for name, value in self.scalars.items():
                lines.append(f"scalar,{name},,,{self._cell(value, FILE_DIGITS)}")
            for name, M in self.matrices.items():
                for i in range(M.shape[0]):
                    for j in range(M.shape[1]):
                        lines.append(f"matrix,{name},{i},{j},{_fmt(M[i, j], FILE_DIGITS)}")
        elif self.matrices:
            lines.append("section,name,row,col,value")
            for name, M in self.matrices.items():
                for i in range(M.shape[0]):
                    for j in range(M.shape[1]):
                        lines.append(f"matrix,{name},{i},{j},{_fmt(M[i, j], FILE_DIGITS)}")
        for name, (header, rows) in self.tables.items():
            if lines:
                lines.append("")
            lines.append(",".join(header))
            for row in rows:
                lines.append(",".join(self._cell(v, FILE_DIGITS) for v in row))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        doc: dict[str, object] = {}
        doc.update({k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in self.scalars.items()})
        for name, M in self.matrices.items():
            doc[name] = M.tolist()
        for name, (header, rows) in self.tables.items():
            doc[name] = [
                {h: (None if c is None else (bool(c) if isinstance(c, (bool, np.bool_)) else
                     (int(c) if isinstance(c, (int, np.integer)) else
                      (float(c) if isinstance(c, (float, np.floating)) else str(c)))))
                 for h, c in zip(header, row)}
                for row in rows
            ]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def emit(self, out_path: str | None, fmt: str):
        if out_path is None:
            self.to_console()
            return
        text = self.to_json() if fmt == "json" else self.to_csv()
        Path(out_path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_discretize(scenario: ScenarioConfig, T: float, sink: _Sink) -> None:
    plant = scenario.plant()
    weights = scenario.weights()
    model = sample_plant(plant, T)
    cost = cost_matrices(plant, weights, T)
    sink.scalar("scenario", scenario.name)
    sink.scalar("T", T)
    for name, M in [("A", plant.A), ("B", plant.B), ("Btilde", plant.Btilde),
                    ("A_d", model.A_d), ("Atilde", model.Atilde),
                    ("B_d", model.B_d), ("B_i", model.B_i),
                    ("Q_d", cost.Q_d), ("S_d", cost.S_d), ("R_d", cost.R_d)]:
        sink.matrix(name, M)


def cmd_controllability(scenario: ScenarioConfig, T_max: float, sink: _Sink) -> None:
    plant = scenario.plant()
    if not kalman_controllable(plant.A, plant.B):
        raise UncontrollablePlantError(
            "hypothesis violated: the continuous pair (A, B) is not controllable"
        )
    sink.scalar("scenario", scenario.name)
    sink.scalar("T_max", T_max)
    candidates = candidate_pathological_periods(plant.A, T_max)
    rows = []
    for c in candidates:
        report = reduced_hautus_mri(plant, c.period)
        rows.append([
            c.period,
            c.base_period,
            c.multiple,
            c.needs_per_multiple_test,
            is_pathological(plant, c.period, "regular"),
            is_pathological(plant, c.period, "impulsive"),
            not report.controllable,
            report.margin if np.isfinite(report.margin) else None,
        ])
    sink.table(
        "candidates",
        ["period", "base_period", "multiple", "needs_per_multiple_test",
         "pathological_regular", "pathological_impulsive", "pathological_mri", "mri_margin"],
        rows,
    )
    report = reduced_hautus_mri(plant, scenario.T)
    sink.scalar("scenario_T", scenario.T)
    sink.scalar("scenario_T_mri_controllable", report.controllable)


def cmd_lqr(scenario: ScenarioConfig, T: float, mode: str, sink: _Sink) -> None:
    if mode == "open_loop":
        raise ValueError("the lqr command needs a feedback mode (regular, impulsive, mri)")
    plant = scenario.plant()
    des = riccati.design(plant, scenario.weights(), T, mode)
    sol = des.solution
    sink.scalar("scenario", scenario.name)
    sink.scalar("T", T)
    sink.scalar("mode", mode)
    sink.scalar("converged", sol.converged)
    sink.scalar("iterations", sol.iterations)
    sink.scalar("residual", sol.residual)
    sink.scalar("closed_loop_spectral_radius", riccati.closed_loop_spectral_radius(des))
    bt = plant.Btilde[:, 0]
    sink.scalar("cost_at_Btilde", riccati.infinite_horizon_cost(sol, bt))
    sink.matrix("P", sol.P)
    m = plant.m
    if mode == "mri":
        sink.matrix("K_c", sol.K[:m])
        sink.matrix("K_i", sol.K[m:])
    else:
        sink.matrix("K", sol.K)


def cmd_preview(scenario: ScenarioConfig, T: float, N: int, sink: _Sink) -> None:
    plant = scenario.plant()
    bt = plant.Btilde[:, 0]
    plan = preview_mod.preview_plan(plant, scenario.weights(), T, bt, N)
    sink.scalar("scenario", scenario.name)
    sink.scalar("T", T)
    sink.scalar("N", N)
    sink.scalar("Jstar", plan.Jstar)
    m = plant.m
    sink.matrix("K_c", plan.K[:m])
    sink.matrix("K_i", plan.K[m:])
    sink.matrix("G", plan.G)
    sink.matrix("Gamma", plan.Gamma)
    if plan.feedforward:
        sink.matrix("feedforward", np.vstack(plan.feedforward))


def _sweep_cost(plant, weights, T, mode, N, Btilde):
    """One sweep cell: (cost, converged, iterations)."""
    try:
        des = riccati.design(plant, weights, T, mode)
    except DareDivergenceError as exc:
        P = exc.last_iterate
        cost = float(Btilde @ P @ Btilde) if P is not None else float("nan")
        return cost, False, exc.iterations
    sol = des.solution
    if N == 0:
        return float(Btilde @ sol.P @ Btilde), sol.converged, sol.iterations
    try:
        G = preview_mod.closed_loop_G(des.model.A_d, des.B_sel, des.S_sel, des.R_sel, sol.P)
        _, Jstar = preview_mod.gamma_and_cost(sol.P, G, des.B_sel, des.R_sel, Btilde, N)
        return Jstar, sol.converged, sol.iterations
    except NumericalError:
        return float(Btilde @ sol.P @ Btilde), False, sol.iterations


def cmd_sweep(scenario: ScenarioConfig, T_grid, modes, N_list, sink: _Sink) -> None:
    plant = scenario.plant()
    weights = scenario.weights()
    bt = plant.Btilde[:, 0]
    rows = []
    for T in T_grid:
        for mode in modes:
            for N in N_list:
                cost, conv, iters = _sweep_cost(plant, weights, float(T), mode, int(N), bt)
                rows.append([float(T), mode, int(N), cost, conv, iters])
    sink.table("sweep", ["T", "mode", "N", "cost", "converged", "iterations"], rows)


def cmd_simulate(scenario: ScenarioConfig, args, sink: _Sink) -> None:
    plant = scenario.plant()
    weights = scenario.weights()
    T = args.T if args.T is not None else scenario.T
    N = args.N[0] if args.N is not None else scenario.N
    mode = args.mode if args.mode is not None else scenario.mode
    substeps = args.substeps if args.substeps is not None else scenario.substeps
    epsilon = args.eps if args.eps is not None else scenario.epsilon
    saturate = scenario.saturate_nonnegative or bool(args.saturate)

    m = plant.m
    feedforward: tuple = ()
    A_cl = None
    if mode == "open_loop":
        policy = simulate.InputPolicy(K=np.zeros((2 * m, plant.n)), mode="mri",
                                      saturate_nonnegative=False)
    else:
        if N > 0 and mode != "mri":
            raise ValueError("preview (N > 0) is only available in mri mode")
        des = riccati.design(plant, weights, T, mode)
        if N > 0:
            plan = preview_mod.preview_plan(plant, weights, T, plant.Btilde[:, 0] * scenario.disturbance_scale, N)
            feedforward = plan.feedforward
        policy = simulate.InputPolicy(K=des.solution.K, mode=mode, feedforward=feedforward,
                                      saturate_nonnegative=saturate)
        A_cl = des.model.A_d + des.B_sel @ des.solution.K

    direction = plant.Btilde[:, 0] * scenario.disturbance_scale
    disturbance = simulate.DisturbanceSpec(impulse_step=N, direction=direction)
    if args.steps is not None:
        steps = args.steps
    elif scenario.horizon_steps is not None:
        steps = scenario.horizon_steps
    else:
        steps = 50 if A_cl is None else max(simulate.certified_horizon(
            A_cl, float(direction @ direction), cap=2000), N + 10)

    traj = simulate.simulate_closed_loop(
        plant, weights, T, policy,
        disturbance=disturbance, steps=steps, substeps=substeps,
        impulse_mode="approx" if epsilon is not None else "exact",
        epsilon=epsilon,
    )

    out_row = scenario.output_row[0] if scenario.output_row is not None else None
    header = (["t"] + [f"x{i+1}" for i in range(plant.n)] + ["y"]
              + [f"uc{i+1}" for i in range(m)] + [f"ui{i+1}" for i in range(m)]
              + ["J_running", "impulse"])
    rows = []
    for idx, t in enumerate(traj.dense_times):
        x = traj.dense_states[idx]
        k = min(int(np.floor(t / T + 1e-9)), traj.steps - 1)
        uc, ui = traj.u_c[k], traj.u_i[k]
        y = float(out_row @ x) if out_row is not None else None
        rows.append([float(t)] + [float(v) for v in x] + [y]
                    + [float(v) for v in uc] + [float(v) for v in ui]
                    + [float(traj.dense_running_cost[idx]), int(traj.dense_impulse_flags[idx])])
    sink.scalar("scenario", scenario.name)
    sink.scalar("T", T)
    sink.scalar("mode", mode)
    sink.scalar("N", N)
    sink.scalar("steps", traj.steps)
    sink.scalar("J_cont", traj.J_cont)
    sink.scalar("J_disc", traj.J_disc)
    if out_row is not None:
        sink.scalar("peak_y", float(np.max(traj.dense_states @ out_row)))
    sink.table("trajectory", header, rows)


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _parse_grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--T-grid expects start:step:stop, got {text!r}")
    start, step, stop = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise ValueError(f"--T-grid needs step > 0 and stop >= start, got {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _parse_int_list(text: str) -> list[int]:
    return [int(p) for p in text.split(",") if p != ""]


def _build_parser() -> _Parser:
    p = _Parser(prog="mrilqr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, with_T=True):
        sp.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
        if with_T:
            sp.add_argument("--T", type=float, default=None, help="sampling period override")
        sp.add_argument("--out", default=None, help="output file (default: console)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("discretize", help="sampled model and equivalent cost matrices")
    common(sp)

    sp = sub.add_parser("controllability", help="pathological-period report")
    common(sp, with_T=False)
    sp.add_argument("--T-max", type=float, default=10.0, dest="T_max")

    sp = sub.add_parser("lqr", help="infinite-horizon gain synthesis")
    common(sp)
    sp.add_argument("--mode", choices=("regular", "impulsive", "mri"), default=None)

    sp = sub.add_parser("preview", help="preview feedforward synthesis")
    common(sp)
    sp.add_argument("--N", type=int, default=None, help="preview horizon override")

    sp = sub.add_parser("sweep", help="cost sweep over sampling periods")
    common(sp, with_T=False)
    sp.add_argument("--T-grid", required=True, dest="T_grid", help="start:step:stop")
    sp.add_argument("--mode", choices=("regular", "impulsive", "mri", "all"), default="mri")
    sp.add_argument("--N", default="0", help="comma-separated preview horizons")

    sp = sub.add_parser("simulate", help="closed-loop trajectory CSV")
    common(sp)
    sp.add_argument("--mode", choices=SIMULATE_MODES, default=None)
    sp.add_argument("--N", type=int, default=None)
    sp.add_argument("--eps", type=float, default=None, help="impulse hold fraction (approx mode)")
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--substeps", type=int, default=None)
    sp.add_argument("--saturate", action="store_true", help="clip inputs at zero")
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        sink = _Sink()
        if args.command == "discretize":
            cmd_discretize(scenario, args.T if args.T is not None else scenario.T, sink)
        elif args.command == "controllability":
            cmd_controllability(scenario, args.T_max, sink)
        elif args.command == "lqr":
            mode = args.mode if args.mode is not None else scenario.mode
            cmd_lqr(scenario, args.T if args.T is not None else scenario.T, mode, sink)
        elif args.command == "preview":
            cmd_preview(scenario, args.T if args.T is not None else scenario.T,
                        args.N if args.N is not None else scenario.N, sink)
        elif args.command == "sweep":
            grid = _parse_grid(args.T_grid)
            modes = ("regular", "impulsive", "mri") if args.mode == "all" else (args.mode,)
            cmd_sweep(scenario, grid, modes, _parse_int_list(args.N), sink)
        elif args.command == "simulate":
            ns = argparse.Namespace(
                T=args.T, N=[args.N] if args.N is not None else None, mode=args.mode,
                substeps=args.substeps, eps=args.eps, steps=args.steps,
                saturate=args.saturate,
            )
            cmd_simulate(scenario, ns, sink)
        sink.emit(args.out, args.format)
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
