"""Command-line front end: ``flyq synth|verify|figure``.

Exit codes: 0 success, 1 bad input, 2 target not realizable (tail dominance
or phase rule), 3 simulation below the configured thresholds.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import synthesis
from .model import (
    Envelope,
    Task,
    TaskSpec,
    WindowTooNarrow,
    make_envelope,
)
from .numerics import NumericalError, StructuralError, TimeGrid, tail_integral
from .simulator import ConsistencyError, ConvergenceWarning, marginals, simulate_task

EXIT_OK, EXIT_INPUT, EXIT_UNREALIZABLE, EXIT_THRESHOLD = 0, 1, 2, 3
TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    pass


# -- config -------------------------------------------------------------------


def _field(obj: dict, key: str, where: str, kind=None, default=...):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing")
        return default
    value = obj[key]
    if kind is not None:
        # JSON true/false must not pass as numbers
        ok = isinstance(value, kind) and (kind is bool or not isinstance(value, bool))
        if not ok:
            raise ConfigError(f"{where}.{key}: expected {getattr(kind, '__name__', 'number')}, got {value!r}")
    return value


def read_config(path: str | Path) -> dict:
    """Parse a JSON task file, reporting the line and column of syntax errors."""
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _grid(cfg: dict, grid_points: int | None) -> TimeGrid:
    g = _field(cfg, "grid", "config", dict)
    t0 = float(_field(g, "t_start_us", "grid", (int, float)))
    t1 = float(_field(g, "t_end_us", "grid", (int, float)))
    n = grid_points if grid_points is not None else _field(g, "n_points", "grid", int)
    try:
        return TimeGrid(t0, t1, int(n))
    except (ValueError, StructuralError) as exc:
        raise ConfigError(f"grid: {exc}") from None


def _target(spec: dict, grid: TimeGrid, where: str) -> Envelope:
    kind = _field(spec, "kind", where, str)
    params = _field(spec, "params", where, dict, {})
    pw = f"{where}.params"
    if kind == "exponential":
        env = make_envelope(kind, grid, gamma_c=TWO_PI * float(_field(params, "gamma_c_mhz", pw, (int, float))))
    elif kind == "gaussian":
        env = make_envelope(
            kind,
            grid,
            omega=TWO_PI * float(_field(params, "omega_mhz", pw, (int, float))),
            t_center=float(_field(params, "t_center_us", pw, (int, float), 0.0)),
        )
    elif kind == "custom":
        re = np.asarray(_field(params, "re", pw, list), dtype=float)
        im = np.asarray(_field(params, "im", pw, list, [0.0] * len(re)), dtype=float)
        if re.shape != (grid.n_points,) or im.shape != re.shape:
            raise ConfigError(f"{pw}: custom samples must match grid.n_points={grid.n_points}")
        env = make_envelope(kind, grid, values=re + 1j * im)
    else:
        raise ConfigError(f"{where}.kind: unknown envelope kind {kind!r}")
    phase = _field(spec, "phase", where, dict, {})
    return env.with_phase(
        bool(_field(phase, "global_pi", f"{where}.phase", bool, False)),
        float(_field(phase, "chirp_rad_per_us", f"{where}.phase", (int, float), 0.0)),
    )


def task_from_config(cfg: dict, grid_points: int | None = None) -> TaskSpec:
    """Build a :class:`TaskSpec`; MHz values are read as ``f`` with rate ``2 pi f``."""
    name = _field(cfg, "task", "config", str)
    try:
        task = Task(name)
    except ValueError:
        raise ConfigError(f"config.task: unknown task {name!r}; one of {[t.value for t in Task]}") from None
    grid = _grid(cfg, grid_points)
    raw_targets = _field(cfg, "targets", "config", list)
    if len(raw_targets) != task.n_targets:
        raise ConfigError(f"config.targets: {task.value} takes {task.n_targets} target(s), got {len(raw_targets)}")
    order = sorted(
        range(len(raw_targets)),
        key=lambda k: _field(raw_targets[k], "channel", f"targets[{k}]", int, k + 1),
    )
    channels = [_field(raw_targets[k], "channel", f"targets[{k}]", int, k + 1) for k in order]
    if channels != list(range(1, len(order) + 1)):
        raise ConfigError(f"config.targets: channels must be 1..{len(order)}, got {channels}")
    try:
        targets = tuple(_target(raw_targets[k], grid, f"targets[{k}]") for k in order)
    except WindowTooNarrow as exc:
        raise ConfigError(f"targets: {exc}") from None
    alphas = None
    if task.needs_alphas:
        raw = _field(cfg, "alphas", "config", list)
        if len(raw) != 2:
            raise ConfigError("config.alphas: exactly two entries are required")
        alphas = tuple(
            complex(
                float(_field(a, "re", f"alphas[{k}]", (int, float), 0.0)),
                float(_field(a, "im", f"alphas[{k}]", (int, float), 0.0)),
            )
            for k, a in enumerate(raw)
        )
        total = sum(abs(a) ** 2 for a in alphas)
        if abs(total - 1) > 1e-9:
            raise ConfigError(f"config.alphas: |alpha1|^2 + |alpha2|^2 = {total:.12g}, expected 1")
    thresholds = _field(cfg, "thresholds", "config", dict, {})
    for key, value in thresholds.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"thresholds.{key}: expected a number")
    try:
        return TaskSpec(task, targets, grid, alphas, dict(thresholds))
    except (ValueError, StructuralError) as exc:
        raise ConfigError(f"config: {exc}") from None


# -- output -------------------------------------------------------------------


def write_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    """Comma-separated, header row, LF endings, 17 significant digits."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    lines = [",".join(names)]
    lines += [",".join(f"{x:.16e}" for x in row) for row in data]
    path.write_text("\n".join(lines) + "\n")


def read_csv(path: Path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    names = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {name: data[:, k] for k, name in enumerate(names)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


def _schedule_columns(schedule) -> dict[str, np.ndarray]:
    gamma = np.zeros((2, schedule.grid.n_points))
    eps = np.zeros_like(gamma)
    gamma[: schedule.n_channels] = schedule.gamma
    eps[: schedule.n_channels] = schedule.epsilon
    return {"t_us": schedule.grid.times, "gamma1": gamma[0], "gamma2": gamma[1], "eps1": eps[0], "eps2": eps[1]}


_SYNTH = {
    Task.TWO_LEVEL_GENERATE: lambda s: synthesis.synth_two_level_generate(*s.targets),
    Task.TWO_LEVEL_CATCH: lambda s: synthesis.synth_two_level_catch(*s.targets),
    Task.LAMBDA_GENERATE: lambda s: synthesis.synth_lambda_generate(*s.alphas, *s.targets),
    Task.XI_PAIR: lambda s: synthesis.synth_xi_pair(*s.targets),
    Task.LAMBDA_CATCH: lambda s: synthesis.synth_lambda_catch(*s.targets),
    Task.V_CATCH: lambda s: synthesis.synth_v_catch(*s.alphas, *s.targets),
    Task.LAMBDA_CONVERT: lambda s: synthesis.synth_lambda_convert(*s.targets),
}


def _rejection(exc: Exception) -> dict:
    out = {"realizable": False, "error": str(exc)}
    if isinstance(exc, synthesis.NotRealizable):
        out.update(exc.report.as_dict())
    if isinstance(exc, synthesis.PhaseMismatch):
        out["phase_deviation_rad"] = exc.deviation
    return out


def cmd_synth(config_path, out_dir, grid_points: int | None = None) -> int:
    spec = task_from_config(read_config(config_path), grid_points)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"task": spec.task.value}
    try:
        schedule = _SYNTH[spec.task](spec)
    except (synthesis.NotRealizable, synthesis.PhaseMismatch) as exc:
        report.update(_rejection(exc))
        write_json(out / "synth_report.json", report)
        print(f"not realizable: {exc}", file=sys.stderr)
        return EXIT_UNREALIZABLE
    report["realizable"] = True
    if spec.task in (Task.XI_PAIR, Task.LAMBDA_CONVERT):
        report.update(synthesis.check_tail_dominance(*spec.targets).as_dict())
    report["clamp_report"] = [r.as_dict() for r in schedule.clamp_report]
    write_csv(out / "schedule.csv", _schedule_columns(schedule))
    write_json(out / "synth_report.json", report)
    return EXIT_OK


def _threshold_failures(report, thresholds: dict) -> list[str]:
    failures = []
    if "fidelity_min" in thresholds:
        failures += [f"fidelity {k}={v:.6g}" for k, v in report.fidelities.items() if v < thresholds["fidelity_min"]]
    if "leakage_max" in thresholds:
        failures += [f"leakage {k}={v:.3g}" for k, v in report.leakage.items() if v > thresholds["leakage_max"]]
    if "conservation_max" in thresholds and report.conservation.max_residual > thresholds["conservation_max"]:
        failures.append(f"conservation residual {report.conservation.max_residual:.3g}")
    if "marginal_l1_max" in thresholds:
        failures += [f"marginal {k}={v:.3g}" for k, v in report.marginal_l1.items() if v > thresholds["marginal_l1_max"]]
    return failures


def cmd_verify(config_path, out_dir, grid_points: int | None = None) -> int:
    spec = task_from_config(read_config(config_path), grid_points)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            report = simulate_task(spec)
    except (synthesis.NotRealizable, synthesis.PhaseMismatch) as exc:
        write_json(out / "report.json", {"task": spec.task.value, **_rejection(exc)})
        print(f"not realizable: {exc}", file=sys.stderr)
        return EXIT_UNREALIZABLE
    except (ConsistencyError, NumericalError) as exc:
        # the run itself did not verify: report it like a missed threshold
        write_json(out / "report.json", {"task": spec.task.value, "passed": False, "error": str(exc)})
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    failures = _threshold_failures(report, spec.thresholds)
    body = report.as_dict()
    body["warnings"] = [str(w.message) for w in caught]
    body["thresholds"] = spec.thresholds
    body["passed"] = not failures
    body["failures"] = failures
    write_json(out / "report.json", body)

    em = report.emission
    columns = {"t_us": spec.grid.times}
    for j in range(em.single.shape[0]):
        for x, label in enumerate(em.labels):
            amp = em.single[j, :, x]
            if np.max(np.abs(amp)) > 1e-9:
                tag = label.replace(",", "")
                columns[f"ch{j + 1}_{tag}_re"] = amp.real
                columns[f"ch{j + 1}_{tag}_im"] = amp.imag
    write_csv(out / "emission.csv", columns)
    if em.two_photon is not None:
        d1, d2 = marginals(em.two_photon)
        stride = (spec.grid.n_points - 1) // (em.two_photon.grid.n_points - 1)
        write_csv(
            out / "marginals.csv",
            {
                "t_us": em.two_photon.grid.times,
                "density1": d1,
                "density2": d2,
                "target1": spec.targets[0].density[::stride],
                "target2": spec.targets[1].density[::stride],
            },
        )
    for line in failures:
        print(f"below threshold: {line}", file=sys.stderr)
    return EXIT_THRESHOLD if failures else EXIT_OK


# -- figures ------------------------------------------------------------------

FIGURE_POINTS = 4001


def _figure_grids(n: int) -> dict[str, TimeGrid]:
    return {
        "exponential": TimeGrid(0.0, 1.5, n),
        "gaussian": TimeGrid(-0.75, 0.75, n),
        "delayed": TimeGrid(-0.75, 0.95, n),
    }


def _gamma_panel(task: str, envelopes, alphas=None, *, raw: bool, clamped=None) -> dict[str, np.ndarray]:
    """Rate columns plus flag columns (1 where the raw formula is negative,
    non-finite or sits on a vanishing denominator)."""
    rates, flags = synthesis.raw_rates(task, envelopes, alphas)
    cols: dict[str, np.ndarray] = {"t_us": envelopes[0].grid.times}
    use = rates if raw or clamped is None else clamped.gamma
    for j in range(rates.shape[0]):
        cols[f"gamma{j + 1}"] = use[j]
        cols[f"gamma{j + 1}_flag"] = flags[j].astype(float)
    return cols


def _shape_panel(*envelopes: Envelope) -> dict[str, np.ndarray]:
    cols = {"t_us": envelopes[0].grid.times}
    for j, env in enumerate(envelopes):
        cols[f"xi{j + 1}_abs2"] = env.density
    return cols


def figure_panels(name: str, n_points: int = FIGURE_POINTS, raw: bool = False) -> dict[str, dict[str, np.ndarray]]:
    """Plot-ready columns for panels (a)-(d) of one figure."""
    grids = _figure_grids(n_points)
    a = (1 / math.sqrt(2), 1 / math.sqrt(2))
    panels: dict[str, dict[str, np.ndarray]] = {}
    if name == "fig4":
        ge, gg = grids["exponential"], grids["gaussian"]
        gc1, gc2 = TWO_PI * 15, TWO_PI * 5
        e1 = make_envelope("exponential", ge, gamma_c=gc1)
        e2 = make_envelope("exponential", ge, gamma_c=gc2)
        g1 = make_envelope("gaussian", gg, omega=TWO_PI * 2)
        g2 = make_envelope("gaussian", gg, omega=TWO_PI * 4)
        panels["a"] = _shape_panel(e1, e2)
        panels["b"] = _shape_panel(g1, g2)
        c = _gamma_panel("LambdaGenerate", (e1, e2), a, raw=raw, clamped=synthesis.synth_lambda_generate(*a, e1, e2))
        t = ge.times
        c["gamma1_closed"] = gc1 / (1 + np.exp((gc1 - gc2) * t))
        c["gamma2_closed"] = gc2 / (1 + np.exp((gc2 - gc1) * t))
        panels["c"] = c
        d = _gamma_panel("LambdaGenerate", (g1, g2), a, raw=raw, clamped=synthesis.synth_lambda_generate(*a, g1, g2))
        d["gamma1_two_level"] = synthesis.synth_two_level_generate(g1).gamma[0]
        panels["d"] = d
    elif name in ("fig6", "fig10"):
        gg, gd = grids["gaussian"], grids["delayed"]
        s1 = make_envelope("gaussian", gg, omega=TWO_PI * 2)
        s2 = make_envelope("gaussian", gg, omega=TWO_PI * 4)
        d1 = make_envelope("gaussian", gd, omega=TWO_PI * 2)
        d2 = make_envelope("gaussian", gd, omega=TWO_PI * 2, t_center=0.2)
        task = "XiPair" if name == "fig6" else "LambdaConvert"
        if name == "fig10":
            s2, d2 = s2.with_phase(global_pi=True), d2.with_phase(global_pi=True)
        synth = synthesis.synth_xi_pair if name == "fig6" else synthesis.synth_lambda_convert
        for label, pair in (("a", (s1, s2)), ("b", (d1, d2))):
            shapes = _shape_panel(*pair)
            dens = synthesis.denominators(task, pair)[1]
            shapes["tail1"] = tail_integral(pair[0].density, pair[0].grid)
            shapes["tail2"] = tail_integral(pair[1].density, pair[1].grid)
            panels[label] = shapes
            try:
                clamped = synth(*pair)
            except (synthesis.NotRealizable, synthesis.PhaseMismatch):
                clamped = None
            cols = _gamma_panel(task, pair, raw=raw, clamped=clamped)
            cols["den1"], cols["den2"] = dens
            if name == "fig6":
                cols["gamma2_two_level"] = synthesis.synth_two_level_generate(pair[1]).gamma[0]
            else:
                cols["gamma1_catch_ref"] = synthesis.synth_two_level_catch(pair[0]).gamma[0]
                cols["gamma2_generate_ref"] = synthesis.synth_two_level_generate(pair[1]).gamma[0]
            panels["c" if label == "a" else "d"] = cols
    else:
        raise ConfigError(f"unknown figure {name!r}; one of fig4, fig6, fig10")
    return dict(sorted(panels.items()))


def cmd_figure(name: str, out_dir, grid_points: int | None = None, raw: bool = False) -> int:
    panels = figure_panels(name, grid_points or FIGURE_POINTS, raw)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, cols in panels.items():
        write_csv(out / f"{name}_{label}.csv", cols)
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flyq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("synth", "synthesize control schedules"), ("verify", "simulate and score a task")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON task file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--grid-points", type=int, help="override grid.n_points")
    p = sub.add_parser("figure", help="write plot-ready CSVs for a figure")
    p.add_argument("name", help="fig4, fig6 or fig10")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid-points", type=int, help=f"samples per grid (default {FIGURE_POINTS})")
    p.add_argument("--raw", action="store_true", help="write unclamped rate formulas for every panel")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(args.config, args.out, args.grid_points)
        if args.command == "verify":
            return cmd_verify(args.config, args.out, args.grid_points)
        return cmd_figure(args.name, args.out, args.grid_points, args.raw)
    except (ConfigError, OSError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
