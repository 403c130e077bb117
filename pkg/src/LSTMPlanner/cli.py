""" cli
    Command line front end: single plans, closed-loop runs, seed batches,
    planner comparisons and LP export.
"""

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import yaml

from LSTMPlanner import __version__
from LSTMPlanner.baselines import MipDmConfig, build_mipdm
from LSTMPlanner.config import VARIANTS, merge_profile
from LSTMPlanner.LSTMP import LstmpConfig, build_lstmp
from LSTMPlanner.MIQP import export_lp
from LSTMPlanner.PlanConsts import PlannerKind
from LSTMPlanner.render import render_svg
from LSTMPlanner.sim import (
    METRICS_COLUMNS,
    METRICS_HEADER,
    ScenarioConfig,
    ScenarioTemplate,
    make_planner,
    randomize_scenario,
    run_closed_loop,
)
from LSTMPlanner.thread import BatchResult, threading

logger = logging.getLogger(__name__)

COMMANDS = ("plan", "simulate", "batch", "compare", "export-lp")

#: Header line of Pareto CSV files.
PARETO_HEADER = "# lstmp-pareto v1"

#: Configurations compared when `compare` gets no explicit grid.
DEFAULT_GRID = {
    PlannerKind.LSTMP: [2, 3, 4, 5, 6],
    PlannerKind.MIPDM: [10, 15, 20],
    PlannerKind.HybridAStar: [5, 50, 500],
}

_OPTION = {
    PlannerKind.LSTMP: "lanes",
    PlannerKind.MIPDM: "horizon",
    PlannerKind.HybridAStar: "iters",
}


def parse_seeds(text: str) -> List[int]:
    """Seeds from "A..B" (inclusive), "A,B,C" or a single number"""
    try:
        if ".." in text:
            start, end = text.split("..", 1)
            seeds = list(range(int(start), int(end) + 1))
        else:
            seeds = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"Invalid seed range {text!r}, expected A..B") from None
    if not seeds:
        raise ValueError(f"Seed range {text!r} is empty")
    return seeds


@dataclass
class RunSpec:
    """Everything one CLI invocation does

    Attributes:
        command (str): one of `COMMANDS`
        scenario (Path, optional): scenario YAML, otherwise scenarios are drawn
            from the custom template
        planner (PlannerKind, optional): planner, defaults to the scenario's
        options (dict): `lanes`, `horizon` or `iters` of the planner
        grid (dict): per planner configurations of `compare`
        out (Path): output directory
        seeds (list): seeds of drawn scenarios
        svg (bool): also write SVG figures
        timings (bool): write solve times, zero otherwise
        profile (dict): profile overrides from `--profile` and `--variant`
        template (dict): overrides of the custom template
        threads (int, optional): batch threads
    """

    command: str
    scenario: Optional[Path] = None
    planner: Optional[PlannerKind] = None
    options: Dict[str, int] = field(default_factory=dict)
    grid: Dict[PlannerKind, List[int]] = field(default_factory=dict)
    out: Path = Path("lstmp-out")
    seeds: List[int] = field(default_factory=lambda: [0])
    svg: bool = False
    timings: bool = True
    profile: Dict[str, Any] = field(default_factory=dict)
    template: Dict[str, Any] = field(default_factory=dict)
    threads: Optional[int] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(
                f"Unknown command {self.command!r}, expected one of {COMMANDS}"
            )
        if self.planner is not None:
            self.planner = PlannerKind(self.planner)
        self.out = Path(self.out)

    def scenario_for(
        self, seed: int, planner: Optional[PlannerKind] = None, options=None
    ):
        """Scenario of one run with the command line taking precedence"""
        planner = planner or self.planner
        options = dict(self.options if options is None else options)
        if self.scenario is not None:
            scenario = ScenarioConfig.load(self.scenario)
        else:
            template = ScenarioTemplate.custom(**self.template)
            scenario = randomize_scenario(template, seed)
        if planner is not None and planner != scenario.planner:
            scenario = dataclasses.replace(
                scenario, planner=planner, planner_options={}
            )
        return dataclasses.replace(
            scenario,
            planner_options=dict(scenario.planner_options, **options),
            profile=merge_profile(scenario.profile, self.profile),
        )


def _write_csv(df: pd.DataFrame, path: Path, header: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(header + "\n")
        df.to_csv(f, index=False, lineterminator="\n")
    return path


def _simulate_rows(
    spec: RunSpec, seed: int, planner=None, options=None
) -> List[Dict[str, Any]]:
    scenario = spec.scenario_for(seed, planner, options)
    metrics, _ = run_closed_loop(scenario)
    return [
        metrics.row(seed, scenario.planner.value, scenario.config_label, spec.timings)
    ]


def pareto(metrics: pd.DataFrame) -> pd.DataFrame:
    """Mean cost against median solve time per (planner, config), with the
    non-dominated configurations flagged
    """
    grouped = metrics.groupby(["planner", "config"], sort=False)
    table = grouped.agg(
        runs=("seed", "count"),
        cost=("cost", "mean"),
        solve_ms_median=("solve_ms_median", "median"),
        collisions=("collisions", "sum"),
        lane_changes=("lane_changes", "mean"),
    ).reset_index()
    cost = table["cost"].to_numpy()
    time_ = table["solve_ms_median"].to_numpy()
    dominated = [
        bool(np.any((cost <= c) & (time_ <= t) & ((cost < c) | (time_ < t))))
        for c, t in zip(cost, time_)
    ]
    table["pareto"] = [not d for d in dominated]
    return table


def _plan(spec: RunSpec) -> int:
    scenario = spec.scenario_for(spec.seeds[0])
    planner = make_planner(
        scenario.planner, scenario.full_profile, scenario.planner_options
    )
    problem = scenario.problem(scenario.ego, scenario.vehicles)
    result = planner.plan(problem)
    if not spec.timings:
        result = dataclasses.replace(result, solve_ms=0.0)
    result.write(spec.out / "plan.yaml")
    result.to_dataframe().to_csv(spec.out / "plan.csv", lineterminator="\n")
    if spec.svg:
        for name, style in (("plan.svg", "snapshot"), ("plan-st.svg", "st")):
            render_svg(
                result,
                spec.out / name,
                style,
                road=scenario.road,
                v_ref=scenario.v_ref,
            )
    logger.info("Plan objective %.6g written to %s", result.objective, spec.out)
    return 0


def _simulate(spec: RunSpec) -> int:
    scenario = spec.scenario_for(spec.seeds[0])
    metrics, trace = run_closed_loop(scenario)
    trace.write(spec.out / "trace.yaml", timings=spec.timings)
    row = metrics.row(
        scenario.seed, scenario.planner.value, scenario.config_label, spec.timings
    )
    _write_csv(
        pd.DataFrame([row], columns=METRICS_COLUMNS),
        spec.out / "metrics.csv",
        METRICS_HEADER,
    )
    if spec.svg and len(trace):
        render_svg(trace, spec.out / "snapshot.svg", "snapshot")
        render_svg(trace, spec.out / "st.svg", "st")
    return 0


def _finish_batch(result: BatchResult, path: Path) -> int:
    _write_csv(result.rows, path, METRICS_HEADER)
    if not result.ok:
        failed = ", ".join(str(seed) for seed in sorted(result.failures))
        first = result.failures[min(result.failures)]
        raise RuntimeError(
            f"{len(result.failures)} run(s) failed (seeds {failed}): {first}"
        )
    return 0


def _batch(spec: RunSpec) -> int:
    result = threading(
        spec.seeds, lambda seed: _simulate_rows(spec, seed), spec.threads
    )
    return _finish_batch(result, spec.out / "metrics.csv")


def _compare(spec: RunSpec) -> int:
    grid = spec.grid or DEFAULT_GRID
    if spec.planner is not None:
        grid = {spec.planner: grid.get(spec.planner, DEFAULT_GRID[spec.planner])}

    def job(seed: int) -> List[Dict[str, Any]]:
        rows = []
        for kind, values in grid.items():
            for value in values:
                options = {_OPTION[kind]: value}
                rows.extend(_simulate_rows(spec, seed, kind, options))
        return rows

    result = threading(spec.seeds, job, spec.threads)
    _write_csv(pareto(result.rows), spec.out / "pareto.csv", PARETO_HEADER)
    return _finish_batch(result, spec.out / "metrics.csv")


def _export_lp(spec: RunSpec) -> int:
    """Write the model of the first seed's scenario, other seeds are ignored"""
    scenario = spec.scenario_for(spec.seeds[0])
    problem = scenario.problem(scenario.ego, scenario.vehicles)
    profile = scenario.full_profile
    options = scenario.planner_options
    if scenario.planner == PlannerKind.LSTMP:
        overrides = {"lanes": int(options["lanes"])} if "lanes" in options else {}
        cfg = LstmpConfig.from_profile(profile, **overrides)
        model = build_lstmp(problem, cfg).model
    elif scenario.planner == PlannerKind.MIPDM:
        overrides = {"N": int(options["horizon"])} if "horizon" in options else {}
        cfg = MipDmConfig.from_profile(profile, **overrides)
        model = build_mipdm(problem, cfg).model
    else:
        raise ValueError("Hybrid A* builds no optimization model to export")
    export_lp(model, spec.out / "model.lp")
    logger.info("Exported %r", model)
    return 0


_HANDLERS = {
    "plan": _plan,
    "simulate": _simulate,
    "batch": _batch,
    "compare": _compare,
    "export-lp": _export_lp,
}


def run(spec: RunSpec) -> int:
    """Execute one command

    Args:
        spec (RunSpec): what to run

    Returns:
        int: exit status, 0 on success

    Raises:
        Exception: any failure, after partial batch results were written
    """
    spec.out.mkdir(parents=True, exist_ok=True)
    logger.debug("Running %s into %s", spec.command, spec.out)
    return _HANDLERS[spec.command](spec)


def _profile_overrides(path: Optional[str], variant: Optional[str]) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if variant is not None:
        if variant not in VARIANTS:
            raise ValueError(
                f"Unknown variant {variant!r}, expected one of {sorted(VARIANTS)}"
            )
        overrides = merge_profile(overrides, VARIANTS[variant])
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f) or {}
        if not isinstance(content, Mapping):
            raise ValueError(f"Profile file {path} must hold a mapping")
        overrides = merge_profile(overrides, content.get("profile", content))
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lstmp",
        description="Lane-change planning on multi-lane roads: plans, closed-loop "
        "simulations and planner comparisons.",
    )
    parser.add_argument(
        "--version", action="version", version=f"LSTMPlanner {__version__}"
    )
    parser.add_argument("command", choices=COMMANDS, help="what to run")
    parser.add_argument(
        "--scenario", help="scenario YAML, default draws the custom scenario"
    )
    parser.add_argument(
        "--planner", choices=[kind.value for kind in PlannerKind], help="planner id"
    )
    parser.add_argument(
        "--lanes", type=int, nargs="+", help="LSTMP lanes considered L_p"
    )
    parser.add_argument("--horizon", type=int, nargs="+", help="MIP-DM horizon N")
    parser.add_argument(
        "--iters", type=int, nargs="+", help="hybrid A* expansion budget"
    )
    parser.add_argument("--seeds", default="0", help="seed range A..B")
    parser.add_argument("--out", default="lstmp-out", help="output directory")
    parser.add_argument("--svg", action="store_true", help="also write SVG figures")
    parser.add_argument(
        "--export-lp",
        action="store_true",
        help="also export the model of the first seed's scenario",
    )
    parser.add_argument("--profile", help="YAML profile overriding the defaults")
    parser.add_argument(
        "--variant", choices=sorted(VARIANTS), help="experiment variant"
    )
    parser.add_argument("--road-lanes", type=int, help="lanes of drawn scenarios")
    parser.add_argument(
        "--road-length", type=float, help="length of drawn scenarios, m"
    )
    parser.add_argument("--density", type=float, help="vehicles per lane and km")
    parser.add_argument("--duration", type=float, help="simulated time, s")
    parser.add_argument(
        "--threads", type=int, help="batch threads, default LSTMP_THREADS"
    )
    parser.add_argument(
        "--no-timings",
        action="store_true",
        help="zero solve times for reproducible files",
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="same as --log-level DEBUG"
    )
    return parser


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    options: Dict[str, int] = {}
    grid: Dict[PlannerKind, List[int]] = {}
    for kind, name in _OPTION.items():
        values = getattr(args, name)
        if values:
            options[name] = values[0]
            grid[kind] = list(values)
    planner = PlannerKind(args.planner) if args.planner else None
    if planner is not None:
        options = {k: v for k, v in options.items() if k == _OPTION[planner]}
    template = {
        key: value
        for key, value in (
            ("num_lanes", args.road_lanes),
            ("road_length", args.road_length),
            ("density", args.density),
            ("duration", args.duration),
        )
        if value is not None
    }
    return RunSpec(
        command=args.command,
        scenario=Path(args.scenario) if args.scenario else None,
        planner=planner,
        options=options,
        grid=grid,
        out=Path(args.out),
        seeds=parse_seeds(args.seeds),
        svg=args.svg,
        timings=not args.no_timings,
        profile=_profile_overrides(args.profile, args.variant),
        template=template,
        threads=args.threads,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point

    Returns:
        int: exit status, 1 with a one-line diagnostic on any failure
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, args.log_level),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        spec = spec_from_args(args)
        status = run(spec)
        if args.export_lp and spec.command != "export-lp":
            status = _export_lp(spec) or status
        return status
    except Exception as exc:
        print(f"lstmp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
