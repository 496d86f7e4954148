"""``hcv-optctl`` command-line front end.

Usage::

    hcv-optctl <scenario> [--config FILE] [--out DIR]

Exit status is 0 on success, 1 on a numerical failure and 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import SCENARIOS, ConfigError, RunConfig, dump_config, load_config, parse_config
from .integrator import IntegrationError
from .model import ControlInput
from .optimizer import sti_switches
from .scenarios import (
    SUMMARY_HEADER,
    ScenarioOutcome,
    followup_after,
    is_non_decreasing,
    run_constant_dose,
    run_optimized,
    write_schedule_csv,
)
from .steady_states import infected_steady_state, uninfected_steady_state, verify_fixed_point

log = logging.getLogger("hcv_optctl")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

STEADY_STATE_HEADER = (
    "kind", "T", "I", "V_I", "V_NI",
    "res_T", "res_I", "res_V_I", "res_V_NI", "max_residual", "passed",
)


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def steady_state_rows(config: RunConfig):
    params = config.parameters
    control = ControlInput()
    rows = []
    for kind, state in (
        ("uninfected", uninfected_steady_state(params)),
        ("infected", infected_steady_state(params)),
    ):
        if state is None:
            rows.append((kind, *[""] * 9, "none"))
            continue
        rep = verify_fixed_point(state, control, params)
        rows.append(
            (kind, *map(_fmt, state.to_array()), *map(_fmt, rep.residuals),
             _fmt(rep.max_norm), str(rep.passed).lower())
        )
    return rows


class Runner:
    def __init__(self, config: RunConfig, out: Path):
        self.config = config
        self.out = out
        self.summary: list[tuple[str, ...]] = []
        self.notes: list[str] = []

    def _trajectory(self, name, traj):
        traj.to_csv(self.out / f"{name}_trajectory.csv", self.config.output_cadence)

    def _scenario_files(self, name: str, outcome: ScenarioOutcome):
        traj = outcome.treatment_trajectory
        self._trajectory(name, traj)
        write_schedule_csv(traj.control, self.out / f"{name}_schedule.csv", traj.t0, traj.t1)
        if outcome.followup is not None:
            self._trajectory(f"{name}_followup", outcome.followup_trajectory)
        self.summary.append(outcome.summary_row(name))
        self.notes.append(_describe(name, outcome))

    def steady_state(self):
        rows = steady_state_rows(self.config)
        _write_rows(self.out / "steady_states.csv", STEADY_STATE_HEADER, rows)
        for row in rows:
            self.notes.append(",".join(row))

    def simulate(self) -> ScenarioOutcome:
        c = self.config
        outcome = run_constant_dose(
            c.parameters, c.dose, c.horizon, c.detection_threshold, c.integrator
        )
        self._scenario_files("constant", outcome)
        return outcome

    def optimize(self, followup: bool = False) -> ScenarioOutcome:
        c = self.config
        outcome = run_optimized(
            c.parameters, c.weights, c.optimizer, c.integrator,
            c.detection_threshold, c.horizon, c.dose,
        )
        if followup:
            outcome = followup_after(outcome, c.followup_days, c.integrator)
        outcome.optimization.write_log(self.out / "optimizer_log.csv")
        self._scenario_files("optimized", outcome)
        return outcome

    def full(self):
        self.steady_state()
        baseline = self.simulate()
        optimized = self.optimize(followup=True)
        self.notes.append(
            "comparison: end-of-treatment viral load constant-dose "
            f"{baseline.end_of_treatment_viral_load:.6g} IU/ml vs optimized "
            f"{optimized.end_of_treatment_viral_load:.6g} IU/ml"
        )

    def run(self, scenario: str):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config_used.json").write_text(dump_config(self.config) + "\n")
        if scenario == "steady-state":
            self.steady_state()
        elif scenario == "simulate":
            self.simulate()
        elif scenario == "optimize":
            self.optimize()
        elif scenario == "followup":
            self.optimize(followup=True)
        else:
            self.full()
        if self.summary:
            _write_rows(self.out / "summary.csv", SUMMARY_HEADER, self.summary)
        (self.out / "summary.txt").write_text("\n".join(self.notes) + "\n")


def _describe(name: str, outcome: ScenarioOutcome) -> str:
    lines = [
        f"[{name}] label={outcome.label.value} "
        f"nadir={outcome.nadir_viral_load:.6g} "
        f"eot_load={outcome.end_of_treatment_viral_load:.6g} "
        f"threshold={outcome.detection_threshold:g}"
    ]
    opt = outcome.optimization
    if opt is not None:
        eps_sw, rho_sw = sti_switches(opt.schedule)
        lines.append(
            f"  locally optimal schedule: termination={opt.termination.value} "
            f"iterations={opt.iterations} cost {opt.cost_history[0]:.10e} -> {opt.cost:.10e}; "
            f"on/off switches eps={eps_sw} rho={rho_sw}"
        )
    fu = outcome.followup
    if fu is not None:
        T_ok = is_non_decreasing(fu.trajectory)
        lines.append(
            f"  follow-up: label={fu.label.value} eof_load={fu.end_of_followup_viral_load:.6g} "
            f"max_load={fu.max_viral_load:.6g} max_I={fu.max_infected:.6g} "
            f"relapse_day={fu.relapse_time} T_non_decreasing={T_ok}"
        )
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hcv-optctl",
        description="HCV treatment simulation and optimal drug scheduling.",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", help="JSON configuration file (defaults apply when omitted)")
    parser.add_argument("--out", help="output directory (overrides output_dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config) if args.config else parse_config("")
    except ConfigError as exc:
        print(f"hcv-optctl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = replace(config, scenario=args.scenario)
    if args.out:
        config = replace(config, output_dir=args.out)

    runner = Runner(config, Path(config.output_dir))
    try:
        runner.run(config.scenario)
    except IntegrationError as exc:
        print(f"hcv-optctl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"hcv-optctl: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_NUMERICAL
    print((runner.out / "summary.txt").read_text(), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
