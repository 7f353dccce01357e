"""
command-line entry point

    simulate      synthetic campaign of the scenario, target and outlier object
    run           initial orbit, sequential pruning and batch estimation
    validate-up   analytic, multifidelity and numerical propagation against sampling
    print-config  the scenario with every default filled in
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from src.astro import iso_from_epoch, kep_to_cart
from src.config import ScenarioConfig, dump_config, load_config, with_overrides
from src.constants import FLOAT_FORMAT, SECONDS_PER_DAY
from src.cryptographic_utils import artifact_digests, derive_seed
from src.custom_typing import SiteId
from src.data_classes import EstimationResult, IodSolution, Observation, PipelineState, PruneReport, Site, TruthTag
from src.dynamics import hf_propagate
from src.estimate import OrbitBatch, estimation_report, ls_solve, lsar_solve
from src.exceptions import OrbitDeterminationError
from src.iod import iod_expand, select_triplet
from src.manifold import dump_jsonl, initial_box_volume
from src.obs import group_passes, read_observations, read_sites, synthesize, write_observations, write_sites
from src.pipeline import (
    compare_propagations,
    init_from_iod,
    most_informative_epoch,
    outlier_confusion,
    reconstruct_guess,
    retained_boxes,
    run_sequence,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
# artifacts whose bytes depend only on the configuration and the seed
DETERMINISTIC_ARTIFACTS = (
    "observations.csv",
    "sites.csv",
    "history.csv",
    "prune_reports.jsonl",
    "final_manifold.jsonl",
    "estimate_ls.json",
    "estimate_lsar.json",
    "summary.csv",
    "outlier_detection.csv",
    "initial_boxes.csv",
    "pruning_summary.json",
)
STATE_COMPONENTS = ("x", "y", "z", "vx", "vy", "vz")


class StageFailed(Exception):
    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage


@contextmanager
def stage(name: str, timings: Optional[list] = None, iterations: int = 0) -> Iterator[dict]:
    """labels failures with the stage name and records its wall-clock time"""
    info = {"iterations": iterations}
    start = time.perf_counter()
    logger.info("stage %s started", name)
    try:
        yield info
    except (OrbitDeterminationError, ValueError, OSError) as e:
        raise StageFailed(name, e) from e
    seconds = time.perf_counter() - start
    if timings is not None:
        timings.append((name, seconds, info["iterations"]))
    logger.info("stage %s done in %.2f s", name, seconds)


def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, content: dict) -> None:
    with open(path, "w") as stream:
        json.dump(content, stream, indent=2)
        stream.write("\n")


# simulate

def simulate(config: ScenarioConfig) -> list[Observation]:
    """target measurements on the regular passes, outlier-object measurements on the others"""
    t0 = config.truth.t0
    sigmas = config.noise.sigmas()
    target = synthesize(
        config.truth.target(), t0, config.schedule(outlier=False), config.force, sigmas,
        derive_seed(config.seed, "target"), TruthTag.target,
    )
    outliers = synthesize(
        config.truth.outlier(), t0, config.schedule(outlier=True), config.force, sigmas,
        derive_seed(config.seed, "outlier"), TruthTag.outlier,
    )
    return sorted(target + outliers, key=lambda o: o.epoch)


def cmd_simulate(config: ScenarioConfig, out: Path) -> list[Observation]:
    out.mkdir(parents=True, exist_ok=True)
    with stage("simulate"):
        observations = simulate(config)
        write_observations(out / "observations.csv", observations)
        write_sites(out / "sites.csv", config.site_map().values())
    logger.info("%d measurements written to %s", len(observations), out)
    return observations


# run

def initial_orbit(
        config: ScenarioConfig,
        observations: Sequence[Observation],
        sites: Optional[dict[SiteId, Site]] = None,
) -> IodSolution:
    """expanded initial orbit from the first pass holding at least three measurements"""
    sites = config.site_map() if sites is None else sites
    for indices in group_passes(observations):
        if len(indices) >= 3:
            triplet = select_triplet([observations[i] for i in indices])
            return iod_expand(
                triplet,
                sites[triplet.site_id],
                config.loads.z_score,
                eps=config.loads.nli_threshold,
                max_depth=config.loads.max_depth,
                order=config.loads.order,
                zonal_degree=config.loads.lf_zonal_degree,
            )
    raise ValueError("no pass holds three measurements")


def pruning_sequence(
        config: ScenarioConfig,
        iod: IodSolution,
        observations: Sequence[Observation],
        dynamics: str,
        sites: Optional[dict[SiteId, Site]] = None,
) -> tuple[PipelineState, list[PruneReport]]:
    loads = config.loads
    state0 = init_from_iod(iod, loads.nli_threshold, loads.max_depth)
    return run_sequence(
        state0,
        observations,
        config.site_map() if sites is None else sites,
        config.force,
        config.noise.process_noise(),
        loads.z_score,
        eps=loads.nli_threshold,
        max_depth=loads.max_depth,
        lf_zonal_degree=loads.lf_zonal_degree,
        dynamics=dynamics,
    )


def _report_line(report: PruneReport) -> dict:
    line = {
        "epoch": iso_from_epoch(report.epoch),
        "observation": int(report.observation),
        "projected_count": report.projected_count,
        "retained_count": report.retained_count,
        "outlier": report.outlier,
        "ra_bounds": [[b.lower, b.upper] for b in report.ra_bounds],
        "dec_bounds": [[b.lower, b.upper] for b in report.dec_bounds],
        "range_bounds": [[b.lower, b.upper] for b in report.range_bounds],
        "retained": list(report.retained),
    }
    if report.box is not None:
        line["box"] = {
            "ra": [report.box.ra_interval.lower, report.box.ra_interval.upper],
            "dec": [report.box.dec_interval.lower, report.box.dec_interval.upper],
        }
    return line


def write_pruning_artifacts(
        out: Path,
        state: PipelineState,
        reports: Sequence[PruneReport],
        observations: Sequence[Observation],
) -> None:
    _write_csv(
        out / "history.csv",
        ["epoch_iso8601", "observation", "propagation", "projection", "pruning", "merging"],
        [
            [iso_from_epoch(r.epoch), int(report.observation), r.propagation, r.projection, r.pruning, r.merging]
            for r, report in zip(state.history_log, reports)
        ],
    )
    with open(out / "prune_reports.jsonl", "w") as stream:
        for report in reports:
            stream.write(json.dumps(_report_line(report)) + "\n")
    with open(out / "final_manifold.jsonl", "w") as stream:
        dump_jsonl(state.manifold, stream)
    boxes = retained_boxes(state)
    _write_csv(
        out / "initial_boxes.csv",
        ["domain", "variable", "lower", "upper"],
        [
            [d, v, _fmt(lower[v]), _fmt(upper[v])]
            for d, (lower, upper) in enumerate(boxes)
            for v in range(len(lower))
        ],
    )
    informative = most_informative_epoch(state)
    _write_json(out / "pruning_summary.json", {
        "correlated": [int(i) for i in state.correlated],
        "outliers": [int(i) for i in state.outliers],
        "final_domains": len(state.manifold),
        "initial_box_volume": initial_box_volume([d.history for d in state.manifold.domains], 6),
        "most_informative_epoch": None if informative is None else {
            "epoch": iso_from_epoch(informative.epoch),
            "projection": informative.projection,
            "pruning": informative.pruning,
        },
        "confusion": outlier_confusion(observations, state.correlated, state.outliers),
    })


def _truth_at(config: ScenarioConfig, epoch: float, observations: Sequence[Observation]) -> Optional[np.ndarray]:
    if all(o.truth_tag == TruthTag.unknown for o in observations):
        return None
    state = np.array(kep_to_cart(config.truth.target()), dtype=float)
    return hf_propagate(state, config.truth.t0, epoch, config.force)


def _summary_row(
        result: EstimationResult,
        used: int,
        outliers: int,
        truth: Optional[np.ndarray],
) -> list:
    sigma3 = [3.0 * math.sqrt(max(v, 0.0)) for v in np.diag(result.P0)]
    if truth is None:
        errors = [""] * 6
        norms = ["", ""]
    else:
        delta = result.x0 - truth
        errors = [_fmt(v) for v in delta]
        norms = [_fmt(np.linalg.norm(delta[:3])), _fmt(np.linalg.norm(delta[3:]))]
    return [
        result.estimator, used, outliers, result.iterations, result.termination.value,
        *errors, *[_fmt(s) for s in sigma3], *norms,
    ]


SUMMARY_HEADER = [
    "estimator", "measurements", "outliers", "iterations", "termination",
    *[f"error_{c}" for c in STATE_COMPONENTS],
    *[f"sigma3_{c}" for c in STATE_COMPONENTS],
    "position_error_km", "velocity_error_km_s",
]


def load_sites(config: ScenarioConfig, obs_path: Path, observations: Sequence[Observation]) -> dict[SiteId, Site]:
    """
    configured sites, updated from a sites.csv lying next to the observation
    file; every site the observations name must be known
    """
    sites = config.site_map()
    listed = obs_path.parent / "sites.csv"
    if listed.is_file():
        sites.update(read_sites(listed))
    unknown = sorted({o.site_id for o in observations} - set(sites))
    if unknown:
        raise ValueError(f"observations name unknown sites {unknown}, list them in {listed}")
    return sites


def cmd_run(config: ScenarioConfig, out: Path, obs_path: Optional[Path] = None) -> dict[str, EstimationResult]:
    out.mkdir(parents=True, exist_ok=True)
    timings: list = []
    sites = config.site_map()
    if obs_path is None:
        observations = cmd_simulate(config, out)
    else:
        with stage("read"):
            observations = read_observations(obs_path)
            sites = load_sites(config, obs_path, observations)
            write_observations(out / "observations.csv", observations)
            write_sites(out / "sites.csv", sites.values())

    with stage("iod", timings) as info:
        iod = initial_orbit(config, observations, sites)
        info["iterations"] = iod.iterations

    used = list(observations)
    guess = iod.state
    outlier_count = 0
    if config.loads.pruning:
        runs = [config.loads.pruning_dynamics]
        if config.estimator.compare_lf_pruning:
            runs.append("lf" if runs[0] == "mf" else "mf")
        detection_rows = []
        for dynamics in runs:
            with stage(f"pruning_{dynamics}", timings) as info:
                state, reports = pruning_sequence(config, iod, observations, dynamics, sites)
                info["iterations"] = len(reports)
            counts = outlier_confusion(observations, state.correlated, state.outliers)
            detection_rows.append([dynamics, *counts.values()])
            if dynamics == config.loads.pruning_dynamics:
                with stage("reconstruct"):
                    write_pruning_artifacts(out, state, reports, observations)
                    used = [observations[i] for i in sorted(state.correlated)]
                    outlier_count = len(state.outliers)
                    guess = reconstruct_guess(state, iod.manifold, used, sites, config.force)
        _write_csv(
            out / "outlier_detection.csv",
            ["dynamics", "true_positives", "false_negatives", "false_positives", "true_negatives"],
            detection_rows,
        )

    results = {}
    with stage("batch"):
        batch = OrbitBatch(iod.epoch, used, sites, config.force)
    solvers = {"ls": ls_solve, "lsar": lsar_solve}
    for name in config.estimator.names:
        with stage(name, timings) as info:
            result = solvers[name](guess, batch, config.estimator.tolerances())
            info["iterations"] = result.iterations
            _write_json(out / f"estimate_{name}.json", estimation_report(result, used))
        results[name] = result

    truth = _truth_at(config, iod.epoch, observations)
    _write_csv(
        out / "summary.csv",
        SUMMARY_HEADER,
        [_summary_row(r, len(used), outlier_count, truth) for r in results.values()],
    )
    _write_csv(out / "timings.csv", ["stage", "seconds", "iterations"], [[s, _fmt(t), n] for s, t, n in timings])
    _write_json(out / "artifact_digests.json", artifact_digests(out, DETERMINISTIC_ARTIFACTS))
    return results


# validate-up

def cmd_validate_up(config: ScenarioConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with stage("simulate"):
        observations = simulate(config)
    with stage("iod"):
        iod = initial_orbit(config, observations)
    with stage("validate-up"):
        rows = compare_propagations(
            iod,
            iod.epoch + config.validation.span_days * SECONDS_PER_DAY,
            config.force,
            config.validation.samples,
            derive_seed(config.seed, "monte_carlo"),
            lf_zonal_degree=config.loads.lf_zonal_degree,
            eps=config.loads.nli_threshold,
            max_depth=config.loads.max_depth,
        )
        _write_csv(
            out / "up_validation.csv",
            ["method", *[f"rmse_{c}" for c in STATE_COMPONENTS], "seconds"],
            [[row.method, *[_fmt(v) for v in row.rmse], _fmt(row.seconds)] for row in rows],
        )


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="scenario yaml file, defaults when omitted")
    common.add_argument("--seed", type=int, default=None, help="master seed, overrides the scenario")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="python -m src", description="robust batch orbit determination")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate_parser = commands.add_parser("simulate", parents=[common], help="write a synthetic campaign")
    simulate_parser.add_argument("--out", type=Path, default=Path("out"))

    run_parser = commands.add_parser("run", parents=[common], help="determine the orbit from a campaign")
    run_parser.add_argument("--out", type=Path, default=Path("out"))
    run_parser.add_argument("--obs", type=Path, default=None, help="observation csv, simulated when omitted")
    run_parser.add_argument("--no-pruning", action="store_true", help="feed every measurement to the estimators")
    run_parser.add_argument("--estimator", choices=["ls", "lsar", "both"], default=None)

    up_parser = commands.add_parser("validate-up", parents=[common], help="compare propagation schemes")
    up_parser.add_argument("--out", type=Path, default=Path("out"))

    commands.add_parser("print-config", parents=[common], help="print the scenario with defaults filled in")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        with stage("config"):
            config = with_overrides(
                load_config(args.config),
                seed=args.seed,
                pruning=False if getattr(args, "no_pruning", False) else None,
                estimator=getattr(args, "estimator", None),
            )
        if args.command == "print-config":
            sys.stdout.write(dump_config(config))
        elif args.command == "simulate":
            cmd_simulate(config, args.out)
        elif args.command == "run":
            cmd_run(config, args.out, args.obs)
        else:
            cmd_validate_up(config, args.out)
    except StageFailed as e:
        logger.error("%s", e)
        return 1
    return 0


__all__ = [
    "StageFailed",
    "stage",
    "simulate",
    "cmd_simulate",
    "initial_orbit",
    "load_sites",
    "pruning_sequence",
    "write_pruning_artifacts",
    "cmd_run",
    "cmd_validate_up",
    "build_parser",
    "main",
]
