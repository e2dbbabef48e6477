"""Experiment drivers: restart batches, aggregation and report output.

Restarts may run concurrently (capped by the TREG_THREADS environment
variable); every restart owns its sampler state and derives its seed from
the root seed and restart index, so reports are byte-identical regardless
of scheduling.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fileio
from .codec import LatentCodec
from .config import (
    RunConfig,
    build_codec,
    build_measurement,
    build_negation,
    build_operator,
    build_prior,
    build_schedule,
    build_solver,
)
from .errors import ConfigError
from .metrics import pixel_variance, psnr, y_mse
from .operators import ForwardOperator, Measurement, flip180
from .prior import ConceptPrior
from .sampler import RunTrace, SolverConfig, run
from .schedule import NoiseSchedule

EXPERIMENT_KINDS = ("ambiguity", "symmetry", "convergence")


@dataclass
class ExperimentReport:
    kind: str
    restarts: list[dict] = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    manifest: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "restarts": self.restarts,
            "aggregates": self.aggregates,
            "manifest": self.manifest,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class RunComponents:
    sched: NoiseSchedule
    prior: ConceptPrior
    codec: LatentCodec
    op: ForwardOperator
    measurement: Measurement
    truth: np.ndarray | None
    solver: SolverConfig


def build_components(rc: RunConfig) -> RunComponents:
    sched = build_schedule(rc)
    prior = build_prior(rc)
    op = build_operator(rc)
    codec = build_codec(rc, op)
    if prior.d != codec.d:
        raise ConfigError(f"prior.d={prior.d} does not match codec.d={codec.d}")
    measurement, truth = build_measurement(rc, op, prior, codec)
    return RunComponents(
        sched=sched, prior=prior, codec=codec, op=op,
        measurement=measurement, truth=truth, solver=build_solver(rc),
    )


def restart_seed(root_seed: int, condition: int, index: int) -> int:
    """Stable per-restart seed, independent of execution order."""
    ss = np.random.SeedSequence([int(root_seed), int(condition), int(index)])
    return int(ss.generate_state(1)[0])


def thread_count() -> int:
    raw = os.environ.get("TREG_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"TREG_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def run_restart_batch(rc: RunConfig, comps: RunComponents, concept: str | None,
                      n: int, condition: int) -> list[tuple[np.ndarray, np.ndarray, RunTrace]]:
    def one(i: int):
        cfg = comps.solver.with_seed(restart_seed(rc["seed"], condition, i))
        state = build_negation(rc, comps.prior, comps.codec)
        return run(cfg, comps.sched, comps.prior, comps.codec, comps.op,
                   comps.measurement, concept, negation_state=state)

    workers = thread_count()
    if workers == 1:
        return [one(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n)))


def nearest_concept(prior: ConceptPrior, z: np.ndarray) -> str:
    dists = {label: float(np.linalg.norm(z - prior.concept_mean(label))) for label in prior.labels}
    return min(dists, key=dists.get)


def _write_restart_files(
    out: Path, tag: str, results, comps: RunComponents, report: ExperimentReport
) -> None:
    h, w = comps.op.in_shape
    for i, (x, _z, trace) in enumerate(results):
        recon = out / f"recon_{tag}_{i:02d}.pgm"
        raw = out / f"raw_{tag}_{i:02d}.f64"
        tr = out / f"trace_{tag}_{i:02d}.csv"
        fileio.write_pgm(recon, x.reshape(h, w))
        fileio.write_raw(raw, x, sigma0=comps.measurement.sigma0, seed=comps.measurement.seed)
        fileio.write_trace_csv(tr, trace)
        report.manifest += [recon.name, raw.name, tr.name]


def _summarize(comps: RunComponents, concept, results, condition: int, root_seed: int):
    rows = []
    for i, (x, z, _trace) in enumerate(results):
        row = {
            "index": i,
            "seed": restart_seed(root_seed, condition, i),
            "concept": concept,
            "mode": nearest_concept(comps.prior, z),
            "y_mse": y_mse(comps.op, x, comps.measurement.y),
        }
        if comps.truth is not None:
            row["psnr"] = psnr(x, comps.truth, peak=1.0)
        rows.append(row)
    return rows


def experiment_ambiguity(rc: RunConfig, out_dir: str | Path) -> ExperimentReport:
    """Conditioned vs unconditioned restarts over one shared measurement."""
    comps = build_components(rc)
    concept = rc["experiment.concept"]
    if concept is None:
        raise ConfigError("experiment.kind=ambiguity requires experiment.concept")
    comps.prior.concept(concept)
    if len(comps.prior.concepts) < 2:
        raise ConfigError("ambiguity experiment needs a prior with at least 2 concepts")
    n = rc["experiment.restarts"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(kind="ambiguity")

    h, w = comps.op.in_shape
    row = rc["experiment.profile_row"]
    profile_row = h // 2 if row is None else row
    agg = {"conditioned_concept": concept, "profile_row": profile_row}
    for tag, cond_concept, condition in (("uncond", None, 0), ("cond", concept, 1)):
        results = run_restart_batch(rc, comps, cond_concept, n, condition)
        report.restarts += _summarize(comps, cond_concept, results, condition, rc["seed"])
        var, profile = pixel_variance(
            [x for x, _, _ in results], shape=(h, w), profile_row=profile_row
        )
        var_file = out / f"variance_{tag}.f64"
        fileio.write_raw(var_file, var)
        profile_file = out / f"profile_{tag}.csv"
        profile_file.write_text(
            "col,variance\n" + "".join(f"{j},{float(v)!r}\n" for j, v in enumerate(profile)),
            encoding="ascii",
        )
        report.manifest += [var_file.name, profile_file.name]
        _write_restart_files(out, tag, results, comps, report)
        modes = [nearest_concept(comps.prior, z) for _, z, _ in results]
        agg[f"{tag}_mode_fractions"] = {
            label: modes.count(label) / n for label in comps.prior.labels
        }
        agg[f"{tag}_mean_pixel_variance"] = float(var.mean())
    agg["conditioned_hit_fraction"] = agg["cond_mode_fractions"][concept]
    report.aggregates = agg
    _finalize(report, out)
    return report


def experiment_symmetry(rc: RunConfig, out_dir: str | Path) -> ExperimentReport:
    """Flip-degenerate phase retrieval: does conditioning break the symmetry?"""
    comps = build_components(rc)
    concept = rc["experiment.concept"]
    if concept is None:
        raise ConfigError("experiment.kind=symmetry requires experiment.concept")
    labels = comps.prior.labels
    if len(labels) != 2:
        raise ConfigError("symmetry experiment needs a prior with exactly 2 concepts")
    flip_label = next(l for l in labels if l != concept)
    if comps.truth is None:
        raise ConfigError("symmetry experiment requires a configured truth image")

    # The degeneracy under test: the operator cannot distinguish the truth
    # from its 180-degree rotation.
    shape = comps.op.in_shape
    fwd = comps.op.apply(comps.truth)
    fwd_flip = comps.op.apply(flip180(comps.truth, shape))
    sym_err = float(np.max(np.abs(fwd - fwd_flip)) / max(np.max(np.abs(fwd)), 1e-300))
    if sym_err > 1e-10:
        raise ConfigError(f"operator is not flip-degenerate (relative error {sym_err:.2e})")

    n = rc["experiment.restarts"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(kind="symmetry")
    agg = {"flip_symmetry_relative_error": sym_err, "conditioned_concept": concept}

    ref_true = comps.truth
    ref_flip = flip180(comps.truth, shape)
    for tag, cond_concept, condition in (("uncond", None, 0), ("cond", concept, 1)):
        results = run_restart_batch(rc, comps, cond_concept, n, condition)
        report.restarts += _summarize(comps, cond_concept, results, condition, rc["seed"])
        _write_restart_files(out, tag, results, comps, report)
        classes = []
        for x, _z, _trace in results:
            d_true = float(np.linalg.norm(x - ref_true))
            d_flip = float(np.linalg.norm(x - ref_flip))
            classes.append("true" if d_true <= d_flip else "flip")
        agg[f"{tag}_class_fractions"] = {
            "true": classes.count("true") / n,
            "flip": classes.count("flip") / n,
        }
        agg[f"{tag}_mean_y_mse"] = float(
            np.mean([y_mse(comps.op, x, comps.measurement.y) for x, _, _ in results])
        )
    report.aggregates = agg
    _finalize(report, out)
    return report


def experiment_convergence(rc: RunConfig, out_dir: str | Path) -> ExperimentReport:
    """Mean and std of the per-step objective curves over restarts."""
    comps = build_components(rc)
    concept = rc["experiment.concept"]
    n = rc["experiment.restarts"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(kind="convergence")

    results = run_restart_batch(rc, comps, concept, n, condition=1)
    report.restarts += _summarize(comps, concept, results, 1, rc["seed"])
    _write_restart_files(out, "conv", results, comps, report)

    traces = [trace for _, _, trace in results]
    ts = [r.t for r in traces[0].records]
    branches = [r.branch for r in traces[0].records]
    dc = np.stack([t.column("data_consistency") for t in traces])
    dsm = np.stack([t.column("dsm_loss") for t in traces])
    lines = ["t,branch,dc_mean,dc_std,dsm_mean,dsm_std"]
    for j, (t, br) in enumerate(zip(ts, branches)):
        cells = [
            float(dc[:, j].mean()), float(dc[:, j].std(ddof=1)),
            float(dsm[:, j].mean()), float(dsm[:, j].std(ddof=1)),
        ]
        lines.append(f"{t},{br}," + ",".join(repr(c) for c in cells))
    curve_file = out / "convergence.csv"
    curve_file.write_text("\n".join(lines) + "\n", encoding="ascii")
    report.manifest.append(curve_file.name)

    gamma_idx = [j for j, br in enumerate(branches) if br == "latent_opt"]
    agg = {}
    if gamma_idx:
        agg["dc_mean_first_gamma"] = float(dc[:, gamma_idx[0]].mean())
        agg["dc_mean_final_gamma"] = float(dc[:, gamma_idx[-1]].mean())
    by_t = {t: j for j, t in enumerate(ts)}
    for probe in (800, 100):
        if probe in by_t:
            agg[f"dsm_mean_t{probe}"] = float(dsm[:, by_t[probe]].mean())
    report.aggregates = agg
    _finalize(report, out)
    return report


def _finalize(report: ExperimentReport, out: Path) -> None:
    report.manifest.append("report.json")
    report.manifest.sort()
    (out / "report.json").write_text(report.to_json(), encoding="ascii")


def run_experiment(rc: RunConfig, out_dir: str | Path) -> ExperimentReport:
    kind = rc["experiment.kind"]
    if kind == "ambiguity":
        return experiment_ambiguity(rc, out_dir)
    if kind == "symmetry":
        return experiment_symmetry(rc, out_dir)
    if kind == "convergence":
        return experiment_convergence(rc, out_dir)
    raise ConfigError(f"experiment.kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")


def solve_once(rc: RunConfig, out_dir: str | Path) -> dict:
    """Single reconstruction with file outputs; returns the summary dict."""
    comps = build_components(rc)
    state = build_negation(rc, comps.prior, comps.codec)
    concept = rc["experiment.concept"]
    if concept is not None:
        comps.prior.concept(concept)
    x, z, trace = run(
        comps.solver, comps.sched, comps.prior, comps.codec, comps.op,
        comps.measurement, concept, negation_state=state,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h, w = comps.op.in_shape
    fileio.write_pgm(out / "recon_0000.pgm", x.reshape(h, w))
    fileio.write_raw(out / "raw_0000.f64", x, sigma0=comps.measurement.sigma0,
                     seed=comps.measurement.seed)
    fileio.write_trace_csv(out / "trace_0000.csv", trace)
    summary = {
        "concept": concept,
        "mode": nearest_concept(comps.prior, z),
        "seed": rc["seed"],
        "y_mse": y_mse(comps.op, x, comps.measurement.y),
        "manifest": ["raw_0000.f64", "recon_0000.pgm", "report.json", "trace_0000.csv"],
    }
    if comps.truth is not None:
        summary["psnr"] = psnr(x, comps.truth, peak=1.0)
    (out / "report.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="ascii"
    )
    return summary
