"""Acceptance suite: every criterion at its stated tolerance, one printed
pass/fail line per criterion. Runs on the shipped fixtures."""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from treg.cli import main as cli_main
from treg.codec import decode
from treg.config import load_config
from treg.consistency import CGParams, cg_solve, proximal_objective
from treg.experiments import build_components, build_negation, run_experiment
from treg.negation import embed_image, make_embedding_state, negate_step
from treg.prior import ConceptPrior, eps_null, make_concept, tweedie, uniform_weights
from treg.sampler import SolverConfig, ddim_step, run
from treg.schedule import make_schedule, subsample_steps
from treg.validate import (
    suite_adjoint_dot_tests,
    suite_dense_cg,
    suite_dps_gradients,
    suite_residual_gradients,
    suite_tweedie_quadrature,
)

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


def test_criterion_01_tweedie_oracles():
    t0 = time.monotonic()
    result = suite_tweedie_quadrature(cases=100)
    elapsed = time.monotonic() - t0
    ok = result.ok and elapsed < 10.0
    report(
        "criterion 01 tweedie oracle agreement",
        ok,
        f"quadrature worst {result.worst:.2e} (tol 1e-6), {result.detail}, {elapsed:.1f}s < 10s",
    )


def test_criterion_02_cg_oracle_and_default_reduction():
    dense = suite_dense_cg(cases=50)

    rc = load_config(FIXTURES / "convergence.cfg")
    comps = build_components(rc)
    # warm start the solver actually uses: the decoded pivot of the prompted
    # concept, far from the measurement's true class
    anchor = decode(comps.codec, comps.prior.concept_mean("alpha"))
    params = CGParams(lam=1e-4, iters=5)
    f0 = proximal_objective(comps.op, comps.measurement.y, anchor, params.lam, anchor)
    x5 = cg_solve(comps.op, comps.measurement.y, anchor, params, warm_start=anchor)
    f5 = proximal_objective(comps.op, comps.measurement.y, anchor, params.lam, x5)
    reduction = 1.0 - f5 / f0
    ok = dense.ok and reduction >= 0.90
    report(
        "criterion 02 cg oracle + default reduction",
        ok,
        f"dense worst {dense.worst:.2e} (tol 1e-8); defaults reduce objective by "
        f"{100 * reduction:.1f}% (>= 90%) on the blur fixture",
    )


def test_criterion_03_adjoint_dot_tests():
    result = suite_adjoint_dot_tests(pairs=100)
    report(
        "criterion 03 adjoint dot tests",
        result.ok,
        f"worst relative error {result.worst:.2e} (tol 1e-10), {result.detail}",
    )


def test_criterion_04_gradient_checks():
    res = suite_residual_gradients(cases=50)
    dps = suite_dps_gradients(cases=50)
    ok = res.ok and dps.ok
    report(
        "criterion 04 gradient checks",
        ok,
        f"residual worst {res.worst:.2e}, dps/jacobian worst {dps.worst:.2e} (tol 1e-5)",
    )


def test_criterion_05_sampler_reduction_and_moments():
    prior = ConceptPrior(
        d=2,
        concepts=(
            make_concept(
                "c",
                [(0.7, np.array([1.2, 0.4]), 0.04), (0.3, np.array([-0.8, 1.0]), 0.04)],
            ),
        ),
    )
    sched = make_schedule(1000, 0.00085, 0.012)
    from treg.codec import make_codec
    from treg.operators import make_box_inpaint, simulate_measurement

    codec = make_codec(4, 2, seed=3)
    op = make_box_inpaint(np.ones((2, 2)))
    meas = simulate_measurement(op, np.zeros(4), 0.1, seed=5)
    steps = subsample_steps(sched, 200)

    def reference_ddim(z):
        # independent of sampler.run: direct recursion on the null prediction
        for i, t in enumerate(steps):
            t_prev = steps[i + 1] if i + 1 < len(steps) else 0
            eps = eps_null(prior, z, t, uniform_weights(prior), sched)
            z = ddim_step(tweedie(z, t, eps, sched), eps, sched.alpha_bar[t_prev])
        return z

    worst = 0.0
    for seed in (11, 42, 1999):
        cfg = SolverConfig(nfe=200, gamma_tmax=0, stochasticity="deterministic", seed=seed)
        captured = []
        _, z_final, _ = run(
            cfg, sched, prior, codec, op, meas, None,
            observer=lambda info: captured.append(info),
        )
        z_ref = captured[0]["z_t"].copy()
        for i in range(len(steps)):
            t_prev = steps[i + 1] if i + 1 < len(steps) else 0
            t = steps[i]
            eps = eps_null(prior, z_ref, t, uniform_weights(prior), sched)
            z_ref = ddim_step(tweedie(z_ref, t, eps, sched), eps, sched.alpha_bar[t_prev])
            worst = max(worst, float(np.max(np.abs(z_ref - captured[i]["z_next"]))))

    n = 10_000
    z_batch = np.random.default_rng(123).standard_normal((n, 2))
    samples = reference_ddim(z_batch)
    mu = 0.7 * np.array([1.2, 0.4]) + 0.3 * np.array([-0.8, 1.0])
    cov = 0.04 * np.eye(2)
    for w, m in ((0.7, np.array([1.2, 0.4])), (0.3, np.array([-0.8, 1.0]))):
        dm = m - mu
        cov += w * np.outer(dm, dm)
    mean_err = float(np.linalg.norm(samples.mean(axis=0) - mu) / np.linalg.norm(mu))
    trace_err = float(abs(np.trace(np.cov(samples.T)) - np.trace(cov)) / np.trace(cov))
    ok = worst <= 1e-12 and mean_err <= 0.02 and trace_err <= 0.05
    report(
        "criterion 05 plain-ddim reduction + moments",
        ok,
        f"step-for-step worst {worst:.2e} (tol 1e-12); mean err {100 * mean_err:.2f}% "
        f"(<= 2%), cov-trace err {100 * trace_err:.2f}% (<= 5%) over 10^4 samples",
    )


def test_criterion_06_ambiguity_reduction(tmp_path):
    t0 = time.monotonic()
    rc = load_config(FIXTURES / "ambiguity.cfg")
    assert rc["measurement.sigma0"] == pytest.approx(np.sqrt(0.01))
    assert rc["experiment.restarts"] == 20
    rep = run_experiment(rc, tmp_path)
    elapsed = time.monotonic() - t0
    agg = rep.aggregates
    hit = agg["conditioned_hit_fraction"]
    uncond = agg["uncond_mode_fractions"]
    var_ok = agg["cond_mean_pixel_variance"] < agg["uncond_mean_pixel_variance"]
    ok = (
        hit >= 0.95
        and min(uncond.values()) >= 0.2
        and var_ok
        and elapsed < 120.0
    )
    report(
        "criterion 06 ambiguity reduction",
        ok,
        f"conditioned hit {hit:.2f} (>= 0.95); unconditioned fractions {uncond} (each >= 0.2); "
        f"variance {agg['cond_mean_pixel_variance']:.2e} < {agg['uncond_mean_pixel_variance']:.2e}; "
        f"{elapsed:.0f}s < 120s",
    )


def test_criterion_07_symmetry_breaking(tmp_path):
    t0 = time.monotonic()
    rc = load_config(FIXTURES / "symmetry.cfg")
    assert rc["solver.omega1"] == 4.0 and rc["solver.omega2"] == 4.0
    assert rc["solver.gamma_mod"] == 10 and rc["solver.gamma_tmax"] == rc["schedule.T"]
    assert rc["experiment.restarts"] == 20
    rep = run_experiment(rc, tmp_path)
    elapsed = time.monotonic() - t0
    agg = rep.aggregates
    sym_err = agg["flip_symmetry_relative_error"]
    cond_flip = agg["cond_class_fractions"]["flip"]
    uncond = agg["uncond_class_fractions"]
    ok = (
        sym_err <= 1e-10
        and cond_flip <= 0.05
        and min(uncond.values()) >= 0.2
        and elapsed < 300.0
    )
    report(
        "criterion 07 symmetry breaking",
        ok,
        f"operator flip degeneracy {sym_err:.1e} (exact to rounding); conditioned flip fraction "
        f"{cond_flip:.2f} (<= 0.05); unconditioned {uncond} (each >= 0.2); {elapsed:.0f}s < 300s",
    )


def test_criterion_08_convergence_traces(tmp_path):
    rc = load_config(FIXTURES / "convergence.cfg")
    assert rc["experiment.restarts"] == 20
    rep = run_experiment(rc, tmp_path)
    agg = rep.aggregates
    ratio = agg["dc_mean_final_gamma"] / agg["dc_mean_first_gamma"]
    dsm_ok = agg["dsm_mean_t100"] <= agg["dsm_mean_t800"]
    ok = ratio <= 0.1 and dsm_ok
    report(
        "criterion 08 convergence traces",
        ok,
        f"data-consistency final/first gamma ratio {ratio:.3f} (<= 0.1); "
        f"dsm t=100 {agg['dsm_mean_t100']:.2f} <= t=800 {agg['dsm_mean_t800']:.2f}",
    )


def test_criterion_09_adaptive_negation():
    # (a) direct strict descent away from the cap
    rng = np.random.default_rng(31)
    strict = True
    for trial in range(200):
        refs = rng.standard_normal((3, 64))
        state = make_embedding_state(
            ["a", "b", "c"], refs, 6, seed=trial, kappa=1.0, lr=float(rng.uniform(0.01, 0.3))
        )
        state.c_null = rng.standard_normal(6)
        x = rng.standard_normal(64)
        e = embed_image(state, x)
        before = float(e @ state.c_null)
        negate_step(state, x)
        strict = strict and float(e @ state.c_null) < before

    # (b) per-step descent inside a fixture run
    rc = load_config(FIXTURES / "ambiguity.cfg")
    comps = build_components(rc)
    state = build_negation(rc, comps.prior, comps.codec)
    c_hist = [state.c_null.copy()]
    gamma_imgs = []

    def observe(info):
        if info["branch"] == "latent_opt":
            gamma_imgs.append((len(c_hist) - 1, info["x0_y"]))
        c_hist.append(state.c_null.copy())

    run(
        comps.solver, comps.sched, comps.prior, comps.codec, comps.op,
        comps.measurement, "alpha", negation_state=state, observer=observe,
    )
    in_run = True
    for idx, x_hat in gamma_imgs:
        e = embed_image(state, x_hat)
        in_run = in_run and float(e @ c_hist[idx + 1]) < float(e @ c_hist[idx])

    # (c) lr = 0 is bit-identical to the negation-disabled ablation
    base = comps.solver
    state_a = build_negation(rc, comps.prior, comps.codec)
    state_a.lr = 0.0
    traj_a = []
    xa, za, tra = run(
        base, comps.sched, comps.prior, comps.codec, comps.op, comps.measurement,
        "alpha", negation_state=state_a,
        observer=lambda info: traj_a.append(info["z_next"]),
    )
    from dataclasses import replace

    state_b = build_negation(rc, comps.prior, comps.codec)
    traj_b = []
    xb, zb, trb = run(
        replace(base, negation_enabled=False), comps.sched, comps.prior, comps.codec,
        comps.op, comps.measurement, "alpha", negation_state=state_b,
        observer=lambda info: traj_b.append(info["z_next"]),
    )
    bit_identical = (
        all(np.array_equal(a, b) for a, b in zip(traj_a, traj_b))
        and np.array_equal(xa, xb)
        and np.array_equal(za, zb)
        and [r.__dict__ for r in tra.records] == [r.__dict__ for r in trb.records]
    )
    ok = strict and in_run and bit_identical
    report(
        "criterion 09 adaptive negation",
        ok,
        f"strict descent on 200 random states: {strict}; on all {len(gamma_imgs)} fixture "
        f"update steps: {in_run}; lr=0 bit-identical to disabled ablation: {bit_identical}",
    )


def _dir_bytes(path: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def test_criterion_10_determinism(tmp_path):
    env_before = os.environ.get("TREG_THREADS")
    try:
        results = {}
        os.environ["TREG_THREADS"] = "1"
        cfg = str(FIXTURES / "solve_inpaint.cfg")
        assert cli_main(["solve", "--config", cfg, "--out", str(tmp_path / "s1")]) == 0
        assert cli_main(["solve", "--config", cfg, "--out", str(tmp_path / "s2")]) == 0
        results["solve"] = _dir_bytes(tmp_path / "s1") == _dir_bytes(tmp_path / "s2")

        for kind, cfg_name in (
            ("ambiguity", "ambiguity.cfg"),
            ("convergence", "convergence.cfg"),
            ("symmetry", "symmetry.cfg"),
        ):
            cfg = str(FIXTURES / cfg_name)
            os.environ["TREG_THREADS"] = "1"
            assert cli_main([
                "experiment", kind, "--config", cfg, "--restarts", "3",
                "--out", str(tmp_path / f"{kind}_a"),
            ]) == 0
            os.environ["TREG_THREADS"] = "3"
            assert cli_main([
                "experiment", kind, "--config", cfg, "--restarts", "3",
                "--out", str(tmp_path / f"{kind}_b"),
            ]) == 0
            results[kind] = _dir_bytes(tmp_path / f"{kind}_a") == _dir_bytes(
                tmp_path / f"{kind}_b"
            )
    finally:
        if env_before is None:
            os.environ.pop("TREG_THREADS", None)
        else:
            os.environ["TREG_THREADS"] = env_before
    ok = all(results.values())
    report(
        "criterion 10 determinism",
        ok,
        f"byte-identical outputs (incl. TREG_THREADS=3): {results}",
    )
