"""Independent oracle suites for the core numerics.

Each suite checks an implementation against a second route that shares no
code with it: brute-force quadrature for the posterior mean, randomized
dot tests for adjoints, dense direct solves for CG, and central finite
differences for analytic gradients. The CLI ``validate`` subcommand and the
acceptance tests both run these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import decode, make_codec
from .consistency import CGParams, cg_solve
from .operators import (
    ForwardOperator,
    make_box_inpaint,
    make_downsample,
    make_gaussian_blur,
    make_phase_retrieval,
)
from .prior import (
    ConceptPrior,
    eps_cond,
    flat_components,
    make_concept,
    posterior_mean_jacobian,
    posterior_mean_oracle,
    tweedie,
)
from .sampler import dps_gradient
from .schedule import NoiseSchedule, make_schedule


@dataclass
class SuiteResult:
    name: str
    ok: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"[{status}] {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} {self.detail}"


def quadrature_posterior_mean(
    prior: ConceptPrior, z_t: np.ndarray, t: int, concept: str | None, sched: NoiseSchedule,
    points_per_sigma: int = 16, window_sigmas: float = 16.0,
) -> np.ndarray:
    """E[z0 | z_t] by brute-force grid integration (d <= 2).

    Integrates z0 * p(z0) * N(z_t; sqrt(abar) z0, (1-abar) I) component by
    component on a tensor grid. Each component's window and grid step come
    from the elementary two-Gaussian product rule (center between prior
    mean and z_t / sqrt(abar), width below both factors' widths), so the
    integrand is fully resolved even when the posterior is much narrower
    than the prior. Everything is accumulated in log scale.
    """
    z_t = np.asarray(z_t, dtype=float)
    d = prior.d
    if d > 2:
        raise ValueError("quadrature oracle supports d <= 2 only")
    abar = float(sched.alpha_bar[t])
    w, means, var = flat_components(prior, concept)
    c = z_t / np.sqrt(abar)  # likelihood center in z0 coordinates
    s2 = (1.0 - abar) / abar  # likelihood variance in z0 coordinates

    shifts = []
    numers = []
    denoms = []
    for wi, mi, vi in zip(w, means, var):
        prod_var = vi * s2 / (vi + s2)
        prod_sig = np.sqrt(prod_var)
        center = (mi * s2 + c * vi) / (vi + s2)
        step = prod_sig / points_per_sigma
        n = int(2 * window_sigmas * points_per_sigma) + 1
        axes = [center[p] + step * (np.arange(n) - n // 2) for p in range(d)]
        if d == 1:
            grid = axes[0][:, None]
        else:
            g0, g1 = np.meshgrid(axes[0], axes[1], indexing="ij")
            grid = np.stack([g0.ravel(), g1.ravel()], axis=1)
        log_f = (
            np.log(wi)
            - 0.5 * d * np.log(2.0 * np.pi * vi)
            - np.sum((grid - mi) ** 2, axis=1) / (2.0 * vi)
            - np.sum((z_t - np.sqrt(abar) * grid) ** 2, axis=1) / (2.0 * (1.0 - abar))
        )
        shift = float(log_f.max())
        f = np.exp(log_f - shift)
        vol = step**d
        shifts.append(shift)
        denoms.append(float(f.sum()) * vol)
        numers.append((f[:, None] * grid).sum(axis=0) * vol)

    top = max(shifts)
    scale = np.exp(np.asarray(shifts) - top)
    denom = float(scale @ np.asarray(denoms))
    numer = scale @ np.stack(numers)
    return numer / denom


def _random_prior(rng: np.random.Generator, d: int, max_components: int = 3) -> ConceptPrior:
    n = int(rng.integers(1, max_components + 1))
    raw_w = rng.uniform(0.2, 1.0, n)
    w = raw_w / raw_w.sum()
    comps = [
        (float(w[i]), rng.uniform(-2.0, 2.0, d), float(rng.uniform(0.05, 0.6)))
        for i in range(n)
    ]
    return ConceptPrior(d=d, concepts=(make_concept("c0", comps),))


def suite_tweedie_quadrature(cases: int = 100, seed: int = 2024) -> SuiteResult:
    """tweedie(eps_cond) vs the quadrature oracle and the closed-form oracle."""
    rng = np.random.default_rng(seed)
    sched = make_schedule(100, 0.001, 0.05)
    worst_quad = 0.0
    worst_closed = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, 3))
        prior = _random_prior(rng, d)
        t = int(rng.integers(1, sched.T + 1))
        z = rng.normal(0.0, 1.5, d)
        est = tweedie(z, t, eps_cond(prior, z, t, "c0", sched), sched)
        closed = posterior_mean_oracle(prior, z, t, "c0", sched)
        quad = quadrature_posterior_mean(prior, z, t, "c0", sched)
        worst_closed = max(worst_closed, float(np.max(np.abs(est - closed))))
        worst_quad = max(worst_quad, float(np.max(np.abs(est - quad))))
    ok = worst_quad <= 1e-6 and worst_closed <= 1e-10
    return SuiteResult(
        "tweedie vs quadrature / closed-form oracles",
        ok,
        worst_quad,
        1e-6,
        detail=f"closed-form worst={worst_closed:.3e} (tol 1e-10), {cases} cases",
    )


def _oracle_operators(rng: np.random.Generator) -> list[ForwardOperator]:
    mask = (rng.uniform(size=(8, 8)) > 0.3).astype(float)
    return [
        make_downsample((8, 8), 2),
        make_gaussian_blur((8, 8), 5, 1.2),
        make_box_inpaint(mask),
    ]


def suite_adjoint_dot_tests(pairs: int = 100, seed: int = 7) -> SuiteResult:
    """<A x, y> == <x, A^T y> for every linear operator kind."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for op in _oracle_operators(rng):
        for _ in range(pairs):
            x = rng.standard_normal(op.m)
            y = rng.standard_normal(op.out_dim)
            lhs = float(op.apply(x) @ y)
            rhs = float(x @ op.adjoint(y))
            scale = max(abs(lhs), abs(rhs), 1e-300)
            worst = max(worst, abs(lhs - rhs) / scale)
    return SuiteResult("adjoint dot tests", worst <= 1e-10, worst, 1e-10,
                       detail=f"{pairs} pairs x 3 operator kinds")


def dense_matrix(op: ForwardOperator) -> np.ndarray:
    cols = []
    for j in range(op.m):
        e = np.zeros(op.m)
        e[j] = 1.0
        cols.append(op.apply(e))
    return np.stack(cols, axis=1)


def suite_dense_cg(cases: int = 50, seed: int = 5) -> SuiteResult:
    """cg_solve with iters=m vs a dense direct solve of the normal equations."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    ops = []
    for _ in range(cases):
        kind = int(rng.integers(0, 3))
        if kind == 0:
            ops.append(make_downsample((8, 8), int(rng.choice([2, 4]))))
        elif kind == 1:
            ops.append(make_gaussian_blur((8, 8), 5, float(rng.uniform(0.6, 2.0))))
        else:
            ops.append(make_box_inpaint((rng.uniform(size=(8, 8)) > 0.4).astype(float)))
    for op in ops:
        lam = float(rng.uniform(1e-3, 1.0))
        anchor = rng.standard_normal(op.m)
        y = rng.standard_normal(op.out_dim)
        a = dense_matrix(op)
        x_direct = np.linalg.solve(lam * np.eye(op.m) + a.T @ a, lam * anchor + a.T @ y)
        x_cg = cg_solve(op, y, anchor, CGParams(lam=lam, iters=op.m), warm_start=anchor)
        worst = max(worst, float(np.linalg.norm(x_cg - x_direct) / np.linalg.norm(x_direct)))
    return SuiteResult("cg vs dense direct solve", worst <= 1e-8, worst, 1e-8,
                       detail=f"{cases} random systems, m=64")


def central_difference_gradient(f, x: np.ndarray, step: float) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def suite_residual_gradients(cases: int = 50, seed: int = 13) -> SuiteResult:
    """residual_gradient (incl. phase retrieval) vs central differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(cases):
        kind = i % 4
        if kind == 0:
            op = make_downsample((4, 4), 2)
        elif kind == 1:
            op = make_gaussian_blur((4, 4), 3, 0.9)
        elif kind == 2:
            op = make_box_inpaint((rng.uniform(size=(4, 4)) > 0.4).astype(float))
        else:
            op = make_phase_retrieval((4, 4), 2)
        x = rng.uniform(0.4, 1.6, op.m)  # positive images keep DFT bins away from 0
        y = op.apply(rng.uniform(0.4, 1.6, op.m)) + 0.05 * rng.standard_normal(op.out_dim)
        grad = op.residual_gradient(x, y)

        def objective(v, op=op, y=y):
            r = y - op.apply(v)
            return float(r @ r)

        fd = central_difference_gradient(objective, x, 1e-6)
        worst = max(worst, float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300)))
    return SuiteResult("residual gradients vs finite differences", worst <= 1e-5, worst, 1e-5,
                       detail=f"{cases} instances over 4 operator kinds")


def suite_dps_gradients(cases: int = 50, seed: int = 29) -> SuiteResult:
    """dps_gradient and the posterior-mean Jacobian vs central differences."""
    rng = np.random.default_rng(seed)
    sched = make_schedule(50, 0.002, 0.04)
    worst = 0.0
    for i in range(cases):
        d = int(rng.integers(1, 3))
        n1 = int(rng.integers(1, 3))
        n2 = int(rng.integers(1, 3))

        def comps(n):
            raw = rng.uniform(0.3, 1.0, n)
            return [
                (float(v / raw.sum()), rng.uniform(-1.5, 1.5, d), float(rng.uniform(0.1, 0.5)))
                for v in raw
            ]

        prior = ConceptPrior(
            d=d,
            concepts=(make_concept("a", comps(n1)), make_concept("b", comps(n2))),
        )
        if i % 2 == 0:
            op = make_gaussian_blur((4, 4), 3, 1.0)
        else:
            op = make_phase_retrieval((4, 4), 2)
        codec = make_codec(op.m, d, seed=int(rng.integers(0, 1 << 30)))
        t = int(rng.integers(1, sched.T + 1))
        z = rng.normal(0.0, 1.2, d)
        y = op.apply(rng.uniform(0.4, 1.4, op.m))
        omega2 = float(rng.choice([0.0, 1.0, 4.0]))
        concept = "a" if omega2 != 0.0 else None
        grad = dps_gradient(prior, codec, op, y, z, t, sched, concept, None, omega2)

        def objective(v):
            pm_null = posterior_mean_oracle(prior, v, t, None, sched)
            if omega2 == 0.0 or concept is None:
                z0 = pm_null
            else:
                z0 = (1.0 - omega2) * pm_null + omega2 * posterior_mean_oracle(
                    prior, v, t, concept, sched
                )
            r = op.apply(decode(codec, z0)) - y
            return float(r @ r)

        fd = central_difference_gradient(objective, z, 1e-5)
        worst = max(worst, float(np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-300)))

        jac = posterior_mean_jacobian(prior, z, t, "a", sched)
        fd_jac = np.stack(
            [
                central_difference_gradient(
                    lambda v, p=p: float(posterior_mean_oracle(prior, v, t, "a", sched)[p]),
                    z,
                    1e-5,
                )
                for p in range(d)
            ]
        )
        worst = max(worst, float(np.max(np.abs(jac - fd_jac)) / max(np.max(np.abs(fd_jac)), 1e-300)))
    return SuiteResult("posterior-mean / measurement gradients vs finite differences",
                       worst <= 1e-5, worst, 1e-5, detail=f"{cases} instances")


ALL_SUITES = (
    suite_tweedie_quadrature,
    suite_adjoint_dot_tests,
    suite_dense_cg,
    suite_residual_gradients,
    suite_dps_gradients,
)


def run_all(printer=print) -> bool:
    ok = True
    for suite in ALL_SUITES:
        result = suite()
        printer(result.line())
        ok = ok and result.ok
    return ok
