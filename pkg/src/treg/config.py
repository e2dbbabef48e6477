"""Run configuration: flat key=value files with dotted section prefixes.

Example::

    operator.kind=gaussian_blur
    operator.height=32
    solver.omega1=7.5
    seed=3

Unknown keys are rejected, referenced files must be readable at load time,
and every component of a run can be built from the parsed config.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import fileio
from .codec import LatentCodec, decode, make_codec, make_flip_codec
from .consistency import AdamParams, CGParams
from .errors import ConfigError
from .negation import EmbeddingState, make_embedding_state
from .operators import (
    ForwardOperator,
    Measurement,
    make_box_inpaint,
    make_downsample,
    make_gaussian_blur,
    make_phase_retrieval,
    simulate_measurement,
)
from .prior import ConceptPrior, prior_from_json
from .sampler import SolverConfig
from .schedule import NoiseSchedule, make_schedule

_MISSING = object()


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


# key -> (parser, default); defaults of None mark optional keys
SCHEMA: dict[str, tuple] = {
    "schedule.T": (int, 1000),
    "schedule.beta_start": (float, 0.00085),
    "schedule.beta_end": (float, 0.012),
    "prior.path": (str, None),
    "prior.inline": (str, None),
    "codec.d": (int, 16),
    "codec.seed": (int, 11),
    "codec.sigma_e": (float, 0.0),
    "codec.flip_symmetric": (_parse_bool, False),
    "operator.kind": (str, None),
    "operator.height": (int, 32),
    "operator.width": (int, 32),
    "operator.kernel_size": (int, 13),
    "operator.sigma": (float, 2.0),
    "operator.factor": (int, 2),
    "operator.mask_path": (str, None),
    "operator.pad": (int, 16),
    "measurement.sigma0": (float, 0.1),
    "measurement.seed": (int, 101),
    "measurement.path": (str, None),
    "measurement.truth_path": (str, None),
    "measurement.truth_concept": (str, None),
    "measurement.truth_midpoint": (str, None),
    "solver.nfe": (int, 200),
    "solver.omega1": (float, 7.5),
    "solver.omega2": (float, 0.0),
    "solver.gamma_mod": (int, 3),
    "solver.gamma_tmax": (int, 850),
    "solver.cg_lam": (float, 1e-4),
    "solver.cg_iters": (int, 5),
    "solver.cg_tol": (float, 0.0),
    "solver.adam_lr": (float, 1e-3),
    "solver.adam_beta1": (float, 0.9),
    "solver.adam_beta2": (float, 0.999),
    "solver.adam_iters": (int, 100),
    "solver.adam_lam": (float, 0.0),
    "solver.use_adam": (_parse_bool, False),
    "solver.stochasticity": (str, "default"),
    "solver.custom_s": (_parse_float_list, None),
    "solver.dps_enabled": (_parse_bool, False),
    "solver.plain_stochastic": (_parse_bool, False),
    "solver.negation_enabled": (_parse_bool, False),
    "negation.q": (int, 0),
    "negation.kappa": (float, 1.0),
    "negation.lr": (float, 0.05),
    "negation.seed": (int, 7),
    "experiment.kind": (str, None),
    "experiment.restarts": (int, 10),
    "experiment.concept": (str, None),
    "experiment.profile_row": (int, None),
    "output_dir": (str, "out"),
    "seed": (int, 0),
}

_PATH_KEYS = ("prior.path", "operator.mask_path", "measurement.path", "measurement.truth_path")


@dataclass(frozen=True)
class RunConfig:
    values: dict
    base_dir: Path

    def __getitem__(self, key: str):
        return self.values[key]

    def resolve_path(self, key: str) -> Path:
        return self.base_dir / self.values[key]

    def with_overrides(self, **overrides) -> "RunConfig":
        values = dict(self.values)
        for key, val in overrides.items():
            if val is not None:
                values[key] = val
        return replace(self, values=values)


def parse_config_text(text: str, base_dir: str | Path = ".") -> RunConfig:
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    rc = RunConfig(values=values, base_dir=Path(base_dir))
    _validate_paths(rc)
    return rc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), base_dir=path.parent)


def _validate_paths(rc: RunConfig) -> None:
    for key in _PATH_KEYS:
        if rc.values[key] is not None:
            p = rc.resolve_path(key)
            if not p.is_file():
                raise ConfigError(f"{key} references missing file: {p}")


def render_config(rc: RunConfig) -> str:
    lines = []
    for key in sorted(rc.values):
        val = rc.values[key]
        if val is None:
            continue
        if isinstance(val, bool):
            val = "true" if val else "false"
        elif isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        elif isinstance(val, float):
            val = repr(val)
        lines.append(f"{key}={val}")
    return "\n".join(lines) + "\n"


def build_schedule(rc: RunConfig) -> NoiseSchedule:
    return make_schedule(rc["schedule.T"], rc["schedule.beta_start"], rc["schedule.beta_end"])


def build_prior(rc: RunConfig) -> ConceptPrior:
    if rc["prior.inline"] is not None:
        return prior_from_json(rc["prior.inline"])
    if rc["prior.path"] is None:
        raise ConfigError("config must set prior.path or prior.inline")
    return prior_from_json(rc.resolve_path("prior.path").read_text(encoding="utf-8"))


def build_operator(rc: RunConfig) -> ForwardOperator:
    kind = rc["operator.kind"]
    if kind is None:
        raise ConfigError("config must set operator.kind")
    shape = (rc["operator.height"], rc["operator.width"])
    if kind == "gaussian_blur":
        return make_gaussian_blur(shape, rc["operator.kernel_size"], rc["operator.sigma"])
    if kind == "downsample":
        return make_downsample(shape, rc["operator.factor"])
    if kind == "box_inpaint":
        if rc["operator.mask_path"] is None:
            raise ConfigError("operator.kind=box_inpaint requires operator.mask_path")
        mask = fileio.read_pgm_mask(rc.resolve_path("operator.mask_path"))
        if mask.shape != shape:
            raise ConfigError(
                f"mask shape {mask.shape} does not match operator shape {shape}"
            )
        return make_box_inpaint(mask)
    if kind == "phase_retrieval":
        return make_phase_retrieval(shape, rc["operator.pad"])
    raise ConfigError(f"unknown operator.kind {kind!r}")


def build_codec(rc: RunConfig, op: ForwardOperator) -> LatentCodec:
    if rc["codec.flip_symmetric"]:
        return make_flip_codec(op.in_shape, rc["codec.d"], rc["codec.seed"], rc["codec.sigma_e"])
    return make_codec(op.m, rc["codec.d"], rc["codec.seed"], rc["codec.sigma_e"])


def load_truth(rc: RunConfig, prior: ConceptPrior, codec: LatentCodec) -> np.ndarray | None:
    """Ground-truth pixel image from whichever truth source is configured."""
    sources = [
        k
        for k in ("measurement.truth_path", "measurement.truth_concept", "measurement.truth_midpoint")
        if rc.values[k] is not None
    ]
    if len(sources) > 1:
        raise ConfigError(f"multiple truth sources configured: {sources}")
    if not sources:
        return None
    key = sources[0]
    if key == "measurement.truth_path":
        p = rc.resolve_path(key)
        if p.suffix == ".pgm":
            return fileio.read_pgm(p).astype(float).ravel() / 255.0
        vec, _ = fileio.read_raw(p)
        return vec
    if key == "measurement.truth_concept":
        return decode(codec, prior.concept_mean(rc[key]))
    labels = [s.strip() for s in rc[key].split(",")]
    if len(labels) != 2:
        raise ConfigError(f"measurement.truth_midpoint needs two labels, got {rc[key]!r}")
    mid = 0.5 * (prior.concept_mean(labels[0]) + prior.concept_mean(labels[1]))
    return decode(codec, mid)


def build_measurement(
    rc: RunConfig, op: ForwardOperator, prior: ConceptPrior, codec: LatentCodec
) -> tuple[Measurement, np.ndarray | None]:
    """Measurement plus the truth image when one is configured."""
    if rc["measurement.path"] is not None:
        vec, meta = fileio.read_raw(rc.resolve_path("measurement.path"))
        if vec.size != op.out_dim:
            raise ConfigError(
                f"measurement.path has n={vec.size}, operator expects {op.out_dim}"
            )
        return (
            Measurement(y=vec, sigma0=meta["sigma0"], op_id=op.describe(), seed=meta["seed"]),
            load_truth(rc, prior, codec),
        )
    truth = load_truth(rc, prior, codec)
    if truth is None:
        raise ConfigError("config must set measurement.path or a measurement truth source")
    if truth.size != op.m:
        raise ConfigError(f"truth image has {truth.size} pixels, operator expects {op.m}")
    meas = simulate_measurement(op, truth, rc["measurement.sigma0"], rc["measurement.seed"])
    return meas, truth


def build_solver(rc: RunConfig) -> SolverConfig:
    custom = rc["solver.custom_s"]
    if custom is not None:
        custom = np.asarray(custom, dtype=float)
        if custom.size != rc["schedule.T"] + 1:
            raise ConfigError(
                f"solver.custom_s needs T+1={rc['schedule.T'] + 1} values, got {custom.size}"
            )
    return SolverConfig(
        nfe=rc["solver.nfe"],
        omega1=rc["solver.omega1"],
        omega2=rc["solver.omega2"],
        gamma_mod=rc["solver.gamma_mod"],
        gamma_tmax=rc["solver.gamma_tmax"],
        cg=CGParams(lam=rc["solver.cg_lam"], iters=rc["solver.cg_iters"], tol=rc["solver.cg_tol"]),
        adam=AdamParams(
            lr=rc["solver.adam_lr"],
            beta1=rc["solver.adam_beta1"],
            beta2=rc["solver.adam_beta2"],
            iters=rc["solver.adam_iters"],
            lam=rc["solver.adam_lam"],
        ),
        use_adam=rc["solver.use_adam"],
        stochasticity=rc["solver.stochasticity"],
        custom_s=custom,
        dps_enabled=rc["solver.dps_enabled"],
        plain_stochastic=rc["solver.plain_stochastic"],
        negation_enabled=rc["solver.negation_enabled"],
        seed=rc["seed"],
    )


def build_negation(rc: RunConfig, prior: ConceptPrior, codec: LatentCodec) -> EmbeddingState | None:
    """Fresh per-run embedding state, or None when no negation is configured.

    Concept reference images are the decoded concept means.
    """
    if rc["negation.q"] <= 0:
        if rc["solver.negation_enabled"]:
            raise ConfigError("solver.negation_enabled requires negation.q > 0")
        if prior.null_mode == "embedding":
            raise ConfigError("prior.null_mode=embedding requires negation.q > 0")
        return None
    refs = np.stack([decode(codec, prior.concept_mean(label)) for label in prior.labels])
    return make_embedding_state(
        prior.labels,
        refs,
        rc["negation.q"],
        rc["negation.seed"],
        kappa=rc["negation.kappa"],
        lr=rc["negation.lr"],
    )
