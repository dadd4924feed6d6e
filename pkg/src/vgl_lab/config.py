"""Experiment configuration: flat INI files with sections env / approximator /
learner / output, plus an optional tolerances section overriding the central
numeric constants.

Every field has a default; parse(serialize(cfg)) reproduces cfg exactly.
Unknown sections or keys are hard errors — silent typos in sweep configs cost
hours of compute.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .learners import ALGORITHMS, OMEGA_KINDS, SAMPLERS, LearnerConfig, OmegaSpec
from .model import ENVIRONMENTS
from .tolerances import DEFAULT_TOLERANCES, Tolerances, with_overrides

APPROXIMATOR_KINDS = ("quadratic", "mlp")

# (key, default-as-string) pairs; parse fills gaps from here and serialize
# always writes every key, so round-trips are stable.
LEARNER_DEFAULTS = (
    ("algorithm", "vgl_batch"),
    ("lambda", "1.0"),
    ("gamma", ""),
    ("alpha", "0.02"),
    ("omega", "identity"),
    ("iterations", "300"),
    ("start_sampler", "fixed"),
    ("sampler_halfwidth", "1.0"),
    ("seed", "0"),
    ("true_online", "false"),
)
APPROX_DEFAULTS = (("kind", "quadratic"), ("hidden", "12"))
OUTPUT_DEFAULTS = (("directory", "out"), ("plots", "true"))
ENV_DEFAULT_NAME = "lqr1d"


@dataclass(frozen=True)
class RunConfig:
    env_name: str = ENV_DEFAULT_NAME
    env_params: tuple = ()            # sorted (key, value) pairs
    approx_kind: str = "quadratic"
    hidden: int = 12
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    out_dir: str = "out"
    plots: bool = True
    tolerances: Tolerances = DEFAULT_TOLERANCES


def _parse_bool(section, key, raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def _parse_float(section, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from None


def _parse_int(section, key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from None


def _parse_env_param(key, raw):
    """Environment factory parameters: int, float, or comma list of floats."""
    raw = raw.strip()
    if "," in raw:
        return tuple(_parse_float("env", key, p) for p in raw.split(","))
    try:
        return int(raw)
    except ValueError:
        pass
    return _parse_float("env", key, raw)


def _parse_omega(raw):
    raw = raw.strip()
    if raw in ("identity", "pgl"):
        return OmegaSpec(kind=raw)
    if raw.startswith("diagonal:"):
        try:
            diag = tuple(float(p) for p in raw[len("diagonal:"):].split(","))
        except ValueError:
            raise ConfigError(f"[learner] omega: bad diagonal entries in {raw!r}") from None
        return OmegaSpec(kind="diagonal", diag=diag)
    raise ConfigError(f"[learner] omega: expected one of {OMEGA_KINDS} "
                      f"(diagonal as 'diagonal:d1,d2,...'), got {raw!r}")


def _format_omega(spec: OmegaSpec) -> str:
    if spec.kind == "diagonal":
        return "diagonal:" + ",".join(repr(float(d)) for d in spec.diag)
    return spec.kind


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None

    known_sections = {"env", "approximator", "learner", "output", "tolerances"}
    for section in parser.sections():
        if section not in known_sections:
            raise ConfigError(f"unknown config section [{section}]")

    # env ----------------------------------------------------------------
    env_items = dict(parser.items("env")) if parser.has_section("env") else {}
    env_name = env_items.pop("name", ENV_DEFAULT_NAME)
    if env_name not in ENVIRONMENTS:
        raise ConfigError(f"[env] name: unknown environment {env_name!r}; "
                          f"expected one of {sorted(ENVIRONMENTS)}")
    env_params = tuple(sorted((k, _parse_env_param(k, v))
                              for k, v in env_items.items()))

    # approximator ---------------------------------------------------------
    ap = dict(APPROX_DEFAULTS)
    if parser.has_section("approximator"):
        for k, v in parser.items("approximator"):
            if k not in ap:
                raise ConfigError(f"[approximator] unknown key {k!r}")
            ap[k] = v
    if ap["kind"] not in APPROXIMATOR_KINDS:
        raise ConfigError(f"[approximator] kind: expected one of "
                          f"{APPROXIMATOR_KINDS}, got {ap['kind']!r}")
    hidden = _parse_int("approximator", "hidden", ap["hidden"])
    if hidden < 1:
        raise ConfigError(f"[approximator] hidden: must be >= 1, got {hidden}")

    # learner --------------------------------------------------------------
    lr = dict(LEARNER_DEFAULTS)
    if parser.has_section("learner"):
        for k, v in parser.items("learner"):
            if k not in lr:
                raise ConfigError(f"[learner] unknown key {k!r}")
            lr[k] = v
    if lr["algorithm"] not in ALGORITHMS:
        raise ConfigError(f"[learner] algorithm: expected one of {ALGORITHMS}, "
                          f"got {lr['algorithm']!r}")
    if lr["start_sampler"] not in SAMPLERS:
        raise ConfigError(f"[learner] start_sampler: expected one of {SAMPLERS}, "
                          f"got {lr['start_sampler']!r}")
    try:
        learner = LearnerConfig(
            algorithm=lr["algorithm"],
            lam=_parse_float("learner", "lambda", lr["lambda"]),
            gamma=None if lr["gamma"].strip() == ""
            else _parse_float("learner", "gamma", lr["gamma"]),
            alpha=_parse_float("learner", "alpha", lr["alpha"]),
            omega=_parse_omega(lr["omega"]),
            iterations=_parse_int("learner", "iterations", lr["iterations"]),
            start_sampler=lr["start_sampler"],
            sampler_halfwidth=_parse_float("learner", "sampler_halfwidth",
                                           lr["sampler_halfwidth"]),
            seed=_parse_int("learner", "seed", lr["seed"]),
            true_online=_parse_bool("learner", "true_online", lr["true_online"]),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[learner] invalid value: {exc}") from None

    # output ---------------------------------------------------------------
    out = dict(OUTPUT_DEFAULTS)
    if parser.has_section("output"):
        for k, v in parser.items("output"):
            if k not in out:
                raise ConfigError(f"[output] unknown key {k!r}")
            out[k] = v
    plots = _parse_bool("output", "plots", out["plots"])

    # tolerances -----------------------------------------------------------
    tol = DEFAULT_TOLERANCES
    if parser.has_section("tolerances"):
        overrides = {}
        for k, v in parser.items("tolerances"):
            overrides[k] = _parse_float("tolerances", k, v)
        try:
            tol = with_overrides(DEFAULT_TOLERANCES, overrides)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[tolerances] {exc}") from None

    return RunConfig(env_name=env_name, env_params=env_params,
                     approx_kind=ap["kind"], hidden=hidden, learner=learner,
                     out_dir=out["directory"], plots=plots, tolerances=tol)


def serialize_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    parser["env"] = {"name": cfg.env_name}
    for k, v in cfg.env_params:
        if isinstance(v, tuple):
            parser["env"][k] = ",".join(repr(float(p)) for p in v)
        elif isinstance(v, int):
            parser["env"][k] = str(v)
        else:
            parser["env"][k] = repr(float(v))
    parser["approximator"] = {"kind": cfg.approx_kind, "hidden": str(cfg.hidden)}
    lc = cfg.learner
    parser["learner"] = {
        "algorithm": lc.algorithm,
        "lambda": repr(float(lc.lam)),
        "gamma": "" if lc.gamma is None else repr(float(lc.gamma)),
        "alpha": repr(float(lc.alpha)),
        "omega": _format_omega(lc.omega),
        "iterations": str(lc.iterations),
        "start_sampler": lc.start_sampler,
        "sampler_halfwidth": repr(float(lc.sampler_halfwidth)),
        "seed": str(lc.seed),
        "true_online": "true" if lc.true_online else "false",
    }
    parser["output"] = {"directory": cfg.out_dir,
                        "plots": "true" if cfg.plots else "false"}
    if cfg.tolerances != DEFAULT_TOLERANCES:
        diffs = {}
        for name in DEFAULT_TOLERANCES.__dataclass_fields__:
            val = getattr(cfg.tolerances, name)
            if val != getattr(DEFAULT_TOLERANCES, name):
                diffs[name] = repr(float(val))
        parser["tolerances"] = diffs
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def load_config(path) -> RunConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
