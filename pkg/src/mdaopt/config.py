"""Flat ``key = value`` run configuration with ``[section]`` headers.

Every key has a default and unknown keys are rejected, so a typo fails
loudly instead of silently running with a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .core import UsageError
from .optimizers import OPTIMIZERS
from .problems import PROBLEMS
from .schedules import LR_SHAPES, ScheduleSpec


class ConfigError(UsageError):
    pass


PROBLEM_KEYS = {
    "quadratic": {"n": 10, "condition_number": 10.0, "sigma": 0.0, "seed": 0},
    "logistic": {"n_samples": 200, "n_features": 5, "batch": 10, "seed": 0, "label_noise": 0.1, "l2": 0.0},
    "rosenbrock": {"n": 2},
    "tiny_mlp": {"n_hidden": 16, "n_samples": 500, "batch": 32, "seed": 0},
}

# hyperparameters accepted per optimizer (beyond the schedule)
OPTIMIZER_KEYS = {
    "sgd": {},
    "sgdm": {"momentum": 0.9},
    "spa": {},
    "da": {"beta_rule": "nesterov"},
    "mda": {},
    "reg_sgd": {},
    "adam": {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
}

# weight decay defaults: 1e-4 for the SGD/Adam family, none for dual averaging
WEIGHT_DECAY_DEFAULTS = {"sgd": 1e-4, "sgdm": 1e-4, "spa": 1e-4, "adam": 1e-4, "da": 0.0, "mda": 0.0, "reg_sgd": 0.0}

SECTION_DEFAULTS = {
    "run": {"T": 100, "seeds": [0], "return_mode": "last_iterate", "output_dir": "out"},
    "problem": {"id": "quadratic"},
    "optimizer": {"id": ["sgd"], "weight_decay": None},
    "schedule": {
        "base_lr": 0.1,
        "lr_shape": "flat",
        "c0": 0.1,
        "compensate_momentum": False,
        "stages": [],
        "warmup_steps": 0,
    },
    "rate": {"Ts": [100, 1000, 10000], "c": 0.5},
    "ablate": {"lrs": [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0], "shapes": ["flat", "stagewise"], "c": 0.1},
}


def _as_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _coerce(default, text: str, key: str):
    try:
        if isinstance(default, bool):
            return _as_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, list):
            items = _list(text)
            if key == "seeds" or key == "Ts":
                return [int(x) for x in items]
            if key == "lrs":
                return [float(x) for x in items]
            if key == "stages":
                return [tuple(float(v) for v in item.split(":")) for item in items]
            return items
        if default is None:
            return float(text)
        return text.strip()
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


@dataclass
class RunConfig:
    problem_id: str = "quadratic"
    problem_params: dict = field(default_factory=dict)
    optimizers: list = field(default_factory=lambda: ["sgd"])
    optimizer_params: dict = field(default_factory=dict)
    weight_decay: float | None = None
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    T: int = 100
    seeds: list = field(default_factory=lambda: [0])
    output_dir: Path = Path("out")
    return_mode: str = "last_iterate"
    rate_Ts: list = field(default_factory=lambda: [100, 1000, 10000])
    rate_c: float = 0.5
    ablate_lrs: list = field(default_factory=lambda: list(SECTION_DEFAULTS["ablate"]["lrs"]))
    ablate_shapes: list = field(default_factory=lambda: ["flat", "stagewise"])
    ablate_c: float = 0.1

    def build_problem(self):
        return PROBLEMS[self.problem_id](**self.problem_params)

    def problem_for_seed(self, seed: int):
        """Problem instance whose data seed is shifted by ``seed``."""
        params = dict(self.problem_params)
        if "seed" in PROBLEM_KEYS[self.problem_id]:
            params["seed"] = params.get("seed", 0) + seed
        return PROBLEMS[self.problem_id](**params)

    def hyper_for(self, optimizer_id: str) -> dict:
        allowed = OPTIMIZER_KEYS[optimizer_id]
        return {k: v for k, v in self.optimizer_params.items() if k in allowed}

    def weight_decay_for(self, optimizer_id: str) -> float:
        if self.weight_decay is not None:
            return self.weight_decay
        return WEIGHT_DECAY_DEFAULTS[optimizer_id]


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None

    raw = {name: dict(parser[name]) for name in parser.sections()}
    for name in raw:
        if name not in SECTION_DEFAULTS:
            raise ConfigError(f"unknown section [{name}]")

    def section(name, extra=None):
        allowed = dict(SECTION_DEFAULTS[name])
        if extra:
            allowed.update(extra)
        values = {}
        for key, text in raw.get(name, {}).items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            values[key] = _coerce(allowed[key], text, key)
        return values

    prob_raw = raw.get("problem", {})
    pid = prob_raw.get("id", "quadratic").strip()
    if pid not in PROBLEM_KEYS:
        raise ConfigError(f"unknown problem id {pid!r}; choose from {', '.join(PROBLEM_KEYS)}")
    prob = section("problem", PROBLEM_KEYS[pid])
    prob.pop("id", None)

    opt_raw = raw.get("optimizer", {})
    ids = _list(opt_raw.get("id", "sgd"))
    if not ids:
        raise ConfigError("[optimizer] id must name at least one optimizer")
    for oid in ids:
        if oid not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {oid!r}; choose from {', '.join(OPTIMIZERS)}")
    opt_keys = {}
    for oid in ids:
        opt_keys.update(OPTIMIZER_KEYS[oid])
    opt = section("optimizer", opt_keys)
    opt.pop("id", None)
    wd = opt.pop("weight_decay", None)

    run_s = {**SECTION_DEFAULTS["run"], **section("run")}
    if not run_s["seeds"]:
        raise ConfigError("[run] seeds must be nonempty")
    if run_s["T"] < 1:
        raise ConfigError("[run] T must be >= 1")
    if run_s["return_mode"] not in ("last_iterate", "average_iterate"):
        raise ConfigError(f"unknown return_mode {run_s['return_mode']!r}")

    sched = {**SECTION_DEFAULTS["schedule"], **section("schedule")}
    if sched["lr_shape"] not in LR_SHAPES:
        raise ConfigError(f"unknown lr_shape {sched['lr_shape']!r}")
    try:
        spec = ScheduleSpec(
            base_lr=sched["base_lr"],
            lr_shape=sched["lr_shape"],
            total_steps=run_s["T"],
            c0=sched["c0"],
            compensate_momentum=sched["compensate_momentum"],
            stages=tuple(sched["stages"]),
            warmup_steps=sched["warmup_steps"],
        )
    except UsageError as exc:
        raise ConfigError(f"[schedule] {exc}") from None

    rate = {**SECTION_DEFAULTS["rate"], **section("rate")}
    ablate = {**SECTION_DEFAULTS["ablate"], **section("ablate")}
    for shape in ablate["shapes"]:
        if shape not in ("flat", "stagewise"):
            raise ConfigError(f"[ablate] unsupported shape {shape!r}")

    try:
        cfg = RunConfig(
            problem_id=pid,
            problem_params=prob,
            optimizers=ids,
            optimizer_params=opt,
            weight_decay=wd,
            schedule=spec,
            T=run_s["T"],
            seeds=run_s["seeds"],
            output_dir=Path(run_s["output_dir"]),
            return_mode=run_s["return_mode"],
            rate_Ts=rate["Ts"],
            rate_c=rate["c"],
            ablate_lrs=ablate["lrs"],
            ablate_shapes=ablate["shapes"],
            ablate_c=ablate["c"],
        )
        cfg.build_problem()
    except UsageError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
