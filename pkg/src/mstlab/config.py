"""Flat, strictly-typed run configuration.

Config files are plain `key = value` lines (a flat TOML subset: comments
with #, booleans true/false, quoted or bare strings, ints, floats).  Unknown
keys and type mismatches are hard errors so a typo cannot silently fall back
to a default.  All defaults follow the reference large-scale recipe; desk
runs override them from file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .model import ModelConfig
from .schedules import LrSchedule, PhaseConfig, SparsityPlan, StrideSchedule, make_zeta


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # data
    data_path: str = ""
    data_mode: str = "char"
    train_frac: float = 0.9
    # model
    vocab_size: int = 0          # 0 -> take from the ingested corpus
    block_size: int = 1024
    n_layers: int = 12
    n_heads: int = 12
    n_embd: int = 768
    ffw_mult: int = 4
    tie_head: bool = True
    mask_head: bool = True
    # sparsity plan
    plan: str = "sv"
    s_max: float = 0.96
    n_stages: int = 5
    prune_every: int = 2000
    ultra_steps: int = 100000
    grow_every: int = 2000
    switch_step: int = 0
    dense_until: int = 0
    gd_stages: int = 10
    # evolution scheme
    scheme: str = "mg"
    rand_frac: float = 0.25
    mest_lambda: float = 0.0
    update_every: int = 100
    # update fraction
    zeta_variant: str = "n-cosine"
    zeta0: float = 0.3
    zeta_decay_ratio: float = 0.5
    zeta_until: int = 0          # one-cosine horizon for phase-free plans; 0 -> total_steps
    # attention
    attn_stride: int = 256
    dense_attn_from: int = -1    # -1 -> start of restoration for sv, else never
    # optimizer
    lr_max: float = 6e-4
    lr_min: float = 6e-5
    warmup_steps: int = 2000
    lr_decay_steps: int = 140000
    weight_decay: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.95
    adam_eps: float = 1e-8
    grad_clip: float = 0.1
    # loop
    total_steps: int = 140000
    batch_size: int = 12
    grad_accum: int = 40
    eval_interval: int = 250
    eval_batches: int = 16
    checkpoint_interval: int = 5000
    seed: int = 1234
    dtype: str = "float32"


_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key, raw, typ):
    raw = raw.strip()
    if typ == "bool":
        if raw in ("true", "True"):
            return True
        if raw in ("false", "False"):
            return False
        raise ConfigError(f"{key}: expected true/false, got {raw!r}")
    if typ == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected integer, got {raw!r}") from None
    if typ == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected number, got {raw!r}") from None
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        return raw[1:-1]
    return raw


def parse_config(path, overrides=None):
    """Read a flat key = value file into a validated RunConfig."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in _FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = _parse_value(key, raw, _FIELDS[key])
    if overrides:
        values.update(overrides)
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def config_text(cfg):
    """Serialize back to the flat file format (for run directories)."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, str):
            v = f'"{v}"'
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def validate(cfg):
    if cfg.plan not in ("sv", "dense", "static", "sd", "dsd", "gd"):
        raise ConfigError(f"unknown plan {cfg.plan!r}")
    if cfg.scheme not in ("mg", "set", "rigl", "mest", "static"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    if cfg.data_mode not in ("char", "byte"):
        raise ConfigError(f"unknown data_mode {cfg.data_mode!r}")
    if cfg.dtype not in ("float32", "float64"):
        raise ConfigError(f"unknown dtype {cfg.dtype!r}")
    if not 0.0 <= cfg.s_max < 1.0:
        raise ConfigError("s_max must be in [0,1)")
    if not 0.0 <= cfg.rand_frac <= 1.0:
        raise ConfigError("rand_frac must be in [0,1]")
    for key in ("block_size", "n_layers", "n_heads", "n_embd", "total_steps",
                "batch_size", "grad_accum", "update_every", "eval_interval",
                "eval_batches", "log_interval", "checkpoint_interval"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be >= 1")
    if cfg.n_embd % cfg.n_heads:
        raise ConfigError("n_embd must be divisible by n_heads")
    if cfg.plan == "sv":
        if cfg.prune_every % cfg.update_every or cfg.grow_every % cfg.update_every:
            raise ConfigError("prune_every and grow_every must be multiples of "
                              "update_every so mask state tracks the plan exactly")
    if cfg.plan in ("sd", "dsd") and cfg.switch_step <= 0:
        raise ConfigError(f"plan {cfg.plan!r} needs switch_step > 0")
    if cfg.plan == "dsd" and not 0 < cfg.dense_until < cfg.switch_step:
        raise ConfigError("plan dsd needs 0 < dense_until < switch_step")
    if cfg.plan == "gd" and cfg.gd_stages < 2:
        raise ConfigError("plan gd needs gd_stages >= 2")


def build_phase(cfg):
    return PhaseConfig(cfg.s_max, cfg.n_stages, cfg.prune_every,
                       cfg.ultra_steps, cfg.grow_every)


def build_plan(cfg):
    if cfg.plan == "sv":
        return SparsityPlan("sv", cfg.s_max, cfg.total_steps, phase=build_phase(cfg))
    if cfg.plan == "dense":
        return SparsityPlan("dense", 0.0, cfg.total_steps)
    return SparsityPlan(cfg.plan, cfg.s_max, cfg.total_steps,
                        switch_step=cfg.switch_step, dense_until=cfg.dense_until,
                        gd_stages=cfg.gd_stages)


def build_zeta(cfg):
    ph = build_phase(cfg) if cfg.plan == "sv" else None
    until = cfg.zeta_until if cfg.zeta_until > 0 else cfg.total_steps
    if ph is None:
        return make_zeta("one-cosine", cfg.zeta0, until=until)
    return make_zeta(cfg.zeta_variant, cfg.zeta0, ph=ph,
                     decay_ratio=cfg.zeta_decay_ratio)


def build_stride(cfg):
    if cfg.dense_attn_from >= 0:
        dense_from = cfg.dense_attn_from
    elif cfg.plan == "sv":
        dense_from = build_phase(cfg).t_hold_end
    else:
        dense_from = cfg.total_steps + 1
    return StrideSchedule(cfg.attn_stride, dense_from)


def build_lr(cfg):
    return LrSchedule(cfg.lr_max, cfg.lr_min, cfg.warmup_steps, cfg.lr_decay_steps)


def build_model_config(cfg, vocab_size):
    return ModelConfig(vocab=vocab_size, block_size=cfg.block_size,
                       n_layers=cfg.n_layers, n_heads=cfg.n_heads,
                       n_embd=cfg.n_embd, ffw_mult=cfg.ffw_mult,
                       tie_head=cfg.tie_head, mask_head=cfg.mask_head)
