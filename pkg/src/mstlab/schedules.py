"""Sparsity, update-fraction, attention-stride and learning-rate schedules.

All schedules are total functions of the integer step t >= 0 and are
piecewise-constant (sparsity, stride) or closed-form (zeta, lr), so any step
can be evaluated in isolation and resume never depends on history.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
import math


@dataclass(frozen=True)
class PhaseConfig:
    """Three-phase sparsity variation: warm-up, ultra-sparse hold, restoration.

    Warm-up runs n_stages stages of prune_every steps, stepping sparsity up a
    cubic ramp from 0; the hold keeps s_max for ultra_steps; restoration runs
    n_stages stages of grow_every steps stepping back down a mirrored cubic.
    """

    s_max: float
    n_stages: int = 5
    prune_every: int = 2000
    ultra_steps: int = 100000
    grow_every: int = 2000

    def __post_init__(self):
        if not 0.0 <= self.s_max < 1.0:
            raise ValueError(f"s_max must be in [0,1), got {self.s_max}")
        for name in ("n_stages", "prune_every", "ultra_steps", "grow_every"):
            if getattr(self, name) < (1 if name != "ultra_steps" else 0):
                raise ValueError(f"{name} must be positive")

    @property
    def t_warm(self):
        return self.n_stages * self.prune_every

    @property
    def t_hold_end(self):
        return self.t_warm + self.ultra_steps

    @property
    def t_end(self):
        return self.t_hold_end + self.n_stages * self.grow_every


def sv_sparsity(t, ph: PhaseConfig):
    """Scheduled global sparsity at step t under the three-phase variation.

    Stage k of warm-up (k = floor(t / prune_every), so the run starts dense)
    holds s_max * (1 - (1 - k/N)^3); restoration stage j holds
    s_max * (1 - j/N)^3, so the first restoration stage still sits at s_max
    and the first growth event fires one stage in.  After t_end the model is
    dense and sparsity is exactly 0.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    n = ph.n_stages
    if t < ph.t_warm:
        k = t // ph.prune_every
        r = 1.0 - k / n
        return ph.s_max * (1.0 - r * r * r)
    if t < ph.t_hold_end:
        return ph.s_max
    if t < ph.t_end:
        j = (t - ph.t_hold_end) // ph.grow_every
        r = 1.0 - j / n
        return ph.s_max * r * r * r
    return 0.0


@dataclass(frozen=True)
class SparsityPlan:
    """A named sparsity-vs-time profile.

    kinds:
      dense   -> 0 everywhere
      static  -> s_max everywhere
      sv      -> three-phase variation driven by `phase`
      sd      -> s_max until switch_step, dense after
      dsd     -> dense until dense_until, s_max until switch_step, dense after
      gd      -> stepwise-linear decay from s_max to 0 over total_steps
    """

    kind: str
    s_max: float = 0.0
    total_steps: int = 0
    phase: PhaseConfig | None = None
    switch_step: int = 0
    dense_until: int = 0
    gd_stages: int = 10

    def sparsity(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        if self.kind == "dense":
            return 0.0
        if self.kind == "static":
            return self.s_max
        if self.kind == "sv":
            return sv_sparsity(t, self.phase)
        if self.kind == "sd":
            return self.s_max if t < self.switch_step else 0.0
        if self.kind == "dsd":
            if t < self.dense_until or t >= self.switch_step:
                return 0.0
            return self.s_max
        if self.kind == "gd":
            k = min(t * self.gd_stages // self.total_steps, self.gd_stages - 1)
            return self.s_max * (1.0 - k / (self.gd_stages - 1))
        raise ValueError(f"unknown plan kind {self.kind!r}")

    def settle_step(self):
        """First step after which the plan value never changes again."""
        if self.kind in ("dense", "static"):
            return 0
        if self.kind == "sv":
            return self.phase.t_end
        if self.kind == "sd":
            return self.switch_step
        if self.kind == "dsd":
            return self.switch_step
        if self.kind == "gd":
            return (self.gd_stages - 1) * self.total_steps // self.gd_stages + 1
        raise ValueError(f"unknown plan kind {self.kind!r}")


@dataclass(frozen=True)
class ZetaSchedule:
    """Piecewise cosine decay of the update fraction zeta.

    Interval i spans [bounds[i], bounds[i+1]) and decays from start value
    values[i] to 0 along half a cosine.  Past the last bound zeta is 0.
    """

    bounds: tuple = field(default_factory=tuple)  # len m+1 for m intervals
    values: tuple = field(default_factory=tuple)  # len m

    def zeta(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        if t >= self.bounds[-1]:
            return 0.0
        i = bisect_right(self.bounds, t) - 1
        lo, hi = self.bounds[i], self.bounds[i + 1]
        return 0.5 * self.values[i] * (1.0 + math.cos(math.pi * (t - lo) / (hi - lo)))


def make_zeta(variant, zeta0, ph: PhaseConfig | None = None, until=None,
              decay_ratio=0.5):
    """Build a ZetaSchedule for one of the named variants.

    one-cosine   single interval over the whole update horizon
    two-cosine   split at the start of restoration, both restart at zeta0
    n-cosine     one interval to restoration, then one per restoration stage
    decay-n      n-cosine boundaries with the start value shrunk by
                 decay_ratio at every interval change

    Variants other than one-cosine need a PhaseConfig; one-cosine without a
    phase needs an explicit `until` horizon.
    """
    if variant == "one-cosine":
        end = ph.t_end if ph is not None else until
        if end is None:
            raise ValueError("one-cosine needs a phase or an explicit horizon")
        return ZetaSchedule((0, end), (zeta0,))
    if ph is None:
        raise ValueError(f"variant {variant!r} needs a PhaseConfig")
    if variant == "two-cosine":
        return ZetaSchedule((0, ph.t_hold_end, ph.t_end), (zeta0, zeta0))
    bounds = [0, ph.t_hold_end]
    for j in range(1, ph.n_stages + 1):
        bounds.append(ph.t_hold_end + j * ph.grow_every)
    if variant == "n-cosine":
        return ZetaSchedule(tuple(bounds), (zeta0,) * (len(bounds) - 1))
    if variant == "decay-n-cosine":
        vals = tuple(zeta0 * decay_ratio ** i for i in range(len(bounds) - 1))
        return ZetaSchedule(tuple(bounds), vals)
    raise ValueError(f"unknown zeta variant {variant!r}")


@dataclass(frozen=True)
class StrideSchedule:
    """Attention stride over time: fixed stride l, dense (l=1) from dense_from."""

    stride: int
    dense_from: int

    def stride_at(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        return 1 if t >= self.dense_from else self.stride


@dataclass(frozen=True)
class LrSchedule:
    """Linear warm-up to lr_max, cosine decay to lr_min, then flat lr_min."""

    lr_max: float
    lr_min: float
    warmup_steps: int
    decay_steps: int

    def lr_at(self, t):
        if t < self.warmup_steps:
            return self.lr_max * (t + 1) / self.warmup_steps
        if t > self.decay_steps:
            return self.lr_min
        frac = (t - self.warmup_steps) / max(1, self.decay_steps - self.warmup_steps)
        coef = 0.5 * (1.0 + math.cos(math.pi * frac))
        return self.lr_min + coef * (self.lr_max - self.lr_min)
