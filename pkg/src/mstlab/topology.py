"""Sparse connectivity: layer-wise allocation, mask init, and evolution.

Masks are boolean arrays shaped like their weight matrices.  The package-wide
contract is that a masked weight entry is exactly 0.0 in the stored array,
its optimizer moments are zero, and updates never touch it; evolution steps
therefore only move zeros around and reset moments at changed positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Allocation:
    """Active-count budget per layer for one global sparsity target."""

    target: float
    counts: dict      # name -> active connections (int)
    sizes: dict       # name -> total entries (int)

    def density(self, name):
        return self.counts[name] / self.sizes[name]

    def sparsity(self, name):
        return 1.0 - self.density(name)

    def realized_global(self):
        return 1.0 - sum(self.counts.values()) / sum(self.sizes.values())


def er_allocate(target, shapes):
    """Spread a global sparsity target over layers, scaled by (r+c)/(r*c).

    shapes maps layer name -> (rows, cols).  Per-layer density is
    min(1, A*(r+c)/(r*c)) with the single scale A solved so the total active
    count meets the global budget; layers that clamp at density 1 are fixed
    and A is re-solved over the rest.  Per-layer counts round to nearest, so
    the realized global sparsity can differ from the target by at most half a
    connection per layer.
    """
    if not 0.0 <= target < 1.0:
        raise ValueError(f"target sparsity must be in [0,1), got {target}")
    sizes = {k: int(np.prod(s)) for k, s in shapes.items()}
    total = sum(sizes.values())
    if target == 0.0:
        return Allocation(0.0, dict(sizes), sizes)
    eps = {k: (s[0] + s[1]) / (s[0] * s[1]) for k, s in shapes.items()}
    budget = (1.0 - target) * total
    clamped = set()
    scale = 0.0
    while True:
        free = [k for k in sizes if k not in clamped]
        num = budget - sum(sizes[k] for k in clamped)
        den = sum(eps[k] * sizes[k] for k in free)
        if den <= 0:
            break
        scale = num / den
        newly = [k for k in free if scale * eps[k] >= 1.0]
        if not newly:
            break
        clamped.update(newly)
    counts = {}
    for k in sizes:
        d = 1.0 if k in clamped else min(1.0, scale * eps[k])
        counts[k] = int(d * sizes[k] + 0.5)
    return Allocation(target, counts, sizes)


def init_mask(shape, n_active, rng):
    """Uniform random boolean mask with exactly n_active True entries."""
    n = int(np.prod(shape))
    if not 0 <= n_active <= n:
        raise ValueError(f"n_active {n_active} out of range for size {n}")
    flat = np.zeros(n, dtype=bool)
    if n_active == n:
        flat[:] = True
    elif n_active > 0:
        flat[rng.choice(n, size=n_active, replace=False)] = True
    return flat.reshape(shape)


@dataclass
class LayerUpdate:
    """Log record of one layer's evolution step."""

    name: str
    n_prune: int
    n_grow: int
    n_rand: int
    n_grad: int
    sparsity_before: float
    sparsity_after: float
    pruned: np.ndarray = field(repr=False, default=None)  # flat indices
    grown: np.ndarray = field(repr=False, default=None)


def evolve_layer(w, g, mask, next_active, zeta, rand_frac, mest_lambda, rng):
    """One prune/grow step on a single layer's mask, in place.

    Counts: n_prune = round(zeta * current_active); the grow count is then
    fixed by the requirement that the new active count equal next_active.
    A negative grow count shifts entirely into extra pruning (sharp step
    toward sparser); a grow count above the currently inactive pool is capped
    there with pruning reduced to match (so a dense layer is a no-op).

    Pruning removes the smallest |w| (plus mest_lambda * |g| when set) among
    active entries; growth takes the largest |g| among inactive entries for
    the gradient share and draws the random share uniformly from the inactive
    entries not already chosen.  All ties break by lowest flat index.  Grown
    entries activate at weight zero because masked entries are stored as zero.
    """
    n = mask.size
    maskf = mask.reshape(-1)
    cur = int(maskf.sum())
    inactive = n - cur
    n_prune = int(zeta * cur + 0.5)
    n_grow = n_prune + (next_active - cur)
    if n_grow < 0:
        n_prune -= n_grow
        n_grow = 0
    if n_grow > inactive:
        n_prune -= n_grow - inactive
        n_grow = inactive
    assert 0 <= n_prune <= cur and cur - n_prune + n_grow == next_active
    n_rand = int(rand_frac * n_grow)
    n_grad = n_grow - n_rand

    wf = w.reshape(-1)
    gf = g.reshape(-1)
    record = LayerUpdate("", n_prune, n_grow, n_rand, n_grad,
                         1.0 - cur / n, 1.0 - next_active / n)
    if n_prune == 0 and n_grow == 0:
        record.pruned = np.empty(0, dtype=np.int64)
        record.grown = np.empty(0, dtype=np.int64)
        return record

    if n_prune > 0:
        active_idx = np.flatnonzero(maskf)
        key = np.abs(wf[active_idx])
        if mest_lambda != 0.0:
            key = key + mest_lambda * np.abs(gf[active_idx])
        order = np.argsort(key, kind="stable")
        pruned = active_idx[order[:n_prune]]
    else:
        pruned = np.empty(0, dtype=np.int64)

    if n_grow > 0:
        inactive_idx = np.flatnonzero(~maskf)
        if n_grad > 0:
            order = np.argsort(-np.abs(gf[inactive_idx]), kind="stable")
            ranked = inactive_idx[order]
            grown_grad = ranked[:n_grad]
            pool = ranked[n_grad:]
        else:
            grown_grad = np.empty(0, dtype=np.int64)
            pool = inactive_idx
        if n_rand > 0:
            grown_rand = pool[rng.choice(pool.size, size=n_rand, replace=False)]
        else:
            grown_rand = np.empty(0, dtype=np.int64)
        grown = np.concatenate([grown_grad, grown_rand])
    else:
        grown = np.empty(0, dtype=np.int64)

    maskf[pruned] = False
    maskf[grown] = True
    record.pruned = pruned
    record.grown = grown
    return record


SCHEMES = ("mg", "set", "rigl", "mest", "static")


def scheme_params(scheme, zeta, rand_frac=0.25, mest_lambda=0.0):
    """Map a scheme name to (zeta, rand_frac, mest_lambda) for evolve_layer.

    mg mixes gradient and random growth by rand_frac; set grows all-random;
    rigl grows all-gradient; mest adds a gradient term to the prune key and
    grows all-random; static does no churn (plan-driven resizes still apply,
    shrinking by |w| and growing by |g|).
    """
    if scheme == "mg":
        return zeta, rand_frac, 0.0
    if scheme == "set":
        return zeta, 1.0, 0.0
    if scheme == "rigl":
        return zeta, 0.0, 0.0
    if scheme == "mest":
        return zeta, 1.0, mest_lambda
    if scheme == "static":
        return 0.0, 0.0, 0.0
    raise ValueError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")


def global_evolve(masks, weights, grads, alloc_next, zeta, rand_frac,
                  mest_lambda, rng, on_change=None):
    """Apply evolve_layer to every masked layer in a fixed name order.

    masks/weights/grads map name -> ndarray; alloc_next carries the target
    active count per layer.  Layers whose step is a no-op are skipped in the
    returned records.  on_change(name, pruned, grown) lets the caller zero
    pruned weights and reset optimizer moments.
    """
    records = []
    for name in masks:
        rec = evolve_layer(weights[name], grads[name], masks[name],
                           alloc_next.counts[name], zeta, rand_frac,
                           mest_lambda, rng)
        rec.name = name
        if rec.n_prune == 0 and rec.n_grow == 0:
            continue
        if on_change is not None:
            on_change(name, rec.pruned, rec.grown)
        records.append(rec)
    return records


def global_sparsity(masks):
    """Realized sparsity over all masked layers: 1 - active/total."""
    active = sum(int(m.sum()) for m in masks.values())
    total = sum(m.size for m in masks.values())
    return 1.0 - active / total


class ExplorationTracker:
    """Union of every mask seen, for in-time-overparameterization stats."""

    def __init__(self, masks):
        self.union = {k: m.copy() for k, m in masks.items()}

    def update(self, masks):
        for k, m in masks.items():
            self.union[k] |= m

    def explored_fraction(self):
        hit = sum(int(u.sum()) for u in self.union.values())
        total = sum(u.size for u in self.union.values())
        return hit / total
