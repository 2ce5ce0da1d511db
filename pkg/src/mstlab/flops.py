"""Training-cost accounting for the sparse transformer.

Counts multiply-accumulate work of the matmuls only (embedding lookups,
layernorms and softmax normalizers are excluded as lower order).  Weight
sparsity S discounts every weight matmul by (1 - S); the attention density
q discounts the two sequence-length-quadratic products.  Backward is charged
at twice forward, so a training step costs 3x forward.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .patterns import pattern_for_stride


@dataclass(frozen=True)
class ModelDims:
    seq_len: int
    n_embd: int
    n_layers: int
    n_heads: int
    d_ffw: int
    vocab: int

    @property
    def d_head(self):
        return self.n_embd // self.n_heads


def forward_components(dims, sparsity=0.0, q_atten=1.0):
    """Per-sequence forward FLOPs by component at one (S, q) operating point.

    kqv     (1-S) * L * (2N-1) * 3N          query/key/value projections
    scores  q * 2 * L^2 * N                  attention logits, all heads
    reduce  q * 2 * H * L^2 * D_head         probability-weighted value sum
    proj    (1-S) * L * (2N-1) * N           attention output projection
    ffw1    (1-S) * L * (2N-1) * D_ffw
    ffw2    (1-S) * L * (2*D_ffw-1) * N
    lm      (1-S) * L * (2N-1) * V           final vocabulary projection

    The first six repeat per layer; lm is charged once.
    """
    L, N = dims.seq_len, dims.n_embd
    dens = 1.0 - sparsity
    per_layer = {
        "kqv": dens * L * (2 * N - 1) * 3 * N,
        "scores": q_atten * 2.0 * L * L * N,
        "reduce": q_atten * 2.0 * dims.n_heads * L * L * dims.d_head,
        "proj": dens * L * (2 * N - 1) * N,
        "ffw1": dens * L * (2 * N - 1) * dims.d_ffw,
        "ffw2": dens * L * (2 * dims.d_ffw - 1) * N,
    }
    out = {k: v * dims.n_layers for k, v in per_layer.items()}
    out["lm"] = dens * L * (2 * N - 1) * dims.vocab
    return out


def forward_total(dims, sparsity=0.0, q_atten=1.0):
    return sum(forward_components(dims, sparsity, q_atten).values())


def attention_share(dims, sparsity=0.0, q_atten=1.0):
    """Fraction of forward FLOPs in the two L^2 attention products."""
    comp = forward_components(dims, sparsity, q_atten)
    total = sum(comp.values())
    return (comp["scores"] + comp["reduce"]) / total


def _affine_coefs(dims):
    # forward_total(s, q) == dens_coef * (1 - s) + atten_coef * q
    L, N = dims.seq_len, dims.n_embd
    dens_coef = dims.n_layers * (L * (2 * N - 1) * (3 * N + N + dims.d_ffw)
                                 + L * (2 * dims.d_ffw - 1) * N)
    dens_coef += L * (2 * N - 1) * dims.vocab
    atten_coef = dims.n_layers * (2.0 * L * L * N
                                  + 2.0 * dims.n_heads * L * L * dims.d_head)
    return dens_coef, atten_coef


def schedule_profiles(plan, stride_sched, steps, seq_len):
    """Arrays of scheduled sparsity and attention density per step."""
    s = np.empty(steps, dtype=np.float64)
    q = np.empty(steps, dtype=np.float64)
    qcache = {}
    for t in range(steps):
        s[t] = plan.sparsity(t)
        l = stride_sched.stride_at(t)
        if l not in qcache:
            qcache[l] = pattern_for_stride(seq_len, l).q_atten()
        q[t] = qcache[l]
    return s, q


def step_flops(dims, sparsity, q_atten, tokens_per_step):
    """Accounted FLOPs of one training step (forward + 2x backward)."""
    return 3.0 * forward_total(dims, sparsity, q_atten) * tokens_per_step / dims.seq_len


def training_totals(dims, plan, stride_sched, steps, tokens_per_step):
    """Integrate accounted training FLOPs over the whole schedule.

    Returns accounted and dense-equivalent totals plus the reduction factor
    dense/accounted and the schedule means they derive from.
    """
    s, q = schedule_profiles(plan, stride_sched, steps, dims.seq_len)
    a, b = _affine_coefs(dims)
    per_token = 3.0 / dims.seq_len
    accounted = per_token * tokens_per_step * (a * (1.0 - s).sum() + b * q.sum())
    dense = per_token * tokens_per_step * (a + b) * steps
    return {
        "accounted_flops": accounted,
        "dense_flops": dense,
        "reduction": dense / accounted,
        "mean_density": float((1.0 - s).mean()),
        "mean_q_atten": float(q.mean()),
        "steps": steps,
        "tokens_per_step": tokens_per_step,
    }


def components_csv(dims, sparsity, q_atten, path):
    """Write the per-component forward breakdown as CSV."""
    comp = forward_components(dims, sparsity, q_atten)
    total = sum(comp.values())
    with open(path, "w") as f:
        f.write("component,flops,share\n")
        for k, v in comp.items():
            f.write(f"{k},{v:.6g},{v / total:.6f}\n")
        f.write(f"forward_total,{total:.6g},1.000000\n")
        f.write(f"train_step_total,{3 * total:.6g},3.000000\n")


def totals_csv(tot, path):
    with open(path, "w") as f:
        f.write("quantity,value\n")
        for k, v in tot.items():
            f.write(f"{k},{v:.9g}\n")
