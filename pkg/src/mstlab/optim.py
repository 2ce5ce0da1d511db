"""AdamW with decoupled weight decay, global-norm clipping and mask support."""

from __future__ import annotations

import numpy as np

from .tensor import NonFiniteError


class AdamW:
    """Standard AdamW keeping masked weight entries exactly zero.

    Gradients enter the moments masked, so a position that was zero at its
    last topology event can never drift off zero: its moments are zeroed when
    pruned or grown and masked gradients keep them zero afterwards.  Weight
    decay is decoupled and applied only to parameters with ndim >= 2 (matrix
    weights and embeddings, not layernorm gains).
    """

    def __init__(self, params, beta1=0.9, beta2=0.95, eps=1e-8, weight_decay=0.1):
        self.params = params  # dict name -> Tensor
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, grads, lr, masks=None, clip=0.0):
        """One update from dense grads; returns the pre-clip global grad norm.

        masks maps a subset of param names to 0/1 arrays.  Clipping, moments
        and the update all see the masked gradient; callers keep the dense
        gradient for connection-growth scoring.
        """
        masks = masks or {}
        eff = {}
        sq = 0.0
        for k in self.params:
            g = grads[k]
            mk = masks.get(k)
            if mk is not None:
                g = g * mk
            eff[k] = g
            sq += float(np.dot(g.reshape(-1), g.reshape(-1)))
        norm = float(np.sqrt(sq))
        if not np.isfinite(norm):
            raise NonFiniteError("non-finite gradient norm, step aborted")
        scale = 1.0
        if clip > 0.0 and norm > clip:
            scale = clip / norm
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            g = eff[k] if scale == 1.0 else eff[k] * scale
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            upd = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay > 0.0 and p.data.ndim >= 2:
                upd = upd + self.weight_decay * p.data
            p.data -= lr * upd
        return norm

    def zero_moments(self, name, where):
        """Reset first/second moments at positions flagged in `where`."""
        self.m[name][where] = 0.0
        self.v[name][where] = 0.0

    def state_arrays(self):
        out = {"adam_t": np.asarray(self.t, dtype=np.int64)}
        for k in self.params:
            out[f"adam_m.{k}"] = self.m[k]
            out[f"adam_v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["adam_t"])
        for k in self.params:
            self.m[k] = np.array(arrays[f"adam_m.{k}"])
            self.v[k] = np.array(arrays[f"adam_v.{k}"])
