"""Decoder-only transformer with maskable weight matrices.

Pre-norm GPT: learned token + position embeddings, blocks of masked
multi-head attention and masked GELU MLP, final layernorm, and a vocabulary
projection tied to the token embedding by default.  No biases anywhere and
no dropout.  Every linear weight (and the tied head) can carry a sparsity
mask; masked entries are exactly zero in storage and the backward pass still
produces dense gradients for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


@dataclass(frozen=True)
class ModelConfig:
    vocab: int
    block_size: int = 256
    n_layers: int = 4
    n_heads: int = 4
    n_embd: int = 128
    ffw_mult: int = 4
    tie_head: bool = True
    mask_head: bool = True

    @property
    def d_ffw(self):
        return self.ffw_mult * self.n_embd

    @property
    def d_head(self):
        if self.n_embd % self.n_heads:
            raise ValueError("n_embd must divide evenly into heads")
        return self.n_embd // self.n_heads


class GPT:
    def __init__(self, cfg: ModelConfig, rng):
        self.cfg = cfg
        c, v = cfg.n_embd, cfg.vocab
        std = 0.02
        res_std = std / math.sqrt(2 * cfg.n_layers)

        def par(shape, s=std):
            return Tensor(rng.normal(0.0, s, size=shape), requires_grad=True)

        p = {"wte": par((v, c)), "wpe": par((cfg.block_size, c))}
        for i in range(cfg.n_layers):
            p[f"h{i}.ln1.g"] = Tensor(np.ones(c), requires_grad=True)
            p[f"h{i}.wq"] = par((c, c))
            p[f"h{i}.wk"] = par((c, c))
            p[f"h{i}.wv"] = par((c, c))
            p[f"h{i}.attn_proj"] = par((c, c), res_std)
            p[f"h{i}.ln2.g"] = Tensor(np.ones(c), requires_grad=True)
            p[f"h{i}.fc"] = par((c, cfg.d_ffw))
            p[f"h{i}.mlp_proj"] = par((cfg.d_ffw, c), res_std)
        p["lnf.g"] = Tensor(np.ones(c), requires_grad=True)
        if not cfg.tie_head:
            p["lm_head"] = par((v, c))
        self.params = p

    def param_count(self):
        return sum(p.size for p in self.params.values())

    def head_name(self):
        return "wte" if self.cfg.tie_head else "lm_head"

    def maskable_shapes(self):
        """Weight matrices eligible for sparsity masks, in evolution order."""
        c, m = self.cfg.n_embd, self.cfg
        shapes = {}
        for i in range(m.n_layers):
            shapes[f"h{i}.wq"] = (c, c)
            shapes[f"h{i}.wk"] = (c, c)
            shapes[f"h{i}.wv"] = (c, c)
            shapes[f"h{i}.attn_proj"] = (c, c)
            shapes[f"h{i}.fc"] = (c, m.d_ffw)
            shapes[f"h{i}.mlp_proj"] = (m.d_ffw, c)
        if m.mask_head:
            shapes[self.head_name()] = (m.vocab, c)
        return shapes

    def apply_masks(self, masks):
        """Zero stored weights at masked positions (invariant enforcement)."""
        for name, m in masks.items():
            self.params[name].data *= m

    def _linear(self, x, name, masks):
        w = self.params[name]
        m = masks.get(name)
        if m is None:
            return T.matmul(x, w)
        return T.masked_matmul(x, w, m)

    def forward(self, ids, pattern, masks):
        """Logits (B, T, V) for token ids (B, T) under an attention pattern."""
        cfg = self.cfg
        b, t = ids.shape
        if t > cfg.block_size:
            raise ValueError(f"sequence length {t} exceeds block size {cfg.block_size}")
        if pattern.n != t:
            raise ValueError("attention pattern size must match sequence length")
        p = self.params
        head_mask = masks.get(self.head_name())
        emb_mask = head_mask if cfg.tie_head else None
        x = T.add(T.embedding(p["wte"], ids, mask=emb_mask),
                  T.embedding(p["wpe"], np.arange(t)))
        add_mask = pattern.additive(x.data.dtype)
        scale = 1.0 / math.sqrt(cfg.d_head)
        for i in range(cfg.n_layers):
            a = T.layernorm(x, p[f"h{i}.ln1.g"])
            q = self._linear(a, f"h{i}.wq", masks)
            k = self._linear(a, f"h{i}.wk", masks)
            v = self._linear(a, f"h{i}.wv", masks)
            # (B, T, C) -> (B, H, T, Dh)
            q = T.transpose(T.reshape(q, (b, t, cfg.n_heads, cfg.d_head)), (0, 2, 1, 3))
            k = T.transpose(T.reshape(k, (b, t, cfg.n_heads, cfg.d_head)), (0, 2, 1, 3))
            v = T.transpose(T.reshape(v, (b, t, cfg.n_heads, cfg.d_head)), (0, 2, 1, 3))
            # scale q instead of the (B, H, T, T) score block: same product
            scores = T.matmul(T.mul(q, scale), T.transpose(k, (0, 1, 3, 2)))
            att = T.softmax_masked(scores, add_mask)
            y = T.matmul(att, v)
            y = T.reshape(T.transpose(y, (0, 2, 1, 3)), (b, t, cfg.n_embd))
            x = T.add(x, self._linear(y, f"h{i}.attn_proj", masks))
            h = T.layernorm(x, p[f"h{i}.ln2.g"])
            h = T.gelu(self._linear(h, f"h{i}.fc", masks))
            x = T.add(x, self._linear(h, f"h{i}.mlp_proj", masks))
        x = T.layernorm(x, p["lnf.g"])
        w_out = p[self.head_name()]
        if head_mask is None:
            logits = T.matmul(x, T.transpose(w_out, (1, 0)))
        else:
            logits = T.masked_matmul(x, w_out, head_mask, transpose_w=True)
        return logits

    def loss(self, ids, targets, pattern, masks):
        """Mean cross entropy of next-token targets (B, T)."""
        logits = self.forward(ids, pattern, masks)
        b, t, v = logits.shape
        return T.cross_entropy(T.reshape(logits, (b * t, v)), targets.reshape(-1))

    def loss_and_grads(self, ids, targets, pattern, masks):
        """One forward/backward; returns scalar loss value and dense grads."""
        for p in self.params.values():
            p.grad = None
        loss = self.loss(ids, targets, pattern, masks)
        T.assert_finite(loss, "training loss")
        loss.backward()
        grads = {k: p.grad for k, p in self.params.items()}
        return float(loss.data), grads

    def state_arrays(self):
        return {f"param.{k}": p.data for k, p in self.params.items()}

    def load_state_arrays(self, arrays):
        for k, p in self.params.items():
            a = arrays[f"param.{k}"]
            if a.shape != p.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {k}")
            p.data = np.array(a, dtype=p.data.dtype)
