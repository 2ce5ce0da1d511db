"""Training loop tying model, schedules, topology and accounting together.

Step timeline (t counts completed optimizer steps): the forward pass at step
t always sees the mask and attention pattern the schedules dictate for t.
Topology evolution therefore runs at the end of step t-1 whenever t is an
update boundary, using the gradients just computed, so a checkpoint written
between steps needs no gradient state and resume is byte-identical.
"""

from __future__ import annotations

import os
import sys

import numpy as np

from . import data as D
from . import tensor as T
from .checkpoint import load_checkpoint, rng_from_json, save_checkpoint
from .config import (build_lr, build_model_config, build_plan, build_stride,
                     build_zeta, config_text)
from .flops import ModelDims, step_flops
from .model import GPT
from .optim import AdamW
from .patterns import pattern_for_stride
from .topology import (Allocation, er_allocate, global_evolve, global_sparsity,
                       init_mask, scheme_params)

METRICS_HEADER = ("step,train_loss,val_loss,val_ppl,sparsity,zeta,stride,lr,"
                  "cum_flops\n")
EVOLUTION_HEADER = ("step,layer,n_prune,n_grow,n_rand,n_grad,sparsity_before,"
                    "sparsity_after\n")


class Trainer:
    def __init__(self, cfg, out_dir, resume=None, log=print):
        T.set_default_dtype(cfg.dtype)
        self.cfg = cfg
        self.out = out_dir
        self.log = log
        os.makedirs(out_dir, exist_ok=True)

        self.corpus = D.ingest(cfg.data_path, cfg.data_mode, cfg.train_frac)
        vocab = cfg.vocab_size or self.corpus.vocab_size
        if vocab < self.corpus.vocab_size:
            raise ValueError(f"vocab_size {vocab} smaller than corpus "
                             f"vocabulary {self.corpus.vocab_size}")
        self.plan = build_plan(cfg)
        self.zeta_sched = build_zeta(cfg)
        self.stride_sched = build_stride(cfg)
        self.lr_sched = build_lr(cfg)
        self.dims = ModelDims(cfg.block_size, cfg.n_embd, cfg.n_layers,
                              cfg.n_heads, cfg.ffw_mult * cfg.n_embd, vocab)
        self.tokens_per_step = cfg.batch_size * cfg.block_size * cfg.grad_accum

        ss = np.random.SeedSequence(cfg.seed)
        data_ss, init_ss, topo_ss = ss.spawn(3)
        self.data_rng = np.random.default_rng(data_ss)
        init_rng = np.random.default_rng(init_ss)
        self.topo_rng = np.random.default_rng(topo_ss)

        self.model = GPT(build_model_config(cfg, vocab), init_rng)
        shapes = self.model.maskable_shapes()
        self._alloc_cache = {}
        alloc = self.allocation(self.plan.sparsity(0))
        self.masks = {k: init_mask(s, alloc.counts[k], init_rng)
                      for k, s in shapes.items()}
        self.model.apply_masks(self.masks)
        self.opt = AdamW(self.model.params, cfg.beta1, cfg.beta2, cfg.adam_eps,
                         cfg.weight_decay)
        self.step = 0
        self.cum_flops = 0.0
        self.cfg_text = config_text(cfg)
        self._eval_set = None
        self._pattern = None
        self._stride = None

        if resume is not None:
            self._load(resume)

    # -- setup helpers ----------------------------------------------------

    def allocation(self, target) -> Allocation:
        key = round(target, 12)
        if key not in self._alloc_cache:
            self._alloc_cache[key] = er_allocate(target, self.model.maskable_shapes())
        return self._alloc_cache[key]

    def pattern_at(self, t):
        l = self.stride_sched.stride_at(t)
        if l != self._stride:
            self._stride = l
            self._pattern = pattern_for_stride(self.cfg.block_size, l)
        return self._pattern

    def _load(self, path):
        ck = load_checkpoint(path)
        if ck["config_text"] != self.cfg_text:
            raise ValueError("checkpoint was written with a different config")
        self.model.load_state_arrays({f"param.{k}": v for k, v in ck["params"].items()})
        for k in self.masks:
            self.masks[k] = ck["masks"][k].astype(bool)
        self.opt.load_state_arrays(ck["adam"])
        self.data_rng = rng_from_json(ck["rngs"]["data"])
        self.topo_rng = rng_from_json(ck["rngs"]["topo"])
        self.step = ck["step"]
        self.cum_flops = ck["cum_flops"]

    def save(self, path):
        save_checkpoint(path, self.step, self.cum_flops, self.cfg_text,
                        self.model, self.opt, self.masks,
                        {"data": self.data_rng, "topo": self.topo_rng})

    # -- evaluation -------------------------------------------------------

    def evaluate(self):
        if self._eval_set is None:
            self._eval_set = D.eval_batches(self.corpus, self.cfg.batch_size,
                                            self.cfg.block_size,
                                            self.cfg.eval_batches)
        pat = self.pattern_at(self.step if self.step < self.cfg.total_steps
                              else self.cfg.total_steps - 1)
        tot = 0.0
        with T.no_grad():
            for x, y in self._eval_set:
                tot += float(self.model.loss(x, y, pat, self.masks).data)
        return tot / len(self._eval_set)

    # -- main loop --------------------------------------------------------

    def train(self):
        fresh = self.step == 0
        if fresh:
            mf = open(os.path.join(self.out, "metrics.csv"), "w")
            ef = open(os.path.join(self.out, "evolution.csv"), "w")
            mf.write(METRICS_HEADER)
            ef.write(EVOLUTION_HEADER)
            with open(os.path.join(self.out, "config.used"), "w") as f:
                f.write(self.cfg_text)
        else:
            self._trim_logs()
            mf = open(os.path.join(self.out, "metrics.csv"), "a")
            ef = open(os.path.join(self.out, "evolution.csv"), "a")
        try:
            self._loop(mf, ef)
        finally:
            mf.close()
            ef.close()

    def _trim_logs(self):
        # a crashed run may have logged past the checkpoint being resumed;
        # drop those rows so the continuation reproduces them identically.
        # metrics rows for step t are written before the step-(t+1) checkpoint
        # (keep t < step); the evolution event at the checkpoint step is part
        # of the saved mask state (keep t <= step).
        for fname, cut in (("metrics.csv", self.step), ("evolution.csv", self.step + 1)):
            path = os.path.join(self.out, fname)
            if not os.path.exists(path):
                raise FileNotFoundError(f"resume expects existing {path}")
            with open(path) as f:
                lines = f.readlines()
            kept = [ln for i, ln in enumerate(lines)
                    if i == 0 or not ln.split(",")[0].isdigit()
                    or int(ln.split(",")[0]) < cut]
            with open(path, "w") as f:
                f.writelines(kept)

    def _loop(self, mf, ef):
        cfg = self.cfg
        params = self.model.params
        while self.step < cfg.total_steps:
            t = self.step
            pat = self.pattern_at(t)
            log_now = (t % cfg.log_interval == 0) or (t == cfg.total_steps - 1)
            eval_now = (t % cfg.eval_interval == 0) or (t == cfg.total_steps - 1)
            sparsity_now = global_sparsity(self.masks) if log_now else None

            for p in params.values():
                p.grad = None
            train_loss = 0.0
            for _ in range(cfg.grad_accum):
                x, y = D.sample_batch(self.corpus, "train", cfg.batch_size,
                                      cfg.block_size, self.data_rng)
                loss = self.model.loss(x, y, pat, self.masks)
                T.assert_finite(loss, f"training loss at step {t}")
                loss.backward()
                train_loss += float(loss.data)
            train_loss /= cfg.grad_accum
            grads = {}
            for k, p in params.items():
                g = p.grad
                if cfg.grad_accum > 1:
                    g = g / cfg.grad_accum
                grads[k] = g
            lr = self.lr_sched.lr_at(t)
            self.opt.step(grads, lr, masks=self.masks, clip=cfg.grad_clip)
            self.cum_flops += step_flops(self.dims, self.plan.sparsity(t),
                                         self.pattern_at(t).q_atten(),
                                         self.tokens_per_step)

            if log_now:
                val = f"{self.evaluate():.8g}" if eval_now else ""
                ppl = f"{np.exp(float(val)):.8g}" if val else ""
                mf.write(f"{t},{train_loss:.8g},{val},{ppl},"
                         f"{sparsity_now:.8g},{self.zeta_sched.zeta(t):.8g},"
                         f"{self.stride_sched.stride_at(t)},{lr:.8g},"
                         f"{self.cum_flops:.12g}\n")
                mf.flush()
                if eval_now:
                    self.log(f"step {t}: train {train_loss:.4f} val {val} "
                             f"sparsity {sparsity_now:.4f} lr {lr:.2e}")

            t1 = t + 1
            if t1 % cfg.update_every == 0 and t1 < cfg.total_steps:
                self._evolve(t1, grads, ef)
            self.step = t1
            if t1 % cfg.checkpoint_interval == 0 or t1 == cfg.total_steps:
                self.save(os.path.join(self.out, "checkpoint.npz"))

    def _evolve(self, t1, grads, ef):
        cfg = self.cfg
        target = self.plan.sparsity(t1)
        alloc = self.allocation(target)
        zeta, rand_frac, lam = scheme_params(
            cfg.scheme, self.zeta_sched.zeta(t1), cfg.rand_frac, cfg.mest_lambda)

        def on_change(name, pruned, grown):
            p = self.model.params[name]
            p.data.reshape(-1)[pruned] = 0.0
            changed = np.concatenate([pruned, grown])
            self.opt.m[name].reshape(-1)[changed] = 0.0
            self.opt.v[name].reshape(-1)[changed] = 0.0

        records = global_evolve(self.masks,
                                {k: self.model.params[k].data for k in self.masks},
                                {k: grads[k] for k in self.masks},
                                alloc, zeta, rand_frac, lam, self.topo_rng,
                                on_change)
        for r in records:
            ef.write(f"{t1},{r.name},{r.n_prune},{r.n_grow},{r.n_rand},"
                     f"{r.n_grad},{r.sparsity_before:.8g},{r.sparsity_after:.8g}\n")
        if records:
            ef.flush()


def run_training(cfg, out_dir, resume=None, log=print):
    tr = Trainer(cfg, out_dir, resume=resume, log=log)
    tr.train()
    return tr
