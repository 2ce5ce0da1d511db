"""Versioned npz run checkpoints with bit-exact round-trip.

A checkpoint holds everything training state depends on: parameters, masks,
optimizer moments, the three rng streams, step counter, cumulative FLOPs and
the exact config text.  Loading restores byte-identical continuation; a
config mismatch is an error rather than a silent behavior change.
"""

from __future__ import annotations

import json
import os

import numpy as np

FORMAT_VERSION = 1


def rng_state_json(rng):
    return json.dumps(rng.bit_generator.state)


def rng_from_json(s):
    rng = np.random.default_rng()
    rng.bit_generator.state = json.loads(s)
    return rng


def save_checkpoint(path, step, cum_flops, cfg_text, model, opt, masks, rngs):
    arrays = {
        "format_version": np.asarray(FORMAT_VERSION, dtype=np.int64),
        "step": np.asarray(step, dtype=np.int64),
        "cum_flops": np.asarray(cum_flops, dtype=np.float64),
        "config_text": np.frombuffer(cfg_text.encode(), dtype=np.uint8),
    }
    arrays.update(model.state_arrays())
    arrays.update(opt.state_arrays())
    for k, m in masks.items():
        arrays[f"mask.{k}"] = m
    for k, rng in rngs.items():
        arrays[f"rng.{k}"] = np.frombuffer(rng_state_json(rng).encode(), dtype=np.uint8)
    tmp = path + ".tmp"
    np.savez(tmp, **arrays)
    # savez appends .npz to names without it
    if not tmp.endswith(".npz") and os.path.exists(tmp + ".npz"):
        tmp = tmp + ".npz"
    os.replace(tmp, path)


def load_checkpoint(path):
    z = np.load(path, allow_pickle=False)
    ver = int(z["format_version"])
    if ver != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {ver}")
    out = {
        "step": int(z["step"]),
        "cum_flops": float(z["cum_flops"]),
        "config_text": bytes(z["config_text"]).decode(),
        "params": {}, "masks": {}, "adam": {}, "rngs": {},
    }
    for k in z.files:
        if k.startswith("param."):
            out["params"][k[len("param."):]] = z[k]
        elif k.startswith("mask."):
            out["masks"][k[len("mask."):]] = z[k]
        elif k.startswith("adam"):
            out["adam"][k] = z[k]
        elif k.startswith("rng."):
            out["rngs"][k[len("rng."):]] = bytes(z[k]).decode()
    return out
