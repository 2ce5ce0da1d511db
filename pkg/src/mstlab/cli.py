"""Command line entry points.

Subcommands: train, eval, flops, pattern, export-heatmap, make-corpus.
Exit codes: 0 success, 1 configuration/usage errors, 2 runtime failures.
Report-producing commands write CSVs and render matching figures beside them.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, parse_config
from .tensor import NonFiniteError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser():
    p = _Parser(prog="mstlab", description="Mixed-sparsity training laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--resume", default=None, help="checkpoint to continue from")

    e = sub.add_parser("eval", help="evaluate a checkpoint on the validation split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--out", default=None, help="write eval.csv (and nothing else) here")

    f = sub.add_parser("flops", help="FLOP accounting for a config's schedules")
    f.add_argument("--config", required=True)
    f.add_argument("--out", required=True)

    a = sub.add_parser("pattern", help="inspect an attention pattern")
    a.add_argument("--kind", required=True, choices=["dense", "strided", "fixed"])
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--l", type=int, default=1)
    a.add_argument("--c", type=int, default=1)
    a.add_argument("--out", default=None)
    a.add_argument("--grid", action="store_true", help="print the mask as text")

    h = sub.add_parser("export-heatmap", help="render mask heatmaps from a checkpoint")
    h.add_argument("--ckpt", required=True)
    h.add_argument("--out", required=True)
    h.add_argument("--layer", default=None, help="single layer name (default: all)")

    c = sub.add_parser("make-corpus", help="write the synthetic text corpus")
    c.add_argument("--out", required=True)
    c.add_argument("--chars", type=int, default=1200000)
    c.add_argument("--seed", type=int, default=0)
    return p


def cmd_train(args):
    overrides = {} if args.seed is None else {"seed": args.seed}
    cfg = parse_config(args.config, overrides)
    from .trainer import run_training
    run_training(cfg, args.out, resume=args.resume)
    from .figures import training_curves
    training_curves(os.path.join(args.out, "metrics.csv"),
                    os.path.join(args.out, "training.png"))
    return 0


def cmd_eval(args):
    cfg = parse_config(args.config)
    from .trainer import Trainer
    tr = Trainer(cfg, args.out or ".", resume=args.ckpt, log=lambda *a: None)
    loss = tr.evaluate()
    ppl = float(np.exp(loss))
    print(f"val_loss {loss:.6f}  val_ppl {ppl:.4f}  step {tr.step}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval.csv"), "w") as f:
            f.write("step,val_loss,val_ppl\n")
            f.write(f"{tr.step},{loss:.8g},{ppl:.8g}\n")
    return 0


def cmd_flops(args):
    cfg = parse_config(args.config)
    from .config import build_plan, build_stride
    from .flops import (ModelDims, components_csv, forward_components,
                        schedule_profiles, totals_csv, training_totals)
    vocab = cfg.vocab_size
    if vocab == 0:
        from .data import ingest
        vocab = ingest(cfg.data_path, cfg.data_mode, cfg.train_frac).vocab_size
    dims = ModelDims(cfg.block_size, cfg.n_embd, cfg.n_layers, cfg.n_heads,
                     cfg.ffw_mult * cfg.n_embd, vocab)
    plan = build_plan(cfg)
    stride = build_stride(cfg)
    tokens = cfg.batch_size * cfg.block_size * cfg.grad_accum
    os.makedirs(args.out, exist_ok=True)
    components_csv(dims, 0.0, 1.0, os.path.join(args.out, "flop_components.csv"))
    tot = training_totals(dims, plan, stride, cfg.total_steps, tokens)
    totals_csv(tot, os.path.join(args.out, "flop_totals.csv"))
    from .figures import flop_breakdown, schedule_area
    flop_breakdown(forward_components(dims, 0.0, 1.0),
                   os.path.join(args.out, "flop_components.png"))
    s, q = schedule_profiles(plan, stride, cfg.total_steps, cfg.block_size)
    step_grid = np.arange(cfg.total_steps)
    schedule_area(step_grid, 1.0 - s, q, os.path.join(args.out, "flop_schedule.png"))
    print(f"accounted {tot['accounted_flops']:.4g} FLOPs, "
          f"dense {tot['dense_flops']:.4g}, reduction x{tot['reduction']:.3f}")
    return 0


def cmd_pattern(args):
    from .figures import pattern_figure
    from .patterns import build_pattern, to_text_grid
    pat = build_pattern(args.kind, args.n, args.l, args.c)
    print(f"{pat.kind} n={pat.n} l={pat.l} c={pat.c} "
          f"pairs={pat.pair_count()} q_atten={pat.q_atten():.6f}")
    if args.grid:
        print(to_text_grid(pat))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "pattern_stats.csv"), "w") as f:
            f.write("kind,n,l,c,pairs,q_atten\n")
            f.write(f"{pat.kind},{pat.n},{pat.l},{pat.c},"
                    f"{pat.pair_count()},{pat.q_atten():.8g}\n")
        pattern_figure(pat, os.path.join(args.out, "pattern.png"))
    return 0


def cmd_export_heatmap(args):
    from .checkpoint import load_checkpoint
    from .figures import mask_heatmap
    ck = load_checkpoint(args.ckpt)
    masks = ck["masks"]
    if args.layer is not None:
        if args.layer not in masks:
            raise ConfigError(f"layer {args.layer!r} not in checkpoint; "
                              f"have {sorted(masks)}")
        masks = {args.layer: masks[args.layer]}
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "mask_density.csv"), "w") as f:
        f.write("layer,rows,cols,active,density\n")
        for name, m in masks.items():
            f.write(f"{name},{m.shape[0]},{m.shape[1]},{int(m.sum())},"
                    f"{m.mean():.8g}\n")
            mask_heatmap(name, m, os.path.join(
                args.out, f"mask_{name.replace('.', '_')}.png"))
    print(f"wrote {len(masks)} heatmap(s) to {args.out}")
    return 0


def cmd_make_corpus(args):
    from .data import write_corpus
    n = write_corpus(args.out, args.chars, args.seed)
    print(f"wrote {n} chars to {args.out}")
    return 0


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "flops": cmd_flops,
    "pattern": cmd_pattern,
    "export-heatmap": cmd_export_heatmap,
    "make-corpus": cmd_make_corpus,
}


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NonFiniteError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2
    except Exception:
        import traceback
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
