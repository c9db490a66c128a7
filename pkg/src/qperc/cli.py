"""Command-line interface.

Subcommands: ``protocol run``, ``train quantum|classical|baseline``,
``privacy table``, ``dataset gen``, ``reproduce <figure>``.  Flags mirror the
ExperimentSpec fields; defaults can come from a plain key=value config file
(--config) and the output directory from $QPERC_OUTPUT_DIR.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import harness, privacy
from .baselines import BaselineMethod, train_baseline
from .data import parse_dataset_spec, save_csv
from .noise import parse_generator
from .perceptron import train_classical, train_quantum
from .protocol import ProtocolParams, run_data_system, transcript_text
from .qstate import RegisterLayout

ENV_OUT_DIR = "QPERC_OUTPUT_DIR"


def read_config(path):
    """Plain-text key=value config; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def _apply_config(args, config):
    for key, value in config.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is None:
            setattr(args, attr, value)
    return args


def _out_dir(args):
    out = args.out or os.environ.get(ENV_OUT_DIR) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _seeded(seed, party):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(party,)))


def cmd_protocol_run(args):
    n, k = args.n, args.k
    layout = RegisterLayout(n, k)
    nk = layout.data_qubits
    x = args.x if args.x is not None else "0" * nk
    strategy = harness.parse_attack(args.attack, n, k)
    params = ProtocolParams(
        layout,
        f_int=lambda d: (d >> (nk - 1)) & 1,
        alice_rng=_seeded(args.seed, 0),
        bob_rng=_seeded(args.seed, 1),
        record_transcript=args.transcript,
    )
    detected = 0
    for i in range(args.trials):
        outcome = run_data_system(x, params, strategy)
        detected += outcome.detected
        if args.transcript and i == 0:
            sys.stdout.write(transcript_text(outcome))
    print(f"trials={args.trials} detected={detected} "
          f"rate={detected / args.trials:.6g}")
    return 0


def cmd_train(args):
    tset = parse_dataset_spec(args.dataset)
    if args.mode == "classical":
        clf, record = train_classical(tset.X, tset.labels, T=args.T)
        ledger = None
    elif args.mode == "quantum":
        gen = parse_generator(args.noise)
        strategy = harness.parse_attack(args.attack, tset.codec.n, tset.k)
        clf, record, ledger = train_quantum(
            tset, gen,
            alice_rng=_seeded(args.seed, 0), bob_rng=_seeded(args.seed, 1),
            T=args.T, strategy=strategy, protocol_mode=args.protocol_mode)
    else:  # baseline
        method = BaselineMethod(args.method, float(args.delta),
                                grid_size=args.grid_size)
        records = train_baseline(tset, method, rng=_seeded(args.seed, 0),
                                 T=args.T, reps=1)
        record = records[0]
        clf = None
        ledger = None
    print(f"terminated={record.terminated} rounds={record.rounds} "
          f"updates={record.updates} success={record.success} "
          f"detections={record.detection_events}")
    if clf is not None:
        w = " ".join(f"{v:.6g}" for v in clf.w)
        print(f"w=[{w}] b={clf.b:.6g}")
    if ledger is not None and ledger.examples_read:
        print(f"examples_read_by_attacker={ledger.examples_read}")
    return 0


def cmd_privacy_table(args):
    n2_values = [int(v) for v in args.n2.split(",")]
    rows = privacy.privacy_table(args.n, args.k, n2_values, n1=args.n1)
    print("n2,p_detect_attribute,p_detect_example,expected_examples_read,privacy_level")
    for row in rows:
        print(f"{row['n2']},{row['p_detect_attribute']:.6g},"
              f"{row['p_detect_example']:.6g},"
              f"{row['expected_examples_read']:.6g},{row['privacy_level']}")
    return 0


def cmd_dataset_gen(args):
    tset = parse_dataset_spec(args.spec)
    save_csv(tset, args.path)
    print(f"wrote {tset.N} examples ({tset.k} attributes) to {args.path}")
    return 0


def cmd_reproduce(args):
    if args.figure in ("fig3", "fig4") and not args.full:
        print("note: desk-scale grid; pass --full for the complete sweep "
              "(much slower)", file=sys.stderr)
    spec = harness.reproduce_spec(args.figure, full=args.full,
                                  master_seed=args.seed)
    rows = harness.run_experiment(spec)
    out = _out_dir(args)
    path = os.path.join(out, f"{args.figure}.csv")
    harness.write_rows(rows, path)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="qperc")
    parser.add_argument("--config", help="key=value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("protocol", help="run the three-round data system")
    psub = p.add_subparsers(dest="subcommand", required=True)
    pr = psub.add_parser("run")
    pr.add_argument("--n", type=int, default=8)
    pr.add_argument("--k", type=int, default=2)
    pr.add_argument("--x", help="input bit string (defaults to zeros)")
    pr.add_argument("--attack", default="honest")
    pr.add_argument("--trials", type=int, default=1)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--transcript", action="store_true")
    pr.set_defaults(func=cmd_protocol_run)

    t = sub.add_parser("train", help="train a perceptron")
    tsub = t.add_subparsers(dest="mode", required=True)
    for mode in ("quantum", "classical", "baseline"):
        tp = tsub.add_parser(mode)
        tp.add_argument("--dataset", default="gen2:N=64:seed=0")
        tp.add_argument("--T", type=int, default=40000)
        tp.add_argument("--seed", type=int, default=0)
        if mode == "quantum":
            tp.add_argument("--noise", default="R0:delta=1")
            tp.add_argument("--attack", default="honest")
            tp.add_argument("--protocol-mode", dest="protocol_mode",
                            default="auto", choices=["auto", "fast", "full"])
        if mode == "baseline":
            tp.add_argument("--method", default="uniform",
                            choices=["uniform", "normal", "recon1d", "recon2d"])
            tp.add_argument("--delta", default="1")
            tp.add_argument("--grid-size", dest="grid_size", type=int, default=20)
        tp.set_defaults(func=cmd_train, mode=mode)

    pv = sub.add_parser("privacy", help="closed-form privacy arithmetic")
    pvsub = pv.add_subparsers(dest="subcommand", required=True)
    pt = pvsub.add_parser("table")
    pt.add_argument("--n", type=int, default=8)
    pt.add_argument("--k", type=int, default=2)
    pt.add_argument("--n1", type=int, default=None)
    pt.add_argument("--n2", default="2,4,8")
    pt.set_defaults(func=cmd_privacy_table)

    d = sub.add_parser("dataset", help="generate or export datasets")
    dsub = d.add_subparsers(dest="subcommand", required=True)
    dg = dsub.add_parser("gen")
    dg.add_argument("--spec", default="gen1:N=64:seed=0")
    dg.add_argument("path")
    dg.set_defaults(func=cmd_dataset_gen)

    r = sub.add_parser("reproduce", help="emit figure/claim CSV data")
    r.add_argument("figure", choices=["fig3", "fig4", "thm2", "leak", "recon"])
    r.add_argument("--out", default=None)
    r.add_argument("--full", action="store_true",
                   help="full grids and repetition counts (slow)")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        _apply_config(args, read_config(args.config))
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
