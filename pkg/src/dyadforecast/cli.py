"""Command line: gen-synthetic, train, forecast, evaluate, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
import argparse
import logging
import os
import sys
import time

import numpy as np

from .errors import ContractError, DataError, NumericError, UsageError
from .motiondata import (
    OBS_LEN, PersonTrack, Session, denormalize_array, load_sessions, normalize_sample, read_sessions,
    session_samples, synth_sessions, training_view, write_sessions,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4

log = logging.getLogger("dyadforecast")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_config_file(path):
    """``key = value`` lines; ``#`` starts a comment. Dashes in keys become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


TRAIN_FLAGS = {
    "batch_size": int, "epochs": int, "lr": float, "warmup_epochs": int, "alpha1": float, "alpha2": float,
    "alpha3": float, "beta": float, "context_dim": int, "seed": int, "clip_norm": float, "checkpoint_every": int,
}


def build_parser():
    p = _Parser(prog="dyadforecast", description="Partner-conditioned landmark forecasting.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen-synthetic", help="write a synthetic session file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--count", type=int, required=True, help="number of sessions")
    g.add_argument("--coupling", type=float, default=0.8)
    g.add_argument("--jitter", type=float, default=0.005)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train on a session file")
    t.add_argument("--data", required=True)
    t.add_argument("--preset", choices=["full", "desk"], default="full")
    t.add_argument("--config", help="key = value file; flags override it")
    t.add_argument("--out-dir", default="run")
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--hidden", type=int, help="hidden size for every LSTM")
    for name, kind in TRAIN_FLAGS.items():
        t.add_argument("--" + name.replace("_", "-"), type=kind, dest=name)
    t.add_argument("--non-saturating", action="store_true", default=None)
    t.add_argument("--deterministic", action="store_true", default=None)
    t.add_argument("--quiet", action="store_true")

    f = sub.add_parser("forecast", help="predict futures for every person in a session file")
    f.add_argument("--checkpoint", required=True)
    f.add_argument("--data", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--plot-csv", help="also write predicted trajectories as CSV rows")

    e = sub.add_parser("evaluate", help="score a checkpoint against the constant-pose baseline")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", help="JSON report path")
    e.add_argument("--text", help="plain-text report path")
    e.add_argument("--curve-csv", help="per-horizon error curve CSV path")

    c = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--step", type=float, default=1e-5)
    c.add_argument("--entries", type=int, default=16, help="coordinates sampled per tensor")
    return p


# ----------------------------------------------------------------------------


def cmd_gen_synthetic(args):
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    if not 0.0 <= args.coupling <= 1.0:
        raise UsageError("--coupling must be in [0, 1]")
    sessions = synth_sessions(args.seed, args.count, args.coupling, args.jitter)
    write_sessions(sessions, args.out)
    print(f"wrote {len(sessions)} sessions to {args.out}")


def _train_config(args):
    from .trainer import PRESETS, TrainConfig

    values = dict(PRESETS[args.preset])
    if args.config:
        values.update(read_config_file(args.config))
    if args.hidden is not None:
        values.update(enc_hidden=args.hidden, gen_hidden=args.hidden, disc_hidden=args.hidden)
    for name in list(TRAIN_FLAGS) + ["non_saturating", "deterministic"]:
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    values["data"] = args.data
    try:
        return TrainConfig.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad training option: {exc}") from None


def cmd_train(args):
    from .trainer import load_training_state, train

    config = _train_config(args)
    samples = training_view(load_sessions(args.data))
    state = None
    if args.resume:
        state, _ = load_training_state(args.resume)
    t0 = time.perf_counter()
    params, history = train(config, samples, state=state, out_dir=args.out_dir,
                            progress=False if args.quiet else sys.stderr)
    print(
        f"trained {len(history)} epochs on {len(samples)} samples in {time.perf_counter() - t0:.1f}s; "
        f"checkpoint {os.path.join(args.out_dir, 'checkpoint.npz')}"
    )


def _load_params(path):
    from .model import load_checkpoint

    return load_checkpoint(path).params


def cmd_forecast(args):
    from .model import forecast

    params = _load_params(args.checkpoint)
    out_sessions = []
    rows = []
    for record, session in enumerate(read_sessions(args.data)):
        tracks = []
        for sample, person in zip(session_samples(session, record), session.persons):
            norm = normalize_sample(sample, window=OBS_LEN)
            pred = forecast(norm.target.observed, norm.partner.observed, params)
            pred = denormalize_array(pred, norm.target.mu, norm.target.sigma)
            tracks.append(PersonTrack(person.id, pred, predicted=True))
            if args.plot_csv:
                for t in range(len(pred)):
                    for j in range(pred.shape[1]):
                        rows.append((session.session_id, person.id, OBS_LEN + t, j, pred[t, j, 0], pred[t, j, 1]))
        out_sessions.append(Session(session.session_id, tracks, session.fps))
    write_sessions(out_sessions, args.out)
    if args.plot_csv:
        with open(args.plot_csv, "w", encoding="utf-8") as fh:
            fh.write("session_id,person,frame,landmark,x,y\n")
            for r in rows:
                fh.write(f"{r[0]},{r[1]},{r[2]},{r[3]},{r[4]!r},{r[5]!r}\n")
    print(f"wrote forecasts for {len(out_sessions)} sessions to {args.out}")


def cmd_evaluate(args):
    from .evaluation import evaluate

    params = _load_params(args.checkpoint)
    report = evaluate(params, load_sessions(args.data))
    text = report.to_text()
    print(text)
    if args.out:
        report.write_json(args.out)
    if args.text:
        with open(args.text, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.curve_csv:
        report.write_curve_csv(args.curve_csv)


def cmd_gradcheck(args):
    from .diagnostics import run_gradcheck

    t0 = time.perf_counter()
    results = run_gradcheck(args.seed, step=args.step, max_entries=args.entries)
    for r in results:
        print(f"{r.name:20s} max rel err {r.max_rel_error:.3e}  ({r.entries_checked} entries)")
    worst = max(r.max_rel_error for r in results)
    print(f"max relative error {worst:.3e} ({time.perf_counter() - t0:.1f}s)")
    if not np.isfinite(worst) or worst >= GRADCHECK_TOLERANCE:
        raise NumericError(f"gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:g}")


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ContractError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cli_main(argv=None):
    return main(argv)


if __name__ == "__main__":
    sys.exit(main())
