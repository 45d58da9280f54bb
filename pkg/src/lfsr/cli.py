"""``lfsr`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/validation/configuration error,
3 training divergence.  Diagnostics go to stderr; data goes to files.
"""

import argparse
import logging
import os
import sys

from threadpoolctl import threadpool_limits

from .errors import DivergenceError, LFSRError

log = logging.getLogger("lfsr")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
CHECKPOINT_NAME = "{module}_last.ckpt"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="lfsr", description="Light field x4 super-resolution toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("prepare", help="build an HR/LR patch dataset")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", choices=["checker", "gradient", "noise", "mixed"])
    src.add_argument("--source", help="LF container, or a directory of containers")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, default=8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--patch", type=int, default=128)
    s.add_argument("--factor", type=int, default=4)
    s.add_argument("--size", type=int, default=0, help="synthetic texture size (default patch+32)")

    s = sub.add_parser("train", help="train one network")
    s.add_argument("--module", required=True, choices=["ahqrg", "ttsr", "lfrefine"])
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="JSON file of TrainConfig fields")
    s.add_argument("--seed", type=int)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--channels", type=int)
    s.add_argument("--stages", type=int)
    s.add_argument("--epi-weight", type=float)
    s.add_argument("--ahqrg", help="frozen AHQRG checkpoint (lfrefine only)")
    s.add_argument("--ttsr", help="frozen TTSR checkpoint (lfrefine only)")

    s = sub.add_parser("infer", help="super-resolve a light field")
    s.add_argument("--lr", required=True, help="low-resolution LF container")
    s.add_argument("--out", required=True)
    s.add_argument("--checkpoints", help=f"directory holding {CHECKPOINT_NAME.format(module='<module>')}")
    s.add_argument("--ahqrg")
    s.add_argument("--ttsr")
    s.add_argument("--lfrefine")

    s = sub.add_parser("eval", help="diagonal-view PSNR report")
    s.add_argument("--pred", required=True, help="infer output directory or an LF container")
    s.add_argument("--gt", required=True)
    s.add_argument("--report", required=True, help="CSV path")
    s.add_argument("--out", help="directory for the plot and view exports")

    s = sub.add_parser("epi", help="export one EPI slice as a 16-bit PNG")
    s.add_argument("--lf", required=True)
    s.add_argument("--orientation", required=True, choices=["h", "v"])
    s.add_argument("--u", type=int)
    s.add_argument("--v", type=int)
    s.add_argument("--x", type=int)
    s.add_argument("--y", type=int)
    s.add_argument("--out", required=True)
    return p


def cmd_prepare(args):
    from .data import PrepareConfig, prepare_dataset

    config = PrepareConfig(count=args.count, seed=args.seed, synthetic=args.synthetic or "mixed",
                           patch=args.patch, factor=args.factor, source_size=args.size)
    prepare_dataset(args.out, config, source=args.source)
    log.info("wrote %d samples to %s", args.count, args.out)


def cmd_train(args):
    from .data import load_dataset
    from .pipeline import load_model
    from .train import TrainConfig, train_ahqrg, train_lfrefine, train_ttsr

    overrides = dict(module=args.module, seed=args.seed, max_steps=args.max_steps,
                     learning_rate=args.learning_rate, batch_size=args.batch_size,
                     channels=args.channels, stages=args.stages, epi_weight=args.epi_weight)
    if args.config:
        config = TrainConfig.from_json(args.config, **overrides)
    else:
        config = TrainConfig.from_dict({k: v for k, v in overrides.items() if v is not None})
    if args.module == "lfrefine":
        # fail on missing upstream checkpoints before touching the dataset
        ahqrg, ttsr = load_model(args.ahqrg, "ahqrg"), load_model(args.ttsr, "ttsr")
    dataset = load_dataset(args.data)
    if args.module == "ahqrg":
        _, record = train_ahqrg(dataset, config, args.out)
    elif args.module == "ttsr":
        _, record = train_ttsr(dataset, config, args.out)
    else:
        _, record = train_lfrefine(dataset, config, args.out, ahqrg, ttsr)
    log.info("%s: final loss %s", args.module, record.metrics.get("final_loss"))


def _checkpoint(args, module):
    path = getattr(args, module)
    if path is None and args.checkpoints:
        path = os.path.join(args.checkpoints, CHECKPOINT_NAME.format(module=module))
    return path


def cmd_infer(args):
    from .lightfield import load_lf, save_image16, save_lf
    from .pipeline import infer_pipeline, load_models

    lf_lr = load_lf(args.lr)
    models = load_models(*(_checkpoint(args, m) for m in ("ahqrg", "ttsr", "lfrefine")))
    result = infer_pipeline(lf_lr, *models)
    save_lf(result.refined, os.path.join(args.out, "lfrefine"))
    save_lf(result.ttsr, os.path.join(args.out, "ttsr"))
    save_lf(result.bicubic, os.path.join(args.out, "bicubic"))
    save_image16(result.reference, os.path.join(args.out, "ahqrg.png"))


def load_prediction(path):
    """Variants and optional reference image from an infer output dir or a plain container."""
    from .figures import VARIANTS
    from .lightfield import is_lf_container, load_image16, load_lf

    if is_lf_container(path):
        return {"pred": load_lf(path)}, None
    variants = {}
    for name in VARIANTS:
        sub = os.path.join(path, name)
        if is_lf_container(sub):
            variants[name] = load_lf(sub)
    if not variants:
        raise LFSRError(f"{path} is neither an LF container nor an infer output directory")
    ref_path = os.path.join(path, "ahqrg.png")
    reference = load_image16(ref_path) if os.path.isfile(ref_path) else None
    return variants, reference


def cmd_eval(args):
    from .figures import emit_figure_data
    from .lightfield import load_lf
    from .losses import diagonal_psnr_report

    variants, reference = load_prediction(args.pred)
    gt = load_lf(args.gt)
    if args.out:
        table, _ = emit_figure_data(args.out, gt, variants, reference)
    else:
        table = diagonal_psnr_report(variants, gt)
    parent = os.path.dirname(os.path.abspath(args.report))
    os.makedirs(parent, exist_ok=True)
    table.to_csv(args.report)


def cmd_epi(args):
    from .lightfield import extract_epi, load_lf, save_image16

    if args.orientation == "h":
        fixed = (args.v, args.y)
        if None in fixed:
            raise UsageError("horizontal EPI needs --v and --y")
    else:
        fixed = (args.u, args.x)
        if None in fixed:
            raise UsageError("vertical EPI needs --u and --x")
    epi = extract_epi(load_lf(args.lf), args.orientation, *fixed)
    parent = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(parent, exist_ok=True)
    save_image16(epi.data, args.out)


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "infer": cmd_infer,
            "eval": cmd_eval, "epi": cmd_epi}


def thread_count():
    raw = os.environ.get("LFSR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"LFSR_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError(f"LFSR_THREADS must be a positive integer, got {raw!r}")
    return n


def run(argv=None):
    try:
        args = build_parser().parse_args(argv)
        threads = thread_count()
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        with threadpool_limits(limits=threads):
            COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"lfsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"lfsr {args.command}: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (LFSRError, OSError) as exc:
        print(f"lfsr {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
