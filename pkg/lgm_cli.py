import argparse
import json
import os
import sys

import numpy as np
from tabulate import tabulate

CWD = os.path.dirname(os.path.abspath(__file__))
if CWD not in sys.path:
    sys.path.append(CWD)

from config import Config, OUTPUT_OPTIONS
from lib.error_handling import LgmError, UsageError, error_document, error_text, exit_code
from lib.lie_catalog import (FAMILIES, GroupSpec, build_representation, casimir_eigenvalue,
                             closed_form_completeness, group_residual, split_casimir)
from lib.moments import (SPANNING_SOURCES, MeasureSpec, expect_product, moment, spanning_set,
                         weingarten)
from lib.sampling import BrownianPathSpec, MCEstimate, RngSpec, brownian_path, haar_samples, verify_theorem_a
from lib.tensor_core import tensor_to_json
from lib.wilson_loops import CLOSED, GENERIC, LoopSum, loop_from_json, loop_sum_from_json


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _complex(z):
    return [float(np.real(z)), float(np.imag(z))]


def _matrix(m):
    return [[_complex(z) for z in row] for row in np.asarray(m)]


def _load_json(path, what):
    try:
        with open(path, "r") as f:
            return json.load(f)
    except OSError as e:
        raise UsageError(f"cannot read {what} file {path!r}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} file {path!r} is not valid JSON: {e}")


def _tensor_order(text):
    try:
        n, n_dual = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--tensor expects 'n,n_dual', got {text!r}")
    return n, n_dual


def _rep(args):
    spec = GroupSpec(args.family, args.n) if args.n is not None else GroupSpec(args.family)
    return build_representation(spec)


def _plaquettes(args):
    if not args.plaquettes:
        return ()
    document = _load_json(args.plaquettes, "plaquette")
    records = document if isinstance(document, list) else [document]
    return tuple(loop_from_json(r) for r in records)


def _measure(args):
    return MeasureSpec.parse(args.measure, _plaquettes(args))


def _loop_factors(document):
    """{"factors": [loop sums]}, a list of records (one sum) or a single loop record."""
    if isinstance(document, dict) and "factors" in document:
        return [loop_sum_from_json(f) for f in document["factors"]]
    return [loop_sum_from_json(document)]


# ---- subcommands ----

def group_info(args, cfg):
    rep = _rep(args)
    residual = np.max(np.abs(split_casimir(rep).k.data - closed_form_completeness(rep.spec).k.data))
    return {
        "group": rep.spec.to_json(),
        "label": rep.spec.label,
        "dim": rep.dim,
        "lie_dim": rep.lie_dim,
        "lambda": rep.lam,
        "lambda_closed_form": casimir_eigenvalue(rep.spec),
        "kappa_scale": rep.kappa_scale,
        "completeness_residual": float(residual),
    }


def moment_cmd(args, cfg):
    rep = _rep(args)
    n, n_dual = _tensor_order(args.tensor)
    op = moment(rep, n, n_dual, _measure(args), cfg.rel_cutoff, cfg.budget)
    return {
        "group": rep.spec.to_json(),
        "tensor": [n, n_dual],
        "measure": op.measure.describe(),
        "rank": op.rank,
        "spectrum": [{"eigenvalue": c, "multiplicity": k} for c, k in op.spectrum],
        "moment": tensor_to_json(op.as_tensor(), cfg.hparams.output.drop_below),
    }


def weingarten_cmd(args, cfg):
    rep = _rep(args)
    if args.tensor is not None:
        n, n_dual = _tensor_order(args.tensor)
    elif args.order is not None:
        n = n_dual = args.order
    else:
        raise UsageError("weingarten needs --tensor n,n_dual or --order n")
    ss = spanning_set(rep, n, n_dual, args.source, cfg.rel_cutoff, cfg.budget)
    wm = weingarten(ss, cfg.rel_cutoff)
    return {
        "group": rep.spec.to_json(),
        "tensor": [n, n_dual],
        "source": ss.source,
        "labels": [str(label) for label in ss.labels],
        "gram": _matrix(wm.gram),
        "wg": _matrix(wm.wg),
    }


def _estimate_json(value, seed):
    if isinstance(value, MCEstimate):
        return {**value.to_json(), "seed": seed}
    return {"value": _complex(value)}


def expect_cmd(args, cfg):
    factors = _loop_factors(_load_json(args.loops, "loop"))
    measure = _measure(args)
    value = expect_product(factors, measure, cfg.rel_cutoff, cfg.budget, samples=args.samples,
                           rng=RngSpec(cfg.seed))
    return {"measure": measure.describe(), **_estimate_json(value, cfg.seed)}


def sample_cmd(args, cfg):
    rep = _rep(args)
    samples = haar_samples(rep, args.count, RngSpec(cfg.seed))
    return [{"index": k, "matrix": _matrix(g), "residual": group_residual(rep, g)}
            for k, g in enumerate(samples)]


def brownian_path_cmd(args, cfg):
    rep = _rep(args)
    spec = BrownianPathSpec(args.t, args.steps or cfg.hparams.sampling.brownian_steps, RngSpec(cfg.seed))
    g = brownian_path(rep, spec)
    return {"group": rep.spec.to_json(), "t": spec.t, "steps": spec.steps,
            "endpoint": _matrix(g), "residual": group_residual(rep, g)}


def verify_cmd(args, cfg):
    document = _load_json(args.loops, "loop")
    records = document if isinstance(document, list) else [document]
    loops = [loop_from_json(r) for r in records]
    report = verify_theorem_a(loops, _measure(args), form=args.form, budget=cfg.budget, samples=args.samples,
                              rng=RngSpec(cfg.seed), n_jobs=cfg.n_jobs, progress=not cfg.quiet)
    return report.to_json()


# ---- parser and output ----

def _add_group(parser, tensor=False, required=True):
    parser.add_argument("--family", type=str, required=True, help=f"Group family: {'|'.join(FAMILIES)}")
    parser.add_argument("--n", type=int, default=None, help="N of the family (exponent for u1)")
    if tensor:
        parser.add_argument("--tensor", type=str, required=required, help="Tensor order 'n,n_dual'")


def _add_measure(parser):
    parser.add_argument("--measure", type=str, default="haar",
                        help="haar | brownian:t=<t> | wilson:beta=<beta>")
    parser.add_argument("--plaquettes", type=str, default=None, help="JSON list of plaquette loops (Wilson)")
    parser.add_argument("--samples", type=int, default=None, help="Monte-Carlo sample count")


def build_parser():
    common = Config.arg_parse()
    parser = _Parser(prog="lgm", description="Lie-group moments and Wilson-loop expectations")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    group = commands.add_parser("group", help="Group catalog")
    group_commands = group.add_subparsers(dest="action", required=True, parser_class=_Parser)
    info = group_commands.add_parser("info", parents=[common], help="Dimensions, lambda and completeness residual")
    _add_group(info)
    info.set_defaults(func=group_info)

    p = commands.add_parser("moment", parents=[common], help="Moment operator T on V^n (x) V*^n'")
    _add_group(p, tensor=True)
    p.add_argument("--measure", type=str, default="haar", help="haar | brownian:t=<t>")
    p.set_defaults(func=moment_cmd, plaquettes=None)

    p = commands.add_parser("weingarten", parents=[common], help="Gram matrix and Weingarten map")
    _add_group(p, tensor=True, required=False)
    p.add_argument("--order", type=int, default=None, help="Shorthand for --tensor n,n")
    p.add_argument("--source", type=str, default="nullspace", choices=SPANNING_SOURCES)
    p.set_defaults(func=weingarten_cmd)

    p = commands.add_parser("expect", parents=[common], help="Expectation of a product of loop sums")
    p.add_argument("--loops", type=str, required=True, help="JSON loop-sum file")
    _add_measure(p)
    p.set_defaults(func=expect_cmd)

    p = commands.add_parser("sample", parents=[common], help="Haar samples")
    _add_group(p)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=sample_cmd)

    p = commands.add_parser("brownian-path", parents=[common], help="Endpoint of one Brownian path")
    _add_group(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=brownian_path_cmd)

    verify = commands.add_parser("verify", help="Numerical identity checks")
    verify_commands = verify.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = verify_commands.add_parser("theorem-a", parents=[common], help="Laplacian integration-by-parts identity")
    p.add_argument("--loops", type=str, required=True, help="JSON list of loops forming the product")
    p.add_argument("--form", type=str, default=CLOSED, choices=[CLOSED, GENERIC])
    _add_measure(p)
    p.set_defaults(func=verify_cmd)
    return parser


def _rows(document, prefix=""):
    if isinstance(document, dict):
        for key, value in document.items():
            yield from _rows(value, f"{prefix}{key}." if not isinstance(value, (int, float, str, bool)) else f"{prefix}{key}")
    elif isinstance(document, list) and document and isinstance(document[0], (dict, list)):
        for k, value in enumerate(document):
            yield from _rows(value, f"{prefix}{k}.")
    else:
        yield prefix.rstrip("."), document


def emit(result, cfg, command, stream=None):
    stream = stream or sys.stdout
    if cfg.out == "jsonl":
        for item in (result if isinstance(result, list) else [result]):
            print(json.dumps(item), file=stream)
    elif cfg.out == "text":
        print(tabulate(list(_rows(result)), headers=["key", "value"], floatfmt=".17g"), file=stream)
    else:
        print(json.dumps({"command": command, "config": cfg.as_dict(), "result": result}, indent=1), file=stream)


def _requested_out(argv):
    for k, arg in enumerate(argv):
        if arg == "--out" and k + 1 < len(argv) and argv[k + 1] in OUTPUT_OPTIONS:
            return argv[k + 1]
        if arg.startswith("--out="):
            return arg.split("=", 1)[1]
    return "json"


def dispatch(argv, stream=None):
    """Run one command; returns the process exit code."""
    stream = stream or sys.stdout
    argv = list(argv)
    try:
        args = build_parser().parse_args(argv)
        cfg = Config(args)
        command = " ".join(filter(None, [args.command, getattr(args, "action", None)]))
        result = args.func(args, cfg)
        emit(result, cfg, command, stream)
        return 0
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0
    except LgmError as e:
        if _requested_out(argv) == "text":
            print(f"error ({e.kind}): {e}", file=sys.stderr)
        else:
            print(json.dumps(error_document(e)), file=stream)
        return exit_code(e)
    except Exception as e:
        print(error_text(" ".join(["lgm"] + argv), e), file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
