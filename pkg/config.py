import argparse
import logging
import os
from functools import lru_cache

from lib.utils import HParams, get_hparams_from_file, get_logger, get_optimal_threads

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")
DEFAULT_CONFIG = os.path.join(CONFIG_DIR, "lgm.json")
OUTPUT_OPTIONS = ["json", "jsonl", "text"]


@lru_cache
def load_defaults(config_path=DEFAULT_CONFIG) -> HParams:
    return get_hparams_from_file(config_path)


class Config:
    """Resolved settings for one CLI run: JSON defaults overridden by global flags."""

    def __init__(self, args=None):
        args = args if args is not None else self.arg_parse().parse_args([])
        self.hparams = load_defaults(args.config) if args.config else load_defaults()
        self.seed = args.seed
        self.out = args.out
        self.quiet = args.quiet
        self.rel_cutoff = args.tol if args.tol is not None else self.hparams.linalg.null_cutoff
        self.budget = args.budget if args.budget is not None else self.hparams.budget.max_dim
        self.n_jobs = args.workers if args.workers is not None else self.hparams.sampling.n_jobs
        if self.n_jobs == 0:
            self.n_jobs = get_optimal_threads()
        self.logger = get_logger(
            "lib", log_dir=args.log_dir, level=logging.WARNING if self.quiet else logging.INFO)

    @staticmethod
    def arg_parse(parser=None) -> argparse.ArgumentParser:
        parser = parser or argparse.ArgumentParser(add_help=False)
        parser.add_argument("--seed", type=int, default=0, help="Seed of the random stream")
        parser.add_argument("--tol", type=float, default=None,
                            help="Relative null-space cutoff for spectral projectors")
        parser.add_argument("--budget", type=int, default=None,
                            help="Largest tensor-representation dimension d^(n+n') allowed")
        parser.add_argument("--out", type=str, default="json", choices=OUTPUT_OPTIONS,
                            help="Output document format")
        parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
        parser.add_argument("--config", type=str, default=None, help="Alternative defaults file")
        parser.add_argument("--workers", type=int, default=None,
                            help="Parallel sampling workers (0 = all cores)")
        parser.add_argument("--log-dir", type=str, default=None,
                            help="Also write a DEBUG log file (lgm.log) to this directory")
        return parser

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tol": self.rel_cutoff,
            "budget": self.budget,
            "out": self.out,
            "quiet": self.quiet,
            "workers": self.n_jobs,
        }
