import json
import logging

from config import DEFAULT_CONFIG, Config, load_defaults
from lib.utils import HParams, get_hparams_from_file, get_logger


def test_defaults_file():
    hps = load_defaults()
    assert hps.linalg.null_cutoff == 1e-8
    assert hps.budget.max_dim == 4096
    assert hps.sampling.min_samples == 100
    assert hps["verify"]["fd_step"] == 1e-4
    assert hps.output.digits == 17


def test_hparams_from_file():
    hps = get_hparams_from_file(DEFAULT_CONFIG)
    with open(DEFAULT_CONFIG) as f:
        document = json.load(f)
    assert hps.linalg.gap_factor == document["linalg"]["gap_factor"]
    assert hps["sampling"].chunk_size == document["sampling"]["chunk_size"]
    nested = HParams(a={"b": 2})
    assert isinstance(nested.a, HParams) and nested.a.b == 2


def test_config_without_flags():
    cfg = Config()
    assert cfg.seed == 0 and cfg.out == "json"
    assert cfg.rel_cutoff == 1e-8 and cfg.budget == 4096 and cfg.n_jobs == 1
    assert cfg.as_dict() == {"seed": 0, "tol": 1e-8, "budget": 4096, "out": "json", "quiet": False, "workers": 1}


def test_flags_override_defaults(tmp_path):
    args = Config.arg_parse().parse_args(["--seed", "9", "--tol", "1e-6", "--budget", "100", "--workers", "0",
                                          "--quiet"])
    cfg = Config(args)
    assert (cfg.seed, cfg.rel_cutoff, cfg.budget) == (9, 1e-6, 100)
    assert cfg.n_jobs >= 1
    assert cfg.logger.handlers[0].level == logging.WARNING


def test_alternative_defaults_file(tmp_path):
    with open(DEFAULT_CONFIG) as f:
        document = json.load(f)
    document["budget"]["max_dim"] = 12
    path = tmp_path / "small.json"
    path.write_text(json.dumps(document))
    cfg = Config(Config.arg_parse().parse_args(["--config", str(path)]))
    assert cfg.budget == 12


def test_log_file(tmp_path):
    logger = get_logger("lgm.test", log_dir=str(tmp_path / "logs"))
    get_logger("lgm.test", log_dir=str(tmp_path / "logs"))
    assert sum(isinstance(h, logging.FileHandler) for h in logger.handlers) == 1
    logger.debug("tensor Casimir ready")
    for h in logger.handlers:
        h.flush()
    line = (tmp_path / "logs" / "lgm.log").read_text().strip()
    assert line.split("\t")[1:] == ["lgm.test", "DEBUG", "tensor Casimir ready"]
