import json
import logging
import os
import sys

from joblib import cpu_count

LOG_FORMAT = "%(asctime)s\t%(name)s\t%(levelname)s\t%(message)s"


def get_logger(name="lgm", log_dir=None, filename="lgm.log", level=logging.INFO):
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG)

    formatter = logging.Formatter(LOG_FORMAT)
    console = [h for h in logger.handlers if type(h) is logging.StreamHandler]
    if not console:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(formatter)
        logger.addHandler(h)
        console = [h]
    for h in console:
        # stderr may have been swapped since the handler was made
        h.stream = sys.stderr
        h.setLevel(level)

    if log_dir is not None:
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        path = os.path.abspath(os.path.join(log_dir, filename))
        if not any(isinstance(h, logging.FileHandler) and h.baseFilename == path for h in logger.handlers):
            h = logging.FileHandler(path)
            h.setLevel(logging.DEBUG)
            h.setFormatter(formatter)
            logger.addHandler(h)
    return logger


def get_optimal_threads(offset=0):
    return max(cpu_count() - offset, 1)


def get_hparams_from_file(config_path):
    with open(config_path, "r") as f:
        data = f.read()
    config = json.loads(data)

    hparams = HParams(**config)
    return hparams


class HParams:
    def __init__(self, **kwargs):
        for k, v in kwargs.items():
            if type(v) == dict:
                v = HParams(**v)
            self[k] = v

    def __getitem__(self, key):
        return getattr(self, key)

    def __setitem__(self, key, value):
        return setattr(self, key, value)

    def __repr__(self):
        return self.__dict__.__repr__()
