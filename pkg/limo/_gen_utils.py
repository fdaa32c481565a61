"General utilities: logging, exceptions, lazy attributes and seeded substreams"

import logging

import numpy as np


logger = logging.getLogger('limo')
logger.addHandler(logging.NullHandler())


def set_log_level(level='INFO'):
    """Set the level of the package logger

    Parameters
    ----------
    level : str | int
        anything accepted by logging.Logger.setLevel, e.g. 'DEBUG' or 20.
    """
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)
    if not any(isinstance(h, logging.StreamHandler) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(levelname)s [%(name)s] %(message)s'))
        logger.addHandler(handler)
    return logger.level


class LoadError(ValueError):
    """Malformed data file; `lineno` is 1-based (header is line 1)"""
    def __init__(self, message, path=None, lineno=None):
        self.path = path
        self.lineno = lineno
        where = []
        if path is not None:
            where.append(str(path))
        if lineno is not None:
            where.append(f'line {lineno}')
        prefix = ', '.join(where)
        super().__init__(f'{prefix}: {message}' if prefix else message)


class EvaluationError(ValueError):
    "A measure is undefined on the given input"


class ConstructionError(ValueError):
    "An oracle score matrix of the requested kind cannot be built for this label matrix"


class TrainingSetupError(ValueError):
    "Sampling weights are all zero on an active side of the objective"


class NumericError(FloatingPointError):
    """Non-finite model weights"""
    def __init__(self, message, iteration=None):
        self.iteration = iteration
        super().__init__(message)


class ExperimentError(RuntimeError):
    "No experiment cell completed"


class LazyProperty:
    "http://blog.pythonisito.com/2008/08/lazy-descriptors.html"
    def __init__(self, func):
        self._func = func
        self.__name__ = func.__name__
        self.__doc__ = func.__doc__

    def __get__(self, obj, klass=None):
        if obj is None:
            return self
        result = obj.__dict__[self.__name__] = self._func(obj)
        return result


# spawn keys, one per consumer of randomness
PURPOSE = {
    'synth': 1,
    'split': 2,
    'init': 3,
    'label_triplets': 4,
    'instance_triplets': 5,
    'oracle': 6,
    'cell': 7,
}


def substream(seed, *key):
    """Independent counter-based generator for (seed, key)

    Parameters
    ----------
    seed : int
        non-negative user seed
    key : ints or str
        purpose and any further coordinates (replicate, variant, ...);
        strings are looked up in PURPOSE.

    Returns
    -------
    rng : numpy.random.Generator
        backed by Philox, so the stream does not depend on the platform.
    """
    if int(seed) < 0:
        raise ValueError(f"seed={seed} needs to be a non-negative integer")
    spawn_key = tuple(PURPOSE[k] if isinstance(k, str) else int(k) for k in key)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *key):
    "A fresh 32-bit integer seed derived from (seed, key)"
    spawn_key = tuple(PURPOSE[k] if isinstance(k, str) else int(k) for k in key)
    return int(np.random.SeedSequence(int(seed), spawn_key=spawn_key).generate_state(1)[0])
