from typing import NamedTuple

import numpy as np
from scipy import stats


MASK64 = (1 << 64) - 1


def splitmix64(value: int) -> int:
    """One step of the SplitMix64 output function."""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_seed(master: int, index: int) -> int:
    """64-bit seed of stream `index` under `master`. Streams are fixed by
    (master, index) alone, never by worker count or scheduling."""
    if index < 0:
        raise ValueError(f"stream index must be non-negative, got {index}")
    return splitmix64(splitmix64(master & MASK64) ^ (index & MASK64))


def stream_rng(master: int, index: int) -> np.random.Generator:
    return np.random.default_rng(stream_seed(master, index))


def numba_seed(seed: int) -> int:
    # np.random.seed inside jitted code only takes 32-bit integers
    return (seed >> 32) ^ (seed & 0xFFFFFFFF)


class LinearFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def linear_fit(x, y) -> LinearFit:
    result = stats.linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return LinearFit(
        float(result.slope), float(result.intercept), float(result.rvalue**2)
    )


def is_monotone(values, increasing: bool = True, tol: float = 0.0) -> bool:
    steps = np.diff(np.asarray(values, dtype=float))
    if not increasing:
        steps = -steps
    return bool(np.all(steps >= -tol))


def sign(value: int) -> int:
    if value > 0:
        return 1
    elif value < 0:
        return -1
    return value
