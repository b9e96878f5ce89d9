"""Utilities"""


import hashlib
import json
import random
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

__pdoc__ = {
    'arrayize': False,
    'canonical_json': False,
    'is_half_integer': False
}


def set_seed(seed) -> np.random.Generator:
    """Set a random seed to make results reproducible.

    ## Parameters
    **seed** (*int*) - The seed to be set.

    ## Returns
    **rng** (*numpy.random.Generator*) - A generator seeded with `seed`. Prefer passing this around over relying on the global state.

    ## Effects
    Sets the global `numpy` and `random` seeds to `seed`.
    """
    np.random.seed(seed % 2**32)
    random.seed(seed)
    return np.random.default_rng(seed)


def arrayize(arg, dtype=float) -> np.ndarray:
    return np.asarray(arg, dtype=dtype) if arg is not None else np.array([], dtype=dtype)


def is_half_integer(x) -> bool:
    """ Return True if `2x` is a non-negative integer. """
    try:
        twice = Fraction(x).limit_denominator(1000) * 2
    except (TypeError, ValueError):
        return False
    return twice.denominator == 1 and twice >= 0 and np.isclose(float(twice), 2*float(x))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(',', ':'), default=float)


def sha256_of(obj) -> str:
    """SHA-256 hex digest of the canonical JSON dump of `obj`."""
    return hashlib.sha256(canonical_json(obj).encode('utf-8')).hexdigest()


def write_csv(path, df, comment) -> Path:
    """Write a dataframe as CSV with a leading `# comment` line.

    ## Parameters
    - **path** (*str / Path*) - Output file.

    - **df** (*pandas.DataFrame*) - Data. Column names become the header row.

    - **comment** (*str*) - Written as the first line, prefixed by `# `.

    ## Returns
    **path** (*Path*) - Resolved path of the written file.
    """
    path = Path(path).resolve()
    with open(path, 'w', newline='') as f:
        f.write(f'# {comment}\n')
        df.to_csv(f, index=False, float_format='%.12g')
    return path


def read_csv(path, required_columns=()) -> pd.DataFrame:
    """Read a CSV written by `write_csv` (comment lines are skipped).

    Throws a `ValueError` if any of `required_columns` is missing.
    """
    df = pd.read_csv(path, comment='#')
    missing = [c for c in required_columns if c not in df.columns]
    if missing:
        raise ValueError(f"Expected columns {list(required_columns)} in '{path}', instead found {list(df.columns)}")
    return df


def extract_item(v) -> Any:
    """ Given input, return its `.item()` if it is a 0-d array, otherwise return input. """
    if np.ndim(v) != 0:
        return v
    try:
        ret = v.item()
    except (AttributeError, ValueError):
        ret = v
    return ret
