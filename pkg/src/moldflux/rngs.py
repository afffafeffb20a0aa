"""Deterministic, order-independent random streams.

Every stochastic draw in the package comes from a generator keyed by
(seed, tag, cycle-or-step, member, iteration).  Streams are independent
of each other and of evaluation order, so parallel execution and reruns
reproduce bit-identical results.
"""

import numpy as np

TAG_INIT_WEIGHTS = 1
TAG_INIT_STATES = 2
TAG_FORECAST_NOISE = 3
TAG_REDRAW = 4
TAG_REPROP_NOISE = 5
TAG_OBS_NOISE = 6
TAG_TWIN_NOISE = 7


def stream(seed, *key):
    """Generator for one (seed, *key) slot; all parts must be ints >= 0."""
    return np.random.default_rng((int(seed),) + tuple(int(k) for k in key))
