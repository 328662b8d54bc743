"""Counter-based random streams.

All randomness in the package flows through Philox counter-based generators
keyed by ``(seed, purpose, index)``.  Streams for distinct keys are disjoint
by construction, so independent pieces of work (per-step noise, initial
states, validator sampling) can be generated in any order, or concurrently,
and still reproduce bit-for-bit.

Within one step the whole ensemble's noise is drawn from a single stream in
a fixed layout; this is what makes the stacked cross-particle iterated
integrals jointly consistent.
"""

import numpy as np

_KEY_SALT = np.uint64(0x9E3779B97F4A7C15)

# purpose tags for the counter's third word
PURPOSE_INITIAL = 0
PURPOSE_STEP = 1
PURPOSE_VALIDATE = 2
PURPOSE_FDCHECK = 3


def substream(seed, purpose, index=0):
    """Return a fresh ``numpy.random.Generator`` for key (seed, purpose, index).

    The Philox counter words are ``[0, index, purpose, 0]``; draws advance
    only the low word, so streams with different (purpose, index) never
    overlap.
    """
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), _KEY_SALT],
                   dtype=np.uint64)
    counter = np.array([0, index, purpose, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def step_stream(seed, step_index):
    """Stream that drives all noise of one time step."""
    return substream(seed, PURPOSE_STEP, step_index)
