import numpy as np


def substream(seed: int, *keys: int) -> np.random.Generator:
    """
    Deterministic generator for (seed, *keys).
    Independent of how many other substreams were drawn or in which order.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(keys)))


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed (uint32) for components that take a plain integer seed."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
