"""Counter-based, splittable random streams.

Every stream is a Philox generator keyed by a ``SeedSequence`` built from
the user seed plus an integer path (experiment, instance, batch, ...).
Sample ``i`` of an estimator always comes from batch ``i // BATCH_SIZE``,
so results do not depend on how batches are scheduled.
"""

import hashlib

import numpy as np
from scipy.special import ndtri

BATCH_SIZE = 4096

RANDOMIZERS = ("rademacher", "gaussian", "steinhaus")


def name_key(name):
    """Stable 32-bit integer key for a string (not Python's salted hash)."""
    return int.from_bytes(hashlib.blake2b(name.encode(), digest_size=4).digest(), "little")


def stream(seed, *path):
    """Independent generator for ``(seed, *path)``; strings are hashed."""
    keys = tuple(name_key(k) if isinstance(k, str) else int(k) for k in path)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=keys)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed, *path):
    """64-bit child seed, used to record per-instance seeds in reports."""
    keys = tuple(name_key(k) if isinstance(k, str) else int(k) for k in path)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=keys)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def batches(samples, batch_size=BATCH_SIZE):
    """``[(batch_index, count), ...]`` covering `samples` draws."""
    out = []
    for b, start in enumerate(range(0, samples, batch_size)):
        out.append((b, min(batch_size, samples - start)))
    return out


def check_randomizer(kind):
    kind = str(kind).lower()
    if kind not in RANDOMIZERS:
        raise ValueError("randomizer must be one of %s, got %r" % (RANDOMIZERS, kind))
    return kind


def draw(gen, kind, shape):
    """Draw randomizer values of the given kind.

    Rademacher signs come from uniform bits, Gaussians by inverse CDF of
    open-interval uniforms, Steinhaus variables as ``exp(i * angle)``.
    """
    if kind == "rademacher":
        return 2.0 * gen.integers(0, 2, size=shape).astype(float) - 1.0
    if kind == "gaussian":
        u = gen.random(size=shape)
        # random() is in [0, 1); reflect to avoid ndtri(0) = -inf
        u = np.where(u == 0.0, 0.5, u)
        return ndtri(u)
    if kind == "steinhaus":
        return np.exp(2j * np.pi * gen.random(size=shape))
    raise ValueError("unknown randomizer %r" % kind)
