"""Deterministic derivation of random streams from one 64-bit seed.

Every random quantity in the package is drawn from a PCG64 generator
keyed by ``(seed, *key)`` through numpy's ``SeedSequence`` spawn keys.
Streams derived this way are statistically independent and do not
depend on the order in which they are created, which is what makes
trial-parallel runs bit-identical to serial ones: trial ``t`` always
reads from ``substream(seed, label, t)`` no matter which thread gets
there first.

The stream labels below are part of the reproducibility contract.
Reports produced with a given seed can only be re-derived while the
labels keep their meaning, so treat them as frozen constants.
"""

from __future__ import annotations

import os

import numpy as np

from dpcp.errors import InvalidArgumentError

MAX_SEED = 2**64 - 1

# Stream labels. One label per independent source of randomness.
CALIBRATION_DRAW = 0  # calibration scores for a simulation trial
TEST_DRAW = 1  # test scores for a simulation trial
MECHANISM_DRAW = 2  # the single uniform consumed by a mechanism sample
TUNING_DRAW = 3  # score draws shared by all bin-count candidates
TUNING_MECHANISM = 4  # mechanism uniforms shared by all bin-count candidates
SWEEP_DRAW = 5  # random instances for privacy-ratio sweeps

SEED_ENV_VAR = "DPCP_SEED"


def validate_seed(seed) -> int:
    """Check that ``seed`` is an integer in [0, 2**64 - 1] and return it as int."""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidArgumentError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise InvalidArgumentError(f"seed must be in [0, {MAX_SEED}], got {seed}")
    return seed


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the PCG64 generator keyed by ``(seed, *key)``.

    The same arguments always produce a generator in the same initial
    state, independent of any other stream already created.
    """
    seq = np.random.SeedSequence(validate_seed(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse ``(seed, *key)`` into a single 64-bit seed.

    Used where an interface takes a plain integer seed (for example the
    private quantile sampler) but the caller manages a family of them.
    """
    seq = np.random.SeedSequence(validate_seed(seed), spawn_key=key)
    return int(seq.generate_state(1, np.uint64)[0])


def generator(seed: int) -> np.random.Generator:
    """Return the PCG64 generator for a bare seed (no spawn key)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(validate_seed(seed))))


def resolve_seed(seed: int | None, strict: bool = False) -> int:
    """Resolve the effective seed for a command-line run.

    An explicit value wins; otherwise the ``DPCP_SEED`` environment
    variable is consulted; otherwise a fresh seed is drawn from the
    OS entropy pool. With ``strict`` a missing seed is an error so
    that scripted runs cannot silently become irreproducible.
    """
    if seed is not None:
        return validate_seed(seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            parsed = int(env)
        except ValueError:
            raise InvalidArgumentError(
                f"{SEED_ENV_VAR} must be an integer, got {env!r}"
            ) from None
        return validate_seed(parsed)
    if strict:
        raise InvalidArgumentError(
            f"no seed given: pass --seed or set {SEED_ENV_VAR} (required by --strict)"
        )
    return int.from_bytes(os.urandom(8), "big")
