"""Counter-based random streams for reproducible parallel ensembles.

Every random number is a pure function of (seed, trajectory, step, slot), so
trajectories can be generated in any order, on any number of workers, in
blocks of any size, and the outputs are bit-identical. The construction is
the splitmix64 output function applied to a per-trajectory base state plus a
per-(step, slot) counter:

    base(traj)            = mix64(seed + PHI*(traj + 1))
    value(traj, step, s)  = mix64(base + PHI*(4*step + s + 1))

with PHI the 64-bit golden-ratio constant and mix64 the splitmix64
finalizer. Each trajectory therefore reads consecutive outputs of its own
splitmix64 stream; the factor 4 keeps the slots of one step disjoint from
every other step's.

Slot assignment: 0 jump-decision uniform, 1 phonon-noise normal, 2 initial
qubit level, 3 child-seed derivation.

Uniforms map the top 53 bits into the open interval (0, 1); normals go
through the inverse normal CDF, one draw per value.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0**-53


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_base(seed, traj) -> np.ndarray:
    """Per-trajectory base state; broadcastable over arrays of either input."""
    seed = np.asarray(seed, dtype=np.uint64)
    traj = np.asarray(traj, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(seed + _PHI * (traj + np.uint64(1)))


def hash_from_base(base, step, slot) -> np.ndarray:
    """Raw 64-bit value for (base, step, slot); all arguments broadcast."""
    step = np.asarray(step, dtype=np.uint64)
    slot = np.uint64(slot)
    with np.errstate(over="ignore"):
        cnt = np.uint64(4) * step + slot + np.uint64(1)
        return _mix(np.asarray(base, dtype=np.uint64) + _PHI * cnt)


def counter_hash(seed, traj, step, slot) -> np.ndarray:
    """Raw 64-bit hash of the full address tuple."""
    return hash_from_base(stream_base(seed, traj), step, slot)


def to_uniform(h: np.ndarray) -> np.ndarray:
    """Map raw 64-bit values to doubles in the open interval (0, 1)."""
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def uniform(seed, traj, step, slot) -> np.ndarray:
    return to_uniform(counter_hash(seed, traj, step, slot))


def normal(seed, traj, step, slot) -> np.ndarray:
    """Standard normal via the inverse CDF: exactly one draw per address."""
    return ndtri(uniform(seed, traj, step, slot))


def child_seed(seed, index) -> np.ndarray:
    """Derived 64-bit seed for sub-ensemble ``index`` (slot 3 of step 0)."""
    return counter_hash(seed, index, 0, 3)
