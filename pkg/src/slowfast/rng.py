"""Counter-based random streams (Philox4x32-10), vectorized over replicas.

Every draw is a pure function of ``(seed, replica, index)``: the seed is the
64-bit Philox key, the replica id fills the high half of the 128-bit counter
and the draw index fills the low half.  Replica ``r`` therefore sees the same
numbers whether it is simulated alone or inside a batch of a million others,
and batches can be evaluated in any order.
"""

import numba
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
_ROUNDS = 10


def philox4x32(counter, key):
    """Philox4x32-10 block function.

    :param counter: sequence of four uint32 arrays (broadcastable).
    :param key: pair of python ints (uint32 each).
    :returns: tuple of four uint64 arrays holding 32-bit outputs.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT) ^ c1 ^ np.uint64(k0),
            p1 & _MASK,
            (p0 >> _SHIFT) ^ c3 ^ np.uint64(k1),
            p0 & _MASK,
        )
    return c0, c1, c2, c3


def _to_unit(a, b):
    # 53-bit double in [0, 1) from two 32-bit words
    return ((a >> np.uint64(5)).astype(np.float64) * 67108864.0
            + (b >> np.uint64(6)).astype(np.float64)) * (1.0 / 9007199254740992.0)


def uniform_pair_reference(seed, replica, index):
    """Pure-numpy twin of :func:`uniform_pair` (slow; kept for cross-checks)."""
    seed = _check_seed(seed)
    replica, index = np.broadcast_arrays(np.asarray(replica, dtype=np.uint64),
                                         np.asarray(index, dtype=np.uint64))
    o0, o1, o2, o3 = philox4x32(
        (index & _MASK, index >> _SHIFT, replica & _MASK, replica >> _SHIFT),
        (seed & 0xFFFFFFFF, seed >> 32),
    )
    return _to_unit(o0, o1), _to_unit(o2, o3)


@numba.njit(cache=True, inline="always")
def philox_pair(key0, key1, replica, index):
    """Scalar numba twin of :func:`uniform_pair` for use inside other kernels."""
    mask = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    c0 = index & mask
    c1 = index >> s32
    c2 = replica & mask
    c3 = replica >> s32
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    for r in range(10):
        if r:
            k0 = (k0 + np.uint64(0x9E3779B9)) & mask
            k1 = (k1 + np.uint64(0xBB67AE85)) & mask
        p0 = m0 * c0
        p1 = m1 * c2
        n0 = (p1 >> s32) ^ c1 ^ k0
        n2 = (p0 >> s32) ^ c3 ^ k1
        c1 = p1 & mask
        c3 = p0 & mask
        c0 = n0
        c2 = n2
    a = ((c0 >> np.uint64(5)) * 67108864.0 + (c1 >> np.uint64(6))) * (1.0 / 9007199254740992.0)
    b = ((c2 >> np.uint64(5)) * 67108864.0 + (c3 >> np.uint64(6))) * (1.0 / 9007199254740992.0)
    return a, b


@numba.njit(cache=True)
def _pairs_kernel(key0, key1, replica, index, out_a, out_b):
    for j in range(replica.shape[0]):
        out_a[j], out_b[j] = philox_pair(key0, key1, replica[j], index[j])


def split_seed(seed):
    seed = _check_seed(seed)
    return seed & 0xFFFFFFFF, seed >> 32


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def uniform_pair(seed, replica, index):
    """Two independent U[0, 1) doubles per (replica, index) entry.

    ``replica`` and ``index`` broadcast against each other; both must be
    non-negative integers below 2**64.  Output has the broadcast shape.
    """
    replica, index = np.broadcast_arrays(np.asarray(replica, dtype=np.uint64),
                                         np.asarray(index, dtype=np.uint64))
    shape = replica.shape
    rep = np.ascontiguousarray(replica.ravel())
    idx = np.ascontiguousarray(index.ravel())
    a = np.empty(rep.shape[0])
    b = np.empty(rep.shape[0])
    _pairs_kernel(*split_seed(seed), rep, idx, a, b)
    return a.reshape(shape), b.reshape(shape)


class ReplicaStream:
    """Sequential view of one replica's stream (draw index starts at 0)."""

    def __init__(self, seed, replica=0, start=0):
        self.seed = int(seed)
        self.replica = int(replica)
        self.index = int(start)

    def pair(self):
        u, w = uniform_pair(self.seed, self.replica, self.index)
        self.index += 1
        return float(u), float(w)
