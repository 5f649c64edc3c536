"""Rate-1/2 recursive systematic convolutional code with soft Viterbi decoding.

Generator [1, (1+D)/(1+D+D^2)]: feedback register w_k = u_k + w_{k-1} + w_{k-2},
parity p_k = w_k + w_{k-1} (mod 2). Memory 2, four trellis states
(w_{k-1}, w_{k-2}); two tail input bits flush the register to zero so the
decoder can terminate at state zero.

LLR sign convention: positive means bit 0 is more likely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RATE = 0.5
MEMORY = 2
N_STATES = 4
TAIL_BITS = MEMORY


@dataclass(frozen=True)
class CodeConfig:
    """The fixed code: feedback 1+D+D^2, feedforward 1+D, zero-flush tail."""

    feedback_taps: tuple = (1, 1, 1)     # 1 + D + D^2
    feedforward_taps: tuple = (1, 1)     # 1 + D
    rate: float = RATE
    memory: int = MEMORY
    tail_bits: int = TAIL_BITS

# state s encodes (w_{k-1}, w_{k-2}) as s = 2*w_{k-1} + w_{k-2}
_NEXT = np.zeros((N_STATES, 2), dtype=np.int64)
_PARITY = np.zeros((N_STATES, 2), dtype=np.int64)
_TAIL_IN = np.zeros(N_STATES, dtype=np.int64)
for _s in range(N_STATES):
    _w1, _w2 = _s >> 1, _s & 1
    for _u in (0, 1):
        _w = _u ^ _w1 ^ _w2
        _NEXT[_s, _u] = (_w << 1) | _w1
        _PARITY[_s, _u] = _w ^ _w1
    _TAIL_IN[_s] = _w1 ^ _w2  # input making w_k = 0


def encode(bits: np.ndarray) -> dict:
    """Encode, append the two zero-flushing tail bits.

    Returns systematic and parity streams, each len(bits) + 2 long; the
    systematic stream is the input followed by the tail.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size == 0:
        raise ValueError("empty input")
    sys_out = np.empty(bits.size + TAIL_BITS, dtype=np.int64)
    par_out = np.empty_like(sys_out)
    s = 0
    for k, u in enumerate(bits):
        sys_out[k] = u
        par_out[k] = _PARITY[s, u]
        s = _NEXT[s, u]
    for k in range(TAIL_BITS):
        u = _TAIL_IN[s]
        sys_out[bits.size + k] = u
        par_out[bits.size + k] = _PARITY[s, u]
        s = _NEXT[s, u]
    assert s == 0
    return {"systematic": sys_out, "parity": par_out}


def viterbi_decode(llr_systematic: np.ndarray, llr_parity: np.ndarray) -> np.ndarray:
    """Maximum-likelihood input bits on the terminated trellis (tail stripped).

    Branch score is the correlation sum(llr * (+1 if bit 0 else -1)); scores
    are maximized, so the result is invariant to positive LLR scaling.
    """
    ls = np.asarray(llr_systematic, dtype=float).ravel()
    lp = np.asarray(llr_parity, dtype=float).ravel()
    if ls.size != lp.size:
        raise ValueError("systematic/parity LLR lengths differ")
    n = ls.size
    if n <= TAIL_BITS:
        raise ValueError("LLR stream shorter than the code tail")

    neg_inf = -np.inf
    metric = np.full(N_STATES, neg_inf)
    metric[0] = 0.0
    prev_state = np.empty((n, N_STATES), dtype=np.int64)
    prev_bit = np.empty((n, N_STATES), dtype=np.int64)

    sign = (1.0, -1.0)  # bit value -> LLR correlation sign
    for k in range(n):
        new = np.full(N_STATES, neg_inf)
        for s in range(N_STATES):
            m = metric[s]
            if m == neg_inf:
                continue
            for u in (0, 1):
                cand = m + ls[k] * sign[u] + lp[k] * sign[_PARITY[s, u]]
                ns = _NEXT[s, u]
                if cand > new[ns]:
                    new[ns] = cand
                    prev_state[k, ns] = s
                    prev_bit[k, ns] = u
        metric = new

    s = 0  # terminated: end at state zero
    bits = np.empty(n, dtype=np.int64)
    for k in range(n - 1, -1, -1):
        bits[k] = prev_bit[k, s]
        s = prev_state[k, s]
    return bits[: n - TAIL_BITS]


def block_interleaver(n: int, rows: int) -> np.ndarray:
    """Row-column permutation of length n (identity when rows <= 1)."""
    if rows <= 1:
        return np.arange(n)
    cols = int(np.ceil(n / rows))
    grid = np.arange(rows * cols).reshape(rows, cols)
    flat = grid.T.ravel()
    return flat[flat < n]


def interleave(x: np.ndarray, perm: np.ndarray) -> np.ndarray:
    return np.asarray(x)[perm]


def deinterleave(x: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty_like(np.asarray(x))
    out[perm] = x
    return out
