"""Phase-coded FMCW baseband waveform: frame layout, constellations, generators.

The joint waveform is a train of P linear chirps of duration T (bandwidth B,
sweep -B/2 .. +B/2) at repetition interval T_PRI, multiplied by a staircase of
communication symbols: Lc symbols per pulse, rectangular shaping of width
Tc = T/Lc, Mos samples per symbol (sample period Ts = Tc/Mos). The transmitter
is silent in the guard interval Tg = T_PRI - T.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class WaveformParams:
    """Timing/frequency layout of one coherent processing interval (CPI)."""

    fc: float      # carrier frequency (Hz); only geometry helpers use it
    B: float       # sweep bandwidth (Hz)
    T: float       # pulse duration (s)
    T_PRI: float   # pulse repetition interval (s)
    P: int         # pulses per frame
    Lc: int        # symbols per pulse
    Mos: int = 8   # samples per symbol period

    def __post_init__(self):
        bad = []
        if not self.B > 0:
            bad.append("B")
        if not self.T > 0:
            bad.append("T")
        if not self.P > 0:
            bad.append("P")
        if not self.Lc > 0:
            bad.append("Lc")
        if not self.Mos > 0:
            bad.append("Mos")
        if bad:
            raise ValueError(f"non-positive waveform parameter(s): {', '.join(bad)}")
        if self.T_PRI < self.T * (1 - 1e-12):
            raise ValueError("T_PRI must be >= T (nonnegative guard interval)")
        n_pri = self.T_PRI / self.Ts
        if abs(n_pri - round(n_pri)) > 1e-6:
            raise ValueError(
                f"T_PRI must be an integer number of samples (T_PRI/Ts = {n_pri:.6f})"
            )

    @property
    def Tc(self) -> float:
        return self.T / self.Lc

    @property
    def Ts(self) -> float:
        return self.Tc / self.Mos

    @property
    def Tg(self) -> float:
        return self.T_PRI - self.T

    @property
    def T_CPI(self) -> float:
        return self.P * self.T_PRI

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.Ts

    @property
    def n_pulse(self) -> int:
        """Samples in the active pulse [0, T)."""
        return self.Lc * self.Mos

    @property
    def n_pri(self) -> int:
        """Samples in one PRI (pulse + guard)."""
        return int(round(self.T_PRI / self.Ts))

    @property
    def n_frame(self) -> int:
        return self.P * self.n_pri

    def with_pulses(self, P: int) -> "WaveformParams":
        return replace(self, P=P)


# --- constellations ---------------------------------------------------------

_GRAY2 = {0: 0, 1: 1, 3: 2, 2: 3}  # 2-bit gray word -> level index


def _gray_to_index(word: int, nbits: int) -> int:
    """Index k whose Gray code equals `word` (so adjacent k differ in one bit)."""
    k = 0
    mask = word
    while mask:
        k ^= mask
        mask >>= 1
    return k


def _psk_points(order: int) -> np.ndarray:
    pts = np.empty(order, dtype=complex)
    nbits = int(np.log2(order))
    for word in range(order):
        k = _gray_to_index(word, nbits)
        pts[word] = np.exp(2j * np.pi * k / order)
    return pts


def _qam16_points() -> np.ndarray:
    levels = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
    pts = np.empty(16, dtype=complex)
    for word in range(16):
        hi, lo = word >> 2, word & 3
        pts[word] = levels[_GRAY2[hi]] + 1j * levels[_GRAY2[lo]]
    return pts


@dataclass(frozen=True)
class Constellation:
    """A unit-average-energy symbol alphabet with Gray bit labelling."""

    kind: str
    points: np.ndarray = field(repr=False, compare=False)
    bits_per_symbol: int

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def is_psk(self) -> bool:
        return self.kind in ("bpsk", "qpsk", "psk16")


_TABLES = {
    "bpsk": (np.array([1.0 + 0j, -1.0 + 0j]), 1),
    "qpsk": (
        np.array([(1 + 1j), (1 - 1j), (-1 + 1j), (-1 - 1j)]) / np.sqrt(2.0),
        2,
    ),
    "psk16": (_psk_points(16), 4),
    "qam16": (_qam16_points(), 4),
}


def constellation(kind: str) -> Constellation:
    """Look up a constellation by name: bpsk, qpsk, psk16, qam16."""
    key = kind.strip().lower().replace("-", "").replace("_", "")
    aliases = {"16psk": "psk16", "16qam": "qam16"}
    key = aliases.get(key, key)
    if key not in _TABLES:
        raise ValueError(f"unknown constellation {kind!r}")
    pts, bps = _TABLES[key]
    return Constellation(kind=key, points=pts, bits_per_symbol=bps)


def map_bits(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Map a bit vector to symbols, bits_per_symbol at a time, MSB first."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % c.bits_per_symbol:
        raise ValueError(
            f"bit count {bits.size} not divisible by bits_per_symbol {c.bits_per_symbol}"
        )
    words = bits.reshape(-1, c.bits_per_symbol)
    idx = np.zeros(words.shape[0], dtype=np.int64)
    for b in range(c.bits_per_symbol):
        idx = (idx << 1) | words[:, b]
    return c.points[idx]


def demap_symbols(symbols: np.ndarray, c: Constellation) -> np.ndarray:
    """Minimum-distance hard decision back to bits; ties go to the lower index."""
    idx = hard_decide(symbols, c)
    nb = c.bits_per_symbol
    out = np.empty(idx.size * nb, dtype=np.int64)
    for b in range(nb):
        out[b::nb] = (idx >> (nb - 1 - b)) & 1
    return out


def hard_decide(symbols: np.ndarray, c: Constellation) -> np.ndarray:
    """Indices of the nearest constellation points (first match wins on ties)."""
    z = np.asarray(symbols, dtype=complex).ravel()
    d2 = np.abs(z[:, None] - c.points[None, :]) ** 2
    return np.argmin(d2, axis=1)


# --- symbol frames ----------------------------------------------------------


@dataclass
class SymbolFrame:
    """Lc x P symbol matrix with pilot bookkeeping.

    pilot_mask marks positions whose symbols are known a priori at any
    receiver (sync pilots and fill symbols); the first pulse is all pilots.
    """

    symbols: np.ndarray          # complex, shape (Lc, P)
    constellation: Constellation
    pilot_mask: np.ndarray       # bool, shape (Lc, P)

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=complex)
        self.pilot_mask = np.asarray(self.pilot_mask, dtype=bool)
        if self.symbols.shape != self.pilot_mask.shape:
            raise ValueError("symbols and pilot_mask shapes differ")
        if not self.pilot_mask[:, 0].all():
            raise ValueError("first pulse must be all pilots")

    @property
    def Lc(self) -> int:
        return self.symbols.shape[0]

    @property
    def P(self) -> int:
        return self.symbols.shape[1]

    def pilots_only(self) -> "SymbolFrame":
        """Copy with payload entries zeroed; what a foreign receiver may use."""
        sym = np.where(self.pilot_mask, self.symbols, 0.0)
        return SymbolFrame(sym, self.constellation, self.pilot_mask.copy())

    def payload_positions(self) -> np.ndarray:
        """(l, p) index pairs of payload slots in fill order (pulse-major)."""
        ls, ps = np.nonzero(~self.pilot_mask)
        order = np.lexsort((ls, ps))
        return np.stack([ls[order], ps[order]], axis=1)


def pilot_mask(Lc: int, P: int, n_head: int = 2) -> np.ndarray:
    """First pulse all pilots; `n_head` pilot symbols lead every later pulse."""
    mask = np.zeros((Lc, P), dtype=bool)
    mask[:, 0] = True
    if P > 1 and n_head > 0:
        mask[: min(n_head, Lc), 1:] = True
    return mask


def payload_capacity(Lc: int, P: int, n_head: int = 2) -> int:
    """Number of payload symbol slots under the standard pilot layout."""
    return int((~pilot_mask(Lc, P, n_head)).sum())


def build_frame(
    payload_symbols: np.ndarray,
    c: Constellation,
    Lc: int,
    P: int,
    n_head: int,
    pilot_rng: np.random.Generator,
) -> SymbolFrame:
    """Assemble a frame: rng-drawn pilots plus payload symbols in fill order.

    If fewer payload symbols than slots are given, the tail slots are filled
    with extra pilot-like symbols and marked known (excluded from BER).
    """
    mask = pilot_mask(Lc, P, n_head)
    n_pilots = int(mask.sum())
    sym = np.zeros((Lc, P), dtype=complex)
    pil = c.points[pilot_rng.integers(0, c.order, size=n_pilots)]
    sym[mask] = pil
    slots = np.stack(np.nonzero(~mask.T), axis=1)  # (p, l) pairs, pulse-major
    payload_symbols = np.asarray(payload_symbols, dtype=complex).ravel()
    if payload_symbols.size > slots.shape[0]:
        raise ValueError(
            f"{payload_symbols.size} payload symbols exceed capacity {slots.shape[0]}"
        )
    for i, (p, l) in enumerate(slots):
        if i < payload_symbols.size:
            sym[l, p] = payload_symbols[i]
        else:
            sym[l, p] = c.points[int(pilot_rng.integers(0, c.order))]
            mask[l, p] = True
    return SymbolFrame(sym, c, mask)


# --- signals ----------------------------------------------------------------


@dataclass
class ComplexSignal:
    """Complex baseband samples on the uniform Ts grid, t measured from frame start."""

    samples: np.ndarray
    sample_period: float
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")

    def __len__(self) -> int:
        return self.samples.size

    def copy(self) -> "ComplexSignal":
        return ComplexSignal(self.samples.copy(), self.sample_period, self.start_time)

    @property
    def duration(self) -> float:
        return self.samples.size * self.sample_period


def energy(x) -> float:
    s = x.samples if isinstance(x, ComplexSignal) else np.asarray(x)
    return float(np.sum(np.abs(s) ** 2))


def single_chirp(params: WaveformParams) -> np.ndarray:
    """One PRI of the chirp: exp(-j pi B t + j pi (B/T) t^2) on [0,T), zero in guard."""
    t = np.arange(params.n_pri) * params.Ts
    ph = -np.pi * params.B * t + np.pi * (params.B / params.T) * t * t
    out = np.exp(1j * ph)
    out[params.n_pulse:] = 0.0
    return out


def chirp_train(params: WaveformParams) -> ComplexSignal:
    """P identical chirp pulses at T_PRI spacing (all-ones payload)."""
    return ComplexSignal(np.tile(single_chirp(params), params.P), params.Ts)


def payload(frame: SymbolFrame, params: WaveformParams) -> ComplexSignal:
    """Rectangular-shaped symbol staircase; guard intervals are exactly zero."""
    if frame.Lc != params.Lc or frame.P != params.P:
        raise ValueError(
            f"frame shape ({frame.Lc}, {frame.P}) does not match params "
            f"({params.Lc}, {params.P})"
        )
    cols = np.zeros((params.P, params.n_pri), dtype=complex)
    cols[:, : params.n_pulse] = np.repeat(frame.symbols.T, params.Mos, axis=1)
    return ComplexSignal(cols.ravel(), params.Ts)


def staircase(frame: SymbolFrame, params: WaveformParams) -> np.ndarray:
    """In-pulse symbol staircase as an (n_pulse, P) matrix."""
    return np.repeat(frame.symbols, params.Mos, axis=0)


def pc_fmcw(frame: SymbolFrame, params: WaveformParams) -> ComplexSignal:
    """Joint waveform: chirp train times symbol staircase."""
    pl = payload(frame, params)
    pl.samples *= np.tile(single_chirp(params), params.P)
    return pl


def reshape_fast_slow(sig: ComplexSignal, params: WaveformParams) -> np.ndarray:
    """Frame vector -> (n_pri, P) matrix; column p holds PRI p."""
    if len(sig) != params.n_frame:
        raise ValueError(f"signal length {len(sig)} != frame length {params.n_frame}")
    return sig.samples.reshape(params.P, params.n_pri).T


def flatten_fast_slow(mat: np.ndarray, params: WaveformParams) -> ComplexSignal:
    """Inverse of reshape_fast_slow."""
    if mat.shape != (params.n_pri, params.P):
        raise ValueError(f"matrix shape {mat.shape} != ({params.n_pri}, {params.P})")
    return ComplexSignal(mat.T.ravel(), params.Ts)
