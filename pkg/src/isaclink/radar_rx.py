"""Radar receiver chain: dechirp, group-delay alignment, symbol compensation,
zero-padded delay-Doppler map, CA-CFAR detection, parameter estimation.

A path at delay tau / Doppler f_D dechirps to a tone at minus the beat
frequency f_B = (B/T) tau - f_D. The group-delay filter (all-pass, phase
-pi (T/B) f^2) advances each echo's symbol envelope back to the pulse start
so the known transmit symbols can be divided out; the 2D DFT of the
compensated in-pulse samples then concentrates each echo at
(-f_B T, f_D T_CPI) on the (fast, slow) bin grid.

Amplitude estimation runs a unit-gain synthetic echo at the detected bin
center through the identical chain and reads the complex peak ratio, which
keeps alpha_hat exact on-grid regardless of filter envelope losses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as spfft

from .channel import PropagationPath, apply_path
from .waveform import (
    ComplexSignal,
    SymbolFrame,
    WaveformParams,
    pc_fmcw,
    reshape_fast_slow,
    single_chirp,
    staircase,
)


@dataclass(frozen=True)
class RadarConfig:
    """Detector/processing knobs for the radar function."""

    pfa: float = 1e-4
    z_f: int = 0                 # fast-time zero-padding factor
    z_d: int = 0                 # slow-time (Doppler) zero-padding factor
    cfar_train: int = 8          # training half-extent per axis (cells)
    cfar_guard: int = 2          # guard half-extent per axis (cells)
    lpf_payload_lobes: float = 3.0  # symbol-spectrum lobes kept by the LPF
    max_detections: int = 64

    def __post_init__(self):
        if not (0.0 < self.pfa < 1.0):
            raise ValueError("pfa must be in (0, 1)")
        if self.z_f < 0 or self.z_d < 0:
            raise ValueError("zero-padding factors must be nonnegative")


@dataclass
class DelayDopplerMap:
    """Zero-padded 2D DFT of the compensated fast/slow samples.

    values uses the unitary DFT convention, so map energy equals the energy
    of the (padded) input matrix. fast_freqs holds the DFT bin frequencies
    (Hz, spacing 1/((1+Z_f) T)); a path appears at fast frequency -f_B.
    """

    values: np.ndarray
    fast_freqs: np.ndarray
    doppler_freqs: np.ndarray
    z_f: int
    z_d: int
    valid_fast: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.valid_fast is None:
            self.valid_fast = np.ones(self.values.shape[0], dtype=bool)

    @property
    def n_fast(self) -> int:
        return self.values.shape[0]

    @property
    def n_doppler(self) -> int:
        return self.values.shape[1]


@dataclass
class Detection:
    """One merged CFAR detection with its bin-center parameter estimates."""

    fast_bin: int
    doppler_bin: int
    power: float
    peak: complex
    f_B: float
    f_D: float
    tau: float
    valid: bool                 # tau within [0, Tg] (+half-bin slack)
    est: PropagationPath | None = None


def lpf_cutoff(params: WaveformParams, payload_lobes: float = 3.0) -> float:
    """Dechirp low-pass cutoff: guard-limited beat band plus the payload's
    own spectral lobes plus a two-bin Doppler margin."""
    return ((params.B / params.T) * params.Tg
            + payload_lobes * params.Lc / params.T + 2.0 / params.T)


def dechirp(r: ComplexSignal, params: WaveformParams,
            f_cut: float | None = None) -> np.ndarray:
    """Per-pulse conjugate-chirp mix and ideal low-pass; (n_pri, P) out.

    The conjugate chirp is zero in the guard, so the output is windowed to
    [0, T) per pulse. Content beyond f_cut (echoes from beyond the guard
    interval) is removed in the per-pulse frequency domain; a cutoff at or
    above Nyquist leaves the spectrum untouched.
    """
    y = reshape_fast_slow(r, params) * np.conj(single_chirp(params))[:, None]
    if f_cut is None:
        f_cut = lpf_cutoff(params)
    if f_cut < 0.5 * params.sample_rate:
        f = np.fft.fftfreq(params.n_pri, params.Ts)
        mask = np.abs(f) <= f_cut
        y = spfft.ifft(spfft.fft(y, axis=0) * mask[:, None], axis=0)
    return y


def group_delay_filter(y: np.ndarray, params: WaveformParams) -> np.ndarray:
    """All-pass filter with phase -pi (T/B) f^2 (group delay (T/B) f).

    A tone at fast frequency -f_B has its envelope advanced by (T/B) f_B,
    re-aligning an echo's symbol staircase with the pulse start.
    """
    f = np.fft.fftfreq(y.shape[0], params.Ts)
    h = np.exp(-1j * np.pi * (params.T / params.B) * f * f)
    return spfft.ifft(spfft.fft(y, axis=0) * h[:, None], axis=0)


def compensate_symbols(y_gd: np.ndarray, tx_frame: SymbolFrame,
                       params: WaveformParams) -> np.ndarray:
    """Divide out the known transmit symbols; returns the in-pulse samples
    ((Mos*Lc) x P). For PSK this is multiplication by the conjugate symbols."""
    if tx_frame.Lc != params.Lc or tx_frame.P != params.P:
        raise ValueError("frame shape does not match params")
    s = staircase(tx_frame, params)
    if np.any(np.abs(s) == 0):
        raise ValueError("zero-magnitude symbol; compensation undefined")
    return y_gd[: params.n_pulse, :] * np.conj(s) / np.abs(s) ** 2


def delay_doppler(z: np.ndarray, params: WaveformParams, z_f: int = 0,
                  z_d: int = 0, valid_fast_fraction: float = 1.0) -> DelayDopplerMap:
    """Zero-padded unitary 2D DFT of the compensated in-pulse samples."""
    if z_f < 0 or z_d < 0:
        raise ValueError("zero-padding factors must be nonnegative")
    n_fast = z.shape[0] * (1 + z_f)
    n_dop = z.shape[1] * (1 + z_d)
    vals = spfft.fft2(z, s=(n_fast, n_dop), norm="ortho")
    fast = np.fft.fftfreq(n_fast, params.Ts)
    dop = np.fft.fftfreq(n_dop, params.T_PRI)
    valid = np.ones(n_fast, dtype=bool)
    if valid_fast_fraction < 1.0:
        valid = np.abs(fast) <= valid_fast_fraction * 0.5 * params.sample_rate
    return DelayDopplerMap(vals, fast, dop, z_f, z_d, valid)


def _ring_sum_wrap(a: np.ndarray, half_big: int, half_small: int
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Circular box sums over the (2*half_big+1)^2 and (2*half_small+1)^2
    windows, sharing one padded prefix-sum pass."""
    n, m = a.shape
    h = half_big
    w = np.pad(a, ((h, h), (h, h)), mode="wrap")
    s = w.cumsum(axis=0).cumsum(axis=1)
    z = np.pad(s, ((1, 0), (1, 0)))

    def box(half):
        lo = h - half
        wd = 2 * half + 1
        return (z[lo + wd:lo + wd + n, lo + wd:lo + wd + m]
                - z[lo:lo + n, lo + wd:lo + wd + m]
                - z[lo + wd:lo + wd + n, lo:lo + m] + z[lo:lo + n, lo:lo + m])

    return box(half_big), box(half_small)


def cfar_threshold_factor(pfa: float, n_train) -> np.ndarray:
    """Cell-averaging CFAR scale: N (pfa^(-1/N) - 1)."""
    n = np.asarray(n_train, dtype=float)
    return n * (pfa ** (-1.0 / n) - 1.0)


def _conv1_wrap(x: np.ndarray, half: int) -> np.ndarray:
    """Circular moving sum over a (2*half+1) window, 1D."""
    b = np.pad(x, half, mode="wrap")
    c = np.concatenate(([0.0], np.cumsum(b)))
    w = 2 * half + 1
    return c[w:] - c[: x.size]


def cfar_row_stats(valid_fast: np.ndarray, pfa: float, train: int,
                   guard: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-fast-row training-cell counts and threshold factors.

    The validity mask varies only along the fast axis, so N and alpha_T are
    row functions: N(i) = rows_in_window(i) * w_cols - rows_in_guard(i) * g_cols.
    """
    hw = train + guard
    v = valid_fast.astype(float)
    n = (_conv1_wrap(v, hw) * (2 * hw + 1)
         - _conv1_wrap(v, guard) * (2 * guard + 1))
    n = np.maximum(np.rint(n), 1.0)
    return n, cfar_threshold_factor(pfa, n)


def cfar_detect(dd: DelayDopplerMap, pfa: float, train: int = 8, guard: int = 2,
                merge: bool = True, max_detections: int = 64,
                row_stats: tuple[np.ndarray, np.ndarray] | None = None
                ) -> list[Detection]:
    """2D cell-averaging CFAR on |map|^2 with circular windows.

    Training window is a (2(train+guard)+1)^2 box minus the (2 guard+1)^2
    guard box around each cell; invalid fast rows (outside the dechirp
    passband) are excluded from both testing and noise estimation. Flagged
    cells are merged to local maxima within one unpadded resolution cell.
    """
    if not (0.0 < pfa < 1.0):
        raise ValueError("pfa must be in (0, 1)")
    power = dd.values.real**2 + dd.values.imag**2
    hw = train + guard
    w = 2 * hw + 1
    g = 2 * guard + 1
    if dd.n_fast < w or dd.n_doppler < w:
        raise ValueError(f"map {power.shape} smaller than CFAR window {w}x{w}")

    all_valid = bool(dd.valid_fast.all())
    if not all_valid:
        power = power * dd.valid_fast[:, None]
    big, small = _ring_sum_wrap(power, hw, guard)
    train_sum = big - small
    if row_stats is None:
        row_stats = cfar_row_stats(dd.valid_fast, pfa, train, guard)
    n_train, alpha_t = row_stats
    noise = train_sum / n_train[:, None]
    flags = (power > alpha_t[:, None] * noise) & (noise > 0)
    if not all_valid:
        flags &= dd.valid_fast[:, None]

    if not merge:
        return [
            Detection(int(i), int(j), float(power[i, j]), complex(dd.values[i, j]),
                      0.0, 0.0, 0.0, True)
            for i, j in zip(*np.nonzero(flags))
        ]

    idx = np.argwhere(flags)
    if idx.size == 0:
        return []
    order = np.argsort(power[flags])[::-1]
    cells = idx[order]
    res_f = 1 + dd.z_f
    res_d = 1 + dd.z_d
    taken: list[tuple[int, int]] = []
    out: list[Detection] = []
    for i, j in cells:
        close = False
        for ti, tj in taken:
            di = min((i - ti) % dd.n_fast, (ti - i) % dd.n_fast)
            dj = min((j - tj) % dd.n_doppler, (tj - j) % dd.n_doppler)
            if di <= res_f and dj <= res_d:
                close = True
                break
        if close:
            continue
        taken.append((int(i), int(j)))
        out.append(Detection(int(i), int(j), float(power[i, j]),
                             complex(dd.values[i, j]), 0.0, 0.0, 0.0, True))
        if len(out) >= max_detections:
            break
    return out


def bin_parameters(det: Detection, dd: DelayDopplerMap,
                   params: WaveformParams) -> Detection:
    """Fill f_B, f_D, tau from the bin centers; flag tau outside [0, Tg]."""
    det.f_D = float(dd.doppler_freqs[det.doppler_bin])
    det.f_B = float(-dd.fast_freqs[det.fast_bin])
    det.tau = (params.T / params.B) * (det.f_B + det.f_D)
    slack = 0.5 / (params.B * (1 + dd.z_f))  # half a beat bin in delay units
    det.valid = bool(-slack <= det.tau <= params.Tg + slack)
    return det


class RadarChain:
    """The full radar function for one parameter set, with cached phases."""

    def __init__(self, params: WaveformParams, cfg: RadarConfig = RadarConfig()):
        self.params = params
        self.cfg = cfg
        self.f_cut = lpf_cutoff(params, cfg.lpf_payload_lobes)
        self._valid_fraction = min(1.0, self.f_cut / (0.5 * params.sample_rate))
        self._row_stats: tuple[np.ndarray, np.ndarray] | None = None

    def map_of(self, r: ComplexSignal, tx_frame: SymbolFrame) -> DelayDopplerMap:
        y = dechirp(r, self.params, self.f_cut)
        y = group_delay_filter(y, self.params)
        z = compensate_symbols(y, tx_frame, self.params)
        return delay_doppler(z, self.params, self.cfg.z_f, self.cfg.z_d,
                             self._valid_fraction)

    def detect(self, dd: DelayDopplerMap) -> list[Detection]:
        if self._row_stats is None or self._row_stats[0].size != dd.n_fast:
            self._row_stats = cfar_row_stats(dd.valid_fast, self.cfg.pfa,
                                             self.cfg.cfar_train,
                                             self.cfg.cfar_guard)
        dets = cfar_detect(dd, self.cfg.pfa, self.cfg.cfar_train,
                           self.cfg.cfar_guard,
                           max_detections=self.cfg.max_detections,
                           row_stats=self._row_stats)
        return [bin_parameters(d, dd, self.params) for d in dets]

    def _compensated(self, r: ComplexSignal, tx_frame: SymbolFrame) -> np.ndarray:
        y = dechirp(r, self.params, self.f_cut)
        y = group_delay_filter(y, self.params)
        return compensate_symbols(y, tx_frame, self.params)

    def calibrated_estimate(self, det: Detection, dd: DelayDopplerMap,
                            tx_frame: SymbolFrame) -> PropagationPath | None:
        """alpha from the peak ratio against a unit-gain synthetic echo run
        through the identical chain at the detected bin center."""
        tau = float(np.clip(det.tau, 0.0, self.params.Tg))
        probe = apply_path(pc_fmcw(tx_frame, self.params),
                           PropagationPath(1.0, tau, det.f_D))
        z = self._compensated(probe, tx_frame)
        # single-bin unitary DFT value at the detected cell
        l = np.arange(z.shape[0])
        pp = np.arange(z.shape[1])
        wl = np.exp(-2j * np.pi * l * det.fast_bin / dd.n_fast)
        wp = np.exp(-2j * np.pi * pp * det.doppler_bin / dd.n_doppler)
        g = (wl @ z @ wp) / np.sqrt(dd.n_fast * dd.n_doppler)
        scale = np.sqrt(np.mean(np.abs(z) ** 2) * z.size
                        / (dd.n_fast * dd.n_doppler))
        if abs(g) < 1e-6 * max(scale, 1e-300):
            return None
        alpha = det.peak / g
        det.est = PropagationPath(complex(alpha), tau, det.f_D)
        return det.est

    def run(self, r: ComplexSignal, tx_frame: SymbolFrame,
            estimate: bool = True) -> "RadarResult":
        dd = self.map_of(r, tx_frame)
        dets = self.detect(dd)
        best = None
        for det in dets:  # strongest first
            if det.valid:
                if estimate:
                    self.calibrated_estimate(det, dd, tx_frame)
                    if det.est is not None:
                        best = det
                        break
                else:
                    best = det
                    break
        return RadarResult(dd, dets, best)


@dataclass
class RadarResult:
    dd_map: DelayDopplerMap
    detections: list[Detection]
    best: Detection | None

    @property
    def path_hat(self) -> PropagationPath | None:
        return self.best.est if self.best is not None else None


def estimate_params(det: Detection, dd: DelayDopplerMap, params: WaveformParams,
                    tx_frame: SymbolFrame,
                    cfg: RadarConfig = RadarConfig()) -> PropagationPath | None:
    """Standalone form of the calibrated bin-center estimator."""
    chain = RadarChain(params, cfg)
    bin_parameters(det, dd, params)
    return chain.calibrated_estimate(det, dd, tx_frame)
