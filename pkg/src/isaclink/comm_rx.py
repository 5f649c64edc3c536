"""Communication receiver: pilot correlation sync, dechirp, matched filter,
carrier-offset estimation/correction, one-tap equalization, decision.

The first pulse of every frame is pilots, so timing comes from a cross-
correlation against the pilot-pulse waveform (sample-grid lag). Any residual
fractional delay leaves a per-symbol phase ramp after dechirp (slope
2 pi (B/T) delta Tc per symbol); the equalizer measures the ramp on the
pilots, removes it, and folds it back into tau_hat so signal reconstruction
is sub-sample accurate.

Carrier frequency offset is estimated from pilot symbols in successive
pulses: a lag-one slow-time autocorrelation gives a coarse, unambiguous
(|f| < 1/(2 T_PRI)) estimate that a least-squares phase-slope fit across
pulses then refines to a small fraction of 1/T_CPI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as spfft

from . import coding
from .channel import PropagationPath, apply_path
from .waveform import (
    ComplexSignal,
    Constellation,
    SymbolFrame,
    WaveformParams,
    demap_symbols,
    hard_decide,
    map_bits,
    pc_fmcw,
    single_chirp,
    staircase,
)


@dataclass
class CommEstimate:
    """Synchronisation and demodulation products of one frame."""

    tau_hat: float               # delay incl. fractional refinement (s)
    f_D_hat: float               # carrier offset (Hz)
    alpha_hat: complex           # channel gain for reconstruction
    beta_hat: complex            # one-tap equalizer gain
    soft_symbols: np.ndarray     # Lc x P, equalized
    decided_bits: np.ndarray     # payload bits (tail included when coded)
    decided_frame: SymbolFrame   # pilots + decided payload symbols
    sync_lag: int = 0
    info_bits: np.ndarray | None = None   # decoded bits when coding is on
    template: ComplexSignal | None = None  # unit-gain regenerated waveform


def pilot_pulse_waveform(pilot_frame: SymbolFrame,
                         params: WaveformParams) -> np.ndarray:
    """The transmitted first pulse (pilots times chirp), n_pulse samples."""
    s = np.repeat(pilot_frame.symbols[:, 0], params.Mos)
    return s * single_chirp(params)[: params.n_pulse]


def time_sync(r: ComplexSignal, pilot_waveform: np.ndarray,
              max_lag: int | None = None) -> int:
    """Lag (samples) maximizing |cross-correlation| with the pilot pulse.

    Ties break to the smaller lag. All-zero input has no peak and is
    rejected.
    """
    x = r.samples
    if pilot_waveform.size >= x.size:
        raise ValueError("pilot waveform must be shorter than the signal")
    if max_lag is None:
        max_lag = x.size - pilot_waveform.size
    n = int(spfft.next_fast_len(x.size))
    xf = spfft.fft(x, n)
    tf = spfft.fft(pilot_waveform, n)
    corr = spfft.ifft(xf * np.conj(tf))[: max_lag + 1]
    mag = np.abs(corr)
    if mag.max() <= 0.0:
        raise ValueError("no correlation peak (all-zero input)")
    return int(np.argmax(mag))


def comm_dechirp(r: ComplexSignal, lag: int,
                 params: WaveformParams) -> np.ndarray:
    """Advance by the sync lag, window each PRI to [0, T), conjugate-chirp mix."""
    if lag < 0 or lag >= params.n_frame:
        raise ValueError("sync lag outside the frame")
    x = np.zeros(params.n_frame, dtype=complex)
    x[: params.n_frame - lag] = r.samples[lag:]
    mat = x.reshape(params.P, params.n_pri).T
    return mat * np.conj(single_chirp(params))[:, None]


def _pulse_sums(y: np.ndarray, ref_symbols: np.ndarray, row_mask: np.ndarray,
                params: WaveformParams) -> np.ndarray:
    """Per-pulse coherent sums over selected symbol rows, symbol-stripped."""
    rows = np.nonzero(np.repeat(row_mask, params.Mos))[0]
    s = np.repeat(ref_symbols, params.Mos, axis=0)[rows, :]
    return np.sum(y[rows, :] * np.conj(s), axis=0)


def _slow_time_frequency(c: np.ndarray, params: WaveformParams) -> float:
    """Frequency of the per-pulse rotation of c: lag-one coarse estimate
    (unambiguous below 1/(2 T_PRI)) refined by a weighted LS phase slope."""
    if c.size < 2:
        return 0.0
    coarse = np.angle(np.sum(c[1:] * np.conj(c[:-1]))) / (2.0 * np.pi * params.T_PRI)
    p_idx = np.arange(c.size)
    resid = c * np.exp(-2j * np.pi * coarse * params.T_PRI * p_idx)
    mean_dir = np.sum(resid)
    if mean_dir != 0:
        resid = resid * np.exp(-1j * np.angle(mean_dir))  # keep angles off +-pi
    ph = np.angle(resid)
    w = np.abs(c)
    sw = np.sum(w)
    if sw == 0:
        return float(coarse)
    pw = np.sum(w * p_idx) / sw
    denom = np.sum(w * (p_idx - pw) ** 2)
    if denom == 0:
        return float(coarse)
    slope = np.sum(w * (p_idx - pw) * (ph - np.sum(w * ph) / sw)) / denom
    return float(coarse + slope / (2.0 * np.pi * params.T_PRI))


def cfo_estimate(y: np.ndarray, pilot_frame: SymbolFrame,
                 params: WaveformParams) -> float:
    """Carrier offset from the slow-time rotation of pilot-head sums."""
    head = pilot_frame.pilot_mask.all(axis=1)  # rows piloted in every pulse
    if not head.any():
        raise ValueError("no common pilot rows across pulses")
    c = _pulse_sums(y, pilot_frame.symbols, head, params)
    return _slow_time_frequency(c, params)


def demod(y: np.ndarray, f_D_hat: float, params: WaveformParams) -> np.ndarray:
    """Derotate on absolute aligned time, integrate-and-dump per symbol."""
    t_fast = np.arange(params.n_pri) * params.Ts
    t_slow = np.arange(params.P) * params.T_PRI
    rot = np.exp(-2j * np.pi * f_D_hat * t_fast)[:, None] \
        * np.exp(-2j * np.pi * f_D_hat * t_slow)[None, :]
    z = y * rot
    blocks = z[: params.n_pulse, :].reshape(params.Lc, params.Mos, params.P)
    return blocks.mean(axis=1)


def estimate_gain(soft: np.ndarray, pilot_frame: SymbolFrame
                  ) -> tuple[complex, float]:
    """LS one-tap gain over all pilot positions plus the per-symbol-index
    phase-ramp slope (rad/symbol) left by fractional timing error.

    The slope comes from the contiguous first-pulse pilots: a lag-one
    autocorrelation gives a wrap-free coarse value that a weighted LS fit of
    the derotated phases then refines.
    """
    mask = pilot_frame.pilot_mask
    ref = pilot_frame.symbols
    den = np.sum(np.abs(ref[mask]) ** 2)
    if den == 0:
        raise ValueError("no pilot energy for gain estimation")
    v = soft[:, 0] * np.conj(ref[:, 0])  # first pulse, symbol-stripped
    coarse = float(np.angle(np.sum(v[1:] * np.conj(v[:-1]))))
    l = np.arange(v.size)
    resid = v * np.exp(-1j * coarse * l)
    mean_dir = np.sum(resid)
    if mean_dir != 0:
        resid = resid * np.exp(-1j * np.angle(mean_dir))  # keep angles off +-pi
    ph = np.angle(resid)
    w = np.abs(v)
    sw = np.sum(w)
    if sw > 0:
        lm = np.sum(w * l) / sw
        denom = np.sum(w * (l - lm) ** 2)
        fine = float(np.sum(w * (l - lm) * (ph - np.sum(w * ph) / sw)) / denom) \
            if denom > 0 else 0.0
    else:
        fine = 0.0
    slope = coarse + fine
    ramp = np.exp(-1j * slope * np.arange(soft.shape[0]))[:, None]
    num = np.sum((soft * ramp)[mask] * np.conj(ref[mask]))
    if num == 0:
        raise ValueError("no pilot energy for gain estimation")
    return num / den, slope


def equalize_and_decide(soft: np.ndarray, beta_hat: complex,
                        c: Constellation, slope: float = 0.0,
                        llr_scale: float | None = None) -> dict:
    """One-tap equalization, ramp removal, min-distance decision.

    With llr_scale given, also emits max-log LLRs 2*scale*Re/Im of the
    equalized symbols (Gray QPSK rails) for the soft decoder.
    """
    if beta_hat == 0:
        raise ValueError("equalizer gain must be nonzero")
    Lc = soft.shape[0]
    ramp = np.exp(-1j * slope * np.arange(Lc))[:, None]
    z = soft * ramp / beta_hat
    idx = hard_decide(z, c).reshape(z.shape)
    hard = c.points[idx]
    bits = demap_symbols(hard, c)
    out = {"equalized": z, "hard": hard, "bits": bits}
    if llr_scale is not None:
        out["llr_i"] = 2.0 * llr_scale * z.real * np.sqrt(2.0)
        out["llr_q"] = 2.0 * llr_scale * z.imag * np.sqrt(2.0)
    return out


@dataclass
class CommChain:
    """The full communication function for one parameter set.

    Processing: pilot correlation sync, dechirp, pilot-based carrier offset,
    matched filter, one-tap equalization, decision; then (by default) one
    decision-directed pass that re-tracks the carrier against all decided
    symbols, which removes most of the pilot-limited phase-noise penalty.
    """

    params: WaveformParams
    constellation: Constellation
    coded: bool = False
    max_lag: int | None = None
    dd_refine: bool = True

    def _decide_pass(self, y: np.ndarray, f_hat: float,
                     pilot_frame: SymbolFrame):
        soft = demod(y, f_hat, self.params)
        beta, slope = estimate_gain(soft, pilot_frame)
        decision = equalize_and_decide(soft, beta, self.constellation, slope,
                                       llr_scale=1.0 if self.coded else None)
        return soft, beta, slope, decision

    def process(self, r: ComplexSignal, pilot_frame: SymbolFrame) -> CommEstimate:
        p = self.params
        template = pilot_pulse_waveform(pilot_frame, p)
        lag = time_sync(r, template,
                        self.max_lag if self.max_lag is not None else p.n_pri - 1)
        y = comm_dechirp(r, lag, p)
        f_hat = cfo_estimate(y, pilot_frame, p)
        soft, beta, slope, decision = self._decide_pass(y, f_hat, pilot_frame)
        if self.dd_refine:
            ref = np.where(pilot_frame.pilot_mask, pilot_frame.symbols,
                           decision["hard"])
            c = _pulse_sums(y, ref, np.ones(p.Lc, dtype=bool), p)
            resid = c * np.exp(-2j * np.pi * f_hat * p.T_PRI * np.arange(p.P))
            f_hat += _slow_time_frequency(resid, p)
            soft, beta, slope, decision = self._decide_pass(y, f_hat,
                                                            pilot_frame)
        # fractional delay implied by the pilot phase ramp: the dechirped
        # residual tone -(B/T) delta shifts each symbol by slope = -2 pi
        # (B/T) delta Tc; fold it back into the delay estimate
        delta = -slope / (2.0 * np.pi * (p.B / p.T) * p.Tc)
        tau_hat = lag * p.Ts + delta

        plan = frame_bit_plan(p, pilot_frame, self.constellation, self.coded)
        slots = pilot_frame.payload_positions()
        payload_syms = decision["hard"][slots[:, 0], slots[:, 1]]
        payload_bits = demap_symbols(payload_syms, self.constellation)

        info_bits = None
        if self.coded:
            n_code = plan["info_bits"] + coding.TAIL_BITS
            llr_i = decision["llr_i"][slots[:, 0], slots[:, 1]]
            llr_q = decision["llr_q"][slots[:, 0], slots[:, 1]]
            info_bits = coding.viterbi_decode(llr_i[:n_code], llr_q[:n_code])
            re_sys, re_par = _reencode(info_bits)
            coded_syms = map_bits(
                _zip_bits(re_sys, re_par), self.constellation)
            payload_syms = payload_syms.copy()
            payload_syms[:n_code] = coded_syms
            payload_bits = demap_symbols(payload_syms, self.constellation)

        decided = pilot_frame.symbols.copy()
        decided[slots[:, 0], slots[:, 1]] = payload_syms
        decided_frame = SymbolFrame(decided, self.constellation,
                                    pilot_frame.pilot_mask.copy())
        # channel gain by LS projection onto the regenerated unit-gain
        # waveform: immune to the constant phase terms a fractional delay
        # leaves in beta_hat, so cancellation is limited only by symbol and
        # (tau, f_D) errors
        tau_hat = float(np.clip(tau_hat, 0.0, p.T_PRI))
        template = apply_path(pc_fmcw(decided_frame, p),
                              PropagationPath(1.0, tau_hat, f_hat))
        alpha = ls_path_gain(r, template)
        return CommEstimate(tau_hat=tau_hat, f_D_hat=f_hat, alpha_hat=alpha,
                            beta_hat=beta, soft_symbols=decision["equalized"],
                            decided_bits=payload_bits,
                            decided_frame=decided_frame, sync_lag=lag,
                            info_bits=info_bits, template=template)


def _reencode(info_bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    enc = coding.encode(info_bits)
    return enc["systematic"], enc["parity"]


def _zip_bits(sys_bits: np.ndarray, par_bits: np.ndarray) -> np.ndarray:
    out = np.empty(2 * sys_bits.size, dtype=np.int64)
    out[0::2] = sys_bits
    out[1::2] = par_bits
    return out


def frame_bit_plan(params: WaveformParams, frame_like: SymbolFrame,
                   c: Constellation, coded: bool) -> dict:
    """How many information bits one frame carries and which symbols are
    error-counted (coded frames pad the tail slots with known symbols)."""
    n_slots = int((~frame_like.pilot_mask).sum())
    if coded:
        if c.bits_per_symbol != 2:
            raise ValueError("coded transmission uses the QPSK mapping")
        info = n_slots - coding.TAIL_BITS
        return {"info_bits": info, "coded_symbols": info + coding.TAIL_BITS,
                "payload_symbols": n_slots}
    return {"info_bits": n_slots * c.bits_per_symbol,
            "payload_symbols": n_slots}


def encode_payload(info_bits: np.ndarray, c: Constellation,
                   coded: bool) -> np.ndarray:
    """Payload symbols for a frame: raw mapping, or systematic/parity rails."""
    if not coded:
        return map_bits(info_bits, c)
    enc = coding.encode(info_bits)
    return map_bits(_zip_bits(enc["systematic"], enc["parity"]), c)


def ls_path_gain(r: ComplexSignal, template: ComplexSignal) -> complex:
    """Least-squares projection of the received frame onto a unit-gain
    regenerated waveform; the matched-filter channel-gain estimate."""
    den = np.sum(np.abs(template.samples) ** 2)
    if den == 0:
        raise ValueError("empty template")
    return complex(np.vdot(template.samples, r.samples) / den)
