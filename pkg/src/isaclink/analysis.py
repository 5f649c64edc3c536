"""Closed-form delay-Doppler dispersion oracles and resolution arithmetic.

The oracles describe the discrete post-processing model of the radar chain:
after dechirp, envelope alignment and symbol compensation, a correctly
compensated echo is a pure 2D exponential, while a foreign (uncompensated)
PSK signal keeps a random unit-modulus symbol staircase. Expected delay-
Doppler periodograms of those models have closed forms; both the forms and
brute-force Monte-Carlo routes to them live here.

Axis convention: tau in fast-time DFT bins (1/T spacing over the Mos*Lc
in-pulse samples), f in slow-time DFT bins (1/T_CPI spacing over P pulses).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PropagationPath
from .waveform import WaveformParams

_SING_GUARD = 1e-9  # relative guard band on kernel denominators


@dataclass(frozen=True)
class DispersionSpec:
    """Inputs of the dispersion formulas: channel power and tone placement."""

    sigma2: float                 # E|alpha|^2
    f_B: float                    # beat frequency (Hz)
    params: WaveformParams
    f_D: float = 0.0              # Doppler (Hz); echoes only

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")


def beat_frequency(params: WaveformParams, path: PropagationPath) -> float:
    """f_B = (B/T) tau - f_D, the dechirped tone frequency of a path."""
    return (params.B / params.T) * path.tau - path.f_D


def spec_from_path(params: WaveformParams, path: PropagationPath) -> DispersionSpec:
    return DispersionSpec(sigma2=abs(path.alpha) ** 2,
                          f_B=beat_frequency(params, path),
                          params=params, f_D=path.f_D)


def _fejer_ratio(x: np.ndarray, period: int, sub: int) -> np.ndarray:
    """sin^2(pi x / sub) / sin^2(pi x / period) with limits at the poles.

    period = Mos*Lc, sub = Lc; at x ≡ 0 (mod period) the limit is
    (period/sub)^2 = Mos^2.
    """
    x = np.asarray(x, dtype=float)
    den_arg = x / period
    singular = np.abs(den_arg - np.round(den_arg)) < _SING_GUARD
    num = np.sin(np.pi * x / sub) ** 2
    den = np.sin(np.pi * den_arg) ** 2
    out = np.empty_like(x)
    ok = ~singular
    out[ok] = num[ok] / den[ok]
    out[singular] = (period / sub) ** 2
    return out


def _dirichlet(x: np.ndarray, n: int) -> np.ndarray:
    """sin(pi x) / sin(pi x / n), the length-n Dirichlet kernel on bin units.

    At x ≡ 0 (mod n) the limit is ±n with the sign n*cos(pi x)/cos(pi x / n).
    """
    x = np.asarray(x, dtype=float)
    den_arg = x / n
    singular = np.abs(den_arg - np.round(den_arg)) < _SING_GUARD
    out = np.empty_like(x)
    ok = ~singular
    out[ok] = np.sin(np.pi * x[ok]) / np.sin(np.pi * den_arg[ok])
    xs = np.round(x[singular])
    out[singular] = n * np.cos(np.pi * xs) / np.cos(np.pi * xs / n)
    return out


def interference_dispersion(spec: DispersionSpec, tau_bins, f_bins) -> np.ndarray:
    """Expected DD power of an uncompensated PSK interferer.

    sigma^2 P Lc sin^2(pi(tau + f_B T)/Lc) / sin^2(pi(tau + f_B T)/(Mos Lc)),
    flat along the Doppler axis; peak sigma^2 P Lc Mos^2 at tau = -f_B T.
    """
    p = spec.params
    x = np.asarray(tau_bins, dtype=float) + spec.f_B * p.T
    profile = spec.sigma2 * p.P * p.Lc * _fejer_ratio(x, p.Mos * p.Lc, p.Lc)
    return np.broadcast_to(profile[:, None],
                           (profile.size, np.asarray(f_bins).size)).copy()


def echo_dispersion(spec: DispersionSpec, tau_bins, f_bins) -> np.ndarray:
    """Expected DD power of a compensated echo: separable Dirichlet product
    centered at (f_B T, f_D T_CPI) with peak sigma^2 P^2 Lc^2 Mos^2."""
    p = spec.params
    n_fast = p.Mos * p.Lc
    dt = _dirichlet(np.asarray(tau_bins, dtype=float) - spec.f_B * p.T, n_fast)
    df = _dirichlet(np.asarray(f_bins, dtype=float) - spec.f_D * p.T_CPI, p.P)
    return spec.sigma2 * p.Mos * p.Lc * p.P * dt[:, None] * df[None, :]


# --- discrete post-processing models ----------------------------------------


def interference_model_signal(params: WaveformParams, gamma: complex, f_B: float,
                              f_D: float, sym_in: np.ndarray,
                              sym_own: np.ndarray) -> np.ndarray:
    """Processed foreign signal: beat tone times the mismatched symbol ratio.

    sym_in are the interferer's symbols, sym_own the symbols used for
    compensation; both Lc x P. Returns the (Mos*Lc) x P fast/slow matrix.
    """
    p = params
    if np.any(np.abs(sym_own) == 0):
        raise ValueError("compensation symbols must be nonzero")
    ratio = sym_in * np.conj(sym_own) / np.abs(sym_own) ** 2
    stair = np.repeat(ratio, p.Mos, axis=0)
    l = np.arange(p.Mos * p.Lc)[:, None]
    pp = np.arange(p.P)[None, :]
    return (gamma * np.exp(2j * np.pi * f_D * p.T_PRI * pp)
            * np.exp(-2j * np.pi * f_B * p.Ts * l) * stair)


def echo_model_signal(params: WaveformParams, gamma: complex, f_B: float,
                      f_D: float) -> np.ndarray:
    """Correctly compensated echo: a pure 2D exponential (Mos*Lc) x P."""
    p = params
    l = np.arange(p.Mos * p.Lc)[:, None]
    pp = np.arange(p.P)[None, :]
    return (gamma * np.exp(2j * np.pi * f_D * p.T_PRI * pp)
            * np.exp(-2j * np.pi * f_B * p.Ts * l))


def raw_periodogram(z: np.ndarray) -> np.ndarray:
    """|2D DFT|^2 with the plain (non-unitary) sum convention."""
    return np.abs(np.fft.fft2(z)) ** 2


def autocorr_zC_bruteforce(params: WaveformParams, path: PropagationPath,
                           delta_l, delta_p, frames: int,
                           rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo 2D autocorrelation of the processed-interferer model.

    Averages sum_{l,p} z(l,p) z*(l-dl, p-dp) (circular indexing) over random
    QPSK frames. Converges to
    sigma^2 Mos Lc P delta(dp) exp(-j 2 pi f_B Ts dl) Lambda(dl/Mos).
    """
    if frames <= 0:
        raise ValueError("frames must be positive")
    p = params
    f_B = beat_frequency(params, path)
    delta_l = np.asarray(delta_l, dtype=int)
    delta_p = np.asarray(delta_p, dtype=int)
    acc = np.zeros((delta_l.size, delta_p.size), dtype=complex)
    n_fast = p.Mos * p.Lc

    def qpsk(shape):
        return (rng.integers(0, 2, shape) * 2 - 1
                + 1j * (rng.integers(0, 2, shape) * 2 - 1)) / np.sqrt(2)

    for _ in range(frames):
        z = interference_model_signal(params, path.alpha, f_B, path.f_D,
                                      qpsk((p.Lc, p.P)), qpsk((p.Lc, p.P)))
        for i, dl in enumerate(delta_l):
            zl = np.roll(z, dl, axis=0)
            for j, dp in enumerate(delta_p):
                acc[i, j] += np.sum(z * np.conj(np.roll(zl, dp, axis=1)))
    return acc / frames


def autocorr_zC_closed_form(params: WaveformParams, path: PropagationPath,
                            delta_l, delta_p) -> np.ndarray:
    """Closed form the brute-force route converges to."""
    p = params
    f_B = beat_frequency(params, path)
    dl = np.asarray(delta_l, dtype=float)[:, None]
    dp = np.asarray(delta_p, dtype=int)[None, :]
    tri = np.maximum(1.0 - np.abs(dl) / p.Mos, 0.0)
    return (abs(path.alpha) ** 2 * p.Mos * p.Lc * p.P * (dp == 0)
            * np.exp(-2j * np.pi * f_B * p.Ts * dl) * tri)


def resolution_accuracy(params: WaveformParams, f_D_true: float,
                        Z_D: int = 0) -> dict:
    """Doppler grid spacing 1/((1+Z_D) T_CPI) and the grid-quantization error
    of f_D_true on it."""
    if Z_D < 0:
        raise ValueError("Z_D must be nonnegative")
    res = 1.0 / ((1 + Z_D) * params.T_CPI)
    acc = abs(f_D_true - np.round(f_D_true / res) * res)
    return {"resolution": res, "accuracy": acc}
