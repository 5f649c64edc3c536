"""Propagation: delay/Doppler/gain paths, AWGN superposition, vehicular geometry.

Fractional delays are realized exactly in the frequency domain (phase ramp on
the full-frame spectrum); Doppler is a per-sample rotation on absolute frame
time, so the slow-time phase progresses continuously across PRIs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as spfft

from .waveform import ComplexSignal, SymbolFrame, WaveformParams, pc_fmcw

C_LIGHT = 299_792_458.0  # m/s, exact


@dataclass(frozen=True)
class PropagationPath:
    """One propagation path: complex gain, delay, Doppler shift."""

    alpha: complex
    tau: float
    f_D: float

    def __post_init__(self):
        if not np.isfinite([self.alpha.real, self.alpha.imag, self.tau, self.f_D]).all():
            raise ValueError("path parameters must be finite")
        if self.tau < 0:
            raise ValueError("path delay must be nonnegative")


@dataclass
class CommLink:
    """An uplink transmitter: its propagation path and its symbol frame."""

    path: PropagationPath
    frame: SymbolFrame


@dataclass
class Scenario:
    """Radar echoes + uplink signals + receiver noise for one frame."""

    radar_paths: list[PropagationPath] = field(default_factory=list)
    comm_links: list[CommLink] = field(default_factory=list)
    noise_sigma2: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_sigma2 < 0:
            raise ValueError("noise_sigma2 must be nonnegative")


def apply_path(x: ComplexSignal, path: PropagationPath) -> ComplexSignal:
    """alpha * exp(j 2 pi f_D t) * x(t - tau), exact for band-limited content.

    The delay is circular over the frame; the trailing guard interval absorbs
    the wrap-around, so tau must not exceed the frame duration.
    """
    if path.tau > x.duration:
        raise ValueError(f"delay {path.tau} exceeds frame duration {x.duration}")
    n = len(x)
    out = x.samples
    if path.tau != 0.0:
        f = np.fft.fftfreq(n, x.sample_period)
        out = spfft.ifft(spfft.fft(out) * np.exp(-2j * np.pi * f * path.tau))
    if path.f_D != 0.0:
        t = x.start_time + np.arange(n) * x.sample_period
        out = out * np.exp(2j * np.pi * path.f_D * t)
    return ComplexSignal(path.alpha * np.asarray(out, dtype=complex),
                         x.sample_period, x.start_time)


def awgn(n: int, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex white Gaussian noise, variance sigma2 per sample."""
    if sigma2 == 0.0:
        return np.zeros(n, dtype=complex)
    s = np.sqrt(sigma2 / 2.0)
    return rng.normal(0.0, s, n) + 1j * rng.normal(0.0, s, n)


def noise_rng(seed: int) -> np.random.Generator:
    """Noise stream for a scenario; separate from any frame/payload stream so
    scenarios differing only in paths share the same realization."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))


def superpose(scenario: Scenario, tx_frame: SymbolFrame,
              params: WaveformParams) -> ComplexSignal:
    """Receiver-referred sum: own echoes + uplink signals + AWGN."""
    r = np.zeros(params.n_frame, dtype=complex)
    if scenario.radar_paths:
        own = pc_fmcw(tx_frame, params)
        for p in scenario.radar_paths:
            r += apply_path(own, p).samples
    for link in scenario.comm_links:
        if link.frame.Lc != params.Lc or link.frame.P != params.P:
            raise ValueError("comm link frame shape does not match params")
        r += apply_path(pc_fmcw(link.frame, params), link.path).samples
    r += awgn(params.n_frame, scenario.noise_sigma2, noise_rng(scenario.rng_seed))
    return ComplexSignal(r, params.Ts)


# --- vehicular geometry -----------------------------------------------------


@dataclass(frozen=True)
class VehicleState:
    """Roadside unit at p_C, target vehicle at p_R closing with speed v.

    The observer sits at the origin. v > 0 means the target approaches; rho is
    its Fresnel reflection coefficient. delta_t separates radar measurements.
    """

    p_C: tuple[float, float]
    p_R: tuple[float, float]
    v: float
    rho: float = 1.0
    delta_t: float = 66.6e-3

    def __post_init__(self):
        if np.hypot(*self.p_C) <= 0 or np.hypot(*self.p_R) <= 0:
            raise ValueError("positions must be nonzero")
        if not (0.0 < self.rho <= 1.0):
            raise ValueError("rho must be in (0, 1]")


def vehicle_at_step(state: VehicleState, n: int) -> VehicleState:
    """Target position after n measurement intervals, moving along its ray."""
    r0 = np.hypot(*state.p_R)
    rn = r0 - state.v * n * state.delta_t
    if rn <= 0:
        raise ValueError(f"target range reaches zero at step {n}")
    scale = rn / r0
    return VehicleState(state.p_C, (state.p_R[0] * scale, state.p_R[1] * scale),
                        state.v, state.rho, state.delta_t)


def vehicular_link(state: VehicleState, n: int, fc: float = 77e9) -> dict:
    """Free-space link parameters at measurement n.

    tau_C = ||p_C||/c, tau_R = 2||p_R||/c, f_DR = 2 fc v / c;
    |alpha| follows the one-way (comm) and two-way (radar, reflection rho)
    free-space amplitude law with the carrier phase e^{-j 2 pi fc tau}.
    """
    st = vehicle_at_step(state, n)
    d_c = np.hypot(*st.p_C)
    d_r = np.hypot(*st.p_R)
    tau_c = d_c / C_LIGHT
    tau_r = 2.0 * d_r / C_LIGHT
    f_dr = 2.0 * fc * st.v / C_LIGHT
    alpha_c = C_LIGHT * np.exp(-2j * np.pi * fc * tau_c) / (4 * np.pi * fc * d_c)
    alpha_r = (C_LIGHT * st.rho * np.exp(-2j * np.pi * fc * tau_r)
               / (4 * np.pi * fc * (2.0 * d_r)))
    return {
        "comm": PropagationPath(alpha_c, tau_c, 0.0),
        "radar": PropagationPath(alpha_r, tau_r, f_dr),
    }


def radar_sir(state: VehicleState) -> float:
    """Radar echo to communication signal power ratio ||p_C||^2 / (4 ||p_R||^2)."""
    d_c = np.hypot(*state.p_C)
    d_r = np.hypot(*state.p_R)
    if d_c <= 0 or d_r <= 0:
        raise ValueError("positions must be nonzero")
    return d_c**2 / (4.0 * d_r**2)
