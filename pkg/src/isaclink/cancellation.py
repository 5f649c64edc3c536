"""Interference-cancellation receiver structures.

Structures are named by their processing order: each R block runs the radar
function, each C block the communication function. Before every block after
the first, the latest reconstruction of the *other* component is subtracted
from the original received frame (never from an already-subtracted signal,
which would accumulate drift). Dynamic variants replace the leading radar
block by a track prediction carried over from the previous measurement.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import PropagationPath, apply_path
from .comm_rx import CommChain, CommEstimate
from .radar_rx import Detection, RadarChain, RadarResult
from .waveform import ComplexSignal, SymbolFrame, WaveformParams, energy, pc_fmcw


class StructureKind(enum.Enum):
    NOIC = "noic"
    CR = "cr"
    RC = "rc"
    RCR = "rcr"
    CRC = "crc"
    RCRC = "rcrc"
    DYN_CR = "dyn-cr"
    DYN_CRC = "dyn-crc"

    @property
    def blocks(self) -> str:
        """Block letters, left to right; P is a track-prediction block."""
        return {
            StructureKind.NOIC: "RC",
            StructureKind.CR: "CR",
            StructureKind.RC: "RC",
            StructureKind.RCR: "RCR",
            StructureKind.CRC: "CRC",
            StructureKind.RCRC: "RCRC",
            StructureKind.DYN_CR: "PCR",
            StructureKind.DYN_CRC: "PCRC",
        }[self]

    @property
    def is_dynamic(self) -> bool:
        return self in (StructureKind.DYN_CR, StructureKind.DYN_CRC)

    @property
    def cancels(self) -> bool:
        return self is not StructureKind.NOIC


def parse_structure(name: str) -> StructureKind:
    key = name.strip().lower().replace("_", "-")
    for kind in StructureKind:
        if kind.value == key:
            return kind
    raise ValueError(f"unknown structure {name!r} "
                     f"(expected one of {[k.value for k in StructureKind]})")


@dataclass
class TrackState:
    """Radar-echo track: delay/Doppler/gain carried between measurements."""

    tau_hat: float
    f_D_hat: float
    alpha_hat: complex
    step: int = 0
    clamped: bool = False


def track_update(ts: TrackState, delta_t: float, fc: float,
                 tau_max: float | None = None) -> TrackState:
    """Predict the next measurement's delay: closing targets (f_D > 0) get
    closer, so tau decreases by (delta_t / fc) * f_D; Doppler is carried."""
    tau = ts.tau_hat - (delta_t / fc) * ts.f_D_hat
    clamped = False
    if tau < 0.0:
        tau, clamped = 0.0, True
    if tau_max is not None and tau > tau_max:
        tau, clamped = tau_max, True
    return TrackState(tau, ts.f_D_hat, ts.alpha_hat, ts.step + 1, clamped)


def predicted_echo_gain(tau_hat: float, fc: float, rho: float = 1.0) -> complex:
    """Free-space two-way gain implied by a predicted delay (range c*tau/2)."""
    if tau_hat <= 0:
        raise ValueError("predicted delay must be positive")
    return rho * np.exp(-2j * np.pi * fc * tau_hat) / (4 * np.pi * fc * tau_hat)


# --- reconstruction and subtraction ------------------------------------------


def reconstruct_comm(est: CommEstimate, pilot_frame: SymbolFrame,
                     params: WaveformParams) -> ComplexSignal:
    """Rebuild the uplink signal from decided symbols and estimated path.

    The decided frame already contains re-encoded symbols when coding is
    active; the chain's unit-gain template is reused when present.
    """
    if est.template is not None:
        return ComplexSignal(est.alpha_hat * est.template.samples,
                             est.template.sample_period)
    x = pc_fmcw(est.decided_frame, params)
    return apply_path(x, PropagationPath(est.alpha_hat, est.tau_hat,
                                         est.f_D_hat))


def reconstruct_radar(path_hat: PropagationPath, tx_frame: SymbolFrame,
                      params: WaveformParams) -> ComplexSignal:
    """Rebuild the own echo: transmitted symbols are known exactly."""
    return apply_path(pc_fmcw(tx_frame, params), path_hat)


def subtract(r: ComplexSignal, r_hat: ComplexSignal | None) -> ComplexSignal:
    """Samplewise difference; None subtracts nothing."""
    if r_hat is None:
        return r
    if len(r) != len(r_hat):
        raise ValueError("signal lengths differ")
    return ComplexSignal(r.samples - r_hat.samples, r.sample_period,
                         r.start_time)


# --- structure runner ---------------------------------------------------------


@dataclass
class StructureContext:
    """Everything one structure run needs besides the received frame."""

    params: WaveformParams
    radar_chain: RadarChain
    comm_chain: CommChain
    tx_frame: SymbolFrame            # own transmitted symbols (fully known)
    comm_pilot_frame: SymbolFrame    # uplink pilots (payload hidden)
    track: TrackState | None = None
    # perfect-knowledge overrides for the reconstructions
    oracle_radar_path: PropagationPath | None = None
    oracle_comm_path: PropagationPath | None = None
    oracle_comm_frame: SymbolFrame | None = None


@dataclass
class ReceiverOutput:
    """Joint result of one structure run."""

    kind: StructureKind
    radar: RadarResult | None
    comm: CommEstimate | None
    radar_path_hat: PropagationPath | None
    diagnostics: list = field(default_factory=list)

    @property
    def detections(self) -> list[Detection]:
        return self.radar.detections if self.radar is not None else []


def run_structure(kind: StructureKind, r: ComplexSignal,
                  ctx: StructureContext) -> ReceiverOutput:
    """Execute the lettered pipeline left to right on the received frame."""
    if kind.is_dynamic and ctx.track is None:
        raise ValueError(f"{kind.value} requires a TrackState")

    radar_rec: ComplexSignal | None = None
    comm_rec: ComplexSignal | None = None
    radar_res: RadarResult | None = None
    comm_est: CommEstimate | None = None
    path_hat: PropagationPath | None = None
    diags: list = []

    for letter in kind.blocks:
        if letter == "P":
            # predicted delay/Doppler; the complex gain is re-fit on the
            # current frame by LS projection: at automotive carriers the
            # echo phase moves by 2 pi fc delta_tau >> 2 pi between
            # measurements, so no predicted phase can cancel coherently
            ts = ctx.track
            template = reconstruct_radar(
                PropagationPath(1.0, ts.tau_hat, ts.f_D_hat), ctx.tx_frame,
                ctx.params)
            den = energy(template)
            alpha = (complex(np.vdot(template.samples, r.samples) / den)
                     if den > 0 else ts.alpha_hat)
            path_hat = PropagationPath(alpha, ts.tau_hat, ts.f_D_hat)
            if ctx.oracle_radar_path is not None:
                radar_rec = _radar_reconstruction(path_hat, ctx)
            else:
                radar_rec = ComplexSignal(alpha * template.samples,
                                          template.sample_period)
            diags.append(("P", float(energy(radar_rec))))
            continue
        if letter == "R":
            x = subtract(r, comm_rec) if kind.cancels else r
            radar_res = ctx.radar_chain.run(x, ctx.tx_frame)
            if kind.cancels and radar_res.path_hat is not None:
                path_hat = radar_res.path_hat
                radar_rec = _radar_reconstruction(path_hat, ctx)
            elif radar_res.path_hat is not None:
                path_hat = radar_res.path_hat
            diags.append(("R", float(energy(x))))
        else:  # "C"
            x = subtract(r, radar_rec) if kind.cancels else r
            comm_est = ctx.comm_chain.process(x, ctx.comm_pilot_frame)
            if kind.cancels:
                comm_rec = _comm_reconstruction(comm_est, ctx)
            diags.append(("C", float(energy(x))))

    return ReceiverOutput(kind=kind, radar=radar_res, comm=comm_est,
                          radar_path_hat=path_hat, diagnostics=diags)


def _radar_reconstruction(path_hat: PropagationPath,
                          ctx: StructureContext) -> ComplexSignal:
    if ctx.oracle_radar_path is not None:
        return reconstruct_radar(ctx.oracle_radar_path, ctx.tx_frame,
                                 ctx.params)
    return reconstruct_radar(path_hat, ctx.tx_frame, ctx.params)


def _comm_reconstruction(est: CommEstimate,
                         ctx: StructureContext) -> ComplexSignal:
    if ctx.oracle_comm_path is not None and ctx.oracle_comm_frame is not None:
        return apply_path(pc_fmcw(ctx.oracle_comm_frame, ctx.params),
                          ctx.oracle_comm_path)
    return reconstruct_comm(est, ctx.comm_pilot_frame, ctx.params)
