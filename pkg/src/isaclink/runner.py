"""Monte-Carlo harness: scenario assembly, sweeps, metrics, CSV emission.

Seeds derive from (master seed, sweep point, trial), with the noise stream
separated from frame/phase draws: runs that differ only in which paths are
present share the noise realization bit-for-bit. Work is split over a
process pool by trial chunks and reduced in index order, so results do not
depend on scheduling.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .analysis import beat_frequency
from .cancellation import (
    StructureContext,
    StructureKind,
    TrackState,
    parse_structure,
    run_structure,
    track_update,
)
from .channel import (
    CommLink,
    PropagationPath,
    Scenario,
    VehicleState,
    radar_sir,
    superpose,
    vehicle_at_step,
    vehicular_link,
)
from .coding import TAIL_BITS
from .comm_rx import CommChain, encode_payload
from .config import ConfigError, ExperimentConfig
from .radar_rx import RadarChain, RadarConfig, cfar_detect
from .waveform import (
    SymbolFrame,
    WaveformParams,
    build_frame,
    constellation,
    pilot_mask,
)

CSV_HEADER = ["structure", "sweep", "pd", "ber", "detections", "trials",
              "bit_errors", "bits", "seed"]


@dataclass
class MetricRow:
    structure: str
    sweep: float
    pd: float
    ber: float
    detections: int
    trials: int
    bit_errors: int
    bits: int
    seed: int

    def astuple(self):
        return (self.structure, self.sweep, self.pd, self.ber,
                self.detections, self.trials, self.bit_errors, self.bits,
                self.seed)


def rows_to_csv(rows: list[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.structure, f"{r.sweep:.9g}", f"{r.pd:.9g}",
                    f"{r.ber:.9g}", r.detections, r.trials, r.bit_errors,
                    r.bits, r.seed])
    return buf.getvalue()


# --- per-trial machinery ------------------------------------------------------


def _trial_rngs(seed: int, point: int, trial: int):
    """Independent streams for own frame, uplink frame, phases; plus the
    scenario noise seed (stable across path variations)."""
    base = [int(seed), int(point), int(trial)]
    own = np.random.default_rng(np.random.SeedSequence(base + [1]))
    uplink = np.random.default_rng(np.random.SeedSequence(base + [2]))
    phases = np.random.default_rng(np.random.SeedSequence(base + [3]))
    noise_seed = int(np.random.SeedSequence(base + [4]).generate_state(1)[0])
    return own, uplink, phases, noise_seed


def _draw_frame(params: WaveformParams, c, coded: bool, n_head: int,
                rng: np.random.Generator) -> tuple[SymbolFrame, np.ndarray]:
    mask = pilot_mask(params.Lc, params.P, n_head)
    n_slots = int((~mask).sum())
    if coded:
        info = rng.integers(0, 2, n_slots - TAIL_BITS)
        syms = encode_payload(info, c, True)
    else:
        info = rng.integers(0, 2, n_slots * c.bits_per_symbol)
        syms = encode_payload(info, c, False)
    return build_frame(syms, c, params.Lc, params.P, n_head, rng), info


@dataclass
class PointSetup:
    """Scenario knobs resolved for one sweep point."""

    noise_sigma2: float
    alpha_r_mag: float
    alpha_c_mag: float
    z_d: int


def resolve_point(cfg: ExperimentConfig, value: float) -> PointSetup:
    c = constellation(cfg.constellation)
    rc = 0.5 if cfg.coding else 1.0
    bps = c.bits_per_symbol
    mos = cfg.oversampling
    ref = cfg.noise_ref_gain if cfg.noise_ref_gain > 0 else cfg.alpha_c

    def sigma_from_ebn0(ebn0_db: float) -> float:
        return mos * ref**2 / (bps * rc * 10 ** (ebn0_db / 10.0))

    alpha_r = cfg.alpha_r
    z_d = cfg.zd
    if cfg.sweep == "ebn0_db":
        sigma2 = sigma_from_ebn0(value)
    elif cfg.sweep == "snr_db":
        sigma2 = mos * ref**2 / 10 ** (value / 10.0)
    elif cfg.sweep == "sir_db":
        sigma2 = sigma_from_ebn0(cfg.ebn0_db)
        alpha_r = cfg.alpha_c * 10 ** (value / 20.0)
    elif cfg.sweep == "zd":
        sigma2 = sigma_from_ebn0(cfg.ebn0_db)
        z_d = int(round(value))
    else:
        raise ConfigError(f"sweep: {cfg.sweep!r} not valid for run_sweep")
    return PointSetup(sigma2, alpha_r, cfg.alpha_c, z_d)


def detection_hit(out_detections, dd_map, params: WaveformParams,
                  true_path: PropagationPath) -> bool:
    """True when a merged detection lies within one unpadded resolution bin
    of the true (f_B, f_D) cell (circular distance on both axes)."""
    if not out_detections:
        return False
    f_b = beat_frequency(params, true_path)
    nf, nd = dd_map.n_fast, dd_map.n_doppler
    zf1 = 1 + dd_map.z_f
    zd1 = 1 + dd_map.z_d
    kf = (-f_b * params.T * zf1) % nf
    kd = (true_path.f_D * params.T_CPI * zd1) % nd
    for det in out_detections:
        df = min((det.fast_bin - kf) % nf, (kf - det.fast_bin) % nf)
        dv = min((det.doppler_bin - kd) % nd, (kd - det.doppler_bin) % nd)
        if df <= zf1 + 0.5 and dv <= zd1 + 0.5:
            return True
    return False


@dataclass
class _Acc:
    detections: int = 0
    trials: int = 0
    bit_errors: int = 0
    bits: int = 0

    def add(self, other: "_Acc"):
        self.detections += other.detections
        self.trials += other.trials
        self.bit_errors += other.bit_errors
        self.bits += other.bits


def _structure_chains(cfg: ExperimentConfig, params: WaveformParams,
                      z_d: int) -> tuple[RadarChain, CommChain]:
    rcfg = RadarConfig(pfa=cfg.pfa, z_f=cfg.zf, z_d=z_d,
                       cfar_train=cfg.cfar_train, cfar_guard=cfg.cfar_guard)
    radar = RadarChain(params, rcfg)
    comm = CommChain(params, constellation(cfg.constellation),
                     coded=cfg.coding)
    return radar, comm


def _run_point_chunk(cfg: ExperimentConfig, point_idx: int, value: float,
                     trial_range: tuple[int, int]) -> dict:
    """Worker: accumulate all structures over a range of trials at one point."""
    params = cfg.waveform_params()
    setup = resolve_point(cfg, value)
    radar, comm = _structure_chains(cfg, params, setup.z_d)
    c = constellation(cfg.constellation)
    kinds = [parse_structure(s) for s in cfg.structures]
    acc = {k.value: _Acc() for k in kinds}

    for trial in range(*trial_range):
        own_rng, up_rng, ph_rng, noise_seed = _trial_rngs(cfg.seed, point_idx,
                                                          trial)
        tx_frame, _ = _draw_frame(params, c, cfg.coding, cfg.pilot_head,
                                  own_rng)
        up_frame, up_info = _draw_frame(params, c, cfg.coding, cfg.pilot_head,
                                        up_rng)
        r_path = PropagationPath(
            setup.alpha_r_mag * np.exp(2j * np.pi * ph_rng.random()),
            cfg.tau_r, cfg.doppler_r)
        c_path = PropagationPath(
            setup.alpha_c_mag * np.exp(2j * np.pi * ph_rng.random()),
            cfg.tau_c, cfg.doppler_c)
        scenario = Scenario(radar_paths=[r_path] if setup.alpha_r_mag else [],
                            comm_links=[CommLink(c_path, up_frame)]
                            if setup.alpha_c_mag else [],
                            noise_sigma2=setup.noise_sigma2,
                            rng_seed=noise_seed)
        r = superpose(scenario, tx_frame, params)
        ctx = StructureContext(params=params, radar_chain=radar,
                               comm_chain=comm, tx_frame=tx_frame,
                               comm_pilot_frame=up_frame.pilots_only())
        for kind in kinds:
            out = run_structure(kind, r, ctx)
            a = acc[kind.value]
            a.trials += 1
            if out.radar is not None and detection_hit(
                    out.detections, out.radar.dd_map, params, r_path):
                a.detections += 1
            if out.comm is not None and setup.alpha_c_mag:
                got = out.comm.info_bits if cfg.coding else out.comm.decided_bits
                n = min(got.size, up_info.size)
                a.bit_errors += int(np.sum(got[:n] != up_info[:n]))
                a.bits += int(n)
    return {"point": point_idx, "value": value,
            "acc": {k: vars(v) for k, v in acc.items()}}


def _chunks(n_trials: int, n_chunks: int):
    edges = np.linspace(0, n_trials, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_sweep(cfg: ExperimentConfig) -> list[MetricRow]:
    """All sweep points and structures; rows sorted by (structure, sweep)."""
    cfg.validate()
    results: dict[tuple[int, str], _Acc] = {}
    tasks = []
    n_chunks = max(1, min(cfg.threads * 2, cfg.trials)) if cfg.threads > 1 else 1
    for pi, value in enumerate(cfg.sweep_values):
        for rng_pair in _chunks(cfg.trials, n_chunks):
            tasks.append((pi, value, rng_pair))

    outs = []
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            futs = [pool.submit(_run_point_chunk, cfg, pi, val, tr)
                    for pi, val, tr in tasks]
            outs = [f.result() for f in futs]  # submission (index) order
    else:
        outs = [_run_point_chunk(cfg, pi, val, tr) for pi, val, tr in tasks]

    for out in outs:
        for sname, a in out["acc"].items():
            key = (out["point"], sname)
            results.setdefault(key, _Acc()).add(_Acc(**a))

    rows = []
    for (pi, sname), a in results.items():
        pd = a.detections / a.trials if a.trials else 0.0
        ber = a.bit_errors / a.bits if a.bits else 0.0
        rows.append(MetricRow(sname, float(cfg.sweep_values[pi]), pd, ber,
                              a.detections, a.trials, a.bit_errors, a.bits,
                              cfg.seed))
    rows.sort(key=lambda r: (r.structure, r.sweep))
    return rows


# --- dynamic vehicular experiment ---------------------------------------------


@dataclass
class DynamicStep:
    """Deterministic geometry of one time step."""

    step: int
    sir: float
    tau_r: float
    alpha_r_mag: float
    radar_path: PropagationPath
    comm_path: PropagationPath


def dynamic_geometry(cfg: ExperimentConfig) -> list[DynamicStep]:
    state = VehicleState(p_C=cfg.p_c, p_R=cfg.p_r0, v=cfg.speed, rho=cfg.rho,
                         delta_t=cfg.delta_t)
    steps = []
    for n in range(cfg.steps):
        try:
            links = vehicular_link(state, n, fc=cfg.carrier)
            sir = radar_sir(vehicle_at_step(state, n))
        except ValueError:
            break  # target range reached zero: truncate with what we have
        steps.append(DynamicStep(n, sir, links["radar"].tau,
                                 abs(links["radar"].alpha),
                                 links["radar"], links["comm"]))
    return steps


def _bootstrap_kind(kind: StructureKind) -> StructureKind:
    return {StructureKind.DYN_CR: StructureKind.RCR,
            StructureKind.DYN_CRC: StructureKind.RCRC}[kind]


def _run_dynamic_chunk(cfg: ExperimentConfig, trial_range: tuple[int, int]
                       ) -> dict:
    params = cfg.waveform_params()
    c = constellation(cfg.constellation)
    steps = dynamic_geometry(cfg)
    radar, comm = _structure_chains(cfg, params, cfg.zd)
    kinds = [parse_structure(s) for s in cfg.structures]
    rc = 0.5 if cfg.coding else 1.0
    acc = {(s.step, k.value): _Acc() for s in steps for k in kinds}

    for trial in range(*trial_range):
        tracks: dict[str, TrackState | None] = {k.value: None for k in kinds}
        for st in steps:
            # noise level follows the comm link so Eb/N0 stays at the target
            sigma2 = (params.Mos * abs(st.comm_path.alpha) ** 2
                      / (c.bits_per_symbol * rc * 10 ** (cfg.ebn0_db / 10.0)))
            own_rng, up_rng, ph_rng, noise_seed = _trial_rngs(
                cfg.seed, st.step, trial)
            tx_frame, _ = _draw_frame(params, c, cfg.coding, cfg.pilot_head,
                                      own_rng)
            up_frame, up_info = _draw_frame(params, c, cfg.coding,
                                            cfg.pilot_head, up_rng)
            scenario = Scenario(radar_paths=[st.radar_path],
                                comm_links=[CommLink(st.comm_path, up_frame)],
                                noise_sigma2=sigma2, rng_seed=noise_seed)
            r = superpose(scenario, tx_frame, params)
            for kind in kinds:
                run_kind = kind
                ctx = StructureContext(params=params, radar_chain=radar,
                                       comm_chain=comm, tx_frame=tx_frame,
                                       comm_pilot_frame=up_frame.pilots_only())
                if kind.is_dynamic:
                    if tracks[kind.value] is None:
                        run_kind = _bootstrap_kind(kind)  # first measurement
                    else:
                        ctx.track = tracks[kind.value]
                out = run_structure(run_kind, r, ctx)
                a = acc[(st.step, kind.value)]
                a.trials += 1
                if out.radar is not None and detection_hit(
                        out.detections, out.radar.dd_map, params,
                        st.radar_path):
                    a.detections += 1
                if out.comm is not None:
                    got = (out.comm.info_bits if cfg.coding
                           else out.comm.decided_bits)
                    n = min(got.size, up_info.size)
                    a.bit_errors += int(np.sum(got[:n] != up_info[:n]))
                    a.bits += int(n)
                if kind.is_dynamic:
                    est = out.radar_path_hat
                    if est is not None:
                        ts = TrackState(est.tau, est.f_D, est.alpha, st.step)
                        tracks[kind.value] = track_update(
                            ts, cfg.delta_t, cfg.carrier, tau_max=params.Tg)
                    elif tracks[kind.value] is not None:
                        tracks[kind.value] = track_update(
                            tracks[kind.value], cfg.delta_t, cfg.carrier,
                            tau_max=params.Tg)
    return {"acc": {k: vars(v) for k, v in acc.items()}}


def run_dynamic(cfg: ExperimentConfig) -> tuple[list[MetricRow], list[DynamicStep]]:
    """Trajectory experiment; rows indexed by time step in the sweep column."""
    cfg.validate()
    steps = dynamic_geometry(cfg)
    if not steps:
        raise ConfigError("p_r0/speed/steps: trajectory is empty")

    n_chunks = max(1, min(cfg.threads * 2, cfg.trials)) if cfg.threads > 1 else 1
    chunks = _chunks(cfg.trials, n_chunks)
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            outs = [f.result() for f in
                    [pool.submit(_run_dynamic_chunk, cfg, tr) for tr in chunks]]
    else:
        outs = [_run_dynamic_chunk(cfg, tr) for tr in chunks]

    results: dict[tuple[int, str], _Acc] = {}
    for out in outs:
        for key, a in out["acc"].items():
            results.setdefault(key, _Acc()).add(_Acc(**a))
    rows = []
    for (step, sname), a in results.items():
        pd = a.detections / a.trials if a.trials else 0.0
        ber = a.bit_errors / a.bits if a.bits else 0.0
        rows.append(MetricRow(sname, float(step), pd, ber, a.detections,
                              a.trials, a.bit_errors, a.bits, cfg.seed))
    rows.sort(key=lambda r: (r.structure, r.sweep))
    return rows, steps


# --- noise-only false-alarm estimation ----------------------------------------


def estimate_pfa(cfg: ExperimentConfig) -> dict:
    """Empirical per-cell CFAR flag rate on noise-only delay-Doppler maps."""
    cfg.validate()
    params = cfg.waveform_params()
    c = constellation(cfg.constellation)
    radar, _ = _structure_chains(cfg, params, cfg.zd)
    if cfg.noise_cells <= 0:
        raise ConfigError("noise_cells: must be positive")
    from .radar_rx import cfar_row_stats

    flagged = 0
    cells = 0
    frame = 0
    row_stats = None
    while cells < cfg.noise_cells:
        own_rng, _, _, noise_seed = _trial_rngs(cfg.seed, 0, frame)
        tx_frame, _ = _draw_frame(params, c, False, cfg.pilot_head, own_rng)
        scenario = Scenario(noise_sigma2=1.0, rng_seed=noise_seed)
        r = superpose(scenario, tx_frame, params)
        dd = radar.map_of(r, tx_frame)
        if row_stats is None:
            row_stats = cfar_row_stats(dd.valid_fast, cfg.pfa,
                                       cfg.cfar_train, cfg.cfar_guard)
        dets = cfar_detect(dd, cfg.pfa, cfg.cfar_train, cfg.cfar_guard,
                           merge=False, row_stats=row_stats)
        flagged += len(dets)
        cells += int(dd.valid_fast.sum()) * dd.n_doppler
        frame += 1
    return {"pfa_hat": flagged / cells, "flagged": flagged, "cells": cells,
            "frames": frame, "target": cfg.pfa}
