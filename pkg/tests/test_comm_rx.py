import numpy as np
import pytest
from scipy.special import erfc

from isaclink.channel import PropagationPath, Scenario, CommLink, apply_path, superpose
from isaclink.comm_rx import (
    CommChain,
    cfo_estimate,
    comm_dechirp,
    demod,
    encode_payload,
    equalize_and_decide,
    estimate_gain,
    frame_bit_plan,
    ls_path_gain,
    pilot_pulse_waveform,
    time_sync,
)
from isaclink.waveform import (
    ComplexSignal,
    WaveformParams,
    build_frame,
    constellation,
    map_bits,
    payload_capacity,
    pc_fmcw,
    staircase,
)

from test_waveform import desk_params


def comm_frame(p, kind="qpsk", seed=0, coded=False):
    c = constellation(kind)
    rng = np.random.default_rng(seed)
    plan_slots = payload_capacity(p.Lc, p.P, 2)
    if coded:
        info = plan_slots - 2
        bits = rng.integers(0, 2, info)
        syms = encode_payload(bits, c, True)
    else:
        bits = rng.integers(0, 2, plan_slots * c.bits_per_symbol)
        syms = map_bits(bits, c)
    return build_frame(syms, c, p.Lc, p.P, 2, rng), bits


def qfunc(x):
    return 0.5 * erfc(x / np.sqrt(2.0))


class TestTimeSync:
    def test_integer_delay_exact(self):
        p = desk_params(P=4, Lc=16, Mos=8)
        fr, _ = comm_frame(p)
        x = pc_fmcw(fr, p)
        for k in (0, 3, 7):
            r = apply_path(x, PropagationPath(1.0, k * p.Ts, 0.0))
            lag = time_sync(r, pilot_pulse_waveform(fr.pilots_only(), p))
            assert lag == k

    def test_noisy_delay_within_one_sample(self):
        # tau_C = 2.5 us at Eb/N0 = 10 dB, no radar echo
        T = 100e-6
        p = WaveformParams(fc=1e9, B=2e6, T=T, T_PRI=105e-6, P=8, Lc=50, Mos=8)
        sigma2 = p.Mos / (2 * 10.0)  # Eb/N0 = 10 dB for unit-gain QPSK
        k_true = round(2.5e-6 / p.Ts)
        hits = 0
        n_tr = 60
        for seed in range(n_tr):
            fr, _ = comm_frame(p, seed=seed)
            sc = Scenario(comm_links=[CommLink(
                PropagationPath(1.0, 2.5e-6, -300.0), fr)],
                noise_sigma2=sigma2, rng_seed=seed)
            r = superpose(sc, fr.pilots_only(), p)  # tx frame unused (no echo)
            lag = time_sync(r, pilot_pulse_waveform(fr.pilots_only(), p))
            hits += abs(lag - k_true) <= 1
        assert hits >= 0.99 * n_tr

    def test_all_zero_rejected(self):
        p = desk_params(P=2)
        fr, _ = comm_frame(p)
        with pytest.raises(ValueError, match="no correlation peak"):
            time_sync(ComplexSignal(np.zeros(p.n_frame), p.Ts),
                      pilot_pulse_waveform(fr.pilots_only(), p))

    def test_tie_breaks_to_smaller_lag(self):
        p = desk_params(P=2)
        fr, _ = comm_frame(p)
        tpl = pilot_pulse_waveform(fr.pilots_only(), p)
        # periodic signal: equal peaks at 0 and n_pri
        x = np.tile(np.concatenate([tpl, np.zeros(p.n_pri - tpl.size)]), p.P)
        lag = time_sync(ComplexSignal(x, p.Ts), tpl, max_lag=p.n_pri)
        assert lag == 0


class TestDechirpDemod:
    def test_aligned_noiseless_recovers_staircase(self):
        p = desk_params(P=4, Lc=16, Mos=8)
        fr, _ = comm_frame(p)
        r = apply_path(pc_fmcw(fr, p), PropagationPath(1.0, 0.0, 0.0))
        y = comm_dechirp(r, 0, p)
        assert np.allclose(y[: p.n_pulse, :], staircase(fr, p), atol=1e-9)

    def test_soft_symbols_exact_with_known_cfo(self):
        p = desk_params(P=4, Lc=16, Mos=8)
        fr, _ = comm_frame(p)
        beta = 0.8 * np.exp(0.3j)
        f_d = -300.0
        r = apply_path(pc_fmcw(fr, p), PropagationPath(beta, 0.0, f_d))
        soft = demod(comm_dechirp(r, 0, p), f_d, p)
        assert np.allclose(soft, beta * fr.symbols, atol=1e-6)

    def test_residual_ramp_slope_matches_offset(self):
        # sync off by d samples leaves phase slope 2 pi (B/T) d Ts per sample
        p = desk_params(P=2, Lc=32, Mos=8, BT=128.0)
        fr, _ = comm_frame(p)
        d = 2
        r = apply_path(pc_fmcw(fr, p), PropagationPath(1.0, d * p.Ts, 0.0))
        soft = demod(comm_dechirp(r, 0, p), 0.0, p)  # aligned at lag 0: off by d
        beta, slope = estimate_gain(soft, fr)
        expect = -2 * np.pi * (p.B / p.T) * (d * p.Ts) * p.Tc
        assert slope == pytest.approx(expect, rel=0.05)

    def test_lag_out_of_range(self):
        p = desk_params(P=2)
        fr, _ = comm_frame(p)
        r = pc_fmcw(fr, p)
        with pytest.raises(ValueError):
            comm_dechirp(r, -1, p)


class TestCfo:
    def test_exact_recovery_on_clean_tone(self):
        p = desk_params(P=8, Lc=16, Mos=8)
        fr, _ = comm_frame(p)
        f_d = -300.0
        r = apply_path(pc_fmcw(fr, p), PropagationPath(1.0, 0.0, f_d))
        f_hat = cfo_estimate(comm_dechirp(r, 0, p), fr.pilots_only(), p)
        assert f_hat == pytest.approx(f_d, abs=0.5)

    def test_noise_floor_at_10db(self):
        p = desk_params(P=8, Lc=32, Mos=8)
        sigma2 = p.Mos / (2 * 10.0)
        errs = []
        for seed in range(25):
            fr, _ = comm_frame(p, seed=seed)
            sc = Scenario(comm_links=[CommLink(PropagationPath(1.0, 0.0, 0.0),
                                               fr)],
                          noise_sigma2=sigma2, rng_seed=seed)
            r = superpose(sc, fr.pilots_only(), p)
            f_hat = cfo_estimate(comm_dechirp(r, 0, p), fr.pilots_only(), p)
            errs.append(abs(f_hat))
        # refined estimator: well under a Doppler bin 1/T_CPI
        assert np.median(errs) < 0.1 / p.T_CPI

    def test_ambiguity_at_half_pri_rate(self):
        p = desk_params(P=8, Lc=16, Mos=8)
        fr, _ = comm_frame(p)
        f_lim = 1.0 / (2 * p.T_PRI)
        f_d = f_lim * 1.2
        r = apply_path(pc_fmcw(fr, p), PropagationPath(1.0, 0.0, f_d))
        f_hat = cfo_estimate(comm_dechirp(r, 0, p), fr.pilots_only(), p)
        # aliases: comes back wrapped into (-f_lim, f_lim]
        assert abs(f_hat) <= f_lim * 1.01
        assert f_hat == pytest.approx(f_d - 2 * f_lim, rel=0.05)


class TestEqualizeDecide:
    def test_noiseless_zero_errors_all_constellations(self):
        p = desk_params(P=4, Lc=16, Mos=8)
        for kind in ("bpsk", "qpsk", "psk16", "qam16"):
            fr, bits = comm_frame(p, kind=kind, seed=3)
            r = apply_path(pc_fmcw(fr, p),
                           PropagationPath(0.5 * np.exp(1.7j), 0.0, 0.0))
            chain = CommChain(p, constellation(kind))
            est = chain.process(r, fr.pilots_only())
            assert np.array_equal(est.decided_bits, bits)

    def test_decision_scale_invariance(self):
        c = constellation("qam16")
        rng = np.random.default_rng(0)
        soft = rng.normal(size=(8, 4)) + 1j * rng.normal(size=(8, 4))
        a = equalize_and_decide(soft, 1.0 + 0j, c)
        b = equalize_and_decide(soft * (2.0 - 1.0j), 2.0 - 1.0j, c)
        assert np.allclose(a["hard"], b["hard"])

    def test_zero_gain_rejected(self):
        with pytest.raises(ValueError):
            equalize_and_decide(np.ones((2, 2)), 0.0, constellation("bpsk"))

    def test_ties_break_to_lower_symbol_index(self):
        from isaclink.waveform import hard_decide

        c = constellation("qpsk")
        # the origin is equidistant from all four points
        assert hard_decide(np.array([0.0 + 0.0j]), c)[0] == 0
        # midpoint between BPSK points
        assert hard_decide(np.array([0.0 + 0.3j]), constellation("bpsk"))[0] == 0

    def test_matched_filter_gain(self):
        # integrating Mos samples beats a single-sample decision by Mos in SNR
        p = desk_params(P=2, Lc=32, Mos=16)
        rng = np.random.default_rng(5)
        fr, _ = comm_frame(p, seed=5)
        sigma2 = 1.0
        sc = Scenario(comm_links=[CommLink(PropagationPath(1.0, 0.0, 0.0), fr)],
                      noise_sigma2=sigma2, rng_seed=7)
        r = superpose(sc, fr.pilots_only(), p)
        y = comm_dechirp(r, 0, p)
        soft = demod(y, 0.0, p)
        noise_soft = np.var(soft - fr.symbols)
        noise_raw = np.var(y[: p.n_pulse] - staircase(fr, p))
        assert noise_raw / noise_soft == pytest.approx(p.Mos, rel=0.15)


class TestEndToEnd:
    @pytest.mark.parametrize("kind", ["bpsk", "qpsk", "psk16", "qam16"])
    def test_identity_channel_zero_errors(self, kind):
        p = desk_params(P=4, Lc=16, Mos=8)
        fr, bits = comm_frame(p, kind=kind, seed=11)
        r = apply_path(pc_fmcw(fr, p), PropagationPath(1.0, 0.0, 0.0))
        est = CommChain(p, constellation(kind)).process(r, fr.pilots_only())
        assert np.array_equal(est.decided_bits, bits)
        assert est.tau_hat == pytest.approx(0.0, abs=p.Ts / 4)
        assert est.alpha_hat == pytest.approx(1.0, rel=1e-3)

    def test_delayed_doppler_channel(self):
        T = 100e-6
        p = WaveformParams(fc=1e9, B=2e6, T=T, T_PRI=105e-6, P=8, Lc=50, Mos=8)
        fr, bits = comm_frame(p, seed=13)
        path = PropagationPath(0.7 * np.exp(-0.4j), 2.5e-6, -300.0)
        r = apply_path(pc_fmcw(fr, p), path)
        est = CommChain(p, constellation("qpsk")).process(r, fr.pilots_only())
        assert np.array_equal(est.decided_bits, bits)
        assert est.tau_hat == pytest.approx(path.tau, abs=p.Ts)
        assert est.f_D_hat == pytest.approx(path.f_D, abs=2.0)
        # reconstruction residual from the LS template must be tiny
        recon = est.template.samples * est.alpha_hat
        resid = np.sum(np.abs(r.samples - recon) ** 2) / np.sum(np.abs(r.samples) ** 2)
        assert resid < 1e-3

    def test_fractional_delay_reconstruction(self):
        T = 100e-6
        p = WaveformParams(fc=1e9, B=2e6, T=T, T_PRI=105e-6, P=8, Lc=50, Mos=8)
        fr, bits = comm_frame(p, seed=17)
        path = PropagationPath(1.0, 2.5e-6 + 0.4 * p.Ts, -300.0)
        r = apply_path(pc_fmcw(fr, p), path)
        est = CommChain(p, constellation("qpsk")).process(r, fr.pilots_only())
        assert np.array_equal(est.decided_bits, bits)
        assert est.tau_hat == pytest.approx(path.tau, abs=0.15 * p.Ts)
        recon = est.template.samples * est.alpha_hat
        resid = np.sum(np.abs(r.samples - recon) ** 2) / np.sum(np.abs(r.samples) ** 2)
        assert resid < 5e-3

    def test_qpsk_awgn_ber_near_theory(self):
        T = 100e-6
        p = WaveformParams(fc=1e9, B=2e6, T=T, T_PRI=105e-6, P=20, Lc=50, Mos=8)
        ebn0_db = 6.0
        ebn0 = 10 ** (ebn0_db / 10)
        sigma2 = p.Mos / (2 * ebn0)
        errors = 0
        total = 0
        chain = CommChain(p, constellation("qpsk"))
        for seed in range(30):
            fr, bits = comm_frame(p, seed=100 + seed)
            sc = Scenario(comm_links=[CommLink(PropagationPath(1.0, 0.0, 0.0),
                                               fr)],
                          noise_sigma2=sigma2, rng_seed=seed)
            r = superpose(sc, fr.pilots_only(), p)
            est = chain.process(r, fr.pilots_only())
            errors += int(np.sum(est.decided_bits != bits))
            total += bits.size
        ber = errors / total
        # within 0.5 dB of the closed form (and not "better", which would
        # indicate broken noise bookkeeping)
        assert ber < qfunc(np.sqrt(2 * 10 ** ((ebn0_db - 0.5) / 10)))
        assert ber > qfunc(np.sqrt(2 * 10 ** ((ebn0_db + 1.0) / 10)))

    def test_coded_round_trip_noiseless(self):
        p = desk_params(P=4, Lc=16, Mos=8)
        fr, bits = comm_frame(p, coded=True, seed=19)
        r = apply_path(pc_fmcw(fr, p), PropagationPath(1.0, 0.0, 0.0))
        est = CommChain(p, constellation("qpsk"), coded=True).process(
            r, fr.pilots_only())
        assert np.array_equal(est.info_bits, bits)

    def test_ls_path_gain(self):
        p = desk_params(P=2)
        rng = np.random.default_rng(23)
        t = ComplexSignal(rng.normal(size=p.n_frame)
                          + 1j * rng.normal(size=p.n_frame), p.Ts)
        r = ComplexSignal(t.samples * (1.3 - 0.2j), p.Ts)
        assert ls_path_gain(r, t) == pytest.approx(1.3 - 0.2j)

    def test_frame_bit_plan(self):
        p = desk_params(P=4, Lc=16, Mos=8)
        fr, _ = comm_frame(p)
        c = constellation("qpsk")
        plan = frame_bit_plan(p, fr, c, coded=False)
        n_slots = int((~fr.pilot_mask).sum())
        assert plan["info_bits"] == 2 * n_slots
        plan_c = frame_bit_plan(p, fr, c, coded=True)
        assert plan_c["info_bits"] == n_slots - 2
