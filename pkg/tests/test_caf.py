import numpy as np
import pytest

from dopplerpose.caf import (
    CafMap,
    Spectrogram,
    assemble_spectrogram,
    clean_dsi,
    compute_caf,
    self_caf,
    spectrogram_pipeline,
)
from dopplerpose.motion import ActivityKind, generate_activity
from dopplerpose.wavesim import (
    C_LIGHT,
    BasebandSignal,
    Geometry,
    InterferenceConfig,
    ScattererModel,
    bistatic_doppler,
    generate_waveform,
    synthesize_surveillance,
)
from test_wavesim import one_joint_weights, single_scatterer_pose


def direct_caf(sur, ref, delay_bins, freqs):
    """Independent O(N * delays * dopplers) evaluation of the CAF sum."""
    n = len(sur)
    fs = sur.sample_rate_hz
    lags = np.zeros((delay_bins, n), dtype=np.complex128)
    for k in range(delay_bins):
        lags[k, k:] = sur.samples[k:] * np.conj(ref.samples[: n - k])
    t = np.arange(n) / fs
    phases = np.exp(-2j * np.pi * np.outer(freqs, t))  # (F, N)
    return lags @ phases.T  # (D, F)


class TestComputeCaf:
    FS = 1e4

    def _sig(self, n=1024, seed=0):
        return generate_waveform(4e3, n / self.FS, self.FS, seed=seed)

    def test_autocorrelation_peak_is_energy(self):
        u = self._sig()
        m = compute_caf(u, u, delay_bins=8, doppler_span_hz=100.0)
        k, f = m.peak_location()
        assert (k, m.doppler_axis[f]) == (0, 0.0)
        energy = np.sum(np.abs(u.samples) ** 2)
        assert np.isclose(np.abs(m.grid[k, f]), energy, rtol=1e-12)

    def test_pure_sample_delay(self):
        u = self._sig(seed=2)
        shift = 5
        delayed = BasebandSignal(np.concatenate([np.zeros(shift), u.samples[:-shift]]), self.FS)
        m = compute_caf(delayed, u, delay_bins=10, doppler_span_hz=50.0)
        k, f = m.peak_location()
        assert k == shift
        assert m.doppler_axis[f] == 0.0

    def test_pure_modulation(self):
        u = self._sig(seed=3)
        modulated = BasebandSignal(u.samples * np.exp(2j * np.pi * 100.0 * np.arange(len(u)) / self.FS),
                                   self.FS)
        m = compute_caf(modulated, u, delay_bins=4, doppler_span_hz=200.0)
        k, f = m.peak_location()
        assert k == 0
        nearest = m.doppler_axis[np.argmin(np.abs(m.doppler_axis - 100.0))]
        assert m.doppler_axis[f] == nearest

    @pytest.mark.parametrize("oversample", [1, 4])
    def test_fft_matches_direct_sum(self, oversample):
        rng = np.random.default_rng(4)
        n = 512
        sur = BasebandSignal(rng.normal(size=n) + 1j * rng.normal(size=n), self.FS)
        ref = BasebandSignal(rng.normal(size=n) + 1j * rng.normal(size=n), self.FS)
        m = compute_caf(sur, ref, delay_bins=6, doppler_span_hz=300.0,
                        doppler_oversample=oversample)
        oracle = direct_caf(sur, ref, 6, m.doppler_axis)
        rel = np.abs(m.grid - oracle).max() / np.abs(oracle).max()
        assert rel < 1e-6

    def test_rejects_mismatched_inputs(self):
        u = self._sig()
        other_rate = BasebandSignal(u.samples, 2 * self.FS)
        with pytest.raises(ValueError):
            compute_caf(u, other_rate, 4, 50.0)
        shorter = BasebandSignal(u.samples[:-1], self.FS)
        with pytest.raises(ValueError):
            compute_caf(u, shorter, 4, 50.0)


class TestSelfCaf:
    def test_peak_at_origin(self):
        u = generate_waveform(4e3, 0.1, 1e4, seed=5)
        m = self_caf(u, delay_bins=6, doppler_span_hz=60.0)
        k, f = m.peak_location()
        assert k == 0 and m.doppler_axis[f] == 0.0

    def test_delay_sidelobes_below_minus_20db(self):
        # full-band pseudorandom reference: off-peak lags decorrelate to noise level
        u = generate_waveform(1e4, 0.2, 1e4, seed=6)
        m = self_caf(u, delay_bins=16, doppler_span_hz=60.0)
        mags = np.abs(m.grid)
        peak = mags.max()
        f0 = np.argmin(np.abs(m.doppler_axis))
        sidelobes = np.abs(m.grid[1:, f0])
        assert 20 * np.log10(sidelobes.max() / peak) <= -20.0

    def test_zero_signal(self):
        z = BasebandSignal(np.zeros(256, dtype=complex), 1e4)
        m = self_caf(z, delay_bins=4, doppler_span_hz=50.0)
        assert np.all(m.grid == 0)


class TestCleanDsi:
    FS = 1e4

    def test_exact_cancellation_of_scaled_self(self):
        u = generate_waveform(4e3, 0.1, self.FS, seed=7)
        s = self_caf(u, delay_bins=8, doppler_span_hz=60.0)
        k = 0.3 - 1.7j
        scaled = CafMap(k * s.grid, s.delay_axis, s.doppler_axis, s.cpi_s)
        out = clean_dsi(scaled, s)
        peak = np.abs(s.grid).max()
        assert np.abs(out.grid).max() <= 1e-6 * abs(k) * peak

    def test_idempotent_on_pure_dsi(self):
        u = generate_waveform(4e3, 0.1, self.FS, seed=8)
        s = self_caf(u, delay_bins=8, doppler_span_hz=60.0)
        caf0 = CafMap(2.0 * s.grid, s.delay_axis, s.doppler_axis, s.cpi_s)
        once = clean_dsi(caf0, s)
        twice = clean_dsi(once, s)
        peak0 = np.abs(caf0.grid).max()
        assert np.abs(twice.grid - once.grid).max() <= 1e-9 * peak0

    def test_axis_mismatch_rejected(self):
        u = generate_waveform(4e3, 0.1, self.FS, seed=9)
        a = self_caf(u, delay_bins=8, doppler_span_hz=60.0)
        b = self_caf(u, delay_bins=8, doppler_span_hz=30.0)
        with pytest.raises(ValueError):
            clean_dsi(a, b)

    def _dsi_scene(self, target=False):
        geom = Geometry(tx_pos=[-4, 8, 1.5], rx_sur_pos=[0, 8, 1.0],
                        rx_ref_pos=[-4, 8, 1.5])
        u = generate_waveform(4e3, 0.1, self.FS, seed=10)
        if target:
            # radial speed chosen to sit near +50 Hz of bistatic Doppler
            v = 50.0 * C_LIGHT / geom.carrier_hz / 2.0
            pose = single_scatterer_pose([0, 4, 1.0], [-0.707 * v, 0.707 * v, 0],
                                         n_frames=3)
            sc = ScattererModel(joint_weights=40.0 * one_joint_weights())
        else:
            pose = single_scatterer_pose([0, 4, 1.0], [0, 0, 0], n_frames=3)
            sc = ScattererModel(joint_weights=np.zeros(17))
        ic = InterferenceConfig(dsi_amplitude=1.0)
        sur = synthesize_surveillance(u, pose, sc, geom, ic)
        caf0 = compute_caf(sur, u, delay_bins=6, doppler_span_hz=80.0)
        tmpl = self_caf(u, delay_bins=6, doppler_span_hz=80.0)
        return caf0, tmpl

    def test_dsi_scene_attenuated_20db(self):
        caf0, tmpl = self._dsi_scene(target=False)
        f0 = np.argmin(np.abs(caf0.doppler_axis))
        before = np.abs(caf0.grid[:, f0]).max()
        out = clean_dsi(caf0, tmpl)
        after = np.abs(out.grid[:, f0]).max()
        assert 20 * np.log10(after / before) <= -20.0

    def test_offset_target_perturbed_at_most_1db(self):
        caf0, tmpl = self._dsi_scene(target=True)
        f_t = np.argmin(np.abs(caf0.doppler_axis - 50.0))
        before = np.abs(caf0.grid[:, f_t]).max()
        out = clean_dsi(caf0, tmpl)
        after = np.abs(out.grid[:, f_t]).max()
        assert abs(20 * np.log10(after / before)) <= 1.0


class TestAssembleSpectrogram:
    def _map(self, grid):
        d = np.arange(grid.shape[0]) * 1e-4
        f = np.linspace(-20, 20, grid.shape[1])
        return CafMap(grid, d, f, cpi_s=0.1)

    def test_single_cell(self):
        grid = np.zeros((3, 5), dtype=complex)
        grid[1, 3] = 2.0 - 1.0j
        s = assemble_spectrogram([self._map(grid)])
        expect = np.zeros((5, 1))
        expect[3, 0] = 1.0
        assert np.allclose(s.values, expect)

    def test_two_identical_maps(self):
        rng = np.random.default_rng(0)
        grid = rng.normal(size=(3, 5)) + 1j * rng.normal(size=(3, 5))
        s = assemble_spectrogram([self._map(grid), self._map(grid)])
        assert np.allclose(s.values[:, 0], s.values[:, 1])

    def test_normalized_and_argmax_preserved(self):
        rng = np.random.default_rng(1)
        maps = [self._map(rng.normal(size=(4, 9)) + 1j * rng.normal(size=(4, 9)))
                for _ in range(6)]
        raw = np.stack([np.abs(m.grid).sum(axis=0) for m in maps], axis=1)
        s = assemble_spectrogram(maps)
        assert s.values.min() >= 0.0 and s.values.max() <= 1.0
        assert np.array_equal(np.argmax(s.values, axis=0), np.argmax(raw, axis=0))

    def test_empty_and_mismatched_rejected(self):
        with pytest.raises(ValueError):
            assemble_spectrogram([])
        a = self._map(np.ones((3, 5), dtype=complex))
        b = CafMap(np.ones((3, 4), dtype=complex), a.delay_axis,
                   np.linspace(-20, 20, 4), 0.1)
        with pytest.raises(ValueError):
            assemble_spectrogram([a, b])


class TestWalkingSceneTrack:
    def test_column_peak_follows_root_doppler(self):
        fs = 16e3
        geom = Geometry(tx_pos=[-4, 8, 1.5], rx_sur_pos=[0, 8, 1.0],
                        rx_ref_pos=[-3.8, 8, 1.5])
        pose = generate_activity(ActivityKind.WPLUS, 5.0, seed=5)
        u = generate_waveform(8e3, 5.0, fs, seed=1)
        sur = synthesize_surveillance(u, pose, ScattererModel(), geom,
                                      InterferenceConfig())
        spec = spectrogram_pipeline(sur, u, cpi_s=0.1, delay_bins=4,
                                    doppler_span_hz=100.0, doppler_oversample=4)
        bin_hz = spec.doppler_axis[1] - spec.doppler_axis[0]
        hits = 0
        for t in range(spec.n_frames - 1):
            root_v = (pose.positions[t + 1, 0] - pose.positions[t, 0]) / pose.dt
            root_x = 0.5 * (pose.positions[t + 1, 0] + pose.positions[t, 0])
            expect = bistatic_doppler(geom, root_x, root_v)
            peak = spec.doppler_axis[np.argmax(spec.values[:, t])]
            if abs(peak - expect) <= bin_hz:
                hits += 1
        assert hits / (spec.n_frames - 1) >= 0.8


class TestSpectrogramIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        vals = rng.random((9, 7)).astype(np.float32)
        s = Spectrogram(vals, np.linspace(-40, 40, 9), dt=0.1)
        path = tmp_path / "spec.dpc"
        s.save(path)
        back = Spectrogram.load(path)
        assert np.array_equal(back.values.astype(np.float32), vals)
        assert back.dt == 0.1
