import numpy as np
import pytest

import modedecomp as md
from modedecomp.errors import BandOutOfRange, SinZeroBand


def table_gap(recovered_values, truth_values):
    num = md.signal_norm(recovered_values - truth_values)
    den = md.signal_norm(truth_values)
    return num / (den if den > 0 else 1.0)


FINE = (np.arange(8192) + 0.5) / 8192


class TestBandOrder:
    def test_interleaved(self):
        assert md.band_order(0) == [0]
        assert md.band_order(2) == [0, 1, -1, 2, -2]


class TestModifiedRdbr:
    def test_band_zero_on_pure_mode(self):
        t = md.sample_grid(2 ** 13)
        shape = md.ecg_like_shape(512, 1)
        sig = md.make_signal(t, md.eval_shape(shape, 45.0 * t))
        prior = md.with_fundamental(md.make_prior(45.0 * t), t)
        shapes, modes, residual = md.modified_rdbr(sig, [prior], 0, "cos",
                                                   1e-6, 10, 200)
        rel = table_gap(md.eval_shape(shapes[0], FINE),
                        md.eval_shape(shape, FINE))
        assert rel <= 5e-2
        assert md.signal_norm(residual.values) / sig.l2norm <= 5e-2

    def test_zero_residual(self):
        t = md.sample_grid(512)
        sig = md.make_signal(t, np.zeros(512))
        prior = md.with_fundamental(md.make_prior(9.0 * t), t)
        shapes, modes, residual = md.modified_rdbr(sig, [prior], 1, "cos",
                                                   1e-6, 5, 32)
        assert shapes[0].l2norm == 0.0
        assert md.signal_norm(modes[0].values) == 0.0

    def test_band_one_demodulation_identity(self):
        # f = cos(2 pi phi) * s(N phi): the doubled band-1 estimate is s and
        # the mode increment reproduces f
        t = md.sample_grid(2 ** 13)
        n_fund = 50
        shape = md.ecg_like_shape(512, 2)
        f = np.cos(2 * np.pi * t) * md.eval_shape(shape, n_fund * t)
        sig = md.make_signal(t, f)
        prior = md.with_fundamental(md.make_prior(float(n_fund) * t), t)
        shapes, modes, residual = md.modified_rdbr(sig, [prior], 1, "cos",
                                                   1e-6, 10, 200)
        assert table_gap(md.eval_shape(shapes[0], FINE),
                         md.eval_shape(shape, FINE)) <= 5e-2
        assert md.signal_norm(modes[0].values - f) / sig.l2norm <= 5e-2
        assert md.signal_norm(residual.values) / sig.l2norm <= 5e-2

    def test_sin_zero_band_rejected(self):
        t = md.sample_grid(128)
        sig = md.make_signal(t, np.ones(128))
        prior = md.with_fundamental(md.make_prior(4.0 * t), t)
        with pytest.raises(SinZeroBand):
            md.modified_rdbr(sig, [prior], 0, "sin")


class TestMmdDecompose:
    def test_zero_signal(self):
        t = md.sample_grid(256)
        sig = md.make_signal(t, np.zeros(256))
        prior = md.with_fundamental(md.make_prior(8.0 * t), t)
        res = md.mmd_decompose(sig, [prior], md.MmdConfig(m0=1, j1=5, bins=16))
        est = res.estimates[0]
        assert all(c == 0.0 for c in est.cos_coeffs.values())
        assert all(c == 0.0 for c in est.sin_coeffs.values())
        assert md.signal_norm(res.residual.values) == 0.0
        assert res.report.stop_reason == md.StopReason.RESIDUAL_SMALL

    def test_bookkeeping_identity(self):
        ex = md.gen_example_4_1(2 ** 12, 0.0, 1)
        res = md.mmd_decompose(ex.signal, list(ex.priors),
                               md.MmdConfig(m0=1, j1=4, bins=100))
        total = (res.estimates[0].mode.values + res.estimates[1].mode.values
                 + res.residual.values)
        assert md.signal_norm(total - ex.signal.values) / ex.signal.l2norm <= 1e-10

    def test_mode_equals_band_sum(self):
        # the accumulated mode and the band-sum reconstruction agree
        ex = md.gen_example_4_1(2 ** 12, 0.0, 1)
        res = md.mmd_decompose(ex.signal, list(ex.priors),
                               md.MmdConfig(m0=1, j1=4, bins=100))
        for k in range(2):
            est = res.estimates[k]
            rebuilt = md.reconstruct_mimf(est, ex.priors[k], ex.signal.times)
            rel = (md.signal_norm(rebuilt.values - est.mode.values)
                   / max(est.mode.l2norm, 1e-30))
            assert rel <= 1e-12

    def test_band_nesting(self):
        ex = md.gen_example_4_1(2 ** 12, 0.0, 1)
        res = md.mmd_decompose(ex.signal, list(ex.priors),
                               md.MmdConfig(m0=2, j1=3, bins=100))
        t = ex.signal.times
        for k in range(2):
            est = res.estimates[k]
            low = md.ell_band_approx(est, ex.priors[k], 1, t).values
            full = md.reconstruct_mimf(est, ex.priors[k], t).values
            outer = np.zeros_like(full)
            p = ex.priors[k].phase
            n_fund = ex.priors[k].fundamental
            for n in (2, -2):
                outer += (np.cos(2 * np.pi * n * p / n_fund)
                          * md.eval_shape(est.cos_shapes[n], p))
                outer += (np.sin(2 * np.pi * n * p / n_fund)
                          * md.eval_shape(est.sin_shapes[n], p))
            rel = md.signal_norm(low + outer - full) / max(md.signal_norm(full), 1e-30)
            assert rel <= 1e-12

    def test_normalized_shapes_unit_or_zero(self):
        ex = md.gen_example_4_1(2 ** 12, 0.0, 1)
        res = md.mmd_decompose(ex.signal, list(ex.priors),
                               md.MmdConfig(m0=1, j1=4, bins=100))
        for est in res.estimates:
            normed = md.normalize_estimate(est)
            for n, table in normed.cos_shapes.items():
                if normed.cos_coeffs[n] == 0.0:
                    assert table.l2norm == 0.0
                else:
                    assert table.l2norm == pytest.approx(1.0, abs=1e-10)
            assert all(c >= 0.0 for c in normed.cos_coeffs.values())
            assert all(c >= 0.0 for c in normed.sin_coeffs.values())

    def test_m0_zero_matches_gmd_product(self):
        # cross-algorithm consistency on a unit-amplitude mode
        t = md.sample_grid(2 ** 13)
        shape = md.ecg_like_shape(512, 1)
        sig = md.make_signal(t, md.eval_shape(shape, 60.0 * t))
        prior = md.with_fundamental(md.make_prior(60.0 * t), t)
        gres = md.gmd_decompose(sig, [prior], eps=1e-6, max_iters=20, bins=200)
        mres = md.mmd_decompose(sig, [prior],
                                md.MmdConfig(m0=0, j1=20, bins=200))
        gmode = gres.modes[0].values
        mmode = mres.estimates[0].mode.values
        assert md.signal_norm(gmode - mmode) / sig.l2norm <= 5e-2

    def test_stop_reason_stalled_on_noise(self):
        rng = np.random.default_rng(0)
        t = md.sample_grid(2 ** 12)
        sig = md.make_signal(t, rng.normal(0, 1, 2 ** 12))
        prior = md.with_fundamental(md.make_prior(30.0 * t), t)
        res = md.mmd_decompose(sig, [prior], md.MmdConfig(m0=1, j1=50, bins=64))
        assert res.report.stop_reason == md.StopReason.STALLED
        assert res.report.iterations < 50

    def test_distinct_band_waveforms_identified(self):
        # the point of the banded model: each band may carry its own
        # waveform, and the decomposition must separate them
        t = md.sample_grid(2 ** 14)
        n_fund = 64
        centers = (np.arange(512) + 0.5) / 512
        s_a = md.ecg_like_shape(512, 1)
        s_b = md.ecg_like_shape(512, 2)
        third = md.center_shape(md.make_shape(
            np.cos(2 * np.pi * centers) + 0.4 * np.sin(4 * np.pi * centers)))
        s_c = md.scale_shape(third, 1.0 / third.l2norm)
        phase_fn = lambda tt: tt + 0.005 * np.sin(2 * np.pi * tt)  # noqa: E731
        spec = md.ComponentSpec(
            amplitude=lambda tt: np.ones_like(tt), phase=phase_fn,
            fundamental=n_fund, shape=s_a,
            bands={0: md.BandSpec(1.0, 0.0, s_a, None),
                   1: md.BandSpec(0.3, 0.2, s_b, s_c)})
        sig = md.gen_mimf(spec, t)
        prior = md.with_fundamental(md.make_prior(n_fund * phase_fn(t)), t)
        res = md.mmd_decompose(sig, [prior],
                               md.MmdConfig(m0=1, j1=100, j2=10, bins=200))
        est = res.estimates[0]
        assert table_gap(md.eval_shape(est.cos_shapes[0], FINE),
                         md.eval_shape(s_a, FINE)) <= 1e-2
        rec_c = (md.eval_shape(est.cos_shapes[1], FINE)
                 + md.eval_shape(est.cos_shapes[-1], FINE))
        assert table_gap(rec_c, 0.3 * md.eval_shape(s_b, FINE)) <= 1e-2
        rec_s = (md.eval_shape(est.sin_shapes[1], FINE)
                 - md.eval_shape(est.sin_shapes[-1], FINE))
        assert table_gap(rec_s, 0.2 * md.eval_shape(s_c, FINE)) <= 1e-2

    def test_stop_reason_max_iter(self):
        ex = md.gen_example_4_1(2 ** 12, 0.0, 1)
        res = md.mmd_decompose(ex.signal, list(ex.priors),
                               md.MmdConfig(m0=1, j1=1, bins=100))
        assert res.report.stop_reason == md.StopReason.MAX_ITER
        assert res.report.iterations == 1

    def test_config_validation(self):
        with pytest.raises(md.OutOfDomain):
            md.MmdConfig(m0=-1).validate()
        with pytest.raises(md.OutOfDomain):
            md.MmdConfig(eps1=0.0).validate()
        with pytest.raises(md.OutOfDomain):
            md.MmdConfig(j2=0).validate()
        with pytest.raises(md.DecompositionError):
            md.MmdConfig(scheme="sor").validate()


class TestBandOperators:
    def _fitted(self):
        ex = md.gen_example_4_1(2 ** 12, 0.0, 1)
        res = md.mmd_decompose(ex.signal, list(ex.priors),
                               md.MmdConfig(m0=2, j1=4, bins=100))
        return ex, res

    def test_full_band_equals_reconstruction(self):
        ex, res = self._fitted()
        t = ex.signal.times
        est = res.estimates[0]
        full = md.ell_band_approx(est, ex.priors[0], 2, t)
        rebuilt = md.reconstruct_mimf(est, ex.priors[0], t)
        assert np.array_equal(full.values, rebuilt.values)

    def test_band_zero_only_estimate(self):
        t = md.sample_grid(1024)
        prior = md.with_fundamental(md.make_prior(12.0 * t), t)
        table = md.ecg_like_shape(128, 1)
        est = md.make_estimate(2, {0: table}, {})
        assert np.array_equal(
            md.ell_band_approx(est, prior, 0, t).values,
            md.reconstruct_mimf(est, prior, t).values)

    def test_out_of_range(self):
        ex, res = self._fitted()
        with pytest.raises(BandOutOfRange):
            md.ell_band_approx(res.estimates[0], ex.priors[0], 3,
                               ex.signal.times)

    def test_residual_of_full_fit_small(self):
        ex, res = self._fitted()
        t = ex.signal.times
        # attribute the signal to component 0 by removing the other fit
        attributed = md.SampledSignal(
            ex.signal.times, ex.signal.values - res.estimates[1].mode.values)
        r2 = md.band_residual(attributed, res.estimates[0], ex.priors[0], 2, t)
        assert md.signal_norm(r2.values) / ex.components[0].l2norm <= 5e-2

    def test_zero_estimate_returns_signal(self):
        t = md.sample_grid(256)
        sig = md.make_signal(t, np.sin(2 * np.pi * 5 * t))
        prior = md.with_fundamental(md.make_prior(5.0 * t), t)
        est = md.make_estimate(1, {0: md.zero_shape(16), 1: md.zero_shape(16)},
                               {1: md.zero_shape(16)})
        out = md.band_residual(sig, est, prior, 1, t)
        assert np.array_equal(out.values, sig.values)

    def test_band_zero_exposes_variance(self):
        ex, res = self._fitted()
        t = ex.signal.times
        attributed = md.SampledSignal(
            ex.signal.times, ex.signal.values - res.estimates[1].mode.values)
        r0 = md.band_residual(attributed, res.estimates[0], ex.priors[0], 0, t)
        r2 = md.band_residual(attributed, res.estimates[0], ex.priors[0], 2, t)
        assert md.signal_norm(r0.values) >= md.signal_norm(r2.values)
