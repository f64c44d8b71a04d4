import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indentcp import ConfigurationError, HertzGeometry, hertz_constant
from indentcp.dataio import parse_curve_csv, read_truth
from indentcp.synth import (
    SynthSpec,
    cantilever_like,
    full_coefficients,
    generate,
    mean_curve,
    rbc_like,
    silicone_like,
    truth_path,
    write_synthetic,
)


class TestGenerate:
    def test_noise_free_kink(self):
        sp = SynthSpec(n=20, true_gamma=8.0, sigma1=0.0, sigma2=0.0, beta1=[1.0, 2.0], beta2=[17.0, 5.0],
                       d1=1, post_powers=(1.0,))
        curve, truth = generate(sp)
        x = curve.x
        np.testing.assert_allclose(curve.y[:8], 1 + 2 * x[:8])
        np.testing.assert_allclose(curve.y[8:], 17 + 5 * (x[8:] - 7.0))
        assert truth["x_gamma"] == 7.0 and truth["k"] == 8

    def test_seed_determinism(self):
        a, _ = generate(silicone_like(seed=3))
        b, _ = generate(silicone_like(seed=3))
        c, _ = generate(silicone_like(seed=4))
        assert np.array_equal(a.y, b.y) and not np.array_equal(a.y, c.y)

    def test_pre_contact_variance(self):
        sp = SynthSpec(n=20_001, true_gamma=10_000.5, sigma1=0.3, sigma2=1.0, beta1=[0.5, -1.0],
                       beta2=[0.0, 0.0], d1=1, post_powers=(1.0,), spacing=1e-3, seed=1)
        curve, truth = generate(sp)
        resid = curve.y[:10_000] - mean_curve(curve.x, sp.true_gamma, np.asarray(truth["beta"]), 1, (1.0,))[:10_000]
        assert resid.var() == pytest.approx(0.09, rel=0.05)

    @given(st.floats(2.0, 48.9), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 5))
    @settings(max_examples=40, deadline=None)
    def test_continuous_truth(self, gamma, a, b, c):
        sp = SynthSpec(n=50, true_gamma=gamma, sigma1=0, sigma2=0, beta_tilde=[a, b, c], d1=1,
                       post_powers=(1.5,), smoothness=0, spacing=0.1)
        x = sp.positions()
        xg = x[0] + (gamma - 1) * 0.1
        beta = full_coefficients(sp, xg)
        assert beta[0] + beta[1] * xg == pytest.approx(beta[2], abs=1e-12 * (1 + abs(a) + abs(b) * 5))

    def test_constraint_violation(self):
        sp = SynthSpec(n=20, true_gamma=5.5, sigma1=0.1, sigma2=0.1, beta1=[0.0, 1.0], beta2=[3.0, 1.0],
                       d1=1, post_powers=(1.5,), smoothness=0)
        with pytest.raises(ConfigurationError):
            generate(sp)

    @pytest.mark.parametrize("kw", [
        dict(true_gamma=1.0),
        dict(true_gamma=20.0),
        dict(sigma1=-1.0),
    ])
    def test_invalid(self, kw):
        base = dict(n=20, true_gamma=5.5, sigma1=0.1, sigma2=0.1, beta1=[0, 0], beta2=[0, 1], d1=1, post_powers=(1.0,))
        with pytest.raises(ConfigurationError):
            SynthSpec(**{**base, **kw})

    def test_missing_coefficients(self):
        with pytest.raises(ConfigurationError):
            generate(SynthSpec(n=10, true_gamma=4.5, sigma1=0.1, sigma2=0.1))


class TestPresets:
    def test_silicone_modulus(self):
        sp = silicone_like()
        _, truth = generate(sp)
        c = hertz_constant(HertzGeometry.sphere(radius=87.5e-3, nu=0.5))
        # leading coefficient in N/mm^1.5
        assert truth["beta"][-1] == pytest.approx(17.1e3 * c * 1e-3**1.5, rel=1e-12)
        assert sp.n == 450 and sp.spacing == 0.01 and sp.post_powers == (1.5,)

    def test_cantilever_kink(self):
        sp = cantilever_like()
        curve, truth = generate(sp)
        assert truth["k"] == 48
        assert truth["beta"][-1] == pytest.approx(50.0)

    def test_rbc_variances(self):
        sp = rbc_like()
        assert (sp.sigma2 / sp.sigma1) ** 2 >= 10
        _, truth = generate(sp)
        assert truth["E"] == 25.3 and sp.post_powers == (2.0,)


def test_file_roundtrip(tmp_path):
    sp = silicone_like(seed=1)
    curve, truth = write_synthetic(sp, tmp_path / "c.csv")
    back = parse_curve_csv(tmp_path / "c.csv")
    assert np.array_equal(back.x, curve.x) and np.array_equal(back.y, curve.y)
    assert truth_path(tmp_path / "c.csv").name == "c.truth.json"
    assert read_truth(tmp_path / "c.csv") == json.loads(json.dumps(truth))
