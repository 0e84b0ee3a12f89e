import numpy as np
import pytest

from mocc.analysis import power_norm_dependent, power_norm_signal
from mocc.lti import StateSpaceModel
from mocc.signals import SignalChannel, SignalSpec, Sinusoid


class TestSampling:
    def test_reference_at_half(self, reference):
        assert reference.sample(0.5)[0] == pytest.approx(1.0)

    def test_w2_at_zero(self, disturbances):
        assert disturbances["w2"].sample(0.0)[0] == pytest.approx(1.0)

    def test_w1_at_third(self, disturbances):
        assert disturbances["w1"].sample(1.0 / 3.0)[0] == pytest.approx(1.0)

    def test_vectorized_shape(self, disturbances):
        t = np.linspace(0, 1, 11)
        assert disturbances["w2"].sample(t).shape == (1, 11)

    def test_phase_convention(self):
        s = SignalSpec.sine(2.0, 3.0, phase=0.4)
        t = np.linspace(0, 5, 7)
        assert np.allclose(s.sample(t)[0], 2.0 * np.sin(3.0 * t + 0.4))

    def test_dependency_not_sampled(self, disturbances):
        w2, w3 = disturbances["w2"], disturbances["w3"]
        t = np.linspace(0, 2, 9)
        assert np.allclose(w3.sample(t), w2.sample(t))


class TestValidation:
    def test_duplicate_frequencies_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            SignalChannel(0.0, (Sinusoid(1.0, 2.0), Sinusoid(0.5, 2.0)))

    def test_zero_frequency_rejected(self):
        with pytest.raises(ValueError):
            Sinusoid(1.0, 0.0)

    def test_empty_spec_rejected(self):
        with pytest.raises(ValueError):
            SignalSpec(())

    def test_dependency_dimension_checked(self):
        filt = StateSpaceModel([[0.0]], [[1.0]], [[1.0], [1.0]],
                               [[0.0], [0.0]])
        with pytest.raises(ValueError):
            SignalSpec.sine(1.0, 1.0).with_dependency(filt)


class TestComponents:
    def test_single_sine(self):
        s = SignalSpec.sine(1.0, np.pi)
        comps = list(s.components())
        assert len(comps) == 1
        om, v = comps[0]
        assert om == pytest.approx(np.pi)
        assert v[0] == pytest.approx(1.0 + 0.0j)

    def test_offset_appears_as_dc(self, disturbances):
        comps = dict(disturbances["w2"].components())
        assert 0.0 in comps
        assert comps[0.0][0] == pytest.approx(1.0)
        assert len(comps) == 3

    def test_shared_frequency_detection(self, reference, disturbances):
        assert not reference.shares_frequency_with(disturbances["w1"])
        assert reference.shares_frequency_with(
            SignalSpec.sine(0.3, np.pi))
        # constants collide with constants
        assert SignalSpec.constant([1.0]).shares_frequency_with(
            SignalSpec.constant([2.0]))


class TestPowerNorm:
    def test_single_sine(self, reference):
        assert power_norm_signal(reference) == pytest.approx(1 / np.sqrt(2))

    def test_w2_additivity(self, disturbances):
        # distinct frequencies are orthogonal: 1/2 + 1/2 + 1
        assert power_norm_signal(disturbances["w2"]) == pytest.approx(np.sqrt(2))

    def test_multichannel_sum(self):
        s = SignalSpec((SignalChannel(1.0, (Sinusoid(2.0, 1.0),)),
                        SignalChannel(0.0, (Sinusoid(1.0, 3.0),))))
        assert power_norm_signal(s) == pytest.approx(np.sqrt(1.0 + 2.0 + 0.5))

    def test_against_time_average(self, disturbances):
        # long-horizon numeric average as the independent oracle
        for name in ("w1", "w2"):
            s = disturbances[name]
            t = np.arange(0.0, 5000.0, 0.01)
            x = s.sample(t)
            num = np.sqrt(np.mean(np.sum(x * x, axis=0)))
            assert num == pytest.approx(power_norm_signal(s), rel=5e-3)

    def test_dependent_requires_reference(self, disturbances):
        with pytest.raises(ValueError, match="dependen"):
            power_norm_signal(disturbances["w3"])

    def test_dependent_power(self, disturbances, reference):
        w3 = disturbances["w3"]
        # |W(j pi)|^2 / 2 with W(s) = 1/(s - 0.01)
        gain_sq = 1.0 / (np.pi**2 + 0.01**2)
        expected = np.sqrt(2.0 + 0.5 * gain_sq)
        assert power_norm_dependent(w3, reference) == pytest.approx(expected)

    def test_dependent_power_without_filter_falls_back(self, disturbances,
                                                       reference):
        assert power_norm_dependent(disturbances["w2"], reference) == \
            pytest.approx(np.sqrt(2))
