import numpy as np
import pytest

from mocc.lti import (FrequencyGrid, PlantModel, StateSpaceModel,
                      check_stabilizable_detectable,
                      check_standard_assumptions, exact_discretize,
                      frequency_response, interconnect_feedback,
                      invariant_zeros, is_stable, similarity_transform,
                      spectral_abscissa)

from conftest import fit_phasor


class TestSpectralAbscissa:
    def test_nilpotent(self):
        assert spectral_abscissa([[0, 1], [0, 0]]) == pytest.approx(0.0, abs=1e-12)

    def test_negative_identity(self):
        assert spectral_abscissa(-np.eye(2)) == pytest.approx(-1.0)

    def test_observer_matrix(self, plant, observer_gain):
        # slower root of s^2 + 100 s + 1000, by the quadratic formula
        expected = -50.0 + np.sqrt(2500.0 - 1000.0)
        M = plant.A + observer_gain @ plant.C2
        assert spectral_abscissa(M) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(-11.27, abs=5e-3)

    def test_similarity_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            A = rng.standard_normal((n, n))
            while True:
                T = rng.standard_normal((n, n))
                if np.linalg.cond(T) <= 1e3:
                    break
            drift = abs(spectral_abscissa(A)
                        - spectral_abscissa(np.linalg.inv(T) @ A @ T))
            assert drift <= 1e-8

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            spectral_abscissa(np.ones((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            spectral_abscissa([[np.nan, 0], [0, 1]])


class TestPbh:
    def test_benchmark_plant(self, plant):
        rep = check_stabilizable_detectable(plant)
        assert rep.stabilizable and rep.detectable

    def test_unstable_uncontrollable(self):
        p = PlantModel(A=[[1.0]], B1=[[1.0]], B2=[[0.0]], C1=[[1.0]],
                       C2=[[1.0]], D12=[[1.0]], D21=[[1.0]])
        rep = check_stabilizable_detectable(p)
        assert not rep.stabilizable
        assert rep.detectable

    def test_stable_modes_need_nothing(self):
        p = PlantModel(A=[[-1.0]], B1=[[1.0]], B2=[[0.0]], C1=[[1.0]],
                       C2=[[0.0]], D12=[[1.0]], D21=[[1.0]])
        rep = check_stabilizable_detectable(p)
        assert rep.stabilizable and rep.detectable


class TestStandardAssumptions:
    def test_benchmark_plant_passes(self, plant):
        rep = check_standard_assumptions(plant)
        assert rep.all_ok
        # the disturbance pencil loses rank at the roots of
        # 0.01 s^2 + s + 10, strictly in the left half plane
        roots = np.roots([0.01, 1.0, 10.0])
        got = np.sort(rep.disturbance_zeros.real)
        assert np.allclose(got, np.sort(roots), atol=1e-6)
        assert rep.control_zeros.size == 0

    def test_zero_d12_fails_weights(self, plant):
        p = PlantModel(A=plant.A, B1=plant.B1, B2=plant.B2, C1=plant.C1,
                       C2=plant.C2, D12=np.zeros_like(plant.D12),
                       D21=plant.D21)
        rep = check_standard_assumptions(p)
        assert not rep.weights_ok

    def test_zero_d21_fails_weights(self, plant):
        p = PlantModel(A=plant.A, B1=plant.B1, B2=plant.B2, C1=plant.C1,
                       C2=plant.C2, D12=plant.D12,
                       D21=np.zeros_like(plant.D21))
        rep = check_standard_assumptions(p)
        assert not rep.weights_ok

    def test_known_zero_detected(self):
        # x' = -x + u, y = x: zero of (A, B, C, D) with D = 1 at s = -2
        z = invariant_zeros([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
        assert z.size == 1
        assert z[0] == pytest.approx(-2.0, abs=1e-9)


class TestFrequencyResponse:
    def test_first_order_dc(self):
        sys = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
        assert frequency_response(sys, 0.0)[0, 0] == pytest.approx(1.0)

    def test_first_order_at_one(self):
        sys = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
        got = frequency_response(sys, 1.0)[0, 0]
        assert got == pytest.approx(1.0 / (1.0 + 1.0j))

    def test_pole_on_axis_raises(self):
        sys = StateSpaceModel([[0.0, 1.0], [-4.0, 0.0]], [[0.0], [1.0]],
                              [[1.0, 0.0]], [[0.0]])
        with pytest.raises(ValueError):
            frequency_response(sys, 2.0)

    def test_matches_time_simulation(self):
        # steady-state sinusoid response of a random stable 4-state system
        rng = np.random.default_rng(11)
        A = rng.standard_normal((4, 4))
        A = A - (np.max(np.linalg.eigvals(A).real) + 0.7) * np.eye(4)
        B = rng.standard_normal((4, 1))
        C = rng.standard_normal((1, 4))
        sys = StateSpaceModel(A, B, C, [[0.0]])
        omega = 1.3
        h = 1e-3
        # exact discretization of the oscillator-augmented system
        Aa = np.zeros((6, 6))
        Aa[:4, :4] = A
        Aa[:4, 4] = B[:, 0]
        Aa[4:, 4:] = [[0.0, omega], [-omega, 0.0]]
        Ad, _ = exact_discretize(Aa, np.zeros((6, 1)), h)
        x = np.zeros(6)
        x[5] = 1.0  # sin generator
        n_steps = 40000
        out = np.empty(n_steps)
        ts = np.empty(n_steps)
        for k in range(n_steps):
            x = Ad @ x
            out[k] = (C @ x[:4])[0]
            ts[k] = (k + 1) * h
        tail = ts > 20.0
        v = fit_phasor(ts[tail], out[tail], omega)
        expected = frequency_response(sys, omega)[0, 0]
        assert abs(v - expected) <= 1e-6 * (1 + abs(expected))


class TestInterconnect:
    def test_zero_controller_returns_plant(self):
        G = StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
        K = StateSpaceModel.static([[0.0]])
        cl = interconnect_feedback(G, K, -1)
        assert np.allclose(cl.A[:1, :1], G.A)
        assert frequency_response(cl, 0.7)[0, 0] == pytest.approx(
            frequency_response(G, 0.7)[0, 0])

    def test_static_negative_feedback(self):
        g, k = 2.0, 3.0
        cl = interconnect_feedback(StateSpaceModel.static([[g]]),
                                   StateSpaceModel.static([[k]]), -1)
        assert cl.D[0, 0] == pytest.approx(g / (1 + g * k))

    def test_positive_feedback_closed_loop_matrix(self, plant, hinf_design):
        G = plant.measurement_system()
        K = StateSpaceModel(hinf_design.A_inf, hinf_design.B_inf,
                            hinf_design.C_inf, np.zeros((1, 1)))
        cl = interconnect_feedback(G, K, +1)
        expected = np.block([
            [plant.A, plant.B2 @ hinf_design.C_inf],
            [hinf_design.B_inf @ plant.C2, hinf_design.A_inf],
        ])
        assert np.allclose(cl.A, expected, atol=1e-12)

    def test_algebraic_loop_raises(self):
        G = StateSpaceModel.static([[1.0]])
        K = StateSpaceModel.static([[1.0]])
        with pytest.raises(ValueError):
            interconnect_feedback(G, K, +1)

    def test_response_algebra_identity(self):
        # closed loop response equals G (I + K G)^-1 at random frequencies
        rng = np.random.default_rng(3)
        A = rng.standard_normal((3, 3)) - 2.0 * np.eye(3)
        G = StateSpaceModel(A, rng.standard_normal((3, 1)),
                            rng.standard_normal((1, 3)), [[0.3]])
        Ak = rng.standard_normal((2, 2)) - 2.0 * np.eye(2)
        K = StateSpaceModel(Ak, rng.standard_normal((2, 1)),
                            rng.standard_normal((1, 2)), [[0.1]])
        cl = interconnect_feedback(G, K, -1)
        for w in rng.uniform(0.01, 50.0, size=50):
            Gw = frequency_response(G, w)
            Kw = frequency_response(K, w)
            expected = Gw @ np.linalg.inv(np.eye(1) + Kw @ Gw)
            got = frequency_response(cl, w)
            assert np.linalg.norm(got - expected) <= 1e-10 * (
                1 + np.linalg.norm(expected))


class TestExactDiscretize:
    def test_integrator(self):
        Ad, Bd = exact_discretize(np.array([[0.0]]), np.array([[1.0]]), 0.1)
        assert Ad[0, 0] == pytest.approx(1.0)
        assert Bd[0, 0] == pytest.approx(0.1)

    def test_first_order_analytic(self):
        Ad, Bd = exact_discretize(np.array([[-1.0]]), np.array([[1.0]]), 1.0)
        assert Ad[0, 0] == pytest.approx(np.exp(-1.0))
        assert Bd[0, 0] == pytest.approx(1.0 - np.exp(-1.0))

    def test_double_integrator(self, plant):
        Ad, _ = exact_discretize(plant.A, plant.B2, 0.01)
        assert np.allclose(Ad, [[1.0, 0.01], [0.0, 1.0]], atol=1e-15)

    def test_semigroup_property(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((4, 4))
        B = rng.standard_normal((4, 2))
        h = 0.03
        Ad, Bd = exact_discretize(A, B, h)
        A3, B3 = exact_discretize(A, B, 3 * h)
        # three steps of (Ad, Bd) with held input equal one step of (A3, B3)
        Ad3 = Ad @ Ad @ Ad
        Bd3 = (Ad @ Ad + Ad + np.eye(4)) @ Bd
        assert np.allclose(Ad3, A3, atol=1e-10)
        assert np.allclose(Bd3, B3, atol=1e-10)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            exact_discretize(np.zeros((1, 1)), np.ones((1, 1)), 0.0)


class TestFrequencyGrid:
    def test_log_spaced(self):
        g = FrequencyGrid.log_spaced(0.1, 100.0, 25)
        assert len(g) == 25
        assert np.all(np.diff(g.omegas) > 0)

    def test_rejects_decreasing(self):
        with pytest.raises(ValueError):
            FrequencyGrid([1.0, 0.5])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            FrequencyGrid([-1.0, 0.5])


class TestStateSpaceValidation:
    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            StateSpaceModel(np.eye(2), np.ones((3, 1)), np.ones((1, 2)),
                            np.zeros((1, 1)))

    def test_similarity_transform_preserves_response(self):
        rng = np.random.default_rng(9)
        sys = StateSpaceModel(rng.standard_normal((3, 3)) - 2 * np.eye(3),
                              rng.standard_normal((3, 1)),
                              rng.standard_normal((1, 3)), [[0.0]])
        T = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        sys2 = similarity_transform(sys, T)
        for w in (0.0, 0.7, 3.0):
            assert np.allclose(frequency_response(sys, w),
                               frequency_response(sys2, w), atol=1e-10)
