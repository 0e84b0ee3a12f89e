"""Shared fixtures: the benchmark scenario and randomized stabilizing designs."""

import numpy as np
import pytest
import scipy.linalg as la

from mocc.lti import ControllerRealization, PlantModel, is_stable
from mocc.riccati import CareError, CareProblem, solve_care


@pytest.fixture(scope="session")
def plant():
    from mocc.benchmark import double_integrator_plant
    return double_integrator_plant()


@pytest.fixture(scope="session")
def observer_gain():
    return np.array([[-100.0], [-1000.0]])


@pytest.fixture(scope="session")
def reference():
    from mocc.benchmark import benchmark_reference
    return benchmark_reference()


@pytest.fixture(scope="session")
def disturbances():
    from mocc.benchmark import benchmark_disturbances
    return benchmark_disturbances()


@pytest.fixture(scope="session")
def lqt_design(plant):
    from mocc.riccati import lqt_synthesize
    return lqt_synthesize(plant)


@pytest.fixture(scope="session")
def hinf_design(plant):
    from mocc.riccati import hinf_central
    return hinf_central(plant, 0.4108)


@pytest.fixture(scope="session")
def mocc_controller(plant):
    from mocc.benchmark import build_mocc
    return build_mocc(plant)


# ---------------------------------------------------------------------------
# randomized plants and stabilizing controllers
# ---------------------------------------------------------------------------

def random_plant(rng, n=None, m2=1, p2=1):
    """Generic plant with full synthesis structure, n <= 6."""
    if n is None:
        n = int(rng.integers(2, 7))
    for _ in range(50):
        A = rng.standard_normal((n, n))
        B2 = rng.standard_normal((n, m2))
        C2 = rng.standard_normal((p2, n))
        B1 = rng.standard_normal((n, 1))
        # performance output stacks a weighted error row and a control row
        C1 = np.vstack([np.eye(p2), np.zeros((m2, p2))])
        D12 = np.vstack([np.zeros((p2, m2)),
                         np.diag(0.2 + rng.random(m2))])
        D21 = np.atleast_2d(0.05 + 0.2 * rng.random((p2, 1)))
        plant = PlantModel(A=A, B1=B1, B2=B2, C1=C1, C2=C2, D12=D12, D21=D21)
        from mocc.lti import check_stabilizable_detectable
        rep = check_stabilizable_detectable(plant)
        if rep.stabilizable and rep.detectable:
            return plant
    raise RuntimeError("failed to sample a stabilizable/detectable plant")


def _lqr_gain(rng, A, B):
    n = A.shape[0]
    Q = np.eye(n) * (0.5 + rng.random())
    R = np.eye(B.shape[1]) * (0.5 + rng.random())
    X = solve_care(CareProblem(A=A, B=B, Q=Q, R=R))
    return -la.solve(R, B.T @ X)


def _observer_gain(rng, A, C):
    n = A.shape[0]
    Q = np.eye(n) * (0.5 + rng.random())
    R = np.eye(C.shape[0]) * (0.5 + rng.random())
    P = solve_care(CareProblem(A=A.T, B=C.T, Q=Q, R=R))
    return -(P @ C.T) @ la.inv(R)


def random_stabilizing_controller(rng, plant, allow_feedthrough=True,
                                  with_injection=True):
    """Observer-based stabilizing controller, optionally with feedthrough.

    Returns a ControllerRealization (with an output-injection gain when
    requested) verified to stabilize the plant.
    """
    A, B2, C2 = plant.A, plant.B2, plant.C2
    for _ in range(50):
        try:
            F = _lqr_gain(rng, A, B2)
            Lo = _observer_gain(rng, A, C2)
        except CareError:
            continue
        Ac = A + B2 @ F + Lo @ C2
        Bc = -Lo
        Cc = F
        Dc = np.zeros((plant.m2, plant.p2))
        if allow_feedthrough and rng.random() < 0.6:
            Dc = 0.3 * rng.standard_normal((plant.m2, plant.p2))
        from mocc.youla import closed_loop_matrix
        ctrl = ControllerRealization(Ac, Bc, Cc, Dc)
        if not is_stable(closed_loop_matrix(plant, ctrl)):
            continue
        Lc = None
        if with_injection:
            try:
                Lc = _observer_gain(rng, Ac, Cc)
            except CareError:
                continue
            if not is_stable(Ac + Lc @ Cc):
                continue
        return ControllerRealization(Ac, Bc, Cc, Dc, output_injection=Lc)
    raise RuntimeError("failed to sample a stabilizing controller")


def random_observer_gain(rng, plant):
    L = _observer_gain(rng, plant.A, plant.C2)
    assert is_stable(plant.A + L @ plant.C2)
    return L


def random_state_feedback(rng, plant):
    F = _lqr_gain(rng, plant.A, plant.B2)
    assert is_stable(plant.A + plant.B2 @ F)
    return F


def fit_phasor(t, x, omega):
    """Least-squares phasor of x(t) ~ Im(v e^{jwt}) on the sample window."""
    s = np.sin(omega * t)
    c = np.cos(omega * t)
    M = np.column_stack([s, c])
    coef, *_ = np.linalg.lstsq(M, x, rcond=None)
    # x = a sin + b cos = Im((a + jb) e^{jwt})
    return coef[0] + 1j * coef[1]
