"""Stabilizing Riccati solutions and the LQ-tracking / H-infinity pipeline.

The continuous algebraic Riccati equation is solved by an ordered real
Schur decomposition of the associated Hamiltonian (stable invariant
subspace), with one optional defect-correction sweep.  On top of that sit
the optimal tracking design (state feedback plus bounded anticausal
feedforward) and the central H-infinity output-feedback design with a
bisection search for the attenuation level.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .lti import (PlantModel, check_stabilizable_detectable, is_stable,
                  sorted_eigenvalues, spectral_abscissa)
from .signals import SignalSpec

__all__ = [
    "CareProblem",
    "CareError",
    "CareConditioningError",
    "GammaInfeasibleError",
    "LqtDesign",
    "HinfDesign",
    "solve_care",
    "care_residual",
    "lqt_synthesize",
    "lqt_minimal_cost",
    "hinf_central",
    "hinf_gamma_min",
    "pick_observer_gain",
    "anticausal_phasor",
]

CARE_RESIDUAL_TOL = 1e-8
GAMMA_CAP = 1e6
# Spectral-radius feasibility margin keeps the gamma bisection off the
# coupling boundary.
RHO_MARGIN = 1.0 - 1e-9
# Subspace bases with condition numbers beyond this are numerically
# meaningless regardless of context.
HARD_COND_CAP = 1e12
# Conditioning regime accepted during the gamma search; near the optimum
# the stabilizing solutions blow up and the central formulas lose
# accuracy, so the search backs off while it is still trustworthy.
GAMMA_SEARCH_COND_CAP = 8.0


class CareError(ValueError):
    """No stabilizing Riccati solution exists for the given data."""


class CareConditioningError(CareError):
    """The stable invariant subspace is too ill-conditioned to invert."""


class GammaInfeasibleError(ValueError):
    def __init__(self, gamma, reason):
        self.gamma = gamma
        self.reason = reason
        super().__init__(f"gamma={gamma:g} infeasible: {reason}")


@dataclass(frozen=True)
class CareProblem:
    """Data of ``A'X + XA - (XB+S) R^-1 (XB+S)' + Q = 0``."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        n, m = B.shape
        if A.shape != (n, n) or Q.shape != (n, n) or R.shape != (m, m):
            raise ValueError("inconsistent CARE dimensions")
        if not np.allclose(Q, Q.T, atol=1e-10):
            raise ValueError("Q must be symmetric")
        if not np.allclose(R, R.T, atol=1e-10):
            raise ValueError("R must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0:
            raise ValueError("R must be positive definite")
        S = np.zeros((n, m)) if self.S is None else \
            np.atleast_2d(np.asarray(self.S, dtype=float))
        if S.shape != (n, m):
            raise ValueError("S has wrong shape")
        for nm, M in (("A", A), ("B", B), ("Q", Q), ("R", R), ("S", S)):
            object.__setattr__(self, nm, M)


def care_residual(A, B, Q, R, S, X) -> float:
    """Frobenius norm of the CARE residual at ``X``."""
    G = X @ B + S
    res = A.T @ X + X @ A - G @ la.solve(R, G.T) + Q
    return float(np.linalg.norm(res, "fro"))


def _solve_care_raw(A, B, Q, R, S, max_cond=HARD_COND_CAP):
    """Stabilizing solution via the ordered Schur form of the Hamiltonian.

    Accepts indefinite ``R`` (needed by the H-infinity equations).
    Returns ``(X, subspace_cond)``.
    """
    n = A.shape[0]
    Rinv_S = la.solve(R, S.T)
    Rinv_B = la.solve(R, B.T)
    A0 = A - B @ Rinv_S
    H = np.block([
        [A0, -B @ Rinv_B],
        [-(Q - S @ Rinv_S), -A0.T],
    ])
    ev = np.linalg.eigvals(H)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.min(np.abs(ev.real)) < 1e-9 * scale:
        raise CareError("no stabilizing solution: Hamiltonian eigenvalue on "
                        "the imaginary axis")
    T, Z, sdim = la.schur(H, output="real", sort=lambda re, im: re < 0.0)
    if sdim != n:
        raise CareError(f"stable invariant subspace has dimension {sdim}, "
                        f"expected {n}")
    U1 = Z[:n, :n]
    U2 = Z[n:, :n]
    cond = float(np.linalg.cond(U1))
    if not np.isfinite(cond) or cond > max_cond:
        raise CareConditioningError(
            f"stable-subspace basis condition {cond:.3g} exceeds {max_cond:.3g}")
    X = la.solve(U1.T, U2.T).T
    X = 0.5 * (X + X.T)

    # one defect-correction sweep if the residual is above tolerance
    res = care_residual(A, B, Q, R, S, X)
    if res > CARE_RESIDUAL_TOL * (1.0 + np.linalg.norm(X, "fro")):
        Acl = A - B @ la.solve(R, (X @ B + S).T)
        G = X @ B + S
        defect = A.T @ X + X @ A - G @ la.solve(R, G.T) + Q
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                dX = la.solve_continuous_lyapunov(Acl.T, -defect)
            Xc = X + 0.5 * (dX + dX.T)
            if care_residual(A, B, Q, R, S, Xc) < res:
                X = Xc
        except Exception:
            pass
    return X, cond


def solve_care(problem: CareProblem, max_cond=HARD_COND_CAP) -> np.ndarray:
    """Stabilizing solution of a definite-R CARE.

    The returned ``X`` is symmetric, satisfies the equation to the module
    residual tolerance and makes ``A - B R^-1 (B'X + S')`` stable.
    """
    X, _ = _solve_care_raw(problem.A, problem.B, problem.Q, problem.R,
                           problem.S, max_cond=max_cond)
    return X


# ---------------------------------------------------------------------------
# LQ optimal tracking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LqtDesign:
    """Optimal tracking design: feedback gain and feedforward drive.

    The control law is ``u = F xhat - R1^-1 B2' b - R1^-1 D12'C1 r`` with
    the bounded feedforward state ``b' = -(A + B2 F)' b + S_ff r``.
    """

    Pi: np.ndarray
    F: np.ndarray
    S_ff: np.ndarray
    R1: np.ndarray
    b_input_gain: np.ndarray      # -R1^-1 B2'
    r_input_gain: np.ndarray      # -R1^-1 D12' C1
    closed_loop_A: np.ndarray     # A + B2 F


def lqt_synthesize(plant: PlantModel) -> LqtDesign:
    """Solve the tracking Riccati equation and assemble the 2DoF law."""
    rep = check_stabilizable_detectable(plant)
    if not (rep.stabilizable and rep.detectable):
        raise ValueError("plant is not stabilizable/detectable")
    Cw = plant.error_weight                       # C1 C2
    Q = Cw.T @ Cw
    S = plant.C2.T @ (plant.C1.T @ plant.D12)
    R1 = plant.R1
    if np.min(np.linalg.eigvalsh(0.5 * (R1 + R1.T))) <= 0:
        raise ValueError("R1 = D12'D12 must be positive definite")
    Pi, _ = _solve_care_raw(plant.A, plant.B2, Q, R1, S)
    F = -la.solve(R1, (Pi @ plant.B2 + S).T)
    S_ff = plant.C2.T @ plant.C1.T @ plant.C1 \
        - (Pi @ plant.B2 + S) @ la.solve(R1, plant.D12.T @ plant.C1)
    Acl = plant.A + plant.B2 @ F
    if not is_stable(Acl):
        raise CareError("tracking feedback failed to stabilize the plant")
    return LqtDesign(
        Pi=Pi, F=F, S_ff=S_ff, R1=R1,
        b_input_gain=-la.solve(R1, plant.B2.T),
        r_input_gain=-la.solve(R1, plant.D12.T @ plant.C1),
        closed_loop_A=Acl,
    )


def anticausal_phasor(M: np.ndarray, S: np.ndarray, omega: float,
                      v: np.ndarray) -> np.ndarray:
    """Phasor of the bounded solution of ``b' = -M' b + S r``.

    For ``r = Im(v e^{jwt})`` the bounded (two-sided) solution is
    ``b = Im(b_v e^{jwt})`` with ``b_v = (jwI + M')^-1 S v``; ``omega = 0``
    gives the stationary point.  ``M`` must be stable so the inverse exists
    for every real frequency.
    """
    n = M.shape[0]
    return np.linalg.solve(1j * omega * np.eye(n) + M.T, S @ v)


def lqt_minimal_cost(design: LqtDesign, plant: PlantModel,
                     r: SignalSpec) -> float:
    """Long-run average cost of the optimal tracking loop, in closed form.

    Evaluates the stationary average of
    ``||C1 r||^2 - ||R1^{-1/2} (B2' b - D12'C1 r)||^2``
    over the constant-plus-sinusoid family via phasors (the mean square of
    ``Im(v e^{jwt})`` is ``|v|^2 / 2``).
    """
    if r.dependency is not None:
        raise ValueError("reference signal cannot carry a dependency filter")
    if r.dim != plant.p2:
        raise ValueError("reference dimension mismatch")
    M = design.closed_loop_A
    total = 0.0
    for omega, v in r.components():
        weight = 1.0 if omega == 0.0 else 0.5
        b_v = anticausal_phasor(M, design.S_ff, omega, v)
        g_v = plant.B2.T @ b_v - plant.D12.T @ plant.C1 @ v
        c1_term = float(np.real(np.vdot(plant.C1 @ v, plant.C1 @ v)))
        inner = float(np.real(np.vdot(g_v, la.solve(design.R1, g_v))))
        total += weight * (c1_term - inner)
    return total


# ---------------------------------------------------------------------------
# Central H-infinity design
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HinfDesign:
    """Central output-feedback design at attenuation level ``gamma``."""

    gamma: float
    P1: np.ndarray
    P2: np.ndarray
    A_inf: np.ndarray
    B_inf: np.ndarray
    C_inf: np.ndarray
    L_inf: np.ndarray
    subspace_condition: float


def _psd_check(X, name, gamma):
    lam = np.linalg.eigvalsh(0.5 * (X + X.T))
    if lam[0] < -1e-8 * (1.0 + abs(lam[-1])):
        raise GammaInfeasibleError(gamma, f"{name} is not positive semidefinite "
                                          f"(min eigenvalue {lam[0]:.3g})")


def hinf_central(plant: PlantModel, gamma: float,
                 max_subspace_cond: float = HARD_COND_CAP) -> HinfDesign:
    """Solve the two H-infinity Riccati equations and build the controller.

    Feasibility requires stabilizing positive-semidefinite solutions of
    both equations and the coupling condition
    ``rho(P1 P2) < gamma^2``.  Raises :class:`GammaInfeasibleError` with
    the failed condition; a conditioning cap can reject levels whose
    subspace bases are numerically degenerate.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    A, B1, B2 = plant.A, plant.B1, plant.B2
    C2, D21, D12 = plant.C2, plant.D21, plant.D12
    Cw = plant.error_weight
    R1, R2 = plant.R1, plant.R2
    n = plant.n
    S1 = plant.C2.T @ (plant.C1.T @ D12)

    # state equation: indefinite-R CARE over the stacked input [u, w]
    Bt = np.hstack([B2, B1])
    Rt = la.block_diag(R1, -gamma**2 * np.eye(plant.m1))
    St = np.hstack([S1, np.zeros((n, plant.m1))])
    try:
        P1, cond1 = _solve_care_raw(A, Bt, Cw.T @ Cw, Rt, St,
                                    max_cond=max_subspace_cond)
    except CareError as exc:
        raise GammaInfeasibleError(gamma, f"state equation: {exc}") from exc
    _psd_check(P1, "P1", gamma)

    # filter equation: dual CARE over the stacked output [y, z]
    Ct = np.hstack([C2.T, Cw.T])
    Rt2 = la.block_diag(R2, -gamma**2 * np.eye(plant.p1))
    St2 = np.hstack([B1 @ D21.T, np.zeros((n, plant.p1))])
    try:
        P2, cond2 = _solve_care_raw(A.T, Ct, B1 @ B1.T, Rt2, St2,
                                    max_cond=max_subspace_cond)
    except CareError as exc:
        raise GammaInfeasibleError(gamma, f"filter equation: {exc}") from exc
    _psd_check(P2, "P2", gamma)

    rho = float(np.max(np.abs(np.linalg.eigvals(P1 @ P2))))
    if rho >= gamma**2 * RHO_MARGIN:
        raise GammaInfeasibleError(
            gamma, f"coupling spectral radius {rho:.6g} >= gamma^2")

    C_inf = -la.solve(R1, (P1 @ B2 + S1).T)
    L_inf = -(C2 @ P2 + D21 @ B1.T).T @ la.inv(R2)
    Z = np.eye(n) - gamma**-2 * (P2 @ P1)
    B_inf = -la.solve(Z, L_inf)
    A_inf = A + gamma**-2 * (B1 @ B1.T) @ P1 + B2 @ C_inf \
        - B_inf @ (C2 + gamma**-2 * D21 @ B1.T @ P1)

    # the design must actually stabilize the plant
    Acl = np.block([[A, B2 @ C_inf], [B_inf @ C2, A_inf]])
    if not is_stable(Acl):
        raise GammaInfeasibleError(gamma, "central controller fails to "
                                          "stabilize the closed loop")
    return HinfDesign(gamma=float(gamma), P1=P1, P2=P2, A_inf=A_inf,
                      B_inf=B_inf, C_inf=C_inf, L_inf=L_inf,
                      subspace_condition=max(cond1, cond2))


def hinf_gamma_min(plant: PlantModel, tol: float = 1e-4,
                   cond_cap: float = GAMMA_SEARCH_COND_CAP,
                   gamma_cap: float = GAMMA_CAP) -> float:
    """Smallest numerically trustworthy attenuation level, by bisection.

    The bracket grows by doubling from ``gamma = tol``; a candidate counts
    as feasible when :func:`hinf_central` succeeds with both subspace bases
    keeping their condition numbers at or below ``cond_cap``.  The cap
    rejects levels so close to the optimum that the central formulas
    degenerate; pass ``cond_cap=None`` for the purely mathematical
    boundary.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    cap = HARD_COND_CAP if cond_cap is None else cond_cap

    def feasible(g):
        try:
            hinf_central(plant, g, max_subspace_cond=cap)
            return True
        except (GammaInfeasibleError, CareError):
            return False

    g = tol
    if feasible(g):
        return g
    lo = g
    while True:
        g *= 2.0
        if g > gamma_cap:
            raise ValueError(f"no feasible gamma found below {gamma_cap:g}")
        if feasible(g):
            hi = g
            break
        lo = g
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


def pick_observer_gain(plant: PlantModel, L=None, weights=None) -> np.ndarray:
    """Validate a supplied observer gain or design one from a dual CARE.

    Either pass ``L`` directly (checked to make ``A + L C2`` stable) or
    ``weights=(Qo, Ro)`` to get ``L = -(P C2') Ro^-1`` from the dual
    Riccati equation.
    """
    if (L is None) == (weights is None):
        raise ValueError("pass exactly one of L or weights")
    if L is not None:
        L = np.atleast_2d(np.asarray(L, dtype=float))
        if L.shape != (plant.n, plant.p2):
            raise ValueError("observer gain has wrong shape")
        Ao = plant.A + L @ plant.C2
        if not is_stable(Ao):
            ev = sorted_eigenvalues(Ao)
            raise ValueError(
                f"A + L C2 is not stable (spectral abscissa "
                f"{spectral_abscissa(Ao):.3g}, eigenvalues {ev})")
        return L
    Qo, Ro = weights
    Qo = np.atleast_2d(np.asarray(Qo, dtype=float))
    Ro = np.atleast_2d(np.asarray(Ro, dtype=float))
    prob = CareProblem(A=plant.A.T, B=plant.C2.T, Q=Qo, R=Ro)
    P = solve_care(prob)
    L = -(P @ plant.C2.T) @ la.inv(Ro)
    if not is_stable(plant.A + L @ plant.C2):
        raise CareError("dual-CARE observer gain failed the stability check")
    return L
