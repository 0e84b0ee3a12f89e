"""Comparison controllers: plain optimal tracking, disturbance-observer
compensation, and robust tracking built around the central design.

Each synthesis returns a design object exposing ``loop_controller()`` so
the simulation engine and the channel-model analysis treat all loops
uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .lti import PlantModel, is_stable, sorted_eigenvalues, spectral_abscissa
from .riccati import HinfDesign, LqtDesign, hinf_central, lqt_synthesize
from .sim import AnticausalDrive, LoopController

__all__ = [
    "LqtController",
    "lqt_controller",
    "DobcDesign",
    "dobc_compensation_gain",
    "dobc_synthesize",
    "HinfTrackingDesign",
    "hinf_tracking_synthesize",
]


@dataclass(frozen=True)
class LqtController:
    """Observer-based optimal tracking controller with bounded feedforward."""

    plant: PlantModel
    design: LqtDesign
    L: np.ndarray

    def loop_controller(self) -> LoopController:
        plant, d = self.plant, self.design
        A, B2, C2 = plant.A, plant.B2, plant.C2
        n, p2 = plant.n, plant.p2
        L = self.L
        AK = A + B2 @ d.F + L @ C2
        By = -L
        Br = B2 @ d.r_input_gain
        drive = AnticausalDrive(M=d.closed_loop_A, S=d.S_ff,
                                u_gain=d.b_input_gain,
                                state_gain=B2 @ d.b_input_gain)
        return LoopController(A=AK, By=By, Br=Br, Cu=d.F,
                              Dy=np.zeros((plant.m2, p2)),
                              Dr=d.r_input_gain, drive=drive,
                              f_state=C2, f_y=-np.eye(p2),
                              uq_state=np.zeros((plant.m2, n)),
                              uq_y=np.zeros((plant.m2, p2)))


def lqt_controller(plant: PlantModel, L, design: LqtDesign | None = None) -> LqtController:
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if not is_stable(plant.A + L @ plant.C2):
        raise ValueError("A + L C2 is not stable")
    if design is None:
        design = lqt_synthesize(plant)
    return LqtController(plant=plant, design=design, L=L)


# ---------------------------------------------------------------------------
# disturbance-observer-based compensation
# ---------------------------------------------------------------------------

def dobc_compensation_gain(plant: PlantModel, F) -> np.ndarray:
    """Static gain cancelling the DC effect of the disturbance estimate.

    ``F_w = -[C2 (A + B2 F)^-1 B2]^-1 C2 (A + B2 F)^-1 B1``; requires the
    nominal loop to have no transmission zero at the origin from u to y.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    Acl = plant.A + plant.B2 @ F
    if not is_stable(Acl):
        raise ValueError("A + B2 F must be stable")
    X = la.solve(Acl, np.hstack([plant.B2, plant.B1]))
    G2 = plant.C2 @ X[:, :plant.m2]
    G1 = plant.C2 @ X[:, plant.m2:]
    if abs(la.det(G2)) < 1e-12 * max(1.0, np.linalg.norm(G2)):
        raise ValueError("C2 (A + B2 F)^-1 B2 is singular; the loop has a "
                         "transmission zero at the origin")
    return -la.solve(G2, G1)


@dataclass(frozen=True)
class DobcDesign:
    """Joint state/disturbance estimation plus compensation and tracking.

    The estimator runs an assumed marginal disturbance model
    ``xi' = A_w xi``, ``w_hat = C_w xi`` alongside the plant model; the
    control law adds ``F_w w_hat`` to the optimal tracking law.
    """

    plant: PlantModel
    A_w: np.ndarray
    C_w: np.ndarray
    L_x: np.ndarray
    L_w: np.ndarray
    F: np.ndarray
    F_w: np.ndarray
    lqt: LqtDesign

    @property
    def error_matrix(self) -> np.ndarray:
        p = self.plant
        return np.block([
            [p.A + self.L_x @ p.C2, p.B1 @ self.C_w + self.L_x @ p.D21 @ self.C_w],
            [self.L_w @ p.C2, self.A_w + self.L_w @ p.D21 @ self.C_w],
        ])

    def error_eigenvalues(self) -> np.ndarray:
        return sorted_eigenvalues(self.error_matrix)

    def loop_controller(self) -> LoopController:
        p, d = self.plant, self.lqt
        A, B1, B2, C2, D21 = p.A, p.B1, p.B2, p.C2, p.D21
        n = p.n
        nw = self.A_w.shape[0]
        FwCw = self.F_w @ self.C_w
        AK = np.block([
            [A + B2 @ self.F + self.L_x @ C2,
             B1 @ self.C_w + B2 @ FwCw + self.L_x @ D21 @ self.C_w],
            [self.L_w @ C2, self.A_w + self.L_w @ D21 @ self.C_w],
        ])
        By = np.vstack([-self.L_x, -self.L_w])
        Br = np.vstack([B2 @ d.r_input_gain, np.zeros((nw, p.p2))])
        Cu = np.hstack([self.F, FwCw])
        drive = AnticausalDrive(
            M=d.closed_loop_A, S=d.S_ff, u_gain=d.b_input_gain,
            state_gain=np.vstack([B2 @ d.b_input_gain, np.zeros((nw, n))]))
        f_state = np.hstack([C2, D21 @ self.C_w])
        return LoopController(A=AK, By=By, Br=Br, Cu=Cu,
                              Dy=np.zeros((p.m2, p.p2)),
                              Dr=d.r_input_gain, drive=drive,
                              f_state=f_state, f_y=-np.eye(p.p2),
                              uq_state=np.zeros((p.m2, n + nw)),
                              uq_y=np.zeros((p.m2, p.p2)))


def dobc_synthesize(plant: PlantModel, A_w, C_w, L_x, L_w,
                    lqt: LqtDesign | None = None) -> DobcDesign:
    """Assemble the joint estimator and verify its error dynamics."""
    A_w = np.atleast_2d(np.asarray(A_w, dtype=float))
    C_w = np.atleast_2d(np.asarray(C_w, dtype=float))
    L_x = np.atleast_2d(np.asarray(L_x, dtype=float))
    L_w = np.atleast_2d(np.asarray(L_w, dtype=float))
    if lqt is None:
        lqt = lqt_synthesize(plant)
    F_w = dobc_compensation_gain(plant, lqt.F)
    design = DobcDesign(plant=plant, A_w=A_w, C_w=C_w, L_x=L_x, L_w=L_w,
                        F=lqt.F, F_w=F_w, lqt=lqt)
    E = design.error_matrix
    if not is_stable(E):
        raise ValueError(
            f"joint estimation error matrix is unstable (abscissa "
            f"{spectral_abscissa(E):.3g}); choose different gains")
    return design


# ---------------------------------------------------------------------------
# robust tracking around the central design
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HinfTrackingDesign:
    """Central output feedback plus a reconstructed tracking feedforward.

    The feedforward mirrors the optimal-tracking one with the robust
    Riccati solution in place of the tracking one, and its bounded
    dynamics run on the worst-case closed-loop matrix
    ``A + g^-2 B1 B1' P1 + B2 C_inf``.  The combination under-specifies
    any single published scheme; treat its cost figures as indicative.
    """

    plant: PlantModel
    hinf: HinfDesign
    S_ff: np.ndarray
    ff_matrix: np.ndarray     # worst-case closed loop, stable
    b_input_gain: np.ndarray  # -R1^-1 B2'
    r_input_gain: np.ndarray  # -R1^-1 D12' C1

    def loop_controller(self) -> LoopController:
        p, h = self.plant, self.hinf
        B2 = p.B2
        n = p.n
        drive = AnticausalDrive(M=self.ff_matrix, S=self.S_ff,
                                u_gain=self.b_input_gain,
                                state_gain=B2 @ self.b_input_gain)
        return LoopController(A=h.A_inf, By=h.B_inf,
                              Br=B2 @ self.r_input_gain, Cu=h.C_inf,
                              Dy=np.zeros((p.m2, p.p2)),
                              Dr=self.r_input_gain, drive=drive,
                              f_state=None, f_y=None,
                              uq_state=None, uq_y=None)


def hinf_tracking_synthesize(plant: PlantModel, gamma: float) -> HinfTrackingDesign:
    """Robust tracking controller at a given attenuation level."""
    h = hinf_central(plant, gamma)
    R1 = plant.R1
    S1 = plant.C2.T @ (plant.C1.T @ plant.D12)
    S_ff = plant.C2.T @ plant.C1.T @ plant.C1 \
        - (h.P1 @ plant.B2 + S1) @ la.solve(R1, plant.D12.T @ plant.C1)
    ff_matrix = plant.A + gamma**-2 * (plant.B1 @ plant.B1.T) @ h.P1 \
        + plant.B2 @ h.C_inf
    if not is_stable(ff_matrix):
        raise ValueError("worst-case closed-loop matrix is unstable; the "
                         "Riccati solution is not stabilizing")
    return HinfTrackingDesign(
        plant=plant, hinf=h, S_ff=S_ff, ff_matrix=ff_matrix,
        b_input_gain=-la.solve(R1, plant.B2.T),
        r_input_gain=-la.solve(R1, plant.D12.T @ plant.C1))
