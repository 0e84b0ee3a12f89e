"""Residual-driven fusion of two independently designed controllers.

Given a nominal controller C and a robust controller K that each
stabilize the same plant, a stable operator Q acting on the observer
residual ``f = C2 xhat - y`` is constructed so that the composite
controller ``u = u_c + Q(f)`` reproduces K exactly as a transfer function
while keeping C's loop when the residual is quiet.  Three constructions
are provided: the general one (dynamic C with an output-injection gain),
the shared-observer one (observer-based state-feedback C), and the static
one.  A scalar gain factor on the Q output interpolates between the two
designs and keeps the loop internally stable for every real value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .lti import (ControllerRealization, PlantModel, StateSpaceModel,
                  frequency_response, is_stable, spectral_abscissa)
from .riccati import LqtDesign
from .sim import AnticausalDrive, LoopController

__all__ = [
    "QRealization",
    "CoprimeFactors",
    "CompositeController",
    "left_coprime_factors",
    "build_q_general",
    "build_q_shared",
    "build_q_static",
    "assemble_composite",
    "verify_transfer_equality",
    "minimal_realization",
    "closed_loop_matrix",
]

MINREAL_TOL = 1e-9


@dataclass(frozen=True)
class QRealization:
    """Stable operator driven by the observer residual.

    ``xq' = Aq xq + Bq f``, ``uq = alpha (Cq xq + Dq f)``.  The gain
    factor scales the output maps only, never ``Bq``.
    """

    Aq: np.ndarray
    Bq: np.ndarray
    Cq: np.ndarray
    Dq: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        sys = StateSpaceModel(self.Aq, self.Bq, self.Cq, self.Dq)
        if sys.n and not is_stable(sys.A):
            raise ValueError(
                f"Aq must be stable (spectral abscissa "
                f"{spectral_abscissa(sys.A):.3g})")
        object.__setattr__(self, "Aq", sys.A)
        object.__setattr__(self, "Bq", sys.B)
        object.__setattr__(self, "Cq", sys.C)
        object.__setattr__(self, "Dq", sys.D)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n(self) -> int:
        return self.Aq.shape[0]

    @property
    def residual_dim(self) -> int:
        return self.Bq.shape[1]

    @property
    def control_dim(self) -> int:
        return self.Cq.shape[0]

    def with_alpha(self, alpha: float) -> "QRealization":
        return QRealization(self.Aq, self.Bq, self.Cq, self.Dq, float(alpha))

    def scaled_output(self):
        """(alpha*Cq, alpha*Dq), the effective output maps."""
        return self.alpha * self.Cq, self.alpha * self.Dq

    def system(self) -> StateSpaceModel:
        Cs, Ds = self.scaled_output()
        return StateSpaceModel(self.Aq, self.Bq, Cs, Ds)


@dataclass(frozen=True)
class CoprimeFactors:
    """Joint realization of the stable left factors of the plant.

    ``[N M](s) = C2 (sI - A - L C2)^-1 [B2, L] + [0, I]`` and the observer
    residual satisfies ``f = N u - M y``.
    """

    A: np.ndarray        # A + L C2
    B_u: np.ndarray      # B2
    B_y: np.ndarray      # L
    C: np.ndarray        # C2

    def __post_init__(self):
        if not is_stable(self.A):
            raise ValueError("A + L C2 must be stable for coprime factors")

    def n_factor(self) -> StateSpaceModel:
        p, m = self.C.shape[0], self.B_u.shape[1]
        return StateSpaceModel(self.A, self.B_u, self.C, np.zeros((p, m)))

    def m_factor(self) -> StateSpaceModel:
        p = self.C.shape[0]
        return StateSpaceModel(self.A, self.B_y, self.C, np.eye(p))

    def residual_system(self) -> StateSpaceModel:
        """Map ``[u; y] -> f = N u - M y`` as one realization."""
        p = self.C.shape[0]
        m = self.B_u.shape[1]
        B = np.hstack([self.B_u, -self.B_y])
        D = np.hstack([np.zeros((p, m)), -np.eye(p)])
        return StateSpaceModel(self.A, B, self.C, D)


def left_coprime_factors(plant: PlantModel, L) -> CoprimeFactors:
    L = np.atleast_2d(np.asarray(L, dtype=float))
    A_obs = plant.A + L @ plant.C2
    if not is_stable(A_obs):
        raise ValueError("A + L C2 is not stable")
    return CoprimeFactors(A=A_obs, B_u=plant.B2, B_y=L, C=plant.C2)


def closed_loop_matrix(plant: PlantModel, ctrl: ControllerRealization) -> np.ndarray:
    """State matrix of the plant in positive feedback with ``u = ctrl(y)``."""
    A, B2, C2 = plant.A, plant.B2, plant.C2
    return np.block([
        [A + B2 @ ctrl.D @ C2, B2 @ ctrl.C],
        [ctrl.B @ C2, ctrl.A],
    ])


def _require_stabilizing(plant, ctrl, name):
    Acl = closed_loop_matrix(plant, ctrl)
    if not is_stable(Acl):
        raise ValueError(f"controller {name} does not stabilize the plant "
                         f"(closed-loop abscissa {spectral_abscissa(Acl):.3g})")


def build_q_general(plant: PlantModel, C: ControllerRealization,
                    K: ControllerRealization, L, Lc=None) -> QRealization:
    """Fusion operator for two arbitrary dynamic stabilizing controllers.

    ``Lc`` (or ``C.output_injection``) must make ``Ac + Lc Cc`` stable.
    The block upper-triangular ``Aq`` stacks a copy of C's injected
    dynamics over the (plant, K) closed loop.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if Lc is None:
        Lc = C.output_injection
    if Lc is None:
        raise ValueError("general construction needs an output-injection "
                         "gain Lc for the nominal controller")
    Lc = np.atleast_2d(np.asarray(Lc, dtype=float))
    if not is_stable(plant.A + L @ plant.C2):
        raise ValueError("A + L C2 is not stable")
    if C.n and not is_stable(C.A + Lc @ C.C):
        raise ValueError("Ac + Lc Cc is not stable")
    _require_stabilizing(plant, C, "C")
    _require_stabilizing(plant, K, "K")

    A, B2, C2 = plant.A, plant.B2, plant.C2
    Ac, Bc, Cc, Dc = C.A, C.B, C.C, C.D
    Ak, Bk, Ck, Dk = K.A, K.B, K.C, K.D
    Dq = Dc - Dk
    nc, n, nk = C.n, plant.n, K.n

    Aq = np.block([
        [Ac + Lc @ Cc, (Bc + Lc @ Dq) @ C2, -Lc @ Ck],
        [np.zeros((n, nc)), A + B2 @ Dk @ C2, B2 @ Ck],
        [np.zeros((nk, nc)), Bk @ C2, Ak],
    ])
    Bq = np.vstack([-Bc - Lc @ Dq, L - B2 @ Dk, -Bk])
    Cq = np.hstack([-Cc, -Dq @ C2, Ck])
    return QRealization(Aq, Bq, Cq, Dq)


def build_q_shared(plant: PlantModel, F, K: ControllerRealization,
                   L) -> QRealization:
    """Fusion operator when the nominal controller shares the observer.

    The nominal controller is observer-based state feedback ``u_c = F xhat``
    with the same gain ``L``; only the (plant, K) loop remains inside Q.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if not is_stable(plant.A + plant.B2 @ F):
        raise ValueError("A + B2 F is not stable")
    if not is_stable(plant.A + L @ plant.C2):
        raise ValueError("A + L C2 is not stable")
    _require_stabilizing(plant, K, "K")

    A, B2, C2 = plant.A, plant.B2, plant.C2
    Ak, Bk, Ck, Dk = K.A, K.B, K.C, K.D
    n, nk = plant.n, K.n
    Aq = np.block([
        [A + B2 @ Dk @ C2, B2 @ Ck],
        [Bk @ C2, Ak],
    ])
    Bq = np.vstack([L - B2 @ Dk, -Bk])
    Cq = np.hstack([Dk @ C2 - F, Ck])
    return QRealization(Aq, Bq, Cq, -Dk)


def build_q_static(plant: PlantModel, Dc, K: ControllerRealization,
                   L) -> QRealization:
    """Fusion operator for a static nominal controller ``u_c = Dc y``.

    For a static K the two-block form degenerates to a single observer-sized
    block ``Aq = A + B2 Dk C2``.
    """
    Dc = np.atleast_2d(np.asarray(Dc, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if not is_stable(plant.A + plant.B2 @ Dc @ plant.C2):
        raise ValueError("A + B2 Dc C2 is not stable")
    if not is_stable(plant.A + L @ plant.C2):
        raise ValueError("A + L C2 is not stable")
    _require_stabilizing(plant, K, "K")

    A, B2, C2 = plant.A, plant.B2, plant.C2
    Ak, Bk, Ck, Dk = K.A, K.B, K.C, K.D
    n, nk = plant.n, K.n
    Aq = np.block([
        [A + B2 @ Dk @ C2, B2 @ Ck],
        [Bk @ C2, Ak],
    ])
    Bq = np.vstack([L - B2 @ Dk, -Bk])
    Cq = np.hstack([(Dk - Dc) @ C2, Ck])
    return QRealization(Aq, Bq, Cq, Dc - Dk)


# ---------------------------------------------------------------------------
# Composite controller
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CompositeController:
    """Two-controller composite ``u = u_c + uq`` with inputs ``(y, r)``.

    Modes:
      * ``general``: dynamic nominal block driven by ``y - r`` (tracking)
        or ``y``, rewired as ``xc' = Ac xc + Bc(y-r) - Lc uq``;
      * ``shared``: observer-based state feedback sharing the residual
        observer, optionally with a reference prefilter (tracking) or an
        optimal-tracking feedforward;
      * ``static``: ``u_c = Dc (y - r)``.
    """

    mode: str
    plant: PlantModel
    L: np.ndarray
    Q: QRealization
    tracking: bool
    C_block: ControllerRealization | None = None   # general
    F: np.ndarray | None = None                    # shared
    Dc: np.ndarray | None = None                   # static
    feedforward: LqtDesign | None = None           # shared, Eq-style 2DoF law

    @property
    def alpha(self) -> float:
        return self.Q.alpha

    def with_alpha(self, alpha: float) -> "CompositeController":
        return CompositeController(
            mode=self.mode, plant=self.plant, L=self.L,
            Q=self.Q.with_alpha(alpha), tracking=self.tracking,
            C_block=self.C_block, F=self.F, Dc=self.Dc,
            feedforward=self.feedforward)

    # -- nominal controller in the general block form -------------------

    def c_general_form(self) -> ControllerRealization:
        """The nominal controller as ``(Ac, Bc, Cc, Dc)`` with gain Lc."""
        plant = self.plant
        if self.mode == "general":
            return self.C_block
        if self.mode == "shared":
            Ac = plant.A + plant.B2 @ self.F + self.L @ plant.C2
            return ControllerRealization(Ac, -self.L, self.F,
                                         np.zeros((plant.m2, plant.p2)),
                                         output_injection=-plant.B2)
        # static
        m2, p2 = plant.m2, plant.p2
        return ControllerRealization(np.zeros((0, 0)), np.zeros((0, p2)),
                                     np.zeros((m2, 0)), self.Dc,
                                     output_injection=np.zeros((0, m2)))

    # -- state block layout ---------------------------------------------

    def state_blocks(self) -> dict:
        """Slices of the controller state vector, by block name."""
        blocks = {}
        i = 0
        if self.mode == "general":
            nc = self.C_block.n
            blocks["c"] = slice(i, i + nc)
            i += nc
        if self.mode in ("shared", "static"):
            n = self.plant.n
            blocks["observer"] = slice(i, i + n)
            i += n
            if self.mode == "shared" and self.tracking and self.feedforward is None:
                blocks["prefilter"] = slice(i, i + n)
                i += n
        if self.mode == "general":
            n = self.plant.n
            blocks["observer"] = slice(i, i + n)
            i += n
        blocks["q"] = slice(i, i + self.Q.n)
        return blocks

    # -- simulation / transfer form ---------------------------------------

    def loop_controller(self) -> LoopController:
        """Assemble the ``(y, r) -> u`` realization used by the simulator."""
        plant = self.plant
        A, B2, C2 = plant.A, plant.B2, plant.C2
        n, m2, p2 = plant.n, plant.m2, plant.p2
        L = self.L
        Aq, Bq = self.Q.Aq, self.Q.Bq
        Cqs, Dqs = self.Q.scaled_output()
        nq = self.Q.n
        tr = 1.0 if self.tracking else 0.0

        if self.mode == "general":
            Cb = self.C_block
            Ac, Bc, Cc, Dc = Cb.A, Cb.B, Cb.C, Cb.D
            Lc = Cb.output_injection
            if Lc is None:
                raise ValueError("general mode needs the output-injection gain")
            nc = Cb.n
            nk = nc + n + nq
            AK = np.zeros((nk, nk))
            ic, ih, iq = slice(0, nc), slice(nc, nc + n), slice(nc + n, nk)
            AK[ic, ic] = Ac
            AK[ic, ih] = -Lc @ Dqs @ C2
            AK[ic, iq] = -Lc @ Cqs
            AK[ih, ic] = B2 @ Cc
            AK[ih, ih] = A + L @ C2 + B2 @ Dqs @ C2
            AK[ih, iq] = B2 @ Cqs
            AK[iq, ih] = Bq @ C2
            AK[iq, iq] = Aq
            By = np.vstack([Bc + Lc @ Dqs,
                            B2 @ (Dc - Dqs) - L,
                            -Bq])
            Br = np.vstack([-tr * Bc, -tr * B2 @ Dc, np.zeros((nq, p2))])
            Cu = np.hstack([Cc, Dqs @ C2, Cqs])
            Dy = Dc - Dqs
            Dr = -tr * Dc
            f_state = np.hstack([np.zeros((p2, nc)), C2, np.zeros((p2, nq))])
            uq_state = np.hstack([np.zeros((m2, nc)), Dqs @ C2, Cqs])
            return LoopController(A=AK, By=By, Br=Br, Cu=Cu, Dy=Dy, Dr=Dr,
                                  drive=None, f_state=f_state,
                                  f_y=-np.eye(p2), uq_state=uq_state,
                                  uq_y=-Dqs)

        if self.mode == "shared":
            F = self.F
            use_prefilter = self.tracking and self.feedforward is None
            nr = n if use_prefilter else 0
            nk = n + nr + nq
            AK = np.zeros((nk, nk))
            ih = slice(0, n)
            ir = slice(n, n + nr)
            iq = slice(n + nr, nk)
            U_h = F + Dqs @ C2
            AK[ih, ih] = A + L @ C2 + B2 @ U_h
            AK[ih, iq] = B2 @ Cqs
            AK[iq, ih] = Bq @ C2
            AK[iq, iq] = Aq
            By = np.zeros((nk, p2))
            By[ih] = -L - B2 @ Dqs
            By[iq] = -Bq
            Br = np.zeros((nk, p2))
            Cu = np.zeros((m2, nk))
            Cu[:, ih] = U_h
            Cu[:, iq] = Cqs
            Dy = -Dqs
            Dr = np.zeros((m2, p2))
            drive = None
            if use_prefilter:
                AK[ir, ir] = A + L @ C2
                AK[ih, ir] = B2 @ F
                Cu[:, ir] = F
                Br[ir] = L
            elif self.feedforward is not None and self.tracking:
                ff = self.feedforward
                Dr = ff.r_input_gain                       # -R1^-1 D12'C1
                Br[ih] = B2 @ Dr
                drive = AnticausalDrive(
                    M=ff.closed_loop_A, S=ff.S_ff,
                    u_gain=ff.b_input_gain,                # -R1^-1 B2'
                    state_gain=np.vstack([B2 @ ff.b_input_gain,
                                          np.zeros((nq, n))]),
                )
            f_state = np.zeros((p2, nk))
            f_state[:, ih] = C2
            uq_state = np.zeros((m2, nk))
            uq_state[:, ih] = Dqs @ C2
            uq_state[:, iq] = Cqs
            return LoopController(A=AK, By=By, Br=Br, Cu=Cu, Dy=Dy, Dr=Dr,
                                  drive=drive, f_state=f_state,
                                  f_y=-np.eye(p2), uq_state=uq_state,
                                  uq_y=-Dqs)

        if self.mode == "static":
            Dc = self.Dc
            nk = n + nq
            ih, iq = slice(0, n), slice(n, nk)
            AK = np.zeros((nk, nk))
            AK[ih, ih] = A + L @ C2 + B2 @ Dqs @ C2
            AK[ih, iq] = B2 @ Cqs
            AK[iq, ih] = Bq @ C2
            AK[iq, iq] = Aq
            By = np.vstack([B2 @ (Dc - Dqs) - L, -Bq])
            Br = np.vstack([-tr * B2 @ Dc, np.zeros((nq, p2))])
            Cu = np.hstack([Dqs @ C2, Cqs])
            Dy = Dc - Dqs
            Dr = -tr * Dc
            f_state = np.hstack([C2, np.zeros((p2, nq))])
            uq_state = np.hstack([Dqs @ C2, Cqs])
            return LoopController(A=AK, By=By, Br=Br, Cu=Cu, Dy=Dy, Dr=Dr,
                                  drive=None, f_state=f_state,
                                  f_y=-np.eye(p2), uq_state=uq_state,
                                  uq_y=-Dqs)

        raise ValueError(f"unknown mode {self.mode!r}")

    def y_to_u_system(self) -> StateSpaceModel:
        """Transfer realization from y to u with the reference held at zero."""
        lc = self.loop_controller()
        return StateSpaceModel(lc.A, lc.By, lc.Cu, lc.Dy)


def assemble_composite(plant: PlantModel, Q: QRealization, L, *, mode: str,
                       tracking: bool = True, alpha: float | None = None,
                       C: ControllerRealization | None = None,
                       F=None, Dc=None,
                       feedforward: LqtDesign | None = None) -> CompositeController:
    """Wire a fusion operator and a nominal controller into one composite.

    ``Q`` must come from the matching ``build_q_*`` constructor.  The gain
    factor, when given, replaces the one carried by ``Q``.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape != (plant.n, plant.p2):
        raise ValueError("observer gain has wrong shape")
    if not is_stable(plant.A + L @ plant.C2):
        raise ValueError("A + L C2 is not stable")
    if Q.residual_dim != plant.p2 or Q.control_dim != plant.m2:
        raise ValueError("Q dimensions do not match the plant")
    if alpha is not None:
        Q = Q.with_alpha(alpha)

    if mode == "general":
        if C is None or C.output_injection is None:
            raise ValueError("general mode needs C with an output-injection gain")
        expected_nq = C.n + plant.n  # plus K states
        if Q.n < expected_nq:
            raise ValueError("Q was not built by the general construction")
        comp = CompositeController(mode="general", plant=plant, L=L, Q=Q,
                                   tracking=tracking, C_block=C)
    elif mode == "shared":
        if F is None:
            raise ValueError("shared mode needs the state-feedback gain F")
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if F.shape != (plant.m2, plant.n):
            raise ValueError("state-feedback gain has wrong shape")
        if feedforward is not None and not tracking:
            raise ValueError("the optimal feedforward only makes sense when tracking")
        comp = CompositeController(mode="shared", plant=plant, L=L, Q=Q,
                                   tracking=tracking, F=F,
                                   feedforward=feedforward)
    elif mode == "static":
        if Dc is None:
            raise ValueError("static mode needs the static gain Dc")
        Dc = np.atleast_2d(np.asarray(Dc, dtype=float))
        if Dc.shape != (plant.m2, plant.p2):
            raise ValueError("static gain has wrong shape")
        comp = CompositeController(mode="static", plant=plant, L=L, Q=Q,
                                   tracking=tracking, Dc=Dc)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return comp


@dataclass(frozen=True)
class TransferEqualityReport:
    max_deviation: float
    worst_omega: float
    skipped: tuple = ()


def verify_transfer_equality(composite: CompositeController,
                             K: ControllerRealization,
                             grid) -> TransferEqualityReport:
    """Maximum relative gap between the composite's y->u map and K on a grid.

    The deviation at each frequency is ``||dK|| / (1 + ||K||)`` in spectral
    norm; grid points hitting a pole are skipped and reported.
    """
    comp_sys = composite.y_to_u_system()
    K_sys = K.system()
    worst = 0.0
    worst_w = float("nan")
    skipped = []
    for w in grid:
        try:
            Hc = frequency_response(comp_sys, w)
            Hk = frequency_response(K_sys, w)
        except ValueError:
            skipped.append(float(w))
            continue
        dev = np.linalg.norm(Hc - Hk, 2) / (1.0 + np.linalg.norm(Hk, 2))
        if dev > worst:
            worst, worst_w = float(dev), float(w)
    return TransferEqualityReport(max_deviation=worst, worst_omega=worst_w,
                                  skipped=tuple(skipped))


# ---------------------------------------------------------------------------
# minimal realization (staircase truncation)
# ---------------------------------------------------------------------------

def _reachable_basis(A, B, tol):
    n = A.shape[0]
    if B.size == 0:
        return np.zeros((n, 0))
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    K = np.hstack(blocks)
    U, s, _ = np.linalg.svd(K, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, 0))
    r = int(np.sum(s > tol * s[0]))
    return U[:, :r]


def minimal_realization(sys: StateSpaceModel, tol: float = MINREAL_TOL) -> StateSpaceModel:
    """Remove unreachable and unobservable directions by staircase truncation."""
    V = _reachable_basis(sys.A, sys.B, tol)
    A1 = V.T @ sys.A @ V
    B1 = V.T @ sys.B
    C1 = sys.C @ V
    W = _reachable_basis(A1.T, C1.T, tol)
    return StateSpaceModel(W.T @ A1 @ W, W.T @ B1, C1 @ W, sys.D)
