"""Value types and primitive computations for continuous-time LTI systems.

Everything here is a plain function over immutable containers: stability
tests, PBH rank tests, invariant zeros, frequency response, feedback
interconnection and exact zero-order-hold discretization.  All heavier
machinery (Riccati synthesis, closed-loop analysis, simulation) builds on
this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

__all__ = [
    "StateSpaceModel",
    "PlantModel",
    "ControllerRealization",
    "FrequencyGrid",
    "StabilizabilityReport",
    "AssumptionReport",
    "STABILITY_TOL",
    "spectral_abscissa",
    "is_stable",
    "sorted_eigenvalues",
    "check_stabilizable_detectable",
    "invariant_zeros",
    "check_standard_assumptions",
    "frequency_response",
    "interconnect_feedback",
    "exact_discretize",
    "series",
    "parallel",
    "similarity_transform",
]

# A matrix counts as stable only if its spectral abscissa clears this margin;
# guards eigenvalues that are numerically zero.
STABILITY_TOL = -1e-9

# Invariant zeros closer to the imaginary axis than this are treated as on it.
ON_AXIS_TOL = 1e-8


def _as_matrix(M, rows=None, cols=None, name="matrix"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    if rows is not None and M.shape[0] != rows:
        raise ValueError(f"{name} has {M.shape[0]} rows, expected {rows}")
    if cols is not None and M.shape[1] != cols:
        raise ValueError(f"{name} has {M.shape[1]} columns, expected {cols}")
    return M


@dataclass(frozen=True)
class StateSpaceModel:
    """State-space quadruple ``(A, B, C, D)`` of a proper rational system.

    Interpreted as ``x' = Ax + Bu``, ``y = Cx + Du``.  Instances are
    immutable values; operations on them are pure functions.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError("A must be square")
        B = _as_matrix(self.B, name="B")
        C = _as_matrix(self.C, name="C")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        m = B.shape[1]
        p = C.shape[0]
        D = _as_matrix(self.D, rows=p, cols=m, name="D")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @staticmethod
    def static(D) -> "StateSpaceModel":
        D = np.atleast_2d(np.asarray(D, dtype=float))
        p, m = D.shape
        return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D)


@dataclass(frozen=True)
class PlantModel:
    """Generalized plant with disturbance input w and control input u.

        x' = A x + B1 w + B2 u
        z  = C1 (C2 x - r) + D12 u
        y  = C2 x + D21 w

    ``C1`` weights the tracking error ``C2 x - r``; ``R1 = D12'D12`` and
    ``R2 = D21 D21'`` must be positive definite for the synthesis routines.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D12: np.ndarray
    D21: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, name="A")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError("A must be square")
        B1 = _as_matrix(self.B1, rows=n, name="B1")
        B2 = _as_matrix(self.B2, rows=n, name="B2")
        C2 = _as_matrix(self.C2, cols=n, name="C2")
        p2 = C2.shape[0]
        C1 = _as_matrix(self.C1, cols=p2, name="C1")
        p1 = C1.shape[0]
        D12 = _as_matrix(self.D12, rows=p1, cols=B2.shape[1], name="D12")
        D21 = _as_matrix(self.D21, rows=p2, cols=B1.shape[1], name="D21")
        for nm, M in (("A", A), ("B1", B1), ("B2", B2), ("C1", C1),
                      ("C2", C2), ("D12", D12), ("D21", D21)):
            object.__setattr__(self, nm, M)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m1(self) -> int:
        return self.B1.shape[1]

    @property
    def m2(self) -> int:
        return self.B2.shape[1]

    @property
    def p1(self) -> int:
        return self.C1.shape[0]

    @property
    def p2(self) -> int:
        return self.C2.shape[0]

    @property
    def R1(self) -> np.ndarray:
        return self.D12.T @ self.D12

    @property
    def R2(self) -> np.ndarray:
        return self.D21 @ self.D21.T

    @property
    def error_weight(self) -> np.ndarray:
        """Performance map on the state, ``C1 C2``."""
        return self.C1 @ self.C2

    def measurement_system(self) -> StateSpaceModel:
        """The u -> y channel ``(A, B2, C2, 0)`` seen by any controller."""
        return StateSpaceModel(self.A, self.B2, self.C2,
                               np.zeros((self.p2, self.m2)))


@dataclass(frozen=True)
class ControllerRealization:
    """Dynamic output-feedback controller ``x' = Ax + By``, ``u = Cx + Dy``.

    ``output_injection`` optionally carries a gain ``Lc`` making
    ``A + Lc C`` stable; the fusion construction needs one for the
    nominal controller.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    output_injection: np.ndarray | None = None

    def __post_init__(self):
        sys = StateSpaceModel(self.A, self.B, self.C, self.D)
        object.__setattr__(self, "A", sys.A)
        object.__setattr__(self, "B", sys.B)
        object.__setattr__(self, "C", sys.C)
        object.__setattr__(self, "D", sys.D)
        if self.output_injection is not None:
            Lc = _as_matrix(self.output_injection, rows=sys.n, cols=sys.p,
                            name="output_injection")
            object.__setattr__(self, "output_injection", Lc)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def system(self) -> StateSpaceModel:
        return StateSpaceModel(self.A, self.B, self.C, self.D)

    @staticmethod
    def static(D, ny=None) -> "ControllerRealization":
        D = np.atleast_2d(np.asarray(D, dtype=float))
        p, m = D.shape
        if ny is not None and m != ny:
            raise ValueError("static gain has wrong input dimension")
        return ControllerRealization(np.zeros((0, 0)), np.zeros((0, m)),
                                     np.zeros((p, 0)), D)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing list of angular frequencies in rad/s."""

    omegas: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omegas, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("empty frequency grid")
        if not np.all(np.isfinite(w)):
            raise ValueError("non-finite frequency")
        if np.any(w < 0):
            raise ValueError("negative frequency")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "omegas", w)

    def __iter__(self):
        return iter(self.omegas)

    def __len__(self):
        return len(self.omegas)

    @staticmethod
    def log_spaced(w_min: float, w_max: float, count: int) -> "FrequencyGrid":
        return FrequencyGrid(np.logspace(np.log10(w_min), np.log10(w_max), count))


def spectral_abscissa(M) -> float:
    """Largest real part over the eigenvalues of a square matrix."""
    M = _as_matrix(M, name="M")
    if M.shape[0] != M.shape[1]:
        raise ValueError("spectral_abscissa needs a square matrix")
    if M.shape[0] == 0:
        return -np.inf
    return float(np.max(np.linalg.eigvals(M).real))


def is_stable(M) -> bool:
    """Hurwitz test with the numerical margin ``STABILITY_TOL``."""
    return spectral_abscissa(M) < STABILITY_TOL


def sorted_eigenvalues(M) -> np.ndarray:
    """Eigenvalues ordered deterministically by (real part, imaginary part)."""
    ev = np.linalg.eigvals(_as_matrix(M, name="M"))
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


@dataclass(frozen=True)
class StabilizabilityReport:
    stabilizable: bool
    detectable: bool


def _pbh_full_rank(A, B, lam, tol_scale):
    n = A.shape[0]
    M = np.hstack([A - lam * np.eye(n), B])
    s = np.linalg.svd(M, compute_uv=False)
    return s[n - 1] > tol_scale * max(1.0, s[0]) * 1e-9


def check_stabilizable_detectable(plant: PlantModel) -> StabilizabilityReport:
    """PBH rank tests on every closed-right-half-plane eigenvalue of A."""
    A, B2, C2 = plant.A, plant.B2, plant.C2
    n = A.shape[0]
    ev = np.linalg.eigvals(A)
    stab = True
    det = True
    for lam in ev:
        if lam.real < STABILITY_TOL:
            continue
        if not _pbh_full_rank(A, B2, lam, n):
            stab = False
        if not _pbh_full_rank(A.T, C2.T, np.conj(lam), n):
            det = False
    return StabilizabilityReport(stabilizable=stab, detectable=det)


def invariant_zeros(A, B, C, D) -> np.ndarray:
    """Finite invariant zeros of ``(A, B, C, D)`` via the system pencil.

    The pencil ``[[A - sI, B], [C, D]]`` is compressed to a square one with
    a fixed orthonormal matrix when it is not square; candidates from the
    generalized eigenvalue problem are then confirmed by an SVD rank test
    against the pencil's normal rank, which discards spurious values.
    """
    A = _as_matrix(A, name="A")
    B = _as_matrix(B, name="B")
    C = _as_matrix(C, name="C")
    D = _as_matrix(D, name="D")
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    M = np.block([[A, B], [C, D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)

    rows, cols = M.shape
    if rows == cols:
        Msq, Nsq = M, N
    elif rows > cols:
        # deterministic orthonormal compression (seeded, reproducible)
        W = _compression(rows, cols)
        Msq, Nsq = W.T @ M, W.T @ N
    else:
        W = _compression(cols, rows)
        Msq, Nsq = M @ W, N @ W

    alpha, beta = la.eig(Msq, Nsq, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-10 * np.maximum(1.0, np.abs(alpha))
    cand = alpha[finite] / beta[finite]

    # normal rank from two generic probe points
    probes = [0.731 + 1.193j, -1.377 + 0.521j]
    normal_rank = max(_pencil_rank(A, B, C, D, s) for s in probes)
    zeros = [s for s in cand
             if _pencil_rank(A, B, C, D, s) < normal_rank]
    z = np.array(zeros, dtype=complex)
    order = np.lexsort((z.imag, z.real)) if z.size else []
    return z[order] if z.size else z


def _pencil_rank(A, B, C, D, s):
    n = A.shape[0]
    M = np.block([[A - s * np.eye(n), B], [C, D]])
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0:
        return 0
    tol = max(M.shape) * np.finfo(float).eps * max(sv[0], 1.0)
    # a relative gap well above machine noise counts as a rank drop
    return int(np.sum(sv > max(tol, 1e-7 * max(sv[0], 1.0))))


def _compression(rows, cols):
    rng = np.random.RandomState(20240611)
    Q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q


@dataclass(frozen=True)
class AssumptionReport:
    """Per-item outcome of the standard synthesis assumptions.

    ``disturbance_zeros_ok``: no invariant zero of (A, B1, C2, D21) on the
    imaginary axis.  ``control_zeros_ok``: same for (A, B2, C1C2, D12).
    ``weights_ok``: R1 > 0 and R2 > 0.
    """

    disturbance_zeros_ok: bool
    control_zeros_ok: bool
    weights_ok: bool
    disturbance_zeros: np.ndarray = field(default_factory=lambda: np.array([]))
    control_zeros: np.ndarray = field(default_factory=lambda: np.array([]))

    @property
    def all_ok(self) -> bool:
        return self.disturbance_zeros_ok and self.control_zeros_ok and self.weights_ok


def check_standard_assumptions(plant: PlantModel) -> AssumptionReport:
    """Verify the regularity assumptions needed by the Riccati designs."""
    zd = invariant_zeros(plant.A, plant.B1, plant.C2, plant.D21)
    zc = invariant_zeros(plant.A, plant.B2, plant.error_weight, plant.D12)
    d_ok = not np.any(np.abs(zd.real) < ON_AXIS_TOL) if zd.size else True
    c_ok = not np.any(np.abs(zc.real) < ON_AXIS_TOL) if zc.size else True
    w_ok = True
    for R in (plant.R1, plant.R2):
        if R.size == 0 or np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0:
            w_ok = False
    return AssumptionReport(disturbance_zeros_ok=d_ok, control_zeros_ok=c_ok,
                            weights_ok=w_ok, disturbance_zeros=zd,
                            control_zeros=zc)


def frequency_response(sys: StateSpaceModel, omega: float) -> np.ndarray:
    """Exact complex response ``C (jwI - A)^-1 B + D`` at a single frequency."""
    n = sys.n
    if n == 0:
        return sys.D.astype(complex)
    M = 1j * omega * np.eye(n) - sys.A
    try:
        X = np.linalg.solve(M, sys.B)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"pole on the imaginary axis at omega={omega}") from exc
    return sys.C @ X + sys.D


def interconnect_feedback(G: StateSpaceModel, K: StateSpaceModel,
                          sign: int = -1) -> StateSpaceModel:
    """Close the loop ``u_G = u_ext + sign * K(y_G)`` around ``G``.

    Inputs of the result are the external input u_ext, outputs are y_G.
    Raises on an algebraic loop (singular ``I - sign * D_G D_K``).
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    s = float(sign)
    Dg, Dk = G.D, K.D
    E = np.eye(G.p) - s * Dg @ Dk
    if abs(np.linalg.det(E)) < 1e-12:
        raise ValueError("algebraic loop: I - sign*Dg*Dk is singular")
    Einv = np.linalg.inv(E)
    # y = Einv (Cg x + s Dg Ck xk + Dg u)
    Cy = np.hstack([Einv @ G.C, s * Einv @ Dg @ K.C])
    Dy = Einv @ Dg
    A = np.block([
        [G.A + s * G.B @ Dk @ Cy[:, :G.n], s * G.B @ (K.C + Dk @ Cy[:, G.n:])],
        [K.B @ Cy[:, :G.n], K.A + K.B @ Cy[:, G.n:]],
    ])
    B = np.vstack([G.B + s * G.B @ Dk @ Dy, K.B @ Dy])
    return StateSpaceModel(A, B, Cy, Dy)


def exact_discretize(sys_or_A, B=None, h: float = None):
    """Zero-order-hold discrete propagator via the augmented exponential.

    Returns ``(Ad, Bd)`` with ``Ad = exp(Ah)`` and
    ``Bd = int_0^h exp(A tau) dtau B``.
    """
    if isinstance(sys_or_A, StateSpaceModel):
        A, B = sys_or_A.A, sys_or_A.B
    else:
        A = _as_matrix(sys_or_A, name="A")
        B = _as_matrix(B, rows=A.shape[0], name="B")
    if h is None or h <= 0:
        raise ValueError("step h must be positive")
    n, m = A.shape[0], B.shape[1]
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = la.expm(aug * h)
    return E[:n, :n], E[:n, n:]


def series(G2: StateSpaceModel, G1: StateSpaceModel) -> StateSpaceModel:
    """Cascade ``y = G2(G1(u))``."""
    if G1.p != G2.m:
        raise ValueError("dimension mismatch in series connection")
    A = np.block([
        [G1.A, np.zeros((G1.n, G2.n))],
        [G2.B @ G1.C, G2.A],
    ])
    B = np.vstack([G1.B, G2.B @ G1.D])
    C = np.hstack([G2.D @ G1.C, G2.C])
    D = G2.D @ G1.D
    return StateSpaceModel(A, B, C, D)


def parallel(G1: StateSpaceModel, G2: StateSpaceModel) -> StateSpaceModel:
    """Signal sum ``y = G1(u) + G2(u)``."""
    if G1.m != G2.m or G1.p != G2.p:
        raise ValueError("dimension mismatch in parallel connection")
    A = la.block_diag(G1.A, G2.A)
    B = np.vstack([G1.B, G2.B])
    C = np.hstack([G1.C, G2.C])
    return StateSpaceModel(A, B, C, G1.D + G2.D)


def similarity_transform(sys: StateSpaceModel, T) -> StateSpaceModel:
    """Change of state coordinates ``x = T xi``."""
    T = _as_matrix(T, rows=sys.n, cols=sys.n, name="T")
    Tinv = np.linalg.inv(T)
    return StateSpaceModel(Tinv @ sys.A @ T, Tinv @ sys.B, sys.C @ T, sys.D)
