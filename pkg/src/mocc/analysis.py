"""Closed-loop assembly, decomposition and power-seminorm analysis.

The closed loop formed by the composite controller splits, after a change
of coordinates, into two channels that depend on the robust and the
nominal controller separately: a w -> z channel carrying only K and an
r -> z channel carrying only C.  This module builds both realizations,
computes H-infinity norms by Hamiltonian bisection, evaluates power
seminorms of constant-plus-sinusoid signals in closed form, and provides
the orthogonal and dependent-disturbance performance decompositions
including the worst linear dependency of the disturbance on the
reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .lti import (ControllerRealization, PlantModel, StateSpaceModel,
                  frequency_response, is_stable, spectral_abscissa)
from .signals import SignalSpec
from .sim import LoopController
from .youla import CompositeController

__all__ = [
    "ClosedLoopSystem",
    "LemmaDecomposition",
    "PowerSpectrum",
    "assemble_closed_loop",
    "decompose_lemma1",
    "hinf_norm",
    "power_norm_signal",
    "power_norm_dependent",
    "power_norm_response",
    "theorem1_decomposition",
    "OrthogonalDecomposition",
    "worst_dependency",
    "WorstDependency",
    "theorem2_bound",
    "DependentDecomposition",
    "w_channel_model",
    "r_channel_model",
]

AXIS_POLE_TOL = 1e-9


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Tracking loop over state ``[x; x - xhat; x_c; x_q]``.

    ``x' = Abar x + B1bar w + Brbar r``, ``z = C1bar x + Dw w + Dr r``.
    ``Dw = D12 (Dc - Dq) D21`` vanishes whenever the robust controller is
    strictly proper, which covers every design produced here.
    """

    Abar: np.ndarray
    B1bar: np.ndarray
    Brbar: np.ndarray
    C1bar: np.ndarray
    Dw: np.ndarray
    Dr: np.ndarray

    def system(self) -> StateSpaceModel:
        """Joint realization with stacked input ``[w; r]``."""
        return StateSpaceModel(self.Abar, np.hstack([self.B1bar, self.Brbar]),
                               self.C1bar, np.hstack([self.Dw, self.Dr]))

    def w_channel(self) -> StateSpaceModel:
        return StateSpaceModel(self.Abar, self.B1bar, self.C1bar, self.Dw)

    def r_channel(self) -> StateSpaceModel:
        return StateSpaceModel(self.Abar, self.Brbar, self.C1bar, self.Dr)


def assemble_closed_loop(plant: PlantModel,
                         composite: CompositeController) -> ClosedLoopSystem:
    """Exact block assembly of the tracking loop with the composite.

    The nominal block of any mode is first embedded in its general form;
    the gain factor scales the fusion-operator output maps.  Raises if the
    assembled state matrix is unstable, which signals a construction bug.
    """
    C = composite.c_general_form()
    Lc = C.output_injection
    Q = composite.Q
    Cq, Dq = Q.scaled_output()
    Aq, Bq = Q.Aq, Q.Bq
    A, B1, B2 = plant.A, plant.B1, plant.B2
    C1, C2, D12, D21 = plant.C1, plant.C2, plant.D12, plant.D21
    L = composite.L
    n, nc, nq = plant.n, C.n, Q.n
    Ac, Bc, Cc, Dc = C.A, C.B, C.C, C.D

    Abar = np.block([
        [A + B2 @ Dc @ C2, -B2 @ Dq @ C2, B2 @ Cc, B2 @ Cq],
        [np.zeros((n, n)), A + L @ C2, np.zeros((n, nc)), np.zeros((n, nq))],
        [Bc @ C2, Lc @ Dq @ C2, Ac, -Lc @ Cq],
        [np.zeros((nq, n)), -Bq @ C2, np.zeros((nq, nc)), Aq],
    ])
    B1bar = np.vstack([
        B1 + B2 @ (Dc - Dq) @ D21,
        B1 + L @ D21,
        (Bc + Lc @ Dq) @ D21,
        -Bq @ D21,
    ])
    Brbar = np.vstack([
        -B2 @ Dc,
        np.zeros((n, plant.p2)),
        -Bc,
        np.zeros((nq, plant.p2)),
    ])
    C1bar = np.hstack([
        (C1 + D12 @ Dc) @ C2, -D12 @ Dq @ C2, D12 @ Cc, D12 @ Cq,
    ])
    Dw = D12 @ (Dc - Dq) @ D21
    Dr = -(C1 + D12 @ Dc)
    if not is_stable(Abar):
        raise ValueError(
            f"assembled closed loop is unstable (abscissa "
            f"{spectral_abscissa(Abar):.3g}); the composite is inconsistent")
    return ClosedLoopSystem(Abar=Abar, B1bar=B1bar, Brbar=Brbar,
                            C1bar=C1bar, Dw=Dw, Dr=Dr)


@dataclass(frozen=True)
class LemmaDecomposition:
    """The two independent channels of the tracking loop.

    ``T_z1w`` closes the plant with the robust controller only and maps
    w to z; ``T_z2r`` closes it with the nominal controller only and maps
    r to z, including the feedthrough ``-(C1 + D12 Dc)``.
    """

    T_z1w: StateSpaceModel
    T_z2r: StateSpaceModel


def decompose_lemma1(plant: PlantModel, C: ControllerRealization,
                     K: ControllerRealization) -> LemmaDecomposition:
    """Channel realizations that depend on K and C separately."""
    A, B1, B2 = plant.A, plant.B1, plant.B2
    C1, C2, D12, D21 = plant.C1, plant.C2, plant.D12, plant.D21
    Ak, Bk, Ck, Dk = K.A, K.B, K.C, K.D
    Ac, Bc, Cc, Dc = C.A, C.B, C.C, C.D

    T_z1w = StateSpaceModel(
        np.block([[A + B2 @ Dk @ C2, B2 @ Ck], [Bk @ C2, Ak]]),
        np.vstack([B1 + B2 @ Dk @ D21, Bk @ D21]),
        np.hstack([(C1 + D12 @ Dk) @ C2, D12 @ Ck]),
        D12 @ Dk @ D21,
    )
    T_z2r = StateSpaceModel(
        np.block([[A + B2 @ Dc @ C2, B2 @ Cc], [Bc @ C2, Ac]]),
        np.vstack([-B2 @ Dc, -Bc]),
        np.hstack([(C1 + D12 @ Dc) @ C2, D12 @ Cc]),
        -(C1 + D12 @ Dc),
    )
    for name, sys in (("robust", T_z1w), ("nominal", T_z2r)):
        if not is_stable(sys.A):
            raise ValueError(f"{name} channel is unstable; the controller "
                             f"does not stabilize the plant")
    return LemmaDecomposition(T_z1w=T_z1w, T_z2r=T_z2r)


# ---------------------------------------------------------------------------
# H-infinity norm
# ---------------------------------------------------------------------------

def _has_imaginary_hamiltonian_eig(sys: StateSpaceModel, gamma: float) -> bool:
    A, B, C, D = sys.A, sys.B, sys.C, sys.D
    m, p = sys.m, sys.p
    R = gamma**2 * np.eye(m) - D.T @ D
    Rinv = la.inv(R)
    Abar = A + B @ Rinv @ D.T @ C
    H = np.block([
        [Abar, B @ Rinv @ B.T],
        [-C.T @ (np.eye(p) + D @ Rinv @ D.T) @ C, -Abar.T],
    ])
    ev = np.linalg.eigvals(H)
    scale = max(1.0, float(np.max(np.abs(ev))))
    return bool(np.any(np.abs(ev.real) < 1e-10 * scale))


def hinf_norm(sys: StateSpaceModel, tol: float = 1e-6) -> float:
    """Peak singular value over frequency, by Hamiltonian bisection.

    ``gamma`` is an upper bound iff the associated Hamiltonian has no
    imaginary-axis eigenvalues; bisection squeezes the bound to relative
    width ``tol``.  The system must be stable.
    """
    if sys.n and not is_stable(sys.A):
        raise ValueError("H-infinity norm requires a stable system")
    if tol <= 0:
        raise ValueError("tol must be positive")
    # lower bound from the feedthrough and a few response probes
    lo = float(np.linalg.svd(sys.D, compute_uv=False)[0]) if sys.D.size else 0.0
    probes = [0.0]
    if sys.n:
        ev = np.linalg.eigvals(sys.A)
        probes.extend(abs(lam.imag) for lam in ev if abs(lam.imag) > 0)
        probes.extend(np.logspace(-2, 3, 25))
    for omega in probes:
        H = frequency_response(sys, float(omega))
        if H.size:
            lo = max(lo, float(np.linalg.svd(H, compute_uv=False)[0]))
    if lo == 0.0:
        return 0.0
    if sys.n == 0:
        return lo
    hi = 2.0 * lo
    while _has_imaginary_hamiltonian_eig(sys, hi):
        hi *= 2.0
        if hi > 1e12 * lo:
            raise RuntimeError("H-infinity bisection failed to bracket")
    for _ in range(200):
        if hi - lo <= tol * lo:
            break
        mid = 0.5 * (lo + hi)
        if _has_imaginary_hamiltonian_eig(sys, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# power seminorms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerSpectrum:
    """Line spectrum of a bounded-power signal: offset plus phasor lines."""

    offset: np.ndarray
    lines: tuple   # of (omega, complex phasor vector)

    @staticmethod
    def of_signal(spec: SignalSpec) -> "PowerSpectrum":
        lines = []
        offset = spec.offset_vector
        for om, v in spec.components():
            if om == 0.0:
                continue
            lines.append((om, v))
        return PowerSpectrum(offset=offset, lines=tuple(lines))

    def power(self) -> float:
        total = float(np.dot(self.offset, self.offset))
        for _, v in self.lines:
            total += 0.5 * float(np.real(np.vdot(v, v)))
        return total


def power_norm_signal(s: SignalSpec) -> float:
    """Closed-form power seminorm of a constant-plus-sinusoid signal.

    Distinct frequencies are mutually orthogonal, so the squared seminorm
    is the channel-wise sum of ``offset^2`` plus half the squared
    amplitudes.  Dependent signals need the reference; see
    :func:`power_norm_dependent`.
    """
    if s.dependency is not None:
        raise ValueError("signal carries a dependency filter; use "
                         "power_norm_dependent with the reference signal")
    return float(np.sqrt(PowerSpectrum.of_signal(s).power()))


def _check_rl_infinity(sys: StateSpaceModel):
    if sys.n == 0:
        return
    ev = np.linalg.eigvals(sys.A)
    if np.any(np.abs(ev.real) < AXIS_POLE_TOL * np.maximum(1.0, np.abs(ev))):
        raise ValueError("system has a pole on the imaginary axis; its "
                         "stationary response is undefined")


def power_norm_dependent(s: SignalSpec, r: SignalSpec) -> float:
    """Power seminorm of ``W(r) + s_indep`` for a dependent signal.

    The filtered part is evaluated through the dependency filter's
    frequency response at the reference lines (the bounded two-sided
    response); it must not share frequencies with the independent part.
    """
    if s.dependency is None:
        return power_norm_signal(s)
    W = s.dependency
    _check_rl_infinity(W)
    if s.shares_frequency_with(r):
        raise ValueError("independent part shares a frequency with the "
                         "reference; the parts are not orthogonal")
    total = PowerSpectrum.of_signal(SignalSpec(s.channels)).power()
    for om, v in r.components():
        Wv = frequency_response(W, om) @ v
        weight = 1.0 if om == 0.0 else 0.5
        total += weight * float(np.real(np.vdot(Wv, Wv)))
    return float(np.sqrt(total))


def power_norm_response(sys: StateSpaceModel, s: SignalSpec) -> float:
    """Power seminorm of the stationary response of ``sys`` to ``s``.

    Each spectral line maps through the frequency response; the constant
    maps through the DC gain.  The realization may contain anti-stable
    feedforward blocks (two-sided interpretation) but no poles on the
    imaginary axis.
    """
    if s.dependency is not None:
        raise ValueError("dependent signals are handled by the dependent "
                         "decomposition, not by power_norm_response")
    _check_rl_infinity(sys)
    total = 0.0
    for om, v in s.components():
        Hv = frequency_response(sys, om) @ v
        weight = 1.0 if om == 0.0 else 0.5
        total += weight * float(np.real(np.vdot(Hv, Hv)))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# decompositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrthogonalDecomposition:
    z_power_sq: float
    z1_power_sq: float
    z2_power_sq: float


def theorem1_decomposition(dec: LemmaDecomposition, w: SignalSpec,
                           r: SignalSpec) -> OrthogonalDecomposition:
    """Additive split of the output power for orthogonal w and r.

    Requires frequency-disjoint signals; the total is the sum of the
    channel powers by orthogonality of distinct spectral lines.
    """
    if w.dependency is not None:
        raise ValueError("w must be the independent disturbance here")
    if w.shares_frequency_with(r):
        raise ValueError("w and r share a frequency; not orthogonal")
    z1 = power_norm_response(dec.T_z1w, w)
    z2 = power_norm_response(dec.T_z2r, r)
    return OrthogonalDecomposition(z_power_sq=z1**2 + z2**2,
                                   z1_power_sq=z1**2,
                                   z2_power_sq=z2**2)


@dataclass(frozen=True)
class WorstDependency:
    """Pointwise worst linear dependency at one frequency.

    ``W`` maximizes the level-penalized output power among all linear
    dependencies; ``kernel = T2^* (I - g^-2 T1 T1^*)^-1 T2`` traced
    against the reference spectral density gives the supremum value.
    """

    W: np.ndarray
    kernel: np.ndarray

    def supremum_trace(self, S_rr) -> float:
        S_rr = np.atleast_2d(np.asarray(S_rr, dtype=complex))
        return float(np.real(np.trace(S_rr @ self.kernel)))


def worst_dependency(dec: LemmaDecomposition, gamma: float,
                     omega: float) -> WorstDependency:
    """Worst dependent weighting at a single frequency.

    Defined for levels above the w -> z channel gain at that frequency;
    otherwise the defining inverse is singular.
    """
    T1 = frequency_response(dec.T_z1w, omega)
    T2 = frequency_response(dec.T_z2r, omega)
    smax = float(np.linalg.svd(T1, compute_uv=False)[0]) if T1.size else 0.0
    if gamma <= smax:
        raise ValueError(f"gamma={gamma:g} does not exceed the channel gain "
                         f"{smax:g} at omega={omega:g}")
    m1 = T1.shape[1]
    p1 = T1.shape[0]
    W = la.solve(gamma**2 * np.eye(m1) - T1.conj().T @ T1, T1.conj().T @ T2)
    kernel = T2.conj().T @ la.solve(
        np.eye(p1) - gamma**-2 * (T1 @ T1.conj().T), T2)
    return WorstDependency(W=W, kernel=kernel)


@dataclass(frozen=True)
class DependentDecomposition:
    """Split of the output power under a dependent disturbance.

    ``upper_bound`` is the triangle-inequality bound
    ``||T1||^2 ||w1||^2 + (||T1|| ||W(r)|| + ||z2||)^2``, which always
    holds.  ``separable_sum`` is the plainer expression
    ``||T1||^2 ||w||^2 + ||z2||^2``; it drops the cross term between the
    two reference-driven paths and can be exceeded when they interfere
    constructively, so it is reported with its own flag rather than
    asserted.
    """

    z_power_sq: float
    z1_power_sq: float
    z2_tilde_power_sq: float
    upper_bound: float
    separable_sum: float
    separable_sum_holds: bool


def theorem2_bound(dec: LemmaDecomposition, gamma: float, r: SignalSpec,
                   w1: SignalSpec, W: StateSpaceModel) -> DependentDecomposition:
    """Performance split for ``w = W(r) + w1`` and its separable bounds.

    The combined channel output at each reference line is
    ``T_z1w W + T_z2r`` applied to the line's phasor; the independent part
    adds orthogonally, so ``||z||^2 = ||z1||^2 + ||z2~||^2`` exactly.  The
    triangle-form bound is verified to dominate the exact power; the plain
    separable sum is reported and flagged (see
    :class:`DependentDecomposition`).
    """
    if w1.dependency is not None:
        raise ValueError("w1 must be the independent part")
    if w1.shares_frequency_with(r):
        raise ValueError("w1 and r share a frequency; not orthogonal")
    _check_rl_infinity(W)

    z1 = power_norm_response(dec.T_z1w, w1)
    z2 = power_norm_response(dec.T_z2r, r)

    z2t_sq = 0.0
    w_dep_sq = 0.0
    for om, v in r.components():
        weight = 1.0 if om == 0.0 else 0.5
        Wv = frequency_response(W, om) @ v
        zeta = frequency_response(dec.T_z1w, om) @ Wv \
            + frequency_response(dec.T_z2r, om) @ v
        z2t_sq += weight * float(np.real(np.vdot(zeta, zeta)))
        w_dep_sq += weight * float(np.real(np.vdot(Wv, Wv)))

    z_sq = z1**2 + z2t_sq
    t1_norm = hinf_norm(dec.T_z1w, tol=1e-8)
    if gamma <= t1_norm:
        raise ValueError(f"gamma={gamma:g} must exceed the w -> z channel "
                         f"norm {t1_norm:g}")
    w_sq = power_norm_signal(w1)**2 + w_dep_sq
    separable = t1_norm**2 * w_sq + z2**2
    bound = t1_norm**2 * power_norm_signal(w1)**2 \
        + (t1_norm * np.sqrt(w_dep_sq) + z2)**2
    if z_sq > bound * (1.0 + 1e-9) + 1e-12:
        raise AssertionError(
            f"triangle bound violated: power {z_sq:.12g} > {bound:.12g}")
    return DependentDecomposition(
        z_power_sq=z_sq, z1_power_sq=z1**2, z2_tilde_power_sq=z2t_sq,
        upper_bound=bound, separable_sum=separable,
        separable_sum_holds=bool(z_sq <= separable * (1.0 + 1e-9) + 1e-12))


# ---------------------------------------------------------------------------
# channel models of arbitrary simulated loops
# ---------------------------------------------------------------------------

def w_channel_model(plant: PlantModel, controller) -> StateSpaceModel:
    """Realization of the w -> z channel of any loop controller.

    The reference is held at zero, so anticausal feedforward is inactive;
    the result is an ordinary stable realization.
    """
    lc = controller.loop_controller()
    A, B1, B2 = plant.A, plant.B1, plant.B2
    C1, C2, D12, D21 = plant.C1, plant.C2, plant.D12, plant.D21
    n, nk = plant.n, lc.n
    Acl = np.block([
        [A + B2 @ lc.Dy @ C2, B2 @ lc.Cu],
        [lc.By @ C2, lc.A],
    ])
    Bcl = np.vstack([B1 + B2 @ lc.Dy @ D21, lc.By @ D21])
    Ccl = np.hstack([(C1 @ C2) + D12 @ lc.Dy @ C2, D12 @ lc.Cu])
    Dcl = D12 @ lc.Dy @ D21
    return StateSpaceModel(Acl, Bcl, Ccl, Dcl)


def r_channel_model(plant: PlantModel, controller) -> StateSpaceModel:
    """Realization of the r -> z channel including anticausal feedforward.

    Feedforward states enter as an anti-stable block whose frequency
    response is the bounded two-sided solution, so the model lives in
    RL-infinity; evaluate it pointwise, do not integrate it forward.
    """
    lc = controller.loop_controller()
    A, B2 = plant.A, plant.B2
    C1, C2, D12 = plant.C1, plant.C2, plant.D12
    n, nk = plant.n, lc.n
    drive = lc.drive
    nb = drive.dim if drive is not None else 0
    N = n + nk + nb
    Acl = np.zeros((N, N))
    ix, ik, ib = slice(0, n), slice(n, n + nk), slice(n + nk, N)
    Acl[ix, ix] = A + B2 @ lc.Dy @ C2
    Acl[ix, ik] = B2 @ lc.Cu
    Acl[ik, ix] = lc.By @ C2
    Acl[ik, ik] = lc.A
    Bcl = np.zeros((N, plant.p2))
    Bcl[ix] = B2 @ lc.Dr
    Bcl[ik] = lc.Br
    Ccl = np.zeros((plant.p1, N))
    Ccl[:, ix] = (C1 @ C2) + D12 @ lc.Dy @ C2
    Ccl[:, ik] = D12 @ lc.Cu
    if drive is not None:
        Acl[ib, ib] = -drive.M.T
        Acl[ix, ib] = B2 @ drive.u_gain
        if drive.state_gain is not None:
            Acl[ik, ib] = drive.state_gain
        Bcl[ib] = drive.S
        Ccl[:, ib] = D12 @ drive.u_gain
    Dcl = D12 @ lc.Dr - C1
    return StateSpaceModel(Acl, Bcl, Ccl, Dcl)
