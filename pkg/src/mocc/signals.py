"""Deterministic bounded-power test signals: constants plus finite sinusoids.

A :class:`SignalSpec` describes a vector signal channel by channel as a
constant offset plus a finite list of sinusoids ``a*sin(w t + phi)``.  An
optional LTI dependency filter turns a spec into ``w = W(r) + w_indep``,
which the simulation engine integrates forward and the closed-form
analysis treats through the filter's frequency response.

The phasor convention used throughout: ``a*sin(w t + phi)`` is the
imaginary part of ``v e^{jwt}`` with ``v = a e^{j phi}``, so the long-run
mean square of one sinusoid is ``|v|^2 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lti import StateSpaceModel

__all__ = ["Sinusoid", "SignalChannel", "SignalSpec"]


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.amplitude) or not np.isfinite(self.phase):
            raise ValueError("non-finite sinusoid parameters")
        if self.omega <= 0:
            raise ValueError("sinusoid frequency must be positive; "
                             "use the channel offset for a constant")

    @property
    def phasor(self) -> complex:
        return self.amplitude * np.exp(1j * self.phase)


@dataclass(frozen=True)
class SignalChannel:
    offset: float = 0.0
    sinusoids: tuple = ()

    def __post_init__(self):
        sin = tuple(self.sinusoids)
        object.__setattr__(self, "sinusoids", sin)
        freqs = [s.omega for s in sin]
        if len(set(freqs)) != len(freqs):
            raise ValueError("duplicate frequencies in one channel; merge them first")


@dataclass(frozen=True)
class SignalSpec:
    """Multi-channel constant-plus-sinusoid signal, optionally ``W(r)``-dependent.

    ``dependency`` is an LTI filter acting on the scenario's reference
    signal; its output adds to the independent part described by
    ``channels``.
    """

    channels: tuple
    dependency: StateSpaceModel | None = None

    def __post_init__(self):
        ch = tuple(self.channels)
        if not ch:
            raise ValueError("a signal needs at least one channel")
        object.__setattr__(self, "channels", ch)
        if self.dependency is not None and self.dependency.p != len(ch):
            raise ValueError("dependency filter output dimension mismatch")

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(dim: int = 1) -> "SignalSpec":
        return SignalSpec(tuple(SignalChannel() for _ in range(dim)))

    @staticmethod
    def constant(values) -> "SignalSpec":
        vals = np.atleast_1d(np.asarray(values, dtype=float))
        return SignalSpec(tuple(SignalChannel(offset=float(v)) for v in vals))

    @staticmethod
    def sine(amplitude: float, omega: float, phase: float = 0.0) -> "SignalSpec":
        return SignalSpec((SignalChannel(0.0, (Sinusoid(amplitude, omega, phase),)),))

    @staticmethod
    def single_channel(offset: float, sinusoids) -> "SignalSpec":
        return SignalSpec((SignalChannel(offset, tuple(sinusoids)),))

    def with_dependency(self, filt: StateSpaceModel) -> "SignalSpec":
        return SignalSpec(self.channels, dependency=filt)

    # -- basic queries ------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.channels)

    @property
    def frequencies(self) -> np.ndarray:
        """Sorted distinct positive frequencies of the independent part."""
        freqs = sorted({s.omega for ch in self.channels for s in ch.sinusoids})
        return np.array(freqs)

    @property
    def offset_vector(self) -> np.ndarray:
        return np.array([ch.offset for ch in self.channels])

    def phasor_at(self, omega: float) -> np.ndarray:
        """Stacked complex phasor vector of the independent part at ``omega``."""
        v = np.zeros(self.dim, dtype=complex)
        for i, ch in enumerate(self.channels):
            for s in ch.sinusoids:
                if s.omega == omega:
                    v[i] = s.phasor
        return v

    def components(self):
        """Yield ``(omega, phasor_vector)`` pairs plus the constant as omega 0.

        The constant term is yielded only when it is nonzero somewhere.
        """
        c = self.offset_vector
        if np.any(c != 0.0):
            yield 0.0, c.astype(complex)
        for w in self.frequencies:
            yield float(w), self.phasor_at(w)

    def sample(self, t) -> np.ndarray:
        """Evaluate the independent part; shape ``(dim,) + shape(t)``.

        The dependency part is produced by integrating the filter, never
        by this sampler.
        """
        t = np.asarray(t, dtype=float)
        out = np.zeros((self.dim,) + t.shape)
        for i, ch in enumerate(self.channels):
            v = np.full(t.shape, ch.offset)
            for s in ch.sinusoids:
                v = v + s.amplitude * np.sin(s.omega * t + s.phase)
            out[i] = v
        return out

    def shares_frequency_with(self, other: "SignalSpec") -> bool:
        mine = set(self.frequencies)
        if np.any(self.offset_vector != 0):
            mine.add(0.0)
        theirs = set(other.frequencies)
        if np.any(other.offset_vector != 0):
            theirs.add(0.0)
        return bool(mine & theirs)
