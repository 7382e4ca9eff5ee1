"""Single-interface reflection coefficients for a vacuum / half-space boundary.

Imaginary-axis quantities use the manifestly positive roots; complex
frequencies use the principal square root throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .response import ResponseModel, Vacuum

_CUT_NUDGE = 1e-300


class Polarization(str, Enum):
    TE = "TE"
    TM = "TM"


@dataclass(frozen=True)
class Mirror:
    """Semi-infinite plate described by permittivity and permeability models."""

    epsilon: ResponseModel = field(default_factory=Vacuum)
    mu: ResponseModel = field(default_factory=Vacuum)

    def swapped(self) -> "Mirror":
        """Dual mirror with the roles of epsilon and mu exchanged."""
        return Mirror(epsilon=self.mu, mu=self.epsilon)

    def reflection_imag(self, pol, xi, k):
        return reflection_imag(self, pol, xi, k)

    def reflection_complex(self, pol, w, k):
        return reflection_complex(self, pol, w, k)

    def scales(self):
        return tuple(self.epsilon.scales()) + tuple(self.mu.scales())


@dataclass(frozen=True, init=False)
class PerfectMirror(Mirror):
    """Ideal reflector.

    ``kind="electric"`` gives r_TM = +1, r_TE = -1 (perfect conductor);
    ``kind="magnetic"`` is its dual, r_TM = -1, r_TE = +1.
    """

    kind: str = "electric"

    def __init__(self, kind: str = "electric"):
        if kind not in ("electric", "magnetic"):
            raise ValueError(f"unknown perfect-mirror kind {kind!r}")
        object.__setattr__(self, "epsilon", Vacuum())
        object.__setattr__(self, "mu", Vacuum())
        object.__setattr__(self, "kind", kind)

    def swapped(self):
        return PerfectMirror(kind="magnetic" if self.kind == "electric" else "electric")

    def _sign(self, pol):
        s = 1.0 if Polarization(pol) is Polarization.TM else -1.0
        return s if self.kind == "electric" else -s

    def reflection_imag(self, pol, xi, k):
        return np.full(np.broadcast(np.asarray(xi), np.asarray(k)).shape, self._sign(pol))

    def reflection_complex(self, pol, w, k):
        return np.full(np.broadcast(np.asarray(w), np.asarray(k)).shape, self._sign(pol),
                       dtype=complex)

    def scales(self):
        return ()


def vacuum_decay(xi, k):
    """q = sqrt(xi^2 + k^2), the imaginary-axis image of -i k_z."""
    return np.hypot(xi, k)


def _fresnel(resp, q, qm):
    return (resp * q - qm) / (resp * q + qm)


def reflection_imag(m: Mirror, pol, xi, k):
    """Reflection coefficient at omega = i xi, transverse wavenumber k.

    For xi = 0 the xi -> 0+ limit of the material models is used; the
    corner xi = k = 0 is defined as zero.
    """
    if isinstance(m, PerfectMirror):
        return m.reflection_imag(pol, xi, k)
    pol = Polarization(pol)
    xi, k = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(k, dtype=float))
    if np.any(xi < 0) or np.any(k < 0):
        raise ValueError("xi and k must be non-negative")
    out = np.zeros(xi.shape)
    pos = xi > 0
    if np.any(pos):
        x, kk = xi[pos], k[pos]
        eps, mu = m.epsilon.imag(x), m.mu.imag(x)
        q = vacuum_decay(x, kk)
        qm = np.sqrt(eps * mu * x**2 + kk**2)
        resp = eps if pol is Polarization.TM else mu
        out[pos] = _fresnel(resp, q, qm)
    zero = (~pos) & (k > 0)
    if np.any(zero):
        out[zero] = _static_reflection(m, pol, k[zero])
    return out if out.ndim else float(out)


def _static_reflection(m: Mirror, pol, k):
    eps0, eps_x2 = m.epsilon.static()
    mu0, mu_x2 = m.mu.static()
    # xi^2 eps mu -> finite limit; only one factor may diverge
    lim = 0.0
    if np.isinf(eps0):
        lim = eps_x2 * mu0
    elif np.isinf(mu0):
        lim = mu_x2 * eps0
    qm = np.sqrt(lim + k**2)
    resp = eps0 if pol is Polarization.TM else mu0
    if np.isinf(resp):
        return np.ones_like(k)
    return _fresnel(resp, k, qm)


def csqrt(z):
    """Principal square root with radicands on the cut nudged to +i*tiny."""
    z = np.asarray(z, dtype=complex)
    on_cut = (z.imag == 0) & (z.real < 0)
    z = np.where(on_cut, z + 1j * _CUT_NUDGE, z)
    return np.sqrt(z)


def kz_vacuum(w, k):
    return csqrt(np.asarray(w, dtype=complex) ** 2 - np.asarray(k) ** 2)


def reflection_complex(m: Mirror, pol, w, k):
    """Reflection coefficient at complex frequency w, principal-branch roots."""
    if isinstance(m, PerfectMirror):
        return m.reflection_complex(pol, w, k)
    pol = Polarization(pol)
    w = np.asarray(w, dtype=complex)
    eps, mu = m.epsilon.complex(w), m.mu.complex(w)
    kz = kz_vacuum(w, k)
    kzm = csqrt(eps * mu * w**2 - np.asarray(k) ** 2)
    resp = eps if pol is Polarization.TM else mu
    out = _fresnel(resp, kz, kzm)
    return out if np.ndim(out) else complex(out)
