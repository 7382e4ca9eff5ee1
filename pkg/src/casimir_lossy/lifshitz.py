"""Casimir pressure and energy per unit area between two planar mirrors.

The real-frequency Lifshitz integrand is rotated onto the imaginary axis
(omega -> i xi, coth -> 1 at zero temperature, Matsubara sum at finite
temperature).  For a real frequency w the round-trip factor
r1 r2 exp(2 i kz L) becomes g = r1(i xi) r2(i xi) exp(-2 q L) with
q = sqrt(xi^2 + k^2), and the pressure reads

    F(L) = 1/(2 pi^2) int_0^inf dxi int_0^inf dk k q sum_pol g / (1 - g)

in natural units (c = hbar = k_B = 1).  Positive F means attraction.
The inner k-integral is done at fixed xi in q, since k dk = q dq.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fresnel import Mirror, PerfectMirror, Polarization, _static_reflection, vacuum_decay
from .quadrature import QuadratureError, adaptive_gk, log_gauss_rule

#: wavelength unit Lambda = 2 pi c / Omega in natural length units c / Omega
LAMBDA = 2 * math.pi
MIN_GAP = 1e-6 * LAMBDA

ZETA3 = 1.2020569031595942


class NonPassiveError(ValueError):
    """A round-trip factor with |g| >= 1 was encountered."""


@dataclass(frozen=True)
class CavityConfig:
    """Two half-spaces separated by a vacuum gap L (units c/Omega) at temperature T."""

    L: float
    mirror1: Mirror
    mirror2: Mirror
    T: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("gap L must be > 0")
        if self.L < MIN_GAP:
            raise ValueError(f"gap L={self.L:g} below the supported minimum {MIN_GAP:g}")
        if not self.T >= 0:
            raise ValueError("temperature must be >= 0")

    def with_gap(self, L):
        return CavityConfig(L, self.mirror1, self.mirror2, self.T)

    def with_temperature(self, T):
        return CavityConfig(self.L, self.mirror1, self.mirror2, T)

    def swapped(self):
        """Both mirrors dualised (epsilon <-> mu)."""
        return CavityConfig(self.L, self.mirror1.swapped(), self.mirror2.swapped(), self.T)


@dataclass(frozen=True)
class QuadratureSpec:
    relative_tolerance: float = 1e-7
    max_subdivisions: int = 600
    inner_nodes_per_unit: int = 10
    max_matsubara_terms: int = 200_000
    matsubara_tail_fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.relative_tolerance <= 1e-2:
            raise ValueError("relative_tolerance must lie in (0, 1e-2]")


@dataclass
class PressureResult:
    pressure: float
    estimated_error: float
    n_matsubara_terms: int = 0
    n_panels: int = 0
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# integrand kernel
# --------------------------------------------------------------------------

def _reflections(m: Mirror, xi, k):
    """r_TM, r_TE on a (len(xi), len(k)) grid; xi is 1-d, k is 2-d."""
    if isinstance(m, PerfectMirror):
        return (m.reflection_imag("TM", xi[:, None], k), m.reflection_imag("TE", xi[:, None], k))
    rtm = np.empty(k.shape)
    rte = np.empty(k.shape)
    pos = xi > 0
    if np.any(pos):
        x = xi[pos]
        eps = np.asarray(m.epsilon.imag(x), dtype=float)[:, None]
        mu = np.asarray(m.mu.imag(x), dtype=float)[:, None]
        kk = k[pos]
        q = vacuum_decay(x[:, None], kk)
        with np.errstate(invalid="ignore"):
            qm = np.sqrt(eps * mu * x[:, None] ** 2 + kk**2)
        rtm[pos] = (eps * q - qm) / (eps * q + qm)
        rte[pos] = (mu * q - qm) / (mu * q + qm)
    if np.any(~pos):
        kk = k[~pos]
        rtm[~pos] = _static_reflection(m, Polarization.TM, kk)
        rte[~pos] = _static_reflection(m, Polarization.TE, kk)
    return rtm, rte


def roundtrip_factor(cfg: CavityConfig, xi, k, pol):
    """g = r1 r2 exp(-2 q L) at imaginary frequency xi and wavenumber k."""
    pol = Polarization(pol)
    xi, k = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(k, dtype=float))
    shape = xi.shape
    x1, k1 = xi.ravel(), k.ravel()
    out = np.empty(x1.shape)
    for i in range(x1.size):
        g = _roundtrip(cfg, x1[i:i + 1], k1[i:i + 1][None, :])
        out[i] = g[0 if pol is Polarization.TM else 1][0, 0]
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def _roundtrip(cfg, xi, k):
    q = np.hypot(xi[:, None], k)
    decay = np.exp(-2.0 * q * cfg.L)
    r1 = _reflections(cfg.mirror1, xi, k)
    r2 = _reflections(cfg.mirror2, xi, k)
    gtm = r1[0] * r2[0] * decay
    gte = r1[1] * r2[1] * decay
    # NaN (an active medium with a negative eps mu) fails the test too
    bad = ~(np.abs(gtm) < 1) | ~(np.abs(gte) < 1)
    if np.any(bad):
        bad = np.argwhere(bad)[0]
        raise NonPassiveError(
            f"|g| >= 1 at xi={xi[bad[0]]:.6g}, k={k[tuple(bad)]:.6g}: non-passive mirror model")
    return gtm, gte


class _Integrand:
    """Inner q-integral at a vector of xi values, on a fixed log-Gauss rule
    in s = 2 L (q - xi)."""

    S_LO, S_HI = math.log(1e-14), math.log(120.0)

    def __init__(self, cfg: CavityConfig, quantity: str, per_unit: int):
        self.cfg = cfg
        self.quantity = quantity
        self.s, self.w = log_gauss_rule(self.S_LO, self.S_HI, per_unit)

    def __call__(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        L = self.cfg.L
        dq = self.s / (2.0 * L)
        q = xi[:, None] + dq[None, :]
        k = np.sqrt(dq[None, :] * (2.0 * xi[:, None] + dq[None, :]))
        gtm, gte = _roundtrip(self.cfg, xi, k)
        if self.quantity == "pressure":
            f = q**2 * (gtm / (1.0 - gtm) + gte / (1.0 - gte))
        else:
            f = q * (np.log1p(-gtm) + np.log1p(-gte))
        return (f @ self.w) / (2.0 * L)


def _xi_breakpoints(cfg: CavityConfig):
    L = cfg.L
    scales = [1.0 / L]
    for m in (cfg.mirror1, cfg.mirror2):
        scales += [s for s in m.scales() if s > 0]
    # scales far below 1/L (e.g. a vanishing damping rate) carry no weight;
    # flooring them keeps xi (xi + gamma) clear of underflow
    lo = math.log(1e-12 * max(min(scales), 1e-6 / L))
    hi = math.log(60.0 / L)
    pts = set(np.linspace(lo, hi, max(8, int((hi - lo) / 1.5))).tolist())
    pts |= {math.log(s) for s in scales if lo < math.log(s) < hi}
    return np.array(sorted(pts))


def _integrate_xi(cfg, spec, quantity, prefactor):
    fine = _Integrand(cfg, quantity, spec.inner_nodes_per_unit)
    coarse = _Integrand(cfg, quantity, max(3, spec.inner_nodes_per_unit // 2))

    def outer(u, inner=fine):
        xi = np.exp(u)
        return xi * inner(xi)

    res = adaptive_gk(outer, _xi_breakpoints(cfg), rtol=spec.relative_tolerance,
                      max_subdivisions=spec.max_subdivisions)
    # inner-rule error: rerun the converged panels with the coarse rule
    check = adaptive_gk(lambda u: outer(u, coarse), _xi_breakpoints(cfg),
                        rtol=spec.relative_tolerance,
                        max_subdivisions=spec.max_subdivisions, raise_on_failure=False)
    inner_err = abs(check.value - res.value)
    value = prefactor * res.value
    err = prefactor * (res.error + inner_err)
    return value, abs(err), res.n_intervals


# --------------------------------------------------------------------------
# public surface
# --------------------------------------------------------------------------

def pressure_zero_T(cfg: CavityConfig, spec: Optional[QuadratureSpec] = None) -> PressureResult:
    """Zero-temperature pressure (attractive positive)."""
    spec = spec or QuadratureSpec()
    value, err, n = _integrate_xi(cfg, spec, "pressure", 1.0 / (2.0 * math.pi**2))
    return PressureResult(value, err, 0, n)


def energy_zero_T(cfg: CavityConfig, spec: Optional[QuadratureSpec] = None) -> PressureResult:
    """Zero-temperature energy per unit area; the attractive-positive pressure is dE/dL."""
    spec = spec or QuadratureSpec()
    value, err, n = _integrate_xi(cfg, spec, "energy", 1.0 / (4.0 * math.pi**2))
    return PressureResult(value, err, 0, n)


def _matsubara(cfg, spec, quantity):
    T, L = cfg.T, cfg.L
    fine = _Integrand(cfg, quantity, spec.inner_nodes_per_unit)
    coarse = _Integrand(cfg, quantity, max(3, spec.inner_nodes_per_unit // 2))
    dxi = 2.0 * math.pi * T
    ratio = math.exp(-2.0 * dxi * L)
    chunk = 512
    terms, terms_coarse = [], []
    n0 = 0
    while True:
        xi = dxi * np.arange(n0, n0 + chunk)
        t = fine(xi)
        terms.append(t)
        terms_coarse.append(coarse(xi))
        n0 += chunk
        allt = np.concatenate(terms)
        weights = np.ones(allt.size)
        weights[0] = 0.5
        total = float(weights @ allt)
        scale = float(weights @ np.abs(allt))
        last = abs(allt[-1])
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            observed = abs(allt[-1] / allt[-2]) if allt[-2] != 0 else 0.0
        rho = max(ratio, min(observed, 1.0 - 1e-12))
        tail = last * rho / (1.0 - rho)
        if tail <= spec.matsubara_tail_fraction * spec.relative_tolerance * max(scale, 1e-300):
            break
        if n0 >= spec.max_matsubara_terms:
            raise QuadratureError(
                f"Matsubara sum not converged after {n0} terms (tail bound {tail:.3g})")
    allc = np.concatenate(terms_coarse)
    inner_err = abs(float(weights @ (allt - allc)))
    return total, tail + inner_err, n0


def pressure_finite_T(cfg: CavityConfig, spec: Optional[QuadratureSpec] = None) -> PressureResult:
    """Finite-temperature pressure from the Matsubara sum (n = 0 term halved)."""
    if not cfg.T > 0:
        raise ValueError("pressure_finite_T requires T > 0")
    spec = spec or QuadratureSpec()
    total, err, n = _matsubara(cfg, spec, "pressure")
    pref = cfg.T / math.pi
    return PressureResult(pref * total, pref * err, n)


def energy_finite_T(cfg: CavityConfig, spec: Optional[QuadratureSpec] = None) -> PressureResult:
    """Finite-temperature free energy per unit area."""
    if not cfg.T > 0:
        raise ValueError("energy_finite_T requires T > 0")
    spec = spec or QuadratureSpec()
    total, err, n = _matsubara(cfg, spec, "energy")
    pref = cfg.T / (2.0 * math.pi)
    return PressureResult(pref * total, pref * err, n)


def pressure(cfg: CavityConfig, spec: Optional[QuadratureSpec] = None) -> PressureResult:
    """Dispatch on temperature."""
    if cfg.T > 0:
        return pressure_finite_T(cfg, spec)
    return pressure_zero_T(cfg, spec)


def ideal_pressure(L):
    """pi^2 / (240 L^4), perfect mirrors at T = 0."""
    return math.pi**2 / (240.0 * L**4)


def ideal_energy(L):
    return -math.pi**2 / (720.0 * L**3)
