"""Material response functions on the imaginary axis and at complex frequency.

Units are natural (c = hbar = k_B = 1) with all frequencies measured in a
reference scale Omega.  Every model exposes

* ``imag(xi)``    -- value at omega = i*xi, xi > 0 (real, >= 1 for passive models)
* ``complex(w)``  -- analytic continuation at complex omega (for mode search)
* ``static()``    -- the xi -> 0+ behaviour, as ``(value, lim xi^2 * value)``
* ``rational()``  -- numerator/denominator polynomials in omega (highest power
  first) whenever the model is a rational function, else ``None``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

ArrayLike = Union[float, np.ndarray]


class ResponseError(ValueError):
    """Invalid response-model parameters or evaluation points."""


# --------------------------------------------------------------------------
# parameter containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DrudeParams:
    plasma_frequency: float
    damping: float = 0.0

    def __post_init__(self):
        if not self.plasma_frequency > 0:
            raise ResponseError("plasma_frequency must be > 0")
        if not self.damping >= 0:
            raise ResponseError("damping must be >= 0")


@dataclass(frozen=True)
class MetamaterialMuParams:
    """Magnetic oscillator: strength f in (0, 1), resonance w0, damping."""

    oscillator_strength: float
    resonance: float
    magnetic_damping: float = 0.0

    def __post_init__(self):
        if not 0 < self.oscillator_strength < 1:
            raise ResponseError("oscillator_strength must lie in (0, 1)")
        if not self.resonance > 0:
            raise ResponseError("resonance must be > 0")
        if not self.magnetic_damping >= 0:
            raise ResponseError("magnetic_damping must be >= 0")

    @property
    def magnetic_plasma_frequency(self) -> float:
        return self.resonance * np.sqrt(self.oscillator_strength)


@dataclass(frozen=True)
class TabulatedAbsorption:
    """Samples of Im chi(omega) on a strictly increasing positive grid."""

    omega: np.ndarray
    im_chi: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        y = np.asarray(self.im_chi, dtype=float)
        if w.ndim != 1 or w.shape != y.shape:
            raise ResponseError("omega and im_chi must be 1-d and of equal length")
        if w.size == 0:
            raise ResponseError("empty absorption table")
        if np.any(w <= 0):
            raise ResponseError("absorption grid must be strictly positive")
        if np.any(np.diff(w) <= 0):
            raise ResponseError("absorption grid must be strictly increasing")
        if np.any(y < 0):
            raise ResponseError("negative Im chi violates passivity")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "im_chi", y)

    @classmethod
    def from_text(cls, path: Union[str, Path]) -> "TabulatedAbsorption":
        """Read two whitespace-delimited columns (omega, Im chi); '#' comments."""
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.size == 0:
            raise ResponseError(f"{path}: empty absorption table")
        if data.shape[1] != 2:
            raise ResponseError(f"{path}: expected two columns, got {data.shape[1]}")
        return cls(data[:, 0], data[:, 1])

    def to_text(self, path: Union[str, Path]) -> None:
        np.savetxt(path, np.column_stack([self.omega, self.im_chi]),
                   header="omega  Im_chi", fmt="%.17g")


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------

def _check_positive_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi <= 0):
        raise ResponseError("imaginary frequency xi must be > 0")
    return xi


def drude_epsilon_imag(p: DrudeParams, xi: ArrayLike) -> ArrayLike:
    """eps(i xi) = 1 + wp^2 / (xi (xi + gamma)), xi > 0."""
    xi = _check_positive_xi(xi)
    out = 1.0 + p.plasma_frequency**2 / (xi * (xi + p.damping))
    return out if out.ndim else float(out)


def drude_epsilon_complex(p: DrudeParams, w: ArrayLike) -> ArrayLike:
    """eps(w) = 1 - wp^2 / (w^2 + i gamma w) for complex w off the poles 0, -i gamma."""
    w = np.asarray(w, dtype=complex)
    den = w * (w + 1j * p.damping)
    if np.any(den == 0):
        raise ResponseError("Drude permittivity evaluated at a pole")
    out = 1.0 - p.plasma_frequency**2 / den
    return out if out.ndim else complex(out)


def metamaterial_mu_imag(p: MetamaterialMuParams, xi: ArrayLike) -> ArrayLike:
    """Weak-absorption Kramers-Kronig form mu(i xi) = 1 + f w0^2 / (w0^2 + xi^2)."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ResponseError("xi must be >= 0")
    w0 = p.resonance
    out = 1.0 + p.oscillator_strength * w0**2 / (w0**2 + xi**2)
    return out if out.ndim else float(out)


def metamaterial_mu_direct(p: MetamaterialMuParams, w: ArrayLike) -> ArrayLike:
    """Effective-medium permeability 1 + f w^2 / (w0^2 - w^2 - i kappa w).

    Diagnostic only: continuing this to w = i xi gives values below one,
    because the function tends to 1 - f rather than 1 at high frequency.
    """
    w = np.asarray(w, dtype=complex)
    out = 1.0 + p.oscillator_strength * w**2 / (
        p.resonance**2 - w**2 - 1j * p.magnetic_damping * w)
    return out if out.ndim else complex(out)


def metamaterial_mu_absorption(p: MetamaterialMuParams, w: ArrayLike) -> ArrayLike:
    """Im mu(w) of the effective-medium permeability on the real axis."""
    return np.imag(metamaterial_mu_direct(p, w))


def drude_epsilon_absorption(p: DrudeParams, w: ArrayLike) -> ArrayLike:
    """Im eps(w) = wp^2 gamma / (w (w^2 + gamma^2)) for real w > 0."""
    w = np.asarray(w, dtype=float)
    return p.plasma_frequency**2 * p.damping / (w * (w**2 + p.damping**2))


# --------------------------------------------------------------------------
# Kramers-Kronig rotation of tabulated absorption
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class KKTail:
    """Power-law continuation Im chi ~ amplitude * omega**(-exponent)."""

    amplitude: float
    exponent: float
    start: float


def fit_tail(a: TabulatedAbsorption) -> KKTail:
    """Fit Im chi ~ C w^-m over the final decade of the table.

    The exponent is clipped to m >= 1 so that w Im chi / (w^2 + xi^2)
    stays integrable.
    """
    w, y = a.omega, a.im_chi
    w_end = w[-1]
    sel = (w >= w_end / 10) & (y > 0)
    if sel.sum() >= 3 and w[sel][0] < w_end:
        m, logc = np.polyfit(np.log(w[sel]), np.log(y[sel]), 1)
        m = max(-m, 1.0)
        if abs(m - round(m)) < 0.05:
            m = float(round(m))
        c = y[-1] * w_end**m
    elif y[-1] > 0:
        m, c = 3.0, y[-1] * w_end**3
    else:
        m, c = 3.0, 0.0
    return KKTail(amplitude=float(c), exponent=float(m), start=float(w_end))


def _tail_integral(tail: KKTail, xi: float) -> float:
    """int_W^inf C w^(1-m) / (w^2 + xi^2) dw."""
    c, m, W = tail.amplitude, tail.exponent, tail.start
    if c == 0.0:
        return 0.0
    if m == 3.0:
        x = xi / W
        if x < 0.1:
            series = sum((-1) ** j * x ** (2 * j) / (2 * j + 3) for j in range(8))
            return c * series / W**3
        return c / xi**2 * (1.0 / W - np.arctan(x) / xi)
    if m == 1.0:
        if xi == 0.0:
            return c / W
        return c / xi * np.arctan(xi / W)
    # generic exponent: substitute w = W / t, t in (0, 1]
    f = lambda t: c * W ** (1 - m) * t ** (m - 1) / ((W / t) ** 2 + xi**2) * W / t**2
    val, _ = integrate.quad(f, 0.0, 1.0, limit=200)
    return val


def _head_integral(w, p, xi):
    """int_0^w1 p1 (w/w1)^s / (w^2 + xi^2) dw with s from the first two samples."""
    w1, p1 = w[0], p[0]
    if p1 == 0.0:
        return 0.0
    s = 0.0
    if w.size > 1 and p[1] > 0:
        s = float(np.clip(np.log(p[1] / p1) / np.log(w[1] / w1), 0.0, 8.0))
        if s < 0.05:
            s = 0.0
    if xi == 0.0:
        return p1 / (w1 * (s - 1.0)) if s > 1.0 else float("inf")
    if s == 0.0:
        return p1 / xi * np.arctan(w1 / xi)
    val, _ = integrate.quad(lambda t: p1 * w1 * t**s / ((w1 * t) ** 2 + xi**2), 0.0, 1.0)
    return val


def kk_rotate(a: TabulatedAbsorption, xi: float, tail: Optional[KKTail] = None) -> float:
    """chi(i xi) = 1 + (2/pi) int_0^inf dw w Im chi(w) / (w^2 + xi^2).

    The weight p(w) = w Im chi(w), which is even in w and finite at w = 0,
    is interpolated linearly between samples and continued as a power law
    p(w_1) (w/w_1)^s below the first sample.  Each linear segment is
    integrated in closed form, so a narrow resonance costs nothing beyond
    being resolved by the table.  Beyond the last sample a power-law tail
    is used (see :func:`fit_tail`).  Returns ``inf`` at xi = 0 when the
    low-frequency weight does not vanish fast enough (e.g. Drude metals).
    """
    if xi < 0:
        raise ResponseError("xi must be >= 0")
    w = a.omega
    p = w * a.im_chi
    if tail is None:
        tail = fit_tail(a)

    w0, w1 = w[:-1], w[1:]
    p0, p1 = p[:-1], p[1:]
    slope = (p1 - p0) / (w1 - w0)
    icpt = p0 - slope * w0

    if xi == 0.0:
        seg = icpt * (1.0 / w0 - 1.0 / w1) + slope * np.log(w1 / w0)
    else:
        seg = (icpt / xi * (np.arctan(w1 / xi) - np.arctan(w0 / xi))
               + 0.5 * slope * np.log1p((w1**2 - w0**2) / (w0**2 + xi**2)))
    head = _head_integral(w, p, xi)
    if np.isinf(head):
        return float("inf")
    total = head + np.sum(seg) + _tail_integral(tail, xi)
    return float(1.0 + 2.0 / np.pi * total)


def sample_absorption(func, w_min: float, w_max: float, resonances: Sequence[Tuple[float, float]] = (),
                      n_log: int = 2000, n_res: int = 4000) -> TabulatedAbsorption:
    """Tabulate an absorption function on a log grid plus Lorentzian-mapped
    clusters around each ``(centre, width)`` resonance."""
    grids = [np.geomspace(w_min, w_max, n_log)]
    for centre, width in resonances:
        theta = np.linspace(-np.pi / 2, np.pi / 2, n_res + 2)[1:-1]
        g = centre + 0.5 * width * np.tan(theta)
        grids.append(g[(g > w_min) & (g < w_max)])
    w = np.unique(np.concatenate(grids))
    return TabulatedAbsorption(w, np.clip(np.asarray(func(w), dtype=float), 0.0, None))


# --------------------------------------------------------------------------
# response models
# --------------------------------------------------------------------------

class ResponseModel:
    """Base class; see the module docstring for the evaluation protocol."""

    kind = "abstract"

    def imag(self, xi: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def complex(self, w: ArrayLike) -> ArrayLike:
        raise ResponseError(f"{self.kind} model has no complex-frequency continuation")

    def static(self) -> Tuple[float, float]:
        raise NotImplementedError

    def rational(self):
        return None

    def scales(self) -> Tuple[float, ...]:
        """Characteristic frequencies, used to seed quadrature panels."""
        return ()


@dataclass(frozen=True)
class Vacuum(ResponseModel):
    kind = "vacuum"

    def imag(self, xi):
        return np.ones_like(np.asarray(xi, dtype=float)) if np.ndim(xi) else 1.0

    def complex(self, w):
        return np.ones_like(np.asarray(w, dtype=complex)) if np.ndim(w) else 1.0 + 0j

    def static(self):
        return 1.0, 0.0

    def rational(self):
        return np.array([1.0 + 0j]), np.array([1.0 + 0j])


@dataclass(frozen=True)
class Constant(ResponseModel):
    """Frequency-independent response; used as a probe for limiting cases."""

    value: float
    kind = "constant"

    def imag(self, xi):
        return np.full(np.shape(xi), float(self.value)) if np.ndim(xi) else float(self.value)

    def complex(self, w):
        return np.full(np.shape(w), complex(self.value)) if np.ndim(w) else complex(self.value)

    def static(self):
        return float(self.value), 0.0

    def rational(self):
        return np.array([complex(self.value)]), np.array([1.0 + 0j])


@dataclass(frozen=True)
class DrudeEpsilon(ResponseModel):
    params: DrudeParams
    kind = "drude_epsilon"

    def imag(self, xi):
        return drude_epsilon_imag(self.params, xi)

    def complex(self, w):
        return drude_epsilon_complex(self.params, w)

    def static(self):
        wp, g = self.params.plasma_frequency, self.params.damping
        # xi^2 eps(i xi) -> wp^2 for the plasma model, 0 with damping
        return float("inf"), (wp**2 if g == 0 else 0.0)

    def rational(self):
        wp, g = self.params.plasma_frequency, self.params.damping
        return (np.array([1.0, 1j * g, -wp**2], dtype=complex),
                np.array([1.0, 1j * g, 0.0], dtype=complex))

    def scales(self):
        wp, g = self.params.plasma_frequency, self.params.damping
        return (wp, g) if g > 0 else (wp,)


@dataclass(frozen=True)
class MetamaterialMuKK(ResponseModel):
    """Permeability routed through the Kramers-Kronig weak-absorption limit.

    On the imaginary axis this is exactly 1 + f w0^2 / (w0^2 + xi^2).  The
    complex continuation used for mode search is the causal oscillator
    with the same strength, 1 + f w0^2 / (w0^2 - w^2 - i kappa w).
    """

    params: MetamaterialMuParams
    kind = "metamaterial_mu_kk"

    def imag(self, xi):
        return metamaterial_mu_imag(self.params, xi)

    def complex(self, w):
        f, w0, k = (self.params.oscillator_strength, self.params.resonance,
                    self.params.magnetic_damping)
        w = np.asarray(w, dtype=complex)
        out = 1.0 + f * w0**2 / (w0**2 - w**2 - 1j * k * w)
        return out if out.ndim else complex(out)

    def static(self):
        return 1.0 + self.params.oscillator_strength, 0.0

    def rational(self):
        f, w0, k = (self.params.oscillator_strength, self.params.resonance,
                    self.params.magnetic_damping)
        den = np.array([-1.0, -1j * k, w0**2], dtype=complex)
        num = den + np.array([0.0, 0.0, f * w0**2])
        return num, den

    def scales(self):
        return (self.params.resonance, self.params.magnetic_plasma_frequency)


@dataclass(frozen=True)
class MetamaterialMuDirect(ResponseModel):
    """Direct continuation of the effective-medium permeability (diagnostic)."""

    params: MetamaterialMuParams
    kind = "drude_lorentz_direct"

    def imag(self, xi):
        xi = np.asarray(xi, dtype=float)
        f, w0, k = (self.params.oscillator_strength, self.params.resonance,
                    self.params.magnetic_damping)
        out = 1.0 - f * xi**2 / (w0**2 + xi**2 + k * xi)
        return out if out.ndim else float(out)

    def complex(self, w):
        return metamaterial_mu_direct(self.params, w)

    def static(self):
        return 1.0, 0.0

    def rational(self):
        f, w0, k = (self.params.oscillator_strength, self.params.resonance,
                    self.params.magnetic_damping)
        den = np.array([-1.0, -1j * k, w0**2], dtype=complex)
        return den + np.array([f, 0.0, 0.0]), den

    def scales(self):
        return (self.params.resonance,)


@dataclass(frozen=True)
class TabulatedKK(ResponseModel):
    """Response known only through tabulated absorption."""

    absorption: TabulatedAbsorption
    kind = "tabulated_kk"
    tail: Optional[KKTail] = field(default=None, compare=False)

    def __post_init__(self):
        if self.tail is None:
            object.__setattr__(self, "tail", fit_tail(self.absorption))

    def imag(self, xi):
        xi_arr = np.asarray(xi, dtype=float)
        out = np.array([kk_rotate(self.absorption, float(x), self.tail)
                        for x in xi_arr.ravel()]).reshape(xi_arr.shape)
        return out if out.ndim else float(out)

    def static(self):
        return kk_rotate(self.absorption, 0.0, self.tail), 0.0

    def scales(self):
        a = self.absorption
        return (float(a.omega[np.argmax(a.omega * a.im_chi)]),)
