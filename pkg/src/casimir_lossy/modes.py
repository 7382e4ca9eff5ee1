"""Complex cavity modes and the mode-sum form of the Casimir energy.

For identical mirrors the cavity resonances at transverse wavenumber k are
the zeros of

    D(w) = exp(-2 i kz L) / r(w)^2 - 1,    kz = sqrt(w^2 - k^2),

continued from the upper half plane into the lower one.  Square roots are
continued with vertical cuts running straight down from each branch point
(``sqrt_down``), so that the sheet reached from above is the one on which
the decaying resonances live.  The mode search itself works with

    N(w) = -2i (R^2 kz^2 + kzm^2) sin(kz L)/kz + 4 R kzm cos(kz L),

which has the same zeros as D but is even in kz, so only the cuts of the
medium wavenumber kzm remain (R is epsilon for TM and mu for TE).

The mode-sum energy at fixed k is assembled from

* the discrete modes at gap L, weighted by the exact finite-cutoff
  version of  1/2 Re[w - (2i/pi) w log(w/w_c)];
* the decoupled reference, i.e. the single-interface surface modes
  (poles of r^2), which the coupled modes approach as L grows;
* the continuum left after both sets are divided out of D, integrated
  as a phase along the real frequency axis up to w_c.

Half-space mirrors have a bulk continuum above sqrt(k^2 + w_p^2) that is
a branch cut, not a set of poles, so the last term is needed outside the
short-distance regime.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .fresnel import Mirror, PerfectMirror, Polarization
from .lifshitz import ZETA3, CavityConfig
from .response import DrudeParams, ResponseError

ALPHA_PLASMON = 1.193
GAMMA_COEFFICIENT = 15.0 * ZETA3 / math.pi**4


class ModeSearchError(RuntimeError):
    """The argument-principle bookkeeping could not be closed."""

    def __init__(self, msg, rectangle=None):
        super().__init__(msg)
        self.rectangle = rectangle


class CutoffDependenceError(RuntimeError):
    """The mode-sum energy moved with the cutoff frequency."""

    def __init__(self, msg, suspects=()):
        super().__init__(msg)
        self.suspects = tuple(suspects)


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ComplexMode:
    omega: complex
    k: float
    pol: Polarization
    branch_index: int
    residual: float = 0.0
    multiplicity: int = 1


@dataclass(frozen=True)
class SearchRegion:
    """Rectangle re_min < Re w < re_max, im_min < Im w < im_max.

    Passive mirrors have no resonances and no cuts in the upper half
    plane, so the top edge is placed there (by default at a height of a
    few percent of re_max) to keep it away from real-axis roots.

    ``n_boundary`` is the initial number of samples per rectangle edge;
    edges are refined until the phase step between samples is small.
    """

    re_max: float
    im_min: float
    re_min: Optional[float] = None
    im_max: Optional[float] = None
    n_boundary: int = 48
    max_depth: int = 100

    def __post_init__(self):
        if not self.re_max > 0:
            raise ValueError("re_max must be > 0")
        if not self.im_min <= 0:
            raise ValueError("im_min must be <= 0")
        if self.re_min is not None and not 0 <= self.re_min < self.re_max:
            raise ValueError("need 0 <= re_min < re_max")
        if self.im_max is not None and not self.im_max > 0:
            raise ValueError("im_max must be > 0 (the top edge lies in the upper half plane)")


@dataclass(frozen=True)
class CutoffSpec:
    omega_c: float

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError("omega_c must be > 0")


@dataclass
class ModeSumResult:
    """Energy per unit area and per d^2k/(2 pi)^2 at one transverse wavenumber.

    ``energy = mode_part + continuum_part``; ``mode_part`` is the bare
    discrete sum in the cutoff-logarithm form.
    """

    energy: float
    mode_part: float
    continuum_part: float
    error: float
    cutoff: float
    modes: Tuple[ComplexMode, ...] = ()
    reference_modes: Tuple[ComplexMode, ...] = ()
    diagnostics: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# branch handling
# --------------------------------------------------------------------------

def sqrt_down(z):
    """Square root with its cut along the negative imaginary axis.

    Agrees with the principal root for Im z >= 0 and Re z > 0, and keeps
    Im sqrt >= 0 throughout the upper half plane.
    """
    z = np.asarray(z, dtype=complex)
    out = np.exp(0.25j * np.pi) * np.sqrt(-1j * z)
    return out if out.ndim else complex(out)


def _cancel(zeros, poles, tol=1e-9):
    zeros = list(zeros)
    kept = []
    for p in poles:
        d = [abs(z - p) for z in zeros]
        if d and min(d) < tol * max(1.0, abs(p)):
            zeros.pop(int(np.argmin(d)))
        else:
            kept.append(p)
    return np.array(zeros, dtype=complex), np.array(kept, dtype=complex)


class _MediumRoot:
    """kzm(w) = sqrt(eps mu w^2 - k^2) written as a product of sqrt_down
    factors over the zeros and poles of the rational radicand, with the
    overall sign fixed to the physical (Im >= 0) value high on the
    imaginary axis."""

    def __init__(self, mirror: Mirror, k: float):
        try:
            ne, de = mirror.epsilon.rational()
            nm, dm = mirror.mu.rational()
        except TypeError:
            raise ResponseError("mode search needs rational response models") from None
        num = np.polysub(np.polymul([1.0, 0.0, 0.0], np.polymul(ne, nm)),
                         k**2 * np.polymul(de, dm))
        den = np.polymul(de, dm)
        num = np.trim_zeros(num, "f")
        den = np.trim_zeros(den, "f")
        self.lead = complex(num[0] / den[0])
        z = np.roots(num) if len(num) > 1 else np.array([], dtype=complex)
        p = np.roots(den) if len(den) > 1 else np.array([], dtype=complex)
        self.zeros, self.poles = _cancel(z, p)
        pts = list(self.zeros) + list(self.poles)
        ref = 1j * (10.0 + abs(k) + max([abs(x) for x in pts] + [1.0]))
        raw = self._raw(ref)
        phys = np.sqrt(complex(mirror.epsilon.complex(ref) * mirror.mu.complex(ref) * ref**2 - k**2))
        if phys.imag < 0:
            phys = -phys
        self.sign = 1.0 if abs(raw - phys) <= abs(raw + phys) else -1.0

    def _raw(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.sqrt(self.lead) * np.ones_like(w)
        for z in self.zeros:
            out = out * sqrt_down(w - z)
        for p in self.poles:
            out = out / sqrt_down(w - p)
        return out

    def __call__(self, w):
        return self.sign * self._raw(w)

    def branch_points(self):
        return np.concatenate([self.zeros, self.poles])


def _require_identical(cfg: CavityConfig):
    if cfg.mirror1 != cfg.mirror2:
        raise ValueError("the mode formulation is implemented for identical mirrors only")


class _Cavity:
    """All complex-frequency functions for one (cfg, pol, k)."""

    def __init__(self, cfg: CavityConfig, pol, k: float):
        _require_identical(cfg)
        if not k >= 0:
            raise ValueError("k must be >= 0")
        self.cfg = cfg
        self.pol = Polarization(pol)
        self.k = float(k)
        self.L = cfg.L
        m = cfg.mirror1
        self.perfect = isinstance(m, PerfectMirror)
        if self.perfect:
            self.sign = float(np.real(m.reflection_complex(self.pol, 1.0, k)))
            self.kzm = None
            self.resp = None
            return
        self.kzm = _MediumRoot(m, self.k)
        self.resp = m.epsilon if self.pol is Polarization.TM else m.mu
        self.resp_den = self.resp.rational()[1]

    # response and wavenumbers -------------------------------------------
    def R(self, w):
        return np.asarray(self.resp.complex(np.asarray(w, dtype=complex)), dtype=complex)

    def kz(self, w):
        # factorised so that both cuts run straight down from +-k
        w = np.asarray(w, dtype=complex)
        return sqrt_down(w - self.k) * sqrt_down(w + self.k)

    def reflection(self, w):
        if self.perfect:
            return np.full(np.shape(w), self.sign, dtype=complex)
        R, kz, kzm = self.R(w), self.kz(w), self.kzm(w)
        return (R * kz - kzm) / (R * kz + kzm)

    # zero-finding targets --------------------------------------------------
    def N(self, w):
        """Even-in-kz form of the dispersion relation, with the poles of
        R cleared by its rational denominator."""
        w = np.asarray(w, dtype=complex)
        kz2 = w**2 - self.k**2
        kz = np.sqrt(kz2)
        small = np.abs(kz * self.L) < 1e-8
        safe = np.where(small, 1.0, kz)
        sinc = np.where(small, self.L * (1 - kz2 * self.L**2 / 6), np.sin(kz * self.L) / safe)
        cos = np.cos(kz * self.L)
        if self.perfect:
            # r^2 = 1 for either sign
            return sinc
        R, kzm = self.R(w), self.kzm(w)
        d = np.polyval(self.resp_den, w)
        return (-2j * (R**2 * kz2 + kzm**2) * sinc + 4 * R * kzm * cos) * d * d

    def B(self, w):
        """Denominator of r: its zeros are the single-interface surface modes."""
        w = np.asarray(w, dtype=complex)
        d = np.polyval(self.resp_den, w)
        return (self.R(w) * self.kz(w) + self.kzm(w)) * d

    def D(self, w):
        w = np.asarray(w, dtype=complex)
        r = self.reflection(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.exp(-2j * self.kz(w) * self.L) / r**2 - 1.0

    def D_real_axis(self, w):
        """1 - r^2 exp(2 i kz L) on the real axis, approached from above."""
        r = self.reflection(w)
        return 1.0 - r * r * np.exp(2j * self.kz(w) * self.L)

    # geometry ------------------------------------------------------------
    def cut_abscissae(self, with_kz_cut=False):
        xs = []
        if not self.perfect:
            xs = [b.real for b in self.kzm.branch_points() if b.imag < 1e-12]
        if with_kz_cut and self.k > 0:
            xs.append(self.k)
        return sorted(set(round(x, 14) for x in xs))

    def singular_points(self, with_kz_cut=False):
        pts = [0.0]
        if not self.perfect:
            pts += list(self.kzm.branch_points())
            if len(self.resp_den) > 1:
                pts += list(np.roots(self.resp_den))
        if with_kz_cut:
            pts += [self.k, -self.k]
        return [complex(p) for p in pts]

    def scales(self):
        s = [] if self.perfect else list(self.cfg.mirror1.scales())
        return [x for x in s if x > 0]


def dispersion_residual(cfg: CavityConfig, pol, k, omega):
    """D(w) = exp(-2 i kz L) / r^2 - 1 on the downward-cut sheet.

    Its zeros are the round-trip resonances r^2 exp(2 i kz L) = 1 with
    Im kz >= 0 in the upper half plane (time dependence exp(-i w t)).

    Returns ``(value, flag)``; ``flag`` is ``"r=0"`` with an infinite
    value when the reflection coefficient vanishes at the probe point.
    """
    cav = _Cavity(cfg, pol, k)
    r = complex(cav.reflection(complex(omega)))
    if r == 0:
        return complex(np.inf), "r=0"
    return complex(cav.D(complex(omega))), ""


# --------------------------------------------------------------------------
# argument principle
# --------------------------------------------------------------------------

_PHASE_STEP = math.pi / 5


class _BoundaryRoot(Exception):
    pass


def _edge_samples(a, b, n, singular):
    """Parameters t in [0, 1] along the edge a -> b: a uniform base grid
    plus geometric grading toward the foot of every singular point, so
    that a zero or pole close to the edge cannot alias a full turn."""
    ts = [np.linspace(0.0, 1.0, n + 1)]
    ab = b - a
    length = abs(ab)
    for s in singular:
        t0 = ((s - a) * np.conj(ab)).real / length**2
        dist = abs(s - (a + ab * min(max(t0, 0.0), 1.0))) / length
        t0 = min(max(t0, 0.0), 1.0)
        steps = max(dist, 1e-15) * 0.5 * 2.0 ** np.arange(0, 60)
        steps = steps[steps < 1.0]
        ts.append(np.clip(np.concatenate([[t0], t0 - steps, t0 + steps]), 0.0, 1.0))
    return np.unique(np.concatenate(ts))


def _edge_trace(F, a, b, n, singular):
    """Samples (z, F(z)) along a -> b, fine enough to follow arg F.

    Intervals are bisected until the phase step is small and the midpoint
    value agrees with linear interpolation; the second test catches zeros
    (including near-double ones) passing between two samples."""
    t = _edge_samples(a, b, n, singular)
    f = F(a + (b - a) * t)
    for _ in range(41):
        if np.any(~np.isfinite(f)) or np.any(f == 0):
            raise _BoundaryRoot
        tm = 0.5 * (t[:-1] + t[1:])
        fm = F(a + (b - a) * tm)
        if np.any(~np.isfinite(fm)) or np.any(fm == 0):
            raise _BoundaryRoot
        fa, fb = f[:-1], f[1:]
        ok = ((np.abs(np.angle(fb / fa)) < _PHASE_STEP)
              & (np.abs(fm - 0.5 * (fa + fb)) <= 0.25 * np.minimum(np.abs(fa), np.abs(fb))))
        if np.all(ok):
            tt = np.empty(2 * t.size - 1)
            ff = np.empty(2 * t.size - 1, dtype=complex)
            tt[::2], tt[1::2] = t, tm
            ff[::2], ff[1::2] = f, fm
            return a + (b - a) * tt, ff
        # unresolvable (F at roundoff level next to a root cluster)
        if t.size > 20000 or np.min(np.diff(t)[~ok]) < 1e-13:
            raise _BoundaryRoot
        t = np.insert(t, np.flatnonzero(~ok) + 1, tm[~ok])
        f = np.insert(f, np.flatnonzero(~ok) + 1, fm[~ok])
    raise _BoundaryRoot


def _edge_phase(F, a, b, n, singular):
    """Total change of arg F along a -> b."""
    _, f = _edge_trace(F, a, b, n, singular)
    return float(np.sum(np.angle(f[1:] / f[:-1])))


def _corners(x0, x1, y0, y1):
    c = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    return list(zip(c, c[1:] + c[:1]))


def _winding(F, x0, x1, y0, y1, n, singular=()):
    total = 0.0
    for a, b in _corners(x0, x1, y0, y1):
        total += _edge_phase(F, a, b, n, singular)
    w = total / (2 * math.pi)
    if abs(w - round(w)) > 1e-3:
        raise _BoundaryRoot
    return int(round(w))


def _cluster_centroid(F, z0, size, w, n, singular):
    """Mean of the w roots near z0 from the contour moment
    (1/2 pi i) oint z F'/F dz, taken on the widest box around z0 that
    still encloses exactly w roots."""
    for grow in (1e3, 1e2, 1e1, 1.0):
        h = 0.5 * size * grow
        try:
            moment, phase = 0j, 0.0
            for a, b in _corners(z0.real - h, z0.real + h, z0.imag - h, z0.imag + h):
                z, f = _edge_trace(F, a, b, n, singular)
                dlog = np.log(f[1:] / f[:-1])
                moment += np.sum(0.5 * (z[1:] + z[:-1]) * dlog)
                phase += float(np.sum(dlog.imag))
        except _BoundaryRoot:
            continue
        if round(phase / (2 * math.pi)) == w:
            return moment / (2j * math.pi * w)
    return z0


def _newton(F, z, lo, hi, tol=1e-14, maxit=100):
    """Damped Newton iteration confined to the box [lo, hi].

    The difference step scales with the box, which keeps it clear of
    branch points sitting just outside a strip edge.  Returns None on
    failure."""
    size = max(hi.real - lo.real, hi.imag - lo.imag)
    for _ in range(maxit):
        h = min(1e-7 * max(1.0, abs(z)), 1e-4 * size)
        f = complex(F(np.array([z]))[0])
        if f == 0:
            return z
        df = complex((F(np.array([z + h]))[0] - F(np.array([z - h]))[0]) / (2 * h))
        if df == 0 or not np.isfinite(df):
            return None
        full = f / df
        step = full
        for _ in range(30):
            znew = z - step
            if lo.real <= znew.real <= hi.real and lo.imag <= znew.imag <= hi.imag:
                break
            step *= 0.5
        else:
            return None
        z = znew
        if abs(full) < tol * max(1.0, abs(z)):
            return z
    return None


def _nudged_winding(F, x0, x1, y0, y1, n, singular, fixed=()):
    """Winding number, shifting movable edges slightly if a root or branch
    point sits on the boundary.  Returns the (possibly shifted) box."""
    w_ = x1 - x0
    h_ = y1 - y0
    for attempt in range(12):
        try:
            return _winding(F, x0, x1, y0, y1, n * (1 + attempt // 3), singular), (x0, x1, y0, y1)
        except _BoundaryRoot:
            delta = 1e-3 * (attempt + 1) * 0.7
            if "x0" not in fixed:
                x0 += delta * w_
            if "x1" not in fixed:
                x1 -= delta * w_ * 0.61
            if "y0" not in fixed:
                y0 += delta * h_ * 0.83
            if "y1" not in fixed:
                y1 -= delta * h_ * 0.37
    raise ModeSearchError("could not place a root-free contour", rectangle=(x0, x1, y0, y1))


def _roots_in_strip(F, x0, x1, y0, y1, n, max_depth, singular):
    w_total, (x0, x1, y0, y1) = _nudged_winding(F, x0, x1, y0, y1, n, singular)
    if w_total < 0:
        raise ModeSearchError(f"negative winding {w_total}: poles inside the search strip",
                              rectangle=(x0, x1, y0, y1))
    found = []
    stack = [(x0, x1, y0, y1, w_total, 0)]
    while stack:
        a, b, c, d, w, depth = stack.pop()
        if w == 0:
            continue
        size = max(b - a, d - c)
        if w == 1 or size < 1e-11 * max(1.0, abs(complex(a, c))):
            z0 = complex(0.5 * (a + b), 0.5 * (c + d))
            z = _newton(F, z0, complex(a, c), complex(b, d))
            if z is not None and a <= z.real <= b and c <= z.imag <= d:
                found.append((z, w))
                continue
            if size < 1e-11 * max(1.0, abs(z0)):
                if z is None:
                    raise ModeSearchError("Newton failed in a minimal rectangle", rectangle=(a, b, c, d))
                found.append((z, w))
                continue
        z0 = complex(0.5 * (a + b), 0.5 * (c + d))
        # numerically degenerate cluster (e.g. coupled plasmons at large kL,
        # where single roots are only determined to roundoff):
        # keep it as one root of multiplicity w
        cluster = size < 1e-6 * max(1.0, abs(z0))
        if depth > max_depth:
            if cluster:
                found.append((_cluster_centroid(F, z0, size, w, n, singular), w))
                continue
            raise ModeSearchError(f"winding {w} unresolved after {depth} subdivisions",
                                  rectangle=(a, b, c, d))
        # split the longer side slightly off-centre
        if b - a >= d - c:
            m = a + (b - a) * 0.5137
            parts = [(a, m, c, d), (m, b, c, d)]
        else:
            m = c + (d - c) * 0.4871
            parts = [(a, b, c, m), (a, b, m, d)]
        children = []
        for frac in (0.0, 0.013, -0.021, 0.034):
            try:
                if b - a >= d - c:
                    m = a + (b - a) * (0.5137 + frac)
                    parts = [(a, m, c, d), (m, b, c, d)]
                else:
                    m = c + (d - c) * (0.4871 + frac)
                    parts = [(a, b, c, m), (a, b, m, d)]
                children = [(p, _winding(F, *p, n, singular)) for p in parts]
                break
            except _BoundaryRoot:
                children = []
        if not children and cluster:
            found.append((_cluster_centroid(F, z0, size, w, n, singular), w))
            continue
        if not children:
            raise ModeSearchError("could not split rectangle without hitting a root",
                                  rectangle=(a, b, c, d))
        if sum(cw for _, cw in children) != w:
            raise ModeSearchError(
                f"winding mismatch: {w} != {[cw for _, cw in children]}", rectangle=(a, b, c, d))
        for p, cw in children:
            stack.append((*p, cw, depth + 1))
    if sum(m for _, m in found) != w_total:
        raise ModeSearchError(f"found {len(found)} roots for winding {w_total}",
                              rectangle=(x0, x1, y0, y1))
    return found


def _strips(x_lo, x_hi, cuts, gap):
    edges = [x_lo] + [c for c in cuts if x_lo < c < x_hi] + [x_hi]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        lo = a + (gap if a != x_lo else 0.0)
        hi = b - (gap if b != x_hi else 0.0)
        if hi > lo:
            out.append((lo, hi))
    return out


def _search(F, cav, region: SearchRegion, with_kz_cut):
    re_min = region.re_min if region.re_min is not None else 1e-7 * region.re_max
    gap = 1e-9 * max(1.0, region.re_max)
    top = region.im_max if region.im_max is not None else min(0.05 * region.re_max, 0.5 / cav.L)
    roots = []
    for a, b in _strips(re_min, region.re_max, cav.cut_abscissae(with_kz_cut), gap):
        roots += _roots_in_strip(F, a, b, region.im_min, top,
                                 region.n_boundary, region.max_depth,
                                 cav.singular_points(with_kz_cut))
    return roots


def default_region(cfg: CavityConfig, k: float, cutoff: Optional[float] = None) -> SearchRegion:
    """Region covering the plasmonic and guided bands plus the first
    leaky resonances above the bulk threshold."""
    s = [x for x in cfg.mirror1.scales() if x > 0] if not isinstance(cfg.mirror1, PerfectMirror) else []
    top = math.hypot(k, max(s) if s else 0.0)
    re_max = 1.5 * max(top, k, 1e-300) + 6.0 / cfg.L
    if s:
        re_max = min(re_max, max(1.5 * top, 4.0 * max(s)) + 6.0 / cfg.L)
    if cutoff is not None:
        re_max = min(re_max, 0.999 * cutoff)
    damp = max(s) if s else 0.0
    im_min = -min(max(0.5 / cfg.L, 0.1 * damp), 0.5 * re_max)
    return SearchRegion(re_max=re_max, im_min=im_min)


def find_modes(cfg: CavityConfig, pol, k: float, region: Optional[SearchRegion] = None) -> List[ComplexMode]:
    """All zeros of the dispersion relation in ``region``.

    Roots are enumerated by rectangle subdivision on the argument
    principle and polished by Newton iteration; the number of returned
    roots (with multiplicity) always equals the winding number of the
    strip contours.  Modes are sorted by Re w.
    """
    cav = _Cavity(cfg, pol, k)
    region = region or default_region(cfg, k)
    raw = _search(cav.N, cav, region, with_kz_cut=False)
    modes = []
    for z, mult in sorted(raw, key=lambda t: (t[0].real, t[0].imag)):
        # a degenerate cluster is only located to the contour-moment accuracy
        if mult == 1:
            z = _polish_on_D(cav, z)
        tol = (1e-10 if mult == 1 else 1e-8) * max(1.0, abs(z))
        if z.imag > tol and not _flat_to_real_axis(cav, z):
            raise ModeSearchError(f"gain mode at {z}: non-passive response")
        if z.imag > 0:
            z = complex(z.real, 0.0)
        res = abs(complex(cav.D(z)))
        modes.append(ComplexMode(omega=complex(z), k=float(k), pol=cav.pol,
                                 branch_index=len(modes), residual=float(res),
                                 multiplicity=int(mult)))
    return modes


def _flat_to_real_axis(cav, z, rel=1e-6):
    """True when a root slightly above the axis is a near-double real root
    whose position is only known to sqrt(noise): D is as small on the axis."""
    if z.imag > rel * max(1.0, abs(z)):
        return False
    f, g = abs(complex(cav.D(z))), abs(complex(cav.D(complex(z.real, 0.0))))
    return np.isfinite(g) and g <= max(1e-9, 10 * f)


def _polish_on_D(cav, z):
    """A few Newton steps on D itself, which is what the residual reports.
    Steps are only kept while they reduce |D|."""
    if cav.perfect:
        return z
    dist = min([abs(z - p) for p in cav.singular_points(True)] + [abs(z)])
    f = complex(cav.D(z))
    for _ in range(4):
        if not np.isfinite(f) or abs(f) < 1e-13:
            break
        h = min(1e-7 * max(1.0, abs(z)), 1e-3 * dist)
        df = complex((cav.D(z + h) - cav.D(z - h)) / (2 * h))
        if df == 0 or not np.isfinite(df):
            break
        znew = z - f / df
        fnew = complex(cav.D(znew))
        if not abs(fnew) < abs(f) or abs(znew - z) > 0.1 * dist:
            break
        z, f = znew, fnew
    return z


def surface_modes(cfg: CavityConfig, pol, k: float, region: Optional[SearchRegion] = None) -> List[ComplexMode]:
    """Zeros of the Fresnel denominator of one interface (the L -> inf limit
    of the coupled plasmon pair)."""
    cav = _Cavity(cfg, pol, k)
    if cav.perfect:
        return []
    region = region or default_region(cfg, k)
    raw = _search(cav.B, cav, region, with_kz_cut=True)
    out = []
    for z, mult in sorted(raw, key=lambda t: t[0].real):
        if z.imag > 1e-12:
            raise ModeSearchError(f"gain surface mode at {z}: non-passive response")
        out.append(ComplexMode(omega=complex(z), k=float(k), pol=cav.pol, branch_index=len(out),
                               residual=float(abs(complex(cav.B(z)))), multiplicity=int(mult)))
    return out


# --------------------------------------------------------------------------
# mode-sum energy
# --------------------------------------------------------------------------

def cutoff_weight(omega, omega_c):
    """1/2 Re[w - (2i/pi) w log(w/w_c)], principal logarithm."""
    w = complex(omega)
    return 0.5 * (w - (2j / math.pi) * w * np.log(w / omega_c)).real


def _xlogx(z):
    return z * np.log(z) if z != 0 else 0.0


def _pair_integral(z, W):
    """(1/2 pi) Im int_0^W [log(w - z) + log(w + conj z)] dw along the
    real axis, for Im z <= 0.  Tends to cutoff_weight(z, W) for large W."""
    x, y = z.real, abs(z.imag)
    val = (_xlogx(complex(W - x, y)) - _xlogx(complex(-x, y))
           + _xlogx(complex(W + x, y)) - _xlogx(complex(x, y)))
    return val.imag / (2 * math.pi)


def _real_axis_panels(breaks, W, L, s_min, per_panel_width):
    """Panel edges on [0, W]: width grows like 0.05 w away from the origin,
    capped by the gap phase scale, with geometric grading into every
    breakpoint."""
    breaks = sorted({0.0, W} | {b for b in breaks if 0 < b < W})
    edges = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        h = b - a
        d = min(0.25 * h, 0.05 * max(a, s_min))
        # stop grading well above the float resolution at the breakpoint
        floor = 1e-11 * max(1.0, abs(b))
        steps = [d * 0.2**j for j in range(16) if d * 0.2**j > floor]
        grade_lo = [a + t for t in steps][::-1]
        grade_hi = [b - t for t in steps]
        mid = [a + d]
        while mid[-1] < b - d:
            step = per_panel_width * min(1.0 / max(L, 1e-300), 0.05 * max(mid[-1], s_min),
                                         0.25 * h)
            mid.append(min(mid[-1] + step, b - d))
        edges += [a] + grade_lo + mid + grade_hi
    edges.append(W)
    return np.unique(np.asarray(edges))


def _gauss_on(edges, npts):
    g, gw = np.polynomial.legendre.leggauss(npts)
    c = 0.5 * (edges[:-1] + edges[1:])
    h = 0.5 * np.diff(edges)
    return (c[:, None] + h[:, None] * g).ravel(), (h[:, None] * gw).ravel()


def _continuum_phase_integral(cav, W, modes, refs, edges, npts):
    x, wts = _gauss_on(edges, npts)
    # D vanishes like kz at w = k; its phase (pi/2 below k, 0 above) is added
    # back analytically
    Q = cav.D_real_axis(x + 0j) / cav.kz(x + 0j)
    kz_term = 0.25 * min(cav.k, W)
    anchor = 0.0
    for m in modes:
        z = complex(m.omega.real, -abs(m.omega.imag))
        for _ in range(m.multiplicity):
            Q = Q / ((x - z) * (x + np.conj(z)))
            anchor -= np.angle(W - z) + np.angle(W + np.conj(z))
    for m in refs:
        z = complex(m.omega.real, -abs(m.omega.imag))
        for _ in range(m.multiplicity):
            Q = Q * ((x - z) * (x + np.conj(z)))
            anchor += np.angle(W - z) + np.angle(W + np.conj(z))
    if not np.all(np.isfinite(Q)):
        raise ModeSearchError("non-finite dispersion function on the real axis")
    wW = np.array([W + 0j])
    anchor += float(np.angle(complex((cav.D_real_axis(wW) / cav.kz(wW))[0])))
    ph = np.unwrap(np.angle(Q)[::-1])[::-1]
    ph += 2 * math.pi * round((anchor - ph[-1]) / (2 * math.pi))
    return float(wts @ ph) / (2 * math.pi) + kz_term, x, ph


def _default_cutoff(cav) -> float:
    s = cav.scales()
    if not s:
        raise ValueError("mode-sum energy needs dispersive mirrors (a finite transparency scale)")
    return 2.0 * cav.k + 100.0 * max(s)


def _energy_one_pol(cfg, pol, k, omega_c, region, rtol):
    cav = _Cavity(cfg, pol, k)
    if cav.perfect:
        raise ValueError("perfect mirrors have no transparency cutoff; use lifshitz.energy_zero_T")
    W = float(omega_c) if omega_c is not None else _default_cutoff(cav)
    reg = region or default_region(cfg, k, W)
    modes = [m for m in find_modes(cfg, pol, k, reg) if 0 < m.omega.real < W]
    refs = [m for m in surface_modes(cfg, pol, k, reg) if 0 < m.omega.real < W]
    # identical mirrors: r^2 has a double pole at each surface mode
    refs = [ComplexMode(m.omega, m.k, m.pol, m.branch_index, m.residual, 2 * m.multiplicity)
            for m in refs]
    breaks = {k} | {c for c in cav.cut_abscissae()}
    s_min = min(cav.scales() + [k if k > 0 else 1.0, 1.0 / cfg.L])
    width = 1.0
    for _ in range(4):
        edges = _real_axis_panels(breaks, W, cfg.L, s_min, width)
        fine, x, ph = _continuum_phase_integral(cav, W, modes, refs, edges, 20)
        coarse, _, _ = _continuum_phase_integral(cav, W, modes, refs, edges, 10)
        scale = float(np.sum(np.abs(ph)) / max(ph.size, 1)) * W / (2 * math.pi)
        err = abs(fine - coarse)
        if err <= rtol * max(scale, 1e-300):
            break
        width *= 0.5
    else:
        raise ModeSearchError(
            f"continuum integral unresolved (error {err:.3g}); a near-axis mode is probably "
            f"outside the search region {reg}")
    pairs = sum(m.multiplicity * _pair_integral(m.omega, W) for m in modes)
    pairs -= sum(m.multiplicity * _pair_integral(m.omega, W) for m in refs)
    mode_part = sum(m.multiplicity * cutoff_weight(m.omega, W) for m in modes)
    mode_part -= sum(m.multiplicity * cutoff_weight(m.omega, W) for m in refs)
    energy = fine + pairs
    sum_rule = sum(m.multiplicity * m.omega.imag for m in modes) - sum(
        m.multiplicity * m.omega.imag for m in refs)
    return energy, mode_part, err, modes, refs, sum_rule, W


def reference_gap(L: float, k: float) -> float:
    """Decoupling reference gap max(20 L, 50 / k)."""
    return max(20.0 * L, 50.0 / k) if k > 0 else 20.0 * L


def mode_sum_energy_density(cfg: CavityConfig, k: float, cutoff: Optional[CutoffSpec] = None,
                            L_ref: Optional[float] = None, pol=None,
                            region: Optional[SearchRegion] = None, rtol: float = 1e-9,
                            verify_cutoff: bool = False) -> ModeSumResult:
    """Mode-sum energy at transverse wavenumber k, summed over polarizations
    unless ``pol`` is given.

    With ``L_ref=None`` the decoupled limit is taken exactly (the coupled
    modes are measured against the single-interface surface modes and the
    continuum term vanishes as L -> inf).  A finite ``L_ref`` subtracts the
    same quantity evaluated at that gap instead.  Missing near-axis modes
    show up as an unresolved continuum phase and raise ModeSearchError.
    """
    if cfg.T != 0:
        raise ValueError("the mode sum is a zero-temperature formula")
    pols = [Polarization(pol)] if pol is not None else [Polarization.TM, Polarization.TE]
    wc = cutoff.omega_c if cutoff is not None else None
    energy = mode_part = err = sum_rule = 0.0
    modes, refs = [], []
    used_cutoff = None
    for p in pols:
        e, mp, er, ms, rs, sr, used_cutoff = _energy_one_pol(cfg, p, k, wc, region, rtol)
        energy += e
        mode_part += mp
        err += er
        sum_rule += sr
        modes += ms
        refs += rs
    diagnostics = {"imaginary_part_defect": sum_rule}
    if L_ref is not None:
        if not L_ref > cfg.L:
            raise ValueError("L_ref must exceed L")
        ref = mode_sum_energy_density(cfg.with_gap(L_ref), k, CutoffSpec(used_cutoff), None,
                                      pol, None, rtol)
        energy -= ref.energy
        mode_part -= ref.mode_part
        err += ref.error
        diagnostics["reference_energy"] = ref.energy
    if verify_cutoff:
        hi = mode_sum_energy_density(cfg, k, CutoffSpec(10 * used_cutoff), L_ref, pol, None, rtol)
        drift = abs(hi.energy - energy)
        diagnostics["cutoff_drift"] = drift
        if drift > 1e-6 * abs(energy) + 10 * (err + hi.error):
            near = sorted(modes, key=lambda m: abs(m.omega.imag))[:3]
            raise CutoffDependenceError(
                f"energy changed by {drift:.3g} between w_c={used_cutoff:g} and {10 * used_cutoff:g}; "
                f"check modes near {[m.omega for m in near]}", suspects=near)
    return ModeSumResult(energy=energy, mode_part=mode_part, continuum_part=energy - mode_part,
                         error=err, cutoff=used_cutoff, modes=tuple(modes),
                         reference_modes=tuple(refs), diagnostics=diagnostics)


def mode_sum_energy(cfg: CavityConfig, n_k: int = 48, k_range: Optional[Tuple[float, float]] = None,
                    rtol: float = 1e-9) -> Tuple[float, float]:
    """Energy per unit area, (1/2 pi) int k dk E_k, by Gauss-Legendre in ln k.

    Returns ``(energy, estimated_error)``; the error combines the per-k
    continuum estimates with a half-resolution rerun of the k rule.
    """
    L = cfg.L
    lo, hi = k_range if k_range is not None else (1e-4 / L, 40.0 / L)
    u_lo, u_hi = math.log(lo), math.log(hi)
    cache = {}

    def integrand(u):
        if u not in cache:
            kk = math.exp(u)
            r = mode_sum_energy_density(cfg, kk, rtol=rtol)
            cache[u] = (kk * kk * r.energy / (2 * math.pi), r.error * kk * kk / (2 * math.pi))
        return cache[u]

    def rule(n):
        n_panels = max(1, n // 12)
        g, gw = np.polynomial.legendre.leggauss(12)
        e = np.linspace(u_lo, u_hi, n_panels + 1)
        total = err = 0.0
        for a, b in zip(e[:-1], e[1:]):
            for xg, wg in zip(g, gw):
                u = 0.5 * (a + b) + 0.5 * (b - a) * xg
                v, ev = integrand(u)
                total += 0.5 * (b - a) * wg * v
                err += 0.5 * (b - a) * wg * ev
        return total, err

    fine, err = rule(n_k)
    coarse, _ = rule(max(12, n_k // 2))
    return fine, err + abs(fine - coarse)


# --------------------------------------------------------------------------
# short-distance plasmon approximation
# --------------------------------------------------------------------------

def plasmon_frequencies(p: DrudeParams, k: float, L: float) -> Tuple[complex, complex]:
    """Coupled surface plasmons of two identical Drude half-spaces in the
    non-retarded limit, (w_+, w_-)."""
    wp, g = p.plasma_frequency, p.damping
    e = math.exp(-k * L)
    out = []
    for s in (1.0, -1.0):
        rad = complex(wp**2 * (1 + s * e) - 0.5 * g**2)
        out.append(np.sqrt(rad) / math.sqrt(2.0) - 0.5j * g)
    if (wp**2 * (1 - e) - 0.5 * g**2) < 0:
        warnings.warn("w_- is overdamped at this kL (negative radicand)", RuntimeWarning)
    return complex(out[0]), complex(out[1])


def plasmon_force_short_distance(p: DrudeParams, L: float) -> float:
    """Short-distance pressure of two identical Drude mirrors to first order
    in the damping (attractive positive)."""
    wp, g = p.plasma_frequency, p.damping
    if wp * L > 0.1:
        warnings.warn(f"w_p L = {wp * L:.3g} is not small; the plasmon formula is a "
                      "short-distance approximation", RuntimeWarning)
    return (ALPHA_PLASMON * wp / (2 * math.pi) - GAMMA_COEFFICIENT * g) * math.pi**2 / (240.0 * L**3)
