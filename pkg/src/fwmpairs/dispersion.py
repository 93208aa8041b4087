"""Chromatic dispersion model for a step-index few-mode PM fiber.

Effective indices are built in two layers:

1. A scalar weakly-guiding LP mode solver on top of Sellmeier material
   models (fused-silica cladding, germania-doped core).  This carries all
   wavelength dependence.
2. Additive birefringence overlays: the polarization birefringence
   ``delta_pol`` (slow minus fast axis), the parity birefringence
   ``delta_parity`` (odd minus even LP11), and the parity-birefringence
   dispersion ``delta_parity_dispersion`` which lowers the parity term
   seen by the long-wavelength (signal) photon.

All wavelengths in this module are in micrometres.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import jv, kv

from .errors import ConfigError, DomainError, ModeNotGuidedError

# Malitson-form 3-term Sellmeier, (B_i, C_i) with C_i in um
FUSED_SILICA_SELLMEIER = (
    (0.6961663, 0.0684043),
    (0.4079426, 0.1162414),
    (0.8974794, 9.896161),
)
# Pure GeO2 endpoint used for the binary-mix core model
GEO2_SELLMEIER = (
    (0.80686642, 0.068972606),
    (0.71815848, 0.15396605),
    (0.85416831, 11.841931),
)

SELLMEIER_RANGE_UM = (0.21, 3.7)

# First Bessel zeros bounding the LP root brackets
_J0_ZERO = 2.404825557695773
_J1_ZERO = 3.8317059702075125

LP11_CUTOFF_V = _J0_ZERO

LP_LABELS = ("LP01", "LP11")
_LP_AZIMUTHAL = {"LP01": 0, "LP11": 1}

# Wavelength at which the core doping is calibrated against the nominal NA
NA_REFERENCE_UM = 0.620


def _sellmeier(lam_um: np.ndarray, coeffs) -> np.ndarray:
    l2 = lam_um**2
    s = np.zeros_like(l2)
    for b, c in coeffs:
        s += b * l2 / (l2 - c**2)
    return np.sqrt(1.0 + s)


def _check_range(lam_um: np.ndarray) -> None:
    lo, hi = SELLMEIER_RANGE_UM
    if np.any(lam_um < lo) or np.any(lam_um > hi):
        raise DomainError(
            f"wavelength outside Sellmeier validity range "
            f"[{lo}, {hi}] um"
        )


def material_index(lam_um) -> np.ndarray | float:
    """Cladding (fused silica) refractive index at ``lam_um``.

    Raises DomainError outside the model validity range
    ``SELLMEIER_RANGE_UM``.
    """
    lam = np.asarray(lam_um, dtype=float)
    _check_range(lam)
    n = _sellmeier(lam, FUSED_SILICA_SELLMEIER)
    return float(n) if np.isscalar(lam_um) else n


@lru_cache(maxsize=64)
def _geo2_fraction(numerical_aperture: float, reference_um: float) -> float:
    """Molar GeO2 fraction whose binary-mix core reproduces the nominal
    NA against a silica cladding at the reference wavelength."""
    n_cl = _sellmeier(np.asarray(reference_um), FUSED_SILICA_SELLMEIER)
    target = float(np.sqrt(n_cl**2 + numerical_aperture**2))

    def core_at(x):
        mix = tuple(
            (b + x * (bg - b), c + x * (cg - c))
            for (b, c), (bg, cg) in zip(FUSED_SILICA_SELLMEIER, GEO2_SELLMEIER)
        )
        return float(_sellmeier(np.asarray(reference_um), mix))

    lo, hi = 0.0, 0.6
    if not core_at(lo) <= target <= core_at(hi):
        raise DomainError(
            f"numerical aperture {numerical_aperture} outside the range "
            "reachable by GeO2 doping"
        )
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if core_at(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class FiberSpec:
    """Geometry, birefringence and segment layout of the fiber.

    Parameters
    ----------
    core_radius_um : float
        Step-index core radius, > 0.
    numerical_aperture : float
        Nominal NA in (0, 1); anchors the core index model at
        ``NA_REFERENCE_UM``.
    delta_pol : float
        Polarization birefringence, slow (x) minus fast (y) index.
    delta_parity : float
        Parity birefringence, odd minus even LP11 index (>= 0).
    delta_parity_dispersion : float
        Difference between the short-wavelength (idler) and
        long-wavelength (signal) parity birefringences; the signal-side
        parity term is ``delta_parity - delta_parity_dispersion``.
    segments : tuple of (length_m, axis_swapped)
        Ordered fiber segments; ``axis_swapped`` marks a cross-spliced
        segment whose slow axis is rotated 90 degrees.
    core_model : str
        "ge_doped" (default): germania-doped binary Sellmeier core whose
        doping is calibrated to the NA at ``NA_REFERENCE_UM``.
        "na_offset": n_core = sqrt(n_clad^2 + NA^2) with constant NA.
    """

    core_radius_um: float = 1.74
    numerical_aperture: float = 0.17
    delta_pol: float = 2.37e-4
    delta_parity: float = 4.41e-4
    delta_parity_dispersion: float = 3.0e-5
    segments: tuple = ((0.10, False),)
    core_model: str = "ge_doped"

    def __post_init__(self):
        if not self.core_radius_um > 0:
            raise ConfigError("core_radius_um must be > 0")
        if not 0 < self.numerical_aperture < 1:
            raise ConfigError("numerical_aperture must be in (0, 1)")
        if self.delta_parity < 0:
            raise ConfigError("delta_parity must be >= 0 (odd is slower)")
        if len(self.segments) < 1:
            raise ConfigError("at least one fiber segment is required")
        for length_m, _ in self.segments:
            if not length_m > 0:
                raise ConfigError("segment lengths must be > 0")
        if self.core_model not in ("ge_doped", "na_offset"):
            raise ConfigError(f"unknown core_model {self.core_model!r}")
        object.__setattr__(
            self, "segments",
            tuple((float(L), bool(sw)) for L, sw in self.segments),
        )

    @property
    def total_length_m(self) -> float:
        return sum(L for L, _ in self.segments)

    def cladding_index(self, lam_um) -> np.ndarray:
        lam = np.asarray(lam_um, dtype=float)
        _check_range(lam)
        return _sellmeier(lam, FUSED_SILICA_SELLMEIER)

    def core_index(self, lam_um) -> np.ndarray:
        lam = np.asarray(lam_um, dtype=float)
        _check_range(lam)
        if self.core_model == "na_offset":
            n_cl = _sellmeier(lam, FUSED_SILICA_SELLMEIER)
            return np.sqrt(n_cl**2 + self.numerical_aperture**2)
        x = _geo2_fraction(self.numerical_aperture, NA_REFERENCE_UM)
        mix = tuple(
            (b + x * (bg - b), c + x * (cg - c))
            for (b, c), (bg, cg) in zip(FUSED_SILICA_SELLMEIER, GEO2_SELLMEIER)
        )
        return _sellmeier(lam, mix)

    def v_number(self, lam_um) -> np.ndarray:
        lam = np.asarray(lam_um, dtype=float)
        na = np.sqrt(self.core_index(lam) ** 2 - self.cladding_index(lam) ** 2)
        return 2.0 * np.pi * self.core_radius_um * na / lam


@dataclass(frozen=True)
class ModeSolution:
    """One root of the LP eigenvalue equation."""

    n_eff: float
    u: float
    w: float
    v_number: float
    lp_label: str


@dataclass(frozen=True)
class ModeRole:
    """What a wave does in the cross-polarized scheme.

    parity: 'e', 'o' or 'g'; photon: 'pump', 'signal' or 'idler'.  The
    polarization axis is implied: the pump rides the slow (x) axis, the
    signal and idler the fast (y) axis.
    """

    parity: str
    photon: str

    def __post_init__(self):
        if self.parity not in ("e", "o", "g"):
            raise ConfigError(f"unknown parity label {self.parity!r}")
        if self.photon not in ("pump", "signal", "idler"):
            raise ConfigError(f"unknown photon role {self.photon!r}")

    @property
    def polarization_axis(self) -> str:
        return "x_slow" if self.photon == "pump" else "y_fast"

    @property
    def lp_label(self) -> str:
        return "LP01" if self.parity == "g" else "LP11"


def _solve_u_array(v: np.ndarray, azimuthal: int) -> np.ndarray:
    """Bracketed bisection for the LP characteristic equation.

    Solves u * J_{l+1}(u)/J_l(u) = w * K_{l+1}(w)/K_l(w) with
    w = sqrt(V^2 - u^2), on the fundamental branch of each label.
    """
    l = azimuthal
    if l == 0:
        lo = np.full_like(v, 1e-9)
        hi = np.minimum(v, _J0_ZERO) * (1 - 1e-12) - 1e-12
    else:
        lo = np.full_like(v, _J0_ZERO + 1e-12)
        hi = np.minimum(v, _J1_ZERO) - 1e-12

    def resid(u):
        w = np.sqrt(np.maximum(v**2 - u**2, 1e-300))
        return u * jv(l + 1, u) / jv(l, u) - w * kv(l + 1, w) / kv(l, w)

    f_lo = resid(lo)
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        f_mid = resid(mid)
        same = np.signbit(f_mid) == np.signbit(f_lo)
        lo = np.where(same, mid, lo)
        f_lo = np.where(same, f_mid, f_lo)
        hi = np.where(same, hi, mid)
        if np.max(hi - lo) < 1e-13:
            break
    return 0.5 * (lo + hi)


def lp_effective_index(fiber: FiberSpec, lam_um, lp_label: str) -> np.ndarray:
    """Vectorized base effective index of an LP mode (no birefringence).

    Raises ModeNotGuidedError if LP11 is below cutoff anywhere in
    ``lam_um``.
    """
    if lp_label not in LP_LABELS:
        raise ConfigError(f"unknown LP label {lp_label!r}")
    lam = np.atleast_1d(np.asarray(lam_um, dtype=float))
    _check_range(lam)
    v = fiber.v_number(lam)
    l = _LP_AZIMUTHAL[lp_label]
    if l == 1 and np.any(v <= LP11_CUTOFF_V):
        v_bad = float(np.min(v))
        raise ModeNotGuidedError(
            f"mode not guided: LP11 requires V > {LP11_CUTOFF_V:.4f}, "
            f"got V = {v_bad:.4f}",
            v_number=v_bad,
        )
    u = _solve_u_array(v, l)
    k = 2.0 * np.pi / lam
    n_eff = np.sqrt(fiber.core_index(lam) ** 2 - (u / (k * fiber.core_radius_um)) ** 2)
    return n_eff


def solve_lp_mode(fiber: FiberSpec, lam_um: float, lp_label: str) -> ModeSolution:
    """Solve the LP eigenvalue problem at one wavelength.

    Returns the root with the largest effective index for the label;
    the returned (u, w) satisfy u^2 + w^2 = V^2.
    """
    n_eff = float(lp_effective_index(fiber, lam_um, lp_label)[0])
    v = float(fiber.v_number(np.asarray(lam_um, dtype=float)))
    k = 2.0 * np.pi / lam_um
    n_core = float(fiber.core_index(np.asarray(lam_um, dtype=float)))
    u = k * fiber.core_radius_um * np.sqrt(n_core**2 - n_eff**2)
    w = np.sqrt(max(v**2 - u**2, 0.0))
    return ModeSolution(n_eff=n_eff, u=float(u), w=float(w),
                        v_number=v, lp_label=lp_label)


def parity_birefringence(fiber: FiberSpec, photon: str) -> float:
    """Parity birefringence seen by one photon role.

    The idler (short-wavelength) side carries the full ``delta_parity``;
    the signal side is reduced by ``delta_parity_dispersion``, which is
    the observable difference between the two.  The pump sits at the
    idler-side reference.
    """
    if photon == "signal":
        return fiber.delta_parity - fiber.delta_parity_dispersion
    return fiber.delta_parity


def birefringence_offset(fiber: FiberSpec, role: ModeRole,
                         axis_swapped: bool = False) -> float:
    """Additive index correction of a wave on top of its base LP index.

    In an unswapped segment the pump (slow axis) gains ``delta_pol`` and
    odd-parity waves gain their role's parity birefringence.  In an
    axis-swapped (cross-spliced) segment the roles flip: the pump loses
    the slow-axis term to the signal/idler, and the lab-frame parity is
    read against rotated stress axes, so 'e' and 'o' exchange their
    parity terms.
    """
    lab_parity = role.parity
    seg_parity = lab_parity
    if axis_swapped and lab_parity in ("e", "o"):
        seg_parity = "o" if lab_parity == "e" else "e"

    offset = 0.0
    on_slow_axis = (role.photon == "pump") != axis_swapped
    if on_slow_axis:
        offset += fiber.delta_pol
    if seg_parity == "o":
        offset += parity_birefringence(fiber, role.photon)
    return offset


def effective_index(fiber: FiberSpec, lam_um, role: ModeRole,
                    axis_swapped: bool = False) -> np.ndarray:
    """Effective index of a wave including birefringence overlays."""
    base = lp_effective_index(fiber, lam_um, role.lp_label)
    return base + birefringence_offset(fiber, role, axis_swapped)
