"""Four-wave-mixing channel enumeration and phase matching.

A process is an unordered pump-mode pair plus an ordered (signal, idler)
mode pair.  Three selection rules decide which combinations can emit:

* azimuthal-index sum conservation (LP01 carries 0, LP11 carries 1),
* parity conservation (even -> +1, odd -> -1, product preserved),
* phase-matchability under the convention that odd modes are slower:
  an odd-mode excess on the output side pushes the mismatch below zero
  everywhere on the energy surface, so pumps must carry at least as
  many odd modes as the outputs.

For the two-mode set {e, o} these rules leave exactly the five channels
labelled A-E; adding the fundamental mode g admits five more.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import FiberSpec, ModeRole, effective_index
from .errors import ConfigError, PhaseMatchError

MODE_ORDER = ("g", "e", "o")
_AZIMUTHAL = {"g": 0, "e": 1, "o": 1}
_PARITY_SIGN = {"g": 1, "e": 1, "o": -1}

# Canonical letter names of the two-mode channels, after the usual
# (pump1, pump2, signal, idler) convention.
CANONICAL_LABELS = {
    ("e", "o", "o", "e"): "A",
    ("o", "o", "o", "o"): "B",
    ("e", "e", "e", "e"): "C",
    ("e", "o", "e", "o"): "D",
    ("o", "o", "e", "e"): "E",
}


@dataclass(frozen=True)
class FwmProcess:
    """One FWM channel (T_p1, T_p2, T_s, T_i) with its display label."""

    t_p1: str
    t_p2: str
    t_s: str
    t_i: str
    label: str = ""

    def __post_init__(self):
        for t in self.modes:
            if t not in MODE_ORDER:
                raise ConfigError(f"unknown mode label {t!r}")
        if not self.label:
            object.__setattr__(self, "label", canonical_label(self.modes))

    @property
    def modes(self) -> tuple:
        return (self.t_p1, self.t_p2, self.t_s, self.t_i)

    @property
    def pump_mode_degenerate(self) -> bool:
        return self.t_p1 == self.t_p2

    def conserves_parity(self) -> bool:
        return (_PARITY_SIGN[self.t_p1] * _PARITY_SIGN[self.t_p2]
                == _PARITY_SIGN[self.t_s] * _PARITY_SIGN[self.t_i])

    def conserves_azimuthal_sum(self) -> bool:
        return (_AZIMUTHAL[self.t_p1] + _AZIMUTHAL[self.t_p2]
                == _AZIMUTHAL[self.t_s] + _AZIMUTHAL[self.t_i])

    def pump_odd_excess(self) -> int:
        pumps = (self.t_p1, self.t_p2).count("o")
        outputs = (self.t_s, self.t_i).count("o")
        return pumps - outputs

    def is_viable(self) -> bool:
        return (self.conserves_parity()
                and self.conserves_azimuthal_sum()
                and self.pump_odd_excess() >= 0)


def canonical_label(modes: tuple) -> str:
    if modes in CANONICAL_LABELS:
        return CANONICAL_LABELS[modes]
    p1, p2, s, i = modes
    return f"{p1}{p2}-{s}{i}"


def _canonical_pump_pair(a: str, b: str) -> tuple:
    return tuple(sorted((a, b), key=MODE_ORDER.index))


def all_candidates(mode_set) -> list:
    """All distinct mode combinations (unordered pumps, ordered outputs)."""
    modes = sorted(set(mode_set), key=MODE_ORDER.index)
    for m in modes:
        if m not in MODE_ORDER:
            raise ConfigError(f"unknown mode label {m!r}")
    seen = set()
    out = []
    for p1 in modes:
        for p2 in modes:
            pair = _canonical_pump_pair(p1, p2)
            for s in modes:
                for i in modes:
                    key = pair + (s, i)
                    if key in seen:
                        continue
                    seen.add(key)
                    out.append(FwmProcess(*key))
    return out


def enumerate_processes(mode_set) -> list:
    """Conservation-allowed FWM channels over ``mode_set``.

    Deterministic ordering: lexicographic on the four mode labels.
    {e, o} yields exactly the five canonical channels A-E; {g, e, o}
    yields ten.
    """
    if not mode_set:
        raise ConfigError("mode_set must be non-empty")
    viable = [p for p in all_candidates(mode_set) if p.is_viable()]
    return sorted(viable, key=lambda p: p.modes)


def process_roles(process: FwmProcess) -> tuple:
    return (
        ModeRole(process.t_p1, "pump"),
        ModeRole(process.t_p2, "pump"),
        ModeRole(process.t_s, "signal"),
        ModeRole(process.t_i, "idler"),
    )


@dataclass(frozen=True)
class PhaseMismatch:
    """Signed wavevector mismatch and its per-wave components (rad/m)."""

    delta_k: float
    k_nl: float
    components: dict  # wave tag -> n*omega/c term

    def reconstructed(self) -> float:
        c = self.components
        return c["p1"] + c["p2"] - c["s"] - c["i"] - self.k_nl


def delta_k_vec(process: FwmProcess, lam_s_um, lam_i_um, fiber: FiberSpec,
                k_nl: float = 0.0, axis_swapped: bool = False):
    """Vectorized phase mismatch on the frequency-degenerate surface.

    The pump wavelength is derived from 2/lam_p = 1/lam_s + 1/lam_i;
    returns (delta_k, components) with wavenumbers in rad/m.
    """
    lam_s = np.atleast_1d(np.asarray(lam_s_um, dtype=float))
    lam_i = np.atleast_1d(np.asarray(lam_i_um, dtype=float))
    inv_p = 0.5 * (1.0 / lam_s + 1.0 / lam_i)
    lam_p = 1.0 / inv_p

    r_p1, r_p2, r_s, r_i = process_roles(process)
    n_p1 = effective_index(fiber, lam_p, r_p1, axis_swapped)
    if process.pump_mode_degenerate:
        n_p2 = n_p1
    else:
        n_p2 = effective_index(fiber, lam_p, r_p2, axis_swapped)
    n_s = effective_index(fiber, lam_s, r_s, axis_swapped)
    n_i = effective_index(fiber, lam_i, r_i, axis_swapped)

    # k = 2 pi n / lambda, with lambda in um -> rad/m
    to_rad_m = 2.0 * np.pi * 1e6
    k_p1 = to_rad_m * n_p1 / lam_p
    k_p2 = to_rad_m * n_p2 / lam_p
    k_s = to_rad_m * n_s / lam_s
    k_i = to_rad_m * n_i / lam_i
    dk = k_p1 + k_p2 - k_s - k_i - k_nl
    return dk, {"p1": k_p1, "p2": k_p2, "s": k_s, "i": k_i}


def delta_k(process: FwmProcess, lam_s_um: float, lam_i_um: float,
            fiber: FiberSpec, k_nl: float = 0.0,
            axis_swapped: bool = False) -> PhaseMismatch:
    """Phase mismatch at one (lam_s, lam_i) point (wavelengths in um)."""
    dk, comps = delta_k_vec(process, lam_s_um, lam_i_um, fiber,
                            k_nl=k_nl, axis_swapped=axis_swapped)
    return PhaseMismatch(
        delta_k=float(dk[0]),
        k_nl=k_nl,
        components={tag: float(v[0]) for tag, v in comps.items()},
    )


def _energy_partner_nm(lam_p_nm: float, lam_i_nm):
    """Signal wavelength paired with lam_i on the degenerate surface."""
    return 1.0 / (2.0 / lam_p_nm - 1.0 / np.asarray(lam_i_nm, dtype=float))


def phasematched_center(process: FwmProcess, fiber: FiberSpec,
                        lam_p_nm: float,
                        band_i_nm: tuple = (540.0, 580.0),
                        k_nl: float = 0.0,
                        scan_step_nm: float = 0.01) -> tuple:
    """Locate the (lam_s, lam_i) pair, in nm, where delta_k crosses zero.

    Scans the idler band coarsely, then bisects the first bracketing
    interval down to 1e-4 nm.  The returned pair satisfies the energy
    constraint 2/lam_p = 1/lam_s + 1/lam_i exactly.

    Raises PhaseMatchError (with the scanned extrema) when no sign
    change exists in the band.
    """
    lo_nm, hi_nm = band_i_nm
    grid_i = np.arange(lo_nm, hi_nm + 0.5 * scan_step_nm, scan_step_nm)
    grid_s = _energy_partner_nm(lam_p_nm, grid_i)
    dk, _ = delta_k_vec(process, grid_s / 1000.0, grid_i / 1000.0,
                        fiber, k_nl=k_nl)
    sign = np.sign(dk)
    crossings = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(dk == 0.0)[0]
    if len(exact):
        li = float(grid_i[exact[0]])
        return float(_energy_partner_nm(lam_p_nm, li)), li
    if len(crossings) == 0:
        raise PhaseMatchError(
            f"process {process.label} not phase matched in band "
            f"[{lo_nm}, {hi_nm}] nm: delta_k in "
            f"[{dk.min():.6g}, {dk.max():.6g}] 1/m",
            dk_min=float(dk.min()), dk_max=float(dk.max()),
        )

    def dk_at(li_nm: float) -> float:
        ls_nm = float(_energy_partner_nm(lam_p_nm, li_nm))
        val, _ = delta_k_vec(process, ls_nm / 1000.0, li_nm / 1000.0,
                             fiber, k_nl=k_nl)
        return float(val[0])

    lo = float(grid_i[crossings[0]])
    hi = float(grid_i[crossings[0] + 1])
    f_lo = dk_at(lo)
    while hi - lo > 1e-5:
        mid = 0.5 * (lo + hi)
        f_mid = dk_at(mid)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    lam_i = 0.5 * (lo + hi)
    lam_s = float(_energy_partner_nm(lam_p_nm, lam_i))
    return lam_s, lam_i
