"""Joint spectral amplitudes, stimulated-seed slices and 2-D lobe fits.

The joint spectral amplitude of a channel factorizes into the pump
envelope (a Gaussian in the summed detuning, from the convolution of
the two identical pump photons) and the phase-matching function of the
segmented fiber.  Processes with the same output mode pair add
coherently before squaring; distinct output pairs add in intensity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_LIGHT
from scipy.optimize import least_squares

from .dispersion import (FiberSpec, ModeRole, birefringence_offset,
                         lp_effective_index)
from .errors import ConfigError, DomainError, NumericError
from .fields import ModeSuperposition
from .processes import FwmProcess

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PumpSpec:
    """Frequency-degenerate pump pair from one laser.

    ``intensity_fwhm_nm`` is the single-pump intensity FWHM; the
    two-photon envelope in the summed detuning has twice the variance.
    ``average_power_mw`` only matters as a relative weight.
    """

    center_wavelength_nm: float = 620.0
    intensity_fwhm_nm: float = 2.0
    transverse_state: ModeSuperposition = field(
        default_factory=lambda: ModeSuperposition.named("d"))
    average_power_mw: float = 8.0

    def __post_init__(self):
        if self.intensity_fwhm_nm <= 0:
            raise ConfigError("pump intensity FWHM must be > 0")
        if self.center_wavelength_nm <= 0:
            raise ConfigError("pump wavelength must be > 0")

    @property
    def omega_p(self) -> float:
        return _TWO_PI * C_LIGHT / (self.center_wavelength_nm * 1e-9)

    @property
    def sigma_omega(self) -> float:
        """Std of the single-pump intensity spectrum, rad/s."""
        lam_m = self.center_wavelength_nm * 1e-9
        fwhm_omega = _TWO_PI * C_LIGHT * self.intensity_fwhm_nm * 1e-9 / lam_m**2
        return fwhm_omega / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def _omega(lam_nm):
    return _TWO_PI * C_LIGHT / (np.asarray(lam_nm, dtype=float) * 1e-9)


def pump_envelope(lam_s_nm, lam_i_nm, pump: PumpSpec) -> np.ndarray:
    """Two-pump spectral envelope amplitude, peak 1 on the energy surface.

    Gaussian in nu = omega_s + omega_i - 2 omega_p with amplitude
    exp(-nu^2 / (8 sigma^2)); the envelope intensity has variance
    2 sigma^2, i.e. sqrt(2) times the single-pump intensity width.
    """
    nu = _omega(lam_s_nm) + _omega(lam_i_nm) - 2.0 * pump.omega_p
    return np.exp(-(nu**2) / (8.0 * pump.sigma_omega**2))


def _segment_delta_k(process: FwmProcess, fiber: FiberSpec,
                     base_p, base_s, base_i,
                     lam_p_nm, lam_s_nm, lam_i_nm,
                     axis_swapped: bool, k_nl: float):
    """Assemble delta_k from precomputed base indices plus overlays."""
    roles = (ModeRole(process.t_p1, "pump"), ModeRole(process.t_p2, "pump"),
             ModeRole(process.t_s, "signal"), ModeRole(process.t_i, "idler"))
    offs = [birefringence_offset(fiber, r, axis_swapped) for r in roles]
    to_rad_m = _TWO_PI * 1e9  # 2 pi n / lambda[nm]
    k_p1 = to_rad_m * (base_p + offs[0]) / lam_p_nm
    k_p2 = to_rad_m * (base_p + offs[1]) / lam_p_nm
    k_s = to_rad_m * (base_s + offs[2]) / lam_s_nm
    k_i = to_rad_m * (base_i + offs[3]) / lam_i_nm
    return k_p1 + k_p2 - k_s - k_i - k_nl


class _BaseIndexCache:
    """Base LP11 effective indices for a set of wavelength arrays.

    All channels over {e, o} share one base index per wave; the grid
    evaluation therefore solves the eigenvalue problem once per wave
    and composes every process from additive overlays.  Axis-shaped
    inputs like (n, 1) and (1, m) are solved in their thin form; only
    the pump wavelength, which genuinely varies across the grid, costs
    a full-size solve.
    """

    def __init__(self, fiber: FiberSpec, lam_s_nm, lam_i_nm):
        self.fiber = fiber
        self.lam_s_nm = np.asarray(lam_s_nm, dtype=float)
        self.lam_i_nm = np.asarray(lam_i_nm, dtype=float)
        inv_p = 0.5 * (1.0 / self.lam_s_nm + 1.0 / self.lam_i_nm)
        self.lam_p_nm = 1.0 / inv_p
        self.base_s = np.reshape(
            lp_effective_index(fiber, self.lam_s_nm.ravel() / 1000.0, "LP11"),
            self.lam_s_nm.shape)
        self.base_i = np.reshape(
            lp_effective_index(fiber, self.lam_i_nm.ravel() / 1000.0, "LP11"),
            self.lam_i_nm.shape)
        self.base_p = np.reshape(
            lp_effective_index(fiber, self.lam_p_nm.ravel() / 1000.0, "LP11"),
            self.lam_p_nm.shape)

    def delta_k(self, process: FwmProcess, axis_swapped: bool,
                k_nl: float) -> np.ndarray:
        if "g" in process.modes:
            raise DomainError(
                "grid evaluation supports the LP11 {e, o} channels only")
        return _segment_delta_k(process, self.fiber, self.base_p,
                                self.base_s, self.base_i, self.lam_p_nm,
                                self.lam_s_nm, self.lam_i_nm,
                                axis_swapped, k_nl)


def _segmented_phase_fn(delta_k_per_segment, segments, total_m):
    phi = None
    accumulated = None
    for (length_m, _), dk in zip(segments, delta_k_per_segment):
        x = 0.5 * dk * length_m
        seg = (length_m / total_m) * np.sinc(x / np.pi) * np.exp(1j * x)
        if phi is None:
            phi = seg.astype(complex)
            accumulated = dk * length_m
        else:
            phi = phi + np.exp(1j * accumulated) * seg
            accumulated = accumulated + dk * length_m
    return phi


def phase_matching_fn(process: FwmProcess, lam_s_nm, lam_i_nm,
                      fiber: FiberSpec, k_nl: float = 0.0) -> np.ndarray:
    """Complex phase-matching amplitude of the segmented fiber.

    One segment gives sinc(L dk / 2) exp(i L dk / 2); cross-spliced
    segments contribute coherently with the accumulated propagation
    phase and their axis-swapped mismatch.
    """
    cache = _BaseIndexCache(fiber, np.atleast_1d(np.asarray(lam_s_nm, float)),
                            np.atleast_1d(np.asarray(lam_i_nm, float)))
    dks = [cache.delta_k(process, swapped, k_nl)
           for _, swapped in fiber.segments]
    return _segmented_phase_fn(dks, fiber.segments, fiber.total_length_m)


@dataclass(frozen=True)
class SpectralGrid:
    """Rectangular uniform (lambda_s, lambda_i) grid specification."""

    lambda_s_nm: tuple = (670.0, 700.0)
    lambda_i_nm: tuple = (567.0, 576.0)
    points_s: int = 301
    points_i: int = 301

    def __post_init__(self):
        if self.lambda_s_nm[0] >= self.lambda_s_nm[1] \
                or self.lambda_i_nm[0] >= self.lambda_i_nm[1]:
            raise ConfigError("grid bands must be ascending intervals")
        if self.points_s < 2 or self.points_i < 2:
            raise ConfigError("grids need at least 2 points per axis")

    def axes(self):
        ls = np.linspace(*self.lambda_s_nm, self.points_s)
        li = np.linspace(*self.lambda_i_nm, self.points_i)
        return ls, li


@dataclass
class JsiGrid:
    """Per-process complex JSA values plus the combined intensity.

    ``per_process[label][r, c]`` is the weighted amplitude at
    (lambda_s_axis[r], lambda_i_axis[c]).  ``combined`` sums processes
    with identical output modes coherently and distinct output modes in
    intensity, and integrates to 1 over the grid.
    """

    lambda_s_axis: np.ndarray
    lambda_i_axis: np.ndarray
    per_process: dict
    processes: dict  # label -> FwmProcess
    combined: np.ndarray
    normalization: float  # raw intensity integral before scaling

    @property
    def step_s(self) -> float:
        return float(self.lambda_s_axis[1] - self.lambda_s_axis[0])

    @property
    def step_i(self) -> float:
        return float(self.lambda_i_axis[1] - self.lambda_i_axis[0])


def combine_intensity(per_process: dict, processes: dict) -> np.ndarray:
    """Coherent within identical (T_s, T_i), incoherent across."""
    groups = {}
    for label, amp in per_process.items():
        proc = processes[label]
        key = (proc.t_s, proc.t_i)
        groups.setdefault(key, []).append(amp)
    first = next(iter(per_process.values()))
    total = np.zeros(first.shape, dtype=float)
    for amps in groups.values():
        coherent = np.zeros_like(first)
        for a in amps:
            coherent = coherent + a
        total += np.abs(coherent) ** 2
    return total


def jsa_grid(processes, fiber: FiberSpec, pump: PumpSpec, weights: dict,
             grid: SpectralGrid | None = None,
             k_nl: float = 0.0) -> JsiGrid:
    """Evaluate weighted per-process JSAs on a wavelength grid.

    ``weights`` maps process labels to complex coefficients c_j; any
    process missing from the map is dropped.  The grid is normalized so
    the combined intensity integrates to 1.
    """
    if not processes:
        raise DomainError("jsa_grid needs at least one process")
    if grid is None:
        grid = SpectralGrid()
    ls, li = grid.axes()
    mesh_s = ls[:, None]
    mesh_i = li[None, :]
    alpha = pump_envelope(mesh_s, mesh_i, pump)

    cache = _BaseIndexCache(fiber, mesh_s, mesh_i)
    per_process = {}
    proc_map = {}
    for proc in processes:
        c_j = weights.get(proc.label, 0j)
        if c_j == 0:
            continue
        dks = [cache.delta_k(proc, swapped, k_nl)
               for _, swapped in fiber.segments]
        phi = _segmented_phase_fn(dks, fiber.segments, fiber.total_length_m)
        per_process[proc.label] = c_j * alpha * phi
        proc_map[proc.label] = proc
    if not per_process:
        raise DomainError("all process weights are zero")

    combined = combine_intensity(per_process, proc_map)
    raw_integral = float(combined.sum()) * (ls[1] - ls[0]) * (li[1] - li[0])
    if raw_integral <= 0:
        raise NumericError("joint spectrum vanishes on the whole grid")
    scale = 1.0 / np.sqrt(raw_integral)
    per_process = {k: v * scale for k, v in per_process.items()}
    combined = combined / raw_integral
    return JsiGrid(lambda_s_axis=ls, lambda_i_axis=li,
                   per_process=per_process, processes=proc_map,
                   combined=combined, normalization=raw_integral)


@dataclass
class SeedSlice:
    """Stimulated signal spectrum for one seed wavelength and state."""

    lambda_s_axis: np.ndarray
    lambda_i_nm: float  # grid node actually used
    total: np.ndarray
    per_process: dict  # label -> intensity contribution


def stimulated_slice(grid: JsiGrid, seed_wavelength_nm: float,
                     seed_state: ModeSuperposition) -> SeedSlice:
    """Project the idler onto a classical seed and return the signal
    spectrum at the nearest grid column.

    Only processes whose idler mode overlaps the seed contribute;
    signal modes stay distinguishable, so different signal modes add in
    intensity while equal ones add coherently.
    """
    axis = grid.lambda_i_axis
    if not axis[0] <= seed_wavelength_nm <= axis[-1]:
        raise DomainError(
            f"seed wavelength {seed_wavelength_nm} nm outside grid range "
            f"[{axis[0]}, {axis[-1]}] nm")
    col = int(np.argmin(np.abs(axis - seed_wavelength_nm)))

    by_signal = {}
    per_process = {}
    for label, amp in grid.per_process.items():
        proc = grid.processes[label]
        ov = np.conj(seed_state.amplitude(proc.t_i))
        contrib = amp[:, col] * ov
        per_process[label] = np.abs(contrib) ** 2
        if ov != 0:
            key = proc.t_s
            by_signal.setdefault(key, np.zeros(len(grid.lambda_s_axis),
                                               dtype=complex))
            by_signal[key] = by_signal[key] + contrib
    total = np.zeros(len(grid.lambda_s_axis))
    for coherent in by_signal.values():
        total += np.abs(coherent) ** 2
    return SeedSlice(lambda_s_axis=grid.lambda_s_axis,
                     lambda_i_nm=float(axis[col]),
                     total=total, per_process=per_process)


@dataclass
class GaussianLobe:
    """Elliptical 2-D Gaussian fitted to one JSI lobe."""

    center_s_nm: float
    center_i_nm: float
    sigma_major_nm: float
    sigma_minor_nm: float
    orientation_rad: float
    amplitude: float
    r_squared: float = float("nan")
    process_label: str = ""

    def evaluate(self, lam_s_nm, lam_i_nm) -> np.ndarray:
        dx = np.asarray(lam_s_nm, dtype=float) - self.center_s_nm
        dy = np.asarray(lam_i_nm, dtype=float) - self.center_i_nm
        ct, st = np.cos(self.orientation_rad), np.sin(self.orientation_rad)
        u = ct * dx + st * dy
        v = -st * dx + ct * dy
        return self.amplitude * np.exp(
            -0.5 * (u**2 / self.sigma_major_nm**2
                    + v**2 / self.sigma_minor_nm**2))


@dataclass
class LobeFit:
    lobes: list
    residual_norm: float
    r_squared: float
    iterations: int


def _lobe_model(params: np.ndarray, xs, yi) -> np.ndarray:
    n = len(params) // 6
    out = np.zeros(np.broadcast_shapes(xs.shape, yi.shape))
    for k in range(n):
        amp, x0, y0, sa, sb, th = params[6 * k:6 * k + 6]
        ct, st = np.cos(th), np.sin(th)
        dx = xs - x0
        dy = yi - y0
        u = ct * dx + st * dy
        v = -st * dx + ct * dy
        out += amp * np.exp(-0.5 * (u**2 / sa**2 + v**2 / sb**2))
    return out


def _lobe_jacobian(params: np.ndarray, xs, yi) -> np.ndarray:
    """Analytic Jacobian of the lobe-sum model, one column per parameter."""
    shape = np.broadcast_shapes(xs.shape, yi.shape)
    npts = int(np.prod(shape))
    jac = np.empty((npts, len(params)))
    for k in range(len(params) // 6):
        amp, x0, y0, sa_r, sb_r, th = params[6 * k:6 * k + 6]
        sa = abs(sa_r) + 1e-9
        sb = abs(sb_r) + 1e-9
        ct, st = np.cos(th), np.sin(th)
        dx = xs - x0
        dy = yi - y0
        u = (ct * dx + st * dy)
        v = (-st * dx + ct * dy)
        env = np.broadcast_to(
            np.exp(-0.5 * (u**2 / sa**2 + v**2 / sb**2)), shape)
        u = np.broadcast_to(u, shape)
        v = np.broadcast_to(v, shape)
        base = amp * env
        jac[:, 6 * k + 0] = env.ravel()
        jac[:, 6 * k + 1] = (base * (u * ct / sa**2 - v * st / sb**2)).ravel()
        jac[:, 6 * k + 2] = (base * (u * st / sa**2 + v * ct / sb**2)).ravel()
        jac[:, 6 * k + 3] = (base * u**2 / sa**3).ravel() * np.sign(sa_r or 1.0)
        jac[:, 6 * k + 4] = (base * v**2 / sb**3).ravel() * np.sign(sb_r or 1.0)
        jac[:, 6 * k + 5] = (base * u * v * (1.0 / sb**2 - 1.0 / sa**2)).ravel()
    return jac


def _initial_centers(intensity: np.ndarray, n: int, radius: int = 5):
    """Largest local maxima with non-maximum suppression."""
    work = intensity.copy()
    found = []
    for _ in range(n):
        idx = int(np.argmax(work))
        r, col = np.unravel_index(idx, work.shape)
        if work[r, col] <= 0:
            break
        found.append((r, col))
        r0, r1 = max(0, r - radius), min(work.shape[0], r + radius + 1)
        c0, c1 = max(0, col - radius), min(work.shape[1], col + radius + 1)
        work[r0:r1, c0:c1] = 0.0
    return found


def _moment_sigma(intensity, axis_vals, center_idx, along_rows: bool,
                  other_idx: int, floor: float) -> float:
    if along_rows:
        profile = intensity[:, other_idx]
    else:
        profile = intensity[other_idx, :]
    lo = max(0, center_idx - 8)
    hi = min(len(profile), center_idx + 9)
    w = np.maximum(profile[lo:hi], 0.0)
    x = axis_vals[lo:hi]
    if w.sum() <= 0:
        return floor
    mu = float((w * x).sum() / w.sum())
    var = float((w * (x - mu) ** 2).sum() / w.sum())
    return max(np.sqrt(var), floor)


def fit_lobes(lam_s_axis, lam_i_axis, intensity, expected_lobes: int,
              init_centers=None, max_iter: int = 200) -> LobeFit:
    """Nonlinear least squares of a sum of elliptical Gaussians.

    Deterministic given the same initialization; initial centers default
    to the ``expected_lobes`` largest local maxima (non-maximum
    suppression radius 5 nodes).  Raises on a zero grid or when the
    optimizer exhausts its budget without converging.
    """
    if expected_lobes < 1:
        raise ConfigError("expected_lobes must be >= 1")
    intensity = np.asarray(intensity, dtype=float)
    if not np.any(intensity > 0):
        raise DomainError("cannot fit lobes on a non-positive grid")
    ls = np.asarray(lam_s_axis, dtype=float)
    li = np.asarray(lam_i_axis, dtype=float)
    xs = ls[:, None]
    yi = li[None, :]
    step_s = ls[1] - ls[0]
    step_i = li[1] - li[0]

    params = []
    if init_centers is not None:
        for (cs, ci) in init_centers:
            r = int(np.argmin(np.abs(ls - cs)))
            col = int(np.argmin(np.abs(li - ci)))
            amp = max(float(intensity[r, col]), 1e-12 * intensity.max())
            ss = _moment_sigma(intensity, ls, r, True, col, 2 * step_s)
            si = _moment_sigma(intensity, li, col, False, r, 2 * step_i)
            params += [amp, float(cs), float(ci), ss, si, 0.0]
    else:
        peaks = _initial_centers(intensity, expected_lobes)
        if len(peaks) < expected_lobes:
            raise NumericError(
                f"found only {len(peaks)} nonzero maxima for "
                f"{expected_lobes} requested lobes")
        for r, col in peaks:
            ss = _moment_sigma(intensity, ls, r, True, col, 2 * step_s)
            si = _moment_sigma(intensity, li, col, False, r, 2 * step_i)
            params += [float(intensity[r, col]), float(ls[r]),
                       float(li[col]), ss, si, 0.0]
    p0 = np.asarray(params, dtype=float)

    def resid(p):
        q = p.copy()
        for k in range(len(q) // 6):
            q[6 * k + 3] = abs(q[6 * k + 3]) + 1e-9
            q[6 * k + 4] = abs(q[6 * k + 4]) + 1e-9
        return (_lobe_model(q, xs, yi) - intensity).ravel()

    sol = least_squares(resid, p0, jac=lambda p: _lobe_jacobian(p, xs, yi),
                        method="lm", max_nfev=max_iter * len(p0),
                        xtol=1e-12, ftol=1e-12, gtol=1e-12)
    if sol.status == 0:
        raise NumericError(
            f"lobe fit did not converge; last residual norm "
            f"{np.linalg.norm(sol.fun):.3e}")

    lobes = []
    denom_total = float(((intensity - intensity.mean()) ** 2).sum())
    res_grid = _lobe_model(_canonical_params(sol.x), xs, yi) - intensity
    for k in range(len(sol.x) // 6):
        amp, x0, y0, sa, sb, th = _canonical_params(sol.x)[6 * k:6 * k + 6]
        # local goodness of fit inside the 3-sigma ellipse
        ct, st = np.cos(th), np.sin(th)
        u = ct * (xs - x0) + st * (yi - y0)
        v = -st * (xs - x0) + ct * (yi - y0)
        mask = (u**2 / sa**2 + v**2 / sb**2) <= 9.0
        if mask.sum() >= 8:
            data = intensity[mask]
            denom = float(((data - data.mean()) ** 2).sum())
            r2 = 1.0 - float((res_grid[mask] ** 2).sum()) / denom \
                if denom > 0 else float("nan")
        else:
            r2 = float("nan")
        lobes.append(GaussianLobe(
            center_s_nm=float(x0), center_i_nm=float(y0),
            sigma_major_nm=float(sa), sigma_minor_nm=float(sb),
            orientation_rad=float(th), amplitude=float(amp),
            r_squared=r2))
    lobes.sort(key=lambda lb: lb.center_i_nm)
    r2_global = 1.0 - float((res_grid**2).sum()) / denom_total \
        if denom_total > 0 else float("nan")
    return LobeFit(lobes=lobes, residual_norm=float(np.linalg.norm(sol.fun)),
                   r_squared=r2_global, iterations=int(sol.nfev))


def _canonical_params(p: np.ndarray) -> np.ndarray:
    """Positive sigmas, major >= minor, orientation in [0, pi)."""
    q = p.copy()
    for k in range(len(q) // 6):
        amp, x0, y0, sa, sb, th = q[6 * k:6 * k + 6]
        sa = abs(sa) + 1e-9
        sb = abs(sb) + 1e-9
        if sb > sa:
            sa, sb = sb, sa
            th = th + 0.5 * np.pi
        th = th % np.pi
        q[6 * k:6 * k + 6] = [amp, x0, y0, sa, sb, th]
    return q
