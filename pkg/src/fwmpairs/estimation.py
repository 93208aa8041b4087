"""Two-photon transverse-mode density matrices from spectral data.

Under the flat joint-spectral-phase assumption, each point of the
joint spectrum carries a pure two-qubit state whose components are the
per-process magnitudes; tracing the spectral degree of freedom out of
the intensity-weighted projectors produces the estimated density
matrix.  Spectral overlap between channels turns into off-diagonal
coherence, spectral separation into an incoherent mixture.

Basis order everywhere: (ee, eo, oe, oo) on (signal, idler).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .fields import ModeSuperposition
from .spectrum import (JsiGrid, PumpSpec, _BaseIndexCache,
                       _segmented_phase_fn, pump_envelope)

BASIS_LABELS = ("ee", "eo", "oe", "oo")
_BASIS_INDEX = {("e", "e"): 0, ("e", "o"): 1, ("o", "e"): 2, ("o", "o"): 3}

BELL_PHI_PLUS = np.zeros(4, dtype=complex)
BELL_PHI_PLUS[0] = BELL_PHI_PLUS[3] = 1.0 / np.sqrt(2.0)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


def validate_density(rho: np.ndarray) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; returns the input."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DomainError(f"expected a 4x4 matrix, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
        raise DomainError("matrix is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL or \
            abs(np.trace(rho).imag) > TRACE_TOL:
        raise DomainError("matrix trace differs from 1")
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigs.min() < -PSD_TOL:
        raise DomainError(
            f"matrix has negative eigenvalue {eigs.min():.3e}")
    return rho


def basis_index(t_s: str, t_i: str) -> int:
    key = (t_s, t_i)
    if key not in _BASIS_INDEX:
        raise DomainError(
            f"output modes {key} outside the two-qubit {{e, o}} space")
    return _BASIS_INDEX[key]


# ---------------------------------------------------------------------------
# process weights


@dataclass
class ProcessWeights:
    """Relative complex coefficients c_j of the emitted channels.

    c_j is the product of the two pump-mode amplitudes with the spatial
    coupling O_j (whose mixed-pump exchange doubling already accounts
    for pump-photon indistinguishability).  ``pump_pair_factor`` is the
    probability weight of the unordered pump-mode configuration,
    carrying the factor of 2 for mixed pairs.
    """

    amplitudes: dict          # label -> c_j, sum |c_j|^2 = 1
    pump_pair_factor: dict    # label -> b_j
    overlaps: dict            # label -> O_j used

    def m(self) -> dict:
        return {k: float(abs(v) ** 2) for k, v in self.amplitudes.items()}


def process_weights(pump: PumpSpec | ModeSuperposition, overlaps: dict,
                    processes) -> ProcessWeights:
    """Combine pump-mode amplitudes and overlaps into channel weights.

    Raises when every channel weight vanishes (e.g. a pump state with
    no support on the required modes).
    """
    state = pump.transverse_state if isinstance(pump, PumpSpec) else pump
    amps = {}
    bfac = {}
    used = {}
    for proc in processes:
        a1 = state.amplitude(proc.t_p1)
        a2 = state.amplitude(proc.t_p2)
        o_j = overlaps.get(proc.label, 0j)
        mult = 1.0 if proc.pump_mode_degenerate else 2.0
        bfac[proc.label] = float(mult * abs(a1 * a2) ** 2)
        amps[proc.label] = a1 * a2 * o_j
        used[proc.label] = o_j
    total = sum(abs(v) ** 2 for v in amps.values())
    if total <= 0:
        raise DomainError("all process weights are zero for this pump state")
    scale = 1.0 / np.sqrt(total)
    amps = {k: v * scale for k, v in amps.items()}
    return ProcessWeights(amplitudes=amps, pump_pair_factor=bfac,
                          overlaps=used)


# ---------------------------------------------------------------------------
# pointwise state and spectral tracing


def pointwise_rho(amplitudes: dict, processes) -> np.ndarray:
    """Projector of the pure state at one spectral point.

    ``amplitudes`` maps process labels to complex amplitudes; channels
    sharing an output mode pair interfere.  The result has unit trace.
    """
    psi = np.zeros(4, dtype=complex)
    by_label = {p.label: p for p in processes}
    for label, amp in amplitudes.items():
        proc = by_label[label]
        psi[basis_index(proc.t_s, proc.t_i)] += amp
    norm2 = float(np.vdot(psi, psi).real)
    if norm2 <= 0:
        raise DomainError("all amplitudes vanish at this point")
    psi = psi / np.sqrt(norm2)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class SpectralWindow:
    """Rectangular integration window in the (lambda_s, lambda_i) plane."""

    lambda_s_nm: tuple
    lambda_i_nm: tuple

    def __post_init__(self):
        if self.lambda_s_nm[0] >= self.lambda_s_nm[1] or \
                self.lambda_i_nm[0] >= self.lambda_i_nm[1]:
            raise ConfigError("window intervals must be ascending")

    def quadrature(self, nodes: int = 101):
        """Midpoint nodes and the cell area."""
        s0, s1 = self.lambda_s_nm
        i0, i1 = self.lambda_i_nm
        hs = (s1 - s0) / nodes
        hi = (i1 - i0) / nodes
        ls = s0 + hs * (np.arange(nodes) + 0.5)
        li = i0 + hi * (np.arange(nodes) + 0.5)
        return ls, li, hs * hi


def trace_spectral(amplitude_fns: dict, processes, window: SpectralWindow,
                   nodes: int = 101) -> np.ndarray:
    """Integrate pointwise projectors over a window and renormalize.

    ``amplitude_fns`` maps process labels to vectorized functions
    a_j(lam_s[:, None], lam_i[None, :]) -> real amplitude; the flat
    joint-spectral-phase assumption makes these nonnegative magnitudes.
    """
    by_label = {p.label: p for p in processes}
    ls, li, _ = window.quadrature(nodes)
    mesh_s = ls[:, None]
    mesh_i = li[None, :]
    comp = np.zeros((4, nodes, nodes), dtype=complex)
    for label, fn in amplitude_fns.items():
        proc = by_label[label]
        comp[basis_index(proc.t_s, proc.t_i)] += np.asarray(
            fn(mesh_s, mesh_i), dtype=complex)
    flat = comp.reshape(4, -1)
    rho = flat @ flat.conj().T
    tr = float(np.trace(rho).real)
    if tr <= 0:
        raise DomainError("window contains no intensity")
    rho = rho / tr
    return 0.5 * (rho + rho.conj().T)


def model_amplitudes(processes, fiber, pump: PumpSpec, weights: ProcessWeights,
                     k_nl: float = 0.0) -> dict:
    """Flat-phase amplitude evaluators straight from the physical model.

    a_j = |c_j| * envelope * |phase-matching|, evaluated analytically at
    the requested wavelengths (no grid interpolation).
    """
    fns = {}
    for proc in processes:
        c_j = weights.amplitudes.get(proc.label, 0j)
        if c_j == 0:
            continue

        def fn(ls, li, proc=proc, mag=abs(c_j)):
            shape = np.broadcast_shapes(np.shape(ls), np.shape(li))
            cache = _BaseIndexCache(fiber, np.asarray(ls, dtype=float),
                                    np.asarray(li, dtype=float))
            dks = [cache.delta_k(proc, swapped, k_nl)
                   for _, swapped in fiber.segments]
            phi = _segmented_phase_fn(dks, fiber.segments,
                                      fiber.total_length_m)
            amp = mag * pump_envelope(ls, li, pump) * np.abs(phi)
            return np.broadcast_to(amp, shape)

        fns[proc.label] = fn
    return fns


def grid_amplitudes(grid: JsiGrid) -> dict:
    """Flat-phase amplitude evaluators from a stored per-process grid
    (bilinear interpolation of the magnitudes)."""
    fns = {}
    for label, amp in grid.per_process.items():
        mag = np.abs(amp)

        def fn(ls, li, mag=mag):
            return _bilinear(grid.lambda_s_axis, grid.lambda_i_axis,
                             mag, ls, li)

        fns[label] = fn
    return fns


def lobe_amplitudes(lobes) -> dict:
    """Flat-phase amplitude evaluators from fitted intensity lobes.

    Each lobe must carry a process label; amplitudes are square roots
    of the fitted Gaussian intensity (lobes sharing a label add in
    intensity).
    """
    groups = {}
    for lobe in lobes:
        if not lobe.process_label:
            raise ConfigError("every lobe needs a process_label")
        groups.setdefault(lobe.process_label, []).append(lobe)
    fns = {}
    for label, group in groups.items():
        def fn(ls, li, group=tuple(group)):
            shape = np.broadcast_shapes(np.shape(ls), np.shape(li))
            total = np.zeros(shape)
            for lobe in group:
                total += np.maximum(lobe.evaluate(ls, li), 0.0)
            return np.sqrt(total)

        fns[label] = fn
    return fns


def _bilinear(xs, ys, values, qx, qy):
    qx = np.asarray(qx, dtype=float)
    qy = np.asarray(qy, dtype=float)
    ix = np.clip(np.searchsorted(xs, qx) - 1, 0, len(xs) - 2)
    iy = np.clip(np.searchsorted(ys, qy) - 1, 0, len(ys) - 2)
    x0 = xs[ix]
    y0 = ys[iy]
    tx = np.clip((qx - x0) / (xs[ix + 1] - x0), 0.0, 1.0)
    ty = np.clip((qy - y0) / (ys[iy + 1] - y0), 0.0, 1.0)
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    return ((1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10
            + (1 - tx) * ty * v01 + tx * ty * v11)


# ---------------------------------------------------------------------------
# two-qubit metrics


_SIGMA_Y_PAIR = np.array([
    [0, 0, 0, -1],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
    [-1, 0, 0, 0],
], dtype=complex)


def concurrence(rho: np.ndarray) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho = validate_density(rho)
    tilde = _SIGMA_Y_PAIR @ rho.conj() @ _SIGMA_Y_PAIR
    eigs = np.linalg.eigvals(rho @ tilde)
    lam = np.sqrt(np.clip(eigs.real, 0.0, None))
    lam.sort()
    return float(max(0.0, lam[3] - lam[2] - lam[1] - lam[0]))


def purity(rho: np.ndarray) -> float:
    rho = validate_density(rho)
    return float(np.trace(rho @ rho).real)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    vals = np.clip(vals, 0.0, None)
    # rank-deficient inputs: sqrt amplifies eigenvalue noise, drop it
    vals[vals < 1e-12 * max(vals.max(), 1e-300)] = 0.0
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity, squared convention: (tr sqrt(sqrt(r) s sqrt(r)))^2."""
    rho = validate_density(rho)
    sigma = validate_density(sigma)
    root = _psd_sqrt(rho)
    inner = _psd_sqrt(root @ sigma @ root)
    val = float(np.trace(inner).real) ** 2
    return float(min(max(val, 0.0), 1.0))


def bell_fidelity(rho: np.ndarray) -> float:
    """Overlap with the (|ee> + |oo>)/sqrt(2) Bell state."""
    rho = validate_density(rho)
    return float((BELL_PHI_PLUS.conj() @ rho @ BELL_PHI_PLUS).real)


def metrics_block(rho: np.ndarray) -> dict:
    """Standard metrics bundle reported with every density matrix."""
    bf = bell_fidelity(rho)
    return {
        "concurrence": concurrence(rho),
        "bell_fidelity": bf,
        "bell_fidelity_unsquared": float(np.sqrt(max(bf, 0.0))),
        "purity": purity(rho),
    }
