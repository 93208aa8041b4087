"""Simulated 36-projector quantum state tomography with Poisson MLE.

Projective coincidence measurements use all products of the six
single-photon states {e, o, d, a, r, l} (three mutually unbiased bases)
on signal and idler.  Reconstruction maximizes the Poisson
log-likelihood over the Cholesky-style parameterization
rho = T^dag T / tr(T^dag T), which is physical by construction, using
damped Fisher scoring (accepted steps never decrease the likelihood).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericError
from .estimation import bell_fidelity, concurrence, purity, validate_density

SINGLE_STATES = {
    "e": np.array([1.0, 0.0], dtype=complex),
    "o": np.array([0.0, 1.0], dtype=complex),
    "d": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "a": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
    "r": np.array([1.0, 1j], dtype=complex) / np.sqrt(2.0),
    "l": np.array([1.0, -1j], dtype=complex) / np.sqrt(2.0),
}
STATE_ORDER = ("e", "o", "d", "a", "r", "l")


@dataclass(frozen=True)
class ProjectorSet:
    """The 36 rank-1 two-photon projectors in canonical order."""

    names: tuple
    projectors: np.ndarray  # (36, 4, 4)

    def __len__(self) -> int:
        return len(self.names)


def projector_basis() -> ProjectorSet:
    names = []
    mats = []
    for s in STATE_ORDER:
        for i in STATE_ORDER:
            ket = np.kron(SINGLE_STATES[s], SINGLE_STATES[i])
            names.append(s + i)
            mats.append(np.outer(ket, ket.conj()))
    return ProjectorSet(names=tuple(names), projectors=np.array(mats))


def expected_counts(rho: np.ndarray, n0: float,
                    basis: ProjectorSet | None = None) -> np.ndarray:
    """Expected coincidence rates N0 * tr(Pi_k rho)."""
    rho = validate_density(rho)
    if n0 <= 0:
        raise DomainError("acquisition scale N0 must be > 0")
    if basis is None:
        basis = projector_basis()
    probs = np.einsum("kij,ji->k", basis.projectors, rho).real
    return n0 * np.clip(probs, 0.0, None)


@dataclass
class CountRecord:
    """Observed (or resampled) coincidence counts for the 36 projectors."""

    counts: np.ndarray
    n0: float
    seed: int | None = None
    names: tuple = field(default_factory=lambda: projector_basis().names)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (36,):
            raise DomainError("expected 36 projector counts")
        if np.any(self.counts < 0):
            raise DomainError("counts must be nonnegative")
        if self.n0 <= 0:
            raise DomainError("acquisition scale N0 must be > 0")


def sample_counts(rates: np.ndarray, seed: int, n0: float) -> CountRecord:
    """Independent Poisson draws around ``rates``; reproducible by seed."""
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise DomainError("rates must be nonnegative")
    rng = np.random.default_rng(seed)
    counts = rng.poisson(rates).astype(float)
    return CountRecord(counts=counts, n0=n0, seed=seed)


# ---------------------------------------------------------------------------
# maximum-likelihood reconstruction

_DIAG_SLOTS = [(0, 0), (1, 1), (2, 2), (3, 3)]
_LOWER_SLOTS = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)]


def _t_from_params(t: np.ndarray) -> np.ndarray:
    m = np.zeros((4, 4), dtype=complex)
    for k, (r, c) in enumerate(_DIAG_SLOTS):
        m[r, c] = t[k]
    for k, (r, c) in enumerate(_LOWER_SLOTS):
        m[r, c] = t[4 + 2 * k] + 1j * t[5 + 2 * k]
    return m


def _params_from_t(m: np.ndarray) -> np.ndarray:
    t = np.zeros(16)
    for k, (r, c) in enumerate(_DIAG_SLOTS):
        t[k] = m[r, c].real
    for k, (r, c) in enumerate(_LOWER_SLOTS):
        t[4 + 2 * k] = m[r, c].real
        t[5 + 2 * k] = m[r, c].imag
    return t


def _rho_from_t(tmat: np.ndarray) -> np.ndarray:
    rho = tmat.conj().T @ tmat
    return rho / np.trace(rho).real


def _gather_grad(gmat: np.ndarray) -> np.ndarray:
    """d tr(Pi T^dag T) / d params given G = (T Pi)."""
    g = np.zeros(16)
    for k, (r, c) in enumerate(_DIAG_SLOTS):
        g[k] = 2.0 * gmat[r, c].real
    for k, (r, c) in enumerate(_LOWER_SLOTS):
        g[4 + 2 * k] = 2.0 * gmat[r, c].real
        g[5 + 2 * k] = 2.0 * gmat[r, c].imag
    return g


def _initial_t(counts: np.ndarray, n0: float,
               basis: ProjectorSet) -> np.ndarray:
    """Linear inversion projected onto the physical cone."""
    probs = counts / n0
    design = basis.projectors.reshape(36, 16)
    rho_vec, *_ = np.linalg.lstsq(design.conj(), probs.astype(complex),
                                  rcond=None)
    rho = rho_vec.reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals.real, 1e-6, None)
    rho = (vecs * vals) @ vecs.conj().T
    rho = rho / np.trace(rho).real
    lower = np.linalg.cholesky(rho)
    return _params_from_t(lower.conj().T)


@dataclass
class MleResult:
    rho: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    ll_trace: np.ndarray


def _log_likelihood(mu: np.ndarray, counts: np.ndarray) -> float:
    mu_safe = np.maximum(mu, 1e-300)
    terms = np.where(counts > 0, counts * np.log(mu_safe), 0.0) - mu
    return float(terms.sum())


def _rho_log_likelihood(rho: np.ndarray, counts: np.ndarray, n0: float,
                        projectors: np.ndarray) -> float:
    p = np.einsum("kij,ji->k", projectors, rho).real
    mu = n0 * np.clip(p, 0.0, None)
    return _log_likelihood(mu, counts)


def _fixed_point_phase(rho: np.ndarray, counts: np.ndarray, n0: float,
                       projectors: np.ndarray, max_iter: int,
                       rel_tol: float, ll_trace: list):
    """Iterate rho <- R rho R / tr with R built from count/probability
    ratios; diluted steps keep the likelihood non-decreasing.

    This fixed-point phase closes in on the optimum fast even when it
    sits on the rank boundary (pure states), where curvature-based
    steps on the triangular factor crawl.
    """
    pos = counts > 0
    c_pos = counts[pos]
    proj_pos = projectors[pos]
    ll = _rho_log_likelihood(rho, counts, n0, projectors)
    ll_trace.append(ll)
    it = 0
    for it in range(1, max_iter + 1):
        p = np.einsum("kij,ji->k", proj_pos, rho).real
        p = np.maximum(p, 1e-300)
        r_op = np.tensordot(c_pos / p, proj_pos, axes=1)
        r_op = r_op / np.trace(r_op).real  # scale-free
        accepted = False
        for dilution in (None, 1.0, 0.1, 0.01):
            if dilution is None:
                step = r_op
            else:
                step = (np.eye(4) + dilution * r_op) / (1.0 + dilution)
            cand = step @ rho @ step
            tr = np.trace(cand).real
            if tr <= 0:
                continue
            cand = cand / tr
            cand = 0.5 * (cand + cand.conj().T)
            ll_new = _rho_log_likelihood(cand, counts, n0, projectors)
            if np.isfinite(ll_new) and ll_new >= ll:
                accepted = True
                break
        if not accepted:
            break
        gain = ll_new - ll
        rho = cand
        ll = ll_new
        ll_trace.append(ll)
        if gain <= rel_tol * (abs(ll) + 1.0):
            break
    return rho, ll, it


def mle_reconstruct(record: CountRecord,
                    basis: ProjectorSet | None = None,
                    max_iter: int = 500,
                    rel_tol: float = 1e-10) -> MleResult:
    """Maximum-likelihood density matrix for a count record.

    A likelihood-monotone fixed-point phase carries the estimate close
    to the optimum; damped Fisher scoring on the 16 real parameters of
    the lower-triangular factor rho = T^dag T / tr(T^dag T) then
    polishes it.  Steps in both phases are accepted only when the
    Poisson log-likelihood does not decrease, so the recorded trace is
    monotone, and the factorization keeps every iterate physical.
    """
    if basis is None:
        basis = projector_basis()
    counts = record.counts
    if counts.sum() <= 0:
        raise DomainError("cannot reconstruct from all-zero counts")
    n0 = record.n0
    projectors = basis.projectors

    ll_trace: list = []
    rho0 = _rho_from_t(_t_from_params(_initial_t(counts, n0, basis)))
    rho0 = 0.5 * (rho0 + rho0.conj().T)
    rho1, ll, fp_iters = _fixed_point_phase(
        rho0, counts, n0, projectors, max_iter=40 * max_iter,
        rel_tol=1e-2 * rel_tol, ll_trace=ll_trace)

    # hand off to the triangular factor (tiny ridge keeps it invertible)
    vals, vecs = np.linalg.eigh(rho1)
    vals = np.clip(vals, 1e-14, None)
    rho1 = (vecs * vals) @ vecs.conj().T
    rho1 = rho1 / np.trace(rho1).real
    t = _params_from_t(np.linalg.cholesky(rho1).conj().T)
    lam = 1e-3

    def forward(tvec):
        tmat = _t_from_params(tvec)
        ttt = tmat.conj().T @ tmat
        s = float(np.trace(ttt).real)
        a_k = np.einsum("kij,ji->k", projectors, ttt).real
        mu = n0 * np.clip(a_k, 0.0, None) / s
        return tmat, s, a_k, mu

    tmat, s, a_k, mu = forward(t)
    ll_polish = _log_likelihood(mu, counts)
    best_rho = _rho_from_t(tmat)
    best_ll = ll_polish
    if best_ll < ll:
        # ridge cost exceeded the gain; keep the fixed-point answer
        best_rho, best_ll = rho1, ll
    converged = True
    it = 0
    floor = 1e-12 * n0
    for it in range(1, max_iter + 1):
        jac = np.zeros((36, 16))
        g_s = _gather_grad(tmat)  # gradient of s (Pi = identity)
        for k in range(36):
            g_a = _gather_grad(tmat @ projectors[k])
            jac[k] = n0 * (g_a * s - a_k[k] * g_s) / s**2
        w = 1.0 / np.maximum(mu, floor)
        resid = counts - mu
        jtw = jac.T * w
        hess = jtw @ jac
        grad = jtw @ resid

        accepted = False
        for _ in range(12):
            damped = hess + lam * np.diag(np.diag(hess)) \
                + 1e-12 * np.eye(16)
            try:
                step = np.linalg.solve(damped, grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            t_new = t + step
            tmat_n, s_n, a_n, mu_n = forward(t_new)
            ll_new = _log_likelihood(mu_n, counts)
            if np.isfinite(ll_new) and ll_new >= ll_polish:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        gain = ll_new - ll_polish
        t, tmat, s, a_k, mu = t_new, tmat_n, s_n, a_n, mu_n
        ll_polish = ll_new
        if ll_polish > best_ll:
            best_ll = ll_polish
            best_rho = _rho_from_t(tmat)
            ll_trace.append(best_ll)
        lam = max(lam / 10.0, 1e-12)
        if gain <= rel_tol * (abs(ll_polish) + 1.0):
            break

    rho = 0.5 * (best_rho + best_rho.conj().T)
    return MleResult(rho=rho, log_likelihood=best_ll,
                     iterations=fp_iters + it, converged=converged,
                     ll_trace=np.asarray(ll_trace))


# ---------------------------------------------------------------------------
# bootstrap error bars


@dataclass
class BootstrapResult:
    means: dict
    stds: dict
    n_samples: int
    failures: int
    seed: int


def bootstrap_metrics(record: CountRecord, n_samples: int = 100,
                      seed: int = 0, threads: int = 1) -> BootstrapResult:
    """Poisson-resample the counts, reconstruct each sample and report
    mean and standard deviation of the entanglement metrics.

    Resample streams derive from one master seed; failed
    reconstructions are retried up to 3 times with fresh draws and
    otherwise counted.
    """
    if n_samples < 2:
        raise DomainError("bootstrap needs n_samples >= 2")
    basis = projector_basis()
    master = np.random.SeedSequence(seed)
    children = master.spawn(n_samples)

    def one(child):
        rng = np.random.default_rng(child)
        for _ in range(3):
            counts = rng.poisson(record.counts).astype(float)
            if counts.sum() <= 0:
                continue
            try:
                res = mle_reconstruct(
                    CountRecord(counts=counts, n0=record.n0), basis=basis)
            except NumericError:
                continue
            rho = res.rho
            return {
                "concurrence": concurrence(rho),
                "bell_fidelity": bell_fidelity(rho),
                "purity": purity(rho),
            }
        return None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, children))
    else:
        results = [one(child) for child in children]

    failures = sum(1 for r in results if r is None)
    good = [r for r in results if r is not None]
    if not good:
        raise NumericError("every bootstrap resample failed to reconstruct")
    means = {}
    stds = {}
    for key in ("concurrence", "bell_fidelity", "purity"):
        vals = np.array([r[key] for r in good])
        means[key] = float(vals.mean())
        stds[key] = float(vals.std(ddof=1))
    return BootstrapResult(means=means, stds=stds, n_samples=n_samples,
                           failures=failures, seed=seed)
