"""Simulated annealing over unitary matrices.

Two objectives are minimized:

* the average entanglement of a pure-state decomposition generated by a
  unitary ``U_E`` on the ancilla of an M-dimensional purification
  (entanglement of formation upper bound), and
* the conditional entropy ``S(A|B)`` after a rank-one projective
  measurement on B whose basis is the columns of a unitary ``V_B``
  (discord of two qutrits).

The Metropolis temperature follows ``c0 * exp(-decay * k)`` for stages
``k = 1..K``.  Proposals rotate one random pair of decomposition elements
(rows of ``U_E``) or measurement vectors (columns of ``V_B``) by
``exp(i * step * h)`` with ``h`` a random traceless 2x2 Hermitian matrix,
so each proposal only re-evaluates the two affected terms.  The step is
adapted every ``ADAPT_WINDOW`` proposals toward a 20-50% acceptance rate.

The inner loops are compiled with numba and use a fast closed-form 3x3
eigen-solver; reported values are recomputed with LAPACK at the best
unitaries found.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import acos, cos, exp, log2, pi, sin, sqrt

import numba as nb
import numpy as np

from .correlations import CorrelationReport, Measurement, is_swap_symmetric, mutual_information, purify
from .exceptions import DimensionError, DomainError
from .qmath import EIGEN_FLOOR, DensityMatrix, haar_unitary, partial_trace, von_neumann_entropy

ADAPT_WINDOW = 100
ACCEPT_LOW, ACCEPT_HIGH = 0.2, 0.5
STEP_MIN, STEP_MAX = 1e-9, pi
_WEIGHT_FLOOR = 1e-14


@dataclass(frozen=True)
class AnnealConfig:
    """Schedule and search-space settings.

    Defaults reproduce the published procedure: ten stages of 5e4
    proposals at temperature ``1e-9 * exp(-2 k)`` with a ten-dimensional
    purification space.  ``restarts`` independent runs (the first from the
    identity, the rest from Haar-random unitaries) are merged best-of.
    """

    K: int = 10
    iters_per_stage: int = 50_000
    c0: float = 1e-9
    decay: float = 2.0
    purification_dim: int = 10
    initial_step: float = 0.5
    seed: int = 0
    restarts: int = 8

    def __post_init__(self) -> None:
        if self.K < 1 or self.iters_per_stage < 1 or self.purification_dim < 1 or self.restarts < 1:
            raise DomainError("K, iters_per_stage, purification_dim and restarts must be >= 1")
        if self.c0 <= 0 or self.decay < 0:
            raise DomainError("c0 must be > 0 and decay >= 0")
        if not self.initial_step > 0:
            raise DomainError("initial_step must be > 0")


@dataclass(frozen=True)
class AnnealResult:
    """Outcome of an annealing run.

    ``value`` is the reported quantity in bits (EoF bound or discord) and
    ``trace`` its best value after each stage.  ``objective`` is the
    minimized quantity itself (equal to ``value`` for EoF, the conditional
    entropy for discord).
    """

    value: float
    optimizer: np.ndarray = field(repr=False)
    trace: np.ndarray = field(repr=False)
    evaluations: int
    objective: float


def annealing_schedule(k: int, cfg: AnnealConfig) -> float:
    """Temperature of stage ``k`` (1-based)."""
    if not 1 <= k <= cfg.K:
        raise DomainError(f"stage index {k} outside 1..{cfg.K}")
    return cfg.c0 * np.exp(-cfg.decay * k)


@nb.njit(cache=True)
def metropolis_accept(delta, temperature, u):
    """Metropolis rule with uniform variate ``u``: improvements always pass."""
    if delta <= 0.0:
        return True
    if temperature <= 0.0:
        return False
    return u < exp(-delta / temperature)


# --- compiled helpers -------------------------------------------------------


@nb.njit(cache=True)
def _xlogx(x):
    return x * log2(x) if x > 1e-300 else 0.0


@nb.njit(cache=True)
def _eig3(a00, a11, a22, a01, a02, a12):
    # trigonometric solution for a 3x3 Hermitian matrix (Smith 1961)
    q = (a00 + a11 + a22) / 3.0
    p1 = abs(a01) ** 2 + abs(a02) ** 2 + abs(a12) ** 2
    d0, d1, d2 = a00 - q, a11 - q, a22 - q
    p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1
    if p2 < 1e-300:
        return q, q, q
    p = sqrt(p2 / 6.0)
    b00, b11, b22 = d0 / p, d1 / p, d2 / p
    b01, b02, b12 = a01 / p, a02 / p, a12 / p
    det = (
        b00 * (b11 * b22 - abs(b12) ** 2)
        - (b01 * (b01.conjugate() * b22 - b12 * b02.conjugate())).real
        + (b02 * (b01.conjugate() * b12.conjugate() - b11 * b02.conjugate())).real
    )
    r = det / 2.0
    if r <= -1.0:
        phi = pi / 3.0
    elif r >= 1.0:
        phi = 0.0
    else:
        phi = acos(r) / 3.0
    e1 = q + 2.0 * p * cos(phi)
    e3 = q + 2.0 * p * cos(phi + 2.0 * pi / 3.0)
    return e1, 3.0 * q - e1 - e3, e3


@nb.njit(cache=True)
def _weighted_entropy(s):
    """``w * S(s / w)`` for an unnormalized PSD block ``s`` with trace ``w``."""
    n = s.shape[0]
    w = 0.0
    for i in range(n):
        w += s[i, i].real
    if w < _WEIGHT_FLOOR:
        return 0.0
    total = _xlogx(w)
    floor = EIGEN_FLOOR * w
    if n == 3:
        e1, e2, e3 = _eig3(s[0, 0].real, s[1, 1].real, s[2, 2].real, s[0, 1], s[0, 2], s[1, 2])
        for e in (e1, e2, e3):
            if e > floor:
                total -= _xlogx(e)
    elif n == 2:
        tr = s[0, 0].real + s[1, 1].real
        disc = sqrt(max(((s[0, 0].real - s[1, 1].real) / 2.0) ** 2 + abs(s[0, 1]) ** 2, 0.0))
        for e in (tr / 2.0 + disc, tr / 2.0 - disc):
            if e > floor:
                total -= _xlogx(e)
    else:
        ev = np.linalg.eigvalsh(s)
        for e in ev:
            if e > floor:
                total -= _xlogx(e)
    return max(total, 0.0)


@nb.njit(cache=True)
def _pair_rotation(rng, step):
    """Random ``exp(i step x.sigma)`` with ``x ~ N(0, I/3)``; returns ``(g00, g01, g10, g11)``."""
    x = rng.standard_normal() / sqrt(3.0)
    y = rng.standard_normal() / sqrt(3.0)
    z = rng.standard_normal() / sqrt(3.0)
    r = sqrt(x * x + y * y + z * z)
    if r < 1e-300:
        return 1.0 + 0j, 0j, 0j, 1.0 + 0j
    c, s = cos(step * r), sin(step * r) / r
    return complex(c, s * z), complex(s * y, s * x), complex(-s * y, s * x), complex(c, -s * z)


@nb.njit(cache=True)
def _pick_pair(rng, n):
    i = rng.integers(0, n)
    j = rng.integers(0, n - 1)
    if j >= i:
        j += 1
    return i, j


@nb.njit(cache=True)
def _polar(u):
    w, _, vh = np.linalg.svd(u)
    return w @ vh


@nb.njit(cache=True)
def _row_entropy(row, da, db, buf):
    for a in range(da):
        for c in range(da):
            acc = 0j
            for b in range(db):
                acc += row[a * db + b] * row[c * db + b].conjugate()
            buf[a, c] = acc
    return _weighted_entropy(buf)


@nb.njit(cache=True)
def _eof_kernel(phi, u0, da, db, temps, iters, step0, rng):
    m = u0.shape[0]
    n_st = temps.shape[0]
    u = u0.copy()
    psi = u @ phi
    buf = np.empty((da, da), np.complex128)
    contrib = np.empty(m)
    for i in range(m):
        contrib[i] = _row_entropy(psi[i], da, db, buf)
    cur = contrib.sum()
    best = cur
    best_u = u.copy()
    stage_best = np.empty((n_st, m, m), np.complex128)
    new_i = np.empty(phi.shape[1], np.complex128)
    new_j = np.empty(phi.shape[1], np.complex128)
    step = step0
    evals = 1
    for k in range(n_st):
        temp = temps[k]
        acc = 0
        for it in range(iters):
            i, j = _pick_pair(rng, m)
            g00, g01, g10, g11 = _pair_rotation(rng, step)
            for c in range(phi.shape[1]):
                new_i[c] = g00 * psi[i, c] + g01 * psi[j, c]
                new_j[c] = g10 * psi[i, c] + g11 * psi[j, c]
            ci = _row_entropy(new_i, da, db, buf)
            cj = _row_entropy(new_j, da, db, buf)
            delta = ci + cj - contrib[i] - contrib[j]
            evals += 1
            if metropolis_accept(delta, temp, rng.random()):
                psi[i, :] = new_i
                psi[j, :] = new_j
                contrib[i] = ci
                contrib[j] = cj
                cur += delta
                for c in range(m):
                    ui = u[i, c]
                    uj = u[j, c]
                    u[i, c] = g00 * ui + g01 * uj
                    u[j, c] = g10 * ui + g11 * uj
                acc += 1
                if cur < best:
                    best = cur
                    best_u[:, :] = u
            if (it + 1) % ADAPT_WINDOW == 0:
                rate = acc / ADAPT_WINDOW
                if rate < ACCEPT_LOW:
                    step = max(step * 0.7, STEP_MIN)
                elif rate > ACCEPT_HIGH:
                    step = min(step * 1.4, STEP_MAX)
                acc = 0
        # re-unitarize and refresh to keep round-off from accumulating
        u = _polar(u)
        psi = u @ phi
        for i in range(m):
            contrib[i] = _row_entropy(psi[i], da, db, buf)
        cur = contrib.sum()
        if cur < best:
            best = cur
            best_u[:, :] = u
        stage_best[k] = best_u
    return best, best_u, stage_best, evals


@nb.njit(cache=True)
def _conditional_block(r4, v, l, da, db, buf):
    # buf[a, c] = sum_{b, d} conj(v[b, l]) rho[a, b, c, d] v[d, l]
    for a in range(da):
        for c in range(da):
            acc = 0j
            for b in range(db):
                vb = v[b, l].conjugate()
                for d in range(db):
                    acc += vb * r4[a, b, c, d] * v[d, l]
            buf[a, c] = acc
    return _weighted_entropy(buf)


@nb.njit(cache=True)
def _discord_kernel(r4, v0, temps, iters, step0, rng):
    da, db = r4.shape[0], r4.shape[1]
    n_st = temps.shape[0]
    v = v0.copy()
    buf = np.empty((da, da), np.complex128)
    contrib = np.empty(db)
    for l in range(db):
        contrib[l] = _conditional_block(r4, v, l, da, db, buf)
    cur = contrib.sum()
    best = cur
    best_v = v.copy()
    stage_best = np.empty((n_st, db, db), np.complex128)
    trial = np.empty((db, db), np.complex128)
    step = step0
    evals = 1
    for k in range(n_st):
        temp = temps[k]
        acc = 0
        for it in range(iters):
            i, j = _pick_pair(rng, db)
            g00, g01, g10, g11 = _pair_rotation(rng, step)
            trial[:, :] = v
            for b in range(db):
                vi = v[b, i]
                vj = v[b, j]
                trial[b, i] = g00 * vi + g10 * vj
                trial[b, j] = g01 * vi + g11 * vj
            ci = _conditional_block(r4, trial, i, da, db, buf)
            cj = _conditional_block(r4, trial, j, da, db, buf)
            delta = ci + cj - contrib[i] - contrib[j]
            evals += 1
            if metropolis_accept(delta, temp, rng.random()):
                v[:, :] = trial
                contrib[i] = ci
                contrib[j] = cj
                cur += delta
                acc += 1
                if cur < best:
                    best = cur
                    best_v[:, :] = v
            if (it + 1) % ADAPT_WINDOW == 0:
                rate = acc / ADAPT_WINDOW
                if rate < ACCEPT_LOW:
                    step = max(step * 0.7, STEP_MIN)
                elif rate > ACCEPT_HIGH:
                    step = min(step * 1.4, STEP_MAX)
                acc = 0
        v = _polar(v)
        for l in range(db):
            contrib[l] = _conditional_block(r4, v, l, da, db, buf)
        cur = contrib.sum()
        if cur < best:
            best = cur
            best_v[:, :] = v
        stage_best[k] = best_v
    return best, best_v, stage_best, evals


# --- exact objectives -------------------------------------------------------


def _weighted_entropies(blocks: np.ndarray) -> np.ndarray:
    w = np.einsum("...ii->...", blocks).real
    ev = np.linalg.eigvalsh(blocks)
    out = np.zeros(w.shape)
    for idx in np.ndindex(w.shape):
        if w[idx] < _WEIGHT_FLOOR:
            continue
        lam = ev[idx] / w[idx]
        lam = lam[lam > EIGEN_FLOOR]
        out[idx] = max(-w[idx] * float(np.sum(lam * np.log2(lam))), 0.0)
    return out


def decomposition_entanglement(phi: np.ndarray, u: np.ndarray, dims: tuple[int, int]) -> float:
    """Average entanglement ``sum_i q_i S(A)_i`` of the decomposition ``(u @ phi)`` rows."""
    da, db = dims
    psi = (u @ phi).reshape(-1, da, db)
    blocks = np.einsum("mab,mcb->mac", psi, psi.conj())
    return float(_weighted_entropies(blocks).sum())


def measured_conditional_entropy(rho: DensityMatrix, v: np.ndarray) -> float:
    """``sum_l p_l S(rho_A|l)`` for the projective measurement on B with basis columns ``v``."""
    da, db = rho.dims
    r4 = rho.matrix.reshape(da, db, da, db)
    blocks = np.einsum("ajcd,jl,dl->lac", r4, v.conj(), v)
    return float(_weighted_entropies(blocks).sum())


# --- drivers ----------------------------------------------------------------


def _require_small_bipartite(rho: DensityMatrix) -> tuple[int, int]:
    if len(rho.dims) != 2 or any(d not in (2, 3) for d in rho.dims):
        raise DimensionError(f"annealed measures support 2x2 and 3x3 states, got dims {rho.dims}")
    return rho.dims


def _temperatures(cfg: AnnealConfig) -> np.ndarray:
    return np.array([annealing_schedule(k, cfg) for k in range(1, cfg.K + 1)])


def _restart_rngs(cfg: AnnealConfig) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)]


def _anneal(kernel_call, exact, n: int, cfg: AnnealConfig):
    """Run all restarts, then rebuild the per-stage trace from exact evaluations."""
    trace = np.full(cfg.K, np.inf)
    best_val, best_x = np.inf, None
    evals = 0
    for r, rng in enumerate(_restart_rngs(cfg)):
        x0 = np.eye(n, dtype=complex) if r == 0 else haar_unitary(n, rng)
        _, _, stage_best, ev = kernel_call(x0, rng)
        evals += ev
        start = exact(x0)
        if start < best_val:
            best_val, best_x = start, x0
        for k in range(cfg.K):
            val = exact(stage_best[k])
            if val < trace[k]:
                trace[k] = val
            if val < best_val:
                best_val, best_x = val, stage_best[k].copy()
        trace[0] = min(trace[0], start)
    trace = np.minimum.accumulate(trace)
    return best_val, best_x, trace, evals


def anneal_eof(rho: DensityMatrix, cfg: AnnealConfig = AnnealConfig()) -> AnnealResult:
    """Upper bound on the entanglement of formation by annealing the ancilla unitary.

    The state is purified into an ``cfg.purification_dim``-dimensional
    ancilla; each unitary ``U_E`` on the ancilla induces the decomposition
    obtained by measuring the ancilla in its computational basis after
    ``U_E``.  Entanglement of each element is the entropy of its reduced
    state on A.
    """
    dims = _require_small_bipartite(rho)
    m = cfg.purification_dim
    psi = purify(rho, m).amplitudes.reshape(rho.dim, m)
    phi = np.ascontiguousarray(psi.T)
    temps = _temperatures(cfg)

    def call(x0, rng):
        return _eof_kernel(phi, x0, dims[0], dims[1], temps, cfg.iters_per_stage, cfg.initial_step, rng)

    value, u, trace, evals = _anneal(call, lambda x: decomposition_entanglement(phi, x, dims), m, cfg)
    return AnnealResult(value=value, optimizer=u, trace=trace, evaluations=evals, objective=value)


def anneal_discord_qutrit(rho: DensityMatrix, cfg: AnnealConfig = AnnealConfig()) -> AnnealResult:
    """Discord with the measurement basis on B found by annealing.

    Minimizes ``S(A|B)`` over unitaries ``V_B``; the discord is then
    ``S(B) - S(AB) + min S(A|B)``.
    """
    dims = _require_small_bipartite(rho)
    r4 = np.ascontiguousarray(rho.matrix.reshape(dims + dims))
    temps = _temperatures(cfg)

    def call(x0, rng):
        return _discord_kernel(r4, x0, temps, cfg.iters_per_stage, cfg.initial_step, rng)

    h, v, trace, evals = _anneal(call, lambda x: measured_conditional_entropy(rho, x), dims[1], cfg)
    offset = von_neumann_entropy(partial_trace(rho, 1)) - von_neumann_entropy(rho)
    return AnnealResult(value=offset + h, optimizer=v, trace=offset + trace, evaluations=evals, objective=h)


def annealed_report(rho: DensityMatrix, cfg: AnnealConfig = AnnealConfig(), eof: bool = True) -> CorrelationReport:
    """Full correlation budget of a small bipartite state using the annealers.

    With ``eof=False`` the entanglement field is NaN.
    """
    d = anneal_discord_qutrit(rho, cfg)
    mi = mutual_information(rho)
    ent = anneal_eof(rho, cfg).value if eof else float("nan")
    return CorrelationReport(
        mutual_information=mi,
        classical=mi - d.value,
        discord=d.value,
        entanglement=ent,
        optimal_measurement=Measurement("annealed basis", unitary=d.optimizer),
        symmetric=is_swap_symmetric(rho),
    )
