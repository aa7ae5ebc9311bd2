"""Time evolutions that prepare maximally dissonant states.

Three mechanisms are covered:

* collective dissipation of two qubits by the Cartesian collective spin
  components (Bell-basis rate equations and the full master equation),
* Tavis-Cummings exchange of two or four atoms with a single cavity mode,
* the off-resonant two-register Dicke model in its effective
  three-level form.

Coherent evolutions are written in the interaction picture as a
tridiagonal "ladder" ``i da/dt = M(t) a`` with ``M[k+1, k] = c_k exp(i w_k t)``
and integrated with fixed-step classical Runge-Kutta.  Linear autonomous
problems (rate equations, master equation) use the exact RK4 propagator
``sum_{j<=4} (hL)^j / j!``.

Qubit convention: ``|0> = |g>``, ``|1> = |e>``.  The pair qutrit basis is
ordered ``(|ee>, |+>, |gg>)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .exceptions import ContractError, DomainError
from .qmath import DensityMatrix, StateVector, partial_trace

DEFAULT_STEPS_PER_UNIT = 1000


# --- collective dissipation --------------------------------------------------

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
# sign chosen so that S_y|2> = -i|3> and S_y|3> = i|2>; the dissipator is
# quadratic in S_y and does not see it
_SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


def _collective(s: np.ndarray) -> np.ndarray:
    return (np.kron(s, _I2) + np.kron(_I2, s)) / 2


@dataclass(frozen=True)
class CollectiveOps:
    """``S_a = (sigma_1a + sigma_2a) / 2`` in the two-qubit computational basis."""

    sx: np.ndarray = field(default_factory=lambda: _collective(_SX))
    sy: np.ndarray = field(default_factory=lambda: _collective(_SY))
    sz: np.ndarray = field(default_factory=lambda: _collective(_SZ))

    def __iter__(self):
        return iter((self.sx, self.sy, self.sz))


COLLECTIVE_OPS = CollectiveOps()


@dataclass(frozen=True)
class LindbladRates:
    gamma_x: float = 1.0
    gamma_y: float = 1.0
    gamma_z: float = 0.0

    def __post_init__(self) -> None:
        if min(self.gamma_x, self.gamma_y, self.gamma_z) < 0:
            raise DomainError("decay rates must be non-negative")

    @property
    def max_rate(self) -> float:
        return max(self.gamma_x, self.gamma_y, self.gamma_z)


def _time_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0 or t[0] < 0 or np.any(np.diff(t) < 0):
        raise DomainError("time grid must be non-empty, non-negative and non-decreasing")
    return t


def uniform_grid(t_max: float, dt: float) -> np.ndarray:
    """``0, dt, 2 dt, ...`` up to ``t_max`` inclusive (rounded to the nearest step)."""
    if t_max <= 0 or dt <= 0:
        raise DomainError("t_max and dt must be positive")
    n = int(round(t_max / dt))
    return np.arange(n + 1) * dt


def _rk4_propagator(gen: np.ndarray, h: float) -> np.ndarray:
    x = h * gen
    out = np.eye(gen.shape[0], dtype=gen.dtype)
    term = out
    for j in range(1, 5):
        term = term @ x / j
        out = out + term
    return out


def _evolve_linear(gen: np.ndarray, y0: np.ndarray, times: np.ndarray, max_step: float) -> np.ndarray:
    out = np.empty((times.size, y0.size), dtype=np.result_type(gen, y0))
    y = y0.astype(out.dtype)
    out[0] = y
    cache: dict[tuple[int, float], np.ndarray] = {}
    for i in range(1, times.size):
        span = times[i] - times[i - 1]
        if span > 0:
            n = max(1, int(np.ceil(span / max_step - 1e-9)))
            h = span / n
            key = (n, round(h, 15))
            if key not in cache:
                cache[key] = np.linalg.matrix_power(_rk4_propagator(gen, h), n)
            y = cache[key] @ y
        out[i] = y
    return out


def rate_eq_analytic(gamma: float, t):
    """Closed-form Bell populations for rates ``(gamma, gamma, 0)`` starting from ``|00>``.

    Returns ``(rho11, rho22, rho33)``; ``t`` may be a scalar or an array.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be non-negative")
    p = (1.0 + 0.5 * np.exp(-3.0 * gamma * t_arr)) / 3.0
    if t_arr.ndim == 0:
        p = float(p)
    return p, p, 1.0 - 2.0 * p


def rate_matrix(rates: LindbladRates) -> np.ndarray:
    gx, gy, gz = rates.gamma_x, rates.gamma_y, rates.gamma_z
    return np.array(
        [
            [-gx - gz, gz, gx],
            [gz, -gy - gz, gy],
            [gx, gy, -gx - gy],
        ]
    )


@dataclass(frozen=True)
class PopulationTrajectory:
    times: np.ndarray
    populations: np.ndarray


def rate_eq_evolve(rates: LindbladRates, init, t_grid, max_step: float | None = None) -> PopulationTrajectory:
    """Integrate the three-level Bell-population rate equations.

    ``init`` holds ``(rho11, rho22, rho33)`` and must sum to one (the
    singlet is assumed empty).  The default step is ``1e-3 / max_rate``.
    """
    y0 = np.asarray(init, dtype=float)
    if y0.shape != (3,) or abs(y0.sum() - 1.0) > 1e-10 or np.any(y0 < -1e-12):
        raise ContractError(f"initial populations {init} must be three non-negative numbers summing to 1")
    times = _time_grid(t_grid)
    if max_step is None:
        max_step = 1.0 / (DEFAULT_STEPS_PER_UNIT * rates.max_rate) if rates.max_rate > 0 else np.inf
    return PopulationTrajectory(times, _evolve_linear(rate_matrix(rates), y0, times, max_step))


def liouvillian(rates: LindbladRates, h0: np.ndarray | None = None) -> np.ndarray:
    """Row-major superoperator of ``-i[H0, .] + sum_a g_a (S_a . S_a - {S_a^2, .} / 2)``.

    For Hermitian ``S`` each dissipator equals ``-(g/2) [S, [S, .]]``.
    """
    eye = np.eye(4)
    gen = np.zeros((16, 16), dtype=complex)
    for g, s in zip((rates.gamma_x, rates.gamma_y, rates.gamma_z), COLLECTIVE_OPS):
        if g == 0:
            continue
        s2 = s @ s
        gen += g * (np.kron(s, s.T) - 0.5 * (np.kron(s2, eye) + np.kron(eye, s2.T)))
    if h0 is not None:
        h0 = np.asarray(h0, dtype=complex)
        gen += -1j * (np.kron(h0, eye) - np.kron(eye, h0.T))
    return gen


@dataclass(frozen=True)
class DensityTrajectory:
    """Sequence of density matrices sampled on ``times``."""

    times: np.ndarray
    matrices: np.ndarray
    dims: tuple[int, ...]

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.matrices[i], self.dims)


def lindblad_evolve(
    rho0: DensityMatrix,
    rates: LindbladRates,
    t_grid,
    h0: np.ndarray | None = None,
    max_step: float | None = None,
) -> DensityTrajectory:
    """Master-equation evolution of two qubits under collective dissipation."""
    if rho0.dims != (2, 2):
        raise ContractError(f"expected a two-qubit state, got dims {rho0.dims}")
    times = _time_grid(t_grid)
    if max_step is None:
        scale = max(rates.max_rate, np.max(np.abs(h0)) if h0 is not None else 0.0)
        max_step = 1.0 / (DEFAULT_STEPS_PER_UNIT * scale) if scale > 0 else np.inf
    vecs = _evolve_linear(liouvillian(rates, h0), rho0.matrix.ravel(), times, max_step)
    mats = vecs.reshape(-1, 4, 4)
    mats = (mats + mats.conj().transpose(0, 2, 1)) / 2
    return DensityTrajectory(times, mats, (2, 2))


# --- coherent ladders ---------------------------------------------------------


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Interaction-picture amplitudes ``amplitudes[t, k]`` over ``basis_labels``."""

    times: np.ndarray
    amplitudes: np.ndarray
    basis_labels: tuple[str, ...]

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norms(self) -> np.ndarray:
        return self.populations().sum(axis=-1)

    def state(self, i: int) -> StateVector:
        return StateVector(self.amplitudes[i], self.basis_labels)


def ladder_evolve(couplings, frequencies, a0, times, max_step: float) -> np.ndarray:
    """RK4 solution of ``i da/dt = M(t) a`` for a tridiagonal ``M``.

    ``M[k+1, k] = couplings[..., k] * exp(1j * frequencies[..., k] * t)`` and
    ``M[k, k+1]`` is its conjugate.  Leading axes of ``couplings`` and
    ``frequencies`` are batch axes evolved in lockstep.  Returns an array
    of shape ``(len(times),) + batch + (n,)``.
    """
    c = np.asarray(couplings, dtype=float)
    w = np.asarray(frequencies, dtype=float)
    c, w = np.broadcast_arrays(c, w)
    batch = c.shape[:-1]
    a = np.broadcast_to(np.asarray(a0, dtype=complex), batch + (c.shape[-1] + 1,)).copy()
    times = _time_grid(times)

    def rhs(t, y):
        low = c * np.exp(1j * w * t)
        out = np.zeros_like(y)
        out[..., 1:] += low * y[..., :-1]
        out[..., :-1] += low.conj() * y[..., 1:]
        return -1j * out

    out = np.empty((times.size,) + a.shape, dtype=complex)
    out[0] = a
    t = times[0]
    for i in range(1, times.size):
        span = times[i] - times[i - 1]
        n = max(1, int(np.ceil(span / max_step - 1e-9))) if span > 0 else 0
        h = span / n if n else 0.0
        for _ in range(n):
            k1 = rhs(t, a)
            k2 = rhs(t + h / 2, a + h / 2 * k1)
            k3 = rhs(t + h / 2, a + h / 2 * k2)
            k4 = rhs(t + h, a + h * k3)
            a = a + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = times[i]
        out[i] = a
    return out


@dataclass(frozen=True)
class CavityConfig:
    """Single-mode cavity with detuning ``delta`` (field minus atom), in units where ``g`` fixes time.

    ``dt`` is the output sampling; the integrator step defaults to
    ``min(dt, 1e-3 / g)``.
    """

    n: int = 0
    delta: float = 0.0
    g: float = 1.0
    t_max: float = 2.0
    dt: float = 1e-3
    max_step: float | None = None

    def __post_init__(self) -> None:
        if self.n < 0 or self.dt <= 0 or self.t_max <= 0 or self.g <= 0:
            raise DomainError("require n >= 0, g > 0, dt > 0 and t_max > 0")

    @property
    def times(self) -> np.ndarray:
        return uniform_grid(self.t_max, self.dt)

    @property
    def step(self) -> float:
        return self.max_step if self.max_step is not None else min(self.dt, 1.0 / (DEFAULT_STEPS_PER_UNIT * self.g))


def tavis_cummings_couplings(n_atoms: int, n: int, g: float = 1.0) -> np.ndarray:
    """Ladder couplings from ``|D_N, n>`` down to ``|D_0, n+N>`` under ``g a^dag J``."""
    out = []
    for k in range(n_atoms, 0, -1):
        m = n + (n_atoms - k)
        out.append(g * np.sqrt(k * (n_atoms - k + 1)) * np.sqrt(m + 1))
    return np.array(out)


def cavity_ladder(cfg: CavityConfig, n_atoms: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """``(couplings, frequencies)`` of the Tavis-Cummings ladder."""
    return tavis_cummings_couplings(n_atoms, cfg.n, cfg.g), np.full(n_atoms, float(cfg.delta))


def tavis_cummings_evolve(cfg: CavityConfig) -> AmplitudeTrajectory:
    """Two atoms from ``|ee>|n>`` in the basis ``{|ee,n>, |+,n+1>, |gg,n+2>}``."""
    times = cfg.times
    amps = ladder_evolve(*cavity_ladder(cfg), [1, 0, 0], times, cfg.step)
    n = cfg.n
    return AmplitudeTrajectory(times, amps, (f"ee,{n}", f"+,{n + 1}", f"gg,{n + 2}"))


def tavis_cummings4_evolve(cfg: CavityConfig) -> AmplitudeTrajectory:
    """Four atoms from ``|D_4>|n>``; basis ``|D_4,n>, |D_3,n+1>, ..., |D_0,n+4>``."""
    times = cfg.times
    amps = ladder_evolve(*cavity_ladder(cfg, 4), np.eye(5)[0], times, cfg.step)
    labels = tuple(f"D{4 - j},{cfg.n + j}" for j in range(5))
    return AmplitudeTrajectory(times, amps, labels)


@dataclass(frozen=True)
class DickeConfig:
    """Two atoms (coupling ``g1``, detuning ``delta1``) and ``N`` atoms (``g2``, ``delta2``) off resonance.

    Dispersive shifts follow ``lambda_j = g_j**2 / delta_j``.
    """

    delta1: float = 11.2
    delta2: float = 10.0
    g1: float = 1.0
    g2: float = 1.0
    N: int = 13
    t_max: float = 4.0
    dt: float = 1e-3
    max_step: float | None = None

    def __post_init__(self) -> None:
        if self.N < 1 or self.delta1 == 0 or self.delta2 == 0 or self.dt <= 0 or self.t_max <= 0:
            raise DomainError("require N >= 1, non-zero detunings, dt > 0 and t_max > 0")

    @property
    def lambda1(self) -> float:
        return self.g1**2 / self.delta1

    @property
    def lambda2(self) -> float:
        return self.g2**2 / self.delta2

    @property
    def omega12(self) -> float:
        return self.g1 * self.g2 / 2 * (1 / self.delta1 + 1 / self.delta2)

    @property
    def delta(self) -> float:
        return self.delta2 - self.delta1

    @property
    def delta_a(self) -> float:
        return -self.delta - self.lambda1 - self.lambda2 * (self.N - 1)

    @property
    def delta_b(self) -> float:
        return -self.delta + self.lambda1 - self.lambda2 * (self.N - 3)

    @property
    def times(self) -> np.ndarray:
        return uniform_grid(self.t_max, self.dt)

    @property
    def step(self) -> float:
        if self.max_step is not None:
            return self.max_step
        return min(self.dt, 1.0 / (DEFAULT_STEPS_PER_UNIT * max(self.g1, self.g2)))


def dicke_ladder(cfg: DickeConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(couplings, frequencies)`` of the effective three-level ladder."""
    c = cfg.omega12 * np.array([np.sqrt(2 * cfg.N), np.sqrt(4 * (cfg.N - 1))])
    # the upper element carries exp(i delta_a t), so the lower one rotates the other way
    return c, -np.array([cfg.delta_a, cfg.delta_b])


def dicke_effective_evolve(cfg: DickeConfig, t_grid=None) -> AmplitudeTrajectory:
    """Three-level evolution in ``{|ee,D0>, |+,D1>, |gg,D2>}`` from ``|ee,D0>``."""
    times = cfg.times if t_grid is None else _time_grid(t_grid)
    amps = ladder_evolve(*dicke_ladder(cfg), [1, 0, 0], times, cfg.step)
    return AmplitudeTrajectory(times, amps, ("ee,D0", "+,D1", "gg,D2"))


# --- reduced states -----------------------------------------------------------

_S2 = 1 / np.sqrt(2)
# pair qutrit states (|ee>, |+>, |gg>) as two-qubit kets with |0> = g, |1> = e
PAIR_KETS = np.array(
    [
        [0, 0, 0, 1],
        [0, _S2, _S2, 0],
        [1, 0, 0, 0],
    ],
    dtype=complex,
)


def cavity_joint_state(traj: AmplitudeTrajectory, i: int) -> StateVector:
    """Atoms-plus-field pure state at sample ``i``; the field is restricted to its three populated levels."""
    a = traj.amplitudes[i]
    if a.size != 3:
        raise ContractError("joint state is defined for the two-atom ladder")
    vec = sum(np.kron(PAIR_KETS[k], np.eye(3)[k]) * a[k] for k in range(3))
    return StateVector(vec, dims=(2, 2, 3))


def cavity_atomic_state(traj: AmplitudeTrajectory, i: int) -> DensityMatrix:
    """Two-atom state with the field traced out."""
    return partial_trace(cavity_joint_state(traj, i).density_matrix(), (0, 1))


def pair_state(populations) -> DensityMatrix:
    """``p1 |ee><ee| + p2 |+><+| + p3 |gg><gg|`` as a two-qubit density matrix."""
    p = np.asarray(populations, dtype=float)
    return DensityMatrix(np.einsum("k,ki,kj->ij", p, PAIR_KETS, PAIR_KETS.conj()), (2, 2))


def pair_states(populations: np.ndarray) -> np.ndarray:
    """Vectorized :func:`pair_state` without validation; shape ``(T, 4, 4)``."""
    return np.einsum("tk,ki,kj->tij", populations, PAIR_KETS, PAIR_KETS.conj())


def _dicke_pair_vectors() -> np.ndarray:
    # row k: |D_k^4> expanded on pair (x) pair, qutrit index 2 - (excitations in the pair)
    out = np.zeros((5, 9))
    for k in range(5):
        for j in range(3):
            if 0 <= k - j <= 2:
                out[k, 3 * (2 - j) + (2 - (k - j))] = np.sqrt(comb(2, j) * comb(2, k - j) / comb(4, k))
    return out


DICKE4_PAIR_VECTORS = _dicke_pair_vectors()


def dicke_bipartition(amplitudes) -> DensityMatrix:
    """Two-qutrit pure state of ``sum_k amplitudes[k] |D_k^4>`` split into pair (x) pair."""
    a = np.asarray(amplitudes, dtype=complex).ravel()
    if a.size != 5 or abs(np.vdot(a, a).real - 1.0) > 1e-9:
        raise ContractError("expected five amplitudes (D_0..D_4) with unit norm")
    psi = a @ DICKE4_PAIR_VECTORS
    return DensityMatrix.from_ket(psi, (3, 3))


def dicke_mixture(weights) -> DensityMatrix:
    """Two-qutrit state of ``sum_k weights[k] |D_k^4><D_k^4|`` (weights over D_0..D_4)."""
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != 5 or np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise ContractError("expected five non-negative weights (D_0..D_4) summing to 1")
    v = DICKE4_PAIR_VECTORS
    return DensityMatrix(np.einsum("k,ki,kj->ij", w, v, v), (3, 3))


def qutrit_family_weights(epsilon: float) -> np.ndarray:
    """Weights of D_0..D_4: ``epsilon`` on D_2 and ``(1 - epsilon) / 4`` on the others."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0, 1], got {epsilon}")
    w = np.full(5, (1.0 - epsilon) / 4)
    w[2] = epsilon
    return w


def qutrit_family_state(epsilon: float) -> DensityMatrix:
    return dicke_mixture(qutrit_family_weights(epsilon))


def four_atom_weights(traj: AmplitudeTrajectory) -> np.ndarray:
    """Dicke weights D_0..D_4 of the atoms at every sample (field traced out)."""
    return traj.populations()[:, ::-1]
