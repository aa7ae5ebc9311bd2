"""Dense complex linear algebra for small multipartite quantum states.

Everything here works on plain :class:`numpy.ndarray` objects; the two
container types :class:`DensityMatrix` and :class:`StateVector` only add
dimension metadata and validation on construction.  Index convention for
composite systems is row-major: the first subsystem is the most significant
digit, so ``tensor(a, b)`` equals ``numpy.kron(a, b)``.

All entropies are in bits.
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass
from math import prod
from typing import Sequence

import numpy as np

from .exceptions import ContractError, DimensionError, DomainError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
NORM_TOL = 1e-9
EIGEN_FLOOR = 1e-12


def _max_hermitian_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """Return True when ``max |a_ij - conj(a_ji)| < tol``."""
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and _max_hermitian_defect(a) < tol


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Trace-one positive semidefinite operator on ``prod(dims)`` levels.

    Parameters
    ----------
    matrix : array_like
        Square complex matrix.  A private read-only copy is stored.
    dims : sequence of int
        Subsystem dimensions, most significant first.
    check : bool, default True
        Validate trace, Hermiticity and positivity.  Disable only for
        intermediate objects whose validity is guaranteed by construction.

    Raises
    ------
    DimensionError
        If ``matrix`` is not square or ``prod(dims)`` differs from its size.
    ContractError
        If the trace, Hermiticity or positivity checks fail.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    check: InitVar[bool] = True

    def __post_init__(self, check: bool) -> None:
        m = np.array(self.matrix, dtype=complex)
        dims = tuple(int(d) for d in self.dims)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {m.shape}")
        if not dims or any(d < 1 for d in dims) or prod(dims) != m.shape[0]:
            raise DimensionError(f"dims {dims} do not multiply to matrix size {m.shape[0]}")
        if check:
            defect = _max_hermitian_defect(m)
            if defect >= HERMITIAN_TOL:
                raise ContractError(f"matrix is not Hermitian (max defect {defect:.3e})")
            tr = np.trace(m)
            if abs(tr - 1.0) >= TRACE_TOL:
                raise ContractError(f"trace is {tr.real:.12g}{tr.imag:+.3g}j, expected 1")
            lowest = np.linalg.eigvalsh(m)[0]
            if lowest <= -POSITIVITY_TOL:
                raise ContractError(f"matrix is not positive semidefinite (min eigenvalue {lowest:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, psi: np.ndarray | "StateVector", dims: Sequence[int] | None = None) -> "DensityMatrix":
        """Projector onto a normalized pure state."""
        if isinstance(psi, StateVector):
            vec = psi.amplitudes
            dims = psi.dims if dims is None else dims
        else:
            vec = np.asarray(psi, dtype=complex).ravel()
        if dims is None:
            dims = (vec.size,)
        norm = np.vdot(vec, vec).real
        if abs(norm - 1.0) >= NORM_TOL:
            raise ContractError(f"ket norm squared is {norm:.12g}, expected 1")
        return cls(np.outer(vec, vec.conj()), dims)

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        n = prod(dims)
        return cls(np.eye(n) / n, dims)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over a labeled product basis.

    ``dims`` defaults to a single subsystem spanning all amplitudes and
    ``basis_labels`` to the decimal index of each basis state.
    """

    amplitudes: np.ndarray
    basis_labels: tuple[str, ...] = ()
    dims: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        labels = tuple(str(s) for s in self.basis_labels) or tuple(str(i) for i in range(amps.size))
        dims = tuple(int(d) for d in self.dims) or (amps.size,)
        if len(labels) != amps.size:
            raise DimensionError(f"{len(labels)} labels for {amps.size} amplitudes")
        if prod(dims) != amps.size:
            raise DimensionError(f"dims {dims} do not match {amps.size} amplitudes")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) >= NORM_TOL:
            raise ContractError(f"state norm squared is {norm:.12g}, expected 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "basis_labels", labels)
        object.__setattr__(self, "dims", dims)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density_matrix(self) -> DensityMatrix:
        return DensityMatrix.from_ket(self)


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.matrix
    if isinstance(x, StateVector):
        return x.amplitudes
    return np.asarray(x, dtype=complex)


def tensor(a, b):
    """Kronecker product, first factor most significant.

    Accepts arrays (matrices or vectors), :class:`DensityMatrix` or
    :class:`StateVector`.  Two density matrices give a density matrix with
    concatenated ``dims``; likewise for two state vectors.
    """
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.dims + b.dims, check=False)
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        labels = tuple(f"{x}{y}" for x in a.basis_labels for y in b.basis_labels)
        return StateVector(np.kron(a.amplitudes, b.amplitudes), labels, a.dims + b.dims)
    return np.kron(_as_matrix(a), _as_matrix(b))


def _normalize_keep(keep, n: int) -> tuple[int, ...]:
    if isinstance(keep, (int, np.integer)):
        keep = (int(keep),)
    keep = tuple(sorted(int(k) for k in keep))
    if not keep or len(set(keep)) != len(keep) or any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"invalid subsystem selection {keep} for {n} subsystems")
    return keep


def partial_trace(rho: DensityMatrix, keep: int | Sequence[int]) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep``.

    Parameters
    ----------
    rho : DensityMatrix
        State with at least two subsystems.
    keep : int or sequence of int
        Indices (into ``rho.dims``) of the subsystems to retain; order is
        irrelevant, the result keeps the original subsystem order.
    """
    dims = rho.dims
    if len(dims) < 2:
        raise DimensionError("partial trace needs at least two subsystems")
    keep = _normalize_keep(keep, len(dims))
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # trace the highest axes first so lower axis numbers stay valid
    for ax in reversed(range(n)):
        if ax in keep:
            continue
        cur = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + cur)
    kd = tuple(dims[k] for k in keep)
    size = prod(kd)
    return DensityMatrix(t.reshape(size, size), kd, check=False)


def partial_transpose(rho: DensityMatrix, sys: int = 1) -> np.ndarray:
    """Partial transpose with respect to subsystem ``sys``; returns an array."""
    dims = rho.dims
    n = len(dims)
    if not 0 <= sys < n:
        raise DimensionError(f"subsystem {sys} out of range for dims {dims}")
    t = rho.matrix.reshape(dims + dims)
    axes = list(range(2 * n))
    axes[sys], axes[sys + n] = axes[sys + n], axes[sys]
    return t.transpose(axes).reshape(rho.dim, rho.dim)


def swap_subsystems(rho: DensityMatrix) -> DensityMatrix:
    """Exchange the two factors of a bipartite state."""
    if len(rho.dims) != 2:
        raise DimensionError("swap needs exactly two subsystems")
    da, db = rho.dims
    t = rho.matrix.reshape(da, db, da, db).transpose(1, 0, 3, 2)
    return DensityMatrix(t.reshape(rho.dim, rho.dim), (db, da), check=False)


def eig_hermitian(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray
        Real, ascending.
    eigenvectors : ndarray
        Unitary matrix whose columns are the matching eigenvectors.

    Raises
    ------
    ContractError
        If ``a`` is not Hermitian to ``HERMITIAN_TOL``.
    """
    m = _as_matrix(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    defect = _max_hermitian_defect(m)
    if defect >= HERMITIAN_TOL:
        raise ContractError(f"matrix is not Hermitian (max defect {defect:.3e})")
    return np.linalg.eigh((m + m.conj().T) / 2)


def shannon_entropy(p) -> float:
    """Shannon entropy in bits; entries at or below the floor contribute 0."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > EIGEN_FLOOR]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0


def von_neumann_entropy(rho) -> float:
    """``-sum(l * log2(l))`` over the spectrum of ``rho``, in bits."""
    m = _as_matrix(rho)
    return max(shannon_entropy(np.linalg.eigvalsh(m)), 0.0)


def ket2dm(psi) -> np.ndarray:
    v = _as_matrix(psi).ravel()
    return np.outer(v, v.conj())


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def random_hermitian(n: int, rng=None) -> np.ndarray:
    """GUE sample rescaled to unit spectral norm."""
    rng = _rng(rng)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (g + g.conj().T) / 2
    return h / np.max(np.abs(np.linalg.eigvalsh(h)))


def random_unitary_step(u: np.ndarray, step: float, rng=None) -> np.ndarray:
    """Perturb a unitary: ``u @ expm(1j * step * H)`` with ``H`` from :func:`random_hermitian`.

    ``step == 0`` returns ``u`` unchanged.
    """
    if step < 0:
        raise DomainError(f"step must be non-negative, got {step}")
    u = np.asarray(u, dtype=complex)
    if step == 0:
        return u.copy()
    w, v = np.linalg.eigh(random_hermitian(u.shape[0], rng))
    return u @ (v * np.exp(1j * step * w)) @ v.conj().T


def haar_unitary(n: int, rng=None) -> np.ndarray:
    """Haar-distributed unitary via phase-corrected QR (Mezzadri's recipe)."""
    rng = _rng(rng)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density_matrix(dims: Sequence[int], rng=None, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble mixed state of the given rank (full rank by default)."""
    rng = _rng(rng)
    n = prod(dims)
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real, dims)


def random_pure_state(dims: Sequence[int], rng=None) -> DensityMatrix:
    rng = _rng(rng)
    n = prod(dims)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return DensityMatrix.from_ket(v / np.linalg.norm(v), dims)
