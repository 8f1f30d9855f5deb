"""Dense operator algebra and Lindblad solvers for a qubit coupled to a lossy resonator.

Conventions used across the package:

- Composite basis index is ``qubit_index * N + photon_index`` on a
  qubit (2) x resonator (N) space, i.e. composite operators are
  ``kron(qubit_op, resonator_op)``.
- Qubit basis ordering is (|g>, |e>) = (0, 1) with ``sigma_z = diag(-1, +1)``,
  so <sigma_z> = +1 marks the excited state and ``bloch_ket(0, phi) = |e>``.
- ``sigma_plus = |e><g|`` raises the qubit.
- All rates and frequencies are angular (rad/s); times are seconds.
- Superoperators act on column-stacked (Fortran-order) density matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as la

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
POSITIVITY_SLACK = 1e-8
HAMILTONIAN_HERMITICITY_TOL = 1e-12
TRACE_DRIFT_TOL = 1e-6
STEADY_RESIDUAL_TOL = 1e-10
NULL_SPACE_GAP = 1e6

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)


class SolverError(RuntimeError):
    """A linear-algebra routine could not produce a trustworthy result."""


class SteadyStateError(SolverError):
    """The generator's null space is degenerate or the solve failed.

    Carries ``singular_values``, the two smallest singular values of the
    generator when the uniqueness check triggered the error.
    """

    def __init__(self, message: str, singular_values=None):
        super().__init__(message)
        self.singular_values = singular_values


class EvolveError(SolverError):
    """Time integration lost the trace beyond tolerance."""


def _as_complex_matrix(matrix, dim: int) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class HilbertSpace:
    """Qubit x resonator space with Fock truncation ``resonator_levels``."""

    resonator_levels: int
    qubit_levels: int = 2

    def __post_init__(self):
        if self.qubit_levels != 2:
            raise ValueError("qubit_levels is fixed to 2")
        if self.resonator_levels < 2:
            raise ValueError("resonator_levels must be at least 2")

    @property
    def dim(self) -> int:
        return self.qubit_levels * self.resonator_levels


@dataclass(frozen=True)
class Operator:
    """Matrix on a composite space, tagged with the unit of its entries."""

    space: HilbertSpace
    matrix: np.ndarray
    unit: str = "dimensionless"

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_complex_matrix(self.matrix, self.space.dim))

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T, self.unit)


@dataclass(frozen=True)
class DensityMatrix:
    """Validated quantum state: Hermitian, unit trace, positive up to slack."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.matrix, self.space.dim)
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > HERMITICITY_TOL:
            raise ValueError(f"density matrix not Hermitian, max deviation {herm:.3e}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"density matrix trace {tr:.12g} differs from 1")
        eigmin = float(la.eigvalsh(m)[0])
        if eigmin < -POSITIVITY_SLACK:
            raise ValueError(f"density matrix eigenvalue {eigmin:.3e} below -{POSITIVITY_SLACK:.0e}")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian (rad/s) plus (collapse operator, rate in rad/s) channels."""

    hamiltonian: Operator
    collapse_channels: tuple = ()

    def __post_init__(self):
        h = self.hamiltonian.matrix
        hnorm = la.norm(h)
        if la.norm(h - h.conj().T) > HAMILTONIAN_HERMITICITY_TOL * max(hnorm, 1.0):
            raise ValueError("hamiltonian is not Hermitian")
        channels = tuple((op, float(rate)) for op, rate in self.collapse_channels)
        for op, rate in channels:
            if op.space != self.hamiltonian.space:
                raise ValueError("collapse operator lives on a different space")
            if rate < 0.0:
                raise ValueError(f"negative collapse rate {rate}")
        object.__setattr__(self, "collapse_channels", channels)

    @property
    def space(self) -> HilbertSpace:
        return self.hamiltonian.space


@dataclass(frozen=True)
class Liouvillian:
    """Generator matrix acting on column-stacked density matrices."""

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_complex_matrix(self.matrix, self.space.dim ** 2))


def make_ladder(space: HilbertSpace):
    """Composite operators (a, a_dagger, sigma_minus, sigma_plus, sigma_z)."""
    n = space.resonator_levels
    lower = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)
    eye_q = np.eye(2, dtype=complex)
    eye_r = np.eye(n, dtype=complex)
    a = Operator(space, np.kron(eye_q, lower))
    sigma_minus = Operator(space, np.kron(SIGMA_MINUS, eye_r))
    sigma_plus = Operator(space, np.kron(SIGMA_PLUS, eye_r))
    sigma_z = Operator(space, np.kron(SIGMA_Z, eye_r))
    return a, a.dag(), sigma_minus, sigma_plus, sigma_z


def stack(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a d x d matrix into a length d^2 vector."""
    return np.asarray(matrix).flatten(order="F")


def unstack(vec: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`stack`."""
    return np.asarray(vec).reshape((dim, dim), order="F")


def basis_index(space: HilbertSpace, photon: int, qubit: int) -> int:
    """Flat index of |qubit, photon> in the composite basis."""
    if not 0 <= photon < space.resonator_levels:
        raise ValueError(f"photon index {photon} outside truncation {space.resonator_levels}")
    if qubit not in (0, 1):
        raise ValueError("qubit index must be 0 (ground) or 1 (excited)")
    return qubit * space.resonator_levels + photon


def basis_state(space: HilbertSpace, photon: int, qubit: int) -> DensityMatrix:
    """Projector |qubit, photon><qubit, photon| as a DensityMatrix."""
    m = np.zeros((space.dim, space.dim), dtype=complex)
    i = basis_index(space, photon, qubit)
    m[i, i] = 1.0
    return DensityMatrix(space, m)


def build_lindblad_generator(model: LindbladModel) -> Liouvillian:
    """Matrix form of rho -> -i[H, rho] + sum_k rate_k D[L_k] rho."""
    d = model.space.dim
    eye = np.eye(d, dtype=complex)
    h = model.hamiltonian.matrix
    gen = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in model.collapse_channels:
        lk = op.matrix
        ldl = lk.conj().T @ lk
        gen = gen + rate * (
            np.kron(lk.conj(), lk)
            - 0.5 * np.kron(eye, ldl)
            - 0.5 * np.kron(ldl.T, eye)
        )
    return Liouvillian(model.space, gen)


def apply_generator(liouvillian: Liouvillian, rho: np.ndarray) -> np.ndarray:
    """d(rho)/dt as a matrix, for direct checks against the defining equation."""
    d = liouvillian.space.dim
    return unstack(liouvillian.matrix @ stack(rho), d)


def steady_state(liouvillian: Liouvillian, check_uniqueness: bool = True) -> DensityMatrix:
    """Solve L rho = 0 with unit trace via a bordered dense least-squares system.

    With ``check_uniqueness`` the full singular spectrum is computed first and a
    degenerate null space (second-smallest singular value not a factor 1e6 above
    the smallest) raises SteadyStateError. The check costs O(d^6), so bulk sweeps
    that already passed it once at the same structure may disable it.
    """
    d = liouvillian.space.dim
    lmat = liouvillian.matrix
    if check_uniqueness:
        svals = la.svdvals(lmat)
        scale = float(svals[0])
        if svals[-2] <= NULL_SPACE_GAP * svals[-1]:
            raise SteadyStateError(
                "steady state is not unique: two smallest singular values "
                f"{svals[-1]:.3e} and {svals[-2]:.3e} are not separated",
                singular_values=(float(svals[-1]), float(svals[-2])),
            )
    else:
        scale = float(la.norm(lmat))
    if scale == 0.0:
        raise SteadyStateError("zero generator has no unique steady state",
                               singular_values=(0.0, 0.0))
    trace_row = np.zeros((1, d * d), dtype=complex)
    trace_row[0, :: d + 1] = 1.0
    bordered = np.vstack([lmat / scale, trace_row])
    rhs = np.zeros(d * d + 1, dtype=complex)
    rhs[-1] = 1.0
    sol = la.lstsq(bordered, rhs, lapack_driver="gelsd")[0]
    rho = unstack(sol, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(la.norm(lmat @ stack(rho)))
    if residual > STEADY_RESIDUAL_TOL * scale:
        raise SolverError(
            f"steady-state residual {residual:.3e} exceeds "
            f"{STEADY_RESIDUAL_TOL:.0e} x |L| = {STEADY_RESIDUAL_TOL * scale:.3e}")
    return DensityMatrix(liouvillian.space, rho)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("times must be a non-empty 1d sequence")
    if t[0] != 0.0:
        raise ValueError("times must start at 0")
    if t.size > 1 and np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be strictly increasing")
    return t


def _step_cap(*limits) -> float:
    finite = [x for x in limits if x is not None and x > 0.0 and math.isfinite(x)]
    return min(finite) if finite else math.inf


def _interval_steps(dt: float, cap: float) -> int:
    if not math.isfinite(cap):
        return 1
    return max(1, int(math.ceil(dt / cap)))


def _snapshot(space: HilbertSpace, rho: np.ndarray) -> DensityMatrix:
    m = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(space, m / np.trace(m).real)


def evolve(model: LindbladModel, rho0: DensityMatrix, times: Sequence[float],
           max_step: float | None = None) -> list[DensityMatrix]:
    """Fixed-step RK4 trajectory on the stacked representation.

    The step obeys dt <= min(1/(20 |H|), 1/(20 max rate), max_step), so a
    trajectory is reproducible bit for bit for identical inputs. Snapshots are
    returned at each requested time; the first requested time must be 0 and maps
    to rho0 itself.
    """
    if rho0.space != model.space:
        raise ValueError("rho0 lives on a different space than the model")
    t = _check_times(times)
    gen = build_lindblad_generator(model).matrix
    hnorm = float(la.norm(model.hamiltonian.matrix, 2))
    rate_max = max((rate for _, rate in model.collapse_channels), default=0.0)
    cap = _step_cap(
        1.0 / (20.0 * hnorm) if hnorm > 0.0 else None,
        1.0 / (20.0 * rate_max) if rate_max > 0.0 else None,
        max_step,
    )
    d = model.space.dim
    v = stack(rho0.matrix).astype(complex)
    out = [rho0]
    for t0, t1 in zip(t[:-1], t[1:]):
        steps = _interval_steps(float(t1 - t0), cap)
        h = float(t1 - t0) / steps
        for _ in range(steps):
            k1 = gen @ v
            k2 = gen @ (v + (0.5 * h) * k1)
            k3 = gen @ (v + (0.5 * h) * k2)
            k4 = gen @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        trace = complex(v[:: d + 1].sum())
        if abs(trace - 1.0) > TRACE_DRIFT_TOL:
            raise EvolveError(
                f"trace drifted to {trace.real:.9f} integrating interval "
                f"[{t0:.6e}, {t1:.6e}] s")
        out.append(_snapshot(model.space, unstack(v, d)))
    return out


def evolve_time_dependent(space: HilbertSpace,
                          hamiltonian: Callable[[float], np.ndarray],
                          collapse_channels,
                          rho0: DensityMatrix,
                          times: Sequence[float],
                          max_step: float) -> list[DensityMatrix]:
    """RK4 trajectory for a time-dependent Hamiltonian ``hamiltonian(t) -> matrix``.

    ``max_step`` must resolve the fastest oscillation of the Hamiltonian; it is
    tightened further by the collapse rates. Channels are (matrix, rate) pairs,
    constant in time. Works directly on matrices (no superoperator) since the
    generator changes every step.
    """
    if rho0.space != space:
        raise ValueError("rho0 lives on a different space")
    t = _check_times(times)
    pre = []
    for lk, rate in collapse_channels:
        lk = np.asarray(lk, dtype=complex)
        if lk.shape != (space.dim, space.dim):
            raise ValueError("collapse operator dimension mismatch")
        if rate < 0.0:
            raise ValueError(f"negative collapse rate {rate}")
        pre.append((lk, lk.conj().T, lk.conj().T @ lk, float(rate)))
    rate_max = max((rate for *_, rate in pre), default=0.0)
    cap = _step_cap(max_step, 1.0 / (20.0 * rate_max) if rate_max > 0.0 else None)
    if not math.isfinite(cap):
        raise ValueError("max_step must be finite and positive")

    def rhs(hmat, rho):
        out = -1j * (hmat @ rho - rho @ hmat)
        for lk, ldag, ldl, rate in pre:
            out = out + rate * (lk @ rho @ ldag - 0.5 * (ldl @ rho + rho @ ldl))
        return out

    rho = rho0.matrix.astype(complex)
    out = [rho0]
    for t0, t1 in zip(t[:-1], t[1:]):
        steps = _interval_steps(float(t1 - t0), cap)
        h = float(t1 - t0) / steps
        for i in range(steps):
            ta = float(t0) + i * h
            h_a = np.asarray(hamiltonian(ta), dtype=complex)
            h_m = np.asarray(hamiltonian(ta + 0.5 * h), dtype=complex)
            h_b = np.asarray(hamiltonian(ta + h), dtype=complex)
            k1 = rhs(h_a, rho)
            k2 = rhs(h_m, rho + (0.5 * h) * k1)
            k3 = rhs(h_m, rho + (0.5 * h) * k2)
            k4 = rhs(h_b, rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        trace = complex(np.trace(rho))
        if abs(trace - 1.0) > TRACE_DRIFT_TOL:
            raise EvolveError(
                f"trace drifted to {trace.real:.9f} integrating interval "
                f"[{t0:.6e}, {t1:.6e}] s")
        out.append(_snapshot(space, rho))
    return out


def partial_trace_qubit(rho: DensityMatrix) -> np.ndarray:
    """Reduced 2x2 qubit state, tracing out the resonator."""
    n = rho.space.resonator_levels
    blocks = rho.matrix.reshape(2, n, 2, n)
    return np.einsum("ambm->ab", blocks)


def bloch_ket(theta: float, phi: float) -> np.ndarray:
    """Qubit ket at Bloch angles (theta, phi); theta = 0 is the excited state."""
    return np.array([np.sin(0.5 * theta),
                     np.exp(-1j * phi) * np.cos(0.5 * theta)], dtype=complex)


def bloch_ket_orthogonal(theta: float, phi: float) -> np.ndarray:
    """Antipodal ket, orthogonal to ``bloch_ket(theta, phi)``."""
    return np.array([np.cos(0.5 * theta),
                     -np.exp(-1j * phi) * np.sin(0.5 * theta)], dtype=complex)


def fidelity_and_expectations(rho: DensityMatrix, target_theta: float,
                              target_phi: float):
    """Fidelity sqrt(<n|rho_q|n>) to the Bloch target plus Pauli expectations.

    Returns (fidelity, sx, sy, sz) where the Pauli expectations are those of the
    reduced qubit state, satisfying fidelity^2 = (1 + n.s)/2.
    """
    rho_q = partial_trace_qubit(rho)
    ket = bloch_ket(target_theta, target_phi)
    population = float(np.real(ket.conj() @ rho_q @ ket))
    fidelity = math.sqrt(max(population, 0.0))
    sx = float(np.real(np.trace(rho_q @ SIGMA_X)))
    sy = float(np.real(np.trace(rho_q @ SIGMA_Y)))
    sz = float(np.real(np.trace(rho_q @ SIGMA_Z)))
    return fidelity, sx, sy, sz


def trace_distance(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """Half the trace norm of the difference of two states."""
    return float(0.5 * np.sum(la.svdvals(rho_a.matrix - rho_b.matrix)))
