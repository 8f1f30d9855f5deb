"""Closed-form analysis of stabilization restricted to three levels.

Once the dynamics are confined to the subspace spanned by |0,-n>, |0,n> and
|1,n> (resonator occupation, qubit along the stabilization axis n), the master
equation reduces to four coupled real linear ODEs for the three populations
and the imaginary part C of the coherence between |0,-n> and |1,n>. This
module collects everything that can be said in closed form at that level:
effective qubit decoherence rates for a tilted axis, exact and approximate
steady-state fidelities, the leading thermal correction, the reduced dynamics,
the characteristic cubic that classifies the approach to steady state, and the
drive strength that settles fastest.

Populations are ordered (rho11, rho22, rho33) for (|0,-n>, |0,n>, |1,n>).
All rates and frequencies are angular (rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.constants import hbar, k as k_boltzmann

from .core import SolverError

POPULATION_TOL = 1e-10
CRITICAL_REL_TOL = 1e-9
SETTLE_GRID_POINTS = 2001
SCAN_POINTS = 40
REFINE_POINTS = 20


@dataclass(frozen=True)
class ThreeLevelParams:
    """Rates of the reduced stabilization model, all angular (rad/s).

    g_eps is the effective sideband strength coupling |0,-n> to |1,n>;
    kappa the resonator decay |1,n> -> |0,n>; gamma_minus / gamma_plus the
    effective qubit rates toward / away from +n; gamma_phi_eff the effective
    dephasing acting on the coherence; kappa_th the thermal resonator
    excitation |0,n> -> |1,n>.

    g_eps = 0 is accepted (drive switched off, frozen dynamics); the
    closed-form steady-state expressions require it to be positive and say so.
    """

    g_eps: float
    kappa: float
    gamma_minus: float = 0.0
    gamma_plus: float = 0.0
    gamma_phi_eff: float = 0.0
    kappa_th: float = 0.0

    def __post_init__(self):
        for name in ("g_eps", "kappa", "gamma_minus", "gamma_plus",
                     "gamma_phi_eff", "kappa_th"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValueError(f"{name} must be a finite number, got {value!r}")
            if value < 0.0:
                raise ValueError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class ThreeLevelState:
    """Populations (rho11, rho22, rho33) and coherence C = Im<0,-n|rho|1,n>."""

    rho11: float
    rho22: float
    rho33: float
    C: float

    def __post_init__(self):
        pops = (self.rho11, self.rho22, self.rho33)
        for name, p in zip(("rho11", "rho22", "rho33"), pops):
            if not math.isfinite(p):
                raise ValueError(f"{name} must be finite, got {p!r}")
            if p < -POPULATION_TOL or p > 1.0 + POPULATION_TOL:
                raise ValueError(f"{name} must lie in [0, 1], got {p!r}")
        if abs(sum(pops) - 1.0) > POPULATION_TOL:
            raise ValueError(f"populations must sum to 1, got {sum(pops)!r}")
        if not math.isfinite(self.C):
            raise ValueError(f"C must be finite, got {self.C!r}")

    def as_vector(self) -> np.ndarray:
        return np.array([self.rho11, self.rho22, self.rho33, self.C])

    @property
    def polarization(self) -> float:
        """Expectation of the Pauli operator along the stabilization axis."""
        return self.rho22 + self.rho33 - self.rho11


@dataclass(frozen=True)
class DampingReport:
    """Roots and damping class of the characteristic cubic of the reduced model.

    roots: the three roots of (lambda + kappa/2)(lambda^2 + kappa*lambda
    + 4 g_eps^2) = 0. classification: one of under_damped, critically_damped,
    over_damped. slowest_rate: -max real part of the roots (rad/s).
    """

    roots: tuple
    classification: str
    slowest_rate: float


def effective_rates(theta: float, gamma: float, gamma_phi: float):
    """Map bare qubit decay/dephasing into the frame tilted by theta.

    Returns (gamma_minus, gamma_plus, gamma_phi_eff) for a stabilization axis
    at polar angle theta. At theta=0 these reduce to the bare (gamma, 0,
    gamma_phi); tilting mixes decay and dephasing into both effective decay
    directions.
    """
    if not (0.0 <= theta <= math.pi):
        raise ValueError(f"theta must lie in [0, pi], got {theta!r}")
    if gamma < 0.0 or gamma_phi < 0.0:
        raise ValueError("gamma and gamma_phi must be >= 0")
    cos_half_sq = math.cos(0.5 * theta) ** 2
    sin_half_sq = math.sin(0.5 * theta) ** 2
    sin_sq = math.sin(theta) ** 2
    gamma_minus = gamma * cos_half_sq ** 2 + 0.5 * gamma_phi * sin_sq
    gamma_plus = gamma * sin_half_sq ** 2 + 0.5 * gamma_phi * sin_sq
    gamma_phi_eff = 0.5 * gamma * sin_sq + gamma_phi * math.cos(theta) ** 2
    return gamma_minus, gamma_plus, gamma_phi_eff


def _system_matrix(p: ThreeLevelParams, include_qubit_decoherence: bool = True):
    """Generator of d/dt (rho11, rho22, rho33, C) as a real 4x4 matrix."""
    g = p.g_eps
    gm = p.gamma_minus if include_qubit_decoherence else 0.0
    gp = p.gamma_plus if include_qubit_decoherence else 0.0
    gphi = p.gamma_phi_eff if include_qubit_decoherence else 0.0
    m = np.array([
        [-gp, gm, 0.0, -2.0 * g],
        [gp, -gm, p.kappa, 0.0],
        [0.0, 0.0, -p.kappa, 2.0 * g],
        [g, 0.0, -g, -(0.5 * p.kappa + 0.5 * gp + gphi)],
    ])
    if p.kappa_th > 0.0:
        m[1, 1] -= p.kappa_th
        m[2, 1] += p.kappa_th
    return m


def exact_steady_fidelity(p: ThreeLevelParams):
    """Exact zero-temperature steady state of the reduced model.

    Returns (fidelity, C, state) where fidelity is sqrt(1 - rho11), C the
    steady coherence and state the full ThreeLevelState. kappa_th does not
    enter this closed form; finite temperature is handled perturbatively by
    thermal_fidelity.
    """
    if p.g_eps <= 0.0:
        raise ValueError("g_eps must be positive for the closed-form steady state")
    if p.kappa <= 0.0:
        raise ValueError("kappa must be positive for the closed-form steady state")
    total = p.gamma_minus + p.gamma_plus
    if total == 0.0:
        raise ValueError(
            "gamma_minus + gamma_plus = 0: the closed form is singular; without "
            "qubit decoherence the stabilization is trivially perfect")
    g = p.g_eps
    tail = (0.5 * p.kappa + 0.5 * p.gamma_plus + p.gamma_phi_eff) / g
    bracket = 2.0 * g / p.kappa + tail
    denominator = (2.0 * g / p.kappa
                   + (2.0 * g / total) * (1.0 + p.gamma_minus / p.kappa)
                   + tail)
    coherence = (p.gamma_minus / total) / denominator
    rho11 = bracket * coherence
    rho33 = (2.0 * g / p.kappa) * coherence
    state = ThreeLevelState(rho11, 1.0 - rho11 - rho33, rho33, coherence)
    return math.sqrt(1.0 - rho11), coherence, state


def approx_fidelity(g_eps: float, kappa: float, gamma_minus: float) -> float:
    """Compact steady-fidelity approximation, valid when g_eps >> gamma_minus.

    Returns sqrt(1 - [2 g_eps/kappa + kappa/(2 g_eps)] gamma_minus/(2 g_eps)).
    The bracket is minimal at kappa = 2 g_eps where the value reduces to
    sqrt(1 - gamma_minus/g_eps).
    """
    if g_eps <= 0.0 or kappa <= 0.0:
        raise ValueError("g_eps and kappa must be positive")
    if gamma_minus < 0.0:
        raise ValueError(f"gamma_minus must be >= 0, got {gamma_minus!r}")
    radicand = 1.0 - ((2.0 * g_eps / kappa + kappa / (2.0 * g_eps))
                      * gamma_minus / (2.0 * g_eps))
    if radicand < 0.0:
        raise ValueError("outside validity regime: decoherence too strong for "
                         "the perturbative fidelity expression")
    return math.sqrt(radicand)


def thermal_fidelity(fidelity0: float, rho22_0: float, omega_r: float,
                     temperature: float) -> float:
    """Leading-order finite-temperature correction to a zero-T fidelity.

    fidelity0 and rho22_0 are the zero-temperature fidelity and population of
    |0,n>; the dominant thermal loss is resonator excitation out of |0,n> at
    rate kappa*exp(-hbar*omega_r/kB T), giving
    sqrt(fidelity0^2 - exp(-hbar*omega_r/kB T) * rho22_0).
    """
    if not (0.0 <= fidelity0 <= 1.0):
        raise ValueError(f"fidelity0 must lie in [0, 1], got {fidelity0!r}")
    if not (0.0 <= rho22_0 <= 1.0):
        raise ValueError(f"rho22_0 must lie in [0, 1], got {rho22_0!r}")
    if omega_r <= 0.0:
        raise ValueError(f"omega_r must be positive, got {omega_r!r}")
    if temperature < 0.0:
        raise ValueError(f"temperature must be >= 0, got {temperature!r}")
    if temperature == 0.0:
        return fidelity0
    boltzmann = math.exp(-hbar * omega_r / (k_boltzmann * temperature))
    radicand = fidelity0 ** 2 - boltzmann * rho22_0
    if radicand < 0.0:
        raise ValueError("perturbative expression invalid at this temperature")
    return math.sqrt(radicand)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 1:
        raise ValueError("times must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(t)):
        raise ValueError("times must be finite")
    if t[0] < 0.0:
        raise ValueError(f"times must start at >= 0, got {t[0]!r}")
    if t.size > 1 and np.any(np.diff(t) <= 0.0):
        raise ValueError("times must be strictly increasing")
    return t


def _propagate(m: np.ndarray, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Sample exp(m (t - t0)) @ y0 on the grid; one expm per distinct step."""
    out = np.empty((times.size, y0.size))
    out[0] = y0
    if times.size == 1:
        return out
    steps = np.diff(times)
    uniform = np.allclose(steps, steps[0], rtol=1e-9, atol=0.0)
    propagator = la.expm(m * steps[0]) if uniform else None
    y = y0
    for i, dt in enumerate(steps, start=1):
        y = (propagator if uniform else la.expm(m * dt)) @ y
        out[i] = y
    return out


def three_level_dynamics(p: ThreeLevelParams, initial: ThreeLevelState, times,
                         include_qubit_decoherence: bool = True):
    """Integrate the reduced linear ODEs from `initial` over the time grid.

    The first returned state is `initial` itself at times[0]. With
    include_qubit_decoherence off, the effective qubit rates are dropped and
    only resonator decay (and kappa_th, if set) act, which isolates the
    idealized stabilization dynamics. Total population is conserved.
    """
    t = _check_times(times)
    m = _system_matrix(p, include_qubit_decoherence)
    trajectory = _propagate(m, initial.as_vector(), t)
    return [initial] + [ThreeLevelState(*row) for row in trajectory[1:]]


def damping_report(g_eps: float, kappa: float) -> DampingReport:
    """Classify the approach to steady state from the characteristic cubic.

    The reduced (rho11, rho33, C) subsystem obeys a third-order ODE whose
    characteristic polynomial factors as (lambda + kappa/2)(lambda^2 +
    kappa*lambda + 4 g_eps^2); the quadratic's discriminant separates
    under- from over-damped, with the critical point at kappa = 4 g_eps.
    """
    if g_eps <= 0.0 or kappa <= 0.0:
        raise ValueError("g_eps and kappa must be positive")
    discriminant = kappa * kappa - 16.0 * g_eps * g_eps
    if discriminant >= 0.0:
        s = math.sqrt(discriminant)
        pair = (complex(0.5 * (-kappa + s)), complex(0.5 * (-kappa - s)))
    else:
        s = math.sqrt(-discriminant)
        pair = (complex(-0.5 * kappa, 0.5 * s), complex(-0.5 * kappa, -0.5 * s))
    roots = (complex(-0.5 * kappa), pair[0], pair[1])
    if abs(kappa - 4.0 * g_eps) <= CRITICAL_REL_TOL * kappa:
        classification = "critically_damped"
    elif kappa < 4.0 * g_eps:
        classification = "under_damped"
    else:
        classification = "over_damped"
    slowest_rate = -max(r.real for r in roots)
    return DampingReport(roots=roots, classification=classification,
                         slowest_rate=slowest_rate)


def _steady_vector(m: np.ndarray, scale: float) -> np.ndarray:
    """Unique unit-trace null vector of the population-conserving generator."""
    a = np.vstack([m / scale, [1.0, 1.0, 1.0, 0.0]])
    b = np.zeros(5)
    b[-1] = 1.0
    y, *_ = np.linalg.lstsq(a, b, rcond=None)
    if la.norm(a @ y - b) > 1e-8:
        raise SolverError("steady state of the reduced model did not converge")
    return y


def _settle_time(m: np.ndarray, times: np.ndarray, tolerance: float,
                 y0: np.ndarray, scale: float):
    """Last entry of the axis polarization into the +-tolerance band, or None."""
    trajectory = _propagate(m, y0, times)
    sigma = trajectory[:, 1] + trajectory[:, 2] - trajectory[:, 0]
    steady = _steady_vector(m, scale)
    sigma_inf = steady[1] + steady[2] - steady[0]
    band = tolerance * abs(sigma_inf - sigma[0])
    outside = np.abs(sigma - sigma_inf) > band
    if outside[-1]:
        return None
    if not outside.any():
        return times[0]
    return times[np.nonzero(outside)[0][-1] + 1]


def fastest_stabilization(kappa: float, tolerance: float = 0.01,
                          p_template: ThreeLevelParams | None = None):
    """Scan g_eps over [kappa/8, kappa] for the quickest settling drive.

    Settling time is the last entry of the axis polarization into a band of
    half-width tolerance*(dynamic range) around its steady value, starting
    from all population in |0,-n>. Rates other than g_eps and kappa are taken
    from p_template (template g_eps and kappa themselves are ignored); with no
    template the idealized decoherence-free reduction is scanned. Returns
    (g_eps_opt, settle_time).
    """
    if kappa <= 0.0:
        raise ValueError(f"kappa must be positive, got {kappa!r}")
    if not (0.0 < tolerance < 0.5):
        raise ValueError(f"tolerance must lie in (0, 0.5), got {tolerance!r}")
    horizon = 10.0 * (2.0 / kappa)
    times = np.linspace(0.0, horizon, SETTLE_GRID_POINTS)
    y0 = np.array([1.0, 0.0, 0.0, 0.0])

    def evaluate(g_eps: float):
        p = ThreeLevelParams(
            g_eps=g_eps, kappa=kappa,
            gamma_minus=p_template.gamma_minus if p_template else 0.0,
            gamma_plus=p_template.gamma_plus if p_template else 0.0,
            gamma_phi_eff=p_template.gamma_phi_eff if p_template else 0.0,
            kappa_th=p_template.kappa_th if p_template else 0.0)
        return _settle_time(_system_matrix(p), times, tolerance, y0, kappa)

    coarse = np.linspace(kappa / 8.0, kappa, SCAN_POINTS)
    settled = [(g, evaluate(g)) for g in coarse]
    settled = [(g, t) for g, t in settled if t is not None]
    if not settled:
        raise SolverError(
            "no drive strength in [kappa/8, kappa] settled within the "
            "10*(2/kappa) horizon at this tolerance")
    best_g, best_t = min(settled, key=lambda pair: pair[1])
    index = int(np.argmin(np.abs(coarse - best_g)))
    low = coarse[max(index - 1, 0)]
    high = coarse[min(index + 1, coarse.size - 1)]
    for g in np.linspace(low, high, REFINE_POINTS):
        t = evaluate(g)
        if t is not None and t < best_t:
            best_g, best_t = g, t
    return best_g, best_t
