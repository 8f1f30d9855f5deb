"""Hamiltonians, collapse channels, and drive planning for Bloch-target stabilization.

The planning layer maps a Bloch-sphere target (theta, phi, mix) to sideband
drive amplitudes and phases. Amplitudes in a DrivePlan are non-negative;
a negative coefficient in the matching conditions is realized as a pi offset
absorbed into the corresponding initial phase (modulation depths of physical
tones cannot be negative). The ``signed_*`` properties expose the equivalent
signed view, in which nu1 + nu2 - 2 nu3 = 0 holds exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, k as k_boltzmann
from scipy.optimize import brentq

from .core import (
    DensityMatrix,
    HilbertSpace,
    LindbladModel,
    Operator,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    build_lindblad_generator,
    evolve_time_dependent,
    fidelity_and_expectations,
    make_ladder,
    steady_state,
)

PHASE_TOL = 1e-12
FREQ_REL_TOL = 1e-9


def _wrap_phase(x: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (x + math.pi) % (2.0 * math.pi) - math.pi


@dataclass(frozen=True)
class SystemParams:
    """Dressed-mode frequencies, couplings, and loss rates, all angular (rad/s).

    ``g`` scales the dimensionless sideband amplitudes eps1/eps2; ``g_prime``
    is the dimensionless longitudinal coefficient multiplying the Rabi drive
    strength xi. ``temperature`` is in kelvin.
    """

    omega_r: float
    omega_q: float
    chi: float
    g: float
    g_prime: float
    kappa: float
    gamma: float
    gamma_phi: float
    temperature: float = 0.0

    def __post_init__(self):
        if self.omega_r <= 0 or self.omega_q <= 0:
            raise ValueError("mode frequencies must be positive")
        for name in ("kappa", "gamma", "gamma_phi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class StabilizationTarget:
    """Bloch-sphere target: polar/azimuthal angles plus a radial purity ``mix``.

    ``mix`` = 1 requests the pure state along (theta, phi); mix < 1 requests the
    mixed state whose Bloch vector has length mix along the same axis.
    """

    theta: float
    phi: float = 0.0
    mix: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not 0.0 <= self.mix <= 1.0:
            raise ValueError("mix must lie in [0, 1]")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))


@dataclass(frozen=True)
class DrivePlan:
    """Sideband amplitudes (dimensionless), Rabi strength (rad/s), phases, frequencies.

    Tone frequencies satisfy omega1 + omega2 = 2 omega3 (difference and sum
    sidebands around the resonator). The phase combination nu1 + nu2 - 2 nu3
    vanishes modulo pi: it is 0 in the signed view and pi when exactly one
    amplitude carries a folded sign.
    """

    eps1: float
    eps2: float
    xi: float
    nu1: float
    nu2: float
    nu3: float
    omega1: float
    omega2: float
    omega3: float

    def __post_init__(self):
        if self.eps1 < 0 or self.eps2 < 0:
            raise ValueError("amplitudes must be non-negative; fold signs into phases")
        if self.xi < 0:
            raise ValueError("xi must be non-negative; fold its sign into nu3")
        scale = max(abs(self.omega3), 1.0)
        if abs(self.omega1 + self.omega2 - 2.0 * self.omega3) > FREQ_REL_TOL * scale:
            raise ValueError("tone frequencies must satisfy omega1 + omega2 = 2 omega3")
        residual = abs(_wrap_phase(self.nu1 + self.nu2 - 2.0 * self.nu3))
        if min(residual, math.pi - residual) > PHASE_TOL:
            raise ValueError(
                f"phase combination nu1 + nu2 - 2 nu3 = {residual:.3e} is neither 0 nor pi")

    @property
    def _folded(self) -> bool:
        residual = abs(_wrap_phase(self.nu1 + self.nu2 - 2.0 * self.nu3))
        return abs(residual - math.pi) <= PHASE_TOL

    @property
    def signed_eps1(self) -> float:
        """Red amplitude in the signed convention (fold resolved onto tone 1)."""
        return -self.eps1 if self._folded else self.eps1

    @property
    def signed_nu1(self) -> float:
        return self.nu1 - math.pi if self._folded else self.nu1

    def azimuthal_angle(self) -> float:
        """Target azimuth phi = (nu2 - nu1)/2 in the signed convention, in [0, 2 pi)."""
        return ((self.nu2 - self.signed_nu1) / 2.0) % (2.0 * math.pi)

    def recovered_target(self, params: SystemParams) -> StabilizationTarget:
        """Bloch target reconstructed from the matching conditions.

        Exact for plans emitted with mix = 1; a mixed plan reconstructs the
        axis of its pure-plan part only.
        """
        ge1 = params.g * self.signed_eps1
        ge2 = params.g * self.eps2
        sin_part = 2.0 * params.g_prime * self.xi
        cos_part = ge2 + ge1
        theta = math.atan2(sin_part, cos_part)
        return StabilizationTarget(theta=theta, phi=self.azimuthal_angle())


def sigma_n_ladder(theta: float, phi: float):
    """Raising/lowering operators along the Bloch axis (theta, phi) as 2x2 matrices.

    sigma_n_plus maps the anti-target state to the target state exactly.
    """
    plus = (0.5 * (math.cos(theta) + 1.0) * np.exp(-1j * phi) * SIGMA_PLUS
            + 0.5 * (math.cos(theta) - 1.0) * np.exp(1j * phi) * SIGMA_MINUS
            - 0.5 * math.sin(theta) * SIGMA_Z)
    return plus, plus.conj().T


def _check_plan_frequencies(params: SystemParams, plan: DrivePlan):
    pairs = (
        (plan.omega1, params.omega_r - params.omega_q, "omega1"),
        (plan.omega2, params.omega_r + params.omega_q, "omega2"),
        (plan.omega3, params.omega_r, "omega3"),
    )
    scale = max(params.omega_r, params.omega_q)
    for value, expected, name in pairs:
        if abs(value - expected) > FREQ_REL_TOL * scale:
            raise ValueError(
                f"{name} = {value:.6e} rad/s does not match the system value "
                f"{expected:.6e} rad/s")


def build_rotating_hamiltonian(params: SystemParams, plan: DrivePlan,
                               space: HilbertSpace,
                               include_stark: bool = True) -> Operator:
    """Rotating-frame Hamiltonian of the two sideband tones plus the Rabi drive.

    H = g eps1 (a^dag sigma_minus e^{-i nu1} + h.c.)
      + g eps2 (a^dag sigma_plus  e^{-i nu2} + h.c.)
      - g_prime xi (a^dag e^{-i nu3} + a e^{i nu3}) sigma_z
      - chi sigma_z a^dag a            (when include_stark)
    """
    _check_plan_frequencies(params, plan)
    a, adag, sm, sp, sz = make_ladder(space)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    red = params.g * plan.eps1 * np.exp(-1j * plan.nu1) * (adag.matrix @ sm.matrix)
    blue = params.g * plan.eps2 * np.exp(-1j * plan.nu2) * (adag.matrix @ sp.matrix)
    h += red + red.conj().T
    h += blue + blue.conj().T
    drive = adag.matrix * np.exp(-1j * plan.nu3)
    h += -params.g_prime * plan.xi * ((drive + drive.conj().T) @ sz.matrix)
    if include_stark:
        h += -params.chi * (sz.matrix @ adag.matrix @ a.matrix)
    return Operator(space, h, unit="rad/s")


def _plan_from_sideband_strengths(blue: float, red: float, theta: float,
                                  phi: float, params: SystemParams) -> DrivePlan:
    """Fold the signed matching coefficients into non-negative-amplitude form.

    ``blue`` drives toward the target, ``red`` (if nonzero) admixes the
    antipodal pump; both are angular strengths (rad/s) before division by g.
    """
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    if abs(sin_t) < PHASE_TOL:  # snap poles so sin(pi) roundoff does not fake a Rabi drive
        sin_t = 0.0
    ge2 = 0.5 * ((blue + red) * cos_t + (blue - red))
    ge1 = 0.5 * ((blue + red) * cos_t - (blue - red))
    gp_xi = 0.5 * (blue + red) * sin_t
    if gp_xi > 0 and params.g_prime == 0:
        raise ValueError("longitudinal coupling unavailable: g_prime = 0 "
                         "but the target needs a Rabi drive (sin theta != 0)")
    if params.g <= 0:
        raise ValueError("coupling g must be positive to express drive amplitudes")
    nu2 = phi if ge2 >= 0 else phi + math.pi
    nu1 = -phi if ge1 >= 0 else math.pi - phi
    xi = gp_xi / params.g_prime if gp_xi > 0 else 0.0
    return DrivePlan(
        eps1=abs(ge1) / params.g,
        eps2=abs(ge2) / params.g,
        xi=xi,
        nu1=nu1,
        nu2=nu2,
        nu3=0.0,
        omega1=params.omega_r - params.omega_q,
        omega2=params.omega_r + params.omega_q,
        omega3=params.omega_r,
    )


def _steady_axis_radius(blue: float, red: float, target: StabilizationTarget,
                        params: SystemParams, space: HilbertSpace) -> float:
    plan = _plan_from_sideband_strengths(blue, red, target.theta, target.phi, params)
    model = build_stabilization_model(params, plan, space, include_stark=False)
    rho = steady_state(build_lindblad_generator(model))
    fid = fidelity_and_expectations(rho, target.theta, target.phi)[0]
    return 2.0 * fid * fid - 1.0


def plan_drives(target: StabilizationTarget, g_eps: float,
                params: SystemParams, fock_levels: int = 10) -> DrivePlan:
    """Drive plan (amplitudes, phases, tone frequencies) realizing the target.

    For a pure target the matching conditions give the sideband strengths in
    closed form. For mix < 1 an antipodal pump is admixed and its fraction is
    found by a bracketed root-find on the steady-state Bloch radius along the
    target axis; an unattainably high mix (above the decoherence-limited
    ceiling) raises ValueError.
    """
    if g_eps <= 0:
        raise ValueError("g_eps must be positive")
    if math.sin(target.theta) > PHASE_TOL and params.g_prime == 0:
        raise ValueError("longitudinal coupling unavailable: g_prime = 0 "
                         "but the target needs a Rabi drive (sin theta != 0)")
    if target.mix >= 1.0:
        return _plan_from_sideband_strengths(g_eps, 0.0, target.theta, target.phi, params)

    space = HilbertSpace(fock_levels)

    def objective(fraction: float) -> float:
        return _steady_axis_radius(g_eps, fraction * g_eps, target, params, space) - target.mix

    ceiling = objective(0.0)
    if ceiling < 0.0:
        raise ValueError(
            f"mix = {target.mix} unattainable: decoherence limits the axis radius "
            f"to {target.mix + ceiling:.6f}")
    floor = objective(1.0)
    if floor > 0.0:
        raise ValueError(
            f"mix = {target.mix} below the reachable range: equal pumps leave "
            f"radius {target.mix + floor:.6f}")
    if ceiling == 0.0:
        fraction = 0.0
    else:
        fraction = brentq(objective, 0.0, 1.0, xtol=1e-10)
    return _plan_from_sideband_strengths(g_eps, fraction * g_eps,
                                         target.theta, target.phi, params)


def synthesize_tones(upsilon1: float, upsilon2: float,
                     omega_q: float, omega_r: float):
    """Three modulation tones (frequency, phase) from two free phases.

    tone1 at the difference frequency, tone2 at the sum, tone3 at the
    resonator; the resulting initial phases satisfy nu1 + nu2 - 2 nu3 = 0
    identically, with target azimuth phi = upsilon1 when upsilon2 = 0.
    """
    if omega_q <= 0 or omega_r <= 0:
        raise ValueError("mode frequencies must be positive")
    if omega_r == omega_q:
        raise ValueError("degenerate modes: omega_r must differ from omega_q")
    tone1 = (omega_r - omega_q, upsilon2 - upsilon1)
    tone2 = (omega_r + omega_q, upsilon2 + upsilon1)
    tone3 = (omega_r, upsilon2)
    return tone1, tone2, tone3


def thermal_channels(params: SystemParams, space: HilbertSpace):
    """Collapse channels including thermal excitation at the system temperature.

    Returns (a, kappa), (sigma_minus, gamma), (sigma_z, gamma_phi/2) plus the
    upward channels (a_dagger, kappa_th) and (sigma_plus, gamma_th) whose rates
    carry the Boltzmann factors of the two mode frequencies; both are exactly
    zero at zero temperature.
    """
    a, adag, sm, sp, sz = make_ladder(space)
    if params.temperature > 0.0:
        kt = k_boltzmann * params.temperature
        kappa_th = params.kappa * math.exp(-hbar * params.omega_r / kt)
        gamma_th = params.gamma * math.exp(-hbar * params.omega_q / kt)
    else:
        kappa_th = 0.0
        gamma_th = 0.0
    return [
        (a, params.kappa),
        (sm, params.gamma),
        (sz, 0.5 * params.gamma_phi),
        (adag, kappa_th),
        (sp, gamma_th),
    ]


def build_stabilization_model(params: SystemParams, plan: DrivePlan,
                              space: HilbertSpace,
                              include_stark: bool = True) -> LindbladModel:
    """Full open-system model: rotating Hamiltonian plus thermal channel set."""
    h = build_rotating_hamiltonian(params, plan, space, include_stark=include_stark)
    return LindbladModel(h, tuple(thermal_channels(params, space)))


def lab_frame_hamiltonian_fn(params: SystemParams, plan: DrivePlan,
                             space: HilbertSpace):
    """Callable t -> H(t) for the explicitly time-dependent pre-RWA Hamiltonian.

    The coupling is modulated as g (2 eps1 cos(omega1 t + nu1) +
    2 eps2 cos(omega2 t + nu2)) and multiplies the bare exchange
    (a^dag e^{i omega_r t} + h.c.)(sigma_plus e^{i omega_q t} + h.c.);
    the dispersive term -chi sigma_z a^dag a is kept static.
    """
    _check_plan_frequencies(params, plan)
    a, adag, sm, sp, sz = make_ladder(space)
    m_sum = adag.matrix @ sp.matrix        # rotates at +(omega_r + omega_q)
    m_diff = adag.matrix @ sm.matrix       # rotates at +(omega_r - omega_q)
    static = -params.chi * (sz.matrix @ adag.matrix @ a.matrix)
    w_r, w_q = params.omega_r, params.omega_q
    g = params.g

    def hamiltonian(t: float) -> np.ndarray:
        c = g * (2.0 * plan.eps1 * math.cos(plan.omega1 * t + plan.nu1)
                 + 2.0 * plan.eps2 * math.cos(plan.omega2 * t + plan.nu2))
        osc = (m_sum * np.exp(1j * (w_r + w_q) * t)
               + m_diff * np.exp(1j * (w_r - w_q) * t))
        return c * (osc + osc.conj().T) + static

    return hamiltonian


def build_lab_frame_generator(params: SystemParams, plan: DrivePlan,
                              space: HilbertSpace, t: float) -> Operator:
    """Pre-RWA time-dependent Hamiltonian evaluated at time t."""
    return Operator(space, lab_frame_hamiltonian_fn(params, plan, space)(t),
                    unit="rad/s")


@dataclass(frozen=True)
class RwaValidation:
    """Lab-frame trajectory against the rotating-frame steady state."""

    times: np.ndarray
    lab_fidelity: np.ndarray
    lab_sz: np.ndarray
    rotating_fidelity: float
    rotating_sz: float
    gap: float


def validate_rwa(params: SystemParams, plan: DrivePlan,
                 target: StabilizationTarget, fock_levels: int = 6,
                 horizon_rates: float = 3.0, samples: int = 240) -> RwaValidation:
    """Integrate the pre-RWA dynamics and compare against the rotating-frame model.

    Starts from the rotating-frame steady state (sigma_z and the polar-target
    fidelity are frame invariant) and reports the gap between the tail-averaged
    lab-frame fidelity and the rotating-frame steady value. Only flux-modulated
    plans (xi = 0, polar targets) are covered: the fast terms accompanying the
    transverse Rabi drive are not modeled.
    """
    if plan.xi != 0.0:
        raise ValueError("lab-frame validation covers polar targets only (xi = 0); "
                         "fast terms of the transverse Rabi drive are not modeled")
    if params.kappa <= 0:
        raise ValueError("kappa must be positive to set the comparison horizon")
    space = HilbertSpace(fock_levels)
    rotating = build_stabilization_model(params, plan, space)
    rho_ss = steady_state(build_lindblad_generator(rotating))
    rot_fid, _, _, rot_sz = fidelity_and_expectations(rho_ss, target.theta, target.phi)

    horizon = horizon_rates / params.kappa
    times = np.linspace(0.0, horizon, samples + 1)
    fastest = params.omega_r + params.omega_q + abs(params.omega_r - params.omega_q)
    max_step = 2.0 * math.pi / (20.0 * fastest)
    channels = [(op.matrix, rate) for op, rate in thermal_channels(params, space)]
    traj = evolve_time_dependent(space, lab_frame_hamiltonian_fn(params, plan, space),
                                 channels, rho_ss, times, max_step=max_step)
    lab_fid = np.empty(len(traj))
    lab_sz = np.empty(len(traj))
    for i, snap in enumerate(traj):
        fid, _, _, sz = fidelity_and_expectations(snap, target.theta, target.phi)
        lab_fid[i] = fid
        lab_sz[i] = sz
    tail = max(1, int(0.15 * len(traj)))
    gap = abs(float(np.mean(lab_fid[-tail:])) - rot_fid)
    return RwaValidation(times=times, lab_fidelity=lab_fid, lab_sz=lab_sz,
                         rotating_fidelity=rot_fid, rotating_sz=rot_sz, gap=gap)
