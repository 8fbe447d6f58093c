"""Physical parameters, drive schedules, and system Hamiltonian/Lindblad construction.

Rates are expressed in units of the atom-cavity coupling (g = 1) unless the
caller supplies a different ``g``.  The cavity field amplitude decays at
``kappa = kappa_ex + kappa_in`` (so photon number decays at ``2 kappa``).

Atomic level ordering for the four-level system: |0>, |1>, |e1>, |e2>, with
the stable pair |0>, |1> hosting the qubit.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfc

from .qop import HilbertSpace, QOperator, annihilation, embed

__all__ = [
    "SystemParams",
    "GateSpec",
    "DriveSchedule",
    "gaussian_pulse",
    "numerical_derivative",
    "lambda_of_t",
    "drive_schedule",
    "full_hamiltonian",
    "effective_hamiltonian",
    "lindblad_full",
    "lindblad_effective",
    "hamiltonian_parts",
    "lindblad_parts",
]

ATOM_LEVELS = ("0", "1", "e1", "e2")


@dataclass(frozen=True)
class SystemParams:
    """Physical rates of the atom-cavity system (units of g by default)."""

    g: float = 1.0
    delta: float = 20.0
    kappa_ex: float = 0.99
    kappa_in: float = 0.01
    gamma: float = 0.1
    r1: float = 0.5
    r2: float = 0.5

    def __post_init__(self):
        for name in ("g", "kappa_ex", "kappa_in", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.kappa_ex + self.kappa_in <= 0:
            raise ValueError("total cavity decay rate must be positive")
        if self.delta == 0:
            raise ValueError("detuning must be nonzero")
        for name in ("r1", "r2"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"branching ratio {name} must lie in [0, 1]")

    @property
    def kappa(self) -> float:
        return self.kappa_ex + self.kappa_in

    @property
    def chi(self) -> float:
        """Leading-order dispersive shift g^2 / Delta."""
        return self.g**2 / self.delta

    @property
    def chi_exact(self) -> float:
        """Exact root of chi = g^2 / (Delta + chi); for sensitivity studies."""
        return (-self.delta + math.sqrt(self.delta**2 + 4 * self.g**2)) / 2

    @property
    def eta_ex(self) -> float:
        """Coupling efficiency kappa_ex / kappa."""
        return self.kappa_ex / self.kappa

    @property
    def c_in(self) -> float:
        """Internal cooperativity g^2 / (2 kappa_in gamma)."""
        if self.kappa_in <= 0 or self.gamma <= 0:
            raise ValueError("internal cooperativity needs kappa_in > 0 and gamma > 0")
        return self.g**2 / (2 * self.kappa_in * self.gamma)

    def replace(self, **kw) -> "SystemParams":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class GateSpec:
    """Target gate amplitude, input pulse, and simulation window.

    The pulse is centered at ``t0`` (default 4 tau) and the window runs to
    ``T`` (default 8 tau) so that both Gaussian tails fall below 1e-7.
    """

    alpha: complex = 1.0
    beta: complex = 1.0
    tau: float = 50.0
    t0: float | None = None
    T: float | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("pulse width tau must be positive")
        if self.t0 is None:
            object.__setattr__(self, "t0", 4 * self.tau)
        if self.T is None:
            object.__setattr__(self, "T", self.t0 + 4 * self.tau)
        if self.T < self.t0 + 4 * self.tau:
            raise ValueError("window must extend at least 4 tau past the pulse center")

    @property
    def n_in(self) -> float:
        """Mean photon number of the coherent input."""
        return abs(self.beta) ** 2

    def replace(self, **kw) -> "GateSpec":
        kw.setdefault("t0", self.t0)
        kw.setdefault("T", self.T)
        return dataclasses.replace(self, **kw)


# ---------------------------------------------------------------------------
# pulse and drive schedule


def gaussian_pulse(tau: float, t0: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Unit-L2-norm Gaussian envelope (pi tau^2)^(-1/4) exp(-(t-t0)^2 / 2 tau^2)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    norm = (math.pi * tau**2) ** -0.25

    def v(t):
        t = np.asarray(t, dtype=float)
        return norm * np.exp(-((t - t0) ** 2) / (2 * tau**2))

    return v


def numerical_derivative(f: Callable, step: float) -> Callable:
    """Central-difference derivative for user-supplied pulse shapes."""

    def df(t):
        return (np.asarray(f(t + step)) - np.asarray(f(t - step))) / (2 * step)

    return df


def lambda_of_t(spec: GateSpec, params: SystemParams) -> Callable[[np.ndarray], np.ndarray]:
    """Cavity drive amplitude lambda(t) = i alpha [dv/dt + kappa v] / sqrt(2 kappa_ex)."""
    if params.kappa_ex <= 0:
        raise ValueError("lambda(t) requires kappa_ex > 0")
    return drive_schedule(spec, params).lam


@dataclass(frozen=True)
class DriveSchedule:
    """Bundle of the synchronized drive functions, all vectorized over t.

    v(t)     pulse envelope (1/sqrt(time)), unit L2 norm
    vdot(t)  its time derivative
    b(t)     conditional cavity displacement alpha v / sqrt(2 kappa_ex)
    lam(t)   cavity drive i alpha [vdot + kappa v] / sqrt(2 kappa_ex)
    omega(t) laser Rabi frequency  -Delta lam(t) e^{i chi t} / g
    cdf(t)   cumulative pulse norm  int_{-inf}^{t} |v|^2 dt'
    sf(t)    remaining pulse norm 1 - cdf(t), computed without cancellation
    """

    v: Callable
    vdot: Callable
    b: Callable
    lam: Callable
    omega: Callable
    cdf: Callable
    sf: Callable
    alpha: complex
    chi: float


def drive_schedule(spec: GateSpec, params: SystemParams,
                   use_exact_chi: bool = False) -> DriveSchedule:
    """Build the Gaussian-pulse drive schedule for a target amplitude ``spec.alpha``."""
    if params.kappa_ex <= 0:
        raise ValueError("drive schedule requires kappa_ex > 0")
    alpha = complex(spec.alpha)
    tau, t0 = spec.tau, spec.t0
    kappa = params.kappa
    chi = params.chi_exact if use_exact_chi else params.chi
    root = math.sqrt(2 * params.kappa_ex)
    v = gaussian_pulse(tau, t0)

    def vdot(t):
        t = np.asarray(t, dtype=float)
        return -(t - t0) / tau**2 * v(t)

    def b(t):
        return alpha * v(t) / root

    def lam(t):
        return 1j * alpha / root * (vdot(t) + kappa * v(t))

    def omega(t):
        t = np.asarray(t, dtype=float)
        return -params.delta * lam(t) * np.exp(1j * chi * t) / params.g

    def cdf(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * erfc(-(t - t0) / tau)

    def sf(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * erfc((t - t0) / tau)

    return DriveSchedule(v=v, vdot=vdot, b=b, lam=lam, omega=omega, cdf=cdf, sf=sf,
                         alpha=alpha, chi=chi)


# ---------------------------------------------------------------------------
# Hamiltonians

Part = tuple[Callable | None, np.ndarray]  # (time coefficient, static matrix)


def _atom_proj(space: HilbertSpace, i: int, j: int, label: str = "q") -> np.ndarray:
    d = space.dim_of(label)
    m = np.zeros((d, d), dtype=np.complex128)
    m[i, j] = 1.0
    return embed(QOperator.single(m, label), space, label).matrix


def _cavity_op(space: HilbertSpace, label: str = "c") -> np.ndarray:
    return embed(annihilation(space.dim_of(label), label), space, label).matrix


def hamiltonian_parts(params: SystemParams, schedule: DriveSchedule,
                      space: HilbertSpace, model: str) -> list[Part]:
    """System Hamiltonian as [(coefficient(t) or None, matrix)] terms.

    ``model`` selects the four-level Hamiltonian ("full", atom factor dim 4)
    or the adiabatically eliminated qubit form ("effective", dim 2).
    """
    c = _cavity_op(space)
    if model == "full":
        if space.dim_of("q") != 4:
            raise ValueError("full model needs atom factor of dim 4 (|0>,|1>,|e1>,|e2>)")
        chi = schedule.chi
        pe = _atom_proj(space, 2, 2) + _atom_proj(space, 3, 3)
        drive_up = _atom_proj(space, 3, 0) + _atom_proj(space, 2, 1)
        jc_up = (_atom_proj(space, 2, 0) + _atom_proj(space, 3, 1)) @ c
        nc = c.conj().T @ c

        def om_rot(t):
            return schedule.omega(t) * np.exp(-1j * chi * np.asarray(t, dtype=float))

        def om_rot_conj(t):
            return np.conj(om_rot(t))

        return [
            (None, chi * nc + (params.delta + chi) * pe
                   + params.g * (jc_up + jc_up.conj().T)),
            (om_rot, drive_up),
            (om_rot_conj, drive_up.conj().T),
        ]
    if model == "effective":
        if space.dim_of("q") != 2:
            raise ValueError("effective model needs qubit factor of dim 2")
        sx = _atom_proj(space, 0, 1) + _atom_proj(space, 1, 0)
        sx_cdag = sx @ c.conj().T
        return [
            (schedule.lam, sx_cdag),
            (lambda t: np.conj(schedule.lam(t)), sx_cdag.conj().T),
        ]
    raise ValueError(f"unknown model {model!r}")


def _assemble(parts: Sequence[Part], t: float) -> np.ndarray:
    out = np.zeros_like(parts[0][1])
    for coeff, mat in parts:
        out = out + (mat if coeff is None else complex(coeff(t)) * mat)
    return out


def full_hamiltonian(t: float, params: SystemParams, schedule: DriveSchedule,
                     space: HilbertSpace | None = None, cavity_dim: int = 10) -> QOperator:
    """Four-level rotating-frame Hamiltonian at time ``t``.

    H = chi c^dag c + (Delta + chi)(|e1><e1| + |e2><e2|)
        + [Omega(t) e^{-i chi t} (|e2><0| + |e1><1|) + g (|e1><0| + |e2><1|) c + h.c.]
    """
    if space is None:
        space = HilbertSpace([("q", 4), ("c", cavity_dim)])
    parts = hamiltonian_parts(params, schedule, space, "full")
    return QOperator(space, _assemble(parts, t))


def effective_hamiltonian(t: float, params: SystemParams, schedule: DriveSchedule,
                          space: HilbertSpace | None = None, cavity_dim: int = 10) -> QOperator:
    """Qubit-space Hamiltonian sigma_x [lambda(t) c^dag + lambda*(t) c]."""
    if space is None:
        space = HilbertSpace([("q", 2), ("c", cavity_dim)])
    parts = hamiltonian_parts(params, schedule, space, "effective")
    return QOperator(space, _assemble(parts, t))


# ---------------------------------------------------------------------------
# Lindblad operators

JumpParts = list[list[Part]]  # one part list per jump operator


def lindblad_parts(params: SystemParams, schedule: DriveSchedule | None,
                   space: HilbertSpace, model: str) -> JumpParts:
    """Dissipation channels as per-jump part lists.

    The cavity internal loss sqrt(2 kappa_in) c is common to both models.
    The four atomic decay channels are the raw |g><e| operators in the full
    model and their adiabatically eliminated counterparts
    -sqrt(2 r gamma)/g [lambda(t) (qubit op) - chi (qubit op) c] in the
    effective model.
    """
    c = _cavity_op(space)
    jumps: JumpParts = [[(None, math.sqrt(2 * params.kappa_in) * c)]]
    gam = params.gamma
    rates = (params.r1, 1 - params.r1, params.r2, 1 - params.r2)
    if model == "full":
        # (ground, excited) index pairs matching the branching ratios above
        pairs = ((0, 2), (1, 2), (1, 3), (0, 3))
        for r, (i, j) in zip(rates, pairs):
            jumps.append([(None, math.sqrt(2 * r * gam) * _atom_proj(space, i, j))])
        return jumps
    if model == "effective":
        if schedule is None:
            raise ValueError("effective Lindblad operators need the drive schedule")
        chi = schedule.chi
        # (lambda-part qubit op indices, chi-part qubit op indices)
        combos = (((0, 1), (0, 0)), ((1, 1), (1, 0)), ((1, 0), (1, 1)), ((0, 0), (0, 1)))
        for r, ((li, lj), (ci, cj)) in zip(rates, combos):
            pref = math.sqrt(2 * r * gam) / params.g
            q_lam = _atom_proj(space, li, lj)
            q_chi = _atom_proj(space, ci, cj) @ c
            jumps.append([
                (schedule.lam, -pref * q_lam),
                (None, pref * chi * q_chi),
            ])
        return jumps
    raise ValueError(f"unknown model {model!r}")


def lindblad_full(params: SystemParams, space: HilbertSpace | None = None,
                  cavity_dim: int = 10) -> list[QOperator]:
    """Static jump operators of the four-level model (cavity loss + 4 decay branches)."""
    if space is None:
        space = HilbertSpace([("q", 4), ("c", cavity_dim)])
    if space.dim_of("q") != 4:
        raise ValueError("full-model Lindblads need atom factor of dim 4")
    return [QOperator(space, _assemble(p, 0.0))
            for p in lindblad_parts(params, None, space, "full")]


def lindblad_effective(t: float, params: SystemParams, schedule: DriveSchedule,
                       space: HilbertSpace | None = None,
                       cavity_dim: int = 10) -> list[QOperator]:
    """Effective jump operators at time ``t`` (cavity loss + 4 eliminated decay branches)."""
    if space is None:
        space = HilbertSpace([("q", 2), ("c", cavity_dim)])
    if space.dim_of("q") != 2:
        raise ValueError("effective-model Lindblads need qubit factor of dim 2")
    return [QOperator(space, _assemble(p, t))
            for p in lindblad_parts(params, schedule, space, "effective")]
