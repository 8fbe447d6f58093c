"""Closed-form model of the reflection gate: ideal action, loss channel, error budget.

For a pulse much longer than the cavity lifetime the reflection acts as the
ideal conditional displacement CD(alpha) preceded by a loss unitary

    U_loss = CD_loss(sqrt(1/eta_ex - 1) alpha) B(phi),
    cos(phi) = 2 eta_ex - 1,   sin(phi) = 2 sqrt(eta_ex (1 - eta_ex)),

where B couples the pulse mode to an initially empty loss mode that is
traced out afterwards.  Finite pulse bandwidth and atomic decay enter as
the separate error budgets ``eps_pulse`` and ``p_sp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import expm
from scipy.special import erfcx

from .model import GateSpec, SystemParams, drive_schedule
from .qop import (DensityMatrix, HilbertSpace, PureState, QOperator,
                  annihilation, embed, number_op, partial_trace)

__all__ = [
    "ChannelModel",
    "ReflectionCoeffs",
    "FidelityBounds",
    "RequirementCheck",
    "ideal_cd",
    "apply_loss_channel",
    "full_gate_channel",
    "reflection_coeffs",
    "epsilon_pulse",
    "p_spontaneous",
    "fidelity_lower_bound",
    "pulse_requirements",
]


@dataclass(frozen=True)
class ChannelModel:
    """Analytic gate channel parameters for amplitude ``alpha`` at efficiency ``eta_ex``."""

    alpha: complex
    eta_ex: float
    p_sp: float = 0.0
    eps_pulse: float = 0.0
    phi: float = field(init=False)
    loss_amp: complex = field(init=False)

    def __post_init__(self):
        if not 0 < self.eta_ex <= 1:
            raise ValueError("eta_ex must lie in (0, 1]")
        if not 0 <= self.p_sp <= 1 or not 0 <= self.eps_pulse <= 1:
            raise ValueError("error probabilities must lie in [0, 1]")
        phi = math.acos(2 * self.eta_ex - 1)  # sin(phi) = 2 sqrt(eta (1-eta)) >= 0
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "loss_amp",
                           cmath_sqrt(1 / self.eta_ex - 1) * complex(self.alpha))

    @classmethod
    def from_params(cls, alpha: complex, params: SystemParams,
                    spec: GateSpec | None = None) -> "ChannelModel":
        p_sp = eps = 0.0
        if spec is not None:
            kt = params.kappa * spec.tau
            if params.gamma > 0 and params.kappa_in > 0:
                p_sp = p_spontaneous(spec.replace(alpha=alpha), params, form="CLOSED")
            eps = epsilon_pulse(params.eta_ex, spec.n_in, kt)
        return cls(alpha=alpha, eta_ex=params.eta_ex, p_sp=p_sp, eps_pulse=eps)


def cmath_sqrt(x: float) -> float:
    if x < 0:
        raise ValueError("negative loss-amplitude radicand")
    return math.sqrt(x)


@dataclass(frozen=True)
class ReflectionCoeffs:
    """Empty-cavity reflection amplitudes into the retained and lost ports.

        r(w) = (kappa - 2 kappa_ex - i w) / (kappa - i w)
        l(w) = -2 sqrt(kappa_ex kappa_in) / (kappa - i w)

    with |r|^2 + |l|^2 = 1 at every detuning w.
    """

    r: Callable[[np.ndarray], np.ndarray]
    l: Callable[[np.ndarray], np.ndarray]


def reflection_coeffs(params: SystemParams) -> ReflectionCoeffs:
    kappa, kex, kin = params.kappa, params.kappa_ex, params.kappa_in
    if kappa <= 0:
        raise ValueError("reflection coefficients need kappa > 0")
    cross = 2 * math.sqrt(kex * kin)

    def r(w):
        w = np.asarray(w, dtype=float)
        return (kappa - 2 * kex - 1j * w) / (kappa - 1j * w)

    def l(w):
        w = np.asarray(w, dtype=float)
        return -cross / (kappa - 1j * w)

    return ReflectionCoeffs(r=r, l=l)


# ---------------------------------------------------------------------------
# gate unitaries and the loss channel


def _displacement_matrix(alpha: complex, dim: int) -> np.ndarray:
    a = annihilation(dim).matrix
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def _conditional_displacement(alpha: complex, pos: int,
                              dims: tuple[int, ...]) -> np.ndarray:
    """exp[sigma_x (alpha a^dag - alpha* a)] with the qubit as factor 0 of ``dims``
    and the displaced mode at factor index ``pos``; spectral form over the
    sigma_x eigenprojectors, exact within the mode truncation."""
    sx_p = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=np.complex128)
    sx_m = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=np.complex128)
    out = np.zeros((math.prod(dims),) * 2, dtype=np.complex128)
    for proj, amp in ((sx_p, alpha), (sx_m, -alpha)):
        term = proj
        for i, d in enumerate(dims[1:], start=1):
            term = np.kron(term,
                           _displacement_matrix(amp, d) if i == pos
                           else np.eye(d, dtype=np.complex128))
        out += term
    return out


def ideal_cd(alpha: complex, dims: tuple[int, int] = (2, 30),
             labels: tuple[str, str] = ("q", "m")) -> QOperator:
    """Ideal conditional displacement CD(alpha) = exp[sigma_x (alpha a^dag - alpha* a)].

    Block action in the sigma_x eigenbasis: |+-> goes to |+-> (x) D(+-alpha).
    """
    dq, dm = dims
    if dq != 2:
        raise ValueError("ideal_cd needs a dim-2 qubit factor")
    space = HilbertSpace([(labels[0], dq), (labels[1], dm)])
    return QOperator(space, _conditional_displacement(alpha, 1, (dq, dm)))


def _loss_dim(model: ChannelModel, mode_amp: float) -> int:
    sin_phi = 2 * math.sqrt(model.eta_ex * (1 - model.eta_ex))
    return max(4, math.ceil((abs(model.loss_amp) + mode_amp * sin_phi + 3) ** 2))


def apply_loss_channel(rho: DensityMatrix, model: ChannelModel,
                       loss_dim: int | None = None) -> DensityMatrix:
    """Trace-preserving loss map E(rho) = Tr_loss[U_loss (rho (x) |0><0|) U_loss^dag].

    ``rho`` lives on qubit (x) mode; the loss mode is adjoined, B(phi) and
    the conditional displacement of the loss mode are applied, and the loss
    mode is traced out.  The loss-mode truncation follows the displaced
    amplitude it can receive (beamsplitter leakage + conditional kick).
    """
    (lq, dq), (lm, dm) = rho.space.factors
    if dq != 2:
        raise ValueError("loss channel expects a dim-2 qubit as the first factor")
    if model.eta_ex == 1.0:
        return rho
    if loss_dim is None:
        n_mode = float(np.trace(number_op(dm).matrix @
                                partial_trace(rho, [lm]).matrix).real)
        loss_dim = _loss_dim(model, math.sqrt(max(n_mode, 0.0)))
    space = HilbertSpace([(lq, dq), (lm, dm), ("loss", loss_dim)])
    a_m = annihilation(dm).matrix
    a_l = annihilation(loss_dim).matrix
    gen = model.phi * (np.kron(a_m, a_l.conj().T) - np.kron(a_m.conj().T, a_l))
    bs = np.kron(np.eye(dq, dtype=np.complex128), expm(gen))
    cd_loss = _conditional_displacement(model.loss_amp, 2, (dq, dm, loss_dim))
    u_loss = cd_loss @ bs
    dim_in = rho.space.dim
    vac = np.zeros((loss_dim, loss_dim), dtype=np.complex128)
    vac[0, 0] = 1.0
    big = np.kron(rho.matrix, vac)
    big = u_loss @ big @ u_loss.conj().T
    out = partial_trace(DensityMatrix(space, big, _validate=False), [lq, lm])
    if out.matrix.shape != (dim_in, dim_in):
        raise RuntimeError("loss channel changed the retained dimensions")
    return out


def full_gate_channel(rho_in: DensityMatrix, model: ChannelModel,
                      loss_dim: int | None = None) -> DensityMatrix:
    """Long-pulse gate channel: rho(T) = CD(alpha) E(rho_in) CD(alpha)^dag."""
    (lq, dq), (lm, dm) = rho_in.space.factors
    lossy = apply_loss_channel(rho_in, model, loss_dim=loss_dim)
    cd = _conditional_displacement(model.alpha, 1, (dq, dm))
    out = cd @ lossy.matrix @ cd.conj().T
    return DensityMatrix(rho_in.space, out, _validate=False)


# ---------------------------------------------------------------------------
# error budget


def epsilon_pulse(eta_ex: float, n_in: float, kappa_tau: float) -> float:
    """Finite-bandwidth reflection error for a Gaussian pulse.

        eps = 1 - exp{-4 eta_ex n_in [1 - sqrt(pi) x exp(x^2) erfc(x)]},  x = kappa tau,

    evaluated through the scaled complementary error function, which stays
    finite where exp(x^2) alone would overflow.  Leading behaviour
    2 eta_ex n_in / x^2.
    """
    if kappa_tau <= 0:
        raise ValueError("kappa_tau must be positive")
    if n_in == 0:
        return 0.0
    bracket = 1.0 - math.sqrt(math.pi) * kappa_tau * float(erfcx(kappa_tau))
    return float(1.0 - math.exp(-4.0 * eta_ex * n_in * bracket))


def p_spontaneous(spec: GateSpec, params: SystemParams, form: str = "CLOSED") -> float:
    """Probability of at least one spontaneous-decay event during the gate.

    CLOSED evaluates 1 - exp{-|alpha|^2 / (2 eta (1-eta) C_in) [1 + 1/(2 (kappa tau)^2)]};
    INTEGRAL computes 1 - exp{-(2 gamma / g^2) int |lambda(t)|^2 dt} by
    quadrature over the drive schedule.
    """
    form = form.upper()
    if form == "CLOSED":
        eta = params.eta_ex
        if not 0 < eta < 1:
            raise ValueError("closed form needs 0 < eta_ex < 1 (kappa_in > 0)")
        kt = params.kappa * spec.tau
        expo = (abs(spec.alpha) ** 2 / (2 * eta * (1 - eta) * params.c_in)
                * (1 + 1 / (2 * kt**2)))
        return float(1.0 - math.exp(-expo))
    if form == "INTEGRAL":
        if params.gamma == 0:
            return 0.0
        lam = drive_schedule(spec, params).lam
        ts = np.linspace(0.0, spec.T, 40001)
        integral = float(np.trapezoid(np.abs(lam(ts)) ** 2, ts))
        return float(1.0 - math.exp(-2 * params.gamma / params.g**2 * integral))
    raise ValueError(f"unknown p_sp form {form!r}")


class FidelityBounds(NamedTuple):
    lower: float
    upper: float


def fidelity_lower_bound(psi_ini: PureState, model: ChannelModel,
                         loss_dim: int | None = None) -> FidelityBounds:
    """Fidelity bounds of the gate output against CD(alpha)|psi_ini>.

    lower = (1 - p_sp) <psi| E(|psi><psi|) |psi>; upper = lower + p_sp.
    """
    rho = psi_ini.to_density_matrix()
    lossy = apply_loss_channel(rho, model, loss_dim=loss_dim)
    overlap = float(np.real(psi_ini.vector.conj() @ (lossy.matrix @ psi_ini.vector)))
    overlap = min(1.0, max(0.0, overlap))
    lower = (1.0 - model.p_sp) * overlap
    return FidelityBounds(lower=lower, upper=min(1.0, lower + model.p_sp))


@dataclass(frozen=True)
class RequirementCheck:
    name: str
    lhs: float
    rhs: float
    threshold: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return math.inf
        return self.lhs / self.rhs

    @property
    def satisfied(self) -> bool:
        return self.ratio >= self.threshold


def pulse_requirements(spec: GateSpec, params: SystemParams, n_in: float | None = None,
                       threshold: float = 10.0) -> list[RequirementCheck]:
    """Pulse-length requirements for a clean long-pulse gate.

    g^2 tau / kappa >> |alpha|^2 (drive adiabaticity, with the bandwidth-
    refined variant carrying the (1 + 1/kappa tau)^-2 factor) and
    kappa tau >> max(1, 2 eta_ex n_in) (cavity-following bandwidth).
    """
    if n_in is None:
        n_in = spec.n_in
    kt = params.kappa * spec.tau
    drive_lhs = params.g**2 * spec.tau / params.kappa
    return [
        RequirementCheck("drive_adiabaticity", drive_lhs, abs(spec.alpha) ** 2,
                         threshold),
        RequirementCheck("drive_adiabaticity_refined",
                         drive_lhs * (1 + 1 / kt) ** -2, abs(spec.alpha) ** 2,
                         threshold),
        RequirementCheck("pulse_bandwidth", kt, max(1.0, 2 * params.eta_ex * n_in),
                         threshold),
    ]
