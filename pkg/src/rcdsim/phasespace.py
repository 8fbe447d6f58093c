"""Wigner functions on truncated Fock states, qubit postselection, negativity.

Quadrature convention: x = sqrt(2) Re(alpha), p = sqrt(2) Im(alpha) with
[x, p] = i, and the Wigner function is normalized so that the full-plane
integral over dx dp equals the state's trace (vacuum peaks at 1/pi).  The
displaced-parity form W = Tr[D Pi D^dag rho] / pi is evaluated with a
cached eigendecomposition of the displacement generator, so each grid
point costs two dense matrix products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qop import DensityMatrix, HilbertSpace

__all__ = ["WignerGrid", "postselect_qubit", "wigner", "negativity_volume"]


class PostselectionError(ValueError):
    """Conditional state undefined: outcome probability below threshold."""


def postselect_qubit(rho: DensityMatrix, outcome: int,
                     min_probability: float = 1e-12) -> tuple[DensityMatrix, float]:
    """Project the first (qubit) factor onto |outcome> and renormalize the mode.

    Returns the conditional mode state and the outcome probability.
    """
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    (lq, dq), (lm, dm) = rho.space.factors
    block = rho.matrix.reshape(dq, dm, dq, dm)[outcome, :, outcome, :]
    p = float(np.trace(block).real)
    if p < min_probability:
        raise PostselectionError(f"outcome {outcome} has probability {p:.3e}")
    cond = (block + block.conj().T) / (2 * p)
    return DensityMatrix(HilbertSpace([(lm, dm)]), cond, _validate=False), p


@dataclass
class WignerGrid:
    """Phase-space samples W(x, p) on a rectangular grid (rows index p)."""

    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        """Full-grid integral of W dx dp (trapezoid)."""
        return float(np.trapezoid(np.trapezoid(self.values, self.xs, axis=1), self.ps))

    def boundary_max(self) -> float:
        v = self.values
        return float(max(np.abs(v[0]).max(), np.abs(v[-1]).max(),
                         np.abs(v[:, 0]).max(), np.abs(v[:, -1]).max()))


@lru_cache(maxsize=8)
def _displacement_basis(dim: int):
    """Eigendecomposition of i (a^dag - a); exp(r (a^dag - a)) = V e^{-i r w} V^dag."""
    n = np.arange(1, dim)
    a = np.zeros((dim, dim), dtype=np.complex128)
    a[n - 1, n] = np.sqrt(n)
    w, v = np.linalg.eigh(1j * (a.conj().T - a))
    return w, v


def _batched_displacement(alphas: np.ndarray, dim: int) -> np.ndarray:
    """Stack of D(alpha_g) built from the cached generator eigenbasis."""
    w, v = _displacement_basis(dim)
    r = np.abs(alphas)
    theta = np.angle(alphas)
    core = np.exp(-1j * r[:, None] * w[None, :])          # (G, dim)
    d_r = (v[None, :, :] * core[:, None, :]) @ v.conj().T  # (G, dim, dim)
    ph = np.exp(1j * theta[:, None] * np.arange(dim)[None, :])
    return d_r * ph[:, :, None] * ph.conj()[:, None, :]


def wigner(rho_mode: DensityMatrix, x_range: tuple[float, float] = (-4.0, 4.0),
           p_range: tuple[float, float] = (-4.0, 4.0),
           resolution: int = 161) -> WignerGrid:
    """Displaced-parity Wigner function of a single-mode state."""
    if len(rho_mode.space.factors) != 1:
        raise ValueError("wigner expects a single-mode state; postselect/trace first")
    dim = rho_mode.dim
    xs = np.linspace(*x_range, resolution)
    ps = np.linspace(*p_range, resolution)
    parity = (-1.0) ** np.arange(dim)
    rho = rho_mode.matrix
    values = np.empty((resolution, resolution), dtype=float)
    for i, p in enumerate(ps):
        alphas = (xs + 1j * p) / np.sqrt(2.0)
        b = _batched_displacement(-alphas, dim)   # rows of D^dag(alpha) rho D(alpha)
        m = b @ rho
        t = np.einsum("gnk,gnk->gn", m, b.conj())
        values[i] = (t.real @ parity) / np.pi
    return WignerGrid(xs=xs, ps=ps, values=values)


def negativity_volume(grid: WignerGrid, boundary_tol: float = 1e-4) -> float:
    """Integrated negative part of the Wigner function, int max(-W, 0) dx dp."""
    edge = grid.boundary_max()
    if edge > boundary_tol:
        warnings.warn(
            f"Wigner support reaches the grid boundary (|W| up to {edge:.2e}); "
            "negativity volume may be underestimated", RuntimeWarning, stacklevel=2)
    neg = np.clip(-grid.values, 0.0, None)
    return float(np.trapezoid(np.trapezoid(neg, grid.xs, axis=1), grid.ps))
