"""Pure-numpy fixed-step RK4 Lindblad propagator (fallback kernel).

Mirrors the compiled Cython kernel's contract exactly; selected at import
time when the extension is unavailable (see ``rcdsim._kernels``).

The generator is supplied in precomputed-coefficient form: the drift matrix
M(t) = -i H(t) - (1/2) sum_j L_j(t)^dag L_j(t) and every jump operator
L_j(t) are linear combinations of static matrices with scalar coefficients
tabulated on the half-step grid t_0 + k dt/2.  One right-hand-side
evaluation is then

    d rho = M rho + (M rho)^dag + sum_j L_j rho L_j^dag,

which uses 1 + 2 J matrix products.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def rk4_propagate(rho0, dt, n_steps, m_parts, m_coeffs, l_parts, l_coeffs,
                  l_offsets, obs, sample_steps):
    """Propagate ``rho0`` over ``n_steps`` RK4 steps of size ``dt``.

    Parameters
    ----------
    rho0 : (D, D) complex ndarray
    m_parts : (KM, D, D) static parts of the drift matrix M(t)
    m_coeffs : (2 n_steps + 1, KM) coefficients of M on the half-step grid
    l_parts : (KL, D, D) static parts of the jump operators
    l_coeffs : (2 n_steps + 1, KL) jump coefficients on the half-step grid
    l_offsets : (J + 1,) part-range offsets; jump j uses parts
        ``l_offsets[j]:l_offsets[j+1]``
    obs : (KO, D, D) static observables sampled as Tr[O rho]
    sample_steps : sorted step indices (0..n_steps) at which to record

    Returns
    -------
    obs_out : (S, KO) complex observable table
    rho : (D, D) final state (Hermitized each step, not renormalized)
    trace_samples : (S,) Re Tr rho at the sampled steps
    max_drift : float, max over all steps of \\|Tr rho - 1\\|
    """
    rho = np.array(rho0, dtype=np.complex128, order="C")
    n_jumps = len(l_offsets) - 1
    slices = [slice(int(l_offsets[j]), int(l_offsets[j + 1])) for j in range(n_jumps)]

    def rhs(sigma, row):
        m = np.tensordot(m_coeffs[row], m_parts, axes=1)
        x = m @ sigma
        out = x + x.conj().T
        for sl in slices:
            lj = np.tensordot(l_coeffs[row, sl], l_parts[sl], axes=1)
            p = lj @ sigma
            out += p @ lj.conj().T
        return out

    n_obs = obs.shape[0]
    sample_steps = np.asarray(sample_steps, dtype=np.int64)
    obs_out = np.empty((len(sample_steps), n_obs), dtype=np.complex128)
    trace_samples = np.empty(len(sample_steps), dtype=np.float64)
    s_ptr = 0
    max_drift = 0.0

    def record(step):
        nonlocal s_ptr
        while s_ptr < len(sample_steps) and sample_steps[s_ptr] == step:
            obs_out[s_ptr] = np.einsum("kij,ji->k", obs, rho)
            trace_samples[s_ptr] = np.trace(rho).real
            s_ptr += 1

    record(0)
    for i in range(n_steps):
        row = 2 * i
        k1 = rhs(rho, row)
        k2 = rhs(rho + (dt / 2) * k1, row + 1)
        k3 = rhs(rho + (dt / 2) * k2, row + 1)
        k4 = rhs(rho + dt * k3, row + 2)
        rho += (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = (rho + rho.conj().T) / 2
        max_drift = max(max_drift, abs(np.trace(rho).real - 1.0))
        record(i + 1)

    return obs_out, rho, trace_samples, max_drift
