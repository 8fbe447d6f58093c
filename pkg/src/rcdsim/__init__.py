"""Reflection-based conditional displacement gate simulator.

A toolkit for an atom-light hybrid gate in which a driven atom-cavity
system imprints a qubit-conditional displacement on a reflected traveling
light pulse.  Provides full and adiabatically eliminated master-equation
dynamics with traveling-wavepacket input/output, the closed-form gate
channel with its loss/decay error budget, coupling-efficiency optimization,
and postselected Wigner functions.
"""

from ._kernels import BACKEND as kernel_backend
from .channel import (ChannelModel, ReflectionCoeffs, apply_loss_channel,
                      epsilon_pulse, fidelity_lower_bound, full_gate_channel,
                      ideal_cd, p_spontaneous, pulse_requirements,
                      reflection_coeffs)
from .dynamics import (CascadeConfig, IntegrationError, LindbladGenerator,
                       SimulationResult, build_cascade, build_reduced,
                       integrate, lindblad_rhs, output_intensity, run_rcd,
                       virtual_couplings)
from .model import (DriveSchedule, GateSpec, SystemParams, drive_schedule,
                    effective_hamiltonian, full_hamiltonian, gaussian_pulse,
                    lambda_of_t, lindblad_effective, lindblad_full)
from .optimize import OptimizationResult, approx_eta, optimize_eta, sweep
from .phasespace import (WignerGrid, negativity_volume, postselect_qubit,
                         wigner)
from .qop import (DensityMatrix, HilbertSpace, PureState, QOperator,
                  annihilation, basis_state, beamsplitter, coherent_state,
                  displacement, embed, fidelity, partial_trace, qubit_state,
                  tensor_state)

__version__ = "0.1.0"
