"""Finite-horizon dissipativity verification and controller synthesis from
a single measured input/output trajectory of a SISO LTI plant."""
from .closed_loop import closed_loop_l2_gain, closed_loop_map, closed_loop_response, validate_closed_loop
from .dissipativity import Certificate, SupplyRate, check_open_loop, finite_horizon_l2_gain
from .lti import Channel, StateSpace, Trajectory, simulate
from .qmi import SolverOptions, SolveReport, direct_search, solve_feasibility
from .synthesis import (ControllerBasis, DissipativitySpec, QmiProblem, assemble_all, assemble_qmi,
                        fir_basis, pi_basis)
from .trajectory import DataPage, build_data_page

__version__ = "0.1.0"
