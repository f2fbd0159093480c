from tvqe.autograd.tensor import OPS, Function, Node, Tape, Tensor, active_tape, backward, inject_backward_fault
from tvqe.autograd.gradcheck import (
    GradCheckReport, analytic_gradient, check_parameters, finite_diff_check, numeric_gradient, run_op_suite,
)

__all__ = [
    "OPS", "Function", "Node", "Tape", "Tensor", "active_tape", "backward", "inject_backward_fault",
    "GradCheckReport", "analytic_gradient", "check_parameters", "finite_diff_check", "numeric_gradient",
    "run_op_suite",
]
