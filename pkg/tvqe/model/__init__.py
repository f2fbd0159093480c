from tvqe.model.params import ModelParams, check_compatible, count_parameters, param_init, parameter_specs
from tvqe.model.network import caqe_forward, sstf_forward, tvqe_forward

__all__ = [
    "ModelParams", "check_compatible", "count_parameters", "param_init", "parameter_specs",
    "caqe_forward", "sstf_forward", "tvqe_forward",
]
