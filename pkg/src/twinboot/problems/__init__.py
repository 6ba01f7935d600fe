"""Benchmark problems with closed-form losses and analytic gradients.

Every problem exposes ``dataset``, ``n_params``, ``initial_params(seed)``,
``loss_and_grad(w, inputs, targets)``, ``predict(w, inputs)`` and
``grouping(kind=None)``.
"""
from twinboot.problems.gaussian import GaussianMeanProblem, loss_and_grad_gaussian
from twinboot.problems.mlp import MlpProblem, two_spirals
from twinboot.problems.seismic import SeismicProblem, build_seismic, smooth_field
from twinboot.problems.two_basin import TwoBasinProblem, two_well_potential

__all__ = [
    "GaussianMeanProblem",
    "MlpProblem",
    "SeismicProblem",
    "TwoBasinProblem",
    "build_seismic",
    "loss_and_grad_gaussian",
    "smooth_field",
    "two_spirals",
    "two_well_potential",
]
