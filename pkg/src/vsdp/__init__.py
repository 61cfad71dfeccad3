"""Approximate unit-diagonal SDP solver and its use as a Volterra equalizer for differential UWB."""
from .symmat import SymMat, EigDecomp, eig_sym, lambda_min, is_feasible
from .sdp import (ObjectiveSpec, DualCertificate, SolveTrace, sum_of_squares, dual_subproblem,
                  duality_gap, fw_step, choose_beta, solve)
from .volterra import (VolterraSystem, SolverOptions, DemodResult, make_system, predict_z, build_objective,
                       demodulate_sdp, demodulate_ml)
from .uwb import BlockConfig, ChannelRealization, monocycle, encode_block, sample_channel, simulate_block

__all__ = [
    "SymMat", "EigDecomp", "eig_sym", "lambda_min", "is_feasible",
    "ObjectiveSpec", "DualCertificate", "SolveTrace", "sum_of_squares", "dual_subproblem",
    "duality_gap", "fw_step", "choose_beta", "solve",
    "VolterraSystem", "SolverOptions", "DemodResult", "make_system", "predict_z", "build_objective",
    "demodulate_sdp", "demodulate_ml",
    "BlockConfig", "ChannelRealization", "monocycle", "encode_block", "sample_channel", "simulate_block",
]
