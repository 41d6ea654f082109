"""Precision-switchable laboratory for training PINNs with L-BFGS.

Trains tanh-MLP networks on four benchmark PDEs under fp64, fp32 and
emulated tf32/bf16 arithmetic, and instruments the optimizer's inner-loop
stopping behaviour, the training phases, and the loss/error landscape.
"""

from .precision import (BF16, FP32, FP64, PRECISIONS, TF32, PrecisionSpec,
                        emulated_op, from_name, machine_epsilon, round_to)
from .autodiff import AdTape, Tape, grad, input_derivative, record
from .model import MlpParams, forward, init_mlp, layer_shapes
from .pde_suite import (CollocationSet, PdeProblem, allen_cahn_reference,
                        analytic_convection, analytic_reaction, analytic_wave,
                        boundary_residuals, make_grid, make_problem)
from .losses import (LossBreakdown, Phase, PhaseThresholds, classify_phase,
                     rmae, rrmse, total_loss)
from .lbfgs import (CurvaturePair, LbfgsConfig, LbfgsState, StopReason,
                    accept_pair, stall_diagnostic, step, strong_wolfe,
                    two_loop_direction)
from .landscape import (LandscapeSlice, barrier_height, interpolate_segment,
                        slice_2d)
from .harness import (Checkpoint, RunConfig, TrainingRecord, evaluate,
                      load_checkpoint, load_config, resume, run,
                      save_checkpoint, save_config, sweep)

__all__ = [name for name in dir() if not name.startswith("_")]
