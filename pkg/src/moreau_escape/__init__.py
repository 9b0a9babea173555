"""Saddle-point escape for weakly convex functions via inexact Moreau envelope gradients."""

__version__ = "0.1.0"

from .envelope import (CriticalityCertificate, EnvelopeHandle, QuadraticCertificate,
                       check_second_order, envelope_value, exact_grad, fd_hessian,
                       inexact_grad, make_envelope)
from .errors import MoreauEscapeError
from .models import ModelKind, ModelOracle, make_model, model_value, prox_step
from .pgd import (PgdMode, PgdParams, RunTrace, ab_admissible, compute_params,
                  practical_params, run, run_many, sample_ball, verify_schedule_inequalities)
from .problems import (PROBLEMS, Box, Form, ProblemSpec, ProxGroundTruth, evaluate,
                       exact_prox, get_problem, subgrad)
from .prox_oracle import (OracleConfig, OracleMode, prox_oracle, required_K_one_sided,
                          required_K_two_sided)
