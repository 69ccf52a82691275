"""Locally adaptive online learning over hierarchical epsilon-nets."""

from .aggregate import (ANH_REGRET_CONSTANT, AnhState, EwaState, anh_round, ewa_predict,
                        ewa_update, psi, tree_regret)
from .bench import (LAConfig, RoundLog, Stream, StreamSpec, TargetFunction, gen_stream,
                    regret_curve, regret_vs_clean, rounds_csv, run_hm, run_la)
from .core import DomainError, Example, LossKind, loss
from .learners import WM_REGRET_CONSTANT, FtlState, WmState, ftl_predict, wm_predict
from .net import (Mode, RadiusSchedule, TauGrid, Tree, covering_audit, propagate,
                  propagate_dim, radius)
from .pruning import (Pruning, best_pruning, count_prunings, dimension_bound,
                      enumerate_prunings, lipschitz_bound, loss_bound, stats)

__all__ = [
    "ANH_REGRET_CONSTANT", "AnhState", "DomainError", "EwaState", "Example", "FtlState",
    "LAConfig", "LossKind", "Mode", "Pruning", "RadiusSchedule", "RoundLog", "Stream",
    "StreamSpec", "TargetFunction", "TauGrid", "Tree", "WM_REGRET_CONSTANT", "WmState",
    "anh_round", "best_pruning", "count_prunings", "covering_audit", "dimension_bound",
    "enumerate_prunings", "ewa_predict", "ewa_update", "ftl_predict", "gen_stream",
    "lipschitz_bound", "loss", "loss_bound", "propagate", "propagate_dim", "psi", "radius",
    "regret_curve", "regret_vs_clean", "rounds_csv", "run_hm", "run_la", "stats",
    "tree_regret", "wm_predict",
]
