"""Built-in models and the model abstractions."""

from .base import Advance, ChainModel, JumpModel, check_support, select_channel, ssa_step
from .finite import FiniteChainModel, FiniteJumpModel, two_state_fim, two_state_jump_model, two_state_rer
from .langevin import (LangevinModel, LangevinSettings, LangevinState, bbk_step, circulation,
                       divergence_check, morse_force, morse_potential, random_initial_state)
from .schlogl import SchloglModel, schlogl_rate_gradient, schlogl_rates
from .zgb import ZgbLattice, ZgbModel, zgb_execute, zgb_rate_field, zgb_site_rates

__all__ = [
    "Advance", "ChainModel", "JumpModel", "check_support", "select_channel", "ssa_step",
    "FiniteChainModel", "FiniteJumpModel", "two_state_fim", "two_state_jump_model", "two_state_rer",
    "LangevinModel", "LangevinSettings", "LangevinState", "bbk_step", "circulation", "divergence_check",
    "morse_force", "morse_potential", "random_initial_state",
    "SchloglModel", "schlogl_rate_gradient", "schlogl_rates",
    "ZgbLattice", "ZgbModel", "zgb_execute", "zgb_rate_field", "zgb_site_rates",
]
