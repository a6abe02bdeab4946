"""Exact density-matrix simulation of a W-state quantum repeater.

Modules: ``linalg`` (labelled density operators), ``states`` (named states and
protocol operators), ``noise`` (local depolarizing channel), ``swapping``
(W-state entanglement swapping and relays), ``purification`` (stabilizer and
improved purification protocols), ``repeater`` (nested repeater analysis) and
``cli`` (the ``wrep`` command).
"""

from .linalg import DensityOperator, fidelity_with_pure, partial_trace, tensor_states
from .noise import depolarize_register, depolarized_w
from .purification import epp_fixed_point, epp_run, epp_threshold, select
from .repeater import repeater_resources, repeater_round, repeater_threshold_curves
from .states import bell_state, w_state
from .swapping import relay_resources, relay_simulate, swap

__version__ = "0.1.0"

__all__ = [
    "DensityOperator",
    "bell_state",
    "depolarize_register",
    "depolarized_w",
    "epp_fixed_point",
    "epp_run",
    "epp_threshold",
    "fidelity_with_pure",
    "partial_trace",
    "relay_resources",
    "relay_simulate",
    "repeater_resources",
    "repeater_round",
    "repeater_threshold_curves",
    "select",
    "swap",
    "tensor_states",
    "w_state",
]
