"""Simulation lab for long-distance Bell tests with moving devices."""

from .bell import ChshResult, SettingQuad, chsh_value, optimize_settings, per_trial_value, quantum_chsh
from .engine import Scenario, replay, run, summarize
from .exceptions import InsufficientStatisticsError
from .lhv import LhvKind, LhvModel, calibrate_loophole, postselected_chsh
from .models import CollapseKind, CollapseModel, StationGeometry, trial_verdict
from .qstate import TwoQubitState, correlation, joint_probability, make_state
from .spacetime import C, BoundInput, Frame, SpacetimeEvent, before_before, boost, vqi_bound

__version__ = "0.1.0"
