"""Drone base-station placement over ground-user crowds coexisting with one ground base station."""
from .ddp import DdpOutcome, run_ddp
from .eddp import run_eddp
from .metrics import EvaluationReport, evaluate
from .model import Area, DbsSite, Environment, Placement, Scenario, SystemConfig

__version__ = "0.1.0"
