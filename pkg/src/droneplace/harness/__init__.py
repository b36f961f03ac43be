"""Scenario generation, experiment orchestration and the command line."""
from .experiments import RunRecord, SweepTable, results_csv, run_experiment, sweep, timing_csv
from .scenarios import CrowdSpec, Hotspot, generate_scenario, paper_crowd, uniform_crowd
