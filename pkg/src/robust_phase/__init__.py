"""Robust phase retrieval by trimmed alternating minimisation."""
from .altmin import AltMinConfig, AltMinResult, run_altmin
from .core import MeasurementSet, RegimeParams, sign_invariant_distance
from .datagen import CorruptionPlan, RngSeed, apply_corruption, generate_clean
from .oracle import OracleConfig, OracleDivergence, run_oracle

__version__ = "0.1.0"

__all__ = [
    "AltMinConfig", "AltMinResult", "run_altmin",
    "MeasurementSet", "RegimeParams", "sign_invariant_distance",
    "CorruptionPlan", "RngSeed", "apply_corruption", "generate_clean",
    "OracleConfig", "OracleDivergence", "run_oracle",
]
