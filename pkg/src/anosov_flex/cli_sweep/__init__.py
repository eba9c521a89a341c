"""Configuration, parameter sweeps and report emission."""
from .config import ConfigError, SweepConfig, default_config, load_config
from .report import CSV_HEADER, SweepRecord, SweepReport, emit_reports
from .sweeps import region_report, run_construction1_sweep, run_construction2_sweep

__all__ = [
    "CSV_HEADER", "ConfigError", "SweepConfig", "SweepRecord", "SweepReport", "default_config",
    "emit_reports", "load_config", "region_report", "run_construction1_sweep", "run_construction2_sweep",
]
