"""Age-cohort ledger reconstruction and holding-time statistics for UTXO chains."""

from .cohort import (
    AgeSnapshot,
    FlowLedger,
    age_snapshot,
    build_flow_ledger,
    conservation_report,
    load_ledger,
    save_ledger,
    transition_probability,
    volume,
)
from .ingest import PriceSeries, TimeGrid, TxRecord, load_prices, parse_ledger, sample_time
from .synth import SynthConfig, synthesize_ledger

__version__ = "0.1.0"

__all__ = [
    "AgeSnapshot",
    "FlowLedger",
    "PriceSeries",
    "SynthConfig",
    "TimeGrid",
    "TxRecord",
    "age_snapshot",
    "build_flow_ledger",
    "conservation_report",
    "load_ledger",
    "load_prices",
    "parse_ledger",
    "sample_time",
    "save_ledger",
    "synthesize_ledger",
    "transition_probability",
    "volume",
]
