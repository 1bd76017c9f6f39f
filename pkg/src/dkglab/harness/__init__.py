"""Configuration, snapshots, diagnostics output and the command-line front end."""
from .config import ConfigError, load_config, resolve
from .runner import RunResult, run_experiment
from .snapshot import SnapshotError, read_snapshot, snapshot_roundtrip, write_snapshot

__all__ = [
    "ConfigError", "load_config", "resolve", "RunResult", "run_experiment",
    "SnapshotError", "read_snapshot", "snapshot_roundtrip", "write_snapshot",
]
