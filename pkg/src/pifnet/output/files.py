"""Result files written by the CLI.

Payload files are deterministic functions of the configuration. Anything
that varies between runs (timestamps, host details) goes to metadata.json.
"""

import csv
import json
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from ..core.models import SimRecord

SPIKE_COLUMNS = ("time", "neuron", "ordinal")


def dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload), encoding="utf-8")
    return path


def write_samples(path: Path, record: SimRecord) -> Path:
    """One JSON object per sample time."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for row in record.sample_rows():
            f.write(json.dumps(row, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_spike_log(path: Path, record: SimRecord) -> Path:
    """Spike log as CSV with columns time,neuron,ordinal; neurons are 1-based."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SPIKE_COLUMNS)
        for event in record.spike_log:
            writer.writerow((format(event.time, ".17g"), event.neuron + 1, event.ordinal))
    return path


def write_samples_csv(path: Path, record: SimRecord) -> Path:
    """Samples as CSV: t, then z_i, x_i and eta_i per neuron."""
    n = len(record.z0)
    header = ["t"] + [f"z{i + 1}" for i in range(n)] + [f"x{i + 1}" for i in range(n)] + [f"eta{i + 1}" for i in range(n)]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for t, z, x, eta in zip(record.sample_times, record.z_samples, record.x_samples, record.eta_samples):
            writer.writerow(
                [format(t, ".17g")]
                + [format(v, ".17g") for v in z]
                + [format(v, ".17g") for v in x]
                + [int(v) for v in eta]
            )
    return path


def write_metadata(directory: Path, command: str, seed: int, versions: dict[str, str],
                   artifacts: Iterable[Path]) -> Path:
    return write_json(directory / "metadata.json", {
        "command": command,
        "seed": seed,
        "versions": versions,
        "python": platform.python_version(),
        "created": datetime.now(timezone.utc).isoformat(),
        "artifacts": sorted(p.name for p in artifacts),
    })
