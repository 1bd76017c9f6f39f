"""Run outputs: the NDJSON diagnostics stream, CSV decay series and PNG figures."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import numpy as np


class Missing(NamedTuple):
    """A value that could not be computed; serialized as null plus ``<key>_reason``."""

    reason: str


def _clean(key: str, value: Any, out: dict) -> None:
    if isinstance(value, Missing):
        out[key] = None
        out[f"{key}_reason"] = value.reason
        return
    value = _plain(value)
    if isinstance(value, float) and not math.isfinite(value):
        out[key] = None
        out[f"{key}_reason"] = f"non-finite value ({value})"
        return
    if value is None:
        out[key] = None
        out.setdefault(f"{key}_reason", "not computed")
        return
    out[key] = value


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        out: dict = {}
        for k, v in value.items():
            _clean(str(k), v, out)
        return out
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


def to_record(fields: dict) -> dict:
    """Plain JSON-ready dict in which every null carries a reason."""
    return _plain(fields)


class NdjsonWriter:
    """Append-only NDJSON stream; every line carries the record kind and config hash.

    Keys are sorted and NaN is refused, so equal inputs give equal bytes.
    """

    def __init__(self, path: str | Path, config_hash: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash
        self._fh = self.path.open("w", encoding="utf-8", newline="\n")

    def write(self, kind: str, **fields: Any) -> dict:
        rec = to_record({**fields, "kind": kind, "config_hash": self.config_hash})
        self._fh.write(json.dumps(rec, sort_keys=True, allow_nan=False, separators=(",", ":")) + "\n")
        self._fh.flush()
        return rec

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "NdjsonWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_ndjson(path: str | Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_series_csv(path: str | Path, times: Sequence[float], values: Sequence[float]) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(times, values):
            w.writerow([repr(float(t)), repr(float(v))])
    return path


def read_series_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


# ------------------------------------------------------------------ figures


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_decay(path: str | Path, series: dict[str, tuple[Sequence[float], Sequence[float]]],
               fits: dict[str, Any] | None = None, title: str = "") -> Path:
    """Log-log plot of each series; fitted power laws drawn dashed over their windows."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    fits = fits or {}
    for name, (t, y) in series.items():
        t, y = np.asarray(t, float), np.asarray(y, float)
        keep = (t > 0) & (y > 0)
        (line,) = ax.loglog(t[keep], y[keep], label=name)
        fit = fits.get(name)
        if fit is not None:
            tt = np.linspace(*fit.window, 50)
            ax.loglog(tt, np.exp(fit.intercept) * tt**fit.slope, "--", color=line.get_color(),
                      label=f"{name} slope {fit.slope:.3f}")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_lines(path: str | Path, series: dict[str, tuple[Sequence[float], Sequence[float]]],
               xlabel: str, ylabel: str, title: str = "", logy: bool = False, logx: bool = False) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for name, (x, y) in series.items():
        ax.plot(x, y, marker="o", ms=3, label=name)
    if logy:
        ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)
