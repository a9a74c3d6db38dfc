from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime
from fractions import Fraction

import pandas as pd

from errors import DomainError

logger = logging.getLogger(__name__)

# --- Constants ---
CONFIG_FILE = "config.json"
SCHEMA = "betakit/1"
PREC_ENV = "BETAKIT_PREC_BITS"
FORMATS = ("json", "csv", "xlsx")


# --- Run configuration ---
@dataclass
class RunConfig:
    prec_bits: int = 128
    depth: int = 12
    depths: list = field(default_factory=lambda: [8, 12, 16, 20])
    window: str = "1.9:2.0"
    rate: str = "alpha:1"
    x0: str = "0"
    target_lipschitz: str | None = None
    format: str = "json"
    jobs: int = 1
    out: str | None = None
    history_file: str | None = None
    cap_bits: int = 4096

    def validate(self) -> "RunConfig":
        """Checks precision >= 64, depth >= 1 and window.lo > 1."""
        if int(self.prec_bits) < 64:
            raise DomainError(f"prec_bits must be >= 64, got {self.prec_bits}")
        if int(self.cap_bits) < int(self.prec_bits):
            raise DomainError("cap_bits must not be below prec_bits")
        if int(self.depth) < 1 or any(int(d) < 1 for d in self.depths):
            raise DomainError("depths must be >= 1")
        if int(self.jobs) < 1:
            raise DomainError("jobs must be >= 1")
        if self.format not in FORMATS:
            raise DomainError(f"format must be one of {', '.join(FORMATS)}")
        try:
            lo = Fraction(str(self.window).split(":")[0].strip())
        except (ValueError, ZeroDivisionError) as e:
            raise DomainError(f"cannot parse window {self.window!r}") from e
        if lo <= 1:
            raise DomainError(f"window must satisfy lo > 1, got {self.window}")
        return self

    def updated(self, **overrides) -> "RunConfig":
        """Copy with every non-None override applied."""
        values = asdict(self)
        values.update({k: v for k, v in overrides.items() if v is not None and k in values})
        return RunConfig(**values).validate()


# --- Config Persistence ---
def load_config(path=CONFIG_FILE) -> RunConfig:
    """Load settings from config.json; missing keys fall back to defaults"""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    if path and os.path.exists(path):
        try:
            with open(path, "r") as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DomainError(f"cannot read config {path}: {e}") from e
        unknown = sorted(set(raw) - known)
        if unknown:
            logger.warning("Ignoring unknown config keys: %s", ", ".join(unknown))
        values = {k: v for k, v in raw.items() if k in known}

    env = os.environ.get(PREC_ENV)
    if env:
        try:
            values["prec_bits"] = int(env)
        except ValueError as e:
            raise DomainError(f"{PREC_ENV} must be an integer, got {env!r}") from e
    return RunConfig(**values).validate()


def save_config(config, path=CONFIG_FILE):
    """Save settings to config.json"""
    data = asdict(config) if isinstance(config, RunConfig) else dict(config)
    with open(path, "w") as f:
        json.dump(data, f, indent=2)


# --- History Persistence ---
def _flat(value):
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, sort_keys=True, default=str)
    if isinstance(value, Fraction):
        return str(value)
    return value


def log_run_history(params, results_summary, path):
    """Append a run to the history CSV, skipping exact duplicates"""
    record = {
        "Timestamp": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
        **{k: _flat(v) for k, v in params.items()},
        **{k: _flat(v) for k, v in results_summary.items()},
    }
    df_new = pd.DataFrame([record])

    if os.path.exists(path):
        try:
            df_hist = pd.read_csv(path)
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            logger.warning("History file %s unreadable (%s); starting over", path, e)
            df_hist = None
    else:
        df_hist = None

    if df_hist is not None:
        # Columns the old history lacks never match.
        for col in df_new.columns:
            if col not in df_hist.columns and col != "Timestamp":
                df_hist[col] = None

        candidates = pd.Series([True] * len(df_hist), index=df_hist.index)
        for col in (c for c in df_new.columns if c != "Timestamp"):
            val = df_new[col].iloc[0]
            hist_col = df_hist[col]
            # Numeric equality so 30 and 30.0 compare equal
            if pd.api.types.is_numeric_dtype(hist_col) and isinstance(val, (int, float)) and not isinstance(val, bool):
                candidates &= hist_col == val
            else:
                candidates &= hist_col.astype(str) == str(val)
            if not candidates.any():
                break

        if candidates.any():
            logger.info("Run already in %s, not logged again", path)
            return False
        df_hist = pd.concat([df_hist, df_new], ignore_index=True)
    else:
        df_hist = df_new

    df_hist.to_csv(path, index=False)
    return True


# --- Report output ---
def _json_default(value):
    if isinstance(value, Fraction):
        return str(value)
    if hasattr(value, "to_json"):
        return value.to_json()
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render_json(report) -> str:
    """Stable JSON text: sorted keys, two-space indent, schema tag on objects."""
    payload = {"schema": SCHEMA, **report} if isinstance(report, dict) else report
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def render_csv(rows, columns=None) -> str:
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=columns)
    if columns is not None and not df.empty:
        df = df[list(columns)]
    return df.to_csv(index=False, lineterminator="\n")


def emit_report(report, fmt="json", path=None, rows=None, columns=None):
    """
    Write a report to a file or stdout.
    Args:
        report (dict | list): JSON payload
        fmt (str): json | csv | xlsx
        path (str | None): output file, stdout when None
        rows (list | pd.DataFrame | None): tabular form for csv/xlsx, defaults to report
        columns (list | None): fixed column order, also the header of an empty table
    """
    if fmt not in FORMATS:
        raise DomainError(f"unknown format {fmt!r}")
    if rows is None:
        rows = [report] if isinstance(report, dict) else report
    table = rows
    if fmt == "xlsx":
        if not path:
            raise DomainError("xlsx output needs --out")
        df = table if isinstance(table, pd.DataFrame) else pd.DataFrame(list(table), columns=columns)
        with pd.ExcelWriter(path, engine="openpyxl") as writer:
            df.to_excel(writer, index=False)
        logger.info("Wrote %d rows to %s", len(df), path)
        return None

    text = render_json(report) if fmt == "json" else render_csv(table, columns)
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
        logger.info("Wrote %s report to %s", fmt, path)
    else:
        sys.stdout.write(text)
    return text
