"""Reading price series and turning them into model-ready observations."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError, EvaluationError

log = logging.getLogger(__name__)


@dataclass
class RawSeries:
    values: np.ndarray
    timestamps: list | None = None
    provenance: str = ""

    def __len__(self):
        return self.values.shape[0]


class DataFormatError(ConfigError):
    pass


def ingest_csv(path) -> RawSeries:
    """One value per row, optionally ``timestamp,value``; a non-numeric first row is a header.

    Rows are numbered from 1 as they appear in the file.
    """
    values, stamps = [], []
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise DataFormatError(f"data file not found: {path}") from None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            cell = cells[-1]
            try:
                v = float(cell)
            except ValueError:
                if lineno == 1:
                    continue
                raise DataFormatError(f"{path}: row {lineno}: cannot parse {cell!r} as a number") from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}: row {lineno}: non-finite value {cell!r}")
            values.append(v)
            stamps.append(cells[0] if len(cells) > 1 else None)
    if not values:
        raise DataFormatError(f"{path}: no data rows")
    has_stamps = any(s is not None for s in stamps)
    return RawSeries(np.array(values), stamps if has_stamps else None, f"csv:{path}")


def preprocess_log_returns(prices) -> np.ndarray:
    """r_t = 100 log(o_{t+1} / o_t)."""
    o = np.asarray(getattr(prices, "values", prices), dtype=float)
    if o.size < 2:
        raise ConfigError("need at least two prices to form a return")
    if np.any(o <= 0):
        i = int(np.argmax(o <= 0))
        raise DomainError(f"nonpositive price {o[i]!r} at index {i}")
    return 100.0 * np.diff(np.log(o))


def ar1_residuals(r, return_coefficients=False):
    """OLS fit of r_t = c + rho r_{t-1} + e_t; returns the m - 1 residuals."""
    r = np.asarray(r, dtype=float)
    if r.size < 3:
        raise ConfigError("AR(1) fit needs at least three observations")
    lag, cur = r[:-1], r[1:]
    X = np.column_stack([np.ones_like(lag), lag])
    if np.ptp(lag) == 0.0:
        raise EvaluationError("degenerate AR(1) regressor: lagged series is constant")
    coef, *_ = np.linalg.lstsq(X, cur, rcond=None)
    resid = cur - X @ coef
    log.info("AR(1) fit: c=%.6g rho=%.6g", coef[0], coef[1])
    if return_coefficients:
        return resid, (float(coef[0]), float(coef[1]))
    return resid
