"""Analysis of measured count-rate tables: weighted regressions of the
transmitted pair rate versus source power, per-row pair absorption rate
R_abs = R_coin(solvent) - R_coin(sample), and the biphoton absorption ratio

    Gamma = 1 - (R_s1*R_s2/R_coin)_sample / (R_s1*R_s2/R_coin)_solvent,

all with first-order (delta-method) uncertainty propagation.  The double
ratio makes Gamma insensitive to any loss applied identically to both
channels of both measurements, so a nonzero Gamma isolates pair-selective
(two-photon) absorption from plain attenuation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import AlignmentError, SolverError, TableParseError

_MODES = ("pump", "spdc")
_CSV_HEADER = ["P_SPDC_pW", "R_s1", "R_s1_err", "R_s2", "R_s2_err",
               "R_coin", "R_coin_err", "mode", "label"]

# Rows whose singles carry more than this relative error are flagged in
# reports (never auto-dropped).
SINGLES_RELATIVE_ERROR_FLAG = 0.05


@dataclass(frozen=True)
class RateRow:
    """One power setting of a transmission measurement."""

    p_spdc_pW: float
    r_s1: float
    r_s1_err: float
    r_s2: float
    r_s2_err: float
    r_coin: float
    r_coin_err: float
    mode: str
    label: str

    def __post_init__(self):
        if self.p_spdc_pW < 0:
            raise TableParseError(f"P_SPDC must be nonnegative, got {self.p_spdc_pW}")
        for name in ("r_s1_err", "r_s2_err", "r_coin_err"):
            if getattr(self, name) < 0:
                raise TableParseError(f"{name} must be nonnegative")
        if self.mode not in _MODES:
            raise TableParseError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if not self.label:
            raise TableParseError("label must be nonempty")

    def flagged(self) -> bool:
        """True if either singles rate has relative error above the flag
        threshold (undefined relative error counts as flagged)."""
        for rate, err in ((self.r_s1, self.r_s1_err), (self.r_s2, self.r_s2_err)):
            if rate <= 0 or err / rate > SINGLES_RELATIVE_ERROR_FLAG:
                return True
        return False


@dataclass(frozen=True)
class RateTable:
    rows: tuple

    def __post_init__(self):
        if not self.rows:
            raise TableParseError("rate table has no rows")

    def __len__(self):
        return len(self.rows)

    def by_mode(self, mode: str) -> "RateTable":
        rows = tuple(r for r in self.rows if r.mode == mode)
        if not rows:
            raise TableParseError(f"no rows with mode {mode!r}")
        return RateTable(rows)

    def modes(self):
        return tuple(sorted({r.mode for r in self.rows}))

    def flagged_rows(self):
        """(P_SPDC, mode, label) of rows exceeding the singles-error flag."""
        return [(r.p_spdc_pW, r.mode, r.label) for r in self.rows if r.flagged()]


def ingest_rate_table(path) -> RateTable:
    """Read a rate-table CSV; schema violations are reported with the first
    offending line number."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableParseError(f"empty rate table file: {path}") from None
        if [h.strip() for h in header] != _CSV_HEADER:
            raise TableParseError(
                f"bad header, expected {','.join(_CSV_HEADER)}", line_number=1
            )
        for lineno, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(_CSV_HEADER):
                raise TableParseError(
                    f"expected {len(_CSV_HEADER)} fields, got {len(record)}",
                    line_number=lineno,
                )
            try:
                values = [float(v) for v in record[:7]]
            except ValueError as exc:
                raise TableParseError(f"malformed number: {exc}",
                                      line_number=lineno) from exc
            if any(v < 0 for v in values[1:7:2]) or any(v < 0 for v in values):
                raise TableParseError("negative rate or uncertainty",
                                      line_number=lineno)
            try:
                rows.append(RateRow(*values, record[7].strip(), record[8].strip()))
            except TableParseError as exc:
                raise TableParseError(str(exc), line_number=lineno) from exc
    if not rows:
        raise TableParseError(f"rate table has a header but no rows: {path}")
    return RateTable(tuple(rows))


def write_rate_table(table: RateTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_HEADER)
        for r in table.rows:
            writer.writerow([r.p_spdc_pW, r.r_s1, r.r_s1_err, r.r_s2, r.r_s2_err,
                             r.r_coin, r.r_coin_err, r.mode, r.label])


# ---------------------------------------------------------------------------
# regression

@dataclass(frozen=True)
class FitResult:
    """Weighted polynomial fit of R_coin versus P_SPDC."""

    model: str                 # "linear" | "quadratic"
    coefficients: tuple        # ascending order: intercept first
    standard_errors: tuple
    reduced_chi2: float
    residuals: tuple
    n_points: int

    def __post_init__(self):
        expected = {"linear": 2, "quadratic": 3}[self.model]
        if len(self.coefficients) != expected:
            raise SolverError(
                f"{self.model} fit needs {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )
        if self.reduced_chi2 < 0:
            raise SolverError("reduced chi-squared cannot be negative")

    def predict(self, p):
        p = np.asarray(p, dtype=float)
        return sum(c * p ** k for k, c in enumerate(self.coefficients))


def fit_rate_curve(table: RateTable, model: str) -> FitResult:
    """Weighted least squares of R_coin against P_SPDC with a free
    intercept.  Zero-uncertainty rows make the fit unweighted; mixed zero
    and nonzero uncertainties are rejected as inconsistent weighting.
    """
    if model not in ("linear", "quadratic"):
        raise SolverError(f"unknown fit model {model!r}")
    degree = 1 if model == "linear" else 2
    n_par = degree + 1
    if len(table) < n_par + 1:
        raise SolverError(
            f"{model} fit needs at least {n_par + 1} rows, got {len(table)}"
        )
    p = np.array([r.p_spdc_pW for r in table.rows])
    y = np.array([r.r_coin for r in table.rows])
    err = np.array([r.r_coin_err for r in table.rows])
    if np.all(err == 0):
        weights = np.ones_like(err)
    elif np.any(err == 0):
        raise SolverError("mixed zero and nonzero uncertainties; "
                          "cannot form consistent weights")
    else:
        weights = 1.0 / err ** 2

    design = np.vander(p, n_par, increasing=True)
    wx = design * weights[:, None]
    normal = design.T @ wx
    if np.linalg.matrix_rank(normal) < n_par:
        raise SolverError(
            f"rank-deficient design for {model} fit: the {len(table)} rows "
            f"span fewer than {n_par} independent power values"
        )
    cov = np.linalg.inv(normal)
    coef = cov @ (design.T @ (weights * y))
    residuals = y - design @ coef
    chi2 = float(np.sum(weights * residuals ** 2))
    dof = len(table) - n_par
    return FitResult(
        model=model,
        coefficients=tuple(float(c) for c in coef),
        standard_errors=tuple(float(s) for s in np.sqrt(np.diag(cov))),
        reduced_chi2=chi2 / dof,
        residuals=tuple(float(r) for r in residuals),
        n_points=len(table),
    )


# ---------------------------------------------------------------------------
# row-aligned comparisons

def _align(solv: RateTable, samp: RateTable):
    """Pair rows by (P_SPDC, attenuation_mode), preserving solvent order."""
    key = lambda r: (r.p_spdc_pW, r.mode)
    samp_index = {}
    for r in samp.rows:
        samp_index.setdefault(key(r), []).append(r)
    pairs = []
    unmatched = []
    for r in solv.rows:
        bucket = samp_index.get(key(r))
        if bucket:
            pairs.append((r, bucket.pop(0)))
        else:
            unmatched.append(("solvent", r.p_spdc_pW, r.mode))
    for bucket in samp_index.values():
        unmatched.extend(("sample", r.p_spdc_pW, r.mode) for r in bucket)
    if unmatched:
        raise AlignmentError(
            f"tables are not row-aligned by (P_SPDC, mode); unmatched rows: "
            f"{unmatched}", unmatched=unmatched
        )
    return pairs


@dataclass(frozen=True)
class AbsorptionPoint:
    p_spdc_pW: float
    mode: str
    r_abs: float
    r_abs_err: float


def absorption_rate(solv: RateTable, samp: RateTable):
    """Per-row transmitted-pair absorption rate, solvent minus sample, with
    quadrature-combined uncertainty."""
    return [
        AbsorptionPoint(
            p_spdc_pW=a.p_spdc_pW,
            mode=a.mode,
            r_abs=a.r_coin - b.r_coin,
            r_abs_err=math.hypot(a.r_coin_err, b.r_coin_err),
        )
        for a, b in _align(solv, samp)
    ]


@dataclass(frozen=True)
class GammaPoint:
    p_spdc_pW: float
    mode: str
    gamma: float
    gamma_err: float


def biphoton_ratio(solv: RateTable, samp: RateTable):
    """Per-row biphoton absorption ratio Gamma with first-order error
    propagation.  Rows where any rate in either table is nonpositive are
    skipped (not errored) and reported with a reason.

    Returns (points, skipped) where skipped is a list of
    (P_SPDC, mode, reason) tuples.
    """
    points = []
    skipped = []
    for a, b in _align(solv, samp):
        rates = (a.r_s1, a.r_s2, a.r_coin, b.r_s1, b.r_s2, b.r_coin)
        if any(v <= 0 for v in rates):
            skipped.append((a.p_spdc_pW, a.mode,
                            "nonpositive rate in solvent or sample row"))
            continue
        ratio = (b.r_s1 * b.r_s2 / b.r_coin) / (a.r_s1 * a.r_s2 / a.r_coin)
        rel_sq = sum(
            (err / rate) ** 2
            for rate, err in (
                (a.r_s1, a.r_s1_err), (a.r_s2, a.r_s2_err), (a.r_coin, a.r_coin_err),
                (b.r_s1, b.r_s1_err), (b.r_s2, b.r_s2_err), (b.r_coin, b.r_coin_err),
            )
        )
        points.append(GammaPoint(
            p_spdc_pW=a.p_spdc_pW,
            mode=a.mode,
            gamma=1.0 - ratio,
            gamma_err=ratio * math.sqrt(rel_sq),
        ))
    return points, skipped


# ---------------------------------------------------------------------------
# reports

def analysis_report(solv: RateTable, samp: RateTable) -> dict:
    """Full comparison of a solvent-reference and a sample table: per-mode
    linear and quadratic fits of both tables, R_abs and Gamma series, skip
    reasons and flagged rows."""
    fits = {}
    for name, table in (("solvent", solv), ("sample", samp)):
        for mode in table.modes():
            sub = table.by_mode(mode)
            for model in ("linear", "quadratic"):
                try:
                    fit = fit_rate_curve(sub, model)
                except SolverError as exc:
                    fits[f"{name}.{mode}.{model}"] = {"error": str(exc)}
                    continue
                entry = asdict(fit)
                entry.pop("residuals")
                fits[f"{name}.{mode}.{model}"] = entry
    r_abs = absorption_rate(solv, samp)
    gammas, skipped = biphoton_ratio(solv, samp)
    return {
        "fits": fits,
        "r_abs": [asdict(p) for p in r_abs],
        "gamma": [asdict(p) for p in gammas],
        "skipped": [{"p_spdc_pW": p, "mode": m, "reason": why}
                    for p, m, why in skipped],
        "flagged_rows": [
            {"table": name, "p_spdc_pW": p, "mode": m, "label": lab}
            for name, table in (("solvent", solv), ("sample", samp))
            for p, m, lab in table.flagged_rows()
        ],
    }


def write_report_json(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_plot_data_csv(report: dict, path) -> None:
    """Flat plot-ready series: one row per (quantity, mode, power)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["quantity", "mode", "P_SPDC_pW", "value", "error"])
        for p in report["r_abs"]:
            writer.writerow(["R_abs", p["mode"], p["p_spdc_pW"],
                             p["r_abs"], p["r_abs_err"]])
        for p in report["gamma"]:
            writer.writerow(["Gamma", p["mode"], p["p_spdc_pW"],
                             p["gamma"], p["gamma_err"]])
