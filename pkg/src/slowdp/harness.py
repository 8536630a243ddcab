"""End-to-end experiment engine: CSV ingestion, group-by sums, parameter
calibration, privacy-loss CDFs, error summaries, and noise-scale curves.

The pipeline privatizes each group's sum with an independent, reproducible
random stream keyed by a stable hash of the group keys, so results are
byte-identical across runs and independent of input row order.  Additive
heavy-tailed mechanisms are accounted in tanh-tightened PRzCDP units by
default; each report records which convention produced its losses.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import ExpPolylogNoise, RngStream, noise_variance
from .errors import CalibrationError, DataError, MomentError, ParameterError
from .mechanisms import (
    AdditiveMechanism,
    MechanismSpec,
    TransformationMechanism,
    UnitSplitGaussian,
    mechanism_from_json,
    privatize,
)
from .policy import PolicyFlavor, policy_for_mechanism
from .transform import mechanism_variance

__all__ = [
    "Dataset",
    "ExperimentConfig",
    "GroupResult",
    "QuintileSummary",
    "ExperimentReport",
    "load_csv",
    "write_dataset_csv",
    "groupby_sum",
    "are",
    "privacy_loss_cdf",
    "mechanism_sd",
    "sd_curve",
    "calibrate",
    "run_experiment",
    "write_report_csvs",
    "synth_dataset",
    "REPORT_FILES",
]

DEFAULT_CDF_THRESHOLDS = tuple(np.geomspace(1e-3, 1e7, 400))
REPORT_FILES = ("groups.csv", "record_losses.csv", "loss_cdf.csv",
                "are_quintiles.csv", "sd_curve.csv")


@dataclass(frozen=True)
class Dataset:
    """A multiset of records: group-key strings plus one nonnegative value."""

    group_columns: tuple
    value_column: str
    records: tuple  # of (keys_tuple, value)

    def __post_init__(self):
        arity = len(self.group_columns)
        for keys, value in self.records:
            if len(keys) != arity:
                raise DataError(f"group-key arity mismatch: {keys!r}")
            if not value >= 0.0:
                raise DataError(f"negative record value: {value!r}")

    def values(self) -> np.ndarray:
        return np.asarray([v for _, v in self.records], dtype=float)


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: MechanismSpec
    group_columns: tuple
    value_column: str
    seed: int
    thresholds: tuple = DEFAULT_CDF_THRESHOLDS
    clamp_output: bool = False
    sd_grid: tuple | None = None

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        if t.size < 1 or np.any(np.diff(t) <= 0.0):
            raise ParameterError("thresholds must be strictly increasing")

    @staticmethod
    def from_json(obj) -> "ExperimentConfig":
        import json
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            return ExperimentConfig(
                mechanism=mechanism_from_json(obj["mechanism"]),
                group_columns=tuple(obj["group_columns"]),
                value_column=str(obj["value_column"]),
                seed=int(obj["seed"]),
                thresholds=tuple(obj.get("thresholds", DEFAULT_CDF_THRESHOLDS)),
                clamp_output=bool(obj.get("clamp_output", False)),
                sd_grid=tuple(obj["sd_grid"]) if obj.get("sd_grid") else None,
            )
        except KeyError as exc:
            raise ParameterError(f"experiment config missing field {exc}") from exc


@dataclass(frozen=True)
class GroupResult:
    keys: tuple
    true_sum: float
    noisy_sum: float
    are: float | None


@dataclass(frozen=True)
class QuintileSummary:
    quintile: int
    n_groups: int
    n_excluded: int  # groups with true_sum = 0, where ARE is undefined
    are_p25: float | None
    are_p50: float | None
    are_p75: float | None


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    loss_convention: str
    groups: tuple
    record_values: np.ndarray
    record_losses: np.ndarray
    loss_cdf: tuple
    are_by_quintile: tuple
    sd_points: tuple


# --- ingestion ----------------------------------------------------------------

def load_csv(path, group_columns, value_column) -> Dataset:
    """Parse a delimited file into a Dataset.

    Rows with a missing, non-numeric, or negative value are rejected with
    their 1-based line number (the header is line 1).
    """
    group_columns = tuple(group_columns)
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    records = []
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in (*group_columns, value_column) if c not in header]
        if missing:
            raise DataError(f"{path}: header is missing column(s) {missing}")
        for line, row in enumerate(reader, start=2):
            raw = row.get(value_column)
            try:
                value = float(raw)
            except (TypeError, ValueError):
                raise DataError(
                    f"{path}: row {line}: non-numeric value {raw!r} in "
                    f"column {value_column!r}") from None
            if math.isnan(value) or math.isinf(value):
                raise DataError(f"{path}: row {line}: non-finite value {raw!r}")
            if value < 0.0:
                raise DataError(f"{path}: row {line}: negative value {value}")
            records.append((tuple(row[c] for c in group_columns), value))
    return Dataset(group_columns=group_columns, value_column=value_column,
                   records=tuple(records))


def write_dataset_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([*ds.group_columns, ds.value_column])
        for keys, value in ds.records:
            writer.writerow([*keys, _fmt(value)])


# --- aggregation ----------------------------------------------------------------

def groupby_sum(ds: Dataset):
    """Exact per-group sums, one row per distinct key tuple, in lexicographic
    key order.  Sums use compensated summation, so they are independent of
    the input row order."""
    buckets: dict = {}
    for keys, value in ds.records:
        buckets.setdefault(keys, []).append(value)
    return [(keys, math.fsum(buckets[keys])) for keys in sorted(buckets)]


def are(noisy: float, truth: float):
    """Absolute relative error |noisy - truth| / |truth|; None when the truth
    is zero (excluded from summaries, with exclusions counted)."""
    if truth == 0.0:
        return None
    return abs(noisy - truth) / abs(truth)


def privacy_loss_cdf(losses, thresholds):
    """Empirical CDF of the losses at each threshold: the fraction of losses
    less than or equal to t."""
    losses = np.sort(np.asarray(losses, dtype=float))
    t = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(t) <= 0.0):
        raise ParameterError("thresholds must be strictly increasing")
    if losses.size == 0:
        return [(float(x), 0.0) for x in t]
    counts = np.searchsorted(losses, t, side="right")
    return [(float(x), float(c) / losses.size) for x, c in zip(t, counts)]


# --- noise scale ----------------------------------------------------------------

def mechanism_sd(mech: MechanismSpec, q: float) -> float:
    """Output standard deviation of a mechanism at true query value q.

    Transformation variances are the mean-unbiased closed forms and grow
    with q; additive and unit-split noise scales are constant in q.
    """
    if isinstance(mech, TransformationMechanism):
        return math.sqrt(mechanism_variance(mech.transform, mech.sigma, q))
    if isinstance(mech, AdditiveMechanism):
        return math.sqrt(noise_variance(mech.noise))
    if isinstance(mech, UnitSplitGaussian):
        return mech.sigma
    raise ParameterError(f"not a mechanism spec: {mech!r}")


def sd_curve(mech: MechanismSpec, q_grid):
    """(q, sd) pairs along a grid of true query values."""
    return [(float(q), mechanism_sd(mech, float(q))) for q in q_grid]


# --- calibration ----------------------------------------------------------------

def _with_free_parameter(mech: MechanismSpec, value: float) -> MechanismSpec:
    """Rebuild the mechanism with its free parameter set: d for the
    exponential polylog additive mechanism, sigma for everything else."""
    if isinstance(mech, AdditiveMechanism):
        if isinstance(mech.noise, ExpPolylogNoise):
            return AdditiveMechanism(dataclasses.replace(mech.noise, d=value))
        return AdditiveMechanism(dataclasses.replace(mech.noise, sigma=value))
    return dataclasses.replace(mech, sigma=value)


def _free_parameter_domain(mech: MechanismSpec):
    """(lower bound, decreasing?) for the free parameter."""
    if isinstance(mech, AdditiveMechanism) and isinstance(mech.noise, ExpPolylogNoise):
        # sd decreases in d; the p=1 family needs d > 3 for a finite variance
        low = 3.0 if mech.noise.p == 1.0 else 0.0
        return low, True
    return 0.0, False


def calibrate(mech: MechanismSpec, target_sd: float, reference_q: float = 0.0,
              rel_tol: float = 1e-9) -> MechanismSpec:
    """Solve for the mechanism parameter that hits a target output standard
    deviation.

    Transformation mechanisms are calibrated at the supplied reference query
    value (the published experiments use the attribute's median); additive
    mechanisms ignore it.  The free parameter is sigma everywhere except the
    exponential polylog mechanism, where the tail index d is solved instead.
    Bisection with automatic bracket expansion.
    """
    if not target_sd > 0.0:
        raise ParameterError(f"target_sd must be positive, got {target_sd}")
    if reference_q < 0.0:
        raise ParameterError(f"reference_q must be >= 0, got {reference_q}")

    low_limit, decreasing = _free_parameter_domain(mech)

    def sd_at(param: float) -> float:
        try:
            return mechanism_sd(_with_free_parameter(mech, param), reference_q)
        except MomentError:
            return math.inf

    def residual(param: float) -> float:
        gap = sd_at(param) - target_sd
        return -gap if decreasing else gap

    # expand a bracket [lo, hi] (offsets above low_limit) until the residual
    # changes sign
    lo, hi = low_limit + 1e-12, low_limit + 1.0
    for _ in range(200):
        if residual(hi) >= 0.0:
            break
        lo, hi = hi, low_limit + (hi - low_limit) * 8.0
    else:
        raise CalibrationError(f"could not bracket target sd {target_sd}")
    for _ in range(200):
        if residual(lo) <= 0.0:
            break
        hi, lo = lo, low_limit + (lo - low_limit) / 8.0
    else:
        raise CalibrationError(f"could not bracket target sd {target_sd}")

    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        sd_mid = sd_at(mid)
        if math.isfinite(sd_mid) and abs(sd_mid - target_sd) <= rel_tol * target_sd:
            return _with_free_parameter(mech, mid)
        if hi - lo <= 1e-16 * max(abs(hi), 1.0):
            break
    mid = 0.5 * (lo + hi)
    if abs(sd_at(mid) - target_sd) <= rel_tol * target_sd:
        return _with_free_parameter(mech, mid)
    raise CalibrationError(
        f"bisection stalled: sd {sd_at(mid)} vs target {target_sd}")


# --- the experiment pipeline ----------------------------------------------------

def _group_stream_id(keys) -> int:
    """Stable 64-bit stream id from the group keys (order-independent runs)."""
    digest = hashlib.blake2b("\x1f".join(keys).encode("utf-8"),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _quintile_partition(n: int):
    """Sizes of 5 ordered parts differing by at most one, largest first."""
    base, extra = divmod(n, 5)
    return [base + (1 if i < extra else 0) for i in range(5)]


def run_experiment(ds: Dataset, cfg: ExperimentConfig, *,
                   zero_noise: bool = False) -> ExperimentReport:
    """Privatize every group sum, account every record's privacy loss, and
    assemble the report.

    ``zero_noise`` is a deterministic test hook that feeds the median
    uniform draw (no noise) to every group.
    """
    if tuple(cfg.group_columns) != tuple(ds.group_columns) \
            or cfg.value_column != ds.value_column:
        raise ParameterError(
            f"config columns {cfg.group_columns}/{cfg.value_column} do not match "
            f"dataset columns {ds.group_columns}/{ds.value_column}")

    mech = cfg.mechanism
    sums = groupby_sum(ds)

    groups = []
    for keys, true_sum in sums:
        rng = RngStream(seed=cfg.seed, stream_id=_group_stream_id(keys))
        noisy = privatize(mech, true_sum, rng, u=0.5 if zero_noise else None)
        if cfg.clamp_output:
            noisy = max(noisy, 0.0)
        groups.append(GroupResult(keys=keys, true_sum=true_sum, noisy_sum=noisy,
                                  are=are(noisy, true_sum)))

    # per-record accounting, in canonical (sorted-by-value) order
    policy = policy_for_mechanism(mech)
    values = np.sort(ds.values())
    losses = policy.przcdp_loss(values) if values.size else np.empty(0)
    losses = np.asarray(losses, dtype=float)
    convention = ("tanh-tightened PRzCDP from the PRDP policy"
                  if policy.flavor is PolicyFlavor.PRDP else "native PRzCDP")

    cdf_points = privacy_loss_cdf(losses, cfg.thresholds)

    # quintiles of groups ordered by true sum (ties broken by group keys)
    ordered = sorted(groups, key=lambda g: (g.true_sum, g.keys))
    summaries = []
    start = 0
    for i, size in enumerate(_quintile_partition(len(ordered)), start=1):
        part = ordered[start:start + size]
        start += size
        defined = [g.are for g in part if g.are is not None]
        if defined:
            p25, p50, p75 = (float(np.percentile(defined, p)) for p in (25, 50, 75))
        else:
            p25 = p50 = p75 = None
        summaries.append(QuintileSummary(
            quintile=i, n_groups=len(part), n_excluded=len(part) - len(defined),
            are_p25=p25, are_p50=p50, are_p75=p75))

    if cfg.sd_grid is not None:
        grid = np.asarray(cfg.sd_grid, dtype=float)
    else:
        top = max((g.true_sum for g in groups), default=1.0)
        grid = np.geomspace(1.0, max(top, 10.0), 101)
    try:
        sd_points = tuple(sd_curve(mech, grid))
    except MomentError:
        sd_points = ()

    return ExperimentReport(
        config=cfg,
        loss_convention=convention,
        groups=tuple(groups),
        record_values=values,
        record_losses=losses,
        loss_cdf=tuple(cdf_points),
        are_by_quintile=tuple(summaries),
        sd_points=sd_points,
    )


# --- report serialization --------------------------------------------------------

def _fmt(x) -> str:
    """Canonical text form: shortest round-trip decimal for floats."""
    if x is None:
        return ""
    return repr(float(x))


def write_report_csvs(report: ExperimentReport, outdir) -> dict:
    """Write the five report files; returns {name: path}.

    Output is deterministic byte-for-byte for a fixed config and dataset
    multiset, regardless of input row order.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    paths = {}

    def _open(name):
        path = outdir / name
        paths[name] = path
        return path.open("w", newline="")

    with _open("groups.csv") as handle:
        writer = csv.writer(handle)
        writer.writerow([*cfg.group_columns, "true_sum", "noisy_sum", "are"])
        for g in report.groups:
            writer.writerow([*g.keys, _fmt(g.true_sum), _fmt(g.noisy_sum),
                             _fmt(g.are)])

    with _open("record_losses.csv") as handle:
        writer = csv.writer(handle)
        writer.writerow(["value", "przcdp_loss"])
        for value, loss in zip(report.record_values, report.record_losses):
            writer.writerow([_fmt(value), _fmt(loss)])

    with _open("loss_cdf.csv") as handle:
        writer = csv.writer(handle)
        writer.writerow(["threshold", "fraction_at_most"])
        for threshold, fraction in report.loss_cdf:
            writer.writerow([_fmt(threshold), _fmt(fraction)])

    with _open("are_quintiles.csv") as handle:
        writer = csv.writer(handle)
        writer.writerow(["quintile", "n_groups", "n_excluded",
                         "are_p25", "are_p50", "are_p75"])
        for s in report.are_by_quintile:
            writer.writerow([s.quintile, s.n_groups, s.n_excluded,
                             _fmt(s.are_p25), _fmt(s.are_p50), _fmt(s.are_p75)])

    with _open("sd_curve.csv") as handle:
        writer = csv.writer(handle)
        writer.writerow(["q", "sd"])
        for q, sd in report.sd_points:
            writer.writerow([_fmt(q), _fmt(sd)])

    return paths


# --- synthetic data ---------------------------------------------------------------

def synth_dataset(n_records: int, n_groups: int, seed: int, *,
                  value_median: float = 100.0, log_sigma: float = 1.5,
                  outlier_frac: float = 0.003,
                  outlier_scale: float = 1000.0) -> Dataset:
    """Generate a synthetic establishment-style dataset (NOT confidential
    data): lognormal values around the requested median with a small share
    of multiplicative outliers, spread over industry x county groups."""
    if n_records < 0 or n_groups < 1:
        raise ParameterError("need n_records >= 0 and n_groups >= 1")
    gen = np.random.default_rng(np.random.SeedSequence([seed & (2 ** 64 - 1), 0x5D]))
    n_industry = max(1, int(math.isqrt(n_groups)))
    n_county = (n_groups + n_industry - 1) // n_industry
    group_idx = gen.integers(0, n_industry * n_county, size=n_records)
    values = np.exp(math.log(value_median) + log_sigma * gen.standard_normal(n_records))
    boost = gen.random(n_records) < outlier_frac
    values = np.where(boost, values * outlier_scale, values)
    records = tuple(
        ((f"I{idx // n_county:03d}", f"C{idx % n_county:03d}"), float(round(v, 3)))
        for idx, v in zip(group_idx, values)
    )
    return Dataset(group_columns=("industry", "county"), value_column="value",
                   records=records)
