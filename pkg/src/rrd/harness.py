"""Configuration-driven Monte Carlo experiments.

One experiment simulates ``replicates`` independent paths, evaluates every
configured estimator on each path (all estimators see the same trajectory),
and aggregates squared-error statistics against the true jump density.
Replicates are seeded independently of execution order, so reports are
byte-identical under any parallelism level.
"""

from __future__ import annotations

import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .decompound import (
    InsufficientDataError,
    build_correction,
    convolution_power_estimator,
    correction_coeffs,
    estimate_theta,
    oracle_estimator,
)
from .model import DEFAULT_THETA_BOX, JumpMixture, RenewalModel
from .simulate import discretize, replicate_seed, sample_path
from .wavelet import DensityEstimate, WaveletConfig


class ConfigError(ValueError):
    """A configuration file or value is unusable."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: RenewalModel
    mixture: JumpMixture
    horizon: float
    delta: float
    k_orders: tuple
    replicates: int
    wavelet: WaveletConfig = WaveletConfig()
    base_seed: int = 0
    include_oracle: bool = True
    output_dir: str = "out"
    workers: int = 1
    theta_box: tuple = DEFAULT_THETA_BOX
    p_table_orders: int = 3

    def __post_init__(self):
        if not self.delta < self.horizon:
            raise ConfigError("delta must be smaller than the horizon")
        if self.horizon <= 1:
            raise ConfigError("horizon must exceed 1")
        if len(self.k_orders) == 0:
            raise ConfigError("k_orders must be nonempty")
        if any(k < 0 for k in self.k_orders):
            raise ConfigError("correction orders must be nonnegative")
        if len(set(self.k_orders)) != len(self.k_orders):
            raise ConfigError("correction orders must be distinct")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def estimator_names(self) -> tuple:
        names = (["oracle"] if self.include_oracle else []) + ["naive"]
        names += [f"corrected_k{k}" for k in self.k_orders]
        return tuple(names)


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated results; per-replicate errors are kept so the summary can
    always be recomputed (failures are stored as NaN).
    """

    config: ExperimentConfig
    errors: dict
    p_estimates: np.ndarray
    representative: dict
    wall_clock: float

    def per_replicate(self, name: str) -> np.ndarray:
        return np.asarray(self.errors[name])

    def n_ok(self, name: str) -> int:
        return int(np.sum(~np.isnan(self.per_replicate(name))))

    def n_failed(self, name: str) -> int:
        return len(self.errors[name]) - self.n_ok(name)

    def mean_error(self, name: str) -> float:
        vals = self.per_replicate(name)
        vals = vals[~np.isnan(vals)]
        return float(np.mean(vals)) if len(vals) else float("nan")

    def std_error(self, name: str) -> float:
        vals = self.per_replicate(name)
        vals = vals[~np.isnan(vals)]
        return float(np.std(vals)) if len(vals) else float("nan")

    def p_table(self):
        """Mean and std over replicates of the estimated count probabilities."""
        ok = ~np.isnan(self.p_estimates[:, 0])
        rows = self.p_estimates[ok]
        if len(rows) == 0:
            n = self.p_estimates.shape[1]
            return np.full(n, np.nan), np.full(n, np.nan)
        return rows.mean(axis=0), rows.std(axis=0)


def l2_error(est: DensityEstimate, truth: JumpMixture, expected_grid=(-10.0, 10.0, 0.01)):
    """Riemann-sum squared error sum((est - truth)(x_p))^2 * mesh over the
    evaluation grid.  ``expected_grid`` guards against comparing estimates
    produced on a different grid; pass None to accept the estimate's own.
    """
    if expected_grid is not None:
        lo, hi, mesh = expected_grid
        if (
            abs(est.grid_lo - lo) > 1e-12
            or abs(est.grid_hi - hi) > 1e-12
            or abs(est.mesh - mesh) > 1e-12
        ):
            raise ValueError(
                f"estimate grid ({est.grid_lo}, {est.grid_hi}, {est.mesh}) "
                f"does not match expected {expected_grid}"
            )
    diff = est.values - truth.pdf(est.grid())
    return float(np.sum(diff * diff) * est.mesh)


def _run_replicate(args):
    """One replicate: simulate, estimate everything, score.  Returns
    (index, errors-by-name, p-hat row, estimates-by-name or None).
    Failures of individual estimators are recorded as NaN, never raised.
    """
    cfg, index, keep_estimates = args
    seed = replicate_seed(cfg.base_seed, index)
    path = sample_path(cfg.model, cfg.mixture, cfg.horizon, seed)
    series = discretize(path, cfg.delta)
    grid = (cfg.wavelet.domain[0], cfg.wavelet.domain[1], cfg.wavelet.eval_mesh)

    estimates = {}
    errors = {}

    def record(name, make):
        try:
            est = make()
        except InsufficientDataError:
            errors[name] = float("nan")
            return
        if est.degenerate:
            errors[name] = float("nan")
            return
        estimates[name] = est
        errors[name] = l2_error(est, cfg.mixture, grid)

    if cfg.include_oracle:
        record("oracle", lambda: oracle_estimator(path, cfg.wavelet, cfg.horizon))

    # The naive estimate doubles as the order-0 correction and as the m=1
    # convolution power, so compute the shared pieces once per replicate.
    max_k = max(cfg.k_orders) if cfg.k_orders else 0
    parts = {}

    def part(m):
        if m not in parts:
            parts[m] = convolution_power_estimator(series, m, cfg.wavelet, cfg.horizon)
        return parts[m]

    record("naive", lambda: part(1))

    p_row = np.full(cfg.p_table_orders, np.nan)
    correction = None
    if max_k >= 1 or cfg.p_table_orders >= 1:
        try:
            theta = estimate_theta(series, cfg.model.family, cfg.delta, cfg.theta_box)
            correction = build_correction(
                RenewalModel(cfg.model.family, theta, cfg.model.quadrature_steps),
                cfg.delta,
                max(max_k, 1),
            )
            k = min(cfg.p_table_orders, len(correction.p))
            p_row[:k] = correction.p[:k]
        except InsufficientDataError:
            correction = None

    for k_order in cfg.k_orders:
        name = f"corrected_k{k_order}"
        if k_order == 0:
            if "naive" in estimates:
                estimates[name] = estimates["naive"]
                errors[name] = errors["naive"]
            else:
                errors[name] = float("nan")
            continue
        if correction is None:
            errors[name] = float("nan")
            continue

        def make(k=k_order):
            weights = correction_coeffs(correction.p, k)
            pieces = [part(m) for m in range(1, k + 2)]
            values = np.zeros_like(pieces[0].values)
            for w, piece in zip(weights, pieces):
                values = values + w * piece.values
            return DensityEstimate(
                pieces[0].grid_lo,
                pieces[0].grid_hi,
                pieces[0].mesh,
                values,
                n_samples=series.nonzero_count,
                degenerate=False,
            )

        record(name, make)

    return index, errors, p_row, (estimates if keep_estimates else None)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run all replicates and aggregate.

    Per-replicate estimator failures (too few nonzero increments, empty
    paths) are recorded and excluded from the means, never fatal.  The
    aggregation is a fold over the replicate index, so the report does not
    depend on completion order.
    """
    t_start = time.perf_counter()
    names = cfg.estimator_names
    tasks = [(cfg, r, r == 0) for r in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            raw = list(pool.map(_run_replicate, tasks))
    else:
        raw = [_run_replicate(t) for t in tasks]
    raw.sort(key=lambda item: item[0])

    errors = {name: [] for name in names}
    p_rows = []
    representative = {}
    for index, errs, p_row, estimates in raw:
        for name in names:
            errors[name].append(errs.get(name, float("nan")))
        p_rows.append(p_row)
        if estimates is not None:
            representative = estimates
    return ExperimentReport(
        config=cfg,
        errors={name: tuple(vals) for name, vals in errors.items()},
        p_estimates=np.asarray(p_rows),
        representative=representative,
        wall_clock=time.perf_counter() - t_start,
    )


# -- emission ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def emit(report: ExperimentReport, out_dir, formats=("csv", "svg")):
    """Write the report artifacts; returns the list of paths written.

    ``report.csv`` holds one row per estimator; ``estimates_<name>.csv``
    hold the representative replicate's curves; ``p_table.csv`` the
    empirical count-probability summary; ``overlay.svg`` a line plot of the
    representative estimates over the true density.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def path_of(name):
        return os.path.join(out_dir, name)

    if "csv" in formats:
        p = path_of("report.csv")
        with open(p, "w", newline="") as fh:
            fh.write("estimator,mean_l2,std_l2,n_ok,n_failed\n")
            for name in report.config.estimator_names:
                fh.write(
                    f"{name},{_fmt(report.mean_error(name))},"
                    f"{_fmt(report.std_error(name))},"
                    f"{report.n_ok(name)},{report.n_failed(name)}\n"
                )
        written.append(p)

        mean_p, std_p = report.p_table()
        p = path_of("p_table.csv")
        with open(p, "w", newline="") as fh:
            fh.write("m,p_mean,p_std\n")
            for m, (pm, sm) in enumerate(zip(mean_p, std_p), start=1):
                fh.write(f"{m},{_fmt(pm)},{_fmt(sm)}\n")
        written.append(p)

        for name, est in sorted(report.representative.items()):
            p = path_of(f"estimates_{name}.csv")
            with open(p, "w", newline="") as fh:
                fh.write("x,value\n")
                for x, v in zip(est.grid(), est.values):
                    fh.write(f"{_fmt(x)},{_fmt(v)}\n")
            written.append(p)

        p = path_of("config_echo.txt")
        with open(p, "w") as fh:
            fh.write(repr(report.config) + "\n")
        written.append(p)

    if "svg" in formats and report.representative:
        p = path_of("overlay.svg")
        write_overlay_svg(p, report)
        written.append(p)
    return written


def write_overlay_svg(path, report: ExperimentReport, size=(900, 480), margin=50):
    """Standalone SVG: one polyline per estimator plus one for the truth."""
    width, height = size
    mixture = report.config.mixture
    curves = []
    first = next(iter(report.representative.values()))
    x = first.grid()
    curves.append(("truth", mixture.pdf(x)))
    for name in report.config.estimator_names:
        if name in report.representative:
            curves.append((name, report.representative[name].values))

    ymin = min(float(np.min(v)) for _, v in curves)
    ymax = max(float(np.max(v)) for _, v in curves)
    if ymax <= ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad

    def to_px(xv, yv):
        px = margin + (xv - x[0]) / (x[-1] - x[0]) * (width - 2 * margin)
        py = height - margin - (yv - ymin) / (ymax - ymin) * (height - 2 * margin)
        return px, py

    palette = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    x0, y0 = to_px(x[0], ymin)
    x1, y1 = to_px(x[-1], ymax)
    parts.append(
        f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" height="{y0 - y1:.2f}" '
        'fill="none" stroke="#888888"/>'
    )
    for i, (name, values) in enumerate(curves):
        color = palette[i % len(palette)]
        pts = " ".join(
            f"{px:.2f},{py:.2f}" for px, py in (to_px(xv, yv) for xv, yv in zip(x, values))
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>'
        )
        parts.append(
            f'<text x="{width - margin - 150}" y="{margin + 16 * i}" fill="{color}" '
            f'font-family="monospace" font-size="13">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# -- configuration files --------------------------------------------------------


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc


def model_from_config(data: dict) -> RenewalModel:
    try:
        inter = data["interarrival"]
        return RenewalModel(str(inter["family"]), float(inter["theta"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad interarrival section: {exc}") from exc


def mixture_from_config(data: dict) -> JumpMixture:
    try:
        return JumpMixture.from_specs(data["jumps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad jumps section: {exc}") from exc


def wavelet_from_config(data: dict) -> WaveletConfig:
    section = data.get("wavelet", {})
    kwargs = {}
    for key in ("filter", "bins_log2", "max_level", "kappa", "eval_mesh"):
        if key in section:
            kwargs[key] = section[key]
    if "domain" in section:
        lo, hi = section["domain"]
        kwargs["domain"] = (float(lo), float(hi))
    try:
        return WaveletConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad wavelet section: {exc}") from exc


def experiment_from_config(data: dict, **overrides) -> ExperimentConfig:
    """Assemble a full experiment from parsed TOML plus keyword overrides
    (seed, replicates, output_dir, workers).
    """
    section = data.get("experiment")
    if section is None:
        raise ConfigError("missing [experiment] section")
    try:
        kwargs = dict(
            model=model_from_config(data),
            mixture=mixture_from_config(data),
            horizon=float(section["T"]),
            delta=float(section["delta"]),
            k_orders=tuple(int(k) for k in section.get("K_list", [0])),
            replicates=int(section.get("replicates", 100)),
            wavelet=wavelet_from_config(data),
            base_seed=int(section.get("base_seed", 0)),
            include_oracle=bool(section.get("include_oracle", True)),
            output_dir=str(section.get("output_dir", "out")),
            workers=int(section.get("workers", 1)),
        )
        if "theta_box" in section:
            lo, hi = section["theta_box"]
            kwargs["theta_box"] = (float(lo), float(hi))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment section: {exc}") from exc
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kwargs)
