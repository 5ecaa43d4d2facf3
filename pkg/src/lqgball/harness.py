"""Ensemble experiments: configuration, seeding, orchestration, caching and output.

Every number in an :class:`ExperimentResult` is a function of the
:class:`ExperimentConfig` alone (plus the ``zero_field`` debug switch):
replicate ``r`` samples its field with seed ``mix_seed(base_seed, r)`` and runs
its pipeline sequentially, and ensemble sums use ``math.fsum`` (exactly
rounded, hence independent of summation order).  Worker count and scheduling
therefore do not change results.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import fractal, io
from .formulas import DGammaModel, GammaParams, alpha_window, euclid_boundary_dim, make_params, quantum_boundary_dim, thick_euclid_dim
from .gff import FieldGrid, sample_field, zero_field as _zero_field
from .metric import TOPOLOGIES, WeightGrid, build_weights, metric_ball, shortest_distances
from .thickpoints import MIN_BOUNDARY_CELLS, boundary_spectrum

log = logging.getLogger(__name__)

CACHE_ENV = "LQGBALL_CACHE_DIR"
# bump when a change alters the numbers produced for a fixed config
NUMERICS_VERSION = 1
CAVEAT = ("Box-counting estimates at desk scale; the dimension statements are asymptotic "
          "and not exactly reproducible on finite grids.")

EDGE_COST_RULES = {"arith_mean": "arith", "geo_mean": "geo"}
MASK64 = (1 << 64) - 1


class ValidationError(ValueError):
    """Invalid experiment configuration."""


class AllTruncatedError(RuntimeError):
    """Every replicate produced a ball touching the grid frame."""


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RadiusPolicy:
    """``kind="fixed"`` uses radius ``value``; ``kind="quantile"`` takes the
    ``value``-quantile of the origin's distances to the measurement-window frame."""

    kind: str = "quantile"
    value: float = 0.25

    def __post_init__(self):
        if self.kind == "fixed":
            if not self.value > 0:
                raise ValidationError("fixed ball radius must be positive")
        elif self.kind == "quantile":
            if not 0.0 < self.value < 1.0:
                raise ValidationError("quantile must lie in (0, 1)")
        else:
            raise ValidationError(f"unknown ball radius policy {self.kind!r}")

    def to_json(self) -> dict:
        key = "s" if self.kind == "fixed" else "q"
        return {"kind": self.kind, key: self.value}

    @classmethod
    def from_json(cls, obj) -> "RadiusPolicy":
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValidationError("ball_radius_policy must be an object with a 'kind'")
        kind = obj["kind"]
        key = {"fixed": "s", "quantile": "q"}.get(kind)
        if key is None:
            raise ValidationError(f"unknown ball radius policy {kind!r}")
        if set(obj) != {"kind", key}:
            raise ValidationError(f"policy {kind!r} takes exactly the fields 'kind' and {key!r}")
        return cls(kind, float(obj[key]))


@dataclass(frozen=True)
class ExperimentConfig:
    gamma: float
    d_model: str = "exact"
    n: int = 1024
    replicates: int = 20
    base_seed: int = 0
    ball_radius_policy: RadiusPolicy = field(default_factory=RadiusPolicy)
    scale_window: tuple[float, float] = (1.0 / 64, 1.0 / 8)
    alpha_bins: int = 24
    graph_topology: str = "eight"
    edge_cost_rule: str = "arith_mean"
    output_dir: str = "out"

    def __post_init__(self):
        try:
            self.params()
        except ValueError as e:
            raise ValidationError(str(e)) from None
        if int(self.n) != self.n or self.n < 16:
            raise ValidationError("n must be an integer >= 16")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValidationError("replicates must be an integer >= 1")
        if int(self.base_seed) != self.base_seed or not 0 <= self.base_seed <= MASK64:
            raise ValidationError("base_seed must be a 64-bit unsigned integer")
        lo, hi = self.scale_window
        if not (self.spacing < lo < hi < 1.0):
            raise ValidationError(f"scale window must satisfy spacing ({self.spacing}) < lo < hi < 1")
        if int(self.alpha_bins) != self.alpha_bins or self.alpha_bins < 1:
            raise ValidationError("alpha_bins must be a positive integer")
        if self.graph_topology not in TOPOLOGIES:
            raise ValidationError(f"graph_topology must be one of {sorted(TOPOLOGIES)}")
        if self.edge_cost_rule not in EDGE_COST_RULES:
            raise ValidationError(f"edge_cost_rule must be one of {sorted(EDGE_COST_RULES)}")
        if not isinstance(self.ball_radius_policy, RadiusPolicy):
            raise ValidationError("ball_radius_policy must be a RadiusPolicy")

    @property
    def spacing(self) -> float:
        return 2.0 / self.n

    def params(self) -> GammaParams:
        return make_params(self.gamma, DGammaModel.parse(self.d_model))

    def to_json(self) -> dict:
        d = asdict(self)
        d["ball_radius_policy"] = self.ball_radius_policy.to_json()
        d["scale_window"] = list(self.scale_window)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        names = set(cls.__dataclass_fields__)
        if not isinstance(obj, dict):
            raise ValidationError("config must be a JSON object")
        missing, extra = names - set(obj), set(obj) - names
        if missing or extra:
            raise ValidationError(f"config fields mismatch: missing {sorted(missing)}, unknown {sorted(extra)}")
        try:
            sw = obj["scale_window"]
            if len(sw) != 2:
                raise ValidationError("scale_window must have two entries")
            return cls(
                gamma=float(obj["gamma"]),
                d_model=str(obj["d_model"]),
                n=obj["n"],
                replicates=obj["replicates"],
                base_seed=obj["base_seed"],
                ball_radius_policy=RadiusPolicy.from_json(obj["ball_radius_policy"]),
                scale_window=(float(sw[0]), float(sw[1])),
                alpha_bins=obj["alpha_bins"],
                graph_topology=obj["graph_topology"],
                edge_cost_rule=obj["edge_cost_rule"],
                output_dir=str(obj["output_dir"]),
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(str(e)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ValidationError(f"config is not valid JSON: {e}") from None
        return cls.from_json(obj)


def config_hash(cfg: ExperimentConfig, *, zero_field: bool = False) -> int:
    """64-bit hash of everything that affects the numbers (not ``output_dir``)."""
    d = cfg.to_json()
    del d["output_dir"]
    d["_zero_field"] = bool(zero_field)
    d["_numerics"] = NUMERICS_VERSION
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


# --------------------------------------------------------------------------
# seeding


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def mix_seeds(base_seed: int, indices) -> np.ndarray:
    """Replicate seeds: the splitmix64 finaliser of ``base + golden * (r + 1)``.

    The finaliser is a bijection of 64-bit words and ``r -> base + golden*(r+1)``
    is injective mod 2^64 (the multiplier is odd), so distinct replicate indices
    always get distinct seeds.
    """
    r = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = np.uint64(base_seed & MASK64) + np.uint64(0x9E3779B97F4A7C15) * (r + np.uint64(1))
        return _splitmix64(x)


def mix_seed(base_seed: int, r: int) -> int:
    return int(mix_seeds(base_seed, [r])[0])


# --------------------------------------------------------------------------
# per-replicate pipeline


def window_slice(n: int) -> slice:
    """Rows/columns of the measurement window ``[-1/2, 1/2]^2``."""
    return slice(n // 4, n - n // 4)


def window_extent() -> tuple[float, float, float, float]:
    return (-0.5, -0.5, 0.5, 0.5)


def frame_distances(dist: np.ndarray) -> np.ndarray:
    """Distances at the cells forming the frame of the measurement window."""
    n = dist.shape[0]
    sl = window_slice(n)
    a, b = sl.start, sl.stop - 1
    sub = dist[a:b + 1, a:b + 1]
    return np.concatenate([sub[0, :], sub[-1, :], sub[1:-1, 0], sub[1:-1, -1]])


def ball_radius(cfg: ExperimentConfig, dist: np.ndarray) -> float:
    pol = cfg.ball_radius_policy
    if pol.kind == "fixed":
        return pol.value
    return float(np.quantile(frame_distances(dist), pol.value))


def in_window(cells: np.ndarray, n: int) -> np.ndarray:
    sl = window_slice(n)
    return ((cells >= sl.start) & (cells < sl.stop)).all(axis=1)


def cover_radii(s: float, w: WeightGrid, *, min_count: int = 3) -> np.ndarray:
    """``s/2, s/4, ...`` down to the typical length of an 8-cell step.

    At least ``min_count`` radii are always returned.
    """
    floor = float(np.median(w.cell_cost)) * 8.0 * w.spacing
    radii = []
    r = s / 2.0
    while r >= floor or len(radii) < min_count:
        radii.append(r)
        r /= 2.0
    return np.array(radii)


def spectrum_radii(spacing: float, r_max: float = 0.125, count: int = 8):
    lo = 8.0 * spacing
    if lo * 2.0 > r_max:
        return None
    return np.geomspace(lo, r_max, count)


def _estimate_json(est) -> dict:
    d = est.summary()
    d["scales"] = [float(v) for v in est.scales]
    d["counts"] = [float(v) for v in est.counts]
    return d


def run_replicate(cfg: ExperimentConfig, r: int, *, zero_field: bool = False) -> dict:
    """Full pipeline for replicate ``r``; returns a JSON-ready record."""
    p = cfg.params()
    seed = mix_seed(cfg.base_seed, r)
    f: FieldGrid = _zero_field(cfg.n, seed) if zero_field else sample_field(cfg.n, seed)
    w = build_weights(f, p, topology=cfg.graph_topology, edge_rule=EDGE_COST_RULES[cfg.edge_cost_rule])
    origin = f.origin_cell()
    d = shortest_distances(w, [origin])
    s = ball_radius(cfg, d.dist)
    ball = metric_ball(d, s)
    rec = {"index": int(r), "seed": seed, "s": s, "truncated": ball.touches_frame,
           "ball_cells": int(ball.mask.sum()), "boundary_cells": int(ball.boundary.shape[0]),
           "window_boundary_cells": 0, "euclid": None, "quantum": None, "spectrum": None, "notes": []}
    if ball.touches_frame:
        rec["notes"].append("ball touches the grid frame; replicate rejected")
        return rec

    ext = window_extent()
    wcells = ball.boundary[in_window(ball.boundary, cfg.n)]
    rec["window_boundary_cells"] = int(wcells.shape[0])
    scales = fractal.dyadic_scales(ext, *cfg.scale_window)
    if wcells.shape[0] == 0 or scales.size < 3:
        rec["notes"].append("euclidean estimate skipped: no boundary in window or < 3 scales")
    else:
        rec["euclid"] = _estimate_json(fractal.box_dimension(f.cell_xy(wcells), ext, scales))

    radii = cover_radii(s, w)
    est = fractal.quantum_dimension(ball.boundary, w, radii)
    rec["quantum"] = _estimate_json(est)

    sr = spectrum_radii(f.spacing)
    if sr is None or wcells.shape[0] < MIN_BOUNDARY_CELLS or scales.size < 3:
        rec["notes"].append("spectrum skipped: grid too coarse or too few boundary cells")
    else:
        spectrum = boundary_spectrum(f, w, p, ball, cfg.alpha_bins, radii=sr, cells=wcells,
                                     extent=ext, scales=scales)
        win = alpha_window(p)
        k0 = int(round((spectrum.alpha_bins[0] - 0.5 * spectrum.bin_width - win.lo) / spectrum.bin_width))
        rec["spectrum"] = {
            "k_lo": k0,
            "counts": [int(c) for c in spectrum.counts],
            "dims": [None if x is None else x.slope for x in spectrum.bin_dims],
            "stderrs": [None if x is None else x.slope_stderr for x in spectrum.bin_dims],
        }
    return rec


# --------------------------------------------------------------------------
# aggregation


def mean_stderr(values) -> tuple[float, float, int]:
    """Exactly-rounded mean and standard error (ddof=1); order independent."""
    v = [float(x) for x in values if x is not None and math.isfinite(x)]
    k = len(v)
    if k == 0:
        return math.nan, math.nan, 0
    m = math.fsum(v) / k
    if k == 1:
        return m, math.nan, 1
    var = math.fsum((x - m) ** 2 for x in v) / (k - 1)
    return m, math.sqrt(var / k), k


def spectrum_bins(p: GammaParams, alpha_bins: int, records) -> dict:
    """Align per-replicate spectra on the common bin lattice and average."""
    win = alpha_window(p)
    width = win.width / alpha_bins
    per_k: dict[int, dict] = {}
    for rec in records:
        sp = rec.get("spectrum")
        if not sp:
            continue
        for j, (c, dm) in enumerate(zip(sp["counts"], sp["dims"])):
            slot = per_k.setdefault(sp["k_lo"] + j, {"count": 0, "dims": []})
            slot["count"] += c
            if dm is not None:
                slot["dims"].append(dm)
    if not per_k:
        return {"alpha": [], "count": [], "dim_est": [], "dim_stderr": [], "n_est": [], "dim_pred": []}
    ks = range(min(per_k), max(per_k) + 1)
    alpha, count, est, se, nest = [], [], [], [], []
    for k in ks:
        slot = per_k.get(k, {"count": 0, "dims": []})
        m, e, c = mean_stderr(slot["dims"])
        alpha.append(win.lo + (k + 0.5) * width)
        count.append(slot["count"])
        est.append(m)
        se.append(e)
        nest.append(c)
    pred = [float(thick_euclid_dim(p, a)) for a in alpha]
    return {"alpha": alpha, "count": count, "dim_est": est, "dim_stderr": se, "n_est": nest, "dim_pred": pred}


def compute_aggregates(cfg: ExperimentConfig, records) -> dict:
    ok = [r for r in records if not r["truncated"]]
    agg = {"replicates": len(records), "valid": len(ok), "truncated": len(records) - len(ok)}
    for key in ("euclid", "quantum"):
        m, e, c = mean_stderr(r[key]["slope"] for r in ok if r[key] is not None)
        agg[key] = {"mean": m, "stderr": e, "count": c}
    m, e, c = mean_stderr(r["s"] for r in ok)
    agg["s"] = {"mean": m, "stderr": e, "count": c}
    agg["spectrum"] = spectrum_bins(cfg.params(), cfg.alpha_bins, ok)
    return agg


def predictions(cfg: ExperimentConfig) -> dict:
    p = cfg.params()
    win = alpha_window(p)
    return {"d_gamma": p.d_gamma, "xi": p.xi, "Q": p.q,
            "euclid_boundary_dim": euclid_boundary_dim(p),
            "quantum_boundary_dim": quantum_boundary_dim(p),
            "alpha_window": [win.lo, win.hi], "spectrum_peak_alpha": p.xi}


def _same(a, b, tol: float = 1e-12) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k], tol) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(_same(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        if a is None or b is None:
            return a is b
        if math.isnan(a) or math.isnan(b):
            return math.isnan(a) and math.isnan(b)
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
    return a == b


# --------------------------------------------------------------------------
# results


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    config_hash: int
    records: list
    aggregates: dict
    predictions: dict
    metadata: dict = field(default_factory=dict)
    zero_field: bool = False

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "config_hash": f"{self.config_hash:016x}",
                "zero_field": self.zero_field, "records": self.records, "aggregates": self.aggregates,
                "predictions": self.predictions, "metadata": self.metadata, "caveat": CAVEAT}

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentResult":
        """Rebuild a result, checking the hash and that aggregates recompute from records."""
        cfg = ExperimentConfig.from_json(obj["config"])
        zf = bool(obj.get("zero_field", False))
        h = int(obj["config_hash"], 16)
        if h != config_hash(cfg, zero_field=zf):
            raise ValueError("stored config_hash does not match the config")
        agg = compute_aggregates(cfg, obj["records"])
        if not _same(agg, obj["aggregates"]):
            raise ValueError("stored aggregates do not match the records")
        return cls(cfg, h, obj["records"], obj["aggregates"], obj["predictions"], obj.get("metadata", {}), zf)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=1))
        return path

    @classmethod
    def load(cls, path) -> "ExperimentResult":
        return cls.from_json(json.loads(Path(path).read_text()))


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    return Path(env) if env else Path.home() / ".cache" / "lqgball"


def cache_path(cfg: ExperimentConfig, *, zero_field: bool = False) -> Path:
    return cache_dir() / f"{config_hash(cfg, zero_field=zero_field):016x}.json"


def cache_lookup(cfg: ExperimentConfig, *, zero_field: bool = False) -> ExperimentResult | None:
    path = cache_path(cfg, zero_field=zero_field)
    if not path.exists():
        return None
    try:
        res = ExperimentResult.load(path)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        log.warning("corrupt cache entry %s (%s); treating as a miss", path, e)
        return None
    # the hit carries the caller's output_dir
    res.config = cfg
    return res


def cache_store(result: ExperimentResult) -> Path | None:
    path = cache_path(result.config, zero_field=result.zero_field)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        result.save(tmp)
        os.replace(tmp, path)
    except OSError as e:
        log.warning("could not write cache entry %s: %s", path, e)
        return None
    return path


def _worker(args):
    cfg, r, zf = args
    return run_replicate(cfg, r, zero_field=zf)


def run_experiment(cfg: ExperimentConfig, *, zero_field: bool = False, workers: int = 1,
                   use_cache: bool = True) -> ExperimentResult:
    """Run all replicates and aggregate.

    ``zero_field`` replaces every sampled field by ``h = 0`` (smooth baseline).
    Raises :class:`AllTruncatedError` when no replicate is usable.
    """
    if use_cache:
        hit = cache_lookup(cfg, zero_field=zero_field)
        if hit is not None:
            if hit.aggregates["valid"] == 0:
                raise AllTruncatedError("all replicates truncated (cached)")
            return hit
    t0 = time.perf_counter()
    jobs = [(cfg, r, zero_field) for r in range(cfg.replicates)]
    if workers > 1 and cfg.replicates > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_worker, jobs))
    else:
        records = [_worker(j) for j in jobs]
    records.sort(key=lambda rec: rec["index"])
    agg = compute_aggregates(cfg, records)
    meta = {"wall_seconds": time.perf_counter() - t0, "workers": workers,
            "started": time.strftime("%Y-%m-%dT%H:%M:%S")}
    res = ExperimentResult(cfg, config_hash(cfg, zero_field=zero_field), records, agg,
                           predictions(cfg), meta, zero_field)
    if use_cache:
        cache_store(res)
    if agg["valid"] == 0:
        raise AllTruncatedError(f"all {cfg.replicates} replicates truncated")
    return res


# --------------------------------------------------------------------------
# emission

FORMATS = ("json", "csv", "spectrum", "plot")

_RECORD_COLUMNS = ["index", "seed", "s", "truncated", "ball_cells", "boundary_cells",
                   "window_boundary_cells", "euclid_dim", "euclid_stderr", "quantum_dim", "quantum_stderr"]


def _fmt(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def emit(result: ExperimentResult, formats=("json",)) -> list[Path]:
    """Write the requested outputs to ``config.output_dir``; returns the paths."""
    formats = set(formats)
    bad = formats - set(FORMATS)
    if bad:
        raise ValueError(f"unknown formats {sorted(bad)}")
    out = Path(result.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if "json" in formats:
        paths.append(result.save(out / "summary.json"))
    if "csv" in formats:
        path = out / "replicates.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(_RECORD_COLUMNS)
            for r in result.records:
                e, q = r["euclid"] or {}, r["quantum"] or {}
                wr.writerow([_fmt(v) for v in (r["index"], r["seed"], r["s"], int(r["truncated"]),
                                               r["ball_cells"], r["boundary_cells"], r["window_boundary_cells"],
                                               e.get("slope"), e.get("slope_stderr"),
                                               q.get("slope"), q.get("slope_stderr"))])
        paths.append(path)
        for r in result.records:
            for key in ("euclid", "quantum"):
                if r[key] is not None:
                    est = SimpleNamespace(scales=r[key]["scales"], counts=r[key]["counts"])
                    paths.append(io.write_estimate_csv(est, out / f"{key}_r{r['index']:04d}.csv"))
    sp = result.aggregates["spectrum"]
    if "spectrum" in formats:
        paths.append(io.write_spectrum_csv(sp["alpha"], sp["count"], sp["dim_est"], sp["dim_stderr"],
                                           sp["dim_pred"], out / "spectrum.csv"))
        # predicted curve on a fine grid across the alpha window, for overlays
        p = result.config.params()
        win = alpha_window(p)
        a = np.linspace(win.lo, win.hi, 201)
        path = out / "spectrum_pred.csv"
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["alpha", "dim_pred"])
            for x, y in zip(a, thick_euclid_dim(p, a)):
                wr.writerow([repr(float(x)), repr(float(y))])
        paths.append(path)
    if "plot" in formats:
        if sp["alpha"]:
            paths.append(io.write_plot_data(sp["alpha"], sp["dim_est"], out / "spectrum_est.dat", "alpha dim_est"))
            paths.append(io.write_plot_data(sp["alpha"], sp["dim_pred"], out / "spectrum_pred.dat", "alpha dim_pred"))
        for r in result.records:
            for key in ("euclid", "quantum"):
                est = r[key]
                if est is None:
                    continue
                x = np.log(1.0 / np.asarray(est["scales"]))
                y = np.log(np.asarray(est["counts"]))
                paths.append(io.write_plot_data(x, y, out / f"{key}_loglog_r{r['index']:04d}.dat",
                                                "log_inv_scale log_count"))
    return paths


def comparison_rows(result: ExperimentResult) -> list[dict]:
    """Estimate-versus-prediction rows for display."""
    agg, pred = result.aggregates, result.predictions
    return [
        {"quantity": "euclidean boundary dim", "estimate": agg["euclid"]["mean"],
         "stderr": agg["euclid"]["stderr"], "predicted": pred["euclid_boundary_dim"]},
        {"quantity": "quantum boundary dim", "estimate": agg["quantum"]["mean"],
         "stderr": agg["quantum"]["stderr"], "predicted": pred["quantum_boundary_dim"]},
    ]
