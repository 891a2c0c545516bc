"""Monte-Carlo experiment harness.

Runs seeded sweeps over noise level, sensor count and missing-data
fraction for the estimation scenarios, aggregates RMSE per sweep point and
emits CSV/JSON/plot-ready tables. Every trial derives its generator from
(master_seed, sweep index, trial index), so results are bit-reproducible
no matter how sweep points are scheduled; the RBL_THREADS environment
variable caps the worker threads.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .completion import complete_edm
from .estimators import estimate_motion, rbl_two_stage, relative_pose_anchorless
from .geometry import (
    BodyMotion,
    Conformation,
    Pose,
    apply_pose,
    random_rotation,
    rotation_geodesic_error,
)
from .measurement import (
    AnchorSet,
    MaskedRangeMatrix,
    assemble_partial_edm,
    simulate_range_rates,
    simulate_ranges,
)
from .placement import (
    PlacementProblem,
    evaluate_placement,
    optimize_placement,
)

SCENARIOS = (
    "rmse_vs_sensors",
    "rmse_vs_noise",
    "completion_benchmark",
    "anchorless_two_body",
    "motion_tracking",
    "placement_study",
)

DEFAULT_SIGMAS = (0.01, 0.05, 0.1, 0.5)
DEFAULT_SENSOR_COUNTS = (2, 4, 6, 8, 10)

# Random poses are drawn with the body center within this box half-width
# (meters) of the anchor centroid.
POSE_SPREAD = 5.0

# Box-vehicle extent: length x width x height of a passenger car, meters.
BOX_DIMENSIONS = (4.5, 1.8, 1.5)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _box_nodes_3d() -> np.ndarray:
    """Node order for the 3D box-vehicle layout.

    Vertices come first (the leading pair spans a front bottom edge, the
    first four are non-coplanar), then the twelve edge midpoints grouped by
    edge direction. Prefixes of this list are the nested K-node layouts.
    """
    hx, hy, hz = (d / 2.0 for d in BOX_DIMENSIONS)
    return np.array([
        (+hx, -hy, -hz), (+hx, +hy, -hz), (-hx, +hy, -hz), (-hx, -hy, +hz),
        (-hx, -hy, -hz), (+hx, +hy, +hz), (+hx, -hy, +hz), (-hx, +hy, +hz),
        (0.0, -hy, -hz), (0.0, +hy, -hz), (0.0, +hy, +hz), (0.0, -hy, +hz),
        (+hx, 0.0, -hz), (-hx, 0.0, -hz), (+hx, 0.0, +hz), (-hx, 0.0, +hz),
        (+hx, -hy, 0.0), (+hx, +hy, 0.0), (-hx, +hy, 0.0), (-hx, -hy, 0.0),
    ])


def _box_nodes_2d() -> np.ndarray:
    """2D box-vehicle layout: rectangle corners, edge midpoints, then edge
    quarter points, in a fixed order with nested prefixes."""
    hx, hy = BOX_DIMENSIONS[0] / 2.0, BOX_DIMENSIONS[1] / 2.0
    return np.array([
        (+hx, -hy), (+hx, +hy), (-hx, +hy), (-hx, -hy),
        (0.0, -hy), (0.0, +hy), (+hx, 0.0), (-hx, 0.0),
        (+hx / 2, -hy), (-hx / 2, -hy), (+hx / 2, +hy), (-hx / 2, +hy),
        (+hx, -hy / 2), (+hx, +hy / 2), (-hx, -hy / 2), (-hx, +hy / 2),
    ])


def box_vehicle_conformation(num_nodes: int, dim: int = 3) -> Conformation:
    """Built-in vehicle-sized body: the first ``num_nodes`` nodes of the
    fixed box layout, so different sensor counts are nested subsets."""
    if dim == 3:
        nodes = _box_nodes_3d()
    elif dim == 2:
        nodes = _box_nodes_2d()
    else:
        raise ValueError("dim must be 2 or 3")
    if not 1 <= num_nodes <= nodes.shape[0]:
        raise ValueError(f"box-vehicle supports 1..{nodes.shape[0]} nodes in {dim}D")
    return Conformation(nodes[:num_nodes])


def _cube_vertices_3d() -> np.ndarray:
    # tetrad subset first so any prefix of >= 4 anchors is non-coplanar
    return np.array([
        (+1, +1, +1), (+1, -1, -1), (-1, +1, -1), (-1, -1, +1),
        (-1, -1, -1), (-1, +1, +1), (+1, -1, +1), (+1, +1, -1),
    ], dtype=float)


def _cube_edge_midpoints_3d() -> np.ndarray:
    return np.array([
        (0, -1, -1), (0, +1, -1), (0, +1, +1), (0, -1, +1),
        (+1, 0, -1), (-1, 0, -1), (+1, 0, +1), (-1, 0, +1),
        (+1, -1, 0), (+1, +1, 0), (-1, +1, 0), (-1, -1, 0),
    ], dtype=float)


def cube_anchor_layout(num_anchors: int, dim: int = 3, span: float = 60.0,
                       center=None) -> AnchorSet:
    """Default anchor geometry: vertices of a cube (square in 2D) of side
    ``span`` around the scene, then edge midpoints for larger counts."""
    if span <= 0:
        raise ValueError("span must be positive")
    if dim == 3:
        pts = np.vstack([_cube_vertices_3d(), _cube_edge_midpoints_3d()])
    elif dim == 2:
        pts = np.array([(+1, +1), (+1, -1), (-1, +1), (-1, -1),
                        (0, +1), (0, -1), (+1, 0), (-1, 0)], dtype=float)
    else:
        raise ValueError("dim must be 2 or 3")
    if not 1 <= num_anchors <= pts.shape[0]:
        raise ValueError(f"cube layout supports 1..{pts.shape[0]} anchors in {dim}D")
    positions = pts[:num_anchors] * (span / 2.0)
    if center is not None:
        positions = positions + np.asarray(center, dtype=float)
    return AnchorSet(positions)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see README for the JSON schema)."""

    scenario: str
    dim: int = 3
    conformation: str = "box-vehicle"
    anchors: str = "cube"
    anchor_count: int = 8
    anchor_span: float = 60.0
    sigma_list: tuple = DEFAULT_SIGMAS
    sensor_counts: tuple = DEFAULT_SENSOR_COUNTS
    missing_fraction: tuple = (0.0,)
    trials: int = 100
    master_seed: int = 0
    estimator: dict = field(default_factory=lambda: {"weighted": True})

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"expected one of {', '.join(SCENARIOS)}")
        if self.dim not in (2, 3):
            raise ConfigError("dim must be 2 or 3")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.master_seed, int):
            raise ConfigError("master_seed must be an integer")
        sigmas = tuple(float(s) for s in _as_sequence(self.sigma_list, "sigma_list"))
        if any(not np.isfinite(s) or s < 0 for s in sigmas):
            raise ConfigError("sigma_list entries must be non-negative")
        object.__setattr__(self, "sigma_list", sigmas)
        counts = tuple(int(k) for k in _as_sequence(self.sensor_counts,
                                                    "sensor_counts"))
        if any(k < 2 for k in counts):
            raise ConfigError("sensor_counts values must be at least 2")
        object.__setattr__(self, "sensor_counts", counts)
        fractions = tuple(float(f) for f in
                          _as_sequence(self.missing_fraction, "missing_fraction",
                                       scalar_ok=True))
        if any(not 0.0 <= f < 1.0 for f in fractions):
            raise ConfigError("missing_fraction values must lie in [0, 1)")
        object.__setattr__(self, "missing_fraction", fractions)
        if not isinstance(self.anchor_count, int) or self.anchor_count < 1:
            raise ConfigError("anchor_count must be a positive integer")
        if not float(self.anchor_span) > 0:
            raise ConfigError("anchor_span must be positive")
        object.__setattr__(self, "anchor_span", float(self.anchor_span))
        if not isinstance(self.estimator, dict):
            raise ConfigError("estimator options must be an object")
        unknown = set(self.estimator) - {"weighted"}
        if unknown:
            raise ConfigError(f"unknown estimator options: {sorted(unknown)}")
        options = {"weighted": bool(self.estimator.get("weighted", True))}
        object.__setattr__(self, "estimator", options)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("configuration must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        if "scenario" not in obj:
            raise ConfigError("configuration requires a scenario")
        return cls(**obj)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "dim": self.dim,
            "conformation": self.conformation,
            "anchors": self.anchors,
            "anchor_count": self.anchor_count,
            "anchor_span": self.anchor_span,
            "sigma_list": list(self.sigma_list),
            "sensor_counts": list(self.sensor_counts),
            "missing_fraction": list(self.missing_fraction),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "estimator": dict(self.estimator),
        }


def _as_sequence(value, name, scalar_ok: bool = False):
    if isinstance(value, (int, float)) and scalar_ok:
        return (value,)
    if isinstance(value, (list, tuple)) and len(value) > 0:
        return tuple(value)
    raise ConfigError(f"{name} must be a non-empty list")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a JSON experiment configuration file."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON at line {err.lineno}, "
                          f"column {err.colno}: {err.msg}") from err
    return ExperimentConfig.from_dict(obj)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n")


@dataclass
class ResultRow:
    scenario: str
    params: dict
    translation_rmse: float
    rotation_rmse: float
    translation_se: float
    rotation_se: float
    failures: int
    trials: int
    wall_time_s: float


@dataclass
class ResultTable:
    """Aggregated sweep results with stable column order."""

    rows: list
    param_keys: tuple

    METRIC_COLUMNS = ("translation_rmse", "rotation_rmse",
                      "translation_se", "rotation_se", "failures", "trials")

    def header(self) -> list:
        return ["scenario", *self.param_keys, *self.METRIC_COLUMNS]

    def to_csv(self, path) -> None:
        # wall time is diagnostic and varies run to run; the CSV holds only
        # the reproducible columns so identical seeds give identical files
        lines = [",".join(self.header())]
        for row in self.rows:
            cells = [row.scenario]
            cells += [_format_cell(row.params[k]) for k in self.param_keys]
            cells += [_format_cell(getattr(row, col)) for col in self.METRIC_COLUMNS]
            lines.append(",".join(cells))
        Path(path).write_text("\n".join(lines) + "\n")

    def to_json(self, path=None) -> str:
        obj = {
            "param_keys": list(self.param_keys),
            "rows": [{
                "scenario": row.scenario,
                "params": row.params,
                "translation_rmse": _json_float(row.translation_rmse),
                "rotation_rmse": _json_float(row.rotation_rmse),
                "translation_se": _json_float(row.translation_se),
                "rotation_se": _json_float(row.rotation_se),
                "failures": row.failures,
                "trials": row.trials,
                "wall_time_s": row.wall_time_s,
            } for row in self.rows],
        }
        text = json.dumps(obj, indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        obj = json.loads(text)
        rows = [ResultRow(
            scenario=r["scenario"],
            params=r["params"],
            translation_rmse=_from_json_float(r["translation_rmse"]),
            rotation_rmse=_from_json_float(r["rotation_rmse"]),
            translation_se=_from_json_float(r["translation_se"]),
            rotation_se=_from_json_float(r["rotation_se"]),
            failures=r["failures"],
            trials=r["trials"],
            wall_time_s=r["wall_time_s"],
        ) for r in obj["rows"]]
        return cls(rows, tuple(obj["param_keys"]))

    def plot_series_keys(self):
        """(x key, series keys) for plot-data emission, per scenario."""
        scenario = self.rows[0].scenario if self.rows else "rmse_vs_sensors"
        if scenario == "rmse_vs_sensors":
            return "sensors", tuple(k for k in self.param_keys if k != "sensors")
        if scenario == "completion_benchmark":
            return "missing_fraction", tuple(k for k in self.param_keys
                                             if k != "missing_fraction")
        return "sigma", tuple(k for k in self.param_keys if k != "sigma")


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_float(value: float):
    return None if isinstance(value, float) and np.isnan(value) else value


def _from_json_float(value) -> float:
    return float("nan") if value is None else float(value)


def emit_results(table: ResultTable, fmt: str, out_dir) -> list:
    """Write the table as results.csv, results.json or per-metric plot-data
    CSVs (columns x, series, y). Returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out_dir / "results.csv"
        table.to_csv(path)
        return [path]
    if fmt == "json":
        path = out_dir / "results.json"
        table.to_json(path)
        return [path]
    if fmt == "plot-data":
        x_key, series_keys = table.plot_series_keys()
        paths = []
        for metric in ("translation_rmse", "rotation_rmse"):
            path = out_dir / f"plot_{metric}.csv"
            lines = ["x,series,y"]
            for row in table.rows:
                series = ",".join(f"{k}={row.params[k]}" for k in series_keys)
                lines.append(f"{_format_cell(row.params[x_key])},"
                             f"\"{series}\",{_format_cell(getattr(row, metric))}")
            Path(path).write_text("\n".join(lines) + "\n")
            paths.append(path)
        return paths
    raise ConfigError(f"unknown output format {fmt!r}; "
                      "expected csv, json or plot-data")


def _worker_count(num_points: int) -> int:
    env = os.environ.get("RBL_THREADS", "").strip()
    if env:
        try:
            workers = int(env)
        except ValueError as err:
            raise ConfigError("RBL_THREADS must be an integer") from err
        if workers < 1:
            raise ConfigError("RBL_THREADS must be at least 1")
    else:
        workers = min(4, os.cpu_count() or 1)
    return max(1, min(workers, num_points))


def _trial_rng(master_seed: int, sweep_idx: int, trial: int) -> np.random.Generator:
    return np.random.default_rng((master_seed, sweep_idx, trial))


def _source_path(source: str) -> Path:
    # config sources may name files directly or with an explicit file: prefix
    return Path(source[5:] if source.startswith("file:") else source)


def _resolve_anchors(config: ExperimentConfig) -> AnchorSet:
    if config.anchors == "cube":
        return cube_anchor_layout(config.anchor_count, config.dim,
                                  config.anchor_span)
    anchors = AnchorSet.from_json(_source_path(config.anchors).read_text())
    if anchors.dim != config.dim:
        raise ConfigError("anchor file dimension does not match config dim")
    return anchors


def _resolve_conformation(config: ExperimentConfig, num_nodes: int) -> Conformation:
    if config.conformation == "box-vehicle":
        return box_vehicle_conformation(num_nodes, config.dim)
    conf = Conformation.from_json(_source_path(config.conformation).read_text())
    if conf.dim != config.dim:
        raise ConfigError("conformation file dimension does not match config dim")
    if num_nodes > conf.num_nodes:
        raise ConfigError(f"conformation file has {conf.num_nodes} nodes; "
                          f"cannot take {num_nodes}")
    return Conformation(conf.coords[:num_nodes])


def _random_pose(rng: np.random.Generator, dim: int, center) -> Pose:
    return Pose(random_rotation(rng, dim),
                np.asarray(center) + rng.uniform(-POSE_SPREAD, POSE_SPREAD, dim))


def _apply_missing(values_mask, fraction: float, rng: np.random.Generator):
    values, mask = values_mask
    if fraction <= 0:
        return values, mask
    keep = rng.random(mask.shape) >= fraction
    mask = mask & keep
    return np.where(mask, values, np.nan), mask


def _pose_errors(est_pose: Pose, true_pose: Pose):
    t_err = float(((est_pose.translation - true_pose.translation) ** 2).sum())
    r_err = rotation_geodesic_error(est_pose.rotation, true_pose.rotation) ** 2
    return t_err, r_err


def _summarize(scenario, params, t_sq, r_sq, failures, trials, elapsed):
    t_rmse, t_se = _rmse_se(t_sq)
    r_rmse, r_se = _rmse_se(r_sq)
    return ResultRow(scenario, params, t_rmse, r_rmse, t_se, r_se,
                     failures, trials, elapsed)


def _rmse_se(squared):
    sq = np.asarray(squared, dtype=float)
    if sq.size == 0:
        return float("nan"), float("nan")
    rmse = float(np.sqrt(sq.mean()))
    if sq.size < 2 or rmse == 0.0:
        return rmse, 0.0
    return rmse, float(sq.std(ddof=1) / np.sqrt(sq.size) / (2.0 * rmse))


def _point_rmse_vs(config, anchors, sweep_idx, sigma, sensors):
    conf = _resolve_conformation(config, sensors)
    center = anchors.positions.mean(axis=0)
    fraction = config.missing_fraction[0]
    weighted = config.estimator["weighted"]
    t_sq, r_sq = [], []
    failures = 0
    start = time.perf_counter()
    for trial in range(config.trials):
        rng = _trial_rng(config.master_seed, sweep_idx, trial)
        pose = _random_pose(rng, config.dim, center)
        ranges = simulate_ranges(anchors, apply_pose(conf, pose), sigma, None, rng)
        values, mask = _apply_missing((ranges.values, ranges.mask), fraction, rng)
        try:
            est = rbl_two_stage(anchors, MaskedRangeMatrix(values, mask, sigma),
                                conf, weighted=weighted)
        except ValueError:
            failures += 1
            continue
        t_err, r_err = _pose_errors(est.pose, pose)
        t_sq.append(t_err)
        r_sq.append(r_err)
    return t_sq, r_sq, failures, time.perf_counter() - start


def _point_completion(config, anchors, sweep_idx, sigma, sensors, fraction):
    conf = _resolve_conformation(config, sensors)
    center = anchors.positions.mean(axis=0)
    weighted = config.estimator["weighted"]
    t_sq, r_sq = [], []
    failures = 0
    start = time.perf_counter()
    for trial in range(config.trials):
        rng = _trial_rng(config.master_seed, sweep_idx, trial)
        pose = _random_pose(rng, config.dim, center)
        ranges = simulate_ranges(anchors, apply_pose(conf, pose), sigma, None, rng)
        values, mask = _apply_missing((ranges.values, ranges.mask), fraction, rng)
        try:
            partial = assemble_partial_edm(anchors, conf,
                                           MaskedRangeMatrix(values, mask, sigma))
            result = complete_edm(partial, rank_slack=1 if sigma > 0 else 0)
            m = anchors.num_anchors
            cross = result.distances()[:m, m:]
            est = rbl_two_stage(anchors, MaskedRangeMatrix(cross, noise_sigma=sigma),
                                conf, weighted=weighted)
        except ValueError:
            failures += 1
            continue
        t_err, r_err = _pose_errors(est.pose, pose)
        t_sq.append(t_err)
        r_sq.append(r_err)
    return t_sq, r_sq, failures, time.perf_counter() - start


def _point_anchorless(config, sweep_idx, sigma, sensors):
    conf = _resolve_conformation(config, sensors)
    t_sq, r_sq = [], []
    failures = 0
    start = time.perf_counter()
    for trial in range(config.trials):
        rng = _trial_rng(config.master_seed, sweep_idx, trial)
        rot = random_rotation(rng, config.dim)
        direction = rng.normal(size=config.dim)
        direction /= np.linalg.norm(direction)
        pose = Pose(rot, (10.0 + rng.uniform(-2.0, 2.0)) * direction)
        body2 = apply_pose(conf, pose)
        diff = conf.coords[:, None, :] - body2.positions[None, :, :]
        dists = np.sqrt((diff**2).sum(axis=2))
        if sigma > 0:
            dists = np.maximum(dists + rng.normal(0.0, sigma, dists.shape), 0.0)
        try:
            est = relative_pose_anchorless(conf, conf,
                                           MaskedRangeMatrix(dists, noise_sigma=sigma))
        except ValueError:
            failures += 1
            continue
        t_err, r_err = _pose_errors(est.pose, pose)
        t_sq.append(t_err)
        r_sq.append(r_err)
    return t_sq, r_sq, failures, time.perf_counter() - start


def _point_motion(config, anchors, sweep_idx, sigma, sensors):
    conf = _resolve_conformation(config, sensors)
    center = anchors.positions.mean(axis=0)
    t_sq, r_sq = [], []
    failures = 0
    start = time.perf_counter()
    for trial in range(config.trials):
        rng = _trial_rng(config.master_seed, sweep_idx, trial)
        pose = _random_pose(rng, config.dim, center)
        omega = rng.uniform(-0.5, 0.5, 3) if config.dim == 3 \
            else float(rng.uniform(-0.5, 0.5))
        motion = BodyMotion(omega, rng.uniform(-15.0, 15.0, config.dim))
        rates = simulate_range_rates(anchors, conf, pose, motion, sigma,
                                     None, rng)
        try:
            est = estimate_motion(anchors, pose, conf, rates)
        except ValueError:
            failures += 1
            continue
        t_sq.append(float(((est.motion.t_dot - motion.t_dot) ** 2).sum()))
        omega_err = np.asarray(est.motion.omega) - np.asarray(motion.omega)
        r_sq.append(float((omega_err**2).sum()))
    return t_sq, r_sq, failures, time.perf_counter() - start


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Execute all sweep points of the configured scenario.

    Sweep points run in a thread pool (size capped by RBL_THREADS) and are
    reduced in sweep order; per-trial seeding keeps the output identical
    for any worker count.
    """
    scenario = config.scenario
    if scenario == "placement_study":
        return _run_placement_study(config)

    anchors = _resolve_anchors(config) if scenario != "anchorless_two_body" else None
    if scenario == "rmse_vs_sensors":
        points = [{"sigma": s, "sensors": k}
                  for s in config.sigma_list for k in config.sensor_counts]
        param_keys = ("sigma", "sensors")
    elif scenario == "rmse_vs_noise":
        points = [{"sigma": s, "sensors": k}
                  for k in config.sensor_counts for s in config.sigma_list]
        param_keys = ("sigma", "sensors")
    elif scenario == "completion_benchmark":
        points = [{"sigma": s, "sensors": k, "missing_fraction": f}
                  for s in config.sigma_list for k in config.sensor_counts
                  for f in config.missing_fraction]
        param_keys = ("sigma", "sensors", "missing_fraction")
    elif scenario in ("anchorless_two_body", "motion_tracking"):
        points = [{"sigma": s, "sensors": k}
                  for s in config.sigma_list for k in config.sensor_counts]
        param_keys = ("sigma", "sensors")
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown scenario {scenario!r}")

    def run_point(idx_params):
        idx, params = idx_params
        if scenario in ("rmse_vs_sensors", "rmse_vs_noise"):
            stats = _point_rmse_vs(config, anchors, idx, params["sigma"],
                                   params["sensors"])
        elif scenario == "completion_benchmark":
            stats = _point_completion(config, anchors, idx, params["sigma"],
                                      params["sensors"],
                                      params["missing_fraction"])
        elif scenario == "anchorless_two_body":
            stats = _point_anchorless(config, idx, params["sigma"],
                                      params["sensors"])
        else:
            stats = _point_motion(config, anchors, idx, params["sigma"],
                                  params["sensors"])
        t_sq, r_sq, failures, elapsed = stats
        return _summarize(scenario, params, t_sq, r_sq, failures,
                          config.trials, elapsed)

    tasks = list(enumerate(points))
    workers = _worker_count(len(tasks))
    if workers == 1:
        rows = [run_point(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_point, tasks))
    return ResultTable(rows, param_keys)


def _run_placement_study(config: ExperimentConfig) -> ResultTable:
    """Compare the optimized anchor layout against the default cube."""
    problem = PlacementProblem(config.anchor_count, config.dim,
                               anchor_radius=config.anchor_span / 2.0,
                               seed=config.master_seed)
    layouts = {
        "optimized": optimize_placement(problem).to_anchor_set(),
        "cube": cube_anchor_layout(config.anchor_count, config.dim,
                                   config.anchor_span),
    }
    conf = _resolve_conformation(config, config.sensor_counts[0])
    rows = []
    idx = 0
    for sigma in config.sigma_list:
        for name, anchors in layouts.items():
            start = time.perf_counter()
            ev = evaluate_placement(anchors, conf, sigma, config.trials,
                                    seed=(config.master_seed, idx))
            rows.append(ResultRow("placement_study",
                                  {"sigma": sigma, "placement": name},
                                  ev.translation_rmse, ev.rotation_rmse,
                                  ev.translation_se, ev.rotation_se,
                                  ev.failures, ev.trials,
                                  time.perf_counter() - start))
            idx += 1
    return ResultTable(rows, ("sigma", "placement"))
