"""Scenario files, experiment orchestration, metrics and export.

A scenario is a JSON document (conventionally ``*.scn``) with
``schema_version = 1``. Unknown keys are rejected. Algorithms belong to one of
four experiment families and one scenario may only use a single family:

* ``static``  -- ``dvhop``, ``rocrssi``: localize every unknown node once.
* ``track``   -- ``pf``, ``kf``: follow one moving target; anchors act as sensors.
* ``gsm``     -- ``cellid``, ``knn``, ``cellsense``, ``hmm``: outdoor walks among
  towers (the anchors), with a simulated offline survey.
* ``gps``     -- ``gps``: static ground nodes trilaterate from beacons broadcast
  by mobile GPS nodes (the anchors).
"""

import csv
import hashlib
import io
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ContractError, LocalizationError, ScenarioError
from .filters import KalmanTracker, ParticleFilterTracker, TargetModelParams
from .fingerprint import (
    CellSenseLocator,
    FingerprintDb,
    HMMTracker,
    knn_locate,
)
from .geo import SphereObservation, cellid_locate, simulate_beacons, sphere_locate
from .propagation import D_MIN, PathLossParams, SensorParams, rssi_matrix, simulate_decisions
from .rangefree import dvhop_localize, rocrssi_localize
from .world import Position, build_world, distance, random_walk_trajectory

SCHEMA_VERSION = 1

FAMILIES = {
    "dvhop": "static",
    "rocrssi": "static",
    "pf": "track",
    "kf": "track",
    "cellid": "gsm",
    "knn": "gsm",
    "cellsense": "gsm",
    "hmm": "gsm",
    "gps": "gps",
}

CSV_COLUMNS = ("seed", "algorithm", "node_or_step", "true_x", "true_y", "true_z", "est_x", "est_y", "est_z", "error_m")


# ------------------------------------------------------------------ config blocks


@dataclass(frozen=True)
class WorldConfig:
    width: float
    height: float
    comm_range: float
    n_anchors: int = 0
    n_unknown: int = 0
    placement: str = "uniform"


@dataclass(frozen=True)
class PFConfig:
    n_particles: int = 50
    resample_threshold: float = 0.5


@dataclass(frozen=True)
class KFConfig:
    q: float = 0.09
    r: float = 0.5


@dataclass(frozen=True)
class TrackConfig:
    observation: str = "binary"
    measurement_sigma: float = 0.5
    start: tuple = None


@dataclass(frozen=True)
class RocrssiConfig:
    radii: str = "true"


@dataclass(frozen=True)
class GsmConfig:
    cell_size: float = 100.0
    bin_width: float = 5.0
    n_survey_walks: int = 20
    survey_len: int = 200
    walk_sigma: float = 50.0
    n_test_walks: int = 5
    knn_k: int = 3
    window: int = 10
    samples_per_stream: int = 1
    alpha: float = 1.0


@dataclass(frozen=True)
class GpsConfig:
    altitude: float = 50.0
    walk_sigma: float = 5.0
    range_sigma: float = 0.5
    first_last_only: bool = True


BLOCKS = {
    "world": WorldConfig,
    "radio": PathLossParams,
    "sensor": SensorParams,
    "target": TargetModelParams,
    "pf": PFConfig,
    "kf": KFConfig,
    "track": TrackConfig,
    "rocrssi": RocrssiConfig,
    "gsm": GsmConfig,
    "gps": GpsConfig,
}

TOP_KEYS = {"schema_version", "name", "algorithm", "grid_cell", "n_steps", "seeds", *BLOCKS}


@dataclass(frozen=True)
class Scenario:
    name: str
    algorithms: tuple
    world: WorldConfig
    seeds: tuple
    n_steps: int = 50
    grid_cell: float = None
    radio: PathLossParams = field(default_factory=PathLossParams)
    sensor: SensorParams = field(default_factory=SensorParams)
    target: TargetModelParams = field(default_factory=lambda: TargetModelParams(p_out=0.0))
    pf: PFConfig = field(default_factory=PFConfig)
    kf: KFConfig = field(default_factory=KFConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    rocrssi: RocrssiConfig = field(default_factory=RocrssiConfig)
    gsm: GsmConfig = field(default_factory=GsmConfig)
    gps: GpsConfig = field(default_factory=GpsConfig)

    @property
    def family(self):
        return FAMILIES[self.algorithms[0]]

    def to_dict(self):
        doc = {"schema_version": SCHEMA_VERSION, "name": self.name, "algorithm": list(self.algorithms)}
        doc["n_steps"] = self.n_steps
        doc["seeds"] = list(self.seeds)
        if self.grid_cell is not None:
            doc["grid_cell"] = self.grid_cell
        for block in BLOCKS:
            value = asdict(getattr(self, block))
            doc[block] = {k: list(v) if isinstance(v, tuple) else v for k, v in value.items()}
        return doc

    @property
    def hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _line_of(text, key):
    if text is None:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _build_block(cls, name, raw, text):
    if not isinstance(raw, dict):
        raise ScenarioError(f"block '{name}' must be an object", _line_of(text, name))
    allowed = {f.name for f in fields(cls)}
    for key in raw:
        if key not in allowed:
            raise ScenarioError(f"unknown key '{key}' in block '{name}'", _line_of(text, key))
    kwargs = dict(raw)
    if cls is TrackConfig and kwargs.get("start") is not None:
        kwargs["start"] = tuple(kwargs["start"])
    try:
        obj = cls(**kwargs)
    except (LocalizationError, ValueError, TypeError) as exc:
        raise ScenarioError(f"invalid block '{name}': {exc}", _line_of(text, name)) from None
    return obj


def scenario_from_dict(doc, text=None):
    """Validate a parsed scenario document. ``text`` is used for line numbers."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object", 1)
    for key in doc:
        if key not in TOP_KEYS:
            raise ScenarioError(f"unknown top-level key '{key}'", _line_of(text, key))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version must be {SCHEMA_VERSION}", _line_of(text, "schema_version"))
    if "world" not in doc:
        raise ScenarioError("missing required block 'world'")
    algos = doc.get("algorithm")
    if algos is None:
        raise ScenarioError("missing required key 'algorithm'")
    algos = (algos,) if isinstance(algos, str) else tuple(algos)
    if not algos:
        raise ScenarioError("'algorithm' must name at least one algorithm", _line_of(text, "algorithm"))
    for a in algos:
        if a not in FAMILIES:
            raise ScenarioError(f"unknown algorithm {a!r}; choose from {sorted(FAMILIES)}", _line_of(text, "algorithm"))
    if len({FAMILIES[a] for a in algos}) > 1:
        raise ScenarioError("algorithms from different experiment families cannot share a scenario", _line_of(text, "algorithm"))
    if len(set(algos)) != len(algos):
        raise ScenarioError("duplicate algorithm names", _line_of(text, "algorithm"))

    seeds = doc.get("seeds")
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ScenarioError("'seeds' must be a nonempty list of non-negative integers", _line_of(text, "seeds"))
    unique = list(dict.fromkeys(seeds))
    if len(unique) != len(seeds):
        warnings.warn(f"duplicate seeds removed: {len(seeds) - len(unique)} dropped", UserWarning, stacklevel=3)

    kwargs = {
        "name": str(doc.get("name", "scenario")),
        "algorithms": algos,
        "seeds": tuple(unique),
    }
    n_steps = doc.get("n_steps", 50)
    if not isinstance(n_steps, int) or isinstance(n_steps, bool) or n_steps < 1:
        raise ScenarioError("'n_steps' must be a positive integer", _line_of(text, "n_steps"))
    kwargs["n_steps"] = n_steps
    grid_cell = doc.get("grid_cell")
    if grid_cell is not None and not (isinstance(grid_cell, (int, float)) and grid_cell > 0):
        raise ScenarioError("'grid_cell' must be positive", _line_of(text, "grid_cell"))
    kwargs["grid_cell"] = None if grid_cell is None else float(grid_cell)
    for block, cls in BLOCKS.items():
        if block in doc:
            kwargs[block] = _build_block(cls, block, doc[block], text)
    if "target" not in doc:
        kwargs["target"] = TargetModelParams(p_out=0.0)
    if kwargs["world"].placement not in ("uniform", "grid"):
        raise ScenarioError("world.placement must be 'uniform' or 'grid'", _line_of(text, "placement"))
    return Scenario(**kwargs)


def load_scenario(path):
    """Parse and validate a scenario file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"JSON parse error: {exc.msg} (column {exc.colno})", exc.lineno) from None
    return scenario_from_dict(doc, text)


def shipped_scenario(name):
    """Path of a scenario bundled with the package, e.g. ``"fig2a"``."""
    ref = resources.files("wsnloc") / "scenarios" / f"{name}.scn"
    if not ref.is_file():
        raise FileNotFoundError(f"no shipped scenario named {name!r}")
    return Path(str(ref))


def skeleton(kind="static"):
    """A minimal valid scenario document for ``kind`` (a family name)."""
    base = {"schema_version": SCHEMA_VERSION, "seeds": list(range(5))}
    if kind == "static":
        base.update(name="dvhop-demo", algorithm=["dvhop", "rocrssi"], radio=asdict(PathLossParams(-40.0, 2.0, 2.0)),
                    world=asdict(WorldConfig(10.0, 10.0, 2.0, 10, 50)), grid_cell=0.2)
    elif kind == "track":
        base.update(name="pf-vs-kf", algorithm=["pf", "kf"], n_steps=50,
                    world=asdict(WorldConfig(10.0, 10.0, 2.0, 40, 0)),
                    sensor=asdict(SensorParams(16.0, 1.0, 4, 3.0)),
                    target=asdict(TargetModelParams(0.0, 0.0, 0.3)),
                    pf=asdict(PFConfig()), kf=asdict(KFConfig()))
    elif kind == "gsm":
        base.update(name="gsm-demo", algorithm=["cellid", "knn", "cellsense", "hmm"], n_steps=40,
                    world=asdict(WorldConfig(1000.0, 1000.0, 600.0, 5, 0)),
                    radio=asdict(PathLossParams(-30.0, 3.0, 4.0)), gsm=asdict(GsmConfig()))
    elif kind == "gps":
        base.update(name="gps-demo", algorithm=["gps"], n_steps=30,
                    world=asdict(WorldConfig(100.0, 100.0, 60.0, 4, 20)), gps=asdict(GpsConfig()))
    else:
        raise ContractError(f"unknown scenario kind {kind!r}")
    return base


# ----------------------------------------------------------------- results


@dataclass(frozen=True)
class Record:
    algorithm: str
    key: int
    true_pos: Position
    est_pos: Position
    error: float


@dataclass
class RunResult:
    seed: int
    scenario: str
    scenario_hash: str
    family: str
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    runtime_ms: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    n_anchors: int = 0

    def add(self, algorithm, key, true_pos, est_pos):
        self.records.append(Record(algorithm, int(key), true_pos, est_pos, distance(true_pos, est_pos)))

    def fail(self, algorithm, key, message):
        self.failures.append((algorithm, int(key), message))

    def errors(self, algorithm):
        return np.array([r.error for r in self.records if r.algorithm == algorithm])

    def summary(self):
        out = {}
        algos = list(dict.fromkeys([r.algorithm for r in self.records] + list(self.runtime_ms)))
        for a in algos:
            e = self.errors(a)
            out[a] = {
                "n": int(e.size),
                "mean_error": float(e.mean()) if e.size else float("nan"),
                "rms_error": float(np.sqrt(np.mean(e**2))) if e.size else float("nan"),
                "failures": sum(1 for f in self.failures if f[0] == a),
                "runtime_ms": self.runtime_ms.get(a, 0.0),
            }
            out[a].update(self.extras.get(a, {}))
        return out


def rms_error(estimates, truth):
    """Root mean squared Euclidean error between paired position lists."""
    est = [e.as_array() if isinstance(e, Position) else np.asarray(e, dtype=float) for e in estimates]
    tru = [t.as_array() if isinstance(t, Position) else np.asarray(t, dtype=float) for t in truth]
    if len(est) != len(tru) or not est:
        raise ContractError("estimates and truth must be nonempty and of equal length")
    sq = [float(((a - b) ** 2).sum()) for a, b in zip(est, tru)]
    return math.sqrt(sum(sq) / len(sq))


# ------------------------------------------------------------------ runners


def _stream(seed, k):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k])))


def _timed(result, algorithm, fn):
    t0 = time.perf_counter()
    fn()
    result.runtime_ms[algorithm] = (time.perf_counter() - t0) * 1e3


def _run_static(s, seed, result):
    w = s.world
    world = build_world(w.width, w.height, w.comm_range, w.n_anchors, w.n_unknown, seed, w.placement)
    truth = {n.id: n.pos for n in world.unknowns}
    for k, algo in enumerate(s.algorithms):
        def go(algo=algo, k=k):
            if algo == "dvhop":
                est, fail = dvhop_localize(world)
            else:
                est, fail = rocrssi_localize(world, s.radio, _stream(seed, 10 + k), s.grid_cell, s.rocrssi.radii)
            for nid in sorted(est):
                result.add(algo, nid, truth[nid], est[nid])
            for nid in sorted(fail):
                result.fail(algo, nid, fail[nid])
        _timed(result, algo, go)


def _run_track(s, seed, result):
    w = s.world
    world = build_world(w.width, w.height, w.comm_range, w.n_anchors, 0, seed, w.placement)
    sensors = world.positions[:, :2]
    start = Position(*s.track.start) if s.track.start is not None else Position(w.width / 2, w.height / 2)
    traj = random_walk_trajectory(start, s.n_steps, s.target.motion_step_sigma, (w.width, w.height), _stream(seed, 1))
    truth = traj.positions[:, :2]
    rng_obs = _stream(seed, 2)
    if s.track.observation == "binary":
        d = np.sqrt(((truth[:, None, :] - sensors[None, :, :]) ** 2).sum(-1))
        Z = simulate_decisions(np.maximum(d, D_MIN), s.sensor, rng_obs).astype(float).reshape(len(truth), len(sensors))
    else:
        Z = truth + rng_obs.normal(0.0, s.track.measurement_sigma, size=truth.shape)
    for k, algo in enumerate(s.algorithms):
        def go(algo=algo, k=k):
            if algo == "pf":
                model = ParticleFilterTracker(
                    s.pf.n_particles, s.pf.resample_threshold, s.track.observation, s.sensor, s.target,
                    s.track.measurement_sigma, random_state=_stream(seed, 10 + k),
                )
            else:
                model = KalmanTracker(s.kf.q, s.kf.r, s.track.observation)
            est = model.fit(sensors if s.track.observation == "binary" else None).predict(Z, start)
            for t in range(len(truth)):
                result.add(algo, t, Position(*truth[t]), Position.from_array(est[t]))
        _timed(result, algo, go)


def _gsm_walks(rng, n, length, bounds, sigma):
    walks = []
    for _ in range(n):
        start = Position(*rng.uniform((0, 0), bounds))
        walks.append(random_walk_trajectory(start, length, sigma, bounds, rng).positions)
    return walks


def _run_gsm(s, seed, result):
    w, g = s.world, s.gsm
    bounds = (w.width, w.height)
    world = build_world(w.width, w.height, w.comm_range, w.n_anchors, 0, seed, w.placement)
    towers = world.positions
    rng_walk, rng_rssi = _stream(seed, 1), _stream(seed, 2)
    survey = _gsm_walks(rng_walk, g.n_survey_walks, g.survey_len, bounds, g.walk_sigma)
    survey_rssi = [rssi_matrix(p, towers, s.radio, rng_rssi) for p in survey]
    tests = _gsm_walks(rng_walk, g.n_test_walks, s.n_steps, bounds, g.walk_sigma)
    test_rssi = [rssi_matrix(p, towers, s.radio, rng_rssi) for p in tests]

    def keyed(i, t):
        return i * s.n_steps + t

    for algo in s.algorithms:
        def go(algo=algo):
            if algo == "cellid":
                for i, path in enumerate(tests):
                    for t, p in enumerate(path):
                        d = np.sqrt(((towers - p) ** 2).sum(axis=1))
                        heard = [Position.from_array(c) for c in towers[d <= w.comm_range]]
                        if heard:
                            result.add(algo, keyed(i, t), Position.from_array(p), cellid_locate(heard))
                        else:
                            result.fail(algo, keyed(i, t), "NoEstimateError: no tower heard")
            elif algo == "knn":
                db = FingerprintDb.from_readings(
                    [(Position.from_array(p), dict(enumerate(r))) for path, rs in zip(survey, survey_rssi) for p, r in zip(path, rs)]
                )
                for i, (path, rs) in enumerate(zip(tests, test_rssi)):
                    for t, (p, r) in enumerate(zip(path, rs)):
                        result.add(algo, keyed(i, t), Position.from_array(p), knn_locate(db, r, g.knn_k))
            elif algo == "cellsense":
                samples = [
                    (Position.from_array(p), j, float(v))
                    for path, rs in zip(survey, survey_rssi) for p, r in zip(path, rs) for j, v in enumerate(r)
                ]
                model = CellSenseLocator(bounds, g.cell_size, g.bin_width, g.alpha).fit(samples)
                rng_s = _stream(seed, 3)
                for i, (path, rs) in enumerate(zip(tests, test_rssi)):
                    for t, (p, r) in enumerate(zip(path, rs)):
                        streams = {j: [float(v)] for j, v in enumerate(r)}
                        if g.samples_per_stream > 1:
                            extra = rssi_matrix(np.repeat(p[None], g.samples_per_stream - 1, 0), towers, s.radio, rng_s)
                            for j in streams:
                                streams[j].extend(extra[:, j].tolist())
                        est = model.predict([streams])[0]
                        result.add(algo, keyed(i, t), Position.from_array(p), Position.from_array(est))
            else:
                model = HMMTracker(bounds, g.cell_size, g.bin_width, g.alpha, window=g.window).fit(list(zip(survey, survey_rssi)))
                for i, (path, rs) in enumerate(zip(tests, test_rssi)):
                    est = model.predict(rs)
                    for t, p in enumerate(path):
                        result.add(algo, keyed(i, t), Position.from_array(p), Position.from_array(est[t]))
        _timed(result, algo, go)


def _run_gps(s, seed, result):
    w, g = s.world, s.gps
    world = build_world(w.width, w.height, w.comm_range, w.n_anchors, w.n_unknown, seed, w.placement)
    rng = _stream(seed, 1)
    tracks = {}
    for a in world.anchors:
        start = Position(a.pos.x, a.pos.y, rng.uniform(0.0, g.altitude))
        xy = random_walk_trajectory(start, s.n_steps, g.walk_sigma, (w.width, w.height), rng).positions
        z = np.clip(start.z + np.cumsum(rng.normal(0.0, g.walk_sigma, s.n_steps)), 0.0, g.altitude)
        tracks[a.id] = [Position(x, y, zz) for (x, y, _), zz in zip(xy, z)]
    statics = world.unknowns

    def go():
        log = simulate_beacons(tracks, [n.pos for n in statics], w.comm_range, g.first_last_only)
        rng_r = _stream(seed, 2)
        for sid, node in enumerate(statics):
            kept = log.kept(sid)
            obs = [SphereObservation(m.pos, max(0.0, distance(m.pos, node.pos) + rng_r.normal(0.0, g.range_sigma))) for m in kept]
            try:
                result.add("gps", node.id, node.pos, sphere_locate(obs))
            except LocalizationError as exc:
                result.fail("gps", node.id, f"{type(exc).__name__}: {exc}")
        result.extras["gps"] = {
            "beacon_overhead": log.overhead(max(1, len(tracks))),
            "beacons_discarded": log.discarded,
        }
    _timed(result, "gps", go)


RUNNERS = {"static": _run_static, "track": _run_track, "gsm": _run_gsm, "gps": _run_gps}


def run_seed(s, seed):
    result = RunResult(seed, s.name, s.hash, s.family, n_anchors=s.world.n_anchors)
    RUNNERS[s.family](s, seed, result)
    return result


def run_scenario(s, seeds=None, n_jobs=None):
    """One RunResult per seed, in seed order.

    ``n_jobs`` > 1 runs seeds in parallel processes; each seed owns its RNG
    streams so results do not depend on scheduling.
    """
    seeds = tuple(s.seeds if seeds is None else dict.fromkeys(seeds))
    if n_jobs and n_jobs > 1 and len(seeds) > 1:
        from joblib import Parallel, delayed

        return list(Parallel(n_jobs=n_jobs)(delayed(run_seed)(s, seed) for seed in seeds))
    return [run_seed(s, seed) for seed in seeds]


# ------------------------------------------------------------------ export


def _fmt(v):
    return f"{v:.6f}"


def results_csv(results):
    """CSV text for a list of RunResults."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for res in results:
        for r in res.records:
            w.writerow([res.seed, r.algorithm, r.key, *map(_fmt, r.true_pos), *map(_fmt, r.est_pos), _fmt(r.error)])
    return buf.getvalue()


def plotdata(results):
    """Figure-style series keyed by algorithm.

    Static and GPS runs give error vs anchor count (one point per scenario);
    tracking and GSM runs give mean error per time step across seeds.
    """
    if not results:
        raise ContractError("no results to export")
    family = results[0].family
    algos = list(dict.fromkeys(r.algorithm for res in results for r in res.records))
    series = {}
    if family in ("static", "gps"):
        for a in algos:
            e = np.concatenate([res.errors(a) for res in results])
            series[a] = [[results[0].n_anchors, float(e.mean()) if e.size else None]]
        view = "error_vs_anchors"
    else:
        for a in algos:
            by_t = {}
            for res in results:
                for r in res.records:
                    if r.algorithm == a:
                        by_t.setdefault(r.key, []).append(r.error)
            series[a] = [[k, float(np.mean(v))] for k, v in sorted(by_t.items())]
        view = "error_vs_time"
    return {"scenario": results[0].scenario, "view": view, "series": series}


def summary_doc(results):
    return {
        "scenario": results[0].scenario,
        "scenario_hash": results[0].scenario_hash,
        "family": results[0].family,
        "n_anchors": results[0].n_anchors,
        "seeds": [r.seed for r in results],
        "per_seed": [{"seed": r.seed, "summary": r.summary(), "failures": r.failures} for r in results],
        "table": [asdict(row) for row in comparison_table(results)],
    }


def export(results, out_dir, formats=("csv", "plotdata")):
    """Write ``results.csv`` / ``plotdata.json`` plus ``summary.json`` into ``out_dir``."""
    if not results:
        raise ContractError("no results to export")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out / "results.csv"
            path.write_text(results_csv(results))
        elif fmt == "plotdata":
            path = out / "plotdata.json"
            path.write_text(json.dumps(plotdata(results), indent=1, sort_keys=True) + "\n")
        else:
            raise ContractError(f"unknown export format {fmt!r}")
        written.append(path)
    path = out / "summary.json"
    path.write_text(json.dumps(summary_doc(results), indent=1, sort_keys=True) + "\n")
    written.append(path)
    return written


# ------------------------------------------------------------- comparison


@dataclass(frozen=True)
class ComparisonRow:
    scenario: str
    algorithm: str
    mean_error: float
    rms_error: float
    runtime_ms: float
    seeds: int
    n: int


def comparison_table(results):
    """Pool every record per algorithm across seeds."""
    rows = []
    algos = list(dict.fromkeys(a for res in results for a in res.runtime_ms))
    for a in algos:
        e = np.concatenate([res.errors(a) for res in results])
        rows.append(
            ComparisonRow(
                results[0].scenario,
                a,
                float(e.mean()) if e.size else float("nan"),
                float(np.sqrt(np.mean(e**2))) if e.size else float("nan"),
                float(sum(res.runtime_ms.get(a, 0.0) for res in results)),
                len(results),
                int(e.size),
            )
        )
    return rows


def format_table(rows):
    header = f"{'scenario':<16} {'algorithm':<10} {'mean_err':>10} {'rms_err':>10} {'runtime_ms':>11} {'seeds':>6} {'n':>7}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['scenario']:<16} {r['algorithm']:<10} {r['mean_error']:>10.4f} {r['rms_error']:>10.4f} "
            f"{r['runtime_ms']:>11.1f} {r['seeds']:>6d} {r['n']:>7d}"
        )
    return "\n".join(lines)
