"""GSM fingerprint localization: KNN, gridded histograms, and an HMM tracker."""

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_distribution, check_points, check_positive, check_stochastic
from .exceptions import ContractError, InvalidConfigError, NoEstimateError, NumericalError
from .world import Position

RSSI_FLOOR = -110.0
SCHEMA = "wsnloc.fingerprint/1"


# ------------------------------------------------------------------ grids


@dataclass(frozen=True)
class CellGrid:
    """Row-major square cells; cell ``i`` sits at column ``i % nx``, row ``i // nx``."""

    bounds: tuple
    cell_size: float

    def __post_init__(self):
        check_positive(self.cell_size, "cell_size")
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))

    @property
    def nx(self):
        return math.ceil(self.bounds[0] / self.cell_size)

    @property
    def ny(self):
        return math.ceil(self.bounds[1] / self.cell_size)

    @property
    def n_cells(self):
        return self.nx * self.ny

    def index(self, x, y):
        ix = np.clip(np.floor(np.asarray(x) / self.cell_size).astype(int), 0, self.nx - 1)
        iy = np.clip(np.floor(np.asarray(y) / self.cell_size).astype(int), 0, self.ny - 1)
        return iy * self.nx + ix

    def centers(self):
        idx = np.arange(self.n_cells)
        return np.column_stack(
            [(idx % self.nx + 0.5) * self.cell_size, (idx // self.nx + 0.5) * self.cell_size, np.zeros(len(idx))]
        )

    def center(self, i):
        return Position(*self.centers()[i])

    def neighbor_mask(self, neighborhood="moore"):
        """Boolean (N, N) mask of allowed transitions: self plus adjacent cells."""
        n = self.n_cells
        if neighborhood is None:
            return np.ones((n, n), dtype=bool)
        col = np.arange(n) % self.nx
        row = np.arange(n) // self.nx
        dc = np.abs(col[:, None] - col[None, :])
        dr = np.abs(row[:, None] - row[None, :])
        if neighborhood == "moore":
            return (dc <= 1) & (dr <= 1)
        if neighborhood == "von_neumann":
            return dc + dr <= 1
        raise InvalidConfigError(f"unknown neighborhood {neighborhood!r}")


# ------------------------------------------------------ deterministic (KNN)


@dataclass(frozen=True)
class ReferencePoint:
    loc: Position
    rssi: tuple

    def __post_init__(self):
        if len(self.rssi) == 0:
            raise ContractError("a reference point needs at least one tower reading")
        object.__setattr__(self, "rssi", tuple(float(v) for v in self.rssi))


@dataclass(frozen=True)
class FingerprintDb:
    points: tuple
    towers: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "towers", tuple(self.towers))
        if any(len(p.rssi) != len(self.towers) for p in self.points):
            raise ContractError("every reference point must cover the same towers")

    @classmethod
    def from_readings(cls, readings, towers=None, floor=RSSI_FLOOR):
        """Build from ``(Position, {tower_id: dBm})`` pairs, imputing ``floor``."""
        readings = list(readings)
        if towers is None:
            towers = sorted({t for _, r in readings for t in r})
        points = [ReferencePoint(loc, tuple(r.get(t, floor) for t in towers)) for loc, r in readings]
        return cls(tuple(points), tuple(towers))

    @cached_property
    def _matrix(self):
        m = np.array([p.rssi for p in self.points]).reshape(len(self.points), len(self.towers))
        m.flags.writeable = False
        return m

    @cached_property
    def _locations(self):
        m = np.array([p.loc.as_array() for p in self.points]).reshape(-1, 3)
        m.flags.writeable = False
        return m

    def matrix(self):
        return self._matrix

    def locations(self):
        return self._locations


def rssi_distances(db, reading):
    """Euclidean distance in RSSI space from ``reading`` to every reference point."""
    if isinstance(reading, dict):
        reading = [reading.get(t, RSSI_FLOOR) for t in db.towers]
    reading = np.asarray(reading, dtype=float)
    if reading.shape != (len(db.towers),):
        raise ContractError(f"reading must have {len(db.towers)} entries")
    return np.sqrt(((db.matrix() - reading) ** 2).sum(axis=1))


def knn_locate(db, reading, k=1):
    """Mean location of the ``k`` reference points nearest in RSSI space.

    Ties keep reference-point insertion order.
    """
    if not db.points:
        raise NoEstimateError("fingerprint database is empty")
    check_count(k, "k", minimum=1)
    if k > len(db.points):
        raise ContractError(f"k={k} exceeds the {len(db.points)} reference points")
    order = np.argsort(rssi_distances(db, reading), kind="stable")[:k]
    return Position.from_array(db.locations()[order].mean(axis=0))


class KNNFingerprintRegressor(RegressorMixin, BaseEstimator):
    """KNN over RSSI vectors; ``fit(X, y)`` with X (n, towers) dBm, y (n, 2|3) positions."""

    def __init__(self, k=1):
        self.k = k

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = check_points(y, "y")
        if len(X) != len(y):
            raise ContractError("X and y must have the same number of rows")
        self.db_ = FingerprintDb(
            tuple(ReferencePoint(Position.from_array(p), tuple(r)) for r, p in zip(X, y)),
            tuple(range(X.shape[1])),
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "db_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([knn_locate(self.db_, row, self.k).as_array() for row in X])


# ---------------------------------------------------- probabilistic (CellSense)


@dataclass(frozen=True)
class RssiBins:
    """Fixed-width RSSI bins starting at ``lo``; values outside clamp to the edge bins."""

    lo: float
    width: float
    n_bins: int

    @classmethod
    def covering(cls, values, width):
        values = np.asarray(values, dtype=float)
        lo = math.floor(values.min() / width) * width
        n = max(1, int(math.floor((values.max() - lo) / width)) + 1)
        return cls(lo, float(width), n)

    def index(self, values):
        i = np.floor((np.asarray(values, dtype=float) - self.lo) / self.width).astype(int)
        return np.clip(i, 0, self.n_bins - 1)


@dataclass(frozen=True)
class GridHistogramDb:
    grid: CellGrid
    towers: tuple
    bins: RssiBins
    hist: np.ndarray  # (n_cells, n_towers, n_bins)
    alpha: float = 1.0

    @property
    def bin_width(self):
        return self.bins.width


def build_cellsense(survey, bounds, cell_size, bin_width=5.0, alpha=1.0):
    """Pool survey samples into per-cell, per-tower RSSI histograms.

    ``survey`` is an iterable of ``(Position, tower_id, dBm)``. Each histogram is
    ``(count + alpha) / (n + alpha * n_bins)``; a cell with no samples for a tower
    gets the uniform histogram.
    """
    survey = list(survey)
    if not survey:
        raise ContractError("survey is empty")
    grid = CellGrid(bounds, cell_size)
    towers = tuple(sorted({t for _, t, _ in survey}))
    values = np.array([v for _, _, v in survey], dtype=float)
    bins = RssiBins.covering(values, bin_width)
    counts = np.zeros((grid.n_cells, len(towers), bins.n_bins))
    tower_index = {t: i for i, t in enumerate(towers)}
    xs = np.array([p.x for p, _, _ in survey])
    ys = np.array([p.y for p, _, _ in survey])
    cells = grid.index(xs, ys)
    ti = np.array([tower_index[t] for _, t, _ in survey])
    np.add.at(counts, (cells, ti, bins.index(values)), 1.0)
    n = counts.sum(axis=2, keepdims=True)
    denom = n + alpha * bins.n_bins
    with np.errstate(invalid="ignore", divide="ignore"):
        hist = np.where(denom > 0, (counts + alpha) / denom, 1.0 / bins.n_bins)
    return GridHistogramDb(grid, towers, bins, hist, float(alpha))


def cellsense_log_likelihood(db, streams):
    """Per-cell log of the product over towers and samples of ``p(s_ij | cell)``."""
    tower_index = {t: i for i, t in enumerate(db.towers)}
    ll = np.zeros(db.grid.n_cells)
    for tower, samples in streams.items():
        if tower not in tower_index:
            raise ContractError(f"tower {tower!r} is not in the database")
        b = db.bins.index(samples)
        with np.errstate(divide="ignore"):
            ll += np.log(db.hist[:, tower_index[tower], b]).sum(axis=1)
    return ll


def cellsense_locate(db, streams):
    """Center of the cell maximizing the sample likelihood; ties go to the lowest index."""
    ll = cellsense_log_likelihood(db, streams)
    if not np.isfinite(ll.max()):
        raise NoEstimateError("every cell has zero probability")
    return db.grid.center(int(np.argmax(ll)))


class CellSenseLocator(BaseEstimator):
    """Estimator wrapper: ``fit(survey)``, ``predict(list of {tower: samples})``."""

    def __init__(self, bounds=(1000.0, 1000.0), cell_size=100.0, bin_width=5.0, alpha=1.0):
        self.bounds = bounds
        self.cell_size = cell_size
        self.bin_width = bin_width
        self.alpha = alpha

    def fit(self, survey, y=None):
        self.db_ = build_cellsense(survey, self.bounds, self.cell_size, self.bin_width, self.alpha)
        return self

    def predict(self, streams_list):
        check_is_fitted(self, "db_")
        return np.array([cellsense_locate(self.db_, s).as_array() for s in streams_list]).reshape(-1, 3)


# -------------------------------------------------------------------- HMM


@dataclass(frozen=True)
class HmmModel:
    A: np.ndarray
    B: np.ndarray
    pi: np.ndarray
    centers: np.ndarray = None

    def __post_init__(self):
        A = check_stochastic(self.A, "A")
        B = check_stochastic(self.B, "B")
        pi = check_distribution(self.pi, "pi")
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0] or pi.shape != (A.shape[0],):
            raise ContractError("A, B and pi disagree on the number of states")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", pi)
        if self.centers is not None:
            object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_symbols(self):
        return self.B.shape[1]


def hmm_steady_state(A, tol=1e-12, max_iter=200_000):
    """Stationary distribution ``pi`` with ``pi A = pi``.

    Power iteration runs on the lazy chain ``(A + I) / 2``, which shares the
    stationary distribution but is aperiodic. Starting from uniform, ``A = I``
    returns the uniform distribution.
    """
    A = check_stochastic(A, "A")
    n = A.shape[0]
    lazy = 0.5 * (A + np.eye(n))
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < tol:
            pi = nxt
            break
        pi = nxt
    if np.abs(pi @ A - pi).max() > 1e-10:
        # slow mixing; solve the balance equations directly
        M = np.vstack([A.T - np.eye(n), np.ones(n)])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        pi, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
    return pi


def hmm_build(traces, grid, alphabet, alpha=1.0, neighborhood="moore", initial=None):
    """Estimate (A, B, pi) by counting over ``(cells, symbols)`` traces.

    ``grid`` is a :class:`CellGrid` (transitions masked to each cell's
    neighborhood) or a state count (no mask). ``alphabet`` is the symbol count.
    Counts are Laplace-smoothed with ``alpha``; ``pi`` is the steady state of A
    unless ``initial`` is given.
    """
    traces = list(traces)
    if not traces:
        raise ContractError("need at least one trace")
    if isinstance(grid, CellGrid):
        n = grid.n_cells
        mask = grid.neighbor_mask(neighborhood)
        centers = grid.centers()
    else:
        n = check_count(grid, "n_states", minimum=1)
        mask = np.ones((n, n), dtype=bool)
        centers = None
    n_sym = check_count(alphabet if np.isscalar(alphabet) else len(alphabet), "alphabet", minimum=1)

    trans = np.zeros((n, n))
    emit = np.zeros((n, n_sym))
    for cells, obs in traces:
        cells = np.asarray(cells, dtype=int)
        obs = np.asarray(obs, dtype=int)
        if len(cells) != len(obs):
            raise ContractError("cell and observation sequences differ in length")
        if len(cells) and (cells.min() < 0 or cells.max() >= n or obs.min() < 0 or obs.max() >= n_sym):
            raise ContractError("trace references a state or symbol outside the model")
        np.add.at(trans, (cells[:-1], cells[1:]), 1.0)
        np.add.at(emit, (cells, obs), 1.0)

    trans = np.where(mask, trans + alpha, 0.0)
    A = trans / trans.sum(axis=1, keepdims=True)
    emit = emit + alpha
    B = emit / emit.sum(axis=1, keepdims=True)
    pi = hmm_steady_state(A) if initial is None else check_distribution(initial, "initial")
    return HmmModel(A, B, pi, centers)


def hmm_predict(belief, A):
    """One prediction step: ``belief @ A``."""
    belief = check_distribution(belief, "belief")
    out = belief @ np.asarray(A, dtype=float)
    return out / out.sum()


def hmm_correct(belief, obs, B):
    """Bayes correction with the emission column of ``obs``, renormalized."""
    B = np.asarray(B, dtype=float)
    if not 0 <= obs < B.shape[1]:
        raise ContractError(f"symbol {obs} outside the alphabet")
    post = np.asarray(belief, dtype=float) * B[:, obs]
    total = post.sum()
    if total <= 0:
        raise NumericalError("observation has zero probability under every state")
    return post / total


def hmm_filter(model, obs):
    """Forward filter: beliefs after each correction, shape (T, N)."""
    belief = model.pi
    out = []
    for t, o in enumerate(obs):
        if t > 0:
            belief = hmm_predict(belief, model.A)
        belief = hmm_correct(belief, int(o), model.B)
        out.append(belief)
    return np.array(out)


def path_log_prob(model, path, obs):
    """Joint log probability of a state path and the observation sequence."""
    with np.errstate(divide="ignore"):
        lp = np.log(model.pi[path[0]]) + np.log(model.B[path[0], obs[0]])
        for t in range(1, len(path)):
            lp += np.log(model.A[path[t - 1], path[t]]) + np.log(model.B[path[t], obs[t]])
    return float(lp)


def hmm_track(model, obs):
    """Viterbi decoding; returns ``(path, position of the final state)``.

    Predecessor ties resolve to the lowest state index. The position is None
    when the model carries no cell geometry.
    """
    obs = np.asarray(obs, dtype=int)
    if obs.ndim != 1 or len(obs) < 1:
        raise ContractError("observation sequence must have length >= 1")
    if obs.min() < 0 or obs.max() >= model.n_symbols:
        raise ContractError("observation symbol outside the alphabet")
    with np.errstate(divide="ignore"):
        logA = np.log(model.A)
        logB = np.log(model.B)
        delta = np.log(model.pi) + logB[:, obs[0]]
    T, N = len(obs), model.n_states
    back = np.zeros((T, N), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + logA
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(N)] + logB[:, obs[t]]
    path = np.zeros(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    path = [int(s) for s in path]
    pos = None if model.centers is None else Position.from_array(model.centers[path[-1]])
    return path, pos


@dataclass(frozen=True)
class ServingTowerQuantizer:
    """Observation symbol = (strongest tower, RSSI bin of that tower)."""

    n_towers: int
    bins: RssiBins

    @property
    def n_symbols(self):
        return self.n_towers * self.bins.n_bins

    def encode(self, rssi):
        """Map (T, n_towers) dBm readings to T integer symbols."""
        rssi = np.atleast_2d(np.asarray(rssi, dtype=float))
        serving = np.argmax(rssi, axis=1)
        level = rssi[np.arange(len(rssi)), serving]
        return serving * self.bins.n_bins + self.bins.index(level)


class HMMTracker(BaseEstimator):
    """HMM localization over a cell grid from serving-tower RSSI.

    ``fit`` takes a list of ``(positions (T, 2|3), rssi (T, n_towers))`` survey
    walks. ``predict`` takes one rssi matrix and returns the final-cell center
    of a Viterbi decode over the last ``window`` observations at every step.
    """

    def __init__(self, bounds=(1000.0, 1000.0), cell_size=100.0, bin_width=5.0, alpha=1.0, neighborhood="moore", window=10):
        self.bounds = bounds
        self.cell_size = cell_size
        self.bin_width = bin_width
        self.alpha = alpha
        self.neighborhood = neighborhood
        self.window = window

    def fit(self, walks, y=None):
        walks = [(check_points(p, "positions"), np.atleast_2d(np.asarray(r, dtype=float))) for p, r in walks]
        if not walks:
            raise ContractError("need at least one survey walk")
        grid = CellGrid(self.bounds, self.cell_size)
        levels = np.concatenate([r.max(axis=1) for _, r in walks])
        self.quantizer_ = ServingTowerQuantizer(walks[0][1].shape[1], RssiBins.covering(levels, self.bin_width))
        traces = [(grid.index(p[:, 0], p[:, 1]), self.quantizer_.encode(r)) for p, r in walks]
        self.grid_ = grid
        self.model_ = hmm_build(traces, grid, self.quantizer_.n_symbols, self.alpha, self.neighborhood)
        return self

    def predict(self, rssi):
        check_is_fitted(self, "model_")
        obs = self.quantizer_.encode(rssi)
        out = np.zeros((len(obs), 3))
        for t in range(len(obs)):
            _, pos = hmm_track(self.model_, obs[max(0, t + 1 - self.window) : t + 1])
            out[t] = pos.as_array()
        return out


# ---------------------------------------------------------------- file I/O

SURVEY_COLUMNS = ("t", "x", "y", "tower_id", "rssi_dbm")


def write_survey(path, rows):
    """Write ``(t, x, y, tower_id, rssi_dbm)`` rows to a survey CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SURVEY_COLUMNS)
        for t, x, y, tower, rssi in rows:
            w.writerow([int(t), f"{x:.6f}", f"{y:.6f}", tower, f"{rssi:.6f}"])


def read_survey(path):
    """Read a survey CSV into a list of ``(t, Position, tower_id, dBm)``."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SURVEY_COLUMNS:
            raise InvalidConfigError(f"survey columns must be {','.join(SURVEY_COLUMNS)}")
        for row in reader:
            tower = row["tower_id"]
            tower = int(tower) if tower.lstrip("-").isdigit() else tower
            out.append((int(row["t"]), Position(float(row["x"]), float(row["y"])), tower, float(row["rssi_dbm"])))
    return out


def survey_readings(rows):
    """Group survey rows by ``t`` into ``(Position, {tower: dBm})`` fingerprints."""
    grouped = {}
    for t, pos, tower, rssi in rows:
        loc, readings = grouped.setdefault(t, (pos, {}))
        readings[tower] = rssi
    return [grouped[t] for t in sorted(grouped)]


def save_db(db, path):
    """Serialize a FingerprintDb or GridHistogramDb to versioned JSON."""
    if isinstance(db, FingerprintDb):
        doc = {
            "schema": SCHEMA,
            "kind": "knn",
            "towers": list(db.towers),
            "points": [{"loc": list(p.loc), "rssi": list(p.rssi)} for p in db.points],
        }
    elif isinstance(db, GridHistogramDb):
        doc = {
            "schema": SCHEMA,
            "kind": "cellsense",
            "bounds": list(db.grid.bounds),
            "cell_size": db.grid.cell_size,
            "towers": list(db.towers),
            "bins": {"lo": db.bins.lo, "width": db.bins.width, "n_bins": db.bins.n_bins},
            "alpha": db.alpha,
            "hist": db.hist.tolist(),
        }
    else:
        raise TypeError(f"cannot serialize {type(db).__name__}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_db(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != SCHEMA:
        raise InvalidConfigError(f"unsupported fingerprint schema {doc.get('schema')!r}")
    if doc["kind"] == "knn":
        points = [ReferencePoint(Position(*p["loc"]), tuple(p["rssi"])) for p in doc["points"]]
        return FingerprintDb(tuple(points), tuple(doc["towers"]))
    if doc["kind"] == "cellsense":
        b = doc["bins"]
        return GridHistogramDb(
            CellGrid(tuple(doc["bounds"]), doc["cell_size"]),
            tuple(doc["towers"]),
            RssiBins(b["lo"], b["width"], b["n_bins"]),
            np.asarray(doc["hist"], dtype=float),
            doc["alpha"],
        )
    raise InvalidConfigError(f"unknown fingerprint kind {doc['kind']!r}")
