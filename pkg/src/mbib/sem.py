"""Linear structural equation models: sampling, exact implied moments, shifts.

Each node v satisfies

    X_v = sum_p w_{p v} X_p + b_v + eps_v

with independent noise eps_v of standard deviation sigma_v from a gaussian,
laplace, or student_t family (scales are variance-matched, so
implied_covariance is exact for every family).

Sampling draws each node's noise from its own seed substream keyed on the
node NAME, so declared column order never perturbs the values.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InvalidMechanism,
    MissingColumn,
    NonFiniteData,
    SingularSystem,
    UnknownNode,
    UnknownPreset,
    WeightKeyMismatch,
)
from .graph import Dag

NOISE_FAMILIES = ("gaussian", "laplace", "student_t")


@dataclass(frozen=True)
class Mechanism:
    """Structural assignment for one node.

    weights are keyed by parent name and must match the node's parent set
    exactly. noise_std is the noise standard deviation for every family;
    student_t additionally needs df > 2 for the variance to exist.
    """

    weights: dict = field(default_factory=dict)
    intercept: float = 0.0
    noise_std: float = 1.0
    noise_family: str = "gaussian"
    df: float | None = None

    def __post_init__(self):
        if self.noise_family not in NOISE_FAMILIES:
            raise InvalidMechanism(
                f"noise_family must be one of {NOISE_FAMILIES}, got {self.noise_family!r}"
            )
        if not np.isfinite(self.noise_std) or self.noise_std <= 0.0:
            raise InvalidMechanism(f"noise_std must be positive, got {self.noise_std!r}")
        if self.noise_family == "student_t":
            if self.df is None or not np.isfinite(self.df) or self.df <= 2.0:
                raise InvalidMechanism(
                    f"student_t noise needs df > 2, got {self.df!r}"
                )
        if not np.isfinite(self.intercept):
            raise InvalidMechanism("intercept must be finite")
        for k, w in self.weights.items():
            if not np.isfinite(w):
                raise InvalidMechanism(f"weight for parent {k!r} must be finite")

    def replace(self, **changes):
        base = {
            "weights": dict(self.weights),
            "intercept": self.intercept,
            "noise_std": self.noise_std,
            "noise_family": self.noise_family,
            "df": self.df,
        }
        base.update(changes)
        return Mechanism(**base)


class SemSpec:
    """A DAG plus one Mechanism per node."""

    def __init__(self, dag, mechanisms):
        if not isinstance(dag, Dag):
            raise ConfigError("dag must be a Dag")
        self.dag = dag
        mechs = {}
        for v in dag.nodes:
            if v not in mechanisms:
                raise ConfigError(f"no mechanism for node {v!r}")
            m = mechanisms[v]
            expected = set(dag.parents(v))
            got = set(m.weights)
            if expected != got:
                raise WeightKeyMismatch(v, expected, got)
            mechs[v] = m
        extra = set(mechanisms) - set(dag.nodes)
        if extra:
            raise UnknownNode(sorted(extra)[0])
        self.mechanisms = mechs

    def mechanism(self, node):
        if node not in self.mechanisms:
            raise UnknownNode(node)
        return self.mechanisms[node]

    def changed_nodes(self, other):
        """Nodes whose mechanism differs between self and other (same DAG)."""
        if self.dag != other.dag:
            raise ConfigError("specs must share a DAG to be compared")
        return [v for v in self.dag.nodes if self.mechanisms[v] != other.mechanisms[v]]


@dataclass(frozen=True)
class ShiftSpec:
    """Per-node mechanism overrides applied by apply_shift.

    overrides maps node name -> dict of Mechanism field replacements
    (any of weights, intercept, noise_std, noise_family, df).
    """

    overrides: dict = field(default_factory=dict)

    _FIELDS = ("weights", "intercept", "noise_std", "noise_family", "df")

    def __post_init__(self):
        for node, changes in self.overrides.items():
            for key in changes:
                if key not in self._FIELDS:
                    raise ConfigError(f"unknown mechanism field {key!r} for node {node!r}")


def apply_shift(spec, shift):
    """Return a new SemSpec with the shift's overrides applied (pure)."""
    mechs = dict(spec.mechanisms)
    for node, changes in shift.overrides.items():
        if node not in mechs:
            raise UnknownNode(node)
        mechs[node] = mechs[node].replace(**changes)
    return SemSpec(spec.dag, mechs)


class Dataset:
    """Named columns over an (n, p) float matrix; all values finite."""

    def __init__(self, columns, values):
        columns = tuple(columns)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"values must be 2-d, got shape {values.shape}")
        if values.shape[1] != len(columns):
            raise DataError(
                f"{len(columns)} columns declared but values have {values.shape[1]}"
            )
        if len(set(columns)) != len(columns):
            raise DataError("duplicate column names")
        if values.shape[0] < 1:
            raise DataError("dataset needs at least one row")
        if not np.all(np.isfinite(values)):
            raise NonFiniteData("dataset contains non-finite values")
        self.columns = columns
        self.values = values
        self._index = {c: i for i, c in enumerate(columns)}

    @property
    def n(self):
        return self.values.shape[0]

    def __contains__(self, name):
        return name in self._index

    def column(self, name):
        if name not in self._index:
            raise MissingColumn(name)
        return self.values[:, self._index[name]].copy()

    def matrix(self, names):
        """Columns stacked in the requested order, shape (n, len(names))."""
        idx = []
        for name in names:
            if name not in self._index:
                raise MissingColumn(name)
            idx.append(self._index[name])
        return self.values[:, idx].copy()

    def subset(self, names):
        return Dataset(tuple(names), self.matrix(names))

    def drop(self, name):
        if name not in self._index:
            raise MissingColumn(name)
        keep = [c for c in self.columns if c != name]
        return self.subset(keep)

    def with_column(self, name, values):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.shape[0] != self.n:
            raise DataError("column length mismatch")
        if name in self._index:
            raise DataError(f"column {name!r} already present")
        return Dataset(self.columns + (name,), np.column_stack([self.values, values]))


def dataset_to_csv(data, path):
    """Write header of column names then one row per sample (repr floats)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.columns)
        for row in data.values:
            w.writerow([repr(float(x)) for x in row])


def dataset_from_csv(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            return _dataset_from_reader(csv.reader(fh), path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def dataset_from_csv_text(text):
    return _dataset_from_reader(csv.reader(io.StringIO(text)), "<string>")


def _dataset_from_reader(reader, origin):
    rows = [row for row in reader if row]
    if len(rows) < 2:
        raise DataError(f"{origin}: need a header and at least one data row")
    header = [c.strip() for c in rows[0]]
    try:
        values = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"{origin}: non-numeric cell: {exc}") from exc
    if values.shape[1] != len(header):
        raise DataError(f"{origin}: ragged rows")
    return Dataset(header, values)


def derive_seed(base, tag):
    """Deterministic, platform-stable sub-seed for a named purpose."""
    digest = hashlib.sha256(f"{int(base)}|{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _node_rng(master_seed, node_name):
    """Independent substream per node, keyed on the node NAME.

    Uses a hash of (seed, name) as SeedSequence entropy so the stream depends
    only on the name, never on declared or topological position.
    """
    digest = hashlib.sha256(f"{int(master_seed)}|{node_name}".encode("utf-8")).digest()
    entropy = int.from_bytes(digest[:16], "big")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _draw_noise(mech, n, rng):
    s = mech.noise_std
    if mech.noise_family == "gaussian":
        return rng.normal(0.0, s, size=n)
    if mech.noise_family == "laplace":
        # Var(Laplace(b)) = 2 b^2
        return rng.laplace(0.0, s / np.sqrt(2.0), size=n)
    # student_t, df > 2: Var(t_df) = df / (df - 2)
    scale = s * np.sqrt((mech.df - 2.0) / mech.df)
    return rng.standard_t(mech.df, size=n) * scale


def sample(spec, n, seed):
    """Ancestral sampling; columns come back in topological order."""
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    order = spec.dag.topological_order()
    cols = {}
    for v in order:
        mech = spec.mechanisms[v]
        x = _draw_noise(mech, n, _node_rng(seed, v))
        x = x + mech.intercept
        for p, w in mech.weights.items():
            x = x + w * cols[p]
        cols[v] = x
    return Dataset(tuple(order), np.column_stack([cols[v] for v in order]))


@dataclass(frozen=True)
class ImpliedMoments:
    """Exact first and second moments of a SemSpec, in topological order."""

    names: tuple
    mean: np.ndarray
    cov: np.ndarray

    def index(self, names):
        pos = {v: i for i, v in enumerate(self.names)}
        out = []
        for v in names:
            if v not in pos:
                raise UnknownNode(v)
            out.append(pos[v])
        return np.array(out, dtype=int)

    def mean_of(self, names):
        return self.mean[self.index(names)]

    def cov_block(self, rows, cols):
        ri = self.index(rows)
        ci = self.index(cols)
        return self.cov[np.ix_(ri, ci)]


def implied_covariance(spec):
    """Solve the linear system exactly: Sigma = (I-A)^-T D (I-A)^-1.

    A[parent, child] holds the edge weight with nodes in topological order,
    so I - A^T is unit lower triangular and the solve cannot be singular.
    """
    order = spec.dag.topological_order()
    p = len(order)
    pos = {v: i for i, v in enumerate(order)}
    A = np.zeros((p, p))
    D = np.zeros((p, p))
    b = np.zeros(p)
    for v in order:
        mech = spec.mechanisms[v]
        j = pos[v]
        D[j, j] = mech.noise_std ** 2
        b[j] = mech.intercept
        for par, w in mech.weights.items():
            A[pos[par], j] = w
    M = np.eye(p) - A.T
    try:
        inv = np.linalg.solve(M, np.eye(p))
    except np.linalg.LinAlgError as exc:  # defensive; unreachable for a DAG
        raise SingularSystem(str(exc)) from exc
    mean = inv @ b
    cov = inv @ D @ inv.T
    cov = (cov + cov.T) / 2.0
    return ImpliedMoments(tuple(order), mean, cov)


def exogenous_stretch(spec, target, s):
    """Scale noise_std of every parentless node except `target` by s."""
    if s <= 0.0 or not np.isfinite(s):
        raise ConfigError(f"stretch factor must be positive, got {s!r}")
    if target not in spec.dag:
        raise UnknownNode(target)
    overrides = {}
    for v in spec.dag.nodes:
        if v != target and not spec.dag.parents(v):
            overrides[v] = {"noise_std": spec.mechanisms[v].noise_std * float(s)}
    return apply_shift(spec, ShiftSpec(overrides))


@dataclass(frozen=True)
class PresetPair:
    """Source and target SemSpecs sharing a DAG, plus experiment metadata.

    target_mechanism_shifted flags pairs that deliberately change the
    target node's own mechanism (so its conditional given the blanket is
    NOT transportable).
    """

    name: str
    source: SemSpec
    target: SemSpec
    dag: Dag
    target_node: str
    target_mechanism_shifted: bool


def _motivating(params):
    p = {
        "k": 3,
        "m": 50,
        "r": 20,
        "w": (2.0, 1.0, 1.0),
        "sigma_t": 1.0,
        "sigma_s": 1.0,
        "sigma_n": 1.0,
        "a0": 1.0,
        "a1": -1.0,
        "b0": 0.0,
        "b1": 5.0,
    }
    p.update(params)
    k, m, r = int(p["k"]), int(p["m"]), int(p["r"])
    w = tuple(float(x) for x in p["w"])
    if len(w) != k:
        raise ConfigError(f"w must have k={k} entries, got {len(w)}")
    causes = [f"C{i}" for i in range(1, k + 1)]
    proxies = [f"S{j}" for j in range(1, m + 1)]
    noise = [f"N{l}" for l in range(1, r + 1)]
    nodes = causes + ["T"] + proxies + noise
    edges = [(c, "T") for c in causes]
    edges += [(c, s) for s in proxies for c in causes]
    dag = Dag(nodes, edges)

    def mechs(a, b):
        out = {c: Mechanism() for c in causes}
        out["T"] = Mechanism(
            weights={c: wi for c, wi in zip(causes, w)}, noise_std=p["sigma_t"]
        )
        for s in proxies:
            out[s] = Mechanism(
                weights={c: a * wi for c, wi in zip(causes, w)}, noise_std=p["sigma_s"]
            )
        for nname in noise:
            out[nname] = Mechanism(intercept=b, noise_std=p["sigma_n"])
        return out

    source = SemSpec(dag, mechs(float(p["a0"]), float(p["b0"])))
    target = SemSpec(dag, mechs(float(p["a1"]), float(p["b1"])))
    return PresetPair("motivating", source, target, dag, "T", False)


_SEVEN_NODES = ("C1", "C2", "Z", "X", "T", "P", "Y")
_SEVEN_EDGES = (
    ("C1", "Z"),
    ("C2", "Z"),
    ("C1", "X"),
    ("C2", "X"),
    ("C1", "T"),
    ("X", "T"),
    ("Z", "T"),
    ("T", "P"),
    ("T", "Y"),
)


def _seven_node_source():
    dag = Dag(_SEVEN_NODES, _SEVEN_EDGES)
    mechs = {v: Mechanism(weights={p: 1.0 for p in dag.parents(v)}) for v in dag.nodes}
    return dag, SemSpec(dag, mechs)


def _seven_node_covariate(params):
    p = {"shift_mean": 5.0, "shift_std": 2.0}
    p.update(params)
    dag, source = _seven_node_source()
    shift = ShiftSpec(
        {"C2": {"intercept": float(p["shift_mean"]), "noise_std": float(p["shift_std"])}}
    )
    return PresetPair(
        "seven_node_covariate", source, apply_shift(source, shift), dag, "T", False
    )


def _seven_node_target_shift(params):
    p = {"shift_mean": 5.0, "shift_std": 2.0, "t_offset": 2.0, "t_std": 2.0}
    p.update(params)
    dag, source = _seven_node_source()
    shift = ShiftSpec(
        {
            "C1": {"intercept": float(p["shift_mean"]), "noise_std": float(p["shift_std"])},
            "T": {"intercept": float(p["t_offset"]), "noise_std": float(p["t_std"])},
        }
    )
    return PresetPair(
        "seven_node_target_shift", source, apply_shift(source, shift), dag, "T", True
    )


_PRESETS = {
    "motivating": _motivating,
    "seven_node_covariate": _seven_node_covariate,
    "seven_node_target_shift": _seven_node_target_shift,
}


def preset(name, params=None):
    """Named source/target SemSpec pairs used throughout the experiments."""
    if name not in _PRESETS:
        raise UnknownPreset(name)
    return _PRESETS[name](dict(params or {}))


def preset_names():
    return sorted(_PRESETS)
