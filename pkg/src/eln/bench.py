"""Synthetic problems, noise models, metrics, dataset plumbing and grid-search CV."""
from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .itl import make_gmcc, make_kmpe, make_krsl, make_mcc, make_mcc_vc, make_mmcc, make_qmee
from .pdf_match import ElnFitConfig
from .solver import AdaptiveEln, FixedEln, Irls, RidgeMse, SolverConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


# ---------------------------------------------------------------- noise

@dataclass(frozen=True)
class Gauss:
    mean: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise ValueError("variance must be > 0")

    def sample(self, rng, n):
        return rng.normal(self.mean, math.sqrt(self.var), n)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, n)


@dataclass(frozen=True)
class GaussMixture:
    components: tuple[tuple[float, float, float], ...]  # (weight, mean, variance)

    def __post_init__(self):
        w = np.array([c[0] for c in self.components])
        if w.size == 0 or np.any(w <= 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-12):
            raise ValueError("mixture weights must be positive and sum to 1")
        if any(c[2] <= 0 for c in self.components):
            raise ValueError("variance must be > 0")

    def sample(self, rng, n):
        w = np.array([c[0] for c in self.components])
        mu = np.array([c[1] for c in self.components])
        sd = np.sqrt([c[2] for c in self.components])
        k = rng.choice(w.size, size=n, p=w)
        return rng.normal(mu[k], sd[k])


@dataclass(frozen=True)
class NoiseSpec:
    """``v = (1 - eta) A + eta B`` with ``eta ~ Bernoulli(p_outlier)``; variances, not std devs."""

    p_outlier: float
    inner: Gauss | Uniform | GaussMixture
    outlier: Gauss = Gauss(0.0, 100.0)

    def __post_init__(self):
        if not 0.0 <= self.p_outlier <= 1.0:
            raise ValueError("p_outlier must lie in [0, 1]")


CASES: dict[int, NoiseSpec] = {
    1: NoiseSpec(0.1, GaussMixture(((0.5, -5.0, 0.1), (0.5, 5.0, 0.1)))),
    2: NoiseSpec(0.1, GaussMixture(((1 / 3, -3.0, 0.1), (2 / 3, 5.0, 0.1)))),
    3: NoiseSpec(0.1, Gauss(0.0, 0.1)),
    4: NoiseSpec(0.1, Uniform(0.0, 1.0)),
}

# noise added to normalized regression targets
TABULAR_NOISE = NoiseSpec(0.1, GaussMixture(((0.5, -0.8, 0.01), (0.5, 0.8, 0.01))), Gauss(0.0, 10.0))


def sample_noise(spec: NoiseSpec, N: int, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    eta = rng.random(N) < spec.p_outlier
    a = spec.inner.sample(rng, N)
    b = spec.outlier.sample(rng, N)
    return np.where(eta, b, a)


def gen_linear_problem(N: int, beta, seed) -> tuple[np.ndarray, np.ndarray]:
    beta = np.asarray(beta, dtype=float)
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(N, beta.size))
    return X, X @ beta


# ---------------------------------------------------------------- metrics

def rmsd(beta_hat, beta_true) -> float:
    diff = np.asarray(beta_hat, dtype=float).ravel() - np.asarray(beta_true, dtype=float).ravel()
    return math.sqrt(float(diff @ diff) / diff.size)


def rmse(predictions, targets) -> float:
    diff = np.asarray(predictions, dtype=float) - np.asarray(targets, dtype=float)
    return math.sqrt(float(np.mean(diff * diff)))


def accuracy(predicted, labels) -> float:
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    if predicted.shape != labels.shape or predicted.size == 0:
        raise ValueError("label vectors must be non-empty and of equal length")
    return float(np.mean(predicted == labels))


# ---------------------------------------------------------------- label noise

@dataclass(frozen=True)
class LabelNoiseSpec:
    epsilon: float
    classes: int

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("noise rate must lie in [0, 1]")
        if self.classes < 2:
            raise ValueError("need at least two classes")


def transition_matrix(spec: LabelNoiseSpec) -> np.ndarray:
    """Row-stochastic ``Q``: class ``i`` stays with ``1 - eps`` and flips to ``i + 1 mod C`` with ``eps``."""
    C = spec.classes
    Q = (1.0 - spec.epsilon) * np.eye(C)
    Q[np.arange(C), (np.arange(C) + 1) % C] += spec.epsilon
    return Q


def apply_label_noise(labels, spec: LabelNoiseSpec, seed) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if np.any((labels < 0) | (labels >= spec.classes)):
        raise ValueError("labels must lie in [0, classes)")
    flip = np.random.default_rng(seed).random(labels.size) < spec.epsilon
    return np.where(flip, (labels + 1) % spec.classes, labels)


# ---------------------------------------------------------------- datasets

def load_csv(path, n_targets: int = 1) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read a headered numeric CSV whose last ``n_targets`` columns are targets."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    header, body = rows[0], rows[1:]
    if n_targets < 1 or n_targets >= len(header):
        raise ValueError(f"{path}: bad target column count {n_targets}")
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite value")
    return header, data[:, :-n_targets], data[:, -n_targets:]


@dataclass
class MinMaxScaler:
    lo: float = 0.0
    hi: float = 1.0
    data_min: np.ndarray | None = None
    data_max: np.ndarray | None = None

    def fit(self, X):
        X = np.asarray(X, dtype=float)
        self.data_min = X.min(axis=0)
        self.data_max = X.max(axis=0)
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        span = self.data_max - self.data_min
        safe = np.where(span > 0, span, 1.0)
        out = self.lo + (self.hi - self.lo) * (X - self.data_min) / safe
        # constant columns map to 0
        return np.where(span > 0, out, 0.0)

    def fit_transform(self, X):
        return self.fit(X).transform(X)


def normalize(train, test=None, lo: float = 0.0, hi: float = 1.0):
    """Min-max scale using statistics of ``train`` only."""
    scaler = MinMaxScaler(lo, hi).fit(train)
    if test is None:
        return scaler.transform(train)
    return scaler.transform(train), scaler.transform(test)


def one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    out = np.zeros(labels.shape + (classes,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def split(n: int, train_fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(n)
    k = int(round(train_fraction * n))
    return perm[:k], perm[k:]


def gaussian_blobs(N: int, seed, separation: float = 2.0, dim: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Two isotropic unit-variance Gaussian classes with means ``+-separation/2`` on the first axis."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, N)
    X = rng.standard_normal((N, dim))
    X[:, 0] += np.where(labels == 1, separation / 2.0, -separation / 2.0)
    return X, labels


# ---------------------------------------------------------------- grid search

class Objective(str, enum.Enum):
    SSE = "sse"
    ERROR_RATE = "error_rate"


@dataclass
class GridSearchSpec:
    grids: dict[str, Sequence]
    folds: int = 10
    stratified: bool = False
    objective: Objective = Objective.SSE
    seed: int = 0

    def __post_init__(self):
        self.objective = Objective(self.objective)
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not self.grids or any(len(v) == 0 for v in self.grids.values()):
            raise ValueError("every grid must be non-empty")

    def points(self) -> list[dict]:
        names = list(self.grids)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.grids[n] for n in names))]


@dataclass
class GridResult:
    best: dict
    best_score: float
    table: list[dict] = field(default_factory=list)


def fold_ids(n: int, folds: int, seed, strata=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    ids = np.empty(n, dtype=int)
    if strata is None:
        ids[rng.permutation(n)] = np.arange(n) % folds
        return ids
    strata = np.asarray(strata)
    offset = 0
    for s in np.unique(strata):
        members = rng.permutation(np.flatnonzero(strata == s))
        ids[members] = (np.arange(members.size) + offset) % folds
        offset += members.size
    return ids


def eval_seed(seed: int, point: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, point, fold]).generate_state(1)[0])


# trainer(params, X_train, y_train, X_val, seed) -> predictions on X_val
Trainer = Callable[[dict, np.ndarray, np.ndarray, np.ndarray, int], np.ndarray]


def _cv_scores(spec: GridSearchSpec, trainer: Trainer, params: dict, point: int, X, y, labels, salt: int) -> list[float]:
    strata = labels if spec.stratified else None
    ids = fold_ids(X.shape[0], spec.folds, [spec.seed, salt], strata)
    scores = []
    for k in range(spec.folds):
        val = ids == k
        try:
            pred = trainer(params, X[~val], y[~val], X[val], eval_seed(spec.seed, point, salt * spec.folds + k))
        except np.linalg.LinAlgError:
            scores.append(math.inf)
            continue
        if spec.objective is Objective.SSE:
            scores.append(float(np.sum((np.asarray(pred).reshape(y[val].shape) - y[val]) ** 2)))
        else:
            pred_lab = np.argmax(np.asarray(pred).reshape(int(val.sum()), -1), axis=1)
            scores.append(1.0 - accuracy(pred_lab, np.asarray(labels)[val]))
    return scores


def grid_search(spec: GridSearchSpec, trainer: Trainer, X, y, labels=None) -> GridResult:
    """k-fold CV over every grid point; ties go to the earliest point in grid order.

    ``labels`` are used for stratification and the error-rate objective;
    for the SSE objective ``y`` holds the targets.
    """
    return grid_search_pooled(spec, trainer, [(X, y, labels)])


def grid_search_pooled(spec: GridSearchSpec, trainer: Trainer, datasets, points=None) -> GridResult:
    """Like :func:`grid_search`, averaging the CV objective over several ``(X, y, labels)`` sets.

    ``points`` restricts the search to an explicit subset of the grid.
    """
    datasets = [(np.asarray(X, dtype=float), np.asarray(y, dtype=float), labels) for X, y, labels in datasets]
    for X, _, labels in datasets:
        if spec.objective is Objective.ERROR_RATE and labels is None:
            raise ValueError("error-rate objective needs class labels")
        if X.shape[0] < spec.folds:
            raise ValueError("fewer samples than folds")
    points = spec.points() if points is None else [dict(p) for p in points]
    if not points:
        raise ValueError("no grid points to evaluate")
    table = []
    best, best_score = None, math.inf
    for p, params in enumerate(points):
        fold_scores = []
        for salt, (X, y, labels) in enumerate(datasets):
            fold_scores.extend(_cv_scores(spec, trainer, params, p, X, y, labels, salt))
        score = float(np.mean(fold_scores))
        table.append({**params, "score": score, "fold_scores": fold_scores})
        if score < best_score:
            best, best_score = params, score
    if best is None:
        best = points[0]
    return GridResult(dict(best), best_score, table)


def write_cv_table(result: GridResult, path, preamble: Sequence[str] = ()) -> None:
    """CSV of every grid point with its mean score; ``preamble`` lines are written as ``#`` comments."""
    names = [k for k in result.table[0] if k not in ("score", "fold_scores")]
    with open(path, "w", newline="") as fh:
        for line in preamble:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(names + ["score", "folds"])
        for row in result.table:
            w.writerow([row[n] for n in names] + [repr(row["score"]), len(row["fold_scores"])])


def load_grid_config(path=None) -> dict:
    """Per-method search grids; defaults ship with the package."""
    if path is None:
        path = Path(__file__).with_name("data") / "default_grids.toml"
    with open(path, "rb") as fh:
        return tomllib.load(fh)


# ---------------------------------------------------------------- methods

METHODS = ("mse", "mcc", "mmcc", "mcc_vc", "gmcc", "krsl", "kmpe", "qmee", "eln")


def method_config(method: str, params: dict, T: int = 50, tau: float = 1e-7) -> SolverConfig:
    """Solver configuration for one named method and one grid point."""
    p = dict(params)
    gamma = float(p.pop("gamma", 1e-3))
    if method == "mse":
        loss = RidgeMse()
    elif method == "mcc":
        loss = FixedEln(make_mcc(p["sigma"]))
    elif method == "mcc_vc":
        loss = FixedEln(make_mcc_vc(p["sigma"], p["center"]))
    elif method == "mmcc":
        loss = FixedEln(make_mmcc(p["sigma1"], p["sigma2"], p["lambda"], 1))
    elif method == "gmcc":
        loss = Irls(make_gmcc(p["alpha"], p["lambda"]))
    elif method == "krsl":
        loss = Irls(make_krsl(p["lambda"], p["sigma"]))
    elif method == "kmpe":
        loss = Irls(make_kmpe(p["p"], p["sigma"]))
    elif method == "qmee":
        loss = AdaptiveEln(builder=partial(_qmee_builder, float(p["sigma"]), float(p.get("delta_q", 0.5))))
    elif method == "eln":
        loss = AdaptiveEln(
            ElnFitConfig(
                M=int(p.get("M", 50)),
                sigma=float(p["sigma"]),
                epsilon=float(p.get("epsilon", 0.0)),
                gamma1=float(p.get("gamma1", 1e-3)),
                centers=p.get("centers", "random"),
                seed=int(p.get("seed", 0)),
            )
        )
    else:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    return SolverConfig(loss=loss, gamma2=gamma, T=T, tau=tau)


def _qmee_builder(sigma, delta_q, errors):
    return make_qmee(errors, sigma, delta_q)


def valid_params(method: str, params: dict) -> bool:
    try:
        method_config(method, params)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------- linear-regression benchmark

TRUE_BETA = (2.0, 1.0)


def linreg_instance(case: int, N: int, seed: int, run: int, pilot: bool = False):
    """Noisy ``(X, y)`` for one seeded run; pilot instances use a disjoint seed stream."""
    if case not in CASES:
        raise ValueError(f"unknown noise case {case}; choose 1-4")
    ss = np.random.SeedSequence([seed, case, run, int(pilot)])
    s_problem, s_noise = ss.spawn(2)
    X, y = gen_linear_problem(N, TRUE_BETA, s_problem)
    return X, y + sample_noise(CASES[case], N, s_noise)


def linreg_trainer(method: str, T: int = 50, tau: float = 1e-7) -> Trainer:
    from .lip import Linear
    from .solver import fixed_point_fit

    def train(params, X_train, y_train, X_val, seed):
        p = dict(params)
        if method == "eln":
            p.setdefault("seed", seed % 2**31)
        tm = fixed_point_fit(Linear(X_train.shape[1]), X_train, y_train, method_config(method, p, T, tau))
        return tm.predict(X_val)

    return train


def tune_linreg(method: str, case: int, N: int, seed: int = 0, pilots: int = 8, folds: int = 10,
                gamma: float | None = 0.1, grids: dict | None = None) -> GridResult:
    """Pick hyperparameters by SSE cross-validation pooled over ``pilots`` seeded instances.

    With ``gamma`` set, the regularizer is pinned and only the remaining grid
    axes are searched; ``None`` searches the gamma axis too. MSE always
    searches gamma, its only parameter.
    """
    grid = dict((grids or load_grid_config())[method])
    if method != "mse" and gamma is not None:
        grid["gamma"] = [gamma]
    spec = GridSearchSpec(grid, folds=folds, seed=seed)
    valid = [p for p in spec.points() if valid_params(method, p)]
    if not valid:
        raise ValueError(f"no valid grid point for {method}")
    data = [(*linreg_instance(case, N, seed, k, pilot=True), None) for k in range(pilots)]
    return grid_search_pooled(spec, linreg_trainer(method), data, points=valid)


def evaluate_linreg(method: str, params: dict, case: int, N: int, runs: int, seed: int = 0,
                    T: int = 50, tau: float = 1e-7) -> tuple[np.ndarray, np.ndarray]:
    """RMSD against the true coefficients and convergence flags over ``runs`` seeded instances."""
    from .lip import Linear
    from .solver import fixed_point_fit

    if runs < 1:
        raise ValueError("runs must be >= 1")
    vals, conv = np.empty(runs), np.empty(runs, dtype=bool)
    for run in range(runs):
        X, y = linreg_instance(case, N, seed, run)
        p = dict(params)
        if method == "eln":
            p.setdefault("seed", int(np.random.SeedSequence([seed, case, run, 2]).generate_state(1)[0] % 2**31))
        tm = fixed_point_fit(Linear(X.shape[1]), X, y, method_config(method, p, T, tau))
        vals[run] = rmsd(tm.beta, TRUE_BETA)
        conv[run] = tm.converged
    return vals, conv
