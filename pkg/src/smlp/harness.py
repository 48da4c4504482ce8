"""Splitting, training, evaluation, baselines and the comparison experiments."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import network as nn
from .datamodel import N_CLASSES, EventClass, LabeledDataset
from .features import apply_normalizer, fit_normalizer
from .optim import (
    ALL_METHODS,
    OptimizerSpec,
    apply_update,
    init_state,
    lookahead,
    needs_lookahead,
)

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
SINGLE_MLP_UNITS = ((28, 64, 6),)


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, loss: float):
        super().__init__(f"non-finite training loss {loss} at iteration {iteration}")
        self.iteration = iteration


# --- splitting -----------------------------------------------------------

@dataclass(frozen=True)
class SplitManifest:
    fit: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int
    stratified: bool

    @property
    def train(self) -> np.ndarray:
        """Fit plus validation indices: the 70% training portion."""
        return np.concatenate([self.fit, self.validation])

    def __eq__(self, other):
        if not isinstance(other, SplitManifest):
            return NotImplemented
        return (self.seed == other.seed and self.stratified == other.stratified
                and all(np.array_equal(a, b) for a, b in
                        ((self.fit, other.fit), (self.validation, other.validation),
                         (self.test, other.test))))

    def to_text(self) -> str:
        lines = [f"#smlp-split v1 seed={self.seed} stratified={int(self.stratified)}"]
        for name in ("fit", "validation", "test"):
            lines.append(name + " " + " ".join(map(str, getattr(self, name).tolist())))
        return "\n".join(lines) + "\n"


def _split_counts(n: int) -> tuple[int, int, int]:
    test = math.floor(0.3 * n)
    val = math.floor(0.1 * (n - test))
    return n - test - val, val, test


def split(ds: LabeledDataset | np.ndarray, seed: int = 0, stratified: bool = False) -> SplitManifest:
    """70/30 train/test, then 90/10 fit/validation within train."""
    y = ds.y if isinstance(ds, LabeledDataset) else np.asarray(ds)
    n = len(y)
    if n < 10:
        raise ValueError(f"need at least 10 instances to split, got {n}")
    rng = np.random.default_rng(seed)
    if not stratified:
        perm = rng.permutation(n)
        n_fit, n_val, _ = _split_counts(n)
        return SplitManifest(np.sort(perm[:n_fit]), np.sort(perm[n_fit:n_fit + n_val]),
                             np.sort(perm[n_fit + n_val:]), seed, False)
    parts = ([], [], [])
    for c in range(N_CLASSES):
        members = np.flatnonzero(y == c)
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise ValueError(f"class {EventClass(c).label} has fewer than 2 members")
        perm = rng.permutation(members)
        n_fit, n_val, _ = _split_counts(len(members))
        parts[0].append(perm[:n_fit])
        parts[1].append(perm[n_fit:n_fit + n_val])
        parts[2].append(perm[n_fit + n_val:])
    fit, val, test = (np.sort(np.concatenate(p)) for p in parts)
    return SplitManifest(fit, val, test, seed, True)


# --- training ------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    seed: int = 11
    inner_iterations: int = 1
    class_weighted: bool = False
    lr_safeguard: bool = False


@dataclass
class ConvergenceCurve:
    method: str
    fraction: float
    losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else math.nan


@dataclass
class TrainResult:
    model: nn.SmlpModel
    curve: ConvergenceCurve
    best_model: nn.SmlpModel
    best_epoch: int
    val_losses: list[float]


def _class_weights(y: np.ndarray) -> np.ndarray:
    counts = np.bincount(y, minlength=N_CLASSES).astype(np.float64)
    w = np.where(counts > 0, len(y) / (N_CLASSES * np.maximum(counts, 1)), 0.0)
    return w


def _step(model, spec, state, Xb, yb, wb):
    """Gradient of one batch, honouring the Nesterov lookahead contract."""
    params = model.params()
    if needs_lookahead(spec):
        ahead = model.with_params(lookahead(spec, state, params))
        _, cache = nn.forward(ahead, Xb)
        grads = nn.backward(ahead, cache, yb, wb)
        loss = nn.mean_loss(model, yb, wb, X=Xb)
    else:
        _, cache = nn.forward(model, Xb)
        grads = nn.backward(model, cache, yb, wb)
        loss = nn.mean_loss(cache, yb, wb)
    return loss, grads


def train(model: nn.SmlpModel, spec: OptimizerSpec, X_fit: np.ndarray, y_fit: np.ndarray,
          X_val: np.ndarray | None = None, y_val: np.ndarray | None = None,
          config: TrainConfig = TrainConfig(), fraction: float = 1.0) -> TrainResult:
    """Mini-batch training; one curve point per epoch (mean batch loss).

    The returned ``best_model`` is the epoch (including the initial model)
    with the lowest validation loss; without validation data it is the
    final model.
    """
    X_fit = np.asarray(X_fit, dtype=np.float64)
    y_fit = np.asarray(y_fit, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    names = model.param_names()
    state = init_state(model.params())
    weights = _class_weights(y_fit) if config.class_weighted else None
    has_val = X_val is not None and len(X_val) > 0
    curve = ConvergenceCurve(spec.method.value, fraction)
    val_losses: list[float] = []
    best_model, best_epoch, best_val = model.copy(), 0, math.inf
    if has_val:
        best_val = nn.mean_loss(model, y_val, X=X_val)
        val_losses.append(best_val)
    rising = 0
    n = len(y_fit)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            Xb, yb = X_fit[idx], y_fit[idx]
            wb = None if weights is None else weights[yb]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = _step(model, spec, state, Xb, yb, wb)
            if not math.isfinite(loss):
                raise DivergenceError(len(curve.losses) + 1, loss)
            params, state = apply_update(spec, state, model.params(), grads, names)
            model = model.with_params(params)
            for _ in range(config.inner_iterations - 1):
                model, state = _unitwise_refresh(model, spec, state, Xb, yb, wb, names)
            total += loss * len(idx)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise DivergenceError(epoch, epoch_loss)
        if config.lr_safeguard and curve.losses and epoch_loss > curve.losses[-1]:
            rising += 1
            if rising >= 10:
                spec = replace(spec, alpha=spec.alpha / 2)
                log.info("epoch %d: loss rose 10 times in a row, alpha -> %g", epoch, spec.alpha)
                rising = 0
        else:
            rising = 0
        curve.losses.append(epoch_loss)
        if has_val:
            v = nn.mean_loss(model, y_val, X=X_val)
            val_losses.append(v)
            if v < best_val:
                best_model, best_epoch, best_val = model.copy(), epoch, v
    if not has_val:
        best_model, best_epoch = model.copy(), config.epochs
    return TrainResult(model, curve, best_model, best_epoch, val_losses)


def _unitwise_refresh(model, spec, state, Xb, yb, wb, names):
    """Extra inner iterations: each unit in turn re-steps on the same batch."""
    for sl in model.unit_param_slices():
        loss, grads = _step(model, spec, state, Xb, yb, wb)
        params = model.params()
        masked = [g if sl.start <= i < sl.stop else np.zeros_like(g) for i, g in enumerate(grads)]
        new, new_state = apply_update(spec, state, params, masked, names)
        # only the unit's own arrays and optimizer buffers move
        keep = lambda i: sl.start <= i < sl.stop
        params = [n if keep(i) else p for i, (n, p) in enumerate(zip(new, params))]
        state = replace(new_state,
                        m=[a if keep(i) else b for i, (a, b) in enumerate(zip(new_state.m, state.m))],
                        v=[a if keep(i) else b for i, (a, b) in enumerate(zip(new_state.v, state.v))])
        model = model.with_params(params)
    return model, state


# --- evaluation ----------------------------------------------------------

@dataclass
class EvalReport:
    precision: np.ndarray
    average_precision: np.ndarray
    confusion: np.ndarray  # rows: true class, columns: predicted class
    accuracy: float

    @property
    def map(self) -> float:
        return float(self.average_precision.mean())

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    def __eq__(self, other):
        if not isinstance(other, EvalReport):
            return NotImplemented
        return (np.array_equal(self.precision, other.precision)
                and np.array_equal(self.average_precision, other.average_precision)
                and np.array_equal(self.confusion, other.confusion)
                and self.accuracy == other.accuracy)


def average_precision(scores: np.ndarray, relevant: np.ndarray) -> float:
    """AP of a ranking by descending score; ties keep input order. 0 with no positives."""
    relevant = np.asarray(relevant, dtype=bool)
    if not relevant.any():
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = relevant[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, len(ranks) + 1) / ranks))


def evaluate_scores(scores: np.ndarray, y_true: np.ndarray) -> EvalReport:
    """Metrics from per-class scores (n x 6) and true codes."""
    scores = np.asarray(scores, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.int64)
    if len(y_true) == 0:
        raise ValueError("test split is empty")
    y_pred = np.argmax(scores, axis=1)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    predicted = confusion.sum(axis=0)
    tp = np.diag(confusion)
    precision = np.where(predicted > 0, tp / np.maximum(predicted, 1), 0.0)
    ap = np.array([average_precision(scores[:, c], y_true == c) for c in range(N_CLASSES)])
    return EvalReport(precision, ap, confusion, float(tp.sum() / len(y_true)))


def evaluate(model: nn.SmlpModel, X_test: np.ndarray, y_test: np.ndarray) -> EvalReport:
    return evaluate_scores(nn.predict_proba(model, X_test), y_test)


# --- Gaussian naive Bayes ------------------------------------------------

VAR_FLOOR = 1e-9


@dataclass
class GaussianNB:
    means: np.ndarray  # (classes, features)
    variances: np.ndarray
    log_priors: np.ndarray

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        ll = -0.5 * (np.log(2 * np.pi * self.variances)[None, :, :]
                     + (X[:, None, :] - self.means[None, :, :]) ** 2 / self.variances[None, :, :])
        return self.log_priors[None, :] + ll.sum(axis=2)

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.joint_log_likelihood(X), axis=1)


def fit_gaussian_nb(X, y, n_classes: int = N_CLASSES) -> GaussianNB:
    """Per-class feature means and variances; classes absent from ``y`` get prior 0."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    d = X.shape[1]
    means = np.zeros((n_classes, d))
    variances = np.ones((n_classes, d))
    log_priors = np.full(n_classes, -np.inf)
    for c in range(n_classes):
        rows = X[y == c]
        if len(rows) == 0:
            continue
        if len(rows) < 2:
            raise ValueError(f"class {c} has fewer than 2 training members")
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), VAR_FLOOR)
        log_priors[c] = math.log(len(rows) / len(y))
    return GaussianNB(means, variances, log_priors)


def predict_nb(model: GaussianNB, X) -> np.ndarray:
    return model.predict(X)


# --- experiments ---------------------------------------------------------

@dataclass
class PreparedData:
    """Normalised split arrays; statistics come from the fit split only."""

    manifest: SplitManifest
    stats: object
    X_fit: np.ndarray
    y_fit: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray


def prepare(ds: LabeledDataset, seed: int, stratified: bool = True) -> PreparedData:
    manifest = split(ds, seed, stratified)
    stats = fit_normalizer(ds.X[manifest.fit])
    Z = apply_normalizer(ds.X, stats)
    return PreparedData(manifest, stats, Z[manifest.fit], ds.y[manifest.fit],
                        Z[manifest.validation], ds.y[manifest.validation],
                        Z[manifest.test], ds.y[manifest.test])


def training_fraction_indices(manifest: SplitManifest, n_total: int, fraction: float) -> np.ndarray:
    """First ``floor(fraction * n)`` indices of the seeded training portion."""
    pool = manifest.train
    rng = np.random.default_rng(manifest.seed)
    pool = pool[rng.permutation(len(pool))]
    k = math.floor(fraction * n_total + 1e-9)
    if k > len(pool):
        raise ValueError(f"fraction {fraction} needs {k} instances, training pool has {len(pool)}")
    if k < 1:
        raise ValueError(f"fraction {fraction} selects no instances")
    return pool[:k]


def compare_optimizers(ds: LabeledDataset, fractions: Sequence[float] = DEFAULT_FRACTIONS,
                       specs: Sequence[OptimizerSpec] | None = None,
                       units=nn.DEFAULT_UNITS, config: TrainConfig = TrainConfig(),
                       split_seed: int = 7) -> list[ConvergenceCurve]:
    """One training-loss curve per (fraction, method), shared init and batch order."""
    if specs is None:
        specs = [OptimizerSpec(method=m) for m in ALL_METHODS]
    manifest = split(ds, split_seed, stratified=True)
    curves = []
    for fraction in fractions:
        idx = training_fraction_indices(manifest, len(ds), fraction)
        stats = fit_normalizer(ds.X[idx])
        X = apply_normalizer(ds.X[idx], stats)
        y = ds.y[idx]
        for spec in specs:
            model = nn.init_model(units, config.seed)
            result = train(model, spec, X, y, config=config, fraction=fraction)
            curves.append(result.curve)
            log.info("fraction %.2f %s final loss %.5f", fraction, spec.method.value,
                     result.curve.final_loss)
    return curves


@dataclass
class ModelComparison:
    names: list[str]
    reports: list[EvalReport]
    manifest: SplitManifest


def compare_models(ds: LabeledDataset, seed: int = 7, units=nn.DEFAULT_UNITS,
                   single_units=SINGLE_MLP_UNITS, spec: OptimizerSpec = OptimizerSpec(),
                   config: TrainConfig = TrainConfig()) -> ModelComparison:
    """Gaussian NB, one MLP unit and the S-MLP on one split; test-set reports."""
    data = prepare(ds, seed)
    nb = fit_gaussian_nb(data.X_fit, data.y_fit)
    reports = [evaluate_scores(nb.predict_proba(data.X_test), data.y_test)]
    for shapes in (single_units, units):
        model = nn.init_model(shapes, config.seed)
        result = train(model, spec, data.X_fit, data.y_fit, data.X_val, data.y_val, config)
        reports.append(evaluate(result.best_model, data.X_test, data.y_test))
    return ModelComparison(["GaussianNB", "MLP", "S-MLP"], reports, data.manifest)
