"""Cross-validated L2-regularized logistic regression over embedding matrices.

One-vs-rest, trained by full-batch gradient descent with Armijo backtracking,
so the recorded training loss is non-increasing by construction. Optimization
stops at gradient norm 1e-6 or 1000 epochs. The regularization strength is
picked from a grid by cross-validated accuracy on the training portion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CtxvecError
from .report import EvalReport

DEFAULT_REG_GRID = tuple(10.0**e for e in range(-3, 4))

_GRAD_TOL = 1e-6
_MAX_EPOCHS = 1000


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _fit_binary(
    X: np.ndarray, y: np.ndarray, reg: float
) -> tuple[np.ndarray, float, list[float]]:
    """Minimize mean log-loss + (reg/2)||w||^2 over (w, b); bias unpenalized.

    Gradient descent with Armijo backtracking. Along the fixed descent
    direction each candidate step reuses one precomputed margin projection,
    so a probe costs O(n) without touching X again.
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    margin = np.zeros(n)  # y * (X @ w + b)
    loss = float(np.logaddexp(0.0, -margin).mean())
    losses = [loss]
    step = 1.0
    for _ in range(_MAX_EPOCHS):
        slope = -y * _sigmoid(-margin)
        gw = X.T @ slope / n + reg * w
        gb = float(slope.mean())
        gsq = float(gw @ gw) + gb * gb
        if np.sqrt(gsq) <= _GRAD_TOL:
            break
        dmargin = y * (X @ gw + gb)
        w_dot_g = float(w @ gw)
        g_norm2 = float(gw @ gw)
        w_norm2 = float(w @ w)
        step = min(step * 2.0, 1e8)
        while True:
            cand_margin = margin - step * dmargin
            penalty = w_norm2 - 2.0 * step * w_dot_g + step * step * g_norm2
            cand_loss = float(np.logaddexp(0.0, -cand_margin).mean()) + 0.5 * reg * penalty
            if cand_loss <= loss - 1e-4 * step * gsq:
                break
            step *= 0.5
            if step < 1e-18:
                return w, b, losses
        w = w - step * gw
        b -= step * gb
        margin = cand_margin
        loss = cand_loss
        losses.append(loss)
    return w, b, losses


@dataclass
class LinearClassifier:
    """One-vs-rest logistic regression with a fixed regularization strength."""

    classes: list[str]
    reg: float
    coef: np.ndarray = field(default=None, repr=False)
    intercept: np.ndarray = field(default=None, repr=False)
    loss_histories: dict[str, list[float]] = field(default_factory=dict, repr=False)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearClassifier":
        d = X.shape[1]
        self.coef = np.zeros((len(self.classes), d))
        self.intercept = np.zeros(len(self.classes))
        self.loss_histories = {}
        for i, cls in enumerate(self.classes):
            target = np.where(y == cls, 1.0, -1.0)
            w, b, losses = _fit_binary(X, target, self.reg)
            self.coef[i] = w
            self.intercept[i] = b
            self.loss_histories[cls] = losses
        return self

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef.T + self.intercept

    def predict(self, X: np.ndarray) -> np.ndarray:
        scores = self.decision(X)
        # argmax picks the first (lexicographically smallest) class on ties
        return np.asarray(self.classes, dtype=object)[np.argmax(scores, axis=1)]


def _fold_indices(n: int, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    perm = rng.permutation(n)
    return [np.asarray(f) for f in np.array_split(perm, folds)]


def _cv_accuracy(
    X: np.ndarray, y: np.ndarray, classes: list[str], reg: float, splits: list[np.ndarray]
) -> float:
    correct = 0
    for i, test_idx in enumerate(splits):
        train_idx = np.concatenate([s for j, s in enumerate(splits) if j != i])
        if len(set(y[train_idx])) < 2:
            continue
        clf = LinearClassifier(classes, reg).fit(X[train_idx], y[train_idx])
        correct += int((clf.predict(X[test_idx]) == y[test_idx]).sum())
    return correct / n_total(splits)


def n_total(splits: list[np.ndarray]) -> int:
    return sum(len(s) for s in splits)


def _select_reg(
    X: np.ndarray,
    y: np.ndarray,
    classes: list[str],
    reg_grid: tuple[float, ...],
    folds: int,
    rng: np.random.Generator,
) -> float:
    inner = max(2, min(folds, len(y) // 2))
    splits = _fold_indices(len(y), inner, rng)
    best_reg = reg_grid[0]
    best_acc = -1.0
    for reg in sorted(reg_grid):
        acc = _cv_accuracy(X, y, classes, reg, splits)
        if acc > best_acc:
            best_acc = acc
            best_reg = reg
    return best_reg


def train_linear_classifier(
    X: np.ndarray,
    y,
    folds: int = 10,
    reg_grid: tuple[float, ...] | None = None,
    seed: int = 0,
) -> tuple[LinearClassifier, EvalReport]:
    """Cross-validated accuracy plus a final classifier trained on all data.

    Outer loop: `folds`-fold CV accuracy, with the regularization strength
    re-selected on each fold's training portion (inner CV, up to 5 folds).
    The returned classifier uses a strength selected the same way on the full
    data.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray([str(label) for label in y], dtype=object)
    if X.ndim != 2 or len(X) != len(y):
        raise CtxvecError("X must be a 2-D matrix with one row per label")
    classes = sorted(set(y))
    if len(classes) < 2:
        raise CtxvecError("classification needs at least 2 classes")
    if folds < 2 or folds > len(y):
        raise CtxvecError(f"folds must be in [2, {len(y)}]")
    grid = tuple(reg_grid) if reg_grid else DEFAULT_REG_GRID

    outer = _fold_indices(len(y), folds, np.random.default_rng([seed]))
    correct = 0
    report = EvalReport()
    for i, test_idx in enumerate(outer):
        train_idx = np.concatenate([s for j, s in enumerate(outer) if j != i])
        if len(set(y[train_idx])) < 2:
            continue
        reg = _select_reg(
            X[train_idx], y[train_idx], classes, grid, min(5, folds),
            np.random.default_rng([seed, i + 1]),
        )
        clf = LinearClassifier(classes, reg).fit(X[train_idx], y[train_idx])
        fold_hits = int((clf.predict(X[test_idx]) == y[test_idx]).sum())
        correct += fold_hits
        report.add("accuracy", f"fold{i}", fold_hits / len(test_idx))
    accuracy = correct / len(y)

    final_reg = _select_reg(
        X, y, classes, grid, min(5, folds), np.random.default_rng([seed, 0])
    )
    final = LinearClassifier(classes, final_reg).fit(X, y)
    report.add("accuracy", "cv", accuracy)
    report.add("reg", "chosen", final_reg)
    report.add("folds", "", folds)
    return final, report


def evaluate_on_test(
    X_train: np.ndarray,
    y_train,
    X_test: np.ndarray,
    y_test,
    folds: int = 10,
    reg_grid: tuple[float, ...] | None = None,
    seed: int = 0,
) -> tuple[LinearClassifier, EvalReport]:
    """Select the strength on the training data, fit it, score the test split."""
    X_train = np.asarray(X_train, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    y_train = np.asarray([str(l) for l in y_train], dtype=object)
    y_test = np.asarray([str(l) for l in y_test], dtype=object)
    classes = sorted(set(y_train))
    if len(classes) < 2:
        raise CtxvecError("classification needs at least 2 classes")
    grid = tuple(reg_grid) if reg_grid else DEFAULT_REG_GRID
    reg = _select_reg(
        X_train, y_train, classes, grid, min(5, folds), np.random.default_rng([seed])
    )
    clf = LinearClassifier(classes, reg).fit(X_train, y_train)
    accuracy = float((clf.predict(X_test) == y_test).mean())
    report = EvalReport()
    report.add("accuracy", "test", accuracy)
    report.add("reg", "chosen", reg)
    return clf, report
