"""Dataset splits, classification metrics, ROC curves, and experiment sweeps.

The separable class is the positive class (+1) throughout. A set of four
group witnesses classifies by intersection: a sample is called separable
only if every witness expectation is nonnegative, so the score of a
sample is the minimum expectation over the four witnesses.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drsvm import RobustParams, SolverConfig, train_roew_binary
from .errors import (
    EmptyStratumError,
    InfeasibleError,
    LengthMismatchError,
    SingleClassError,
    SolverDivergedError,
)
from .states import GROUP_ORDER
from .witness import witness_from_model

METRIC_NAMES = ("accuracy", "precision", "f1")


@dataclass(frozen=True)
class SplitConfig:
    """Stratified train fraction with its shuffle seed.

    ``per_class_n`` optionally caps each class before splitting
    (entangled samples are capped per group at a quarter of the cap);
    zero means use everything.
    """

    train_fraction: float
    seed: int = 0
    per_class_n: int = 0


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class RocCurve:
    points: list
    auc: float
    thresholds: list = field(default_factory=list)


@dataclass
class SweepCell:
    alpha: float
    split: float
    seed: int
    status: str
    report: MetricsReport | None = None
    scores: np.ndarray | None = None
    truth: np.ndarray | None = None
    per_witness_accuracy: dict = field(default_factory=dict)


# ============================================================
# Splitting
# ============================================================


def _strata(dataset):
    keys = [(1, None)] + [(-1, lbl) for lbl in GROUP_ORDER]
    out = []
    for key in keys:
        idxs = [i for i, s in enumerate(dataset) if (s.label, s.group) == key]
        if idxs:
            out.append((key, idxs))
    return out


def split(dataset, cfg):
    """Stratified split into (train, test) at cfg.train_fraction.

    Strata are (separable) plus each entangled Bell group; each is
    shuffled with the shared seed and cut at round(fraction * size).
    """
    if not 0.0 < cfg.train_fraction < 1.0:
        raise EmptyStratumError(f"train_fraction={cfg.train_fraction} not in (0, 1)")
    if not dataset:
        raise EmptyStratumError("dataset is empty")
    labels = {s.label for s in dataset}
    if 1 not in labels or -1 not in labels:
        raise EmptyStratumError("dataset must contain both classes")
    rng = np.random.default_rng(cfg.seed)
    train, test = [], []
    for (label, _), idxs in _strata(dataset):
        order = rng.permutation(len(idxs))
        cap = cfg.per_class_n if label == 1 else cfg.per_class_n // 4
        if cfg.per_class_n and cap and len(order) > cap:
            order = order[:cap]
        n_train = int(round(cfg.train_fraction * len(order)))
        for pos, k in enumerate(order):
            (train if pos < n_train else test).append(dataset[idxs[k]])
    return train, test


# ============================================================
# Metrics
# ============================================================


def metrics(predictions, truth):
    """Confusion-matrix metrics with separable (+1) as the positive class."""
    preds = np.asarray(predictions)
    t = np.asarray(truth)
    if preds.shape != t.shape:
        raise LengthMismatchError(f"{preds.shape} vs {t.shape}")
    if preds.size == 0:
        raise EmptyStratumError("no predictions")
    tp = int(np.sum((preds == 1) & (t == 1)))
    fp = int(np.sum((preds == 1) & (t == -1)))
    tn = int(np.sum((preds == -1) & (t == -1)))
    fn = int(np.sum((preds == -1) & (t == 1)))
    accuracy = (tp + tn) / preds.size
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsReport(accuracy, precision, f1, tp, fp, tn, fn)


def roc(scores, truth):
    """ROC curve of a separability score (higher = more separable).

    Thresholds sweep the distinct score values from high to low, ties
    grouped, giving points from (0, 0) to (1, 1); the AUC is the
    trapezoidal integral.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(truth)
    if s.shape != t.shape:
        raise LengthMismatchError(f"{s.shape} vs {t.shape}")
    n_pos = int(np.sum(t == 1))
    n_neg = int(np.sum(t == -1))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("roc needs both classes")
    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    is_pos = (t[order] == 1).astype(float)
    tp_cum = np.cumsum(is_pos)
    fp_cum = np.cumsum(1.0 - is_pos)
    # last index of each tie block marks the threshold at that value
    block_end = np.flatnonzero(np.diff(sorted_scores, append=-np.inf))
    points = [(0.0, 0.0)]
    thresholds = [np.inf]
    for k in block_end:
        points.append((fp_cum[k] / n_neg, tp_cum[k] / n_pos))
        thresholds.append(float(sorted_scores[k]))
    pts = np.array(points)
    auc = float(np.trapezoid(pts[:, 1], pts[:, 0]))
    return RocCurve(
        points=[(float(x), float(y)) for x, y in points],
        auc=auc,
        thresholds=thresholds,
    )


# ============================================================
# Group training and scoring
# ============================================================


def train_group_models(dataset, params, cfg=None):
    """One hard-margin model per Bell group against all separable samples."""
    sep = [s for s in dataset if s.label == 1]
    if not sep:
        raise EmptyStratumError("no separable samples")
    models = {}
    for lbl in GROUP_ORDER:
        ent = [s for s in dataset if s.label == -1 and s.group == lbl]
        if not ent:
            raise EmptyStratumError(f"no entangled samples for group {lbl.code}")
        models[lbl.code] = train_roew_binary(sep, ent, params, cfg, group=lbl)
    return models


def run_algorithm1(dataset, params, cfg=None):
    """Witness per Bell group, in fixed group order."""
    models = train_group_models(dataset, params, cfg)
    return [witness_from_model(models[lbl.code]) for lbl in GROUP_ORDER]


def witness_scores(witnesses, samples):
    """Min expectation over the witnesses for each sample's mean features."""
    mu = np.stack([s.mu for s in samples])
    per = [mu @ w.chi.reshape(-1)[:15] + w.chi[3, 3] for w in witnesses]
    return np.min(np.stack(per), axis=0)


def intersection_predict(witnesses, samples):
    """+1 where all witness expectations are nonnegative, else -1."""
    return np.where(witness_scores(witnesses, samples) >= 0.0, 1, -1)


# ============================================================
# Sweep
# ============================================================


@dataclass(frozen=True)
class SweepConfig:
    c: float = 20.0
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    jobs: int = 1


def _run_cell(args):
    alpha, frac, dataset, cfg = args
    cell = SweepCell(alpha=alpha, split=frac, seed=cfg.seed, status="ok")
    try:
        train, test = split(dataset, SplitConfig(frac, cfg.seed))
        models = train_group_models(train, RobustParams(alpha, cfg.c), cfg.solver)
        wits = [witness_from_model(models[lbl.code]) for lbl in GROUP_ORDER]
        truth = np.array([s.label for s in test])
        scores = witness_scores(wits, test)
        preds = np.where(scores >= 0.0, 1, -1)
        cell.report = metrics(preds, truth)
        cell.scores = scores
        cell.truth = truth
        for lbl, wit in zip(GROUP_ORDER, wits):
            subset = [s for s in test if s.label == 1 or s.group == lbl]
            sub_truth = np.array([s.label for s in subset])
            one = witness_scores([wit], subset)
            sub_pred = np.where(one >= 0.0, 1, -1)
            cell.per_witness_accuracy[lbl.code] = float(np.mean(sub_pred == sub_truth))
    except InfeasibleError as err:
        cell.status = f"infeasible:{err.group}"
    except SolverDivergedError:
        cell.status = "diverged"
    return cell


def run_sweep(alphas, splits, dataset, cfg=None):
    """Train and score every (alpha, split) cell; failures are recorded.

    Cells are independent and may run on a worker pool; results always
    come back in grid order (alpha outer, split inner) so downstream
    files are byte-stable regardless of job count.
    """
    cfg = cfg or SweepConfig()
    jobs_list = [(a, f, dataset, cfg) for a in alphas for f in splits]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            cells = list(pool.map(_run_cell, jobs_list))
    else:
        cells = [_run_cell(j) for j in jobs_list]
    return cells


def sweep_csv(cells):
    """Long-format CSV: one row per cell and metric."""
    from .jsonio import format_float

    lines = ["alpha,split,metric,value,seed,cell_status"]
    for cell in cells:
        for name in METRIC_NAMES:
            value = format_float(getattr(cell.report, name)) if cell.report else ""
            lines.append(
                f"{format_float(cell.alpha)},{format_float(cell.split)},"
                f"{name},{value},{cell.seed},{cell.status}"
            )
    return "\n".join(lines) + "\n"


def roc_csv(curve):
    from .jsonio import format_float

    lines = ["threshold,fpr,tpr"]
    thresholds = curve.thresholds or [np.inf] * len(curve.points)
    for thr, (fpr, tpr) in zip(thresholds, curve.points):
        tag = "inf" if np.isinf(thr) else format_float(thr)
        lines.append(f"{tag},{format_float(fpr)},{format_float(tpr)}")
    return "\n".join(lines) + "\n"
