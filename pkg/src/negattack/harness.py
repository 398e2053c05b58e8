"""Evaluation protocol: success rates, transfer matrices and hyperparameter sweeps.

Adversarial examples are generated once per (source model, config) and then
scored against every target model, so a matrix row always reflects the same
tensors. Generation is split into fixed-size chunks; ``n_jobs`` only changes
how chunks are scheduled, never what they contain, so results do not depend
on it.
"""

import dataclasses
import enum
import hashlib
import json
import logging
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import dataio
from .attacks import NEW_TYPE_METHODS, AttackConfig, Method, run_attack
from .tensor import Norm

__all__ = [
    "Mode",
    "SuccessCriterion",
    "TransferMatrix",
    "SweepResult",
    "FingerprintMismatch",
    "AttackFailure",
    "generate",
    "success_rate",
    "transfer_matrix",
    "sweep_perturbation",
    "sweep_iterations",
    "sweep_decay",
    "render_report",
]

logger = logging.getLogger(__name__)

DEFAULT_CHUNK = 100


class FingerprintMismatch(ValueError):
    """An artifact was produced for a different model suite or configuration."""


class AttackFailure(RuntimeError):
    """An attack raised; the message names the source model and example range."""


class Mode(str, enum.Enum):
    NEW_TYPE = "new_type"
    CLASSIC = "classic"


@dataclasses.dataclass(frozen=True)
class SuccessCriterion:
    """What counts as a successful attack.

    New-type success: the target still predicts the original label (and, with
    a floor, the example moved at least ``distance_floor`` away). Classic
    success: the prediction differs from the label.
    """

    mode: Mode = Mode.NEW_TYPE
    distance_floor: float = None
    distance_norm: Norm = Norm.L2

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "distance_norm", Norm.parse(self.distance_norm))

    def hits(self, labels, predictions, distances=None):
        labels = np.asarray(labels)
        predictions = np.asarray(predictions)
        if self.mode is Mode.NEW_TYPE:
            ok = predictions == labels
            if self.distance_floor is not None:
                ok &= np.asarray(distances) >= self.distance_floor
        else:
            ok = predictions != labels
        return ok


def _distances(results, norm):
    attr = "distance_l2" if norm is Norm.L2 else "distance_linf"
    if norm is Norm.L1:
        raise ValueError("results record L2 and Linf distances only")
    return np.array([getattr(r, attr) for r in results])


def success_rate(results, criterion=SuccessCriterion(), target_model=None):
    """Percentage of ``results`` that succeed under ``criterion``.

    With ``target_model`` the stored adversarial tensors are re-classified by
    that model; otherwise the prediction recorded at generation time is used.
    """
    if not results:
        raise ValueError("success_rate needs at least one result")
    labels = np.array([r.label for r in results])
    if target_model is None:
        preds = np.array([r.adversarial_prediction for r in results])
    else:
        preds = target_model.predict(np.stack([r.adversarial for r in results]))
    dist = _distances(results, criterion.distance_norm) if criterion.distance_floor is not None else None
    hits = criterion.hits(labels, preds, dist)
    return 100.0 * np.count_nonzero(hits) / len(results)


def _run_chunk(model, X, y, config, start, source):
    try:
        return run_attack(model, X, y, config)
    except Exception as exc:
        raise AttackFailure(
            f"{config.method.value} on source {source}, examples {start}..{start + len(X) - 1}: "
            f"{exc}"
        ) from exc


def generate(model, X, y, config, n_jobs=1, chunk_size=DEFAULT_CHUNK, source="?"):
    """Run ``config`` against ``model`` on every example, in fixed chunks."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    starts = range(0, len(X), chunk_size)
    jobs = [(X[s:s + chunk_size], y[s:s + chunk_size], s) for s in starts]
    if n_jobs == 1 or len(jobs) <= 1:
        parts = [_run_chunk(model, xb, yb, config, s, source) for xb, yb, s in jobs]
    else:
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_run_chunk)(model, xb, yb, config, s, source) for xb, yb, s in jobs
        )
    return [r for part in parts for r in part]


def _mean(values):
    return float(np.mean(values)) if len(values) else float("nan")


@dataclasses.dataclass
class TransferMatrix:
    """Success rates (percent) of one method: rows are sources, columns targets."""

    method: str
    sources: list
    targets: list
    rates: list
    config: dict
    mean_loss_initial: list = None
    mean_loss_final: list = None

    @property
    def white_box(self):
        return [[s == t for t in self.targets] for s in self.sources]

    def rate(self, source, target):
        return self.rates[self.sources.index(source)][self.targets.index(target)]

    def to_array(self):
        return np.array(self.rates, dtype=np.float64)

    @property
    def fingerprint(self):
        """Hash of the attack configuration that produced the matrix."""
        text = json.dumps(self.config, sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclasses.dataclass
class SweepResult:
    """Success rates over one swept hyperparameter.

    ``rates[i][j][k]`` is the rate at ``values[i]`` for ``methods[j]``
    scored against ``targets[k]``.
    """

    parameter: str
    values: list
    methods: list
    source: str
    targets: list
    rates: list
    fixed: dict
    mean_loss_initial: list = None
    mean_loss_final: list = None

    def rate(self, value, method, target):
        return self.rates[self.values.index(value)][self.methods.index(method)][
            self.targets.index(target)]

    def series(self, method, target):
        j, k = self.methods.index(method), self.targets.index(target)
        return [row[j][k] for row in self.rates]


def _names(models, names):
    if names is None:
        names = [f"model{i}" for i in range(len(models))]
    if len(names) != len(models) or len(set(names)) != len(names):
        raise ValueError("need one distinct name per model")
    return list(names)


def _check_subset(models, dataset, subset):
    if subset is None:
        return dataset.images, dataset.labels
    prints = tuple(dataio.model_fingerprint(m) for m in models)
    if tuple(subset.fingerprints) != prints:
        raise FingerprintMismatch(
            "evaluation subset was screened against a different model suite; re-run screening"
        )
    data = subset.take(dataset)
    return data.images, data.labels


def _score(results, models, criterion):
    return [success_rate(results, criterion, m) for m in models]


def transfer_matrix(models, dataset, config, subset=None, names=None, criterion=None,
                    n_jobs=1, chunk_size=DEFAULT_CHUNK, cache=None):
    """Source x target success-rate matrix for ``config.method``.

    For each source model the examples are attacked once; every target model
    then re-classifies those same tensors. Diagonal cells are white-box.
    """
    names = _names(models, names)
    X, y = _check_subset(models, dataset, subset)
    criterion = criterion or SuccessCriterion()
    rates, l0, l1 = [], [], []
    for i, (name, model) in enumerate(zip(names, models)):
        results = _cached(cache, model, X, y, config, n_jobs, chunk_size, name)
        rates.append(_score(results, models, criterion))
        l0.append(_mean([r.loss_initial for r in results]))
        l1.append(_mean([r.loss_final for r in results]))
        logger.info("%s from %s: %s", config.method.value, name,
                    " ".join(f"{r:.1f}" for r in rates[-1]))
    return TransferMatrix(config.method.value, names, list(names), rates, config.to_dict(), l0, l1)


def _cached(cache, model, X, y, config, n_jobs, chunk_size, source):
    if cache is None:
        return generate(model, X, y, config, n_jobs, chunk_size, source)
    h = hashlib.sha256()
    h.update(dataio.model_fingerprint(model).encode())
    h.update(json.dumps(config.to_dict(), sort_keys=True).encode())
    h.update(np.ascontiguousarray(X).tobytes())
    h.update(np.ascontiguousarray(y, dtype=np.int64).tobytes())
    key = h.hexdigest()
    if key not in cache:
        cache[key] = generate(model, X, y, config, n_jobs, chunk_size, source)
    return cache[key]


def _sweep(parameter, values, configs, models, dataset, methods, source, subset, names, criterion,
           n_jobs, chunk_size, fixed, cache):
    names = _names(models, names)
    values = list(values)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{parameter} values must be strictly increasing")
    if not values:
        raise ValueError("nothing to sweep")
    X, y = _check_subset(models, dataset, subset)
    src = names.index(source) if isinstance(source, str) else int(source)
    model = models[src]
    criterion = criterion or SuccessCriterion()
    methods = [Method.parse(m) for m in methods]
    rates, l0, l1 = [], [], []
    for v in values:
        row, r0, r1 = [], [], []
        for m in methods:
            cfg = configs(v, m)
            results = _cached(cache, model, X, y, cfg, n_jobs, chunk_size, names[src])
            row.append(_score(results, models, criterion))
            r0.append(_mean([r.loss_initial for r in results]))
            r1.append(_mean([r.loss_final for r in results]))
        logger.info("%s=%s: white-box %s", parameter, v,
                    " ".join(f"{r[src]:.1f}" for r in row))
        rates.append(row)
        l0.append(r0)
        l1.append(r1)
    return SweepResult(parameter, values, [m.value for m in methods], names[src], names, rates,
                       fixed, l0, l1)


def _new_type_only(methods):
    for m in methods:
        if not Method.parse(m).new_type:
            raise ValueError(f"{Method.parse(m).value} is not a new-type method")


def sweep_perturbation(models, dataset, methods, deltas, iterations=250, decay=0.8, source=0,
                       base=None, subset=None, names=None, criterion=None, n_jobs=1,
                       chunk_size=DEFAULT_CHUNK, cache=None):
    """Success rates as the distance budget ``delta`` grows; step size is ``delta / N``."""
    _new_type_only(methods)
    # delta is a placeholder here; every run replaces it
    base = base or AttackConfig(delta=1.0, max_iterations=iterations, decay=decay)

    def configs(v, m):
        return base.replace(method=m, delta=float(v), max_iterations=iterations, decay=decay,
                            alpha=None)

    return _sweep("delta", deltas, configs, models, dataset, methods, source, subset, names,
                  criterion, n_jobs, chunk_size, {"iterations": iterations, "decay": decay}, cache)


def sweep_iterations(models, dataset, methods, iteration_counts, delta=650.0, decay=0.8,
                     source=0, base=None, subset=None, names=None, criterion=None, n_jobs=1,
                     chunk_size=DEFAULT_CHUNK, cache=None):
    """Success rates as ``N`` grows at fixed ``delta``; step size ``delta / N`` per run."""
    _new_type_only(methods)
    base = base or AttackConfig(delta=delta, decay=decay)

    def configs(v, m):
        return base.replace(method=m, delta=delta, max_iterations=int(v), decay=decay, alpha=None)

    return _sweep("iterations", iteration_counts, configs, models, dataset, methods, source,
                  subset, names, criterion, n_jobs, chunk_size,
                  {"delta": delta, "decay": decay}, cache)


def sweep_decay(models, dataset, methods, mus, delta=650.0, iterations=250, source=0, base=None,
                subset=None, names=None, criterion=None, n_jobs=1, chunk_size=DEFAULT_CHUNK,
                cache=None):
    """Success rates of the momentum methods as the decay factor grows."""
    for m in methods:
        if not Method.parse(m).momentum:
            raise ValueError(f"decay sweep needs momentum methods, got {Method.parse(m).value}")
    base = base or AttackConfig(delta=delta, max_iterations=iterations)

    def configs(v, m):
        return base.replace(method=m, delta=delta, max_iterations=iterations, decay=float(v),
                            alpha=None)

    return _sweep("decay", mus, configs, models, dataset, methods, source, subset, names,
                  criterion, n_jobs, chunk_size, {"delta": delta, "iterations": iterations}, cache)


def _fmt_rate(r):
    return f"{r:.1f}"


def _matrix_rows(matrices):
    rows = []
    for mat in matrices:
        for s, row in zip(mat.sources, mat.rates):
            rows.append([s, mat.method, *row])
    return rows


def render_report(item, out_dir, name, fingerprint=""):
    """Write ``<name>.csv`` and a plain-text ``<name>.txt`` summary.

    ``item`` is a :class:`SweepResult`, a :class:`TransferMatrix`, or a list of
    matrices (one per method) rendered as a single table. Returns the paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, txt_path = out / f"{name}.csv", out / f"{name}.txt"

    if isinstance(item, SweepResult):
        header = [item.parameter] + [f"{m}/{t}" for m in item.methods for t in item.targets]
        rows = [[v] + [r for per_method in row for r in per_method]
                for v, row in zip(item.values, item.rates)]
        title = (f"sweep over {item.parameter}, source {item.source}, "
                 f"fixed {json.dumps(item.fixed, sort_keys=True)}")
        table_header = [item.parameter] + [f"{m}/{t}" + ("*" if t == item.source else "")
                                           for m in item.methods for t in item.targets]
        table_rows = [[str(v)] + [_fmt_rate(x) for x in r[1:]] for v, r in zip(item.values, rows)]
    else:
        matrices = item if isinstance(item, (list, tuple)) else [item]
        if not matrices:
            raise ValueError("no matrices to render")
        targets = matrices[0].targets
        if any(m.targets != targets for m in matrices):
            raise ValueError("matrices have different target models")
        header = ["source", "method", *targets]
        rows = _matrix_rows(matrices)
        title = "success rate (%) of new-type examples; * marks white-box cells"
        table_header = header
        table_rows = [[r[0], r[1]] + [_fmt_rate(x) + ("*" if r[0] == t else "")
                                      for x, t in zip(r[2:], targets)] for r in rows]

    dataio.write_csv(rows, header, csv_path)

    widths = [max(len(str(c)) for c in col) for col in zip(table_header, *table_rows)]
    lines = [title]
    if fingerprint:
        lines.append(f"config fingerprint: {fingerprint}")
    lines.append("  ".join(h.rjust(w) for h, w in zip(table_header, widths)))
    lines.extend("  ".join(str(c).rjust(w) for c, w in zip(r, widths)) for r in table_rows)
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return csv_path, txt_path


def new_type_methods():
    return [m.value for m in NEW_TYPE_METHODS]
