"""Gradient-sign attacks: the classic ones and their negative-direction twins.

Classic methods (FGSM, FGM, I-FGSM) push an image *up* the loss within an
epsilon budget so that the model changes its answer. The negative methods
(NI-FGSM, NI-FGM and the momentum variants NMI-FGSM, NMI-FGM) walk *down* the
loss of the true class while travelling far from the original image, producing
inputs that look nothing like the source but are still given its label.

All attacks are batched over the leading axis of ``X``. Each sample is
processed independently: per-sample termination, per-sample normalisation.
"""

import dataclasses
import enum

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import tensor
from .tensor import Norm
from .validation import check_images, check_is_trained, check_labels

__all__ = [
    "Method",
    "Termination",
    "AttackConfig",
    "AttackResult",
    "MomentumState",
    "update_momentum",
    "fgsm",
    "fgm",
    "i_fgsm",
    "ni_fgsm",
    "ni_fgm",
    "nmi_fgsm",
    "nmi_fgm",
    "run_attack",
    "GradientAttack",
]


class Method(str, enum.Enum):
    FGSM = "FGSM"
    FGM = "FGM"
    I_FGSM = "I-FGSM"
    NI_FGSM = "NI-FGSM"
    NI_FGM = "NI-FGM"
    NMI_FGSM = "NMI-FGSM"
    NMI_FGM = "NMI-FGM"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("_", "-")
        for m in cls:
            if m.value == key or m.value.replace("-", "") == key.replace("-", ""):
                return m
        raise ValueError(f"unknown attack method {value!r}; choose from "
                         f"{', '.join(m.value for m in cls)}")

    @property
    def norm(self):
        return Norm.L2 if self in (Method.FGM, Method.NI_FGM, Method.NMI_FGM) else Norm.LINF

    @property
    def new_type(self):
        return self in NEW_TYPE_METHODS

    @property
    def momentum(self):
        return self in (Method.NMI_FGSM, Method.NMI_FGM)


NEW_TYPE_METHODS = (Method.NI_FGSM, Method.NI_FGM, Method.NMI_FGSM, Method.NMI_FGM)


class Termination(str, enum.Enum):
    FIXED = "fixed"
    DISTANCE = "distance"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"fixed": cls.FIXED, "fixediterations": cls.FIXED, "fixed-iterations": cls.FIXED,
                   "distance": cls.DISTANCE, "distancereached": cls.DISTANCE,
                   "distance-reached": cls.DISTANCE}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown termination rule {value!r}; use 'fixed' or 'distance'") from None


@dataclasses.dataclass(frozen=True)
class AttackConfig:
    """Everything that defines one attack run.

    ``alpha=None`` means the conventional default: ``delta / max_iterations``
    for the negative methods, ``epsilon / max_iterations`` for I-FGSM.
    ``distance_norm`` is the norm used for the ``delta`` termination test;
    it is independent of the step geometry.

    ``identity=True`` is a guard mode that takes zero steps and returns the
    inputs untouched, whatever the method.
    """

    method: Method = Method.NI_FGSM
    epsilon: float = 0.0
    delta: float = 0.0
    alpha: float = None
    max_iterations: int = 10
    decay: float = 0.0
    termination: Termination = Termination.FIXED
    clamp_range: tuple = (0.0, 255.0)
    target: int = None
    distance_norm: Norm = Norm.L2
    identity: bool = False
    record_trace: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method.parse(self.method))
        object.__setattr__(self, "termination", Termination.parse(self.termination))
        object.__setattr__(self, "distance_norm", Norm.parse(self.distance_norm))
        object.__setattr__(self, "clamp_range", tuple(float(v) for v in self.clamp_range))
        self.validate()

    @property
    def norm(self):
        return self.method.norm

    @property
    def step_size(self):
        if self.alpha is not None:
            return float(self.alpha)
        if self.method is Method.I_FGSM:
            return self.epsilon / self.max_iterations
        if self.method.new_type:
            return self.delta / self.max_iterations
        return self.epsilon

    def validate(self):
        lo, hi = self.clamp_range
        if lo > hi:
            raise ValueError(f"clamp_range inverted: {self.clamp_range}")
        if self.epsilon < 0 or self.delta < 0:
            raise ValueError("epsilon and delta must be non-negative")
        if not isinstance(self.max_iterations, (int, np.integer)) or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")
        if self.decay < 0:
            raise ValueError(f"decay must be non-negative, got {self.decay}")
        if self.termination is Termination.DISTANCE and not self.delta > 0:
            raise ValueError("termination='distance' requires delta > 0")
        iterative = self.method.new_type or self.method is Method.I_FGSM
        if iterative and not self.identity and not self.step_size > 0:
            raise ValueError(f"step size must be > 0 (alpha={self.alpha}, delta={self.delta}, "
                             f"epsilon={self.epsilon}, N={self.max_iterations})")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["method"] = self.method.value
        d["termination"] = self.termination.value
        d["distance_norm"] = self.distance_norm.value
        d["clamp_range"] = list(self.clamp_range)
        d["step_size"] = self.step_size
        return d


@dataclasses.dataclass
class AttackResult:
    """Outcome of attacking one example."""

    adversarial: np.ndarray
    label: int
    iterations_used: int
    distance_linf: float
    distance_l2: float
    original_prediction: int
    adversarial_prediction: int
    loss_initial: float
    loss_final: float
    zero_gradient: bool = False
    reached_delta: bool = None
    trace: list = None

    def to_dict(self, include_image=False):
        d = dataclasses.asdict(self)
        del d["adversarial"]
        if include_image:
            d["adversarial"] = self.adversarial.tolist()
        if self.trace is not None:
            d["trace"] = [list(t) for t in self.trace]
        return d


@dataclasses.dataclass
class MomentumState:
    """Accumulated normalised gradient; starts at zero."""

    g: np.ndarray

    @classmethod
    def zeros_like(cls, x):
        return cls(np.zeros_like(np.asarray(x, dtype=np.float64)))


def _l1_normalize(grad):
    """Divide each sample's gradient by its L1 norm; all-zero samples stay zero."""
    n1 = tensor.batch_norm(grad, Norm.L1)
    safe = np.where(n1 > 0, n1, 1.0)
    return grad / safe.reshape((-1,) + (1,) * (grad.ndim - 1))


def _l2_unit(v):
    """Per-sample ``v / ||v||_2`` plus a mask of samples whose norm was zero."""
    n2 = tensor.batch_norm(v, Norm.L2)
    zero = ~(n2 > 0)
    safe = np.where(zero, 1.0, n2)
    return v / safe.reshape((-1,) + (1,) * (v.ndim - 1)), zero


def update_momentum(state, grad, mu):
    """One momentum update: ``mu * g + grad / ||grad||_1``.

    A zero gradient contributes a zero term.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if np.shape(state.g) != grad.shape:
        raise ValueError(f"shape mismatch: {np.shape(state.g)} vs {grad.shape}")
    normed = _l1_normalize(grad[None])[0]
    return MomentumState(mu * state.g + normed)


def _prepare(model, X, y, config):
    check_is_trained(model)
    X = check_images(X, model.spec_.input_shape)
    y = check_labels(y, len(X), model.spec_.n_classes)
    lo, hi = config.clamp_range
    if X.size and (X.min() < lo or X.max() > hi):
        raise ValueError(f"input pixels outside clamp_range {config.clamp_range}")
    if config.target is not None:
        if not 0 <= config.target < model.spec_.n_classes:
            raise ValueError(f"target {config.target} outside [0, {model.spec_.n_classes})")
        if config.method.new_type and np.any(y != config.target):
            raise ValueError(
                f"{config.method.value} always keeps the true class; a target different from "
                "the label is not a valid configuration"
            )
    return X, y


def _finish(model, X0, X, y, loss0, pred0, iters, zero_grad, reached, traces, config):
    loss_final = model.loss(X, y)
    pred = model.predict(X)
    diff = X - X0
    linf = tensor.batch_norm(diff, Norm.LINF)
    l2 = tensor.batch_norm(diff, Norm.L2)
    results = []
    for i in range(len(X)):
        results.append(AttackResult(
            adversarial=X[i],
            label=int(y[i]),
            iterations_used=int(iters[i]),
            distance_linf=float(linf[i]),
            distance_l2=float(l2[i]),
            original_prediction=int(pred0[i]),
            adversarial_prediction=int(pred[i]),
            loss_initial=float(loss0[i]),
            loss_final=float(loss_final[i]),
            zero_gradient=bool(zero_grad[i]),
            reached_delta=None if reached is None else bool(reached[i]),
            trace=None if traces is None else traces[i],
        ))
    return results


def _identity(model, X, y, config):
    loss0 = model.loss(X, y)
    pred0 = model.predict(X)
    n = len(X)
    traces = [[] for _ in range(n)] if config.record_trace else None
    return _finish(model, X, X.copy(), y, loss0, pred0, np.zeros(n, int), np.zeros(n, bool),
                   None, traces, config)


def _one_step(model, X, y, config, l2):
    X, y = _prepare(model, X, y, config)
    if config.identity:
        return _identity(model, X, y, config)
    lo, hi = config.clamp_range
    targeted = config.target is not None
    y_loss = np.full_like(y, config.target) if targeted else y
    loss0, grad = model.loss_and_input_gradient(X, y_loss)
    pred0 = model.predict(X)
    if l2:
        direction, zero = _l2_unit(grad)
    else:
        direction = tensor.sign(grad)
        zero = ~(tensor.batch_norm(grad, Norm.L1) > 0)
    if targeted:
        direction = -direction
    adv = X + config.epsilon * direction
    if not l2:
        adv = tensor.clip_to_ball(adv, X, config.epsilon)
    adv = tensor.clamp(adv, lo, hi)
    adv[zero] = X[zero]
    iters = np.where(zero, 0, 1)
    traces = None
    if config.record_trace:
        ladv = model.loss(adv, y_loss)
        dist = tensor.batch_norm(adv - X, config.distance_norm)
        traces = [[(1, float(ladv[i]), float(dist[i]))] if iters[i] else [] for i in range(len(X))]
    return _finish(model, X, adv, y_loss, loss0, pred0, iters, zero, None, traces, config)


def fgsm(model, X, y, config):
    """Single signed-gradient step of size epsilon (L-infinity budget)."""
    return _one_step(model, X, y, config.replace(method=Method.FGSM), l2=False)


def fgm(model, X, y, config):
    """Single L2-normalised gradient step of length epsilon.

    A sample whose gradient is exactly zero is returned unchanged with
    ``zero_gradient`` set.
    """
    return _one_step(model, X, y, config.replace(method=Method.FGM), l2=True)


def _iterate(model, X, y, config, on_step=None):
    """Shared loop for I-FGSM and the four negative methods.

    ``on_step(it, x_before, x_unclamped, x_after, active)`` is a test hook.
    """
    X0, y = _prepare(model, X, y, config)
    if config.identity:
        return _identity(model, X0, y, config)
    method = config.method
    lo, hi = config.clamp_range
    alpha = config.step_size
    n = len(X0)
    targeted = config.target is not None and method is Method.I_FGSM
    y_loss = np.full_like(y, config.target) if targeted else y

    x = X0.copy()
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    zero_grad = np.zeros(n, dtype=bool)
    reached = np.zeros(n, dtype=bool) if config.termination is Termination.DISTANCE else None
    traces = [[] for _ in range(n)] if config.record_trace else None
    g = np.zeros_like(X0)
    bshape = (-1,) + (1,) * (X0.ndim - 1)

    loss0, grad = model.loss_and_input_gradient(x, y_loss)
    pred0 = model.predict(X0)

    for it in range(config.max_iterations):
        if it > 0:
            if not active.any():
                break
            _, grad = model.loss_and_input_gradient(x, y_loss)

        if method is Method.I_FGSM:
            step = tensor.sign(grad)
            if not targeted:
                step = -step
            stop = ~(tensor.batch_norm(grad, Norm.L1) > 0)
        else:
            d = _l1_normalize(grad)
            if method.momentum:
                g = config.decay * g + d
                d = g
            if method in (Method.NI_FGSM, Method.NMI_FGSM):
                step = tensor.sign(d)
                stop = ~(tensor.batch_norm(d, Norm.L1) > 0)
            else:
                step, stop = _l2_unit(d)

        # a zero step direction is a stationary point: stop that sample
        stop &= active
        zero_grad |= stop
        active &= ~stop
        x_new = x - alpha * step
        if method is Method.I_FGSM:
            x_new = tensor.clip_to_ball(x_new, X0, config.epsilon)
        x_clamped = tensor.clamp(x_new, lo, hi)
        if on_step is not None:
            on_step(it, x, x_new, x_clamped, active.copy())
        x = np.where(active.reshape(bshape), x_clamped, x)
        iters += active

        if traces is not None and active.any():
            loss_now = model.loss(x, y_loss)
            dist = tensor.batch_norm(x - X0, config.distance_norm)
            for i in np.flatnonzero(active):
                traces[i].append((it + 1, float(loss_now[i]), float(dist[i])))

        if reached is not None:
            dist = tensor.batch_norm(x - X0, config.distance_norm)
            hit = active & (dist >= config.delta)
            reached |= hit
            active &= ~hit

    return _finish(model, X0, x, y_loss, loss0, pred0, iters, zero_grad, reached, traces, config)


def i_fgsm(model, X, y, config):
    """Iterative FGSM with per-step clipping into the epsilon ball."""
    return _iterate(model, X, y, config.replace(method=Method.I_FGSM))


def ni_fgsm(model, X, y, config):
    """Iterated signed steps *down* the true-class loss."""
    return _iterate(model, X, y, config.replace(method=Method.NI_FGSM))


def ni_fgm(model, X, y, config):
    """Iterated L2-normalised steps down the true-class loss."""
    return _iterate(model, X, y, config.replace(method=Method.NI_FGM))


def nmi_fgsm(model, X, y, config):
    """NI-FGSM driven by the decayed sum of L1-normalised gradients."""
    return _iterate(model, X, y, config.replace(method=Method.NMI_FGSM))


def nmi_fgm(model, X, y, config):
    return _iterate(model, X, y, config.replace(method=Method.NMI_FGM))


_DISPATCH = {
    Method.FGSM: fgsm,
    Method.FGM: fgm,
    Method.I_FGSM: i_fgsm,
    Method.NI_FGSM: ni_fgsm,
    Method.NI_FGM: ni_fgm,
    Method.NMI_FGSM: nmi_fgsm,
    Method.NMI_FGM: nmi_fgm,
}


def run_attack(model, X, y, config):
    """Run ``config.method`` on a batch; returns one :class:`AttackResult` per sample."""
    if not isinstance(config, AttackConfig):
        raise TypeError(f"expected AttackConfig, got {type(config).__name__}")
    return _DISPATCH[config.method](model, X, y, config)


class GradientAttack(TransformerMixin, BaseEstimator):
    """Transformer that maps images to adversarial images against ``estimator``.

    Labels passed as ``y`` are the classes to keep (negative methods) or to
    move away from (classic methods). When ``y`` is omitted the estimator's
    own predictions are used.

    >>> attack = GradientAttack(clf, method="NMI-FGSM", delta=650, max_iterations=250, decay=0.8)
    >>> X_adv = attack.fit(X).transform(X, y)            # doctest: +SKIP
    """

    def __init__(self, estimator=None, method="NI-FGSM", epsilon=0.0, delta=650.0, alpha=None,
                 max_iterations=250, decay=0.8, termination="fixed", clamp_range=(0.0, 255.0),
                 target=None, distance_norm="l2", identity=False, record_trace=False,
                 batch_size=100):
        self.estimator = estimator
        self.method = method
        self.epsilon = epsilon
        self.delta = delta
        self.alpha = alpha
        self.max_iterations = max_iterations
        self.decay = decay
        self.termination = termination
        self.clamp_range = clamp_range
        self.target = target
        self.distance_norm = distance_norm
        self.identity = identity
        self.record_trace = record_trace
        self.batch_size = batch_size

    def _config(self):
        return AttackConfig(
            method=self.method, epsilon=self.epsilon, delta=self.delta, alpha=self.alpha,
            max_iterations=self.max_iterations, decay=self.decay, termination=self.termination,
            clamp_range=self.clamp_range, target=self.target, distance_norm=self.distance_norm,
            identity=self.identity, record_trace=self.record_trace,
        )

    def fit(self, X=None, y=None):
        """Validate the configuration and the wrapped estimator. Learns nothing."""
        if self.estimator is None:
            raise ValueError("GradientAttack needs a trained estimator")
        check_is_trained(self.estimator)
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        self.config_ = self._config()
        self.n_features_in_ = self.estimator.n_features_in_
        return self

    def generate(self, X, y=None):
        """Attack every row of ``X``; returns a list of :class:`AttackResult`."""
        if not hasattr(self, "config_"):
            self.fit()
        X = check_images(X, self.estimator.spec_.input_shape)
        if y is None:
            y = self.estimator.predict(X)
        y = check_labels(y, len(X), self.estimator.spec_.n_classes)
        results = []
        for start in range(0, len(X), self.batch_size):
            sl = slice(start, start + self.batch_size)
            results.extend(run_attack(self.estimator, X[sl], y[sl], self.config_))
        return results

    def transform(self, X, y=None):
        shape = np.shape(X)
        results = self.generate(X, y)
        self.results_ = results
        if not results:
            return np.zeros(shape)
        return np.stack([r.adversarial for r in results]).reshape(shape)

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).transform(X, y)
