"""Command-line driver: ``negattack {train,attack,matrix,sweep,export}``.

Runs are described by an INI file. Every artifact written under ``--out``
carries the fingerprint of the canonicalised config (``out`` and ``jobs`` are
excluded because they cannot change any result).

Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 internal error,
5 artifacts from a different configuration.
"""

import argparse
import configparser
import dataclasses
import hashlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import dataio, harness
from .architectures import ARCHITECTURES
from .attacks import NEW_TYPE_METHODS, AttackConfig, Method, Termination, run_attack
from .classifier import ModelFormatError, NetClassifier, load_model
from .tensor import Norm

logger = logging.getLogger("negattack")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4
EXIT_MISMATCH = 5

SWEEPS = ("perturbation", "iterations", "decay")
_DATA_KEYS = ("train_images", "train_labels", "test_images", "test_labels")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _floats(text):
    return [float(v) for v in _items(text)]


def _ints(text):
    return [int(v) for v in _items(text)]


def _items(text):
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _opt_float(text):
    text = str(text).strip()
    return None if text.lower() in ("", "none") else float(text)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """The merged, validated run description."""

    data: dict
    seed: int
    models: tuple
    subset: dict
    attack: dict
    sweeps: dict
    export: dict
    chunk_size: int
    out: Path
    jobs: int
    base: Path = Path(".")

    def canonical(self):
        d = dataclasses.asdict(self)
        del d["out"], d["jobs"], d["base"]
        d["models"] = list(d["models"])
        return d

    @property
    def fingerprint(self):
        return _digest(self.canonical())

    @property
    def train_fingerprint(self):
        c = self.canonical()
        return _digest({"data": c["data"], "seed": c["seed"], "models": c["models"]})

    def model_names(self):
        return [m["name"] for m in self.models]


def _digest(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _get(parser, section, key, fallback, conv=str):
    if not parser.has_option(section, key):
        return fallback
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise UsageError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _parse_overrides(pairs):
    out = []
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        section, dot, option = key.strip().rpartition(".")
        if not sep or not dot:
            raise UsageError(f"--set expects section.key=value, got {pair!r}")
        out.append((section, option, value.strip()))
    return out


def load_config(path, seed=None, out=None, jobs=None, overrides=None):
    """Read an INI run description and apply command-line overrides."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    for section, option, value in _parse_overrides(overrides):
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value)
    base = path.resolve().parent

    if not parser.has_section("data"):
        raise UsageError(f"{path}: missing [data] section")
    data = {}
    for key in _DATA_KEYS:
        if not parser.has_option("data", key):
            raise UsageError(f"{path}: [data] needs {key}")
        data[key] = parser.get("data", key).strip()

    run_seed = int(seed) if seed is not None else _get(parser, "run", "seed", 0, int)

    training = {
        "learning_rate": _get(parser, "training", "learning_rate", 0.05, float),
        "epochs": _get(parser, "training", "epochs", 15, int),
        "batch_size": _get(parser, "training", "batch_size", 32, int),
        "target_accuracy": _get(parser, "training", "target_accuracy", None, _opt_float),
    }
    models = []
    for section in parser.sections():
        if not section.startswith("model:"):
            continue
        name = section.split(":", 1)[1].strip()
        arch = _get(parser, section, "architecture", name)
        if arch not in ARCHITECTURES:
            raise UsageError(f"[{section}] unknown architecture {arch!r}; "
                             f"choose from {', '.join(ARCHITECTURES)}")
        entry = {"name": name, "architecture": arch,
                 "seed": _get(parser, section, "seed", run_seed + len(models) + 1, int)}
        for key, default in training.items():
            conv = _opt_float if key == "target_accuracy" else type(default or 0.0)
            entry[key] = _get(parser, section, key, default, conv)
        models.append(entry)
    if not models:
        raise UsageError(f"{path}: define at least one [model:NAME] section")
    names = [m["name"] for m in models]
    if len(set(names)) != len(names):
        raise UsageError("model names must be distinct")

    subset = {
        "size": _get(parser, "subset", "size", 500, int),
        "seed": _get(parser, "subset", "seed", run_seed, int),
        "min_per_class": _get(parser, "subset", "min_per_class", 0, int),
    }

    methods = _get(parser, "attack", "methods", [m.value for m in NEW_TYPE_METHODS], _items)
    attack = {
        "methods": [_method(m) for m in methods],
        "epsilon": _get(parser, "attack", "epsilon", 16.0, float),
        "delta": _get(parser, "attack", "delta", 650.0, float),
        "iterations": _get(parser, "attack", "iterations", 250, int),
        "decay": _get(parser, "attack", "decay", 0.8, float),
        "alpha": _get(parser, "attack", "alpha", None, _opt_float),
        "termination": _get(parser, "attack", "termination", "fixed",
                            lambda v: Termination.parse(v).value),
        "distance_norm": _get(parser, "attack", "distance_norm", "l2",
                              lambda v: Norm.parse(v).value),
    }
    _attack_config(attack, attack["methods"][0] if attack["methods"] else "NI-FGSM")

    sweeps = {}
    for which in SWEEPS:
        section = f"sweep:{which}"
        if not parser.has_section(section):
            continue
        default_methods = (["NMI-FGSM", "NMI-FGM"] if which == "decay"
                           else [m.value for m in NEW_TYPE_METHODS])
        conv = _ints if which == "iterations" else _floats
        sweep = {
            "values": _get(parser, section, "values", [], conv),
            "methods": [_method(m) for m in _get(parser, section, "methods", default_methods,
                                                  _items)],
            "source": _get(parser, section, "source", names[0]).strip(),
            "delta": _get(parser, section, "delta", attack["delta"], float),
            "iterations": _get(parser, section, "iterations", attack["iterations"], int),
            "decay": _get(parser, section, "decay", attack["decay"], float),
        }
        if sweep["source"] not in names:
            raise UsageError(f"[{section}] source {sweep['source']!r} is not a defined model")
        if not sweep["values"]:
            raise UsageError(f"[{section}] needs values")
        sweeps[which] = sweep

    export = {
        "source": _get(parser, "export", "source", names[0]).strip(),
        "count": _get(parser, "export", "count", 4, int),
        "format": _get(parser, "export", "format", "pgm").strip().lower(),
    }
    if export["source"] not in names:
        raise UsageError(f"[export] source {export['source']!r} is not a defined model")

    out_dir = Path(out) if out is not None else base / _get(parser, "run", "out", "runs/default")
    n_jobs = int(jobs) if jobs is not None else _get(parser, "run", "jobs", 1, int)
    if n_jobs == 0:
        raise UsageError("jobs must be nonzero")
    return RunConfig(data=data, seed=run_seed, models=tuple(models), subset=subset,
                     attack=attack, sweeps=sweeps, export=export,
                     chunk_size=_get(parser, "run", "chunk_size", harness.DEFAULT_CHUNK, int),
                     out=out_dir, jobs=n_jobs, base=base)


def _method(name):
    try:
        return Method.parse(name).value
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _attack_config(attack, method, **changes):
    params = dict(
        method=method, epsilon=attack["epsilon"], delta=attack["delta"],
        alpha=attack["alpha"], max_iterations=attack["iterations"], decay=attack["decay"],
        termination=attack["termination"], distance_norm=attack["distance_norm"],
    )
    params.update(changes)
    try:
        return AttackConfig(**params)
    except ValueError as exc:
        raise UsageError(f"invalid attack configuration: {exc}") from None


# ---------------------------------------------------------------- data / models

def _data_path(cfg, key):
    return cfg.base / cfg.data[key]


def load_split(cfg, split):
    images, labels = _data_path(cfg, f"{split}_images"), _data_path(cfg, f"{split}_labels")
    missing = [str(p) for p in (images, labels) if not p.is_file()]
    if missing:
        raise DataError(f"{split} data not found; expected IDX files at: " + ", ".join(missing))
    return dataio.load_idx(images, labels, name=images.parent.name, split=split)


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def _write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _dump_json(obj):
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: unreadable ({exc})") from None


def _train_one(entry, train, test):
    clf = NetClassifier(architecture=entry["architecture"], learning_rate=entry["learning_rate"],
                        epochs=entry["epochs"], batch_size=entry["batch_size"],
                        target_accuracy=entry["target_accuracy"], random_state=entry["seed"],
                        input_shape=train.image_shape, n_classes=train.n_classes)
    return clf.fit(train.images, train.labels, eval_set=(test.images, test.labels))


def load_suite(cfg):
    """Load the trained models named by ``cfg`` and check they match it."""
    manifest_path = cfg.out / "models" / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"no trained models at {manifest_path.parent}; run 'negattack train' first")
    manifest = _read_json(manifest_path)
    if manifest.get("train_fingerprint") != cfg.train_fingerprint:
        raise harness.FingerprintMismatch(
            f"models in {manifest_path.parent} were trained from a different configuration "
            f"({manifest.get('train_fingerprint')} vs {cfg.train_fingerprint}); rerun 'train'"
        )
    by_name = {m["name"]: m for m in manifest["models"]}
    models = []
    for name in cfg.model_names():
        entry = by_name.get(name)
        if entry is None:
            raise harness.FingerprintMismatch(f"manifest has no model {name!r}; rerun 'train'")
        model = load_model(manifest_path.parent / entry["file"])
        if dataio.model_fingerprint(model) != entry["model_fingerprint"]:
            raise harness.FingerprintMismatch(f"model file for {name} does not match the manifest")
        models.append(model)
    return models


def screened_subset(cfg, models, test, rescreen=False):
    """Reuse ``subset.json`` when it belongs to these models, otherwise screen anew."""
    path = cfg.out / "subset.json"
    prints = [dataio.model_fingerprint(m) for m in models]
    if path.is_file() and not rescreen:
        stored = _read_json(path)
        subset = dataio.EvalSubset.from_dict(stored["subset"])
        if list(subset.fingerprints) != prints:
            raise harness.FingerprintMismatch(
                f"{path} was screened against a different model suite; "
                "pass --rescreen or delete it"
            )
        if stored.get("params") == cfg.subset:
            return subset
        logger.info("subset parameters changed; screening again")
    subset = dataio.select_eval_subset(models, test, cfg.subset["size"], cfg.subset["seed"],
                                       cfg.subset["min_per_class"])
    doc = {"fingerprint": cfg.fingerprint, "params": cfg.subset, "subset": subset.to_dict()}
    _write_atomic(path, _dump_json(doc))
    logger.info("screened %d of %d test images", len(subset), len(test))
    return subset


# ---------------------------------------------------------------- commands

def cmd_train(cfg, args):
    train = load_split(cfg, "train")
    test = load_split(cfg, "test")
    logger.info("training %d models on %d images", len(cfg.models), len(train))
    fitted = Parallel(n_jobs=cfg.jobs)(delayed(_train_one)(m, train, test) for m in cfg.models)

    # everything trained: only now touch the output directory
    blobs, entries = [], []
    for entry, model in zip(cfg.models, fitted):
        fd, tmp = tempfile.mkstemp(suffix=".nat")
        os.close(fd)
        try:
            model.save(tmp)
            blob = Path(tmp).read_bytes()
        finally:
            Path(tmp).unlink(missing_ok=True)
        file_name = f"{entry['name']}.nat"
        blobs.append((file_name, blob))
        info = model.training_info_
        entries.append({
            "name": entry["name"],
            "architecture": entry["architecture"],
            "file": file_name,
            "sha256": hashlib.sha256(blob).hexdigest(),
            "model_fingerprint": dataio.model_fingerprint(model),
            "seed": info["seed"],
            "epochs_run": info["epochs_run"],
            "train_accuracy": info["train_accuracy"],
            "test_accuracy": info["test_accuracy"],
        })
        logger.info("%s: train %.4f test %.4f after %d epochs", entry["name"],
                    info["train_accuracy"], info["test_accuracy"], info["epochs_run"])
    model_dir = cfg.out / "models"
    for file_name, blob in blobs:
        _write_atomic(model_dir / file_name, blob)
    manifest = {"fingerprint": cfg.fingerprint, "train_fingerprint": cfg.train_fingerprint,
                "models": entries}
    _write_atomic(model_dir / "manifest.json", _dump_json(manifest))
    return EXIT_OK


def _resolve_example(cfg, args, model):
    if (args.index is None) == (args.image is None):
        raise UsageError("give exactly one of --index or --image")
    if args.index is not None:
        test = load_split(cfg, "test")
        if not 0 <= args.index < len(test):
            raise UsageError(f"--index {args.index} out of range [0, {len(test)})")
        return test.images[args.index], int(test.labels[args.index]), f"test{args.index}"
    path = Path(args.image)
    if not path.is_file():
        raise DataError(f"image not found: {path}")
    try:
        img = dataio.read_image(path)[None]
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    if img.shape != tuple(model.spec_.input_shape):
        raise UsageError(f"{path}: image shape {img.shape[1:]} does not match the model input "
                         f"{tuple(model.spec_.input_shape[1:])}")
    label = args.label if args.label is not None else int(model.predict(img[None])[0])
    if not 0 <= label < model.spec_.n_classes:
        raise UsageError(f"--label {label} out of range")
    return img, label, path.stem


def cmd_attack(cfg, args):
    names = cfg.model_names()
    name = args.model or names[0]
    if name not in names:
        raise UsageError(f"unknown model {name!r}; choose from {', '.join(names)}")
    method = _method(args.method)
    models = load_suite(cfg)
    model = models[names.index(name)]
    image, label, stem = _resolve_example(cfg, args, model)

    changes = {"identity": args.identity, "record_trace": args.trace}
    for attr, key in (("epsilon", "epsilon"), ("delta", "delta"), ("iterations", "max_iterations"),
                      ("decay", "decay"), ("alpha", "alpha"), ("termination", "termination")):
        value = getattr(args, attr)
        if value is not None:
            changes[key] = value
    if args.target is not None:
        changes["target"] = args.target
    config = _attack_config(cfg.attack, method, **changes)
    try:
        result = run_attack(model, image[None], np.array([label]), config)[0]
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    out = cfg.out / "attack"
    out.mkdir(parents=True, exist_ok=True)
    tag = f"{stem}_{name}_{method}"
    fmt = args.format
    orig_path, adv_path = out / f"{tag}_original.{fmt}", out / f"{tag}_adversarial.{fmt}"
    dataio.export_image(image, orig_path, fmt)
    dataio.export_image(result.adversarial, adv_path, fmt)
    dataio.export_image(_panel([image, result.adversarial]), out / f"{tag}_panel.{fmt}", fmt)
    exported = np.rint(result.adversarial) - np.rint(image)
    doc = {
        "fingerprint": cfg.fingerprint,
        "model": name,
        "model_fingerprint": dataio.model_fingerprint(model),
        "config": config.to_dict(),
        "result": result.to_dict(),
        "files": {"original": orig_path.name, "adversarial": adv_path.name},
        "exported_distance_l2": float(np.sqrt(np.sum(exported ** 2))),
        "exported_distance_linf": float(np.max(np.abs(exported))),
    }
    _write_atomic(out / f"{tag}.json", _dump_json(doc))
    logger.info("%s on %s: label %d -> prediction %d, L2 %.1f, loss %.4g -> %.4g", method, name,
                label, result.adversarial_prediction, result.distance_l2, result.loss_initial,
                result.loss_final)
    return EXIT_OK


def _panel(images, gap=2):
    """Place single-channel images side by side with a white gap."""
    tiles = [np.asarray(im, dtype=np.float64).reshape(np.shape(im)[-2:]) for im in images]
    h = tiles[0].shape[0]
    sep = np.full((h, gap), 255.0)
    parts = []
    for i, tile in enumerate(tiles):
        if i:
            parts.append(sep)
        parts.append(tile)
    return np.concatenate(parts, axis=1)


def _write_sidecar(cfg, name, payload):
    csv_bytes = (cfg.out / f"{name}.csv").read_bytes()
    doc = {"fingerprint": cfg.fingerprint, "csv_sha256": hashlib.sha256(csv_bytes).hexdigest(),
           **payload}
    _write_atomic(cfg.out / f"{name}.json", _dump_json(doc))


def run_matrix(cfg, rescreen=False, cache=None):
    models = load_suite(cfg)
    test = load_split(cfg, "test")
    subset = screened_subset(cfg, models, test, rescreen)
    names = cfg.model_names()
    matrices = []
    for method in cfg.attack["methods"]:
        config = _attack_config(cfg.attack, method)
        matrices.append(harness.transfer_matrix(models, test, config, subset, names,
                                                n_jobs=cfg.jobs, chunk_size=cfg.chunk_size,
                                                cache=cache))
    return matrices


def cmd_matrix(cfg, args):
    matrices = run_matrix(cfg, args.rescreen)
    harness.render_report(matrices, cfg.out, "matrix", cfg.fingerprint)
    _write_sidecar(cfg, "matrix", {"matrices": [dataclasses.asdict(m) for m in matrices]})
    for line in (cfg.out / "matrix.txt").read_text(encoding="utf-8").splitlines():
        logger.info("%s", line)
    return EXIT_OK


def run_sweep(cfg, which, rescreen=False, cache=None):
    if which not in cfg.sweeps:
        raise UsageError(f"config has no [sweep:{which}] section")
    sweep = cfg.sweeps[which]
    models = load_suite(cfg)
    test = load_split(cfg, "test")
    subset = screened_subset(cfg, models, test, rescreen)
    base = _attack_config(cfg.attack, sweep["methods"][0])
    common = dict(source=sweep["source"], base=base, subset=subset, names=cfg.model_names(),
                  n_jobs=cfg.jobs, chunk_size=cfg.chunk_size, cache=cache)
    try:
        if which == "perturbation":
            return harness.sweep_perturbation(models, test, sweep["methods"], sweep["values"],
                                              iterations=sweep["iterations"],
                                              decay=sweep["decay"], **common)
        if which == "iterations":
            return harness.sweep_iterations(models, test, sweep["methods"], sweep["values"],
                                            delta=sweep["delta"], decay=sweep["decay"], **common)
        return harness.sweep_decay(models, test, sweep["methods"], sweep["values"],
                                   delta=sweep["delta"], iterations=sweep["iterations"], **common)
    except harness.AttackFailure:
        raise
    except ValueError as exc:
        if isinstance(exc, (harness.FingerprintMismatch, dataio.InsufficientPoolError)):
            raise
        raise UsageError(f"[sweep:{which}] {exc}") from None


def cmd_sweep(cfg, args):
    result = run_sweep(cfg, args.which, args.rescreen)
    name = f"sweep_{args.which}"
    harness.render_report(result, cfg.out, name, cfg.fingerprint)
    _write_sidecar(cfg, name, {"sweep": dataclasses.asdict(result)})
    for line in (cfg.out / f"{name}.txt").read_text(encoding="utf-8").splitlines():
        logger.info("%s", line)
    return EXIT_OK


def cmd_export(cfg, args):
    names = cfg.model_names()
    models = load_suite(cfg)
    test = load_split(cfg, "test")
    subset = screened_subset(cfg, models, test, args.rescreen)
    source = cfg.export["source"]
    model = models[names.index(source)]
    count = min(cfg.export["count"], len(subset))
    data = subset.take(test).subset(range(count))
    methods = [m.value for m in NEW_TYPE_METHODS]
    columns = [data.images]
    preds = {}
    for method in methods:
        config = _attack_config(cfg.attack, method, record_trace=args.trace)
        results = harness.generate(model, data.images, data.labels, config, source=source)
        columns.append(np.stack([r.adversarial for r in results]))
        preds[method] = [{n: int(m.predict(r.adversarial[None])[0]) for n, m in zip(names, models)}
                         | {"distance_l2": r.distance_l2} for r in results]
    out = cfg.out / "export"
    out.mkdir(parents=True, exist_ok=True)
    fmt = cfg.export["format"]
    files = []
    for i, idx in enumerate(subset.indices[:count]):
        path = out / f"panel_{source}_test{idx}.{fmt}"
        dataio.export_image(_panel([col[i] for col in columns]), path, fmt)
        files.append(path.name)
    doc = {"fingerprint": cfg.fingerprint, "source": source, "columns": ["original"] + methods,
           "indices": list(subset.indices[:count]), "labels": data.labels.tolist(),
           "files": files, "predictions": preds}
    _write_atomic(out / "panels.json", _dump_json(doc))
    logger.info("wrote %d panels to %s", len(files), out)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="INI run description")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--jobs", type=int, help="parallel workers; results do not depend on it")
    common.add_argument("--trace", action="store_true",
                        help="record per-iteration (iteration, loss, distance) traces")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override any config value (repeatable)")
    common.add_argument("--log-level", default="INFO")

    parser = argparse.ArgumentParser(prog="negattack", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="train the model suite").set_defaults(
        func=cmd_train)

    p = sub.add_parser("attack", parents=[common], help="attack a single image")
    p.add_argument("--model", help="model name (default: first in config)")
    p.add_argument("--method", required=True, help="one of " +
                   ", ".join(m.value for m in Method))
    p.add_argument("--index", type=int, help="test-set index")
    p.add_argument("--image", help="PGM/PNG file instead of --index")
    p.add_argument("--label", type=int, help="true label for --image (default: prediction)")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--decay", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--termination", choices=[t.value for t in Termination])
    p.add_argument("--target", type=int, help="target class (classic methods only)")
    p.add_argument("--identity", action="store_true", help="0-step guard mode")
    p.add_argument("--format", choices=["pgm", "png"], default="pgm")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("matrix", parents=[common], help="white-box/black-box transfer matrix")
    p.add_argument("--rescreen", action="store_true", help="screen the evaluation subset again")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("sweep", parents=[common], help="hyperparameter sweep")
    p.add_argument("which", choices=SWEEPS)
    p.add_argument("--rescreen", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", parents=[common], help="qualitative example panels")
    p.add_argument("--rescreen", action="store_true")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.seed, args.out, args.jobs, args.set)
        return args.func(cfg, args)
    except UsageError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except harness.FingerprintMismatch as exc:
        logger.error("%s", exc)
        return EXIT_MISMATCH
    except (DataError, dataio.FormatError, ModelFormatError, dataio.InsufficientPoolError,
            FileNotFoundError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
