"""Command-line entry point: read a config, run the experiment, write tables.

Config files are YAML with three optional sections::

    experiment:
      snr_db: [0, 5, 10, 15]
      sensors: [1, 5]
      symbols: 100
      trials: 500
      seed: 0
      formats: [8PSK, 8QAM, 16PSK, 16QAM]
      classifiers: [clairvoyant, gem]
      jobs: 1
    signal:
      samples_per_symbol: 16
      rolloff: 0.3
      span_symbols: 8
      noise_psd: 1.0
    estimator:
      init: perturbed:5,0.3141592653589793,0.1
      stop_delta: 0.001
      max_iterations: 200
      epsilon_grid: 50
      refine_tol: 0.0001
      theta_grid: 60
      amplitude_floor: 1.0e-6

A classifier entry is either a kind name or a mapping with ``name``,
``kind`` and optional ``init`` / ``gem`` overrides. Command-line flags
replace file values.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import asdict, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .constellation import QUATERNARY_SET, SUPPORTED_FORMATS
from .exceptions import ConfigurationError
from .gem import GemConfig
from .harness import CLASSIFIER_KINDS, ClassifierSpec, ExperimentConfig, run_experiment
from .init import Fixed, PerturbedTruth, SAConfig, SimulatedAnnealing

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# -- typed leaf readers ----------------------------------------------------------


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_real(v):
    return (_is_int(v) or isinstance(v, (float, np.floating))) and math.isfinite(float(v))


def _int(key, v, lo=None, hi=None):
    if not _is_int(v):
        raise ConfigurationError(f"{key}: expected an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigurationError(f"{key}: must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigurationError(f"{key}: must be <= {hi}, got {v}")
    return v


def _real(key, v, lo=None, positive=False):
    if not _is_real(v):
        raise ConfigurationError(f"{key}: expected a finite number, got {v!r}")
    v = float(v)
    if positive and not v > 0:
        raise ConfigurationError(f"{key}: must be positive, got {v}")
    if lo is not None and v < lo:
        raise ConfigurationError(f"{key}: must be >= {lo}, got {v}")
    return v


def _list(key, v, item):
    if not isinstance(v, (list, tuple)):
        raise ConfigurationError(f"{key}: expected a list, got {v!r}")
    if not v:
        raise ConfigurationError(f"{key}: must not be empty")
    return tuple(item(f"{key}[{i}]", x) for i, x in enumerate(v))


def _format_id(key, v):
    if v not in SUPPORTED_FORMATS:
        raise ConfigurationError(f"{key}: unknown format {v!r}; supported: {', '.join(SUPPORTED_FORMATS)}")
    return v


def _mapping(key, v):
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigurationError(f"{key}: expected a mapping, got {v!r}")
    return v


def _reject_unknown(key, given, allowed):
    extra = sorted(set(given) - set(allowed))
    if extra:
        where = f"{key}." if key else ""
        raise ConfigurationError(f"unknown key {where}{extra[0]}; allowed: {', '.join(sorted(allowed))}")


# -- init schemes ------------------------------------------------------------------

_SA_FIELDS = {f.name for f in fields(SAConfig)}


def parse_init(text, key="--init"):
    """Parse ``perturbed:da,dth,deps``, ``sa:uniform``, ``sa:nonuniform`` or ``fixed``.

    A mapping form ``{scheme: sa, grid_points_theta: 20, ...}`` is also
    accepted so that every SA setting survives the config echo.
    """
    if isinstance(text, dict):
        return _init_from_mapping(key, text)
    if not isinstance(text, str):
        raise ConfigurationError(f"{key}: expected an init spec string, got {text!r}")
    name, _, arg = text.partition(":")
    if name == "fixed" and not arg:
        return Fixed()
    if name == "perturbed":
        if not arg:
            return PerturbedTruth()
        parts = arg.split(",")
        if len(parts) != 3:
            raise ConfigurationError(f"{key}: perturbed needs three bounds 'da,dtheta,deps', got {arg!r}")
        try:
            da, dth, de = (float(p) for p in parts)
        except ValueError:
            raise ConfigurationError(f"{key}: perturbation bounds must be numbers, got {arg!r}") from None
        if min(da, dth, de) < 0 or not all(map(math.isfinite, (da, dth, de))):
            raise ConfigurationError(f"{key}: perturbation bounds must be finite and non-negative")
        return PerturbedTruth(da, dth, de)
    if name == "sa" and arg in ("uniform", "nonuniform"):
        return SimulatedAnnealing(getattr(SAConfig, arg)())
    raise ConfigurationError(
        f"{key}: unknown init {text!r}; expected perturbed:da,dth,deps | sa:uniform | sa:nonuniform | fixed"
    )


def _init_from_mapping(key, m):
    scheme = m.get("scheme")
    if scheme == "fixed":
        _reject_unknown(key, m, {"scheme"})
        return Fixed()
    if scheme == "perturbed":
        _reject_unknown(key, m, {"scheme", "delta_a", "delta_theta", "delta_epsilon"})
        return PerturbedTruth(
            *(_real(f"{key}.{n}", m.get(n, d), lo=0.0) for n, d in
              (("delta_a", 5.0), ("delta_theta", math.pi / 10), ("delta_epsilon", 0.1)))
        )
    if scheme == "sa":
        _reject_unknown(key, m, _SA_FIELDS | {"scheme", "sigma"})
        kw = {}
        for name in _SA_FIELDS:
            if name not in m:
                continue
            if name == "mode":
                if m[name] not in ("joint", "per_sensor"):
                    raise ConfigurationError(f"{key}.mode: expected 'joint' or 'per_sensor', got {m[name]!r}")
                kw[name] = m[name]
            elif name in ("temperature_param", "amplitude_upper_quantile"):
                kw[name] = _real(f"{key}.{name}", m[name], positive=True)
            else:
                kw[name] = _int(f"{key}.{name}", m[name], lo=2)
        sigma = m.get("sigma")
        sigma = None if sigma is None else _real(f"{key}.sigma", sigma, positive=True)
        try:
            return SimulatedAnnealing(SAConfig(**kw), sigma)
        except ConfigurationError as exc:
            raise ConfigurationError(f"{key}: {exc}") from None
    raise ConfigurationError(f"{key}.scheme: expected perturbed, sa or fixed, got {scheme!r}")


def init_echo(init):
    if isinstance(init, PerturbedTruth):
        return {"scheme": "perturbed", **asdict(init)}
    if isinstance(init, SimulatedAnnealing):
        out = {"scheme": "sa", **asdict(init.config)}
        if init.sigma is not None:
            out["sigma"] = init.sigma
        return out
    if isinstance(init, Fixed) and init.params is None:
        return {"scheme": "fixed"}
    raise ConfigurationError(f"init {init!r} cannot be written to a config file")


# -- config ------------------------------------------------------------------------

_GEM_KEYS = {
    "stop_delta": dict(positive=True),
    "max_iterations": dict(lo=1),
    "epsilon_grid": dict(lo=2),
    "refine_tol": dict(positive=True),
    "theta_grid": dict(lo=2),
    "amplitude_floor": dict(positive=True),
}
_EXPERIMENT_KEYS = {"snr_db", "sensors", "symbols", "trials", "seed", "formats", "classifiers", "jobs"}
_SIGNAL_KEYS = {"samples_per_symbol", "rolloff", "span_symbols", "noise_psd"}
_TOP_KEYS = {"experiment", "signal", "estimator"}


def _gem_from(key, m, base=GemConfig()):
    kw = {}
    for name, rule in _GEM_KEYS.items():
        if name not in m:
            continue
        if "lo" in rule:
            kw[name] = _int(f"{key}.{name}", m[name], lo=rule["lo"])
        else:
            kw[name] = _real(f"{key}.{name}", m[name], positive=True)
    from dataclasses import replace

    return replace(base, **kw)


def _classifier(key, entry, default_init, default_gem):
    if isinstance(entry, str):
        if entry not in CLASSIFIER_KINDS:
            raise ConfigurationError(f"{key}: unknown classifier {entry!r}; expected one of {', '.join(CLASSIFIER_KINDS)}")
        return ClassifierSpec(entry, entry, default_init, default_gem)
    m = _mapping(key, entry)
    _reject_unknown(key, m, {"name", "kind", "init", "gem"})
    kind = m.get("kind", m.get("name"))
    if kind not in CLASSIFIER_KINDS:
        raise ConfigurationError(f"{key}.kind: unknown classifier {kind!r}; expected one of {', '.join(CLASSIFIER_KINDS)}")
    name = m.get("name", kind)
    if not isinstance(name, str) or not name:
        raise ConfigurationError(f"{key}.name: expected a nonempty string")
    init = parse_init(m["init"], f"{key}.init") if "init" in m else default_init
    gem_map = _mapping(f"{key}.gem", m.get("gem"))
    _reject_unknown(f"{key}.gem", gem_map, _GEM_KEYS)
    return ClassifierSpec(name, kind, init, _gem_from(f"{key}.gem", gem_map, default_gem))


def config_from_dict(data, overrides=None):
    """Build an ExperimentConfig from a parsed config mapping plus flag overrides.

    ``overrides`` uses the flattened keys ``experiment.snr_db``,
    ``estimator.init`` and so on; its values replace the file's.
    """
    data = _mapping("config", data)
    _reject_unknown("", data, _TOP_KEYS)
    exp = dict(_mapping("experiment", data.get("experiment")))
    sig = dict(_mapping("signal", data.get("signal")))
    est = dict(_mapping("estimator", data.get("estimator")))
    _reject_unknown("experiment", exp, _EXPERIMENT_KEYS)
    _reject_unknown("signal", sig, _SIGNAL_KEYS)
    _reject_unknown("estimator", est, set(_GEM_KEYS) | {"init"})

    init_override = None
    for flat, value in (overrides or {}).items():
        section, _, name = flat.partition(".")
        if section == "estimator" and name == "init":
            init_override = value
            continue
        {"experiment": exp, "signal": sig, "estimator": est}[section][name] = value

    default_init = parse_init(est["init"], "estimator.init") if "init" in est else PerturbedTruth()
    if init_override is not None:
        default_init = init_override
    default_gem = _gem_from("estimator", est)

    classifiers = _list(
        "experiment.classifiers",
        exp.get("classifiers", ["gem"]),
        lambda k, e: _classifier(k, e, default_init, default_gem),
    )
    if init_override is not None:
        classifiers = tuple(
            ClassifierSpec(c.name, c.kind, init_override, c.gem) for c in classifiers
        )
    names = [c.name for c in classifiers]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"experiment.classifiers: names must be unique, got {names}")

    formats = _list("experiment.formats", exp.get("formats", list(QUATERNARY_SET)), _format_id)
    if len(set(formats)) != len(formats):
        raise ConfigurationError(f"experiment.formats: duplicate format in {list(formats)}")

    kw = dict(
        snr_db_list=_list("experiment.snr_db", exp.get("snr_db", [0.0, 5.0, 10.0, 15.0]), _real),
        sensor_counts=_list("experiment.sensors", exp.get("sensors", [1, 5]), lambda k, v: _int(k, v, lo=1)),
        symbol_count=_int("experiment.symbols", exp.get("symbols", 100), lo=1),
        formats=formats,
        trials=_int("experiment.trials", exp.get("trials", 500), lo=1),
        master_seed=_int("experiment.seed", exp.get("seed", 0), lo=0, hi=2**64 - 1),
        classifiers=classifiers,
        samples_per_symbol=_int("signal.samples_per_symbol", sig.get("samples_per_symbol", 16), lo=4),
        rolloff=_real("signal.rolloff", sig.get("rolloff", 0.3), positive=True),
        span_symbols=_int("signal.span_symbols", sig.get("span_symbols", 8), lo=2),
        noise_psd=_real("signal.noise_psd", sig.get("noise_psd", 1.0), positive=True),
        jobs=_int("experiment.jobs", exp.get("jobs", 1), lo=1),
    )
    kw["snr_db_list"] = tuple(float(s) for s in kw["snr_db_list"])
    if kw["rolloff"] > 1:
        raise ConfigurationError(f"signal.rolloff: must lie in (0, 1], got {kw['rolloff']}")
    if kw["span_symbols"] % 2:
        raise ConfigurationError(f"signal.span_symbols: must be even, got {kw['span_symbols']}")
    return ExperimentConfig(**kw)


def parse_config(path=None, overrides=None):
    """Read a YAML config file (or none) and apply flag overrides.

    Args:
        path: config file path, an already-parsed mapping, or None for defaults.
        overrides: flattened ``section.key`` values taken from the command line.

    Raises:
        ConfigurationError: unreadable file, unknown key, wrong type or
            out-of-range value; the message names the key.
    """
    if path is None:
        data = {}
    elif isinstance(path, dict):
        data = path
    else:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from None
    return config_from_dict(data, overrides)


def config_echo(config):
    """Plain mapping that parse_config turns back into ``config``."""
    return {
        "experiment": {
            "snr_db": [float(s) for s in config.snr_db_list],
            "sensors": [int(L) for L in config.sensor_counts],
            "symbols": config.symbol_count,
            "trials": config.trials,
            "seed": config.master_seed,
            "formats": list(config.formats),
            "classifiers": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "init": init_echo(c.init),
                    "gem": {k: getattr(c.gem, k) for k in _GEM_KEYS},
                }
                for c in config.classifiers
            ],
            "jobs": config.jobs,
        },
        "signal": {
            "samples_per_symbol": config.samples_per_symbol,
            "rolloff": config.rolloff,
            "span_symbols": config.span_symbols,
            "noise_psd": config.noise_psd,
        },
    }


# -- output ------------------------------------------------------------------------


def _fmt(x):
    return f"{x:.6f}"


def pcc_table(result, classifier):
    """CSV text: snr_db, L, one P(H_i|H_i) column per format, pcc, mean_ms."""
    cfg = result.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "L", *cfg.formats, "pcc", "mean_ms"])
    for snr, L in cfg.cells:
        cell = result.cell(classifier, snr, L)
        w.writerow([repr(snr), L, *map(_fmt, cell.p_correct), _fmt(cell.pcc), f"{cell.mean_ms:.3f}"])
    return buf.getvalue()


def confusion_table(result, classifier, snr, L):
    cfg = result.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\decided", *cfg.formats])
    for fmt, row in zip(cfg.formats, result.cell(classifier, snr, L).counts):
        w.writerow([fmt, *map(int, row)])
    return buf.getvalue()


def _safe(name):
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name)


def _snr_tag(snr):
    return f"{snr:g}".replace("-", "m").replace(".", "p")


def manifest(result):
    cfg = result.config
    cells = result.cells.values()
    runtime = {}
    names = [c.name for c in cfg.classifiers]
    for snr, L in cfg.cells:
        ms = {n: result.cell(n, snr, L).mean_ms for n in names}
        runtime[f"snr={snr:g},L={L}"] = ms
    return {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "started_at": result.started_at,
        "finished_at": result.finished_at,
        "master_seed": cfg.master_seed,
        "config": config_echo(cfg),
        "ascent": {
            "gem_runs": sum(c.gem_runs for c in cells),
            "violations": sum(c.ascent_violations for c in cells),
            "worst_step": min((c.worst_ascent_step for c in cells), default=0.0),
        },
        "errors": sum(len(c.errors) for c in cells),
        "mean_ms_per_classification": runtime,
    }


def emit_results(result, out_dir, run_name=None):
    """Write tables, confusion matrices and the manifest into a fresh run directory.

    Returns:
        Path of the run directory (``<out_dir>/<timestamp>_seed<seed>``).

    Raises:
        OSError: the directory or a file cannot be written; the message
            carries the offending path.
    """
    cfg = result.config
    if run_name is None:
        stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
        run_name = f"{stamp}_seed{cfg.master_seed}"
    run_dir = Path(out_dir) / run_name
    files = {}
    for spec in cfg.classifiers:
        files[f"pcc_{_safe(spec.name)}.csv"] = pcc_table(result, spec.name)
        for snr, L in cfg.cells:
            files[f"confusion_{_safe(spec.name)}_snr{_snr_tag(snr)}_L{L}.csv"] = confusion_table(
                result, spec.name, snr, L
            )
    files["manifest.json"] = json.dumps(manifest(result), indent=2) + "\n"
    files["config.yaml"] = yaml.safe_dump(config_echo(cfg), sort_keys=False)

    try:
        run_dir.mkdir(parents=True, exist_ok=False)
    except OSError as exc:
        raise OSError(f"cannot create run directory {run_dir}: {exc.strerror or exc}") from None
    for name, text in files.items():
        path = run_dir / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None
    return run_dir


# -- argument parsing ------------------------------------------------------------


def _csv_of(convert, what):
    def parse(text):
        try:
            items = [convert(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma-separated list of {what}, got {text!r}")
        if not items:
            raise argparse.ArgumentTypeError(f"expected at least one {what}")
        return items

    return parse


def _init_arg(text):
    try:
        return parse_init(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser():
    p = argparse.ArgumentParser(
        prog="asyncamc",
        description="Monte Carlo modulation-classification experiments with multiple asynchronous sensors.",
    )
    p.add_argument("--config", type=Path, help="YAML config file")
    p.add_argument("--snr", type=_csv_of(float, "numbers"), help="SNR list in dB, e.g. 0,5,10")
    p.add_argument("--sensors", type=_csv_of(int, "integers"), help="sensor counts, e.g. 1,5")
    p.add_argument("--symbols", type=int, help="symbols per observation")
    p.add_argument("--trials", type=int, help="trials per true format per cell")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--formats", type=_csv_of(str, "format ids"), help="candidate formats")
    p.add_argument(
        "--classifiers", type=_csv_of(str, "classifier kinds"), help=f"any of {','.join(CLASSIFIER_KINDS)}"
    )
    p.add_argument("--init", type=_init_arg, help="perturbed:da,dth,deps | sa:uniform | sa:nonuniform | fixed")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--out", type=Path, default=Path("runs"), help="output root directory (default: runs)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return p


_FLAG_KEYS = {
    "snr": "experiment.snr_db",
    "sensors": "experiment.sensors",
    "symbols": "experiment.symbols",
    "trials": "experiment.trials",
    "seed": "experiment.seed",
    "formats": "experiment.formats",
    "classifiers": "experiment.classifiers",
    "jobs": "experiment.jobs",
    "init": "estimator.init",
}


def overrides_from_args(args):
    return {key: getattr(args, flag) for flag, key in _FLAG_KEYS.items() if getattr(args, flag) is not None}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        config = parse_config(args.config, overrides_from_args(args))
        result = run_experiment(config, progress=lambda cell: log.info("finished chunk of cell %s", cell))
        run_dir = emit_results(result, args.out)
    except ConfigurationError as exc:
        print(f"asyncamc: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"asyncamc: {exc}", file=sys.stderr)
        return 3
    errors = sum(len(c.errors) for c in result.cells.values())
    if errors:
        print(f"asyncamc: warning: {errors} classifier failures recorded in the run", file=sys.stderr)
    print(run_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
