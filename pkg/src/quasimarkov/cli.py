"""Command-line front end.

Every command resolves one configuration dictionary with precedence
flags > config file > defaults, runs, and emits a report::

    {"command": ..., "status": "ok" | "numeric_failure", "config": {...}, "result": {...}}

Exit status is 0 on success, 2 on validation errors (nothing is written) and
3 on numeric failures (the report names the failing rule).  Reports embed the
resolved configuration, so ``--config report.json`` replays a run.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import diagnostics as diag
from ._io import csv_text, dumps, write_text_atomic
from .errors import NumericFailure, ValidationError
from .noise import DEFAULT_WINDOW, GaussianStepKernel, NoisePath, sample_stationary_paths, subcoupling
from .prediction import interpolate_two_sided, levinson
from .skew import BernoulliKernel, SkewSystem, evolve_ensemble, make_update
from .spectral import SpectralModel, classify, covariance_from_spectrum, interpolation_variance, szego_variance
from .streams import SeedStreams
from .verify import format_table, verify_paper

__all__ = ["main", "run", "resolve_config", "build_parser", "COMMANDS", "EXIT_OK", "EXIT_VALIDATION", "EXIT_NUMERIC"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

COMMANDS = ("classify", "predict", "simulate", "couple", "diagnose", "verify-paper")
DIAGNOSE_KINDS = ("malliavin", "strong_feller", "irreducibility", "ultrafeller")

_COMMON = {"command", "seed", "out", "format"}
# output routing, left out of the embedded config so reports replay byte for byte
_ROUTING = ("out", "format")

DEFAULTS: dict[str, dict[str, Any]] = {
    "classify": {"max_lag": 8, "cutoffs": None},
    "predict": {"order": 20, "interp_window": 0},
    "simulate": {"x0": 0.0, "horizon": 100, "n_paths": 1},
    "couple": {"order": 8, "n_samples": 0},
    "diagnose": {
        "kind": None,
        "probes": None,
        "fd_step": 1e-5,
        "pairs": [[0.0, 0.0], [0.0, 0.1], [0.0, 0.2], [0.0, 0.5]],
        "horizon": 1,
        "n_samples": 100_000,
        "bins": None,
        "observable": "state",
        "n_boot": 200,
        "starts": [0.0],
        "targets": [[-1.0, 1.0]],
        "xs": [1.0, 0.1, 0.01, 0.001],
    },
    "verify-paper": {"only": None},
}
_SECTIONS = {
    "classify": {"model"},
    "predict": {"model"},
    "simulate": {"model", "system"},
    "couple": {"model", "U", "V", "past"},
    "diagnose": {"model", "system"},
    "verify-paper": set(),
}


# ---------------------------------------------------------------------------
# configuration


def _load_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    # a previous report replays through its embedded config
    if "status" in data and isinstance(data.get("config"), dict):
        data = data["config"]
    return data


def _merge_model(base: Mapping | None, flags: Mapping) -> dict | None:
    model = dict(base) if base else {}
    fam = flags.get("family")
    if fam is not None and fam != model.get("family"):
        model = {"family": fam}
    for key in ("alpha", "beta", "scale"):
        if flags.get(key) is not None:
            model[key] = flags[key]
    return model or None


def _merge_system(base: Mapping | None, flags: Mapping) -> dict | None:
    system = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in (base or {}).items()}
    upd = flags.get("update")
    if upd is not None and upd != (system.get("update") or {}).get("tag"):
        system["update"] = {"tag": upd}
    for key in ("a", "b"):
        if flags.get(key) is not None:
            system.setdefault("update", {})[key] = flags[key]
    if flags.get("p") is not None:
        system["noise"] = {"family": "bernoulli", "p": flags["p"]}
    if flags.get("window") is not None:
        system["window"] = flags["window"]
    return system or None


def resolve_config(command: str, file_cfg: Mapping | None = None, flags: Mapping | None = None) -> dict:
    """Merge defaults, a config document and command-line flags."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    file_cfg = dict(file_cfg or {})
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    if file_cfg.get("command", command) != command:
        raise ValidationError(f"config is for command {file_cfg['command']!r}, not {command!r}")
    allowed = _COMMON | set(DEFAULTS[command]) | _SECTIONS[command]
    unknown = set(file_cfg) - allowed
    if unknown:
        raise ValidationError(f"unknown config fields for {command}: {sorted(unknown)}")
    cfg: dict[str, Any] = {"command": command, "seed": 0, "format": "json", "out": None}
    cfg.update(DEFAULTS[command])
    cfg.update(file_cfg)
    for key in list(DEFAULTS[command]) + ["seed", "out", "format", "U", "V"]:
        if key in flags:
            cfg[key] = flags[key]
    if "model" in _SECTIONS[command]:
        model = _merge_model(cfg.get("model"), flags)
        if model is not None:
            cfg["model"] = model
    if "system" in _SECTIONS[command]:
        system = _merge_system(cfg.get("system"), flags)
        if system is not None:
            cfg["system"] = system
    seed = cfg["seed"]
    SeedStreams(seed)
    if cfg["format"] not in ("json", "csv"):
        raise ValidationError("format must be 'json' or 'csv'")
    return cfg


def _require(cfg: Mapping, key: str):
    if cfg.get(key) is None:
        raise ValidationError(f"{cfg['command']} needs '{key}'")
    return cfg[key]


def _int(cfg: Mapping, key: str, lo: int = 0) -> int:
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < lo:
        raise ValidationError(f"'{key}' must be an integer >= {lo}")
    return int(v)


def _interval(cfg: Mapping, key: str) -> tuple[float, float]:
    v = _require(cfg, key)
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ValidationError(f"'{key}' must be an interval [lo, hi]")
    return float(v[0]), float(v[1])


def _model(cfg: Mapping) -> SpectralModel:
    return SpectralModel.from_config(_require(cfg, "model"))


def _system(cfg: Mapping) -> SkewSystem:
    spec = _require(cfg, "system")
    if not isinstance(spec, Mapping):
        raise ValidationError("system must be a JSON object")
    unknown = set(spec) - {"update", "noise", "window"}
    if unknown:
        raise ValidationError(f"unknown system fields: {sorted(unknown)}")
    update = make_update(spec.get("update") or {})
    window = spec.get("window", 0)
    if isinstance(window, bool) or not isinstance(window, int) or window < 0:
        raise ValidationError("system window must be a non-negative integer")
    noise = spec.get("noise")
    if noise is None and update.discrete:
        noise = {"family": "bernoulli", "p": 0.5}
    if isinstance(noise, Mapping) and noise.get("family") == "bernoulli":
        if set(noise) - {"family", "p"}:
            raise ValidationError("bernoulli noise takes only 'p'")
        return SkewSystem(update, BernoulliKernel(float(noise.get("p", 0.5))), window)
    model = SpectralModel.from_config(noise) if noise is not None else _model(cfg)
    if model.family == "white":
        order = 1
    else:
        order = window or DEFAULT_WINDOW
    kernel = GaussianStepKernel.from_model(model, order)
    return SkewSystem(update, kernel, window)


# ---------------------------------------------------------------------------
# commands; each returns (result, csv_header, csv_rows)

Outcome = tuple[dict, Sequence[str] | None, list]


def _cmd_classify(cfg: dict) -> Outcome:
    model = _model(cfg)
    max_lag = _int(cfg, "max_lag")
    cutoffs = cfg.get("cutoffs")
    if cutoffs is not None and (not isinstance(cutoffs, list) or not all(isinstance(c, int) for c in cutoffs)):
        raise ValidationError("cutoffs must be a list of integers")
    result = classify(model, cutoffs).to_dict()
    lags = covariance_from_spectrum(model, max_lag).lags
    result["covariance"] = lags.tolist()
    return result, ("lag", "covariance"), [(n, float(c)) for n, c in enumerate(lags)]


def _cmd_predict(cfg: dict) -> Outcome:
    model = _model(cfg)
    order = _int(cfg, "order", 1)
    interp = _int(cfg, "interp_window")
    cov = covariance_from_spectrum(model, max(order, 2 * interp))
    sol = levinson(cov, order)
    result: dict[str, Any] = {"prediction": sol.to_dict(), "szego_variance": szego_variance(model)}
    if interp:
        result["interpolation"] = interpolate_two_sided(cov, interp).to_dict()
    try:
        result["interpolation_variance"] = interpolation_variance(model)
    except NumericFailure as exc:
        result["interpolation_variance"] = None
        result["interpolation_variance_reason"] = str(exc)
    rows = [(j + 1, float(a), float(k)) for j, (a, k) in enumerate(zip(sol.coefficients, sol.reflection_coefficients))]
    return result, ("j", "coefficient", "reflection"), rows


def _cmd_simulate(cfg: dict) -> Outcome:
    system = _system(cfg)
    horizon = _int(cfg, "horizon")
    n_paths = _int(cfg, "n_paths", 1)
    x0 = cfg["x0"]
    if not isinstance(x0, (int, float, str)) or isinstance(x0, bool):
        raise ValidationError("x0 must be a number, 'noise' or 'anti'")
    ens = evolve_ensemble(system, x0, horizon, n_paths, cfg["seed"])
    final = ens.states[:, -1].astype(float)
    result = {
        "system": system.to_dict(),
        "n_paths": ens.n_paths,
        "horizon": ens.horizon,
        "final_mean": float(final.mean()),
        "final_variance": float(final.var()),
        "mean_path": ens.states.astype(float).mean(axis=0).tolist(),
    }
    rows = [(r["path"], r["time"], r["state"]) for r in ens.to_rows()]
    return result, ("path", "time", "state"), rows


def _cmd_couple(cfg: dict) -> Outcome:
    model = _model(cfg)
    order = _int(cfg, "order", 1)
    n_samples = _int(cfg, "n_samples")
    U, V = _interval(cfg, "U"), _interval(cfg, "V")
    kernel = GaussianStepKernel.from_model(model, order)
    streams = SeedStreams(cfg["seed"])
    if cfg.get("past") is not None:
        past = NoisePath(np.asarray(cfg["past"], dtype=float))
    else:
        n = max(kernel.order, 1)
        vals, _ = sample_stationary_paths(kernel.stationary_covariance(n - 1), n, 1, streams.rng("past"))
        past = NoisePath(vals[0])
    spec = subcoupling(kernel, past, U, V)
    result = {"kernel": kernel.to_dict(), "past": past.values.tolist(), "subcoupling": spec.to_dict()}
    result["tv"] = 1.0 - spec.mass
    if n_samples:
        z = spec.sample(n_samples, streams.rng("coupling"))
        return result, ("z1", "z2"), [(float(a), float(b)) for a, b in z]
    return result, None, []


def _diag_system(cfg: dict) -> SkewSystem:
    if cfg.get("system") is None:
        raise ValidationError(f"diagnose {cfg['kind']} needs 'system'")
    return _system(cfg)


def _cmd_diagnose(cfg: dict) -> Outcome:
    kind = _require(cfg, "kind")
    if kind not in DIAGNOSE_KINDS:
        raise ValidationError(f"kind must be one of {DIAGNOSE_KINDS}")
    if kind == "malliavin":
        update = make_update((_require(cfg, "system") or {}).get("update") or {})
        probes = cfg["probes"]
        if probes is None:
            probes = [(x, w) for x in (-1.0, 0.0, 1.0) for w in np.linspace(-math.pi, math.pi, 9).tolist()]
        rep = diag.malliavin_check(update, probes, float(cfg["fd_step"]))
        rows = [
            (x[0], w[0], d, s, int(f))
            for (x, w), d, s, f in zip(rep.probes, rep.determinants, rep.min_singular_values, rep.singular)
        ]
        return rep.to_dict(), ("x", "w", "determinant", "min_singular_value", "singular"), rows
    if kind == "strong_feller":
        rep = diag.strong_feller_probe(
            _diag_system(cfg), [tuple(p) for p in cfg["pairs"]], _int(cfg, "horizon"), _int(cfg, "n_samples", 2),
            cfg["bins"], cfg["seed"], observable=cfg["observable"], n_boot=_int(cfg, "n_boot", 1),
        )
        rows = [(x, y, t, lo, hi) for (x, y), t, lo, hi in zip(rep.pairs, rep.tv, rep.ci_low, rep.ci_high)]
        return rep.to_dict(), ("x", "y", "tv", "ci_low", "ci_high"), rows
    if kind == "irreducibility":
        rep = diag.irreducibility_probe(
            _diag_system(cfg), cfg["starts"], cfg["targets"], _int(cfg, "horizon"), _int(cfg, "n_samples", 1), cfg["seed"]
        )
        rows = [(r["start"], json.dumps(r["target"]), r["hits"], r["frequency"]) for r in rep.rows]
        return rep.to_dict(), ("start", "target", "hits", "frequency"), rows
    xs = cfg["xs"]
    if not isinstance(xs, list) or not xs:
        raise ValidationError("xs must be a non-empty list")
    curve = diag.ultrafeller_counterexample_tv([float(x) for x in xs])
    rows = [(r["x"], r["tv"], r["ci_low"], r["ci_high"]) for r in curve.rows()]
    return curve.to_dict(), ("x", "tv", "ci_low", "ci_high"), rows


def _cmd_verify(cfg: dict) -> Outcome:
    only = cfg.get("only")
    if only is not None and (not isinstance(only, list) or not all(isinstance(o, str) for o in only)):
        raise ValidationError("only must be a list of check ids")
    rows = verify_paper(only)
    failed = [r.check_id for r in rows if not r.passed]
    result = {"rows": [r.to_dict() for r in rows], "failed": failed, "table": format_table(rows)}
    csv_rows = [(r.check_id, r.topic, r.expected, r.observed, "pass" if r.passed else "fail") for r in rows]
    return result, ("check_id", "topic", "expected", "observed", "result"), csv_rows


HANDLERS: dict[str, Callable[[dict], Outcome]] = {
    "classify": _cmd_classify,
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "couple": _cmd_couple,
    "diagnose": _cmd_diagnose,
    "verify-paper": _cmd_verify,
}


def run(cfg: dict) -> tuple[int, dict, str | None]:
    """Execute a resolved configuration.

    Returns ``(exit_status, report, csv_text_or_None)``.  Validation errors
    propagate as :class:`ValidationError`.
    """
    command = cfg["command"]
    embedded = {k: v for k, v in cfg.items() if k not in _ROUTING}
    try:
        result, header, rows = HANDLERS[command](cfg)
    except ValidationError:
        raise
    except NumericFailure as exc:
        report = {
            "command": command,
            "status": "numeric_failure",
            "rule": exc.rule or type(exc).__name__,
            "error": str(exc),
            "config": embedded,
        }
        return EXIT_NUMERIC, report, None
    report = {"command": command, "status": "ok", "config": embedded, "result": result}
    status = EXIT_OK
    if command == "verify-paper" and result["failed"]:
        report["status"] = "numeric_failure"
        report["rule"] = "verification"
        status = EXIT_NUMERIC
    return status, report, csv_text(header, rows) if header else None


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config (or a previous report) to start from")
    p.add_argument("--seed", type=int, help="root seed, unsigned 64-bit")
    p.add_argument("--out", help="directory for <command>.json and <command>.csv")
    p.add_argument("--format", choices=("json", "csv"), help="what to print on stdout")


def _add_model(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=("white", "ar1", "ma1", "power_law", "custom"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--scale", type=float)


def _add_system(p: argparse.ArgumentParser) -> None:
    p.add_argument("--update", help="update map tag, e.g. linear, doubling, binary_example")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--p", type=float, help="Bernoulli noise parameter (selects Bernoulli noise)")
    p.add_argument("--window", type=int, help="noise window carried by the system")


def _interval_arg(text: str) -> list[float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("interval must be 'lo,hi'") from exc
    return [lo, hi]


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated numbers") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from exc


def _x0_arg(text: str):
    return text if text in ("noise", "anti") else float(text)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quasimarkov", description="Stationary Gaussian noise and skew-product experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("classify", help="spectral classification of a noise model")
    _add_common(p)
    _add_model(p)
    p.add_argument("--max-lag", dest="max_lag", type=int)
    p.add_argument("--cutoffs", type=_int_list)

    p = sub.add_parser("predict", help="one-step prediction and two-sided interpolation")
    _add_common(p)
    _add_model(p)
    p.add_argument("--order", type=int)
    p.add_argument("--interp-window", dest="interp_window", type=int)

    p = sub.add_parser("simulate", help="simulate skew-product trajectories")
    _add_common(p)
    _add_model(p)
    _add_system(p)
    p.add_argument("--x0", type=_x0_arg)
    p.add_argument("--horizon", type=int)
    p.add_argument("--n-paths", dest="n_paths", type=int)

    p = sub.add_parser("couple", help="shift subcoupling of the one-step noise kernel")
    _add_common(p)
    _add_model(p)
    p.add_argument("--order", type=int)
    p.add_argument("--U", type=_interval_arg)
    p.add_argument("--V", type=_interval_arg)
    p.add_argument("--n-samples", dest="n_samples", type=int)

    p = sub.add_parser("diagnose", help="regularity diagnostics")
    _add_common(p)
    _add_model(p)
    _add_system(p)
    p.add_argument("--kind", choices=DIAGNOSE_KINDS)
    p.add_argument("--horizon", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--bins", type=int)
    p.add_argument("--observable", choices=("state", "state_noise"))
    p.add_argument("--xs", type=_float_list)
    p.add_argument("--fd-step", dest="fd_step", type=float)

    p = sub.add_parser("verify-paper", help="run the builtin reference checks")
    _add_common(p)
    p.add_argument("--only", type=lambda s: s.split(","))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_cfg = _load_file(args.config) if args.config else None
        cfg = resolve_config(args.command, file_cfg, flags)
        status, report, csv_data = run(cfg)
    except ValidationError as exc:
        print(f"quasimarkov: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = dumps(report)
    if cfg["out"]:
        out = Path(cfg["out"])
        name = args.command.replace("-", "_")
        write_text_atomic(out / f"{name}.json", text)
        if csv_data is not None:
            write_text_atomic(out / f"{name}.csv", csv_data)
    if args.command == "verify-paper" and "result" in report:
        print(report["result"]["table"])
    elif cfg["format"] == "csv" and csv_data is not None:
        sys.stdout.write(csv_data)
    else:
        sys.stdout.write(text)
    if status == EXIT_NUMERIC:
        print(f"quasimarkov: numeric failure ({report.get('rule')}): {report.get('error', report.get('result', {}).get('failed'))}", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
