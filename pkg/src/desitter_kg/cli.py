"""Command-line entry point ``dskg``.

Every subcommand takes its parameters from flags, from a JSON config file
(``--config``), or both; flags win.  Relative output paths are resolved
against ``$DSKG_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError, DeSitterKGError

SCHEMA_VERSION = 1
OUTPUT_ENV = "DSKG_OUTPUT_DIR"

# per-command parameter defaults; a config may only use these keys
DEFAULTS: dict[str, dict] = {
    "roots": {"n": 2, "lambda": "0"},
    "flow": {"n": 2, "model": "ExactDeSitter", "eps": 0.0, "points": 16, "out": None},
    "expand": {"n": 2, "lambda": "3/16", "mode": 1, "order": 4, "model": "Product", "eps": 0.0,
               "exact": False, "g_plus": 1.0, "g_minus": 1.0, "out": None},
    "poisson": {"n": 2, "lambda": "3/16", "sign": "+", "x": 1e-2, "k": 1, "points": 16},
    "psigma-check": {"n": 2, "lambda": "3/16", "points": 1024, "sigma": None, "bumps": 100},
    "scatter": {"n": 2, "lambda": "3/16", "kmax": 8, "rtol": 1e-12, "out": None},
    "evolve": {"lambda": "3/16", "model": "ExactDeSitter", "eps": 0.0, "eps_angular": 0.0,
               "n_theta": 256, "cfl": 0.5, "x_min": 1e-3, "kmax": 4, "out": None, "fit_out": None},
    "verify": {"suite": "acceptance", "only": None},
}
TOLERANCE_KEYS = {"rtol", "cfl", "x_min", "x"}


@dataclass
class ExperimentConfig:
    """Subcommand name, parameter block and seed."""

    command: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.command not in DEFAULTS:
            raise ConfigError(f"unknown command {self.command!r}")
        unknown = sorted(set(self.params) - set(DEFAULTS[self.command]))
        if unknown:
            raise ConfigError(f"unknown key(s) for {self.command}: {', '.join(unknown)}")
        for key in TOLERANCE_KEYS & set(self.params):
            v = self.params[key]
            if v is not None and not float(v) > 0:
                raise ConfigError(f"field {key!r} must be positive, got {v!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    def resolved(self) -> dict:
        out = dict(DEFAULTS[self.command])
        out.update(self.params)
        return out

    def to_json(self) -> str:
        return json.dumps({"schema_version": self.schema_version, "command": self.command,
                           "seed": self.seed, "params": self.params}, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        extra = sorted(set(doc) - {"schema_version", "command", "seed", "params"})
        if extra:
            raise ConfigError(f"unknown top-level key(s): {', '.join(extra)}")
        if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {doc.get('schema_version')!r}")
        if "command" not in doc:
            raise ConfigError("missing field 'command'")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("field 'params' must be an object")
        return cls(doc["command"], params, doc.get("seed", 0))


def _parse_lambda(value) -> Fraction | float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse lambda {value!r}") from exc


def _output_path(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _model(name: str, n: int, eps: float = 0.0, eps_angular: float = 0.0):
    from .models import Family, MetricModel

    try:
        fam = Family(name)
    except ValueError as exc:
        raise ConfigError(f"unknown model family {name!r}") from exc
    if fam is Family.EXACT_DE_SITTER:
        return MetricModel.exact(n)
    if fam is Family.PRODUCT:
        return MetricModel.product(n)
    return MetricModel.warped(eps, n, eps_angular)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# -- commands -------------------------------------------------------------------------------

def cmd_roots(p: dict, seed: int) -> tuple[dict, bool]:
    from .spectral import compute_spectral

    sp_ = compute_spectral(int(p["n"]), _parse_lambda(p["lambda"]))
    return sp_.to_dict(), True


def cmd_flow(p: dict, seed: int) -> tuple[dict, bool]:
    from .geometry import angular_shift_reference, circle_points, classical_scattering_map

    n = int(p["n"])
    model = _model(p["model"], n, float(p["eps"]))
    rng = np.random.default_rng(seed)
    m = int(p["points"])
    if n == 2:
        th = np.linspace(0, 2 * np.pi, m, endpoint=False)
        y, eta = circle_points(th)
    else:
        y = rng.normal(size=(m, n))
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        eta = rng.normal(size=(m, n))
    out = classical_scattering_map((y, eta), model)
    rows = [{"y_in": y[i], "y_out": out.y[i], "eta_out": out.eta_hat[i]} for i in range(m)]
    res = {"model": model.describe(), "points": rows}
    if model.has_global_extension and n == 2:
        res["reference_shift"] = angular_shift_reference(model)
        res["antipodal_error"] = float(np.max(np.abs(out.y + y)))
    path = _output_path(p["out"])
    if path:
        with open(path, "w") as fh:
            cols = [f"y_in{i}" for i in range(y.shape[1])] + [f"y_out{i}" for i in range(y.shape[1])] \
                + [f"eta_out{i}" for i in range(y.shape[1])]
            fh.write(",".join(cols) + "\n")
            for i in range(m):
                vals = list(y[i]) + list(out.y[i]) + list(out.eta_hat[i])
                fh.write(",".join(repr(float(v)) for v in vals) + "\n")
        res["out"] = str(path)
    return res, True


def cmd_expand(p: dict, seed: int) -> tuple[dict, bool]:
    from .expansion import build_series, series_residual
    from .spectral import compute_spectral

    params = compute_spectral(int(p["n"]), _parse_lambda(p["lambda"]))
    model = _model(p["model"], int(p["n"]), float(p["eps"]))
    k = int(p["mode"])
    series = build_series({k: p["g_plus"]}, {k: p["g_minus"]}, params, model, N=int(p["order"]),
                          exact=bool(p["exact"]))
    fit = series_residual(build_series({k: float(p["g_plus"])}, {k: float(p["g_minus"])}, params, model,
                                       N=int(p["order"])), model)
    res = {"params": params.to_dict(), "model": model.describe(), "terms": series.to_table(),
           "residual_slope": fit.slope, "expected_slope": fit.expected, "residual_status": fit.status}
    path = _output_path(p["out"])
    if path:
        path.write_text(json.dumps(_jsonable(res), sort_keys=True, indent=2))
        res["out"] = str(path)
    return res, fit.passed


def cmd_poisson(p: dict, seed: int) -> tuple[dict, bool]:
    from .poisson import KernelSpec, apply_poisson
    from .spectral import compute_spectral

    n = int(p["n"])
    params = compute_spectral(n, _parse_lambda(p["lambda"]))
    spec = KernelSpec.from_params(params, p["sign"])
    k = int(p["k"])
    if n == 2:
        y = np.linspace(0, 2 * np.pi, int(p["points"]), endpoint=False)
        data = {k: 0.5, -k: 0.5}
        target = np.cos(k * y)
    else:
        y1 = np.linspace(0, 2 * np.pi, int(p["points"]), endpoint=False)
        y = np.zeros((len(y1), n - 1))
        y[:, 0] = y1
        kv = (k,) + (0,) * (n - 2)
        data = {kv: 0.5, tuple(-v for v in kv): 0.5}
        target = np.cos(k * y1)
    lead = apply_poisson(spec, data, float(p["x"]), y, leading=True)
    err = float(np.max(np.abs(lead - target)))
    return {"kernel_exponent": spec.s, "branch": spec.branch.value, "C_s": spec.C_s,
            "leading_error": err, "x": p["x"]}, True


def cmd_psigma(p: dict, seed: int) -> tuple[dict, bool]:
    from .psigma import BallField, bump, null_vector_residual, quadratic_form, weighted_norm2
    from .spectral import compute_spectral

    n = int(p["n"])
    params = compute_spectral(n, _parse_lambda(p["lambda"]))
    res = {"null_vector_residual": null_vector_residual(params, int(p["points"]))}
    rng = np.random.default_rng(seed)
    base = float(np.real(params.s_hat_plus))
    worst = math.inf
    for _ in range(int(p["bumps"])):
        sigma = float(p["sigma"]) if p["sigma"] is not None else base + float(rng.uniform(0.01, 2.0))
        c = float(rng.uniform(0.1, 0.8))
        w = float(rng.uniform(0.05, min(c, 0.95 - c)))
        f, _ = bump(c, w)
        fld = BallField.from_function(f, int(p["points"]), n)
        worst = min(worst, quadratic_form(sigma, fld, params) / weighted_norm2(fld, sigma))
    res["min_form_ratio"] = worst
    return res, True


def cmd_scatter(p: dict, seed: int) -> tuple[dict, bool]:
    from .scattering import assemble_scattering
    from .spectral import compute_spectral

    params = compute_spectral(int(p["n"]), _parse_lambda(p["lambda"]))
    S = assemble_scattering(int(p["kmax"]), params, float(p["rtol"]))
    blocks = {k: {"matrix": S.blocks[k].matrix, "renormalized": S.renormalized[k],
                  "renormalized_literal": S.renormalized_literal[k], "condition": S.blocks[k].condition,
                  "det": S.blocks[k].det} for k in S.modes}
    ok = all(abs(S.blocks[k].det) > 1e-12 for k in S.modes)
    res = {"params": params.to_dict(), "modes": len(S.modes), "blocks": blocks}
    path = _output_path(p["out"])
    if path:
        S.write_csv(path)
        res["out"] = str(path)
    return res, ok


def cmd_evolve(p: dict, seed: int) -> tuple[dict, bool]:
    from .evolution import MeshSpec, evolve_cauchy, fit_asymptotics
    from .spectral import compute_spectral

    params = compute_spectral(2, _parse_lambda(p["lambda"]))
    model = _model(p["model"], 2, float(p["eps"]), float(p["eps_angular"]))
    mesh = MeshSpec(int(p["n_theta"]), float(p["cfl"]), float(p["x_min"]))
    rng = np.random.default_rng(seed)
    kmax = int(p["kmax"])
    a = rng.normal(size=kmax + 1)
    b = rng.normal(size=kmax + 1)
    psi0 = lambda th: sum(a[k] * np.cos(k * th) for k in range(kmax + 1))
    psi1 = lambda th: sum(b[k] * np.sin(k * th + 0.5) for k in range(kmax + 1))
    fld = evolve_cauchy(psi0, psi1, 0.0, model, params, mesh)
    fits = []
    for side in (1, -1):
        fit = fit_asymptotics(fld, side, params, modes=list(range(kmax + 1)))
        fits += [r.to_dict() for r in fit.reports.values()]
    res = {"params": params.to_dict(), "model": model.describe(), "steps": int(len(fld.rho)),
           "cfl_ratio": fld.cfl_ratio, "fits": fits}
    path = _output_path(p["out"])
    if path:
        fld.write_csv(path, every=max(1, len(fld.rho) // 200))
        res["out"] = str(path)
    fpath = _output_path(p["fit_out"])
    if fpath:
        fpath.write_text(json.dumps(_jsonable(fits), sort_keys=True, indent=2))
        res["fit_out"] = str(fpath)
    return res, True


def cmd_verify(p: dict, seed: int) -> tuple[dict, bool]:
    from .acceptance import run_suite

    if p["suite"] != "acceptance":
        raise ConfigError(f"unknown suite {p['suite']!r}")
    only = p["only"]
    if isinstance(only, str):
        only = [int(v) for v in only.split(",") if v.strip()]
    results = run_suite(only)
    for r in results:
        print(r.line(), file=sys.stderr)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", file=sys.stderr)
    return {"results": [r.to_dict() for r in results]}, all(r.passed for r in results)


COMMANDS = {
    "roots": cmd_roots,
    "flow": cmd_flow,
    "expand": cmd_expand,
    "poisson": cmd_poisson,
    "psigma-check": cmd_psigma,
    "scatter": cmd_scatter,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dskg", description="Klein-Gordon asymptotics on de Sitter space")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in DEFAULTS.items():
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", help="JSON config; flags override its fields")
        sp_.add_argument("--seed", type=int, default=None)
        sp_.add_argument("--json", action="store_true", help="print structured results to stdout")
        for key, val in defaults.items():
            if isinstance(val, bool):
                sp_.add_argument(_flag(key), dest=key, action="store_const", const=True, default=None)
            elif key == "lambda":
                sp_.add_argument("--lambda", dest="lambda", default=None, help="rational like 3/16 or a float")
            elif isinstance(val, int):
                sp_.add_argument(_flag(key), dest=key, type=int, default=None)
            elif isinstance(val, float):
                sp_.add_argument(_flag(key), dest=key, type=float, default=None)
            else:
                sp_.add_argument(_flag(key), dest=key, default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text())
        if cfg.command != args.command:
            raise ConfigError(f"config is for {cfg.command!r}, not {args.command!r}")
        params, seed = dict(cfg.params), cfg.seed
    else:
        params, seed = {}, 0
    for key in DEFAULTS[args.command]:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if args.seed is not None:
        seed = args.seed
    return ExperimentConfig(args.command, params, seed)


def run(config: ExperimentConfig) -> tuple[dict, bool]:
    result, ok = COMMANDS[config.command](config.resolved(), config.seed)
    result = {"schema_version": SCHEMA_VERSION, "command": config.command, "seed": config.seed,
              "passed": bool(ok), **result}
    return _jsonable(result), ok


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        result, ok = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DeSitterKGError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    text = json.dumps(result, sort_keys=True, indent=2)
    if args.json or args.command == "roots":
        print(text)
    else:
        summary = {k: v for k, v in result.items() if k in ("command", "passed", "out", "fit_out", "modes")}
        print(json.dumps(summary, sort_keys=True))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
