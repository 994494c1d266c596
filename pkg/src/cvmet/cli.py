"""Batch front end: JSON config in, CSV (plus optional JSON mirror) out.

Usage: cvmet <command> [--config path.json] [--set key=value]... [--out path.csv]
                       [--json path.json]

Commands: qfi, sweep, ratio, bch-table, factorization-check, optomech, claims.
Exit codes: 0 success, 1 validation failure, 2 numerical non-convergence,
3 internal contract violation.

Every floating-point value is rendered with 17 significant digits; two runs
of the same config produce byte-identical CSV bodies (the leading version
line is excluded from that comparison).  All computation is deterministic;
the config's `seed` field is reserved.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction

from . import __version__
from .applications import (
    DEFAULT_OPTOMECH,
    OptomechParams,
    fit_scaling,
    homodyne_g_variance,
)
from .bch import verify_factorization, zassenhaus_term
from .cvspace import FockDim, ProbeSpec
from .errors import (
    ContractViolationError,
    CvmetError,
    EnvelopeError,
    LargeNGateError,
    NonConvergenceError,
    ValidationError,
)
from .qfi import (
    asymptotic_qfi,
    crb_precision,
    large_n_gate,
    precision_ratio,
    qfi_converged,
    ratio_formula,
)
from .strategies import STRATEGIES, StrategyConfig

COMMANDS = ("qfi", "sweep", "ratio", "bch-table", "factorization-check",
            "optomech", "claims")

SWEEP_COLUMNS = ("N", "m", "theta1", "theta2", "strategy", "F_fd", "F_gen",
                 "F_asym", "delta_theta", "converged", "dim_used")


def format_value(value) -> str:
    """Fixed rendering: floats at 17 significant digits, exact rationals as-is."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, Fraction):
        return render_fraction(value)
    return str(value)


def render_fraction(frac: Fraction) -> str:
    """Exact decimal when the denominator is 2^a 5^b, else the exact ratio."""
    den = frac.denominator
    two, five = 0, 0
    while den % 2 == 0:
        den //= 2
        two += 1
    while den % 5 == 0:
        den //= 5
        five += 1
    if den != 1:
        return f"{frac.numerator}/{frac.denominator}"
    shift = max(two, five)
    scaled = frac.numerator * 10 ** shift // frac.denominator
    if shift == 0:
        return str(scaled)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(shift + 1, "0")
    return f"{sign}{digits[:-shift]}.{digits[-shift:]}"


@dataclass
class CommandOutput:
    columns: tuple
    rows: list
    extras: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# cvmet {__version__}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()

    def json_payload(self) -> dict:
        payload = {"columns": list(self.columns),
                   "rows": [[format_value(v) for v in row] for row in self.rows]}
        payload.update(self.extras)
        return payload


DEFAULT_CONFIG = {
    "command": None,
    "strategy": "switch",
    "theta1": 0.1,
    "theta2": 0.1,
    "n_queries": 4,
    "m": 1,
    "estimate": "theta2",
    "probe": {"kind": "vacuum"},
    "nu": 1,
    "seed": 0,  # reserved: all computations are deterministic
    "sweep": {"param": "n_queries", "values": [2, 4, 6, 8]},
    "ratio": {"m_values": [1, 2, 3], "theta1": 0.75,
              "n_values": list(range(4, 25, 2))},
    "bch": {"m_values": [1, 2, 3, 4], "variants": ["AB", "BA"]},
    "factorization": {"cases": [[1, 0.3, 128, "AB"], [2, 0.3, 128, "AB"],
                                [3, 0.1, 128, "AB"]]},
    "optomech": {"g": DEFAULT_OPTOMECH.g, "mass": DEFAULT_OPTOMECH.mass,
                 "omega_c": DEFAULT_OPTOMECH.omega_c, "tau": DEFAULT_OPTOMECH.tau,
                 "mirror_dim": DEFAULT_OPTOMECH.mirror_dim.d,
                 "cavity_dim": DEFAULT_OPTOMECH.cavity_dim.d,
                 "n_values": list(range(8, 25, 2))},
}


def _probe_from(config: dict) -> ProbeSpec:
    spec = config.get("probe", {"kind": "vacuum"})
    kind = spec.get("kind", "vacuum")
    if kind == "vacuum":
        return ProbeSpec.vacuum()
    if kind == "fock":
        return ProbeSpec.fock(int(spec["n"]))
    if kind == "coherent":
        return ProbeSpec.coherent(complex(spec.get("alpha_re", 0.0),
                                          spec.get("alpha_im", 0.0)))
    if kind == "squeezed_vacuum":
        return ProbeSpec.squeezed_vacuum(float(spec["r"]))
    raise ValidationError(f"unknown probe kind {kind!r}")


def _strategy_config(config: dict) -> StrategyConfig:
    strategy = config["strategy"]
    if strategy not in STRATEGIES:
        raise ValidationError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    try:
        return StrategyConfig(theta1=float(config["theta1"]),
                              theta2=float(config["theta2"]),
                              n_queries=int(config["n_queries"]),
                              m=int(config["m"]),
                              strategy=strategy,
                              probe=_probe_from(config))
    except ContractViolationError as exc:
        raise ValidationError(str(exc)) from exc


def _estimate_row(cfg: StrategyConfig, which: str, nu: int):
    fd = qfi_converged(cfg, which, method="fd")
    try:
        gen = qfi_converged(cfg, which, method="generator")
        f_gen = gen.value
    except CvmetError:
        f_gen = float("nan")
    try:
        f_asym = asymptotic_qfi(cfg, which).value
    except CvmetError:
        f_asym = float("nan")
    delta = crb_precision(fd, nu).delta_theta
    dim_used = fd.diagnostics.get("dim_used", 0)
    return fd, f_gen, f_asym, delta, dim_used


def cmd_qfi(config: dict) -> CommandOutput:
    cfg = _strategy_config(config)
    which = config.get("estimate", "theta2")
    nu = int(config.get("nu", 1))
    fd, f_gen, f_asym, delta, dim_used = _estimate_row(cfg, which, nu)
    columns = ("strategy", "m", "N", "theta1", "theta2", "parameter", "method",
               "F", "F_gen", "F_asym", "step_used", "delta_theta", "converged",
               "dim_used")
    row = (cfg.strategy, cfg.m, cfg.n_queries, cfg.theta1, cfg.theta2, which,
           fd.method, fd.value, f_gen, f_asym, fd.step_used, delta,
           fd.converged, dim_used)
    return CommandOutput(columns, [row],
                         {"query_accounting": cfg.query_accounting()})


def cmd_sweep(config: dict) -> CommandOutput:
    sweep = config.get("sweep", {})
    param = sweep.get("param")
    values = sweep.get("values", [])
    if not values:
        raise ValidationError("sweep needs a non-empty strictly increasing values list")
    if list(values) != sorted(set(values)):
        raise ValidationError("sweep values must be strictly increasing")
    if param not in ("n_queries", "theta1", "theta2", "m"):
        raise ValidationError(f"sweep param must be a scalar strategy field, got {param!r}")
    base = _strategy_config(config)
    which = config.get("estimate", "theta2")
    nu = int(config.get("nu", 1))
    rows = []
    for value in values:
        cast = int(value) if param in ("n_queries", "m") else float(value)
        cfg = replace(base, **{param: cast})
        fd, f_gen, f_asym, delta, dim_used = _estimate_row(cfg, which, nu)
        rows.append((cfg.n_queries, cfg.m, cfg.theta1, cfg.theta2, cfg.strategy,
                     fd.value, f_gen, f_asym, delta, fd.converged, dim_used))
    return CommandOutput(SWEEP_COLUMNS, rows,
                         {"parameter": which, "nu": nu,
                          "query_accounting": base.query_accounting()})


def cmd_ratio(config: dict) -> CommandOutput:
    section = config.get("ratio", DEFAULT_CONFIG["ratio"])
    theta1 = float(section.get("theta1", 0.75))
    rows = []
    skipped = []
    for m in section.get("m_values", [1, 2, 3]):
        for n in section.get("n_values", range(4, 25, 2)):
            try:
                measured = precision_ratio(int(m), theta1, int(n),
                                           probe=_probe_from(config))
            except LargeNGateError:
                skipped.append((int(m), int(n)))
                rows.append((int(m), int(n), "", ratio_formula(int(m))))
                continue
            rows.append((int(m), int(n), measured, ratio_formula(int(m))))
    extras = {"theta1": theta1, "skipped_below_gate": skipped}
    return CommandOutput(("m", "N", "ratio_measured", "ratio_formula"), rows, extras)


def cmd_bch_table(config: dict) -> CommandOutput:
    section = config.get("bch", DEFAULT_CONFIG["bch"])
    rows = []
    for m in section.get("m_values", [1, 2, 3, 4]):
        for variant in section.get("variants", ["AB", "BA"]):
            for n in range(2, int(m) + 2):
                poly = zassenhaus_term(int(m), n, variant)
                for power, coeff in poly.coeffs:
                    rows.append((int(m), n, variant, power,
                                 render_fraction(coeff.re), render_fraction(coeff.im)))
    return CommandOutput(("m", "n", "variant", "power", "coeff_re", "coeff_im"), rows)


def cmd_factorization_check(config: dict) -> CommandOutput:
    section = config.get("factorization", DEFAULT_CONFIG["factorization"])
    rows = []
    for case in section.get("cases", []):
        m, lam_im, dim, variant = case
        check = verify_factorization(int(m), float(lam_im), FockDim(int(dim)),
                                     str(variant), detail=True)
        rows.append((int(m), str(variant), float(lam_im), int(dim),
                     check.residual, check.columns_checked))
    return CommandOutput(
        ("m", "variant", "lambda_im", "dim", "residual", "columns_checked"), rows)


def cmd_optomech(config: dict) -> CommandOutput:
    section = config.get("optomech", DEFAULT_CONFIG["optomech"])
    params = OptomechParams(
        g=float(section.get("g", DEFAULT_OPTOMECH.g)),
        mass=float(section.get("mass", DEFAULT_OPTOMECH.mass)),
        omega_c=float(section.get("omega_c", DEFAULT_OPTOMECH.omega_c)),
        tau=float(section.get("tau", DEFAULT_OPTOMECH.tau)),
        n_steps=1,
        mirror_probe=_probe_from(section),
        mirror_dim=FockDim(int(section.get("mirror_dim", 256))),
        cavity_dim=FockDim(int(section.get("cavity_dim", 3))))
    n_values = section.get("n_values", list(range(8, 25, 2)))
    if not n_values:
        raise ValidationError("optomech needs a non-empty n_values list")
    rows = []
    for n in n_values:
        rows.append((int(n), homodyne_g_variance(replace(params, n_steps=int(n)))))
    fit = fit_scaling(rows)
    extras = {"scaling_fit": {"slope": format_value(fit.slope),
                              "intercept": format_value(fit.intercept),
                              "r_squared": format_value(fit.r_squared)}}
    return CommandOutput(("N", "delta2_g"), rows, extras)


def cmd_claims(config: dict) -> CommandOutput:
    from . import claims  # local import: claims drives CLI output for determinism

    results = claims.run_all()
    rows = [(r.number, r.title, "PASS" if r.passed else "FAIL", r.details)
            for r in results]
    extras = {"all_passed": all(r.passed for r in results)}
    return CommandOutput(("claim", "title", "status", "details"), rows, extras)


COMMAND_TABLE = {
    "qfi": cmd_qfi,
    "sweep": cmd_sweep,
    "ratio": cmd_ratio,
    "bch-table": cmd_bch_table,
    "factorization-check": cmd_factorization_check,
    "optomech": cmd_optomech,
    "claims": cmd_claims,
}


def _apply_override(config: dict, key: str, raw: str):
    path = key.split(".")
    node = config
    for part in path[:-1]:
        if part not in node or not isinstance(node[part], dict):
            node[part] = {}
        node = node[part]
    try:
        node[path[-1]] = json.loads(raw)
    except json.JSONDecodeError:
        node[path[-1]] = raw


def load_config(command: str, config_path: str | None, overrides) -> dict:
    config = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(user, dict):
            raise ValidationError("config must be a JSON object")
        for key, value in user.items():
            if isinstance(value, dict) and isinstance(config.get(key), dict):
                config[key].update(value)
            else:
                config[key] = value
    for key, raw in overrides or []:
        _apply_override(config, key, raw)
    if config.get("command") not in (None, command):
        raise ValidationError(
            f"config command {config.get('command')!r} conflicts with CLI command {command!r}")
    config["command"] = command
    return config


def run(command: str, config: dict, out_path: str | None = None,
        json_path: str | None = None) -> int:
    output = COMMAND_TABLE[command](config)
    text = output.csv_text()
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(output.json_payload(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if command == "claims":
        for number, title, status, details in output.rows:
            print(f"[claim {number}] {status}: {title} -- {details}", file=sys.stderr)
        if not output.extras["all_passed"]:
            return 2
    if command == "optomech":
        print(f"scaling fit: {output.extras['scaling_fit']}", file=sys.stderr)
    if "query_accounting" in output.extras:
        print(f"query accounting: {output.extras['query_accounting']}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cvmet",
        description="continuous-variable metrology strategy simulator")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config field (dot paths allowed)")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--json", dest="json_path", help="JSON mirror output path")
    args = parser.parse_args(argv)

    try:
        overrides = []
        for item in args.overrides:
            if "=" not in item:
                raise ValidationError(f"--set needs KEY=VALUE, got {item!r}")
            overrides.append(tuple(item.split("=", 1)))
        config = load_config(args.command, args.config, overrides)
        return run(args.command, config, args.out, args.json_path)
    except ValidationError as exc:
        print(f"cvmet: validation error: {exc}", file=sys.stderr)
        return 1
    except (NonConvergenceError, EnvelopeError, LargeNGateError) as exc:
        print(f"cvmet: numerical non-convergence: {exc}", file=sys.stderr)
        return 2
    except CvmetError as exc:
        print(f"cvmet: internal contract violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
