"""Command-line surface: curve generation, Monte Carlo runs, validation and
attack optimization.

Every command is deterministic given its resolved configuration (seeds
included): re-running produces byte-identical outputs. Config precedence is
defaults < JSON config file (--config) < command-line flags, and each run
echoes its resolved configuration as JSON on stdout.

Exit codes: 0 success, 1 validation failure, 2 infeasible, 3 I/O or config
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analytic import StrategyPoint, expected_statistics
from .optimizer import (
    Baseline,
    OptimizationResult,
    optimal_alice_intensity,
    optimize_attack,
)
from .photonics import ProtocolParams
from .simulator import (
    AttackParams,
    dump_trace,
    estimate_strategy_point,
    generate_sequence,
    run_attack,
)
from .soft_filter import InfeasibilityError
from .strategies import (
    StatisticsMode,
    bob_reference_click_rate,
    bs_point,
    constraint_residuals,
    key_rate,
    passthrough_point,
    strategy_click_rate,
)
from .validation import validate_all

CURVE_COLUMNS = [
    "length_km",
    "attack",
    "mu_a",
    "eve_info_bits",
    "emit_fraction",
    "control_fraction",
    "click_rate",
    "key_rate",
]

OVERLAY_COLUMNS = ["length_km", "key_rate", "series_label"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3


@dataclass
class RunConfig:
    """Resolved run configuration; every field is JSON-serializable."""

    eta: float = 0.1
    delta: float = 0.25
    f: float = 0.1
    mu_a: str = "0.5"  # a number, or "optimize"
    mode: str = "strict"
    lmin: float = 10.0
    lmax: float = 250.0
    lstep: float = 20.0
    length: float = 100.0
    attacks: str = "bs,sf"
    seed: int = 1
    budget: int = 2000
    signals: int = 1_000_000
    replicates: int = 20
    t_sf1: int = 1
    t_sf2: int = 4
    mu_b: float = 0.2
    mu_e1: float = 0.4
    mu_e2: float = 0.4
    compare_analytic: bool = False
    out: str = ""
    overlay: str = ""
    svg: str = ""
    trace: str = ""
    selftest_corrupt_q2: bool = False

    def statistics_mode(self) -> StatisticsMode:
        try:
            return StatisticsMode(self.mode)
        except ValueError:
            raise ConfigError(f"mode must be 'strict' or 'free', got {self.mode!r}")

    def protocol(self, mu_a: float, length_km: float) -> ProtocolParams:
        return ProtocolParams(mu_a, self.f, self.eta, self.delta, length_km)

    def attack_params(self) -> AttackParams:
        return AttackParams(
            self.t_sf1, self.t_sf2, self.mu_b, self.mu_e1, self.mu_e2
        )

    def length_grid(self) -> list[float]:
        if self.lstep <= 0 or self.lmax < self.lmin:
            raise ConfigError("need lstep > 0 and lmax >= lmin")
        grid = []
        x = self.lmin
        while x <= self.lmax + 1e-9:
            grid.append(round(x, 9))
            x += self.lstep
        return grid


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; 2 means "infeasible" here.
    def error(self, message: str):  # noqa: D102
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="cowsec", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: _Parser) -> None:
        p.add_argument("--config", type=str, default=None,
                       help="JSON config file (defaults < file < flags)")
        p.add_argument("--eta", type=float, help="detector efficiency")
        p.add_argument("--delta", type=float, help="attenuation, dB/km")
        p.add_argument("--f", type=float, help="control-state probability")
        p.add_argument("--mu-a", dest="mu_a", type=str,
                       help="Alice intensity, or 'optimize'")
        p.add_argument("--mode", choices=["strict", "free"],
                       help="statistics Eve must preserve")
        p.add_argument("--seed", type=int)
        p.add_argument("--budget", type=int,
                       help="optimizer evaluation budget")
        p.add_argument("--out", type=str, help="output file path")

    c = sub.add_parser("curve", parents=[], help="key-rate curves as CSV")
    add_common(c)
    c.add_argument("--lmin", type=float)
    c.add_argument("--lmax", type=float)
    c.add_argument("--lstep", type=float)
    c.add_argument("--attacks", type=str,
                   help="comma list from {bs,sf,usd}")
    c.add_argument("--overlay", type=str,
                   help="extra CSV series (length_km,key_rate,series_label)")
    c.add_argument("--svg", type=str, help="also render a chart to this path")

    s = sub.add_parser("simulate", help="Monte Carlo run statistics")
    add_common(s)
    s.add_argument("--length", type=float, help="channel length, km")
    s.add_argument("--signals", type=int)
    s.add_argument("--replicates", type=int)
    s.add_argument("--t-sf1", dest="t_sf1", type=int)
    s.add_argument("--t-sf2", dest="t_sf2", type=int)
    s.add_argument("--mu-b", dest="mu_b", type=float)
    s.add_argument("--mu-e1", dest="mu_e1", type=float)
    s.add_argument("--mu-e2", dest="mu_e2", type=float)
    s.add_argument("--compare-analytic", action="store_true", default=None)
    s.add_argument("--trace", type=str,
                   help="dump the first shard's per-signal trace here")

    v = sub.add_parser("validate", help="run the validation suite")
    add_common(v)
    v.add_argument("--selftest-corrupt-q2", action="store_true", default=None,
                   help="negative control: corrupt q2 and expect failure")

    o = sub.add_parser("optimize", help="optimize the attack at one length")
    add_common(o)
    o.add_argument("--length", type=float, help="channel length, km")
    o.add_argument("--attacks", type=str, help="'sf' or 'usd'")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(RunConfig)}
        for key, value in loaded.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, value)
    for f_ in fields(RunConfig):
        value = getattr(args, f_.name, None)
        if value is not None:
            setattr(config, f_.name, value)
    return config


def _mu_a_fixed(config: RunConfig) -> Optional[float]:
    if config.mu_a == "optimize":
        return None
    try:
        value = float(config.mu_a)
    except ValueError:
        raise ConfigError(f"--mu-a must be a number or 'optimize', got {config.mu_a!r}")
    if not 0 < value:
        raise ConfigError("--mu-a must be > 0")
    return value


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _echo_config(config: RunConfig, command: str) -> None:
    payload = {"command": command, "config": asdict(config)}
    print(json.dumps(payload, sort_keys=True))


def _curve_row(
    config: RunConfig, attack_kind: str, length_km: float
) -> dict[str, float | str]:
    mode = config.statistics_mode()
    channel = (config.eta, config.delta, length_km)
    fixed = _mu_a_fixed(config)
    if fixed is None:
        mu_a, _ = optimal_alice_intensity(
            channel, config.f, mode, config.budget,
            attack=attack_kind, seed=config.seed,
        )
    else:
        mu_a = fixed
    protocol = config.protocol(mu_a, length_km)
    if attack_kind == "bs":
        point = bs_point(protocol)
        rate = key_rate(protocol, point)
    elif attack_kind in ("sf", "usd"):
        result = optimize_attack(
            protocol, mode, config.budget, config.seed, shape=attack_kind
        )
        if result.feasible:
            point, rate = result.achieved_point, result.key_rate_bound
        else:
            point = passthrough_point(protocol)
            rate = key_rate(protocol, point)
    else:
        raise ConfigError(f"unknown attack kind {attack_kind!r}")
    return {
        "length_km": _fmt(length_km),
        "attack": attack_kind,
        "mu_a": _fmt(mu_a),
        "eve_info_bits": _fmt(point.eve_info_per_emitted_bit),
        "emit_fraction": _fmt(point.emit_fraction),
        "control_fraction": _fmt(point.control_fraction),
        "click_rate": _fmt(strategy_click_rate(point, protocol)),
        "key_rate": _fmt(rate),
    }


def _read_overlay(path: str) -> list[dict[str, str]]:
    try:
        with open(path, newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != OVERLAY_COLUMNS:
                raise ConfigError(
                    f"overlay CSV must have columns {OVERLAY_COLUMNS}, "
                    f"got {reader.fieldnames}"
                )
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read overlay: {exc}")
    for row in rows:
        try:
            float(row["length_km"]), float(row["key_rate"])
        except (TypeError, ValueError):
            raise ConfigError(f"malformed overlay row: {row}")
    return rows


def cmd_curve(config: RunConfig) -> int:
    _echo_config(config, "curve")
    attacks = [a.strip() for a in config.attacks.split(",") if a.strip()]
    if not attacks:
        raise ConfigError("no attacks requested")
    overlay = _read_overlay(config.overlay) if config.overlay else []
    rows = [
        _curve_row(config, attack_kind, length)
        for length in config.length_grid()
        for attack_kind in attacks
    ]
    out = Path(config.out or "curve.csv")
    try:
        with open(out, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=CURVE_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc}")
    print(f"wrote {out} ({len(rows)} rows)")
    if config.svg:
        _render_svg(rows, overlay, Path(config.svg))
        print(f"wrote {config.svg}")
    return EXIT_OK


def _render_svg(
    rows: list[dict[str, float | str]],
    overlay: list[dict[str, str]],
    path: Path,
) -> None:
    """Minimal deterministic SVG line chart: key rate (log10) versus length."""
    series: dict[str, list[tuple[float, float]]] = {}
    for row in rows:
        series.setdefault(str(row["attack"]), []).append(
            (float(row["length_km"]), float(row["key_rate"]))
        )
    for row in overlay:
        series.setdefault(row["series_label"], []).append(
            (float(row["length_km"]), float(row["key_rate"]))
        )
    points = [p for pts in series.values() for p in pts if p[1] > 0]
    if not points:
        raise ConfigError("nothing to plot (all key rates zero)")
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [math.log10(p[1]) for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    width, height, margin = 640, 420, 50

    def sx(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{margin}" y="{margin}" width="{width - 2 * margin}" '
        f'height="{height - 2 * margin}" fill="none" stroke="#333"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">length_km</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" '
        f'font-size="13" transform="rotate(-90 14 {height / 2:.1f})">'
        f"log10 key_rate</text>",
    ]
    for idx, (label, pts) in enumerate(sorted(series.items())):
        drawable = [(x, y) for x, y in sorted(pts) if y > 0]
        if not drawable:
            continue
        color = palette[idx % len(palette)]
        coords = " ".join(
            f"{sx(x):.2f},{sy(math.log10(y)):.2f}" for x, y in drawable
        )
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * idx + 12}" '
            f'font-size="12" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    try:
        path.write_text("\n".join(parts) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}")


def cmd_simulate(config: RunConfig) -> int:
    _echo_config(config, "simulate")
    if config.signals < 1:
        raise ConfigError("--signals must be >= 1")
    fixed = _mu_a_fixed(config)
    if fixed is None:
        raise ConfigError("simulate needs a fixed --mu-a")
    protocol = config.protocol(fixed, config.length)
    attack = config.attack_params()
    attack.require_feasible(protocol)

    point, ses, stats = estimate_strategy_point(
        protocol, attack, config.signals, config.seed, config.replicates
    )
    report: dict = {
        "run_stats": {
            "signals_consumed": stats.signals_consumed,
            "signals_emitted": stats.signals_emitted,
            "controls_emitted": stats.controls_emitted,
            "bits_emitted": stats.bits_emitted,
            "eve_info_total": _fmt(stats.eve_info_total),
            "tuples_completed": stats.tuples_completed,
            "tuples_aborted": stats.tuples_aborted,
        },
        "strategy_point": {
            "emit_fraction": _fmt(point.emit_fraction),
            "control_fraction": _fmt(point.control_fraction),
            "eve_info_per_emitted_bit": _fmt(point.eve_info_per_emitted_bit),
            "mu_delivered": _fmt(point.mu_delivered),
        },
        "standard_errors": {k: _fmt(v) for k, v in sorted(ses.items())},
    }
    if config.compare_analytic:
        expect = expected_statistics(protocol, attack)
        zscores = {}
        for field in ses:
            se = ses[field]
            gap = getattr(point, field) - getattr(expect, field)
            zscores[field] = _fmt(gap / se if se > 0 else 0.0)
        report["analytic"] = {
            "emit_fraction": _fmt(expect.emit_fraction),
            "control_fraction": _fmt(expect.control_fraction),
            "eve_info_per_emitted_bit": _fmt(expect.eve_info_per_emitted_bit),
        }
        report["z_scores"] = zscores
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if config.out:
        Path(config.out).write_text(text)
    if config.trace:
        per = max(config.signals // config.replicates, 1)
        kinds = generate_sequence(per, protocol.f, config.seed + 1000)
        fates, _ = run_attack(kinds, protocol, attack, config.seed + 2000)
        Path(config.trace).write_text(dump_trace(kinds, fates))
        print(f"wrote {config.trace}")
    return EXIT_OK


def cmd_validate(config: RunConfig) -> int:
    _echo_config(config, "validate")
    report = validate_all(
        q2_scale=1.05 if config.selftest_corrupt_q2 else 1.0
    )
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if config.out:
        Path(config.out).write_text(text)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


def _serialize_result(result: OptimizationResult) -> dict:
    components = []
    for weight, comp in result.best.components:
        if isinstance(comp, Baseline):
            components.append({"weight": _fmt(weight), "kind": comp.value})
        else:
            components.append(
                {
                    "weight": _fmt(weight),
                    "kind": "attack",
                    "t_sf1": comp.t_sf1,
                    "t_sf2": comp.t_sf2,
                    "mu_b": _fmt(comp.mu_b),
                    "mu_e1": _fmt(comp.mu_e1),
                    "mu_e2": _fmt(comp.mu_e2),
                }
            )
    return {
        "components": components,
        "achieved_point": {
            "emit_fraction": _fmt(result.achieved_point.emit_fraction),
            "control_fraction": _fmt(result.achieved_point.control_fraction),
            "eve_info_per_emitted_bit": _fmt(
                result.achieved_point.eve_info_per_emitted_bit
            ),
            "mu_delivered": _fmt(result.achieved_point.mu_delivered),
        },
        "eve_info": _fmt(result.eve_info),
        "key_rate_bound": _fmt(result.key_rate_bound),
        "evaluations": result.evaluations,
        "feasible": result.feasible,
        "residuals": {
            "click_residual": _fmt(result.residuals.click_residual),
            "control_residual": _fmt(result.residuals.control_residual),
        },
    }


def cmd_optimize(config: RunConfig) -> int:
    _echo_config(config, "optimize")
    shape = config.attacks if config.attacks in ("sf", "usd") else "sf"
    fixed = _mu_a_fixed(config)
    if fixed is None:
        raise ConfigError("optimize needs a fixed --mu-a")
    protocol = config.protocol(fixed, config.length)
    result = optimize_attack(
        protocol,
        config.statistics_mode(),
        config.budget,
        config.seed,
        shape=shape,
    )
    payload = {
        "config": asdict(config),
        "seed": config.seed,
        "budget": config.budget,
        "reference_click_rate": _fmt(bob_reference_click_rate(protocol)),
        "result": _serialize_result(result),
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if config.out:
        Path(config.out).write_text(text)
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
        if args.command == "curve":
            return cmd_curve(config)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "validate":
            return cmd_validate(config)
        if args.command == "optimize":
            return cmd_optimize(config)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InfeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
