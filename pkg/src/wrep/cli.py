"""Command-line front end: ``wrep <command> [options]``.

Every command evaluates a parameter grid and writes one CSV row (or JSON
object) per result. Floats are written with 12 significant digits, so
re-running a configuration reproduces the file byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numeric failure. A failure
inside a single grid point becomes a row whose ``status`` column names the
error; the file is still written and the exit code is 3.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Iterable

from .noise import depolarized_w
from .purification import (
    DegenerateOutcomeError,
    NoFixedPointError,
    epp_attractor,
    epp_fixed_point,
    epp_run,
    epp_threshold,
    threshold_for_family,
)
from .repeater import NonOperationalError, repeater_resources, repeater_round, repeater_threshold_curves, working_state
from .swapping import DegenerateSwapError, relay_simulate, swap

COMMANDS = ("swap-sweep", "relay", "purify-trace", "epp-threshold", "repeater-curves", "repeater-loop", "resources")
NUMERIC_ERRORS = (NoFixedPointError, DegenerateOutcomeError, DegenerateSwapError, NonOperationalError, ArithmeticError)
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    command: str
    q_range: tuple[float, float, float] = (1.0, 1.0, 1.0)
    p_range: tuple[float, float, float] = (1.0, 1.0, 1.0)
    f_range: tuple[float, float, float] | None = None  # working fidelities
    protocol: str = "improved"
    max_iters: int = 200
    conv_tol: float = 1e-9
    bisection_tol: float = 1e-4
    output_path: str | None = None
    format: str = "csv"
    seed: int | None = None  # unused: every computation is deterministic
    n_max: int = 5
    f_stop: float = 0.465
    mode: str = "rounds"  # swap-sweep: "rounds" or "qmax"
    p_equals_q: bool = False
    rounds: list[int] = field(default_factory=lambda: [1, 2, 3])
    family: str = "depolarized"  # epp-threshold: "depolarized" or "post-swap"
    criterion: str = "direct"  # repeater-curves F_min^(R) criterion
    nesting: int = 3

    def validate(self) -> "ExperimentConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command: must be one of {', '.join(COMMANDS)}")
        for name in ("q_range", "p_range", "f_range"):
            rng = getattr(self, name)
            if rng is None:
                continue
            a, b, step = rng
            if step <= 0:
                raise ConfigError(f"{name}: step must be positive")
            if b < a:
                raise ConfigError(f"{name}: empty range")
            lo, hi = (0.0, 1.0)
            if a < lo or b > hi:
                raise ConfigError(f"{name}: values must lie in [0, 1]")
        if self.protocol not in ("improved", "stabilizer"):
            raise ConfigError("protocol: must be improved or stabilizer")
        if self.format not in ("csv", "json"):
            raise ConfigError("format: must be csv or json")
        for name in ("conv_tol", "bisection_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive")
        if not 1 <= self.max_iters <= 1000:
            raise ConfigError("max_iters: must lie in 1..1000")
        if not 0 <= self.n_max <= 12:
            raise ConfigError("n_max: must lie in 0..12")
        if self.mode not in ("rounds", "qmax"):
            raise ConfigError("mode: must be rounds or qmax")
        if self.family not in ("depolarized", "post-swap"):
            raise ConfigError("family: must be depolarized or post-swap")
        if self.criterion not in ("direct", "fidelity"):
            raise ConfigError("criterion: must be direct or fidelity")
        if not 1 <= self.nesting <= 4:
            raise ConfigError("nesting: must lie in 1..4")
        if not self.rounds or any(int(n) < 1 for n in self.rounds):
            raise ConfigError("rounds: must be a non-empty list of positive integers")
        if self.command in ("repeater-loop", "resources") and self.f_range is None:
            raise ConfigError("f_range: required for this command")
        return self


def parse_range(text: str | list | tuple | float, name: str) -> tuple[float, float, float]:
    """``"a:b:step"``, ``"a"``, ``[a, b, step]`` or a number -> inclusive triple."""
    try:
        if isinstance(text, (int, float)):
            parts = [float(text)]
        elif isinstance(text, str):
            parts = [float(x) for x in text.split(":")]
        else:
            parts = [float(x) for x in text]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot parse range {text!r}") from None
    if len(parts) == 1:
        return (parts[0], parts[0], 1.0)
    if len(parts) != 3:
        raise ConfigError(f"{name}: expected a:b:step, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


def expand(rng: tuple[float, float, float]) -> list[float]:
    a, b, step = rng
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [round(a + i * step, 12) for i in range(n)]


# ---------------------------------------------------------------- commands

Row = dict[str, Any]


def _failure(params: Row, exc: Exception, columns: Iterable[str]) -> Row:
    row = dict(params)
    for c in columns:
        row.setdefault(c, None)
    row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def _grid_qp(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    qs = expand(cfg.q_range)
    if cfg.p_equals_q:
        return [(q, q) for q in qs]
    return [(q, p) for q in qs for p in expand(cfg.p_range)]


def _fidelity_after(q: float, p: float, n: int) -> float:
    rows = relay_simulate(q, p, n_max=n, f_stop=-1.0)
    return rows[-1].fidelity


def run_swap_sweep(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    if cfg.mode == "rounds":
        for q, p in _grid_qp(cfg):
            params = {"q": q, "p": p}
            try:
                relay = relay_simulate(q, p, cfg.n_max, cfg.f_stop)
                good = [r for r in relay if r.fidelity >= cfg.f_stop]
                n = len(good)
                rows.append(
                    {**params, "rounds": n, "distance": 2**n, "fidelity": good[-1].fidelity if good else None, "status": "ok"}
                )
            except NUMERIC_ERRORS as exc:
                rows.append(_failure(params, exc, ("rounds", "distance", "fidelity")))
        return rows
    for p in expand(cfg.p_range):
        for n in sorted(int(x) for x in cfg.rounds):
            params = {"p": p, "n": n}
            try:
                rows.append({**params, "q_max": _q_max(p, n, cfg.f_stop, cfg.bisection_tol), "status": "ok"})
            except NUMERIC_ERRORS as exc:
                rows.append(_failure(params, exc, ("q_max",)))
    return rows


def _q_max(p: float, n: int, f_stop: float, tol: float) -> float | None:
    """Smallest q whose fidelity after ``n`` rounds stays at or above ``f_stop``, i.e. the
    largest tolerable channel noise 1 - q. None when even q = 1 fails."""
    if _fidelity_after(1.0, p, n) < f_stop:
        return None
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if _fidelity_after(mid, p, n) >= f_stop:
            hi = mid
        else:
            lo = mid
    return hi


def run_relay(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for q, p in _grid_qp(cfg):
        try:
            for r in relay_simulate(q, p, cfg.n_max, cfg.f_stop):
                rows.append(
                    {"q": q, "p": p, "n": r.n, "distance": r.distance, "fidelity": r.fidelity,
                     "success_prob": r.success_prob, "status": "ok"}
                )
        except NUMERIC_ERRORS as exc:
            rows.append(_failure({"q": q, "p": p, "n": None}, exc, ("distance", "fidelity", "success_prob")))
    return rows


def run_purify_trace(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for q, p in _grid_qp(cfg):
        trace = epp_run(depolarized_w(q), cfg.protocol, p, cfg.max_iters, cfg.conv_tol)
        for s in trace.steps:
            rows.append(
                {"q": q, "p": p, "protocol": cfg.protocol, "iteration": s.k, "subroutine": s.subroutine,
                 "fidelity": s.fidelity, "success_prob": s.success_prob, "copies": s.copies,
                 "resources": s.resources, "status": "ok"}
            )
        if trace.failed_at is not None:
            rows.append(
                _failure({"q": q, "p": p, "protocol": cfg.protocol, "iteration": trace.failed_at},
                         DegenerateOutcomeError(trace.error), ("subroutine", "fidelity", "success_prob", "copies", "resources"))
            )
    return rows


def _post_swap_family(p: float) -> Callable[[float], Any]:
    return lambda q: swap([depolarized_w(q)] * 3, p).state


def run_epp_threshold(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for p in expand(cfg.p_range):
        params = {"p": p, "protocol": cfg.protocol, "family": cfg.family}
        try:
            f_max = epp_fixed_point(cfg.protocol, p, max_iters=max(cfg.max_iters, 400))
            att = epp_attractor(cfg.protocol, p, max_iters=max(cfg.max_iters, 400))
            if cfg.family == "depolarized":
                f_p = epp_threshold(cfg.protocol, p, tol=cfg.bisection_tol, attractor=att)
            else:
                f_p = threshold_for_family(_post_swap_family(p), (0.0, 1.0), cfg.protocol, p, att, cfg.bisection_tol)
            rows.append({**params, "f_max": f_max, "f_p": f_p, "status": "ok"})
        except NUMERIC_ERRORS as exc:
            rows.append(_failure(params, exc, ("f_max", "f_p")))
    return rows


def run_repeater_curves(cfg: ExperimentConfig) -> list[Row]:
    curves = repeater_threshold_curves(expand(cfg.p_range), tol=max(cfg.bisection_tol, 1e-4), criterion=cfg.criterion)
    return [
        {"p": p, "f_max": fm, "f_p": fp, "f_r": fr, "p_min": curves.p_min, "criterion": curves.criterion,
         "status": "ok" if fm is not None else "gap: no purification regime"}
        for p, fm, fp, fr in zip(curves.grid, curves.f_max, curves.f_p, curves.f_r)
    ]


def run_repeater_loop(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    cols = ("f_before_swap", "f_after_swap", "f_after_one_step", "purify_steps", "f_after_purify",
            "swap_success_prob", "resources_round", "success")
    for p in expand(cfg.p_range):
        for wf in expand(cfg.f_range):
            params = {"p": p, "working_fidelity": wf}
            try:
                r = repeater_round(working_state(p, wf), p, wf)
                rows.append({**params, **{c: getattr(r, c) for c in cols}, "status": "ok"})
            except (ValueError, *NUMERIC_ERRORS) as exc:
                rows.append(_failure(params, exc, cols))
    return rows


def run_resources(cfg: ExperimentConfig) -> list[Row]:
    rows = []
    for p in expand(cfg.p_range):
        for wf in expand(cfg.f_range):
            params = {"p": p, "working_fidelity": wf}
            try:
                m = repeater_resources(p, wf, nesting=cfg.nesting)
                rows.append({**params, "m_per_round": m, "status": "ok"})
            except (ValueError, *NUMERIC_ERRORS) as exc:
                rows.append(_failure(params, exc, ("m_per_round",)))
    return rows


RUNNERS: dict[str, Callable[[ExperimentConfig], list[Row]]] = {
    "swap-sweep": run_swap_sweep,
    "relay": run_relay,
    "purify-trace": run_purify_trace,
    "epp-threshold": run_epp_threshold,
    "repeater-curves": run_repeater_curves,
    "repeater-loop": run_repeater_loop,
    "resources": run_resources,
}

HEADERS = {
    "swap-sweep": {
        "rounds": ["q", "p", "rounds", "distance", "fidelity", "status"],
        "qmax": ["p", "n", "q_max", "status"],
    },
    "relay": ["q", "p", "n", "distance", "fidelity", "success_prob", "status"],
    "purify-trace": ["q", "p", "protocol", "iteration", "subroutine", "fidelity", "success_prob", "copies", "resources", "status"],
    "epp-threshold": ["p", "protocol", "family", "f_max", "f_p", "status"],
    "repeater-curves": ["p", "f_max", "f_p", "f_r", "p_min", "criterion", "status"],
    "repeater-loop": ["p", "working_fidelity", "f_before_swap", "f_after_swap", "f_after_one_step", "purify_steps",
                      "f_after_purify", "swap_success_prob", "resources_round", "success", "status"],
    "resources": ["p", "working_fidelity", "m_per_round", "status"],
}


def header_for(cfg: ExperimentConfig) -> list[str]:
    h = HEADERS[cfg.command]
    return h[cfg.mode] if isinstance(h, dict) else h


def run_experiment(config: ExperimentConfig) -> list[Row]:
    return RUNNERS[config.validate().command](config)


# ---------------------------------------------------------------- output

def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, float):
        if not math.isfinite(v):
            return format(v, ".12g")
        return float(format(v, ".12g"))
    return v


def emit(rows: list[Row], fmt: str, path: str | None, header: list[str]) -> None:
    """Write ``rows`` as CSV (header first) or as a JSON array to ``path`` or stdout."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in header])
        text = buf.getvalue()
    else:
        text = json.dumps([{c: _json_value(r.get(c)) for c in header} for r in rows], indent=1) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- entry point

_RANGE_KEYS = {"q": "q_range", "p": "p_range", "f": "f_range", "q_range": "q_range", "p_range": "p_range", "f_range": "f_range"}
_ALIASES = {"out": "output_path", "tol": "bisection_tol", "max-iters": "max_iters"}


def load_config(path: str) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    return data


def build_config(command: str, values: dict[str, Any]) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs: dict[str, Any] = {"command": command}
    for key, value in values.items():
        key = _ALIASES.get(key, key)
        if key in _RANGE_KEYS:
            kwargs[_RANGE_KEYS[key]] = parse_range(value, _RANGE_KEYS[key])
        elif key == "command":
            if value != command:
                raise ConfigError(f"command: config names {value!r} but {command!r} was requested")
        elif key in known:
            kwargs[key] = value
        else:
            raise ConfigError(f"{key}: unknown configuration field")
    try:
        return ExperimentConfig(**kwargs).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wrep", description="W-state repeater simulations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON file with default values")
    ap.add_argument("--q", help="channel noise range a:b:step")
    ap.add_argument("--p", help="operational noise range a:b:step")
    ap.add_argument("--f", help="working fidelity range a:b:step")
    ap.add_argument("--protocol", choices=("improved", "stabilizer"))
    ap.add_argument("--max-iters", type=int, dest="max_iters")
    ap.add_argument("--tol", type=float, help="bisection tolerance")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"))
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        values = load_config(args.config) if args.config else {}
        cli = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
        values.update(cli)
        cfg = build_config(args.command, values)
    except ConfigError as exc:
        print(f"wrep: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = run_experiment(cfg)
    except NUMERIC_ERRORS as exc:
        print(f"wrep: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    header = header_for(cfg)
    rows.sort(key=lambda r: tuple(_sort_key(r.get(c)) for c in header[: _n_params(cfg)]))
    try:
        emit(rows, cfg.format, cfg.output_path, header)
    except OSError as exc:
        print(f"wrep: cannot write output: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_NUMERIC if any(r.get("status") not in ("ok", None) for r in rows) else EXIT_OK


_PARAM_COLUMNS = {
    "swap-sweep": 2, "relay": 3, "purify-trace": 4, "epp-threshold": 3,
    "repeater-curves": 1, "repeater-loop": 2, "resources": 2,
}


def _n_params(cfg: ExperimentConfig) -> int:
    return _PARAM_COLUMNS[cfg.command]


def _sort_key(v: Any) -> tuple:
    return (v is None, v if v is not None else 0)


if __name__ == "__main__":
    sys.exit(main())
