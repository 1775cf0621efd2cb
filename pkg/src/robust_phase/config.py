"""Flat ``key=value`` experiment configs and the n/k rule expressions.

Rules are arithmetic over ``n`` and ``d`` with ``+ - * / ^``, parentheses and
the functions ``sqrt``, ``ln`` and ``ceil``, e.g. ``ceil(10*d*ln(d))``.
"""
from __future__ import annotations

import ast
import math
import operator
import os
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .altmin import AltMinConfig
from .datagen import CorruptionPlan
from .oracle import OracleConfig


class ConfigError(ValueError):
    pass


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "ln": math.log, "log": math.log, "ceil": math.ceil}


def eval_rule(expr: str, **names) -> float:
    """Evaluate a rule expression; only ``n``/``d`` and the listed functions are allowed."""
    src = expr.replace("^", "**").replace("·", "*")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Name):
            if node.id not in names:
                raise ConfigError(f"unknown name {node.id!r} in {expr!r}")
            return names[node.id]
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported syntax in {expr!r}")

    try:
        return ev(tree)
    except (ArithmeticError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot evaluate {expr!r}: {exc}") from exc


def eval_int_rule(expr: str, **names) -> int:
    v = eval_rule(expr, **names)
    if not math.isfinite(v) or v != int(v):
        raise ConfigError(f"rule {expr!r} gave non-integer {v}; wrap it in ceil()")
    return int(v)


NAMED_REGIMES = {
    "sqrt_n": "ceil(sqrt(n))",
    "n_2_3": "ceil(n^(2/3))",
    "const_0.25": "ceil(0.25*n)",
    "clean": "0",
}


def parse_regime(token: str) -> Tuple[str, str]:
    """``"sqrt_n"`` or ``"label:expr"`` -> ``(label, k_rule)``."""
    token = token.strip()
    if ":" in token:
        label, rule = token.split(":", 1)
        return label.strip(), rule.strip()
    if token in NAMED_REGIMES:
        return token, NAMED_REGIMES[token]
    m = re.fullmatch(r"const_([0-9.]+)", token)
    if m:
        return token, f"ceil({m.group(1)}*n)"
    raise ConfigError(f"unknown regime {token!r}; use a known name or label:expr")


_CORRUPTION = re.compile(r"(\w+)\s*(?:\(([^)]*)\))?")


def parse_corruption(text: str):
    """``none | uniform(lo,hi) | constant(c) | signflip`` -> factory ``k -> plan``."""
    m = _CORRUPTION.fullmatch(text.strip())
    if not m:
        raise ConfigError(f"bad corruption spec {text!r}")
    kind, args = m.group(1), m.group(2)
    try:
        vals = [float(a) for a in args.split(",")] if args else []
    except ValueError as exc:
        raise ConfigError(f"bad corruption arguments in {text!r}") from exc
    if kind == "none" and not vals:
        return lambda k: CorruptionPlan.none() if k == 0 else CorruptionPlan.constant(0.0, k)
    if kind == "uniform" and len(vals) == 2:
        return lambda k: CorruptionPlan.uniform(vals[0], vals[1], k)
    if kind == "constant" and len(vals) == 1:
        return lambda k: CorruptionPlan.constant(vals[0], k)
    if kind == "signflip" and not vals:
        return "signflip"
    raise ConfigError(f"bad corruption spec {text!r}")


def _int_list(s: str) -> List[int]:
    try:
        return [int(t) for t in s.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {s!r}") from exc


def _opt(conv):
    def parse(s):
        s = s.strip()
        return None if s.lower() in ("", "none", "auto") else conv(s)
    return parse


@dataclass(frozen=True)
class ExperimentConfig:
    d: Tuple[int, ...] = (50,)
    n_rule: str = "ceil(10*d*ln(d))"
    k_rule: str = "0"
    regimes: Tuple[str, ...] = ("sqrt_n", "n_2_3", "const_0.25")
    corruption: str = "uniform(-5,5)"
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    k_assumed: Optional[str] = None  # rule for the solver's k; None -> true k
    beta: Optional[float] = None
    step_c: float = 0.1
    T: Optional[int] = None
    grad_tol: float = 1e-10
    kappa_estimator: str = "moments"
    max_outer_iters: Optional[int] = None
    mode: str = "altmin"
    parallelism: Optional[int] = None

    def solver(self, k: int, n: int, d: int) -> AltMinConfig:
        ka = k if self.k_assumed is None else eval_int_rule(self.k_assumed, n=n, d=d, k=k)
        return AltMinConfig(
            k=ka, beta=self.beta, max_outer_iters=self.max_outer_iters,
            oracle_cfg=OracleConfig(step_scale_c=self.step_c, max_iters_T=self.T,
                                    grad_tol=self.grad_tol,
                                    kappa_estimator=self.kappa_estimator))

    def regime_rules(self) -> List[Tuple[str, str]]:
        return [parse_regime(r) for r in self.regimes]

    def cells(self):
        """``(d, n, k, label)`` for every ``d`` and regime, validated against ``2k < n``."""
        out = []
        for d in self.d:
            n = eval_int_rule(self.n_rule, d=d)
            for label, rule in self.regime_rules():
                k = eval_int_rule(rule, n=n, d=d)
                if self.mode == "altmin" and not 2 * k < n:
                    raise ConfigError(f"regime {label} at d={d}: need 2k < n (k={k}, n={n})")
                out.append((d, n, k, label))
        return out

    def echo(self) -> List[str]:
        """``key=value`` lines for output headers; parallelism is left out so
        outputs do not depend on how the sweep was scheduled."""
        lines = []
        for f in fields(self):
            if f.name == "parallelism":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name}={'' if v is None else v}")
        return lines


_PARSERS = {
    "d": lambda s: tuple(_int_list(s)),
    "n_rule": str.strip, "k_rule": str.strip,
    "regimes": lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
    "corruption": str.strip,
    "seeds": lambda s: tuple(_int_list(s)),
    "k_assumed": _opt(str),
    "beta": _opt(float), "step_c": float, "T": _opt(int), "grad_tol": float,
    "kappa_estimator": str.strip, "max_outer_iters": _opt(int),
    "mode": str.strip, "parallelism": _opt(int),
}
_ALIASES = {"n": "n_rule", "k": "k_rule", "seed": "seeds", "c": "step_c"}


def parse_pairs(pairs: Dict[str, str], base: ExperimentConfig = None) -> ExperimentConfig:
    base = ExperimentConfig() if base is None else base
    updates = {}
    for key, raw in pairs.items():
        key = _ALIASES.get(key.strip(), key.strip())
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            updates[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    cfg = replace(base, **updates)
    if cfg.mode not in ("altmin", "oracle"):
        raise ConfigError("mode must be 'altmin' or 'oracle'")
    if cfg.kappa_estimator not in ("moments", "trace"):
        raise ConfigError("kappa_estimator must be 'moments' or 'trace'")
    if not cfg.seeds:
        raise ConfigError("at least one seed is required")
    if not cfg.d or any(d < 1 for d in cfg.d):
        raise ConfigError("d must list positive integers")
    parse_corruption(cfg.corruption)
    for r in cfg.regimes:
        parse_regime(r)
    return cfg


def read_pairs(text: str) -> Dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        pairs[key.strip()] = val.strip()
    return pairs


def load_config(path=None, overrides=()) -> ExperimentConfig:
    pairs = {}
    if path is not None:
        try:
            pairs.update(read_pairs(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must be key=value")
        key, val = item.split("=", 1)
        pairs[key.strip()] = val.strip()
    return parse_pairs(pairs)


def resolve_parallelism(flag: Optional[int], cfg: ExperimentConfig) -> int:
    """Flag, then ``ROBUST_PHASE_THREADS``, then the config, then the CPU count."""
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("ROBUST_PHASE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"ROBUST_PHASE_THREADS must be an integer, got {env!r}") from exc
    if cfg.parallelism is not None:
        return max(1, cfg.parallelism)
    return os.cpu_count() or 1
