"""Benchmark specification files and run-matrix expansion.

A spec file is line oriented::

    benchmark "scaling"
    param nodes = 1, 2, 4
    param device = cpu, gpu
    exclude device=gpu && nodes=1
    command = "bk-workload --generate 7 {nodes} guaranteed-convergent"
    metric elapsed from elapsed
    metric iters from file:metrics.json:iterations
    estimate_seconds = 60
    timeout_factor = 1.5
    workdir_root = ./bk-runs

``#`` starts a comment (outside of quotes) and blank lines are ignored.
Unknown keys are errors.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping, Sequence

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
VALUE_RE = re.compile(r"[A-Za-z0-9._-]+\Z")
# "{{" and "}}" are literal braces; "{name}" is a placeholder
TEMPLATE_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([^{}]*)\}|[{}]")

DEFAULT_TIMEOUT_FACTOR = Decimal("1.5")
DEFAULT_WORKDIR_ROOT = "./bk-runs"

METRIC_KINDS = ("elapsed", "exitstatus", "file")


class SpecError(ValueError):
    """A spec file failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class ExclusionRule:
    """Conjunction of ``param=value`` equalities."""

    conjuncts: tuple[tuple[str, str], ...]

    def matches(self, assignment: Mapping[str, str]) -> bool:
        return all(assignment.get(name) == value for name, value in self.conjuncts)


@dataclass(frozen=True)
class MetricSource:
    name: str
    kind: str  # one of METRIC_KINDS
    path: str | None = None  # file metrics: path relative to the run directory
    key_path: str | None = None  # file metrics: dotted key into the JSON document

    def source_text(self) -> str:
        if self.kind == "file":
            return f"file:{self.path}:{self.key_path}"
        return self.kind


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    params: tuple[tuple[str, tuple[str, ...]], ...]
    excludes: tuple[ExclusionRule, ...]
    command_template: str
    metrics: tuple[MetricSource, ...]
    estimate_seconds: int
    timeout_factor: Decimal = DEFAULT_TIMEOUT_FACTOR
    workdir_root: str = DEFAULT_WORKDIR_ROOT

    @property
    def param_names(self) -> list[str]:
        return [name for name, _ in self.params]

    @property
    def timeout_seconds(self) -> int:
        return math.ceil(Decimal(self.estimate_seconds) * self.timeout_factor)


@dataclass(frozen=True)
class Configuration:
    assignment: dict[str, str] = field(hash=False)
    index: int = 0

    def label(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.assignment.items())


# --------------------------------------------------------------------------- parsing


def _strip_comment(line: str) -> str:
    in_quote = escaped = False
    for i, ch in enumerate(line):
        if escaped:
            escaped = False
        elif ch == "\\" and in_quote:
            escaped = True
        elif ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def _unquote(text: str, lineno: int, what: str) -> str:
    """Strip surrounding double quotes; inside, only \\" and \\\\ escapes are allowed."""
    text = text.strip()
    if len(text) < 2 or text[0] != '"' or text[-1] != '"':
        raise SpecError(f"{what} must be a double-quoted string", lineno)
    out = []
    body = iter(text[1:-1])
    for ch in body:
        if ch == "\\":
            nxt = next(body, None)
            if nxt not in ('"', "\\"):
                raise SpecError(f"{what}: unsupported escape in {text}", lineno)
            out.append(nxt)
        elif ch == '"':
            raise SpecError(f"{what}: unescaped quote in {text}", lineno)
        else:
            out.append(ch)
    return "".join(out)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def template_placeholders(template: str) -> list[str]:
    """Placeholder names in ``template``; raises ValueError on a stray brace."""
    names = []
    for m in TEMPLATE_TOKEN_RE.finditer(template):
        tok = m.group(0)
        if tok in ("{{", "}}"):
            continue
        if m.group(1) is None:
            raise ValueError(f"stray {tok!r} at offset {m.start()} (write {tok * 2} for a literal brace)")
        names.append(m.group(1))
    return names


def _name(text: str, lineno: int, what: str = "name") -> str:
    if not NAME_RE.match(text):
        raise SpecError(f"invalid {what} {text!r}", lineno)
    return text


def _value(text: str, lineno: int) -> str:
    if not VALUE_RE.match(text):
        raise SpecError(f"invalid value {text!r}", lineno)
    return text


def _parse_metric(rest: str, lineno: int) -> MetricSource:
    parts = rest.split(None, 2)
    if len(parts) != 3 or parts[1] != "from":
        raise SpecError("expected 'metric <name> from <source>'", lineno)
    name = _name(parts[0], lineno, "metric name")
    source = parts[2].strip()
    if source in ("elapsed", "exitstatus"):
        return MetricSource(name, source)
    if source.startswith("file:"):
        pieces = source.split(":")
        if len(pieces) != 3 or not pieces[1] or not pieces[2]:
            raise SpecError(f"file metric must be file:<relpath>:<dot.path>, got {source!r}", lineno)
        relpath, key_path = pieces[1], pieces[2]
        if Path(relpath).is_absolute() or ".." in Path(relpath).parts:
            raise SpecError(f"file metric path must stay inside the run directory: {relpath!r}", lineno)
        if any(not k for k in key_path.split(".")):
            raise SpecError(f"invalid key path {key_path!r}", lineno)
        return MetricSource(name, "file", relpath, key_path)
    raise SpecError(f"unknown metric source {source!r}", lineno)


def parse_spec(text: str) -> BenchmarkSpec:
    """Parse and validate spec-file contents."""
    name = None
    params: list[tuple[str, tuple[str, ...]]] = []
    param_lines: dict[str, int] = {}
    raw_excludes: list[tuple[int, list[tuple[str, str]]]] = []
    metrics: list[MetricSource] = []
    scalars: dict[str, tuple[int, str]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        keyword, _, rest = line.partition(" ")
        rest = rest.strip()
        if keyword == "benchmark":
            if name is not None:
                raise SpecError("duplicate 'benchmark' line", lineno)
            name = _unquote(rest, lineno, "benchmark name")
            if not name or not VALUE_RE.match(name):
                raise SpecError(f"invalid benchmark name {name!r}", lineno)
        elif keyword == "param":
            lhs, eq, rhs = rest.partition("=")
            if not eq:
                raise SpecError("expected 'param <name> = <v1>, <v2>, ...'", lineno)
            pname = _name(lhs.strip(), lineno, "param name")
            if pname in param_lines:
                raise SpecError(f"duplicate param {pname!r} (first declared on line {param_lines[pname]})", lineno)
            values = [v.strip() for v in rhs.split(",")]
            if values == [""]:
                raise SpecError(f"param {pname!r} has an empty value list", lineno)
            for v in values:
                _value(v, lineno)
            if len(set(values)) != len(values):
                raise SpecError(f"param {pname!r} repeats a value", lineno)
            param_lines[pname] = lineno
            params.append((pname, tuple(values)))
        elif keyword == "exclude":
            conjuncts = []
            for term in rest.split("&&"):
                lhs, eq, rhs = term.strip().partition("=")
                if not eq:
                    raise SpecError(f"exclude term {term.strip()!r} is not <name>=<value>", lineno)
                conjuncts.append((_name(lhs.strip(), lineno, "param name"), _value(rhs.strip(), lineno)))
            raw_excludes.append((lineno, conjuncts))
        elif keyword == "metric":
            metric = _parse_metric(rest, lineno)
            if any(m.name == metric.name for m in metrics):
                raise SpecError(f"duplicate metric {metric.name!r}", lineno)
            metrics.append(metric)
        else:
            key, eq, value = line.partition("=")
            key = key.strip()
            if not eq:
                raise SpecError(f"unrecognized line {line!r}", lineno)
            if key not in ("command", "estimate_seconds", "timeout_factor", "workdir_root"):
                raise SpecError(f"unknown key {key!r}", lineno)
            if key in scalars:
                raise SpecError(f"duplicate key {key!r}", lineno)
            scalars[key] = (lineno, value.strip())

    if name is None:
        raise SpecError("missing 'benchmark \"<name>\"' line")
    if "command" not in scalars:
        raise SpecError("missing 'command = \"...\"' line")
    if "estimate_seconds" not in scalars:
        raise SpecError("missing 'estimate_seconds = <int>' line")

    declared = dict(params)
    excludes = []
    for lineno, conjuncts in raw_excludes:
        for pname, value in conjuncts:
            if pname not in declared or value not in declared[pname]:
                raise SpecError(f"exclude names undeclared {pname}={value}", lineno)
        excludes.append(ExclusionRule(tuple(conjuncts)))

    cmd_line, cmd_raw = scalars["command"]
    command = _unquote(cmd_raw, cmd_line, "command")
    try:
        placeholders = template_placeholders(command)
    except ValueError as exc:
        raise SpecError(f"command template: {exc}", cmd_line) from None
    for placeholder in placeholders:
        if placeholder not in declared:
            raise SpecError(f"command placeholder {{{placeholder}}} is not a declared param", cmd_line)

    est_line, est_raw = scalars["estimate_seconds"]
    if not est_raw.isdigit() or int(est_raw) <= 0:
        raise SpecError(f"estimate_seconds must be a positive integer, got {est_raw!r}", est_line)

    factor = DEFAULT_TIMEOUT_FACTOR
    if "timeout_factor" in scalars:
        f_line, f_raw = scalars["timeout_factor"]
        try:
            factor = Decimal(f_raw)
        except InvalidOperation:
            raise SpecError(f"timeout_factor must be a decimal, got {f_raw!r}", f_line) from None
        if not factor.is_finite() or factor <= 1:
            raise SpecError(f"timeout_factor must be > 1, got {f_raw}", f_line)

    workdir_root = DEFAULT_WORKDIR_ROOT
    if "workdir_root" in scalars:
        w_line, w_raw = scalars["workdir_root"]
        workdir_root = w_raw[1:-1] if w_raw.startswith('"') else w_raw
        if not workdir_root:
            raise SpecError("workdir_root is empty", w_line)

    return BenchmarkSpec(
        name=name,
        params=tuple(params),
        excludes=tuple(excludes),
        command_template=command,
        metrics=tuple(metrics),
        estimate_seconds=int(est_raw),
        timeout_factor=factor,
        workdir_root=workdir_root,
    )


def load_spec(path: str | Path) -> BenchmarkSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


def serialize_spec(spec: BenchmarkSpec) -> str:
    """Render ``spec`` back into spec-file syntax; ``parse_spec`` inverts it."""
    lines = [f'benchmark "{spec.name}"']
    lines += [f"param {name} = {', '.join(values)}" for name, values in spec.params]
    lines += ["exclude " + " && ".join(f"{n}={v}" for n, v in rule.conjuncts) for rule in spec.excludes]
    lines.append(f"command = {_quote(spec.command_template)}")
    lines += [f"metric {m.name} from {m.source_text()}" for m in spec.metrics]
    lines.append(f"estimate_seconds = {spec.estimate_seconds}")
    lines.append(f"timeout_factor = {spec.timeout_factor}")
    lines.append(f"workdir_root = {spec.workdir_root}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- expansion


def expand(spec: BenchmarkSpec) -> list[Configuration]:
    """Cartesian product of the param values minus excluded combinations.

    Declaration order is kept and the last param varies fastest; indices are
    assigned after filtering, so they are contiguous.
    """
    names = spec.param_names
    configs = []
    for combo in itertools.product(*(values for _, values in spec.params)):
        assignment = dict(zip(names, combo))
        if any(rule.matches(assignment) for rule in spec.excludes):
            continue
        configs.append(Configuration(assignment, len(configs)))
    return configs


def render_command(spec: BenchmarkSpec, config: Configuration) -> str:
    def sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok in ("{{", "}}"):
            return tok[0]
        return config.assignment[m.group(1)]

    return TEMPLATE_TOKEN_RE.sub(sub, spec.command_template)


def matches_any(rules: Iterable[ExclusionRule], assignment: Mapping[str, str]) -> bool:
    return any(rule.matches(assignment) for rule in rules)


def format_configurations(configs: Sequence[Configuration]) -> str:
    """One line per configuration: ``<index>\\t<k=v ...>``."""
    return "".join(
        f"{c.index}\t{' '.join(f'{k}={v}' for k, v in c.assignment.items())}".rstrip() + "\n" for c in configs
    )
