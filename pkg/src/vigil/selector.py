"""Metric selector grammar: `metric_name{label="value",...}`.

Exact-match labels only. A series matches when its name equals the
selector's and it carries every selector label with the exact value;
extra labels on the series are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass
import re

from .errors import InvalidQuery

_NAME_RE = re.compile(r"[a-zA-Z_:][a-zA-Z0-9_:]*")
_LABEL_KEY_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*")


@dataclass(frozen=True)
class Selector:
    metric_name: str
    labels: tuple[tuple[str, str], ...]  # sorted by key

    def matches(self, name: str, labels: dict) -> bool:
        if name != self.metric_name:
            return False
        return all(labels.get(k) == v for k, v in self.labels)

    def __str__(self) -> str:
        if not self.labels:
            return self.metric_name
        inner = ",".join(f'{k}="{_escape(v)}"' for k, v in self.labels)
        return f"{self.metric_name}{{{inner}}}"


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def _unescape(value: str) -> str:
    return value.replace('\\"', '"').replace("\\\\", "\\")


def parse_selector(expr: str) -> Selector:
    """Parse a selector expression; malformed input raises InvalidQuery."""
    if not isinstance(expr, str) or not expr.strip():
        raise InvalidQuery("empty selector")
    expr = expr.strip()
    m = _NAME_RE.match(expr)
    if m is None:
        raise InvalidQuery("selector must start with a metric name",
                           expr=expr)
    name = m.group(0)
    rest = expr[m.end():]
    if not rest:
        return Selector(name, ())
    if not (rest.startswith("{") and rest.endswith("}")):
        raise InvalidQuery("labels must be wrapped in a single {...} block",
                           expr=expr)
    body = rest[1:-1].strip()
    labels: dict[str, str] = {}
    if body:
        for part in _split_pairs(body, expr):
            if "=" not in part:
                raise InvalidQuery("label must be key=\"value\"", part=part)
            key, _, raw = part.partition("=")
            key = key.strip()
            raw = raw.strip()
            if not _LABEL_KEY_RE.fullmatch(key):
                raise InvalidQuery("bad label name", label=key)
            if len(raw) < 2 or raw[0] != '"' or raw[-1] != '"':
                raise InvalidQuery("label value must be double-quoted",
                                   part=part)
            if key in labels:
                raise InvalidQuery("duplicate label", label=key)
            labels[key] = _unescape(raw[1:-1])
    return Selector(name, tuple(sorted(labels.items())))


def _split_pairs(body: str, expr: str) -> list[str]:
    """Split on commas that sit outside quoted values."""
    parts = []
    current = []
    in_quotes = False
    escaped = False
    for ch in body:
        if escaped:
            current.append(ch)
            escaped = False
            continue
        if ch == "\\":
            current.append(ch)
            escaped = True
            continue
        if ch == '"':
            in_quotes = not in_quotes
            current.append(ch)
            continue
        if ch == "," and not in_quotes:
            parts.append("".join(current).strip())
            current = []
            continue
        current.append(ch)
    if in_quotes:
        raise InvalidQuery("unterminated quote in selector", expr=expr)
    parts.append("".join(current).strip())
    if any(not p for p in parts):
        raise InvalidQuery("empty label pair", expr=expr)
    return parts
