"""YAML loading that remembers where every key came from."""

from __future__ import annotations

from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and key."""


def _construct(node, path, lines, source):
    lines.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        out = {}
        for key_node, value_node in node.value:
            key = key_node.value
            if key in out:
                raise ConfigError(f"{source}:{key_node.start_mark.line + 1}: duplicate key {key!r}")
            lines[path + (key,)] = key_node.start_mark.line + 1
            out[key] = _construct(value_node, path + (key,), lines, source)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_construct(v, path + (i,), lines, source) for i, v in enumerate(node.value)]
    return _scalar(node)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node)
    finally:
        loader.dispose()


def load_text(text: str, source: str = "<string>"):
    """Parse YAML text into plain python data plus a ``path -> line`` map."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    lines: dict[tuple, int] = {}
    if node is None:
        return {}, lines
    return _construct(node, (), lines, source), lines


def load_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    return load_text(text, str(path))


def where(source: str, lines: dict, path: tuple) -> str:
    """``file:line`` for the deepest known prefix of ``path``."""
    p = tuple(path)
    while p and p not in lines:
        p = p[:-1]
    line = lines.get(p)
    return f"{source}:{line}" if line else source


def dotted(path) -> str:
    out = ""
    for part in path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out
