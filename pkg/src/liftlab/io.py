"""Reading model descriptions and writing results atomically."""

from __future__ import annotations

import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .chain import ChainSpec, Edge, validate_chain
from .diffusion.field import PeriodicField
from .errors import ConfigError

CHAIN_KEYS = {"states", "k", "edges"}


def load_json(path: str | os.PathLike) -> object:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def chain_from_json(obj) -> ChainSpec:
    """``{"states": [...] | "k": int, "edges": [[i, j, q_ij, q_ji] | {"i", "j", "q_ij", "q_ji"}, ...]}``."""
    if not isinstance(obj, dict):
        raise ConfigError("chain description must be a JSON object")
    unknown = set(obj) - CHAIN_KEYS
    if unknown:
        raise ConfigError(f"unknown chain keys {sorted(unknown)}")
    if "states" in obj:
        states = [str(s) for s in obj["states"]]
    elif "k" in obj:
        states = [str(s) for s in range(int(obj["k"]))]
    else:
        raise ConfigError("chain description needs 'states' or 'k'")
    names = {s: n for n, s in enumerate(states)}

    def state_id(x):
        if isinstance(x, str):
            if x not in names:
                raise ConfigError(f"edge refers to unknown state {x!r}")
            return names[x]
        if isinstance(x, bool) or not isinstance(x, int):
            raise ConfigError(f"state reference {x!r} must be an index or a name")
        return x

    edges = []
    for e in obj.get("edges", []):
        if isinstance(e, dict):
            extra = set(e) - {"i", "j", "q_ij", "q_ji"}
            if extra:
                raise ConfigError(f"unknown edge keys {sorted(extra)}")
            try:
                e = [e["i"], e["j"], e["q_ij"], e["q_ji"]]
            except KeyError as exc:
                raise ConfigError(f"edge is missing {exc}") from exc
        if not isinstance(e, (list, tuple)) or len(e) != 4:
            raise ConfigError(f"edge {e!r} must be [i, j, q_ij, q_ji]")
        try:
            edges.append(Edge(state_id(e[0]), state_id(e[1]), float(e[2]), float(e[3])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"edge {e!r}: {exc}") from exc
    return validate_chain(ChainSpec.from_rates(states, edges))


def load_chain(path) -> ChainSpec:
    return chain_from_json(load_json(path))


def load_field(path) -> PeriodicField:
    return PeriodicField.from_json(load_json(path))


def _fmt(x) -> str:
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def emit(text: str, out: str | os.PathLike | None) -> None:
    """Write ``text`` to ``out`` atomically, or to stdout when ``out`` is None or ``-``."""
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        _atomic_write(out, text)


def write_csv(out, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    emit(csv_text(columns, rows), out)


def write_json(out, obj) -> None:
    emit(json.dumps(obj, indent=2, sort_keys=False) + "\n", out)
