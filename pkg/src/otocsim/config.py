"""Flat ``key = value`` run configuration with command-line overrides.

One setting per line; ``#`` starts a comment. List values are comma
separated. Every key is validated against ``SCHEMA`` and errors carry the
file name and line number (or ``--set`` for overrides).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(x) for x in s.split(",") if x.strip())


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s
    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    commands: frozenset[str]


_MODEL = frozenset({"exact", "protocol"})
_DESIGN = frozenset({"protocol", "frame-potential"})
_ALL = frozenset({"exact", "protocol", "frame-potential", "compile"})

SCHEMA: dict[str, Key] = {
    "n_spins": Key(int, 4, _MODEL),
    "J": Key(float, 1.0, _MODEL),
    "h_x": Key(float, 1.0, _MODEL),
    "h_z": Key(float, 0.809, _MODEL),
    "JT": Key(float, 1.6, _MODEL | {"compile"}),
    "periodic": Key(_bool, False, _MODEL),
    "w_site": Key(int, 4, _MODEL),
    "v_site": Key(int, 1, _MODEL),
    "w_pauli": Key(_choice("X", "Y", "Z"), "Z", _MODEL),
    "v_pauli": Key(_choice("X", "Y", "Z"), "Z", _MODEL),
    "n_periods_max": Key(int, 23, _MODEL),
    "subset_weighting": Key(_choice("uniform", "pow2"), "uniform", _MODEL),
    "scheme": Key(
        _choice("global_haar", "local_haar", "local_axis_angle", "design_hamiltonian"),
        "global_haar",
        frozenset({"protocol"}),
    ),
    "n_unitaries": Key(int, 50, frozenset({"protocol"})),
    "initial_state": Key(str.strip, "", frozenset({"protocol"})),
    "scatter_periods": Key(_ints, (), frozenset({"protocol"})),
    "period_ms": Key(float, 20.0, _DESIGN),
    "n_segments": Key(int, 4, _DESIGN),
    "coupling_rule": Key(_choice("linear", "toggling"), "linear", _DESIGN),
    "molecule": Key(str.strip, "", _DESIGN | {"compile"}),
    "mode": Key(_choice("period", "samples", "time"), "period", frozenset({"frame-potential"})),
    "n_samples": Key(int, 50, frozenset({"frame-potential"})),
    "periods_ms": Key(_floats, tuple(float(x) for x in range(2, 22, 2)), frozenset({"frame-potential"})),
    "sample_sizes": Key(_ints, (10, 20, 30, 40, 50), frozenset({"frame-potential"})),
    "times_ms": Key(_floats, tuple(float(x) for x in range(0, 45, 5)), frozenset({"frame-potential"})),
}


def _assign(out: dict, command: str, key: str, raw: str, where: str, base_dir: Path | None):
    spec = SCHEMA.get(key)
    if spec is None:
        raise ConfigError(f"{where}: unknown key {key!r}")
    if command not in spec.commands:
        raise ConfigError(f"{where}: key {key!r} does not apply to '{command}'")
    try:
        value = spec.parse(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    if key == "molecule" and value:
        path = Path(value)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.is_file():
            raise ConfigError(f"{where}: molecule file {str(path)!r} does not exist")
        value = str(path)
    out[key] = value


def load_config(command: str, path: str | Path | None = None, overrides: list[str] = ()) -> dict:
    """Resolve defaults, then the config file, then ``key=value`` overrides."""
    cfg = {k: v.default for k, v in SCHEMA.items() if command in v.commands}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} does not exist")
        seen: dict[str, int] = {}
        for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{lineno}"
            if "=" not in line:
                raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in seen:
                raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {seen[key]})")
            seen[key] = lineno
            _assign(cfg, command, key, value, where, path.parent)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set {item!r}: expected key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        _assign(cfg, command, key, value, f"--set {key}", Path.cwd())
    return cfg
