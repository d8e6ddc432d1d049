"""YAML configuration documents naming Hamiltonians, families and transforms.

A document looks like::

    schema_version: 1
    default_entry: sep
    grid: {per_axis: 5, p_range: [-2, 2], jitter: 0.0}
    tolerances: {fund1: 1.0e-9}
    entries:
      sep:
        kind: expression
        dimension: 2
        domain: [[-2, 2], [-2, 2]]
        expression: "0.5*p1^2 + 0.5*x1^2 + cosh(p2)*(x2^2 + 1)"

Entry kinds: ``expression``, ``quadratic``, ``one_d``, ``separable``,
``seesaw_a``, ``seesaw_b``, ``type1``, ``type2``. Families and transforms may
refer to other entries by name.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .canonical import Type1Transform, Type2Transform, apply_type1, apply_type2
from .errors import CurlForceError
from .families import (
    OneDFamily,
    QuadraticFamily,
    SeesawA,
    SeesawB,
    build_1d,
    build_quadratic,
    build_seesaw_a,
    build_seesaw_b,
    build_separable,
)
from .hamiltonian import HamiltonianSpec

SCHEMA_VERSION = 1
KINDS = ("expression", "quadratic", "one_d", "separable", "seesaw_a", "seesaw_b", "type1", "type2")


class ConfigError(CurlForceError, ValueError):
    """Malformed or inconsistent configuration document."""


@dataclass
class ConfigDocument:
    entries: dict
    grid: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    default_entry: str | None = None
    source: str = ""
    _built: dict = field(default_factory=dict, repr=False)

    def entry_name(self, name: str | None) -> str:
        if name is None:
            name = self.default_entry
        if name is None:
            if len(self.entries) != 1:
                raise ConfigError(f"choose an entry with --entry: {sorted(self.entries)}")
            name = next(iter(self.entries))
        if name not in self.entries:
            raise ConfigError(f"unknown entry {name!r}; available: {sorted(self.entries)}")
        return name

    def grid_for(self, name: str) -> dict:
        merged = {"per_axis": 5, "p_range": [-2.0, 2.0], "jitter": 0.0}
        merged.update(self.grid)
        merged.update(self.entries[name].get("grid", {}))
        return merged

    def tolerances_for(self, name: str) -> dict:
        merged = dict(self.tolerances)
        merged.update(self.entries[name].get("tolerances", {}))
        return merged

    def build(self, name: str, _stack=()) -> HamiltonianSpec:
        """Resolve an entry to a HamiltonianSpec, building referenced entries first."""
        name = self.entry_name(name)
        if name in self._built:
            return self._built[name]
        if name in _stack:
            raise ConfigError(f"entry {name!r} refers to itself")
        spec = _build_entry(self, name, self.entries[name], _stack + (name,))
        self._built[name] = spec
        return spec


def bundled_names() -> list[str]:
    root = resources.files("curlforce") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_path(ref: str):
    """A filesystem path, or a bundled config given by name, ``bundled:name`` or ``examples/name``."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(), str(path)
    name = ref.split(":", 1)[1] if ref.startswith("bundled:") else ref
    name = Path(name).name
    if name.endswith(".yaml"):
        name = name[:-5]
    target = resources.files("curlforce") / "configs" / f"{name}.yaml"
    if target.is_file():
        return target.read_text(), f"bundled:{name}"
    raise ConfigError(f"no config file or bundled config named {ref!r}; bundled: {bundled_names()}")


def load(ref: str) -> ConfigDocument:
    text, source = resolve_path(ref)
    return loads(text, source)


def loads(text: str, source: str = "<string>") -> ConfigDocument:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{source}: schema_version must be {SCHEMA_VERSION}, got {version!r}")
    entries = data.get("entries")
    if not isinstance(entries, dict) or not entries:
        raise ConfigError(f"{source}: 'entries' must be a non-empty mapping")
    for name, entry in entries.items():
        if not isinstance(entry, dict) or entry.get("kind") not in KINDS:
            raise ConfigError(f"{source}: entry {name!r} needs a kind from {KINDS}")
    default = data.get("default_entry")
    if default is not None and default not in entries:
        raise ConfigError(f"{source}: default_entry {default!r} is not an entry")
    return ConfigDocument(
        entries=entries,
        grid=data.get("grid", {}) or {},
        tolerances={k: float(v) for k, v in (data.get("tolerances", {}) or {}).items()},
        seed=int(data.get("seed", 0)),
        default_entry=default,
        source=source,
    )


def _domain(value, n):
    if value is None:
        return None
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[1:] != (n, 2):
        raise ConfigError(f"domain must be a box (or list of boxes) of {n} intervals")
    return arr.tolist()


def _need(entry, key, name):
    if key not in entry:
        raise ConfigError(f"entry {name!r} is missing {key!r}")
    return entry[key]


def _reference(doc, value, name, stack, dimension=1):
    """Either the name of another entry or an inline expression mapping/string."""
    if isinstance(value, str) and value in doc.entries:
        return doc.build(value, stack)
    if isinstance(value, str):
        value = {"expression": value}
    if isinstance(value, dict):
        if "kind" in value:
            return _build_entry(doc, name, value, stack)
        n = int(value.get("dimension", dimension))
        return HamiltonianSpec.from_expr(str(_need(value, "expression", name)), n,
                                         _domain(value.get("domain"), n), label=name)
    raise ConfigError(f"entry {name!r}: cannot interpret reference {value!r}")


def _build_entry(doc, name, entry, stack) -> HamiltonianSpec:
    kind = entry["kind"]
    if kind == "expression":
        n = int(_need(entry, "dimension", name))
        return HamiltonianSpec.from_expr(str(_need(entry, "expression", name)), n,
                                         _domain(entry.get("domain"), n), label=name)
    if kind == "quadratic":
        M = np.atleast_2d(np.asarray(_need(entry, "M", name), dtype=float))
        fam = QuadraticFamily(M, str(entry.get("U", "0")), _domain(entry.get("domain"), M.shape[0]))
        return build_quadratic(fam)
    if kind == "one_d":
        fam = OneDFamily(str(_need(entry, "f", name)), str(_need(entry, "H0", name)),
                         _domain(entry.get("domain", [[-5.0, 5.0]]), 1))
        return build_1d(fam, p_max=float(entry.get("p_max", 5.0)), ode_tol=float(entry.get("ode_tol", 1e-10)))
    if kind == "separable":
        parts = _need(entry, "parts", name)
        if not isinstance(parts, list) or len(parts) != 2:
            raise ConfigError(f"entry {name!r}: 'parts' must list two 1D Hamiltonians")
        H1, H2 = (_reference(doc, part, name, stack) for part in parts)
        return build_separable(H1, H2)
    if kind == "seesaw_a":
        eta = _reference(doc, _need(entry, "eta", name), name, stack)
        fam = SeesawA(eta, str(entry.get("G", "0")), str(entry.get("u", "0")),
                      entry.get("coupling"), tuple(entry.get("y_range", (-5.0, 5.0))))
        return build_seesaw_a(fam)
    if kind == "seesaw_b":
        fam = SeesawB(
            str(entry.get("r", "s")), str(entry.get("c", "0")), str(entry.get("d", "0")),
            str(entry.get("u", "0")), tuple(entry.get("x_range", (-5.0, 5.0))),
            tuple(entry.get("y_range", (-5.0, 5.0))), tuple(entry.get("p_range", (-5.0, 5.0))),
        )
        return build_seesaw_b(fam, pv_epsilon=float(entry.get("pv_epsilon", 1e-2)))
    if kind == "type1":
        source = _reference(doc, _need(entry, "source", name), name, stack)
        T = Type1Transform(np.asarray(_need(entry, "N", name), float), entry.get("b"))
        return apply_type1(source, T)
    if kind == "type2":
        source = _reference(doc, _need(entry, "source", name), name, stack)
        T = Type2Transform.from_exprs([str(c) for c in _need(entry, "V", name)], source.n)
        return apply_type2(source, T)
    raise ConfigError(f"entry {name!r}: unknown kind {kind!r}")
