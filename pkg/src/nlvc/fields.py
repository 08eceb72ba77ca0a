"""Lattice fields and their on-disk format.

A field file is a raw little-endian float64 payload, component-major with the
lattice index varying fastest inside each component, next to a JSON sidecar
``<name>.json`` holding ``{torus, rank, components}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import DomainMask, Torus

RANKS = ("scalar", "vector", "matrix")


class FieldFormatError(ValueError):
    pass


@dataclass
class Field:
    torus: Torus
    values: np.ndarray
    rank: str = "scalar"
    constraint: DomainMask | None = None

    def __post_init__(self):
        if self.rank not in RANKS:
            raise FieldFormatError(f"unknown rank {self.rank!r}")
        self.values = np.asarray(self.values, dtype=float)
        lead = self.values.ndim - self.torus.d
        if self.values.shape[lead:] != self.torus.shape or lead != RANKS.index(self.rank):
            raise FieldFormatError(f"shape {self.values.shape} does not fit a {self.rank} field on {self.torus.shape}")
        if self.constraint is not None and np.any(self.values[..., ~self.constraint.interior] != 0):
            raise FieldFormatError("constrained field is nonzero outside the interior")

    @property
    def components(self) -> list[int]:
        return list(self.values.shape[: self.values.ndim - self.torus.d])

    def sidecar(self) -> dict:
        return {"torus": self.torus.to_json(), "rank": self.rank, "components": self.components}


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_field(path, field: Field) -> None:
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    _sidecar_path(path).write_text(json.dumps(field.sidecar(), indent=2))


def read_field(path) -> Field:
    path = Path(path)
    try:
        meta = json.loads(_sidecar_path(path).read_text())
        torus = Torus.from_json(meta["torus"])
        rank = meta["rank"]
        comps = [int(c) for c in meta["components"]]
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise FieldFormatError(f"bad field sidecar for {path}: {exc}") from exc
    if rank not in RANKS or len(comps) != RANKS.index(rank):
        raise FieldFormatError(f"sidecar rank {rank!r} disagrees with components {comps}")
    payload = path.read_bytes()
    expected = 8 * math.prod(comps) * torus.size
    if len(payload) != expected:
        raise FieldFormatError(f"payload has {len(payload)} bytes, sidecar implies {expected}")
    values = np.frombuffer(payload, dtype="<f8").reshape(*comps, *torus.shape).astype(float)
    return Field(torus, values, rank)


def write_csv(path, field: Field) -> None:
    """Coordinates followed by every component, one lattice point per row."""
    d = field.torus.d
    coords = field.torus.coordinates().reshape(d, -1)
    vals = field.values.reshape(-1, field.torus.size) if field.components else field.values.reshape(1, -1)
    header = [f"x{i + 1}" for i in range(d)] + [f"c{j}" for j in range(len(vals))]
    np.savetxt(path, np.vstack([coords, vals]).T, delimiter=",", header=",".join(header), comments="", fmt="%.17g")
