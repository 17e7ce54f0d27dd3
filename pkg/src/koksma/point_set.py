"""Point sets in the unit cube, maps between cubes, and low-discrepancy generators."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    InvalidBase,
    MapDomainError,
    MapRangeViolation,
    OutOfUnitCube,
    ValidationError,
)

HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


class CsvFormatError(ValidationError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _check_cube(points: np.ndarray) -> None:
    bad = ~((points >= 0.0) & (points <= 1.0))
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise OutOfUnitCube(int(i), int(j), float(points[i, j]))


@dataclass(frozen=True, eq=False)
class PointSet:
    """Ordered multiset of ``m`` points in ``[0, 1]^d``.

    ``points`` is a read-only ``(m, d)`` float array. Duplicates are allowed and
    order is preserved.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionMismatch(f"expected a non-empty (m, d) array, got shape {pts.shape}")
        _check_cube(pts)
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.m

    def column(self, j: int) -> np.ndarray:
        return self.points[:, j]

    def tolist(self) -> list[list[float]]:
        return self.points.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointSet):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.array_equal(self.points, other.points)
        )

    def __hash__(self) -> int:
        return hash((self.points.shape, self.points.tobytes()))


def validate(points, d: int) -> PointSet:
    """Build a :class:`PointSet` from raw coordinates, rejecting anything invalid.

    Coordinates are never clamped.
    """
    rows = [list(r) for r in points] if not isinstance(points, np.ndarray) else points
    if len(rows) == 0:
        raise DimensionMismatch("point list is empty")
    if not isinstance(rows, np.ndarray):
        for i, r in enumerate(rows):
            if len(r) != d:
                raise DimensionMismatch(f"point {i} has {len(r)} coordinates, expected {d}")
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise DimensionMismatch(f"expected shape (m, {d}), got {arr.shape}")
    if not np.isfinite(arr).all():
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise OutOfUnitCube(int(i), int(j), float(arr[i, j]))
    return PointSet(arr)


# ---------------------------------------------------------------------------
# maps


@dataclass(frozen=True, eq=False)
class MapSpec:
    """A map ``[0,1]^d_in -> [0,1]^d_out``.

    Use the constructors :meth:`identity`, :meth:`select`, :meth:`affine` and
    :meth:`tabulated` rather than building one directly.
    """

    kind: str
    d_in: int
    d_out: int
    params: dict = field(default_factory=dict)

    KINDS = ("identity", "coordinate-selection", "affine-then-clamp", "tabulated-on-atoms")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown map kind {self.kind!r}")
        if self.d_in < 1 or self.d_out < 1:
            raise DimensionMismatch("map dimensions must be positive")
        if self.kind == "tabulated-on-atoms":
            table = {}
            for x, y in zip(self.params["inputs"], self.params["outputs"]):
                table[tuple(float(v) for v in x)] = np.asarray(y, dtype=np.float64)
            object.__setattr__(self, "_table", table)

    @classmethod
    def identity(cls, d: int) -> "MapSpec":
        return cls("identity", d, d)

    @classmethod
    def select(cls, d_in: int, indices: Sequence[int]) -> "MapSpec":
        """Coordinate projection; ``indices`` are 0-based."""
        idx = tuple(int(i) for i in indices)
        if not idx or any(i < 0 or i >= d_in for i in idx):
            raise DimensionMismatch(f"invalid coordinate selection {idx} for d_in={d_in}")
        return cls("coordinate-selection", d_in, len(idx), {"indices": idx})

    @classmethod
    def affine(cls, A, b, clamp: bool = True) -> "MapSpec":
        """``x -> A x + b``, clamped to the cube when ``clamp`` is set."""
        A = _frozen(np.atleast_2d(np.asarray(A, dtype=np.float64)))
        b = _frozen(np.atleast_1d(np.asarray(b, dtype=np.float64)))
        if b.shape != (A.shape[0],):
            raise DimensionMismatch(f"offset shape {b.shape} does not match matrix {A.shape}")
        return cls("affine-then-clamp", A.shape[1], A.shape[0], {"A": A, "b": b, "clamp": bool(clamp)})

    @classmethod
    def tabulated(cls, inputs, outputs) -> "MapSpec":
        X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
        if X.shape[0] != Y.shape[0]:
            raise DimensionMismatch("tabulated map needs one output per input")
        bad = ~((Y >= 0.0) & (Y <= 1.0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise MapRangeViolation(f"tabulated output {i}, coordinate {j} = {Y[i, j]!r} outside [0, 1]")
        return cls("tabulated-on-atoms", X.shape[1], Y.shape[1], {"inputs": _frozen(X), "outputs": _frozen(Y)})

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d_in:
            raise DimensionMismatch(f"map expects d_in={self.d_in}, got {X.shape[1]}")
        if self.kind == "identity":
            out = X.copy()
        elif self.kind == "coordinate-selection":
            out = X[:, list(self.params["indices"])]
        elif self.kind == "affine-then-clamp":
            out = X @ self.params["A"].T + self.params["b"]
            if self.params["clamp"]:
                out = np.clip(out, 0.0, 1.0)
        else:
            rows = []
            for x in X:
                try:
                    rows.append(self._table[tuple(float(v) for v in x)])
                except KeyError:
                    raise MapDomainError(f"point {x.tolist()} is not in the tabulated support") from None
            out = np.array(rows, dtype=np.float64).reshape(len(X), self.d_out)
        bad = ~((out >= 0.0) & (out <= 1.0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise MapRangeViolation(f"image of point {i} has coordinate {j} = {out[i, j]!r} outside [0, 1]")
        return out

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind, "d_in": self.d_in, "d_out": self.d_out}
        p = self.params
        if self.kind == "coordinate-selection":
            doc["indices"] = list(p["indices"])
        elif self.kind == "affine-then-clamp":
            doc.update(A=p["A"].tolist(), b=p["b"].tolist(), clamp=p["clamp"])
        elif self.kind == "tabulated-on-atoms":
            doc.update(inputs=p["inputs"].tolist(), outputs=p["outputs"].tolist())
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "MapSpec":
        kind = doc.get("kind")
        if kind == "identity":
            return cls.identity(int(doc["d_in"]))
        if kind == "coordinate-selection":
            return cls.select(int(doc["d_in"]), doc["indices"])
        if kind == "affine-then-clamp":
            return cls.affine(doc["A"], doc["b"], doc.get("clamp", True))
        if kind == "tabulated-on-atoms":
            return cls.tabulated(doc["inputs"], doc["outputs"])
        raise ValidationError(f"unknown map kind {kind!r}")


def apply_map(ps: PointSet, map: MapSpec) -> PointSet:
    if map.d_in != ps.d:
        raise DimensionMismatch(f"map expects d_in={map.d_in}, point set has d={ps.d}")
    if map.kind == "identity":
        return ps
    return PointSet(map(ps.points))


# ---------------------------------------------------------------------------
# generators


def _radical_inverse(m: int, base: int) -> np.ndarray:
    if m * base >= 2**53:
        raise ValidationError(f"m={m} too large for exact radical inverse in base {base}")
    i = np.arange(1, m + 1, dtype=np.int64)
    rev = np.zeros(m, dtype=np.int64)
    denom = 1
    while denom <= m:
        rev = rev * base + i % base
        i //= base
        denom *= base
    # every value is an exact integer ratio, so the float division rounds once
    return rev.astype(np.float64) / float(denom)


def van_der_corput(m: int, base: int = 2) -> PointSet:
    """First ``m`` terms (starting at index 1) of the base-``base`` radical inverse."""
    if base < 2:
        raise InvalidBase(f"base must be >= 2, got {base}")
    if m < 1:
        raise ValidationError("m must be >= 1")
    return PointSet(_radical_inverse(m, base)[:, None])


def halton(m: int, d: int) -> PointSet:
    """Unscrambled Halton set using the first ``d`` primes as bases."""
    if d < 1:
        raise ValidationError("d must be >= 1")
    if d > len(HALTON_PRIMES):
        raise DimensionTooLarge(f"halton supports d <= {len(HALTON_PRIMES)}, got {d}")
    if m < 1:
        raise ValidationError("m must be >= 1")
    return PointSet(np.column_stack([_radical_inverse(m, p) for p in HALTON_PRIMES[:d]]))


def equispaced_centers(m: int) -> PointSet:
    if m < 1:
        raise ValidationError("m must be >= 1")
    i = np.arange(1, m + 1, dtype=np.float64)
    return PointSet(((2 * i - 1) / (2 * m))[:, None])


# ---------------------------------------------------------------------------
# CSV format: "# d=<d>" header, one comma-separated point per line


def format_csv(ps: PointSet) -> str:
    lines = [f"# d={ps.d}"]
    lines += [",".join(format(v, ".17g") for v in row) for row in ps.points.tolist()]
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> PointSet:
    d = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if d is None:
            if not line.startswith("#") or not line[1:].strip().startswith("d="):
                raise CsvFormatError(lineno, "expected header '# d=<d>'")
            try:
                d = int(line[1:].strip()[2:])
            except ValueError:
                raise CsvFormatError(lineno, f"bad dimension in header {line!r}") from None
            if d < 1:
                raise CsvFormatError(lineno, "dimension must be positive")
            continue
        if line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) != d:
            raise CsvFormatError(lineno, f"expected {d} coordinates, got {len(fields)}")
        try:
            row = [float(x) for x in fields]
        except ValueError:
            raise CsvFormatError(lineno, f"non-numeric coordinate in {line!r}") from None
        for j, v in enumerate(row):
            if not 0.0 <= v <= 1.0:
                raise CsvFormatError(lineno, f"coordinate {j} = {v!r} outside [0, 1]")
        rows.append(row)
    if d is None:
        raise CsvFormatError(1, "missing '# d=<d>' header")
    if not rows:
        raise CsvFormatError(1, "no points")
    return PointSet(np.array(rows, dtype=np.float64))


def write_csv(ps: PointSet, path) -> None:
    Path(path).write_text(format_csv(ps))


def read_csv(path) -> PointSet:
    return parse_csv(Path(path).read_text())


def concat(sets: Iterable[PointSet]) -> PointSet:
    return PointSet(np.vstack([s.points for s in sets]))
