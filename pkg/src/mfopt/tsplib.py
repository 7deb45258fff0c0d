"""TSPLIB instance ingestion and exact integer tour evaluation.

Covers the NODE_COORD_SECTION / EUC_2D subset of the TSPLIB format, which is
what the bundled Krolak/Felts/Nelson benchmark family uses. Distances follow
the TSPLIB convention: Euclidean length rounded to the nearest integer, ties
rounding up. City labels, like everything user-facing in this package, are
1-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels

__all__ = [
    "TspInstance",
    "TsplibError",
    "UnsupportedFormatError",
    "DimensionMismatchError",
    "parse_tsplib",
    "load_instance",
    "read_opt_tour",
    "load_opt_tour",
    "tour_length",
    "shared_node_count",
    "node_overlap",
    "overlap_stats",
    "bundled_instances_dir",
    "BUNDLED_INSTANCES",
]

#: Instance names shipped with the package (the 8-task benchmark family).
BUNDLED_INSTANCES = (
    "kroA100", "kroB100", "kroC100", "kroD100", "kroE100",
    "kroA150", "kroB150", "kroA200",
)


class TsplibError(ValueError):
    """Malformed TSPLIB content."""


class UnsupportedFormatError(TsplibError):
    """Instance requires a feature outside the EUC_2D coordinate subset."""


class DimensionMismatchError(ValueError):
    """A tour's length does not match the instance dimension."""


def bundled_instances_dir() -> Path:
    """Directory holding the packaged ``.tsp`` and ``.opt.tour`` files."""
    return Path(__file__).resolve().parent / "data"


@dataclass(eq=False)
class TspInstance:
    """A parsed TSP task: named 2D cities plus a precomputed distance matrix.

    ``coords[i - 1]`` is the coordinate pair of city ``i``;
    ``distance_matrix[i - 1, j - 1]`` the rounded Euclidean distance between
    cities ``i`` and ``j``. The matrix is symmetric with a zero diagonal.
    Instances are immutable after construction (the arrays are marked
    read-only) and safe to share across concurrent runs.
    """

    name: str
    dimension: int
    coords: np.ndarray
    distance_matrix: np.ndarray

    def __post_init__(self) -> None:
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64)
        self.distance_matrix = np.ascontiguousarray(self.distance_matrix,
                                                    dtype=np.int64)
        if self.coords.shape != (self.dimension, 2):
            raise TsplibError(
                f"{self.name!r}: expected {self.dimension} coordinate pairs, "
                f"got array of shape {self.coords.shape}")
        if self.distance_matrix.shape != (self.dimension, self.dimension):
            raise TsplibError(f"{self.name!r}: bad distance matrix shape")
        self.coords.setflags(write=False)
        self.distance_matrix.setflags(write=False)

    def distance(self, i: int, j: int) -> int:
        """Distance between cities ``i`` and ``j`` (1-based labels)."""
        return int(self.distance_matrix[i - 1, j - 1])

    def coord_set(self) -> frozenset[tuple[float, float]]:
        """City coordinates as a set, for exact-equality comparisons."""
        return frozenset((float(x), float(y)) for x, y in self.coords)


def _euc_2d_matrix(coords: np.ndarray) -> np.ndarray:
    # TSPLIB nint(): nearest integer, .5 rounds up.
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt((diff * diff).sum(axis=2))
    return np.floor(d + 0.5).astype(np.int64)


def parse_tsplib(text: str) -> TspInstance:
    """Parse the content of a ``.tsp`` file.

    Only ``EDGE_WEIGHT_TYPE: EUC_2D`` with a ``NODE_COORD_SECTION`` is
    supported. The distance matrix is built eagerly.

    Raises ``TsplibError`` for a missing/invalid DIMENSION or an incomplete
    coordinate section, ``UnsupportedFormatError`` for any other edge-weight
    type.
    """
    name = ""
    dimension: int | None = None
    weight_type: str | None = None
    coords: np.ndarray | None = None

    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line == "EOF":
            continue
        key, _, value = line.partition(":")
        key = key.strip().upper()
        value = value.strip()
        if key == "NAME":
            name = value
        elif key == "DIMENSION":
            try:
                dimension = int(value)
            except ValueError:
                raise TsplibError(f"invalid DIMENSION value {value!r}") from None
            if dimension < 1:
                raise TsplibError(f"DIMENSION must be positive, got {dimension}")
        elif key == "EDGE_WEIGHT_TYPE":
            weight_type = value.upper()
        elif key == "NODE_COORD_SECTION":
            if dimension is None:
                raise TsplibError("DIMENSION must appear before NODE_COORD_SECTION")
            if weight_type != "EUC_2D":
                raise UnsupportedFormatError(
                    f"EDGE_WEIGHT_TYPE {weight_type!r} is not supported "
                    "(only EUC_2D)")
            coords = np.full((dimension, 2), np.nan)
            filled = np.zeros(dimension, dtype=bool)
            for _ in range(dimension):
                while i < len(lines) and not lines[i].strip():
                    i += 1
                parts = lines[i].split() if i < len(lines) else []
                if len(parts) != 3:
                    raise TsplibError(
                        f"expected {dimension} 'index x y' coordinate lines, "
                        f"section ended after {int(filled.sum())}")
                i += 1
                try:
                    idx = int(parts[0])
                    x, y = float(parts[1]), float(parts[2])
                except ValueError:
                    raise TsplibError(
                        f"bad coordinate line: {' '.join(parts)!r}") from None
                if not 1 <= idx <= dimension:
                    raise TsplibError(
                        f"city index {idx} outside 1..{dimension}")
                if filled[idx - 1]:
                    raise TsplibError(f"duplicate city index {idx}")
                filled[idx - 1] = True
                coords[idx - 1] = (x, y)
            break  # anything after the section (EOF marker etc.) is ignored
        # TYPE, COMMENT, DISPLAY_DATA_TYPE, ...: irrelevant here

    if dimension is None:
        raise TsplibError("missing DIMENSION")
    if coords is None:
        raise TsplibError("missing NODE_COORD_SECTION")
    return TspInstance(name=name, dimension=dimension, coords=coords,
                       distance_matrix=_euc_2d_matrix(coords))


def load_instance(path: str | Path) -> TspInstance:
    """Parse a ``.tsp`` file; the file stem is used if NAME is absent."""
    path = Path(path)
    inst = parse_tsplib(path.read_text())
    if not inst.name:
        return TspInstance(name=path.stem, dimension=inst.dimension,
                           coords=inst.coords.copy(),
                           distance_matrix=inst.distance_matrix.copy())
    return inst


def read_opt_tour(text: str) -> np.ndarray:
    """Read a TSPLIB tour file (TOUR_SECTION, terminated by -1 or EOF).

    Returns the tour as an int64 array of 1-based city labels and checks it
    is a permutation of 1..n.
    """
    tour: list[int] = []
    in_section = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.upper() == "TOUR_SECTION":
            in_section = True
            continue
        if not in_section:
            continue
        if line == "-1" or line.upper() == "EOF":
            break
        try:
            tour.extend(int(tok) for tok in line.split() if tok != "-1")
        except ValueError:
            raise TsplibError(f"bad tour line {line!r}") from None
        if "-1" in line.split():
            break
    if not tour:
        raise TsplibError("no TOUR_SECTION entries found")
    arr = np.asarray(tour, dtype=np.int64)
    if not _is_permutation(arr, arr.size):
        raise TsplibError("tour is not a permutation of 1..n")
    return arr


def load_opt_tour(path: str | Path) -> np.ndarray:
    return read_opt_tour(Path(path).read_text())


def _is_permutation(arr: np.ndarray, n: int) -> bool:
    if arr.size != n or n == 0:
        return False
    if arr.min() < 1 or arr.max() > n:
        return False
    return bool((np.bincount(arr, minlength=n + 1)[1:] == 1).all())


def tour_length(instance: TspInstance, tour) -> int:
    """Exact length of the closed tour, including the edge last -> first."""
    t = np.ascontiguousarray(tour, dtype=np.int64)
    if t.ndim != 1 or t.size != instance.dimension:
        raise DimensionMismatchError(
            f"tour visits {t.size} cities but {instance.name or 'instance'!r} "
            f"has {instance.dimension}")
    if not _is_permutation(t, instance.dimension):
        raise ValueError("tour is not a permutation of 1..n")
    return int(_kernels.tour_length(t, instance.distance_matrix))


def shared_node_count(a: TspInstance, b: TspInstance) -> int:
    """Number of coordinate-identical cities (exact equality on both axes)."""
    return len(a.coord_set() & b.coord_set())


def node_overlap(a: TspInstance, b: TspInstance) -> float:
    """Structural complementarity of two instances, as a percentage.

    Computed as shared coordinate-identical cities over the mean of the two
    dimensions (the Dice coefficient): ``100 * 2*shared / (n_a + n_b)``.
    Symmetric, 100.0 for identical instances, 0.0 for disjoint ones. See
    ``overlap_stats`` for the raw count and the min-dimension variant.
    """
    return 200.0 * shared_node_count(a, b) / (a.dimension + b.dimension)


def overlap_stats(a: TspInstance, b: TspInstance) -> dict:
    """Shared-node count plus both percentage normalisations.

    ``pct_mean_dim`` is the value returned by ``node_overlap``;
    ``pct_min_dim`` normalises by the smaller dimension instead.
    """
    shared = shared_node_count(a, b)
    return {
        "shared": shared,
        "pct_mean_dim": 200.0 * shared / (a.dimension + b.dimension),
        "pct_min_dim": 100.0 * shared / min(a.dimension, b.dimension),
    }
