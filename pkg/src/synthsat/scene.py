"""Facility scene representation and procedural layout generation.

A facility is a grid of square cells holding reactors, cooling towers,
stacks and tetromino-footprint buildings, plus activity details (parked
cars, steam sources).  Generation is seeded rejection sampling over
shuffled anchor cells; the layout stream and the detail stream are split
(`derive_seed(seed, "layout")` / `(seed, "details")`) so adding details
never perturbs the layout itself.

World frame: +x east along increasing columns, +y north along increasing
rows, grid centered on the origin; cell (row, col) spans
``[(col - cols/2)*cell, (col+1 - cols/2)*cell] x [(row - rows/2)*cell, ...]``
meters.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .canonical import canonical_json, digest_of
from .errors import InfeasiblePlacement, InvalidConfig, InvalidLevel
from .seeds import rng_for

REACTOR_HEIGHT_M = 40.0
COOLING_TOWER_HEIGHT_M = 60.0
STACK_HEIGHT_M = 80.0
STOREY_HEIGHT_M = 6.0
DEFAULT_CELL_SIZE_M = 30.0

PARKING_BLOCK = (2, 2)
CARS_PER_CELL = 6
CAR_PALETTE_SIZE = 8

MAX_PLACEMENT_ATTEMPTS = 1000

TETROMINO_SHAPES = {
    "I": ((0, 0), (0, 1), (0, 2), (0, 3)),
    "O": ((0, 0), (0, 1), (1, 0), (1, 1)),
    "T": ((0, 0), (0, 1), (0, 2), (1, 1)),
    "L": ((0, 0), (1, 0), (2, 0), (2, 1)),
    "S": ((0, 1), (0, 2), (1, 0), (1, 1)),
}
TETROMINO_ROTATIONS = (0, 90, 180, 270)


class StructureType(str, Enum):
    REACTOR = "reactor"
    COOLING_TOWER = "cooling_tower"
    STACK = "stack"
    BUILDING = "building"


# Placement order: largest footprint first, then fixed kind order.
_PLACEMENT_ORDER = (
    StructureType.BUILDING,
    StructureType.REACTOR,
    StructureType.COOLING_TOWER,
    StructureType.STACK,
)


def tetromino_cells(shape: str, rotation: int) -> tuple[tuple[int, int], ...]:
    """Normalized cell set of a tetromino shape at a given rotation."""
    if shape not in TETROMINO_SHAPES:
        raise InvalidConfig(f"unknown tetromino shape {shape!r}")
    if rotation not in TETROMINO_ROTATIONS:
        raise InvalidConfig(f"rotation must be one of {TETROMINO_ROTATIONS}, got {rotation}")
    cells = TETROMINO_SHAPES[shape]
    for _ in range(rotation // 90):
        cells = tuple((c, -r) for r, c in cells)
        rmin = min(r for r, _ in cells)
        cmin = min(c for _, c in cells)
        cells = tuple((r - rmin, c - cmin) for r, c in cells)
    return tuple(sorted(cells))


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    cell_size: float = DEFAULT_CELL_SIZE_M

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidConfig(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.cell_size <= 0:
            raise InvalidConfig(f"cell_size must be positive, got {self.cell_size}")

    def cell_origin(self, row: int, col: int) -> tuple[float, float]:
        """World (x, y) of the cell's low corner."""
        x = (col - self.cols / 2.0) * self.cell_size
        y = (row - self.rows / 2.0) * self.cell_size
        return x, y

    def contains_point(self, x: float, y: float, cell: tuple[int, int]) -> bool:
        ox, oy = self.cell_origin(*cell)
        return ox <= x <= ox + self.cell_size and oy <= y <= oy + self.cell_size


@dataclass(frozen=True)
class PlacedStructure:
    kind: StructureType
    anchor_cell: tuple[int, int]
    footprint_cells: frozenset[tuple[int, int]]
    height: float
    instance_id: int
    tetromino_shape: str | None = None
    tetromino_rotation: int | None = None


@dataclass(frozen=True)
class Car:
    x: float
    y: float
    heading: float
    color_index: int


@dataclass(frozen=True)
class SteamSource:
    tower_instance_id: int
    intensity: float


@dataclass(frozen=True)
class ActivityDetails:
    activity_level: float = 0.0
    cars: tuple[Car, ...] = ()
    steam_sources: tuple[SteamSource, ...] = ()


@dataclass(frozen=True)
class FacilityLayout:
    grid: GridSpec
    structures: tuple[PlacedStructure, ...]
    parking_cells: frozenset[tuple[int, int]]
    details: ActivityDetails
    seed: int

    def structure_by_id(self, instance_id: int) -> PlacedStructure:
        for s in self.structures:
            if s.instance_id == instance_id:
                return s
        raise KeyError(instance_id)


@dataclass(frozen=True)
class Violation:
    code: str
    instance_id: int | None
    message: str


def _footprint_for(kind: StructureType, anchor, shape=None, rotation=None):
    r0, c0 = anchor
    if kind is StructureType.BUILDING:
        return frozenset((r0 + r, c0 + c) for r, c in tetromino_cells(shape, rotation))
    return frozenset({(r0, c0)})


def _cells_in_grid(cells, grid: GridSpec) -> bool:
    return all(0 <= r < grid.rows and 0 <= c < grid.cols for r, c in cells)


def _free_parking_blocks(grid: GridSpec, occupied) -> list[tuple[int, int]]:
    blocks = []
    for r in range(grid.rows - PARKING_BLOCK[0] + 1):
        for c in range(grid.cols - PARKING_BLOCK[1] + 1):
            cells = [(r + i, c + j) for i in range(PARKING_BLOCK[0]) for j in range(PARKING_BLOCK[1])]
            if not any(cell in occupied for cell in cells):
                blocks.append((r, c))
    return blocks


def _block_adjacent_to(block_anchor, footprint) -> bool:
    r, c = block_anchor
    cells = {(r + i, c + j) for i in range(PARKING_BLOCK[0]) for j in range(PARKING_BLOCK[1])}
    for br, bc in cells:
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (br + dr, bc + dc) in footprint:
                return True
    return False


def generate_layout(grid: GridSpec, counts: dict, seed: int) -> FacilityLayout:
    """Place the requested structure counts on the grid, deterministically.

    Buildings (largest footprint) go first; each structure gets up to
    1000 shuffled anchor attempts before InfeasiblePlacement.  When any
    building is requested, a 2x2 parking region is reserved, preferring
    blocks adjacent to the first building.
    """
    counts = {StructureType(k): int(v) for k, v in counts.items()}
    for kind, n in counts.items():
        if n < 0:
            raise InvalidConfig(f"count for {kind.value} must be nonnegative, got {n}")

    n_buildings = counts.get(StructureType.BUILDING, 0)
    needed = sum(
        (4 if kind is StructureType.BUILDING else 1) * counts.get(kind, 0) for kind in _PLACEMENT_ORDER
    )
    if n_buildings > 0:
        needed += PARKING_BLOCK[0] * PARKING_BLOCK[1]
    if needed > grid.rows * grid.cols:
        raise InfeasiblePlacement(
            f"requested structures need {needed} cells but grid has {grid.rows * grid.cols}"
        )

    rng = rng_for(seed, "layout")
    anchors = [(r, c) for r in range(grid.rows) for c in range(grid.cols)]
    occupied: set[tuple[int, int]] = set()
    structures: list[PlacedStructure] = []
    next_id = 1

    for kind in _PLACEMENT_ORDER:
        for _ in range(counts.get(kind, 0)):
            order = [anchors[i] for i in rng.permutation(len(anchors))]
            placed = None
            for attempt, anchor in enumerate(order):
                if attempt >= MAX_PLACEMENT_ATTEMPTS:
                    break
                shape = rotation = None
                if kind is StructureType.BUILDING:
                    shape = sorted(TETROMINO_SHAPES)[rng.integers(len(TETROMINO_SHAPES))]
                    rotation = TETROMINO_ROTATIONS[rng.integers(len(TETROMINO_ROTATIONS))]
                cells = _footprint_for(kind, anchor, shape, rotation)
                if _cells_in_grid(cells, grid) and not (cells & occupied):
                    placed = (anchor, cells, shape, rotation)
                    break
            if placed is None:
                raise InfeasiblePlacement(
                    f"could not place {kind.value} after {MAX_PLACEMENT_ATTEMPTS} attempts"
                )
            anchor, cells, shape, rotation = placed
            if kind is StructureType.BUILDING:
                height = STOREY_HEIGHT_M * int(rng.integers(1, 4))
            elif kind is StructureType.REACTOR:
                height = REACTOR_HEIGHT_M
            elif kind is StructureType.COOLING_TOWER:
                height = COOLING_TOWER_HEIGHT_M
            else:
                height = STACK_HEIGHT_M
            occupied |= cells
            structures.append(
                PlacedStructure(
                    kind=kind,
                    anchor_cell=anchor,
                    footprint_cells=cells,
                    height=height,
                    instance_id=next_id,
                    tetromino_shape=shape,
                    tetromino_rotation=rotation,
                )
            )
            next_id += 1

    parking: frozenset[tuple[int, int]] = frozenset()
    if n_buildings > 0:
        first_building = next(s for s in structures if s.kind is StructureType.BUILDING)
        blocks = _free_parking_blocks(grid, occupied)
        if not blocks:
            raise InfeasiblePlacement("no free 2x2 block available for the parking lot")
        adjacent_first = [b for b in blocks if _block_adjacent_to(b, first_building.footprint_cells)]
        any_footprint = set().union(*(s.footprint_cells for s in structures))
        adjacent_any = [b for b in blocks if _block_adjacent_to(b, any_footprint)]
        for tier in (adjacent_first, adjacent_any, blocks):
            if tier:
                pick = tier[rng.integers(len(tier))]
                break
        r, c = pick
        parking = frozenset(
            (r + i, c + j) for i in range(PARKING_BLOCK[0]) for j in range(PARKING_BLOCK[1])
        )

    return FacilityLayout(
        grid=grid,
        structures=tuple(structures),
        parking_cells=parking,
        details=ActivityDetails(),
        seed=int(seed),
    )


def parking_capacity(layout: FacilityLayout) -> int:
    return CARS_PER_CELL * len(layout.parking_cells)


def _car_slots(layout: FacilityLayout):
    """Fixed car slots: 2 rows x 3 columns per parking cell, cells sorted."""
    s = layout.grid.cell_size
    slots = []
    for cell in sorted(layout.parking_cells):
        ox, oy = layout.grid.cell_origin(*cell)
        for i in range(2):
            for j in range(3):
                cx = ox + (j + 0.5) / 3.0 * s
                cy = oy + (i + 0.5) / 2.0 * s
                heading = 0.0 if i == 0 else 3.141592653589793
                slots.append((cell, cx, cy, heading))
    return slots


def add_activity(layout: FacilityLayout, activity_level: float, seed: int) -> FacilityLayout:
    """Populate cars and steam for the given activity level in [0, 1].

    Car count is round-half-up of level x parking capacity; the filled
    slots for a lower level are always a prefix of those for a higher
    level at the same seed.  Every cooling tower steams at intensity
    equal to the level (omitted entirely at level 0).
    """
    if not (0.0 <= activity_level <= 1.0):
        raise InvalidLevel(f"activity_level must be in [0,1], got {activity_level}")

    slots = _car_slots(layout)
    n_cars = int(activity_level * len(slots) + 0.5)
    order = rng_for(seed, "details", "cars").permutation(len(slots))
    cars = []
    for slot_index in order[:n_cars]:
        cell, cx, cy, heading = slots[slot_index]
        srng = rng_for(seed, "car", int(slot_index))
        jx, jy = srng.uniform(-0.4, 0.4, size=2)
        dh = srng.uniform(-0.05, 0.05)
        color = int(srng.integers(CAR_PALETTE_SIZE))
        cars.append(Car(x=cx + jx, y=cy + jy, heading=heading + dh, color_index=color))

    steam = []
    if activity_level > 0:
        for s in layout.structures:
            if s.kind is StructureType.COOLING_TOWER:
                steam.append(SteamSource(tower_instance_id=s.instance_id, intensity=activity_level))

    details = ActivityDetails(
        activity_level=float(activity_level), cars=tuple(cars), steam_sources=tuple(steam)
    )
    return replace(layout, details=details)


def validate_layout(layout: FacilityLayout) -> list[Violation]:
    """Check every layout invariant; empty result means the layout is valid."""
    out: list[Violation] = []
    grid = layout.grid

    seen_cells: dict[tuple[int, int], int] = {}
    seen_ids: set[int] = set()
    tower_ids = set()
    for s in layout.structures:
        if s.instance_id in seen_ids:
            out.append(Violation("DuplicateInstanceId", s.instance_id, "instance_id reused"))
        seen_ids.add(s.instance_id)
        if s.kind is StructureType.COOLING_TOWER:
            tower_ids.add(s.instance_id)
        if s.height <= 0:
            out.append(Violation("NonPositiveHeight", s.instance_id, f"height={s.height}"))
        if not _cells_in_grid(s.footprint_cells, grid):
            out.append(Violation("FootprintOutsideGrid", s.instance_id, "cells outside grid"))
        for cell in s.footprint_cells:
            if cell in seen_cells:
                out.append(
                    Violation(
                        "OverlappingFootprint",
                        s.instance_id,
                        f"cell {cell} already used by instance {seen_cells[cell]}",
                    )
                )
            else:
                seen_cells[cell] = s.instance_id
        if s.kind is StructureType.BUILDING:
            if len(s.footprint_cells) != 4 or not _edge_connected(s.footprint_cells):
                out.append(
                    Violation(
                        "TetrominoBadFootprint",
                        s.instance_id,
                        "building footprint must be 4 edge-connected cells",
                    )
                )

    for cell in layout.parking_cells:
        if cell in seen_cells:
            out.append(
                Violation("OverlappingFootprint", seen_cells[cell], f"parking overlaps cell {cell}")
            )
        if not _cells_in_grid([cell], grid):
            out.append(Violation("FootprintOutsideGrid", None, f"parking cell {cell} outside grid"))

    d = layout.details
    if not (0.0 <= d.activity_level <= 1.0):
        out.append(Violation("ActivityLevelRange", None, f"activity_level={d.activity_level}"))
    if d.activity_level == 0.0 and (d.cars or d.steam_sources):
        out.append(Violation("DetailsNotEmptyAtZero", None, "details present at activity 0"))
    for i, car in enumerate(d.cars):
        if not any(grid.contains_point(car.x, car.y, cell) for cell in layout.parking_cells):
            out.append(Violation("CarOutsideParking", None, f"car {i} at ({car.x:.2f},{car.y:.2f})"))
    for src in d.steam_sources:
        if src.tower_instance_id not in tower_ids:
            out.append(
                Violation(
                    "SteamSourceUnknownTower", src.tower_instance_id, "no such cooling tower"
                )
            )
        if not (0.0 <= src.intensity <= 1.0):
            out.append(
                Violation("SteamIntensityRange", src.tower_instance_id, f"intensity={src.intensity}")
            )
    return out


def _edge_connected(cells) -> bool:
    cells = set(cells)
    if not cells:
        return False
    stack = [next(iter(sorted(cells)))]
    seen = set()
    while stack:
        r, c = stack.pop()
        if (r, c) in seen:
            continue
        seen.add((r, c))
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if (r + dr, c + dc) in cells and (r + dr, c + dc) not in seen:
                stack.append((r + dr, c + dc))
    return seen == cells


def layout_to_dict(layout: FacilityLayout) -> dict:
    return {
        "grid": {
            "rows": layout.grid.rows,
            "cols": layout.grid.cols,
            "cell_size": layout.grid.cell_size,
        },
        "seed": layout.seed,
        "structures": [
            {
                "kind": s.kind.value,
                "anchor_cell": list(s.anchor_cell),
                "footprint_cells": [list(c) for c in sorted(s.footprint_cells)],
                "height": s.height,
                "instance_id": s.instance_id,
                "tetromino_shape": s.tetromino_shape,
                "tetromino_rotation": s.tetromino_rotation,
            }
            for s in sorted(layout.structures, key=lambda s: s.instance_id)
        ],
        "parking_cells": [list(c) for c in sorted(layout.parking_cells)],
        "details": {
            "activity_level": layout.details.activity_level,
            "cars": [
                {"x": c.x, "y": c.y, "heading": c.heading, "color_index": c.color_index}
                for c in layout.details.cars
            ],
            "steam_sources": [
                {"tower_instance_id": s.tower_instance_id, "intensity": s.intensity}
                for s in layout.details.steam_sources
            ],
        },
    }


def layout_from_dict(doc: dict) -> FacilityLayout:
    grid = GridSpec(
        rows=int(doc["grid"]["rows"]),
        cols=int(doc["grid"]["cols"]),
        cell_size=float(doc["grid"]["cell_size"]),
    )
    structures = tuple(
        PlacedStructure(
            kind=StructureType(s["kind"]),
            anchor_cell=tuple(s["anchor_cell"]),
            footprint_cells=frozenset(tuple(c) for c in s["footprint_cells"]),
            height=float(s["height"]),
            instance_id=int(s["instance_id"]),
            tetromino_shape=s.get("tetromino_shape"),
            tetromino_rotation=s.get("tetromino_rotation"),
        )
        for s in doc["structures"]
    )
    details = ActivityDetails(
        activity_level=float(doc["details"]["activity_level"]),
        cars=tuple(
            Car(x=c["x"], y=c["y"], heading=c["heading"], color_index=int(c["color_index"]))
            for c in doc["details"]["cars"]
        ),
        steam_sources=tuple(
            SteamSource(tower_instance_id=int(s["tower_instance_id"]), intensity=float(s["intensity"]))
            for s in doc["details"]["steam_sources"]
        ),
    )
    return FacilityLayout(
        grid=grid,
        structures=structures,
        parking_cells=frozenset(tuple(c) for c in doc["parking_cells"]),
        details=details,
        seed=int(doc["seed"]),
    )


def serialize_layout(layout: FacilityLayout) -> str:
    """Canonical text form; byte-stable for identical layouts."""
    return canonical_json(layout_to_dict(layout))


def layout_digest(layout: FacilityLayout) -> str:
    return digest_of(layout_to_dict(layout))
