import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthsat.errors import InfeasiblePlacement, InvalidConfig, InvalidLevel
from synthsat.scene import (
    ActivityDetails,
    CARS_PER_CELL,
    FacilityLayout,
    GridSpec,
    PlacedStructure,
    StructureType,
    TETROMINO_ROTATIONS,
    TETROMINO_SHAPES,
    add_activity,
    generate_layout,
    layout_digest,
    layout_from_dict,
    layout_to_dict,
    parking_capacity,
    serialize_layout,
    tetromino_cells,
    validate_layout,
)
from scene_fixtures import FIG2_COUNTS


def test_grid_spec_rejects_degenerate():
    with pytest.raises(InvalidConfig):
        GridSpec(0, 8)
    with pytest.raises(InvalidConfig):
        GridSpec(8, 8, cell_size=0.0)


@pytest.mark.parametrize("shape", sorted(TETROMINO_SHAPES))
@pytest.mark.parametrize("rotation", TETROMINO_ROTATIONS)
def test_tetromino_cells_connected(shape, rotation):
    cells = tetromino_cells(shape, rotation)
    assert len(cells) == 4
    assert min(r for r, _ in cells) == 0
    assert min(c for _, c in cells) == 0
    # edge connectivity by flood fill
    todo, seen = [cells[0]], set()
    while todo:
        r, c = todo.pop()
        if (r, c) in seen:
            continue
        seen.add((r, c))
        todo += [n for n in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)) if n in cells]
    assert seen == set(cells)


def test_generate_layout_counts_and_disjoint():
    layout = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42)
    by_kind = {}
    for s in layout.structures:
        by_kind[s.kind] = by_kind.get(s.kind, 0) + 1
    assert by_kind == FIG2_COUNTS
    # exhaustive cell-occupancy check: no cell used twice
    cells = [c for s in layout.structures for c in s.footprint_cells]
    assert len(cells) == len(set(cells))
    assert not (set(cells) & layout.parking_cells)
    assert validate_layout(layout) == []


def test_generate_layout_single_cell_grid():
    layout = generate_layout(GridSpec(1, 1), {StructureType.REACTOR: 1}, seed=7)
    assert len(layout.structures) == 1
    assert layout.structures[0].anchor_cell == (0, 0)
    assert layout.parking_cells == frozenset()


def test_generate_layout_deterministic():
    a = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=3)
    b = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=3)
    assert a == b
    assert serialize_layout(a) == serialize_layout(b)
    assert layout_digest(a) == layout_digest(b)
    assert a != generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=4)


def test_generate_layout_infeasible():
    with pytest.raises(InfeasiblePlacement):
        generate_layout(GridSpec(2, 2), {StructureType.REACTOR: 5}, seed=0)
    # structures fit but no room remains for the 2x2 parking block
    with pytest.raises(InfeasiblePlacement):
        generate_layout(GridSpec(2, 2), {StructureType.BUILDING: 1}, seed=0)


def test_parking_allocated_with_buildings():
    layout = generate_layout(GridSpec(8, 8), {StructureType.BUILDING: 1}, seed=5)
    assert len(layout.parking_cells) == 4
    layout = generate_layout(GridSpec(8, 8), {StructureType.REACTOR: 2}, seed=5)
    assert layout.parking_cells == frozenset()


def test_add_activity_zero_level(default_layout):
    quiet = add_activity(default_layout, 0.0, seed=1)
    assert quiet.details.cars == ()
    assert quiet.details.steam_sources == ()


def test_add_activity_full_lot():
    layout = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42)
    capacity = parking_capacity(layout)
    assert capacity == CARS_PER_CELL * 4
    busy = add_activity(layout, 1.0, seed=9)
    assert len(busy.details.cars) == capacity
    for car in busy.details.cars:
        assert any(
            layout.grid.contains_point(car.x, car.y, cell) for cell in layout.parking_cells
        )
    assert {s.tower_instance_id for s in busy.details.steam_sources} == {
        s.instance_id for s in layout.structures if s.kind is StructureType.COOLING_TOWER
    }
    assert all(s.intensity == 1.0 for s in busy.details.steam_sources)


def test_add_activity_deterministic_and_monotone():
    layout = generate_layout(GridSpec(8, 8), FIG2_COUNTS, seed=42)
    assert add_activity(layout, 0.5, seed=11) == add_activity(layout, 0.5, seed=11)
    counts = [len(add_activity(layout, a / 10.0, seed=11).details.cars) for a in range(11)]
    assert counts == sorted(counts)


def test_add_activity_rejects_bad_level(default_layout):
    with pytest.raises(InvalidLevel):
        add_activity(default_layout, 1.5, seed=0)
    with pytest.raises(InvalidLevel):
        add_activity(default_layout, -0.1, seed=0)


def test_validate_layout_overlap_violation():
    grid = GridSpec(4, 4)
    mk = lambda iid, cell: PlacedStructure(
        kind=StructureType.REACTOR,
        anchor_cell=cell,
        footprint_cells=frozenset({cell}),
        height=40.0,
        instance_id=iid,
    )
    bad = FacilityLayout(
        grid=grid,
        structures=(mk(1, (2, 3)), mk(2, (2, 3))),
        parking_cells=frozenset(),
        details=ActivityDetails(),
        seed=0,
    )
    violations = validate_layout(bad)
    assert [v.code for v in violations] == ["OverlappingFootprint"]
    assert violations[0].instance_id == 2


def test_validate_layout_car_outside_parking(default_layout):
    details = dataclasses.replace(
        default_layout.details,
        cars=default_layout.details.cars[:1]
        and (dataclasses.replace(default_layout.details.cars[0], x=1e6, y=1e6),),
    )
    bad = dataclasses.replace(default_layout, details=details)
    assert "CarOutsideParking" in [v.code for v in validate_layout(bad)]


def test_layout_roundtrip(default_layout):
    doc = layout_to_dict(default_layout)
    assert layout_from_dict(doc) == default_layout
    assert serialize_layout(layout_from_dict(doc)) == serialize_layout(default_layout)


@settings(max_examples=60, deadline=None)
@given(
    rows=st.integers(4, 10),
    cols=st.integers(4, 10),
    reactors=st.integers(0, 2),
    towers=st.integers(0, 3),
    stacks=st.integers(0, 2),
    buildings=st.integers(0, 3),
    seed=st.integers(0, 2**63 - 1),
)
def test_generated_layouts_always_validate(rows, cols, reactors, towers, stacks, buildings, seed):
    counts = {
        StructureType.REACTOR: reactors,
        StructureType.COOLING_TOWER: towers,
        StructureType.STACK: stacks,
        StructureType.BUILDING: buildings,
    }
    needed = reactors + towers + stacks + 4 * buildings + (4 if buildings else 0)
    if needed > (rows * cols) // 2:
        return
    layout = generate_layout(GridSpec(rows, cols), counts, seed)
    assert validate_layout(layout) == []
    busy = add_activity(layout, 0.7, seed)
    assert validate_layout(busy) == []
