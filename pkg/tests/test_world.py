import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from semloft.errors import FormatError, GeometryError
from semloft.world import (
    Door,
    Relation,
    RelationParams,
    SemanticWorld,
    Unit,
    UnitClassThresholds,
    UnitType,
    WorldRasterParams,
    classify_unit,
    detect_relations,
    facing_line,
    neighbour_walls,
    overlap_count_field,
    rasterize,
    topology_graph,
    typed_world,
    world_from_dict,
    world_to_dict,
)
from strategies import units, worlds

R, C, H = UnitType.ROOM, UnitType.CORRIDOR, UnitType.HALL
ADJ, IRR = Relation.ADJACENT, Relation.IRRELEVANT


def two_rooms_with_door(width=3):
    a, b = Unit(5, 5, 30, 25), Unit(30, 5, 55, 25)
    return SemanticWorld((a, b), (R, R), (Door(0, 1, "v", 30, 12, 12 + width),))


def corridor_world():
    """Two stacked rooms left of a corridor, a third room right of it."""
    u = (Unit(0, 0, 40, 30), Unit(0, 30, 40, 60), Unit(40, 0, 52, 90), Unit(52, 60, 92, 90))
    return SemanticWorld(u, (R, R, C, R), (Door(0, 2, "v", 40, 10, 14), Door(2, 3, "v", 52, 70, 74)))


# -------------------------------------------------------------- geometry

def test_unit_derived_fields():
    u = Unit(2, 3, 12, 7)
    assert (u.width_cells, u.height_cells, u.area_cells) == (10, 4, 40)
    assert u.aspect_ratio == 2.5
    assert u.vertices == ((2, 3), (12, 3), (12, 7), (2, 7))
    assert Unit.from_vertices([(12, 7), (2, 3), (12, 3), (2, 7)]) == u


def test_unit_rejects_degenerate():
    with pytest.raises(GeometryError):
        Unit(3, 3, 3, 9)


def test_world_canonical_order():
    a, b = Unit(30, 5, 55, 25), Unit(5, 5, 30, 25)
    w = SemanticWorld((a, b), (H, R), (Door(0, 1, "v", 30, 12, 15),))
    assert w.units == (b, a) and w.types == (R, H)
    assert w.doors == (Door(0, 1, "v", 30, 12, 15),)


# ------------------------------------------------------------- rasterize

def test_empty_world_all_unknown():
    g = rasterize(SemanticWorld(), WorldRasterParams(2, (7, 5)))
    assert (g.cells == 1).all()


def test_single_unit_counts():
    w = SemanticWorld((Unit(2, 2, 12, 10),), (R,), ())
    g = rasterize(w, WorldRasterParams(1, (20, 15)))
    occ, unk, free = (g.cells == 2).sum(), (g.cells == 1).sum(), (g.cells == 0).sum()
    assert (occ, free, unk) == (32, 48, 300 - 80)


def test_door_cells_are_free():
    w = two_rooms_with_door()
    g = rasterize(w, WorldRasterParams(2, (60, 30))).cells
    assert (g[12:15, 28:32] == 0).all()
    assert (g[6:12, 28:32] == 2).all() and (g[15:24, 28:32] == 2).all()


@given(worlds())
def test_raster_matches_cell_oracle(w):
    dims = (60, 50)
    got = rasterize(w, WorldRasterParams(2, dims)).cells
    assert np.array_equal(got, oracles.raster_cells(w.units, w.doors, 2, dims))


def test_raster_with_doors_matches_cell_oracle():
    w = corridor_world()
    assert np.array_equal(rasterize(w, WorldRasterParams(2, (100, 95))).cells, oracles.raster_cells(w.units, w.doors, 2, (100, 95)))


@given(worlds(), st.integers(1, 4))
def test_raster_partitions_cells(w, t):
    g = rasterize(w, WorldRasterParams(t, (60, 50)))
    assert g.counts().sum() == 60 * 50


def test_raster_out_of_bounds():
    with pytest.raises(GeometryError):
        rasterize(SemanticWorld((Unit(0, 0, 10, 10),), (R,), ()), WorldRasterParams(2, (9, 10)))


# --------------------------------------------------------------- overlap

def test_overlap_field():
    a, b = Unit(0, 0, 10, 10), Unit(6, 7, 20, 15)
    sigma = overlap_count_field(SemanticWorld((a, b), (R, R), ()), (25, 20))
    assert (sigma == 2).sum() == 4 * 3
    assert sigma.max() == 2
    assert (overlap_count_field(SemanticWorld(), (5, 5)) == 0).all()


@given(worlds())
def test_overlap_field_matches_oracle(w):
    assert np.array_equal(overlap_count_field(w, (60, 50)), oracles.coverage(w.units, (60, 50)))


# ------------------------------------------------------------- relations

def test_three_units_in_a_row():
    u = (Unit(0, 0, 30, 20), Unit(30, 0, 60, 20), Unit(60, 0, 90, 20))
    rel = detect_relations(SemanticWorld(u, (R, R, R), ()))
    assert rel.entries() == [[IRR, ADJ, IRR], [ADJ, IRR, ADJ], [IRR, ADJ, IRR]]


def test_corridor_layout_relations():
    rel = detect_relations(corridor_world())
    expected = [
        [IRR, ADJ, ADJ, IRR],
        [ADJ, IRR, ADJ, IRR],
        [ADJ, ADJ, IRR, ADJ],
        [IRR, IRR, ADJ, IRR],
    ]
    assert rel.entries() == expected


def test_single_unit_relation():
    assert detect_relations(SemanticWorld((Unit(0, 0, 9, 9),), (R,), ())).entries() == [[IRR]]


@given(worlds(max_units=4))
def test_relations_symmetric_irrelevant_diagonal(w):
    adj = detect_relations(w).adjacent
    assert np.array_equal(adj, adj.T)
    assert not adj.diagonal().any()


@given(worlds(max_units=4))
def test_relations_match_mask_oracle(w):
    p = RelationParams()
    got = detect_relations(w, p).adjacent
    want = oracles.adjacency(w.units, p.dilation_radius, p.overlap_min_cells, p.wall_thickness_cells, (60, 50))
    assert np.array_equal(got, want)


@given(worlds(max_units=4), st.integers(-20, 20), st.integers(-20, 20))
def test_relations_translation_invariant(w, dx, dy):
    moved = SemanticWorld(tuple(u.translated(dx, dy) for u in w.units), w.types, ())
    assert detect_relations(moved) == detect_relations(w)


# ------------------------------------------------------------------ types

@pytest.mark.parametrize(
    "unit,expected",
    [
        (Unit(0, 0, 30, 20), R),  # small area, small ratio
        (Unit(0, 0, 60, 10), C),  # small area, big ratio
        (Unit(0, 0, 200, 20), H),  # big area, big ratio
        (Unit(0, 0, 60, 50), H),  # big area, small ratio
    ],
)
def test_classify_unit_table(unit, expected):
    assert classify_unit(unit, UnitClassThresholds(2000, 3.0)) is expected


def test_area_boundary_is_hall():
    assert classify_unit(Unit(0, 0, 50, 40), UnitClassThresholds(2000, 3.0)) is H
    assert classify_unit(Unit(0, 0, 50, 40), UnitClassThresholds(2000.5, 3.0)) is R


def test_adaptive_threshold():
    t = UnitClassThresholds.adaptive([100, 400, 300], factor=2.5)
    assert t.area_big == 750.0


# ---------------------------------------------------------------- topology

def test_topology_graph_corridor_layout():
    g = topology_graph(corridor_world())
    kinds = {tuple(sorted(e)): d["kind"] for *e, d in g.edges(data=True)}
    assert kinds == {(0, 1): "adjacent", (0, 2): "door", (1, 2): "adjacent", (2, 3): "door"}


def test_topology_no_doors_equals_adjacency():
    w = SemanticWorld(corridor_world().units, corridor_world().types, ())
    rel = detect_relations(w)
    assert sorted(tuple(sorted(e)) for e in topology_graph(w).edges) == rel.pairs()


def test_topology_irrelevant_pair():
    w = SemanticWorld((Unit(0, 0, 10, 10), Unit(40, 40, 50, 50)), (R, R), ())
    assert topology_graph(w).number_of_edges() == 0


@given(worlds(max_units=4))
def test_topology_edge_count(w):
    rel = detect_relations(w)
    door_pairs = {(d.unit_a, d.unit_b) for d in w.doors}
    expected = len(door_pairs) + sum(1 for p in rel.pairs() if p not in door_pairs)
    assert topology_graph(w, rel).number_of_edges() == expected


# ----------------------------------------------------------- neighbour walls

def test_facing_line():
    assert facing_line(Unit(0, 0, 10, 10), Unit(10, 2, 20, 8)) == ("v", 10, 2, 8)
    assert facing_line(Unit(0, 0, 10, 10), Unit(11, 2, 20, 8)) is None


def test_neighbour_walls_lengths():
    assert neighbour_walls(Unit(0, 0, 10, 20), Unit(10, 0, 30, 14)) == (20, 14)
    assert neighbour_walls(Unit(0, 0, 10, 20), Unit(0, 20, 16, 30)) == (10, 16)


# ------------------------------------------------------------------- JSON

def test_json_round_trip():
    w = corridor_world()
    d = world_to_dict(w, dims=(100, 95))
    back = world_from_dict(json.loads(json.dumps(d)))
    assert back == w


@given(worlds())
def test_json_round_trip_property(w):
    assert world_from_dict(world_to_dict(w)) == w


def test_json_rejects_wrong_schema():
    with pytest.raises(FormatError):
        world_from_dict({"schema": "semworld/0", "units": [], "types": [], "doors": []})


def test_typed_world():
    w = typed_world([Unit(0, 0, 60, 10), Unit(0, 10, 30, 30)], UnitClassThresholds(2000, 3.0))
    assert w.types == (C, R)
