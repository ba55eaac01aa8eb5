import math

import numpy as np
import pytest

from semmap.errors import MissingWalls
from semmap.grid import CellState, ClassifiedGrid
from semmap.scoring import (
    DEFAULT_CORRIDOR_TABLE,
    DEFAULT_NONCORRIDOR_TABLE,
    LikelihoodConfig,
    LikelihoodField,
    PriorConfig,
    Score,
    SensorModelTable,
    dirty_rects_for_units,
    log_likelihood,
    log_posterior,
    log_prior,
)
from semmap.world import (
    Unit,
    UnitType,
    World,
    detect_relations,
    rasterize,
)


def uniform_grid(shape, state):
    return ClassifiedGrid(np.full(shape, state, dtype=np.int8))


def two_room_world(hv_b=10.0, types=(UnitType.ROOM, UnitType.ROOM), shape=(60, 70)):
    a = Unit(0, 20.0, 20.0, 10.0, 10.0)
    b = Unit(1, 40.0, 20.0, 10.0, hv_b)
    rel = detect_relations([a, b], shape)
    return World(units=(a, b), types=types, relations=rel)


# -- sensor tables -------------------------------------------------------------


def test_default_tables_columns_sum_to_one():
    t = SensorModelTable()
    assert np.allclose(t.noncorridor.sum(axis=0), 1.0)
    assert np.allclose(t.corridor.sum(axis=0), 1.0)
    assert np.allclose(t.noncorridor, DEFAULT_NONCORRIDOR_TABLE)
    assert np.allclose(t.corridor, DEFAULT_CORRIDOR_TABLE)


def test_tables_renormalize_on_load():
    scaled = [[v * 2 for v in row] for row in DEFAULT_NONCORRIDOR_TABLE]
    t = SensorModelTable(noncorridor=scaled)
    assert np.allclose(t.noncorridor.sum(axis=0), 1.0)


def test_tables_reject_nonpositive_entries():
    bad = [list(r) for r in DEFAULT_NONCORRIDOR_TABLE]
    bad[0][0] = 0.0
    with pytest.raises(ValueError):
        SensorModelTable(noncorridor=bad)


def test_tables_reject_bad_shape():
    with pytest.raises(ValueError):
        SensorModelTable(noncorridor=[[0.5, 0.5], [0.5, 0.5]])


def test_config_validation():
    with pytest.raises(ValueError):
        PriorConfig(sigma_len=0.0)
    with pytest.raises(ValueError):
        PriorConfig(sale_threshold=1.0)
    with pytest.raises(ValueError):
        LikelihoodConfig(psi=1.0)


# -- prior ---------------------------------------------------------------------


def test_prior_equal_walls_contribute_zero():
    world = two_room_world(hv_b=10.0)
    sale = {(0, 1): 1.0}
    lp = log_prior(world, sale, PriorConfig(), (60, 70))
    assert lp == 0.0


def test_prior_below_threshold_contributes_zero():
    world = two_room_world(hv_b=13.0)  # d = 6
    sale = {(0, 1): 0.4}
    assert log_prior(world, sale, PriorConfig(sale_threshold=0.5), (60, 70)) == 0.0


def test_prior_gaussian_at_one_sigma():
    world = two_room_world(hv_b=11.5)  # walls 20 vs 23 -> d = 3 = sigma
    sale = {(0, 1): 1.0}
    lp = log_prior(world, sale, PriorConfig(sigma_len=3.0), (60, 70))
    assert lp == pytest.approx(-0.5)


def test_prior_d6_sigma3_is_twp():
    world = two_room_world(hv_b=13.0)  # d = 6
    sale = {(0, 1): 1.0}
    lp = log_prior(world, sale, PriorConfig(sigma_len=3.0), (60, 70))
    assert lp == pytest.approx(-2.0)


def test_prior_never_positive_and_monotone_in_d():
    sale = {(0, 1): 1.0}
    prev = 0.0
    for hv_b in (10.0, 11.0, 12.0, 13.0, 15.0):
        lp = log_prior(two_room_world(hv_b=hv_b), sale, PriorConfig(), (60, 70))
        assert lp <= 0.0
        assert lp <= prev + 1e-12
        prev = lp


def test_prior_missing_walls_raises_strict():
    a = Unit(0, 10.0, 10.0, 5.0, 5.0)
    b = Unit(1, 50.0, 50.0, 5.0, 5.0)
    world = World(units=(a, b), types=(UnitType.ROOM,) * 2)
    with pytest.raises(MissingWalls):
        log_prior(world, {(0, 1): 1.0}, PriorConfig(), (70, 70), strict=True)
    assert log_prior(world, {(0, 1): 1.0}, PriorConfig(), (70, 70), strict=False) == 0.0


# -- likelihood -------------------------------------------------------------------


def test_likelihood_no_overlap_no_penalty_vs_analytic():
    grid = uniform_grid((30, 30), CellState.UNKNOWN)
    unit = Unit(0, 15.0, 15.0, 8.0, 8.0)
    world = World(units=(unit,), types=(UnitType.ROOM,))
    states = rasterize([unit], grid)
    tables = SensorModelTable()
    got = log_likelihood(grid, world, states, tables, LikelihoodConfig())
    # direct recomputation: count cells per (class=unknown, state)
    n_wall = int((states.states == 0).sum())
    n_obj = int((states.states == 1).sum())
    n_out = int((states.states == 3).sum())
    expect = (
        n_wall * math.log(0.15) + n_obj * math.log(0.60) + n_out * math.log(0.80)
    )
    assert got == pytest.approx(expect, rel=1e-12)


def test_likelihood_overlap_penalty_psi_power():
    grid = uniform_grid((40, 40), CellState.FREE)
    a = Unit(0, 20.0, 20.0, 10.0, 10.0)
    world1 = World(units=(a,), types=(UnitType.ROOM,))
    # duplicate unit triples membership on the same footprint
    b = Unit(1, 20.0, 20.0, 10.0, 10.0)
    c = Unit(2, 20.0, 20.0, 10.0, 10.0)
    world3 = World(units=(a, b, c), types=(UnitType.ROOM,) * 3)
    tables = SensorModelTable()
    cfg = LikelihoodConfig(psi=0.5)
    s1 = rasterize([a], grid)
    s3 = rasterize([a, b, c], grid)
    l1 = log_likelihood(grid, world1, s1, tables, cfg)
    l3 = log_likelihood(grid, world3, s3, tables, cfg)
    # identical states/owners; only gamma changes: every covered cell gains 2
    covered = int((s1.membership > 0).sum())
    assert l3 - l1 == pytest.approx(covered * 2 * math.log(0.5), rel=1e-9)


def test_likelihood_type_invariance_with_equal_tables():
    states_arr = np.full((30, 30), CellState.FREE, dtype=np.int8)
    states_arr[14:17, 14:17] = CellState.UNKNOWN
    grid = ClassifiedGrid(states_arr)
    unit = Unit(0, 15.0, 15.0, 9.0, 9.0)
    tables = SensorModelTable(
        noncorridor=DEFAULT_NONCORRIDOR_TABLE, corridor=DEFAULT_NONCORRIDOR_TABLE
    )
    smap = rasterize([unit], grid)
    cfg = LikelihoodConfig()
    room = log_likelihood(grid, World(units=(unit,), types=(UnitType.ROOM,)), smap, tables, cfg)
    corr = log_likelihood(grid, World(units=(unit,), types=(UnitType.CORRIDOR,)), smap, tables, cfg)
    assert room == corr


def test_likelihood_room_explains_object_blob_better_than_corridor():
    states_arr = np.full((40, 40), CellState.FREE, dtype=np.int8)
    states_arr[16:24, 16:24] = CellState.UNKNOWN  # interior blob
    grid = ClassifiedGrid(states_arr)
    unit = Unit(0, 20.0, 20.0, 12.0, 12.0)
    tables = SensorModelTable()
    smap = rasterize([unit], grid)
    cfg = LikelihoodConfig()
    room = log_likelihood(grid, World(units=(unit,), types=(UnitType.ROOM,)), smap, tables, cfg)
    corr = log_likelihood(grid, World(units=(unit,), types=(UnitType.CORRIDOR,)), smap, tables, cfg)
    assert room > corr


def test_likelihood_owner_tie_lowest_uid_selects_table():
    grid = uniform_grid((30, 40), CellState.UNKNOWN)
    a = Unit(0, 15.0, 15.0, 8.0, 8.0)
    b = Unit(1, 21.0, 15.0, 8.0, 8.0)  # overlaps a
    smap = rasterize([a, b], grid)
    overlap = smap.membership == 2
    assert overlap.any()
    assert (smap.owner[overlap] == 0).all()


# -- posterior ---------------------------------------------------------------------


def test_posterior_is_sum_and_uniform_prior_regime():
    grid = uniform_grid((60, 70), CellState.UNKNOWN)
    world = two_room_world()
    score = log_posterior(
        grid, world, sale={}, tables=SensorModelTable(),
        prior_cfg=PriorConfig(), lik_cfg=LikelihoodConfig(),
    )
    assert isinstance(score, Score)
    assert score.log_prior == 0.0
    assert score.log_posterior == score.log_prior + score.log_likelihood


def test_posterior_d0_beats_d6_by_two_log_units():
    grid = uniform_grid((60, 70), CellState.UNKNOWN)
    tables = SensorModelTable()
    sale = {(0, 1): 1.0}
    aligned = two_room_world(hv_b=10.0)
    defect = two_room_world(hv_b=13.0)
    s_aligned = log_posterior(grid, aligned, sale, tables, PriorConfig(sigma_len=3.0), LikelihoodConfig())
    s_defect = log_posterior(grid, defect, sale, tables, PriorConfig(sigma_len=3.0), LikelihoodConfig())
    assert s_aligned.log_prior - s_defect.log_prior == pytest.approx(2.0)


def test_posterior_knowledge_inactive_prior_zero():
    grid = uniform_grid((60, 70), CellState.UNKNOWN)
    world = two_room_world(hv_b=13.0)
    score = log_posterior(
        grid, world, sale={(0, 1): 1.0}, tables=SensorModelTable(),
        prior_cfg=PriorConfig(), lik_cfg=LikelihoodConfig(), knowledge_active=False,
    )
    assert score.log_prior == 0.0


# -- incremental field ----------------------------------------------------------


def test_field_reset_matches_full_rescore():
    rng = np.random.default_rng(4)
    grid = ClassifiedGrid(rng.integers(0, 3, size=(50, 60)).astype(np.int8))
    world = two_room_world(shape=(50, 60))
    field = LikelihoodField(grid, SensorModelTable(), LikelihoodConfig())
    field.reset(world)
    assert field.total == pytest.approx(field.full_rescore(world), abs=1e-9)


def test_field_incremental_updates_track_full_rescore():
    rng = np.random.default_rng(5)
    grid = ClassifiedGrid(rng.integers(0, 3, size=(50, 60)).astype(np.int8))
    a = Unit(0, 20.0, 20.0, 10.0, 10.0)
    b = Unit(1, 40.0, 25.0, 8.0, 12.0)
    world = World(units=(a, b), types=(UnitType.ROOM, UnitType.CORRIDOR))
    field = LikelihoodField(grid, SensorModelTable(), LikelihoodConfig())
    field.reset(world)
    # move unit b a few times, committing each step
    for step in range(6):
        moved = Unit(1, 40.0 + step, 25.0, 8.0, 12.0 + step / 2.0)
        new_world = World(units=(a, moved), types=world.types)
        rects = dirty_rects_for_units([world.units[1], moved], grid.states.shape)
        delta, patches = field.preview(new_world, rects)
        field.commit(delta, patches)
        world = new_world
        assert field.total == pytest.approx(field.full_rescore(world), abs=1e-9)


def test_field_preview_without_commit_leaves_state():
    grid = uniform_grid((40, 40), CellState.FREE)
    a = Unit(0, 20.0, 20.0, 10.0, 10.0)
    world = World(units=(a,), types=(UnitType.ROOM,))
    field = LikelihoodField(grid, SensorModelTable(), LikelihoodConfig())
    field.reset(world)
    before = field.total
    moved = Unit(0, 22.0, 20.0, 10.0, 10.0)
    new_world = World(units=(moved,), types=world.types)
    rects = dirty_rects_for_units([a, moved], grid.states.shape)
    field.preview(new_world, rects)
    assert field.total == before
    assert field.total == pytest.approx(field.full_rescore(world), abs=1e-9)
