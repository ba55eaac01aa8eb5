"""MAP search over semantic worlds by data-driven MCMC.

Nine reversible kernels propose geometry changes: data-driven ADD (seeded
from unexplained free-space components) paired with REMOVE, SPLIT/MERGE,
SHRINK/DILATE (single-wall moves), blind ALLOCATE/DELETE, and the
self-reverse INTERCHANGE which shifts the shared boundary of two aligned
equal-section units, conserving total footprint area. Metropolis-Hastings
acceptance runs on the incremental posterior; relations, doors and MLN-driven
types refresh periodically and whenever the evidence signature changes.

Proposal-ratio bookkeeping is per-kernel selection and parameter densities
(uniform choices, floored reverse densities for birth/death pairs), not a
full reversible-jump dimension-matching treatment.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import mln as mln_mod
from .config import RunConfig
from .errors import EmptyMap, NotApplicable
from .grid import CellState, ClassifiedGrid, connected_components, coverage
from .scoring import LikelihoodField, dirty_rects_for_units
from .world import (
    _cos_sin,
    footprint_in_window,
    unit_window,
    GeometryClass,
    Unit,
    World,
    classify_geometry,
    detect_doors,
    detect_objects,
    detect_relations,
    detect_unexplored,
    geometry_to_type,
    qcoord,
    rasterize,
    _pair_overlap,
    _best_wall_length,
)


class KernelKind(IntEnum):
    ADD = 0
    REMOVE = 1
    SPLIT = 2
    MERGE = 3
    SHRINK = 4
    DILATE = 5
    ALLOCATE = 6
    DELETE = 7
    INTERCHANGE = 8

    @property
    def reverse(self) -> "KernelKind":
        return _REVERSE[self]


_REVERSE = {
    KernelKind.ADD: KernelKind.REMOVE,
    KernelKind.REMOVE: KernelKind.ADD,
    KernelKind.SPLIT: KernelKind.MERGE,
    KernelKind.MERGE: KernelKind.SPLIT,
    KernelKind.SHRINK: KernelKind.DILATE,
    KernelKind.DILATE: KernelKind.SHRINK,
    KernelKind.ALLOCATE: KernelKind.DELETE,
    KernelKind.DELETE: KernelKind.ALLOCATE,
    KernelKind.INTERCHANGE: KernelKind.INTERCHANGE,
}

STRUCTURAL_KINDS = {
    KernelKind.ADD,
    KernelKind.REMOVE,
    KernelKind.SPLIT,
    KernelKind.MERGE,
    KernelKind.ALLOCATE,
    KernelKind.DELETE,
}

MIN_LOG_DENSITY = math.log(1e-12)


def _integral_image(mask: np.ndarray) -> np.ndarray:
    pad = np.zeros((mask.shape[0] + 1, mask.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(mask, axis=0), axis=1, out=pad[1:, 1:])
    return pad


@dataclass
class Proposal:
    kind: KernelKind
    new_units: tuple
    params: tuple
    reverse_params: tuple
    log_ratio: float
    changed_old: tuple
    changed_new: tuple
    dirty_rects: tuple = ()

    @property
    def structural(self) -> bool:
        return self.kind in STRUCTURAL_KINDS


# ---------------------------------------------------------------------------
# kernel geometry


def move_wall(unit: Unit, wall: int, delta: float) -> Unit:
    """Translate one wall outward by delta cells (inward when negative).

    All arithmetic stays on the dyadic grid, so moving a wall by delta and
    then by -delta restores the unit bit-exactly.
    """
    s = delta / 2.0
    ux, uy = (qcoord(t) for t in _cos_sin(unit.angle))
    vx, vy = -uy, ux
    if wall == 0:
        return Unit(unit.uid, qcoord(unit.cx + qcoord(s * ux)), qcoord(unit.cy + qcoord(s * uy)), qcoord(unit.hu + s), unit.hv, unit.angle)
    if wall == 1:
        return Unit(unit.uid, qcoord(unit.cx - qcoord(s * ux)), qcoord(unit.cy - qcoord(s * uy)), qcoord(unit.hu + s), unit.hv, unit.angle)
    if wall == 2:
        return Unit(unit.uid, qcoord(unit.cx + qcoord(s * vx)), qcoord(unit.cy + qcoord(s * vy)), unit.hu, qcoord(unit.hv + s), unit.angle)
    return Unit(unit.uid, qcoord(unit.cx - qcoord(s * vx)), qcoord(unit.cy - qcoord(s * vy)), unit.hu, qcoord(unit.hv + s), unit.angle)


def wall_slab_rect(old: Unit, new: Unit, wall: int, thickness: float, shape):
    """Cell window covering everything a single-wall move can change: the
    region between the old and new wall planes plus the band margin."""
    pts = list(old.wall_segment(wall)) + list(new.wall_segment(wall))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    pad = thickness + 2.0
    x0 = int(math.floor(min(xs) - pad))
    x1 = int(math.ceil(max(xs) + pad)) + 1
    y0 = int(math.floor(min(ys) - pad))
    y1 = int(math.ceil(max(ys) + pad)) + 1
    h, w = shape
    return (max(0, x0), max(0, y0), min(w, x1), min(h, y1))


def split_unit(unit: Unit, axis: int, offset: float, uid1: int, uid2: int):
    """Cut along a line perpendicular to the chosen local axis at ``offset``
    (in (-extent, extent)); returns the two child units covering the parent
    footprint exactly."""
    offset = qcoord(offset)
    ux, uy = (qcoord(t) for t in _cos_sin(unit.angle))
    vx, vy = -uy, ux
    if axis == 0:
        a = unit.hu
        h1, h2 = qcoord((a + offset) / 2.0), qcoord((a - offset) / 2.0)
        o1, o2 = qcoord((offset - a) / 2.0), qcoord((offset + a) / 2.0)
        c1 = (qcoord(unit.cx + qcoord(o1 * ux)), qcoord(unit.cy + qcoord(o1 * uy)))
        c2 = (qcoord(unit.cx + qcoord(o2 * ux)), qcoord(unit.cy + qcoord(o2 * uy)))
        u1 = Unit(uid1, c1[0], c1[1], h1, unit.hv, unit.angle)
        u2 = Unit(uid2, c2[0], c2[1], h2, unit.hv, unit.angle)
    else:
        b = unit.hv
        h1, h2 = qcoord((b + offset) / 2.0), qcoord((b - offset) / 2.0)
        o1, o2 = qcoord((offset - b) / 2.0), qcoord((offset + b) / 2.0)
        c1 = (qcoord(unit.cx + qcoord(o1 * vx)), qcoord(unit.cy + qcoord(o1 * vy)))
        c2 = (qcoord(unit.cx + qcoord(o2 * vx)), qcoord(unit.cy + qcoord(o2 * vy)))
        u1 = Unit(uid1, c1[0], c1[1], unit.hu, h1, unit.angle)
        u2 = Unit(uid2, c2[0], c2[1], unit.hu, h2, unit.angle)
    return u1, u2


def merge_units(a: Unit, b: Unit, uid: int) -> Unit:
    """Minimal enclosing rectangle in the frame of the larger unit."""
    frame = a if (a.area, -a.uid) >= (b.area, -b.uid) else b
    ux, uy = (qcoord(t) for t in _cos_sin(frame.angle))
    vx, vy = -uy, ux
    umin = vmin = math.inf
    umax = vmax = -math.inf
    for unit in (a, b):
        for px, py in unit.vertices():
            du = (px - frame.cx) * ux + (py - frame.cy) * uy
            dv = (px - frame.cx) * vx + (py - frame.cy) * vy
            umin, umax = min(umin, du), max(umax, du)
            vmin, vmax = min(vmin, dv), max(vmax, dv)
    umin, umax, vmin, vmax = (qcoord(t) for t in (umin, umax, vmin, vmax))
    cu, cv = qcoord((umin + umax) / 2.0), qcoord((vmin + vmax) / 2.0)
    cx = qcoord(frame.cx + qcoord(cu * ux) + qcoord(cv * vx))
    cy = qcoord(frame.cy + qcoord(cu * uy) + qcoord(cv * vy))
    return Unit(uid, cx, cy, qcoord((umax - umin) / 2.0), qcoord((vmax - vmin) / 2.0), frame.angle)


def apply_kernel(units: tuple, kind: KernelKind, params: tuple) -> tuple:
    """Apply a kernel with explicit parameters; pure function of its inputs."""
    if kind in (KernelKind.ADD, KernelKind.ALLOCATE):
        (unit,) = params
        return tuple(sorted(units + (unit,), key=lambda u: u.uid))
    if kind in (KernelKind.REMOVE, KernelKind.DELETE):
        (uid,) = params
        out = tuple(u for u in units if u.uid != uid)
        if len(out) == len(units):
            raise NotApplicable(f"no unit {uid} to remove")
        return out
    if kind == KernelKind.SPLIT:
        uid, child1, child2 = params
        out = [u for u in units if u.uid != uid]
        if len(out) == len(units):
            raise NotApplicable(f"no unit {uid} to split")
        return tuple(sorted(out + [child1, child2], key=lambda u: u.uid))
    if kind == KernelKind.MERGE:
        uid_a, uid_b, merged = params
        out = [u for u in units if u.uid not in (uid_a, uid_b)]
        if len(out) != len(units) - 2:
            raise NotApplicable("merge pair not present")
        return tuple(sorted(out + [merged], key=lambda u: u.uid))
    if kind in (KernelKind.SHRINK, KernelKind.DILATE):
        uid, wall, delta = params
        signed = delta if kind == KernelKind.DILATE else -delta
        out = []
        found = False
        for u in units:
            if u.uid == uid:
                out.append(move_wall(u, wall, signed))
                found = True
            else:
                out.append(u)
        if not found:
            raise NotApplicable(f"no unit {uid}")
        return tuple(out)
    if kind == KernelKind.INTERCHANGE:
        uid_a, uid_b, wall_a, wall_b, delta = params
        out = []
        seen = 0
        for u in units:
            if u.uid == uid_a:
                out.append(move_wall(u, wall_a, delta))
                seen += 1
            elif u.uid == uid_b:
                out.append(move_wall(u, wall_b, -delta))
                seen += 1
            else:
                out.append(u)
        if seen != 2:
            raise NotApplicable("interchange pair not present")
        return tuple(out)
    raise NotApplicable(f"unknown kernel {kind}")


def reverse_params_for(kind: KernelKind, params: tuple, changed_old: tuple, new_unit_uid=None) -> tuple:
    """Parameters that make the reverse kernel restore the source units."""
    if kind in (KernelKind.ADD, KernelKind.ALLOCATE):
        (unit,) = params
        return (unit.uid,)
    if kind in (KernelKind.REMOVE, KernelKind.DELETE):
        return (changed_old[0],)
    if kind == KernelKind.SPLIT:
        uid, child1, child2 = params
        return (child1.uid, child2.uid, changed_old[0])
    if kind == KernelKind.MERGE:
        _, _, merged = params
        return (merged.uid, changed_old[0], changed_old[1])
    if kind in (KernelKind.SHRINK, KernelKind.DILATE):
        return params
    if kind == KernelKind.INTERCHANGE:
        uid_a, uid_b, wall_a, wall_b, delta = params
        return (uid_a, uid_b, wall_a, wall_b, -delta)
    raise NotApplicable(f"unknown kernel {kind}")


# ---------------------------------------------------------------------------
# pair discovery


def _aabb_gap_pairs(units, pad: float):
    """Index pairs whose padded bounding boxes overlap (merge candidates)."""
    pairs = []
    boxes = [u.aabb() for u in units]
    for i in range(len(units)):
        for j in range(i + 1, len(units)):
            a, b = boxes[i], boxes[j]
            if a[0] - pad < b[2] and b[0] - pad < a[2] and a[1] - pad < b[3] and b[1] - pad < a[3]:
                pairs.append((i, j))
    return pairs


def interchange_candidates(units, pad: float):
    """Aligned facing pairs with equal cross-section (area-conserving shifts).

    Returns (i, j, wall_i, wall_j) tuples; wall_i faces unit j.
    """
    out = []
    for i, j in _aabb_gap_pairs(units, pad):
        a, b = units[i], units[j]
        if a.angle != b.angle:
            continue
        ux, uy = math.cos(a.angle), math.sin(a.angle)
        dx, dy = b.cx - a.cx, b.cy - a.cy
        du = dx * ux + dy * uy
        dv = -dx * uy + dy * ux
        if abs(du) >= abs(dv):
            if a.hv != b.hv:
                continue
            wall_a = 0 if du > 0 else 1
            wall_b = 1 if du > 0 else 0
        else:
            if a.hu != b.hu:
                continue
            wall_a = 2 if dv > 0 else 3
            wall_b = 3 if dv > 0 else 2
        out.append((i, j, wall_a, wall_b))
    return out


# ---------------------------------------------------------------------------
# chain


@dataclass
class KernelStats:
    proposed: int = 0
    accepted: int = 0
    skipped: int = 0


class Chain:
    """One MCMC chain over semantic worlds for a fixed classified map."""

    def __init__(self, input_grid: ClassifiedGrid, config: RunConfig, rules=None):
        self.input = input_grid
        self.cfg = config
        self.shape = input_grid.states.shape
        self.resolution = input_grid.resolution
        self.rules = rules if rules is not None else mln_mod.default_rules()
        self.rng = np.random.Generator(np.random.PCG64(config.seed))

        self.coverage = coverage(input_grid)
        self._free = input_grid.states == CellState.FREE
        self._free_integral = _integral_image(self._free)
        self._occupied_integral = _integral_image(input_grid.states == CellState.OCCUPIED)
        self._seed_cache = (-1, None)
        self.knowledge_active = self.coverage > config.coverage_gate

        self.tables = config.sensor_tables()
        self.prior_cfg = config.prior_config()
        self.scorer = LikelihoodField(
            input_grid,
            self.tables,
            config.likelihood_config(),
            wall_thickness=config.wall_thickness,
            object_from_occupied=config.object_from_occupied,
        )

        self.units: tuple = ()
        self.types: dict = {}  # uid -> UnitType
        self.doors: tuple = ()
        self.relations = None
        self.sale: dict = {}  # (uid_lo, uid_hi) -> marginal
        self.evidence_key = None
        self._wall_diff_cache: dict = {}

        self.next_uid = 0
        self.iteration = 0
        self.accepted_total = 0
        self.structural_since_refresh = 0
        self.geometric_since_refresh = 0
        self.refresh_count = 0
        self.mln_runs = 0
        self.kernel_stats = {k: KernelStats() for k in KernelKind}
        self.sample_ring = deque(maxlen=config.sample_ring)
        self.log_entries: list = []
        self._accept_count_for_snapshot = 0

        self.log_lik = 0.0
        self.log_prior_val = 0.0
        self.best_units = None
        self.best_types = None
        self.best_score = -math.inf

        self._kernel_kinds = list(KernelKind)
        self._kernel_probs = np.array(
            [config.kernel_weights[k.name.lower()] for k in self._kernel_kinds]
        )

        self._initialize()

    # -- initialization ----------------------------------------------------

    def _initialize(self):
        free = self.input.states == CellState.FREE
        if not free.any():
            raise EmptyMap("input map has no free cells")
        labels = connected_components(free, connectivity=4)
        largest = int(np.argmax(labels.sizes)) if labels.count else 0
        x0, y0, x1, y1 = labels.bboxes[largest]
        t = self.cfg.wall_thickness
        jx = float(self.rng.integers(-2, 3))
        jy = float(self.rng.integers(-2, 3))
        h, w = self.shape
        hu = min(max(self.cfg.min_half_extent, qcoord((x1 + 1 - x0) / 2.0 + t)), w / 2.0)
        hv = min(max(self.cfg.min_half_extent, qcoord((y1 + 1 - y0) / 2.0 + t)), h / 2.0)
        cx = min(max(qcoord((x0 + x1 + 1) / 2.0 + jx), hu), w - hu)
        cy = min(max(qcoord((y0 + y1 + 1) / 2.0 + jy), hv), h - hv)
        unit = Unit(self._new_uid(), qcoord(cx), qcoord(cy), hu, hv, 0.0)
        self.units = (unit,)
        self.types = {unit.uid: geometry_to_type(self._geometry_class(unit))}
        self.refresh(force=True)

    def _new_uid(self) -> int:
        uid = self.next_uid
        self.next_uid += 1
        return uid

    def _geometry_class(self, unit: Unit) -> GeometryClass:
        return classify_geometry(
            unit,
            self.resolution,
            hall_area_min=self.cfg.hall_area_min_m2,
            corridor_ratio_min=self.cfg.corridor_ratio_min,
        )

    # -- semantics refresh ---------------------------------------------------

    def refresh(self, force: bool = False):
        """Re-derive relations, doors and types; rerun MLN inference when the
        evidence signature changed (or on force)."""
        self.structural_since_refresh = 0
        self.geometric_since_refresh = 0
        self.refresh_count += 1
        old_types = dict(self.types)
        old_doors = self.doors
        if not self.units:
            self.relations = None
            self.doors = ()
            self.sale = {}
            self._rescore_full()
            return
        rel = detect_relations(
            self.units,
            self.shape,
            dilate_radius=self.cfg.dilate_radius,
            min_overlap_cells=self.cfg.min_overlap_cells,
        )
        geom = [self._geometry_class(u) for u in self.units]
        doors = tuple(
            detect_doors(
                self.units,
                rel,
                self.input,
                self.cfg.door_min_cells(self.resolution),
                self.cfg.door_max_cells(self.resolution),
                wall_thickness=self.cfg.wall_thickness,
                dilate_radius=self.cfg.dilate_radius,
            )
        )
        self.relations = rel
        self.doors = doors
        if self.knowledge_active:
            evidence = mln_mod.build_evidence(self.units, rel, doors, geom)
            key = mln_mod.evidence_hash(evidence, self.rules)
            if force or key != self.evidence_key:
                self.evidence_key = key
                network = mln_mod.ground(self.rules, evidence.constants, evidence)
                marginals = mln_mod.infer_marginals(
                    network,
                    seed=int(self.rng.integers(2**63)),
                    budget=self.cfg.mln_exact_budget,
                    burn_in=self.cfg.mln_gibbs_burn_in,
                    samples=self.cfg.mln_gibbs_samples,
                    n_chains=self.cfg.mln_gibbs_chains,
                )
                self.mln_runs += 1
                type_of = mln_mod.assign_types(marginals, evidence.constants)
                self.types = {
                    u.uid: type_of[evidence.constants[i]] for i, u in enumerate(self.units)
                }
                sale = {}
                for p in range(len(self.units)):
                    for q in range(p + 1, len(self.units)):
                        cp, cq = evidence.constants[p], evidence.constants[q]
                        m = 0.5 * (
                            mln_mod.sale_probability(marginals, cp, cq)
                            + mln_mod.sale_probability(marginals, cq, cp)
                        )
                        key_pq = self._pair_key(self.units[p].uid, self.units[q].uid)
                        sale[key_pq] = m
                self.sale = sale
        else:
            self.types = {
                u.uid: geometry_to_type(geom[i]) for i, u in enumerate(self.units)
            }
            self.sale = {}
        if force or self.types != old_types or self.doors != old_doors:
            self._rescore_full()

    def _rescore_full(self):
        self.scorer.reset(self._world())
        self.log_lik = self.scorer.total
        self._wall_diff_cache.clear()
        self.log_prior_val = self._prior_value(self.units)

    def _world(self, units=None) -> World:
        units = self.units if units is None else units
        types = tuple(
            self.types.get(u.uid, geometry_to_type(self._geometry_class(u)))
            for u in units
        )
        return World(units=units, types=types, doors=self.doors, resolution=self.resolution)

    # -- prior ---------------------------------------------------------------

    @staticmethod
    def _pair_key(a: int, b: int):
        return (a, b) if a <= b else (b, a)

    def _wall_diff(self, a: Unit, b: Unit):
        key = self._pair_key(a.uid, b.uid)
        sig = (a.cx, a.cy, a.hu, a.hv, a.angle, b.cx, b.cy, b.hu, b.hv, b.angle)
        hit = self._wall_diff_cache.get(key)
        if hit is not None and hit[0] == sig:
            return hit[1]
        win, overlap = _pair_overlap(a, b, self.shape, self.cfg.dilate_radius)
        if overlap is None or int(overlap.sum()) < self.cfg.min_overlap_cells:
            d = None
        else:
            la = _best_wall_length(a, win, overlap, self.cfg.dilate_radius)
            lb = _best_wall_length(b, win, overlap, self.cfg.dilate_radius)
            d = abs(la - lb)
        self._wall_diff_cache[key] = (sig, d)
        return d

    def _prior_value(self, units) -> float:
        if not (self.knowledge_active and self.cfg.prior_enabled) or not self.sale:
            return 0.0
        by_uid = {u.uid: u for u in units}
        sigma2 = self.cfg.sigma_len * self.cfg.sigma_len
        total = 0.0
        for (ua, ub), prob in self.sale.items():
            if prob <= self.cfg.sale_threshold:
                continue
            a, b = by_uid.get(ua), by_uid.get(ub)
            if a is None or b is None:
                continue
            d = self._wall_diff(a, b)
            if d is None:
                continue
            total -= d * d / (2.0 * sigma2)
        return total

    # -- proposals -------------------------------------------------------------

    def _unit_valid(self, unit: Unit) -> bool:
        h, w = self.shape
        if unit.hu < self.cfg.min_half_extent or unit.hv < self.cfg.min_half_extent:
            return False
        x0, y0, x1, y1 = unit.aabb()
        # footprints must stay inside the frame: off-map walls would escape
        # their likelihood cost entirely
        if x0 < 0.0 or y0 < 0.0 or x1 > w or y1 > h:
            return False
        # a space unit must enclose actual mapped free space; without this,
        # sliver units fully inside thick occupied blobs score as all-wall
        # boxes and never die
        free_cells = self._cells_inside(unit, self._free_integral, self._free)
        if free_cells < self.cfg.add_seed_min_cells:
            return False
        if free_cells < self.cfg.min_free_fraction * unit.area:
            return False
        occ = self._cells_inside(unit, self._occupied_integral, None)
        return occ <= self.cfg.max_occupied_fraction * unit.area

    def _cells_inside(self, unit: Unit, integral, mask) -> int:
        # axis-aligned fast path via the integral image
        half_pi = math.pi / 2.0
        if abs(unit.angle) < 1e-12 or abs(unit.angle - half_pi) < 1e-12:
            if abs(unit.angle) < 1e-12:
                ex, ey = unit.hu, unit.hv
            else:
                ex, ey = unit.hv, unit.hu
            h, w = self.shape
            x0 = max(0, math.ceil(unit.cx - ex - 0.5))
            x1 = min(w - 1, math.floor(unit.cx + ex - 0.5))
            y0 = max(0, math.ceil(unit.cy - ey - 0.5))
            y1 = min(h - 1, math.floor(unit.cy + ey - 0.5))
            if x0 > x1 or y0 > y1:
                return 0
            F = integral
            return int(F[y1 + 1, x1 + 1] - F[y0, x1 + 1] - F[y1 + 1, x0] + F[y0, x0])
        win = unit_window(unit, self.shape)
        if win[0] >= win[2] or win[1] >= win[3]:
            return 0
        if mask is None:
            mask = self.input.states == CellState.OCCUPIED
        sub = mask[win[1] : win[3], win[0] : win[2]]
        inside = footprint_in_window(unit, win)
        return int(np.count_nonzero(sub & inside))

    def _kernel_weight(self, kind: KernelKind) -> float:
        return self.cfg.kernel_weights[kind.name.lower()]

    def _free_seeds(self):
        version, cached = self._seed_cache
        if version == self.accepted_total and cached is not None:
            return cached
        unexplained = self._free & (self.scorer.membership == 0)
        labels = connected_components(unexplained, connectivity=4)
        seeds = [
            labels.bboxes[i]
            for i in range(labels.count)
            if labels.sizes[i] >= self.cfg.add_seed_min_cells
        ]
        self._seed_cache = (self.accepted_total, seeds)
        return seeds

    def propose(self, kind: KernelKind) -> Proposal:
        """Draw a proposal of the given kind; NotApplicable when its
        preconditions are unmet (the step is skipped, not an abort)."""
        units = self.units
        n = len(units)
        cfg = self.cfg
        rng = self.rng
        w, h = self.shape[1], self.shape[0]

        if kind == KernelKind.ADD:
            seeds = self._free_seeds()
            if not seeds:
                raise NotApplicable("no unexplained free components")
            x0, y0, x1, y1 = seeds[int(rng.integers(len(seeds)))]
            t = round(cfg.wall_thickness)
            # jitter each edge by one cell; edges stay on the integer lattice
            # so wall moves can bring independently born units into exact
            # alignment
            ex0 = x0 - t + int(rng.integers(-1, 2))
            ex1 = x1 + 1 + t + int(rng.integers(-1, 2))
            ey0 = y0 - t + int(rng.integers(-1, 2))
            ey1 = y1 + 1 + t + int(rng.integers(-1, 2))
            if ex1 - ex0 < 2 * cfg.min_half_extent or ey1 - ey0 < 2 * cfg.min_half_extent:
                raise NotApplicable("seed too small")
            unit = Unit(
                self.next_uid,
                qcoord((ex0 + ex1) / 2.0),
                qcoord((ey0 + ey1) / 2.0),
                qcoord((ex1 - ex0) / 2.0),
                qcoord((ey1 - ey0) / 2.0),
                0.0,
            )
            if not self._unit_valid(unit):
                raise NotApplicable("seeded unit out of bounds")
            q_fwd = math.log(self._kernel_weight(kind)) - math.log(len(seeds) * 81.0)
            q_rev = math.log(self._kernel_weight(KernelKind.REMOVE)) - math.log(n + 1)
            params = (unit,)
            return self._finish(kind, params, (), (unit,), q_rev - q_fwd)

        if kind in (KernelKind.REMOVE, KernelKind.DELETE):
            if n < 1:
                raise NotApplicable("no unit to remove")
            victim = units[int(rng.integers(n))]
            q_fwd = math.log(self._kernel_weight(kind)) - math.log(n)
            if kind == KernelKind.REMOVE:
                seeds = self._free_seeds()
                q_rev = math.log(self._kernel_weight(KernelKind.ADD)) - math.log(
                    (len(seeds) + 1) * 81.0
                )
            else:
                q_rev = math.log(self._kernel_weight(KernelKind.ALLOCATE)) + self._allocate_log_density()
            q_rev = max(q_rev, MIN_LOG_DENSITY)
            params = (victim.uid,)
            return self._finish(kind, params, (victim,), (), q_rev - q_fwd)

        if kind == KernelKind.ALLOCATE:
            hmin, hmax = cfg.allocate_half_min, min(cfg.allocate_half_max, max(w, h) / 2.0)
            ex0 = float(rng.integers(0, max(w - 1, 1)))
            ey0 = float(rng.integers(0, max(h - 1, 1)))
            width = 2.0 * float(rng.integers(int(hmin), int(hmax) + 1))
            height = 2.0 * float(rng.integers(int(hmin), int(hmax) + 1))
            angle = 0.0 if int(rng.integers(2)) == 0 else math.pi / 2.0
            if cfg.free_angle:
                angle = rng.uniform(0.0, math.pi)
            elif cfg.angle_jitter_deg > 0:
                angle += rng.uniform(-1.0, 1.0) * math.radians(cfg.angle_jitter_deg)
            angle = qcoord(angle % math.pi)
            unit = Unit(
                self.next_uid,
                qcoord(ex0 + width / 2.0),
                qcoord(ey0 + height / 2.0),
                qcoord(width / 2.0),
                qcoord(height / 2.0),
                angle,
            )
            if not self._unit_valid(unit):
                raise NotApplicable("allocated unit invalid")
            q_fwd = math.log(self._kernel_weight(kind)) + self._allocate_log_density()
            q_rev = math.log(self._kernel_weight(KernelKind.DELETE)) - math.log(n + 1)
            params = (unit,)
            return self._finish(kind, params, (), (unit,), q_rev - q_fwd)

        if n < 1:
            raise NotApplicable("kernel needs at least one unit")

        if kind in (KernelKind.SHRINK, KernelKind.DILATE):
            target = units[int(rng.integers(n))]
            wall = int(rng.integers(4))
            delta = float(rng.integers(1, cfg.delta_max + 1))
            signed = delta if kind == KernelKind.DILATE else -delta
            try:
                moved = move_wall(target, wall, signed)
            except ValueError as exc:
                raise NotApplicable("wall move collapses the unit") from exc
            if not self._unit_valid(moved):
                raise NotApplicable("wall move out of range")
            params = (target.uid, wall, delta)
            rect = wall_slab_rect(target, moved, wall, self.cfg.wall_thickness, self.shape)
            return self._finish(kind, params, (target,), (moved,), 0.0, dirty=(rect,))

        if kind == KernelKind.SPLIT:
            target = units[int(rng.integers(n))]
            axis = int(rng.integers(2))
            extent = target.hu if axis == 0 else target.hv
            m = cfg.min_half_extent
            lo, hi = 2.0 * m - extent, extent - 2.0 * m
            if hi <= lo:
                raise NotApplicable("unit too small to split")
            # snap the cut to an integer global coordinate along the axis so
            # child edges stay on the cell lattice
            c, s_ = _cos_sin(target.angle)
            c_along = target.cx * c + target.cy * s_ if axis == 0 else -target.cx * s_ + target.cy * c
            offset = qcoord(round(rng.uniform(lo, hi) + c_along) - c_along)
            if not (lo <= offset <= hi):
                raise NotApplicable("split offset out of range")
            child1, child2 = split_unit(target, axis, offset, self.next_uid, self.next_uid + 1)
            if not (self._unit_valid(child1) and self._unit_valid(child2)):
                raise NotApplicable("split children invalid")
            q_fwd = (
                math.log(self._kernel_weight(kind))
                - math.log(n)
                - math.log(2.0)
                - math.log(hi - lo)
            )
            new_units = apply_kernel(units, kind, (target.uid, child1, child2))
            n_merge = len(_aabb_gap_pairs(new_units, cfg.wall_thickness + 1.0))
            q_rev = math.log(self._kernel_weight(KernelKind.MERGE)) - math.log(max(n_merge, 1))
            params = (target.uid, child1, child2)
            return self._finish(kind, params, (target,), (child1, child2), q_rev - q_fwd, new_units)

        if kind == KernelKind.MERGE:
            pairs = _aabb_gap_pairs(units, cfg.wall_thickness + 1.0)
            if not pairs:
                raise NotApplicable("no adjacent pair to merge")
            i, j = pairs[int(rng.integers(len(pairs)))]
            a, b = units[i], units[j]
            merged = merge_units(a, b, self.next_uid)
            if not self._unit_valid(merged):
                raise NotApplicable("merged unit invalid")
            q_fwd = math.log(self._kernel_weight(kind)) - math.log(len(pairs))
            # reverse split density at the matching offset (pseudo-density
            # when the pair is not an exact axis partition of the merge)
            extent = max(merged.hu, merged.hv)
            q_rev = (
                math.log(self._kernel_weight(KernelKind.SPLIT))
                - math.log(n - 1)
                - math.log(2.0)
                - math.log(max(2.0 * extent - 4.0 * cfg.min_half_extent, 1.0))
            )
            q_rev = max(q_rev, MIN_LOG_DENSITY)
            params = (a.uid, b.uid, merged)
            return self._finish(kind, params, (a, b), (merged,), q_rev - q_fwd)

        if kind == KernelKind.INTERCHANGE:
            cands = interchange_candidates(units, cfg.wall_thickness + 1.0)
            if not cands:
                raise NotApplicable("no aligned equal-section pair")
            i, j, wall_a, wall_b = cands[int(rng.integers(len(cands)))]
            a, b = units[i], units[j]
            delta = float(rng.integers(1, cfg.delta_max + 1))
            if int(rng.integers(2)) == 0:
                delta = -delta
            try:
                moved_a = move_wall(a, wall_a, delta)
                moved_b = move_wall(b, wall_b, -delta)
            except ValueError as exc:
                raise NotApplicable("interchange collapses a unit") from exc
            if not (self._unit_valid(moved_a) and self._unit_valid(moved_b)):
                raise NotApplicable("interchange out of range")
            params = (a.uid, b.uid, wall_a, wall_b, delta)
            rects = (
                wall_slab_rect(a, moved_a, wall_a, self.cfg.wall_thickness, self.shape),
                wall_slab_rect(b, moved_b, wall_b, self.cfg.wall_thickness, self.shape),
            )
            return self._finish(kind, params, (a, b), (moved_a, moved_b), 0.0, dirty=rects)

        raise NotApplicable(f"unhandled kernel {kind}")

    def _allocate_log_density(self) -> float:
        w, h = self.shape[1], self.shape[0]
        hmin = self.cfg.allocate_half_min
        hmax = min(self.cfg.allocate_half_max, max(w, h) / 2.0)
        span = max(int(hmax) - int(hmin) + 1, 1)
        return -(
            math.log(max(w - 1, 1))
            + math.log(max(h - 1, 1))
            + 2.0 * math.log(span)
            + math.log(2.0)
        )

    def _finish(self, kind, params, changed_old, changed_new, log_ratio, new_units=None, dirty=()):
        if new_units is None:
            new_units = apply_kernel(self.units, kind, params)
        rev = reverse_params_for(kind, params, changed_old)
        return Proposal(
            kind=kind,
            new_units=new_units,
            params=params,
            reverse_params=rev,
            log_ratio=log_ratio,
            changed_old=changed_old,
            changed_new=changed_new,
            dirty_rects=tuple(dirty),
        )

    # -- accept / step ----------------------------------------------------------

    def accept(self, proposal: Proposal):
        """Metropolis-Hastings decision; on acceptance the chain state and
        incremental caches move to the proposed world. Returns True/False."""
        if proposal.dirty_rects:
            rects = list(proposal.dirty_rects)
        else:
            rects = dirty_rects_for_units(
                list(proposal.changed_old) + list(proposal.changed_new), self.shape
            )
        # type for brand-new units defaults to their geometry class
        for u in proposal.changed_new:
            if u.uid not in self.types:
                self.types[u.uid] = geometry_to_type(self._geometry_class(u))
        new_world = self._world(proposal.new_units)
        delta_lik, patches = self.scorer.preview(new_world, rects)
        new_prior = self._prior_value(proposal.new_units)
        delta_post = delta_lik + (new_prior - self.log_prior_val)
        log_alpha = delta_post + proposal.log_ratio
        accepted = log_alpha >= 0.0 or math.log(self.rng.random()) < log_alpha
        if not accepted:
            self._drop_stale_types(proposal)
            return False

        self.scorer.commit(delta_lik, patches)
        removed = {u.uid for u in proposal.changed_old} - {
            u.uid for u in proposal.changed_new
        }
        self.units = proposal.new_units
        if removed:
            self.types = {k: v for k, v in self.types.items() if k not in removed}
            self.doors = tuple(
                d for d in self.doors if d.unit_p not in removed and d.unit_q not in removed
            )
        if proposal.kind in (KernelKind.ADD, KernelKind.ALLOCATE, KernelKind.SPLIT, KernelKind.MERGE):
            self.next_uid = max([self.next_uid] + [u.uid + 1 for u in proposal.changed_new])
        self.log_lik = self.scorer.total
        self.log_prior_val = new_prior
        post = self.log_lik + self.log_prior_val
        if post > self.best_score:
            self.best_score = post
            self.best_units = self.units
            self.best_types = dict(self.types)
        return True

    def _drop_stale_types(self, proposal: Proposal):
        alive = {u.uid for u in self.units}
        for u in proposal.changed_new:
            if u.uid not in alive and u.uid in self.types:
                del self.types[u.uid]

    def step(self):
        """One iteration: sample a kernel, propose, decide, maybe refresh."""
        if (
            self.structural_since_refresh >= self.cfg.mln_refresh_structural
            or self.geometric_since_refresh >= self.cfg.mln_refresh_geometric
        ):
            self.refresh()
        kind = self._kernel_kinds[
            int(self.rng.choice(len(self._kernel_kinds), p=self._kernel_probs))
        ]
        stats = self.kernel_stats[kind]
        self.iteration += 1
        try:
            proposal = self.propose(kind)
        except NotApplicable:
            stats.skipped += 1
            return
        stats.proposed += 1
        accepted = self.accept(proposal)
        if accepted:
            stats.accepted += 1
            self.accepted_total += 1
            if proposal.structural:
                self.structural_since_refresh += 1
            else:
                self.geometric_since_refresh += 1
            if self.iteration > self.cfg.burn_in:
                self.sample_ring.append((self.units, dict(self.types)))
            self._accept_count_for_snapshot += 1
        entry = {
            "iteration": self.iteration,
            "kernel": kind.name.lower(),
            "accepted": accepted,
            "log_prior": self.log_prior_val,
            "log_likelihood": self.log_lik,
            "log_posterior": self.log_prior_val + self.log_lik,
        }
        if accepted and self._accept_count_for_snapshot >= self.cfg.snapshot_every:
            self._accept_count_for_snapshot = 0
            entry["units"] = [
                [u.uid, u.cx, u.cy, u.hu, u.hv, u.angle] for u in self.units
            ]
        self.log_entries.append(entry)

    # -- driver --------------------------------------------------------------

    def run(self):
        """Iterate for the configured budget; returns (best_world, stats)."""
        t0 = time.perf_counter()
        for _ in range(self.cfg.iterations):
            self.step()
        elapsed = time.perf_counter() - t0
        if self.best_units is None:
            self.best_units = self.units
            self.best_types = dict(self.types)
            self.best_score = self.log_lik + self.log_prior_val
        best_world, best_states = derive_world(
            self.best_units,
            self.input,
            self.cfg,
            knowledge_active=self.knowledge_active,
            rules=self.rules,
            seed=self.cfg.seed + 977,
        )
        stats = {
            "iterations": self.iteration,
            "elapsed_seconds": elapsed,
            "iterations_per_second": (self.iteration / elapsed) if elapsed > 0 else 0.0,
            "accepted": self.accepted_total,
            "acceptance_rate": self.accepted_total / max(self.iteration, 1),
            "coverage": self.coverage,
            "knowledge_active": self.knowledge_active,
            "refreshes": self.refresh_count,
            "mln_runs": self.mln_runs,
            "best_log_posterior": self.best_score,
            "final_units": len(self.best_units),
            "kernels": {
                k.name.lower(): {
                    "proposed": s.proposed,
                    "accepted": s.accepted,
                    "skipped": s.skipped,
                }
                for k, s in self.kernel_stats.items()
            },
        }
        return best_world, best_states, stats


# ---------------------------------------------------------------------------
# full semantic derivation


def derive_world(units, input_grid: ClassifiedGrid, cfg: RunConfig, knowledge_active=True, rules=None, seed=0):
    """Derive the complete semantic world (relations, doors, types, objects,
    unexplored areas) for a fixed unit geometry."""
    rules = rules if rules is not None else mln_mod.default_rules()
    resolution = input_grid.resolution
    units = tuple(sorted(units, key=lambda u: u.uid))
    if not units:
        world = World(units=(), types=(), resolution=resolution)
        states = rasterize((), input_grid, cfg.wall_thickness)
        return world, states
    rel = detect_relations(
        units,
        input_grid.states.shape,
        dilate_radius=cfg.dilate_radius,
        min_overlap_cells=cfg.min_overlap_cells,
    )
    geom = [
        classify_geometry(
            u, resolution, hall_area_min=cfg.hall_area_min_m2, corridor_ratio_min=cfg.corridor_ratio_min
        )
        for u in units
    ]
    doors = tuple(
        detect_doors(
            units,
            rel,
            input_grid,
            cfg.door_min_cells(resolution),
            cfg.door_max_cells(resolution),
            wall_thickness=cfg.wall_thickness,
            dilate_radius=cfg.dilate_radius,
        )
    )
    if knowledge_active:
        evidence = mln_mod.build_evidence(units, rel, doors, geom)
        network = mln_mod.ground(rules, evidence.constants, evidence)
        marginals = mln_mod.infer_marginals(
            network,
            seed=seed,
            budget=cfg.mln_exact_budget,
            burn_in=cfg.mln_gibbs_burn_in,
            samples=cfg.mln_gibbs_samples,
            n_chains=cfg.mln_gibbs_chains,
        )
        type_of = mln_mod.assign_types(marginals, evidence.constants)
        types = tuple(type_of[evidence.constants[i]] for i in range(len(units)))
    else:
        types = tuple(geometry_to_type(g) for g in geom)
    state_map = rasterize(
        units,
        input_grid,
        wall_thickness=cfg.wall_thickness,
        doors=doors,
        object_from_occupied=cfg.object_from_occupied,
    )
    objects, cleaned = detect_objects(state_map, min_object_cells=cfg.min_object_cells)
    unexplored = detect_unexplored(
        input_grid, cleaned, cfg.unexplored_max_cells(resolution), units=units
    )
    world = World(
        units=units,
        types=types,
        relations=rel,
        doors=doors,
        objects=tuple(objects),
        unexplored=tuple(unexplored),
        resolution=resolution,
    )
    return world, cleaned
