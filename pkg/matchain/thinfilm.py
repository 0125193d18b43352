"""
Thin-Film Stack Optimization
============================
Global maximization of the reflectance of an N-layer coating: each layer picks a
material (discrete) and an angle σ_n ∈ [0, π] (continuous, σ = 2π·a·t/λ).

Pieces:
- `tighten_bounds` / `arc_bounds`: interval range of α·cos σ + γ·β·sin σ, the
  propagation rule for every entry of the cumulative tilde matrix.
- `film_node_bound`: interval bound of the reflectance over a node (material
  assignments + σ boxes), with the det(w̃) = 1 contraction at the final matrix
  and, once all materials are fixed, a mean-value bound on D.
- `solve_thinfilm`: best-first spatial branch-and-bound, materials first
  (adjacent layers never repeat a material), then σ bisection.
- `local_refine`: cyclic golden-section ascent on the σ_n, materials fixed.
- `build_thinfilm_formulation`: the bilinear formulation for external solvers.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_THREADS
from .disjunctive_milp import SolveReport
from .model import FormulationModel
from .optics import (
    MaterialLibrary,
    StackDesign,
    TildeMatrix,
    TransferLayer,
    denominator_D,
    layer_matrix,
    quarter_wave_heuristic,
    reflectance_of,
)
from .telemetry import emit_telemetry, emitter

logger = logging.getLogger(__name__)

Interval = Tuple[float, float]
# entries (11, 12, 21, 22) of a tilde matrix
IBox = Tuple[Interval, Interval, Interval, Interval]

PI = math.pi
FULL_ARC: Interval = (0.0, PI)
_IDENTITY_BOX: IBox = ((1.0, 1.0), (0.0, 0.0), (0.0, 0.0), (1.0, 1.0))
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ThinFilmOptions:
    gap: float = 1e-3
    target: Optional[float] = None
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    threads: int = DEFAULT_THREADS
    det_cut: bool = True
    symmetry_breaking: bool = True
    refine_sweeps: int = 8
    min_width: float = 1e-7

    def __post_init__(self) -> None:
        if self.gap < 0:
            raise ValueError("gap tolerance must be non-negative")
        self.threads = max(1, int(self.threads))


# ───────────────────────────────────────────────────────────────
# Interval helpers
# ───────────────────────────────────────────────────────────────

def _imul(a: Interval, b: Interval) -> Interval:
    p = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(p), max(p)


def _iadd(a: Interval, b: Interval) -> Interval:
    return a[0] + b[0], a[1] + b[1]


def _isub(a: Interval, b: Interval) -> Interval:
    return a[0] - b[1], a[1] - b[0]


def _iscale(c: float, a: Interval) -> Interval:
    return (c * a[0], c * a[1]) if c >= 0 else (c * a[1], c * a[0])


def _sq_max(a: Interval) -> float:
    return max(a[0] * a[0], a[1] * a[1])


def _abs_max(a: Interval) -> float:
    return max(abs(a[0]), abs(a[1]))


def _tilde_imul(a: IBox, b: IBox) -> IBox:
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (
        _isub(_imul(a11, b11), _imul(a12, b21)),
        _iadd(_imul(a11, b12), _imul(a12, b22)),
        _iadd(_imul(a21, b11), _imul(a22, b21)),
        _isub(_imul(a22, b22), _imul(a21, b12)),
    )


def _cos_range(arc: Interval) -> Interval:
    return math.cos(arc[1]), math.cos(arc[0])


def _sin_range(arc: Interval) -> Interval:
    s0, s1 = math.sin(arc[0]), math.sin(arc[1])
    hi = 1.0 if arc[0] <= PI / 2 <= arc[1] else max(s0, s1)
    return max(0.0, min(s0, s1)), hi


# ───────────────────────────────────────────────────────────────
# Bound tightening
# ───────────────────────────────────────────────────────────────

def tighten_bounds(alpha: Interval, beta: Interval, gamma_set: Iterable[float]) -> Interval:
    """Range of α·C + γ·β·S over α, β in their intervals, γ ∈ Γ, C² + S² = 1, S ≥ 0."""
    gammas = list(gamma_set)
    if not gammas:
        raise ValueError("gamma set is empty")
    g_max = max(gammas)
    a_sq = max(alpha[0] ** 2, alpha[1] ** 2)
    upper = math.sqrt(a_sq + g_max ** 2 * max(0.0, beta[1]) ** 2)
    lower = -math.sqrt(a_sq + g_max ** 2 * max(0.0, -beta[0]) ** 2)
    return lower, upper


def _arc_max(a: float, b: float, arc: Interval) -> float:
    rho = math.hypot(a, b)
    if rho == 0.0:
        return 0.0
    if arc[0] <= math.atan2(b, a) <= arc[1]:
        return rho
    return max(a * math.cos(arc[0]) + b * math.sin(arc[0]), a * math.cos(arc[1]) + b * math.sin(arc[1]))


def arc_bounds(alpha: Interval, beta: Interval, gamma_set: Iterable[float], arc: Interval = FULL_ARC) -> Interval:
    """Exact range of α·cos σ + γ·β·sin σ with σ restricted to ``arc`` ⊆ [0, π]."""
    hi = -math.inf
    lo = math.inf
    for g in gamma_set:
        for a in alpha:
            for b in beta:
                hi = max(hi, _arc_max(a, g * b, arc))
                lo = min(lo, -_arc_max(-a, -g * b, arc))
    return lo, hi


def _layer_step(box: IBox, gammas: Sequence[float], arc: Interval) -> IBox:
    """Enclosure of ũ·T̃ for T̃ = [[C, S/a], [a·S, C]], a ∈ Γ, σ ∈ arc."""
    u11, u12, u21, u22 = box
    inv = [1.0 / g for g in gammas]
    if arc == FULL_ARC:
        rng = tighten_bounds
        return (
            rng(u11, (-u12[1], -u12[0]), gammas),
            rng(u12, u11, inv),
            rng(u21, u22, gammas),
            rng(u22, (-u21[1], -u21[0]), inv),
        )
    return (
        arc_bounds(u11, (-u12[1], -u12[0]), gammas, arc),
        arc_bounds(u12, u11, inv, arc),
        arc_bounds(u21, u22, gammas, arc),
        arc_bounds(u22, (-u21[1], -u21[0]), inv, arc),
    )


def propagate_film_bounds(gamma_sets: Sequence[Sequence[float]], arcs: Sequence[Interval]) -> List[IBox]:
    """Boxes of ũ_0 = I, ũ_1, ..., ũ_N under the per-layer index sets and σ arcs."""
    boxes = [_IDENTITY_BOX]
    for gammas, arc in zip(gamma_sets, arcs):
        boxes.append(_layer_step(boxes[-1], gammas, arc))
    return boxes


def contract_det(box: IBox, eps: float = 1e-12) -> Optional[IBox]:
    """One pass of w̃₁₁w̃₂₂ + w̃₁₂w̃₂₁ = 1 contraction; None when the box holds no det-1 matrix."""
    w11, w12, w21, w22 = box

    def narrow(target: Interval, num: Interval, den: Interval) -> Optional[Interval]:
        if den[0] <= 0.0 <= den[1]:
            return target
        quotient = _imul(num, (1.0 / den[1], 1.0 / den[0]))
        lo = max(target[0], quotient[0] - eps)
        hi = min(target[1], quotient[1] + eps)
        if lo > hi:
            return None
        return lo, hi

    one = (1.0, 1.0)
    w11 = narrow(w11, _isub(one, _imul(w12, w21)), w22)
    if w11 is None:
        return None
    w22 = narrow(w22, _isub(one, _imul(w12, w21)), w11)
    if w22 is None:
        return None
    w12 = narrow(w12, _isub(one, _imul(w11, w22)), w21)
    if w12 is None:
        return None
    w21 = narrow(w21, _isub(one, _imul(w11, w22)), w12)
    if w21 is None:
        return None
    return w11, w12, w21, w22


def _d_terms(box: IBox, substrate_index: complex) -> Tuple[Interval, Interval]:
    y = substrate_index.imag
    w11, w12, w21, w22 = box
    return _isub(w11, _iscale(y, w12)), _iadd(w21, _iscale(y, w22))


def d_upper_bound(box: IBox, substrate_index: complex) -> float:
    """Upper bound of D over a box of final matrices; each square peaks at an endpoint."""
    x = substrate_index.real
    e1, e3 = _d_terms(box, substrate_index)
    return _sq_max(e1) + x * x * _sq_max(box[1]) + _sq_max(e3) + x * x * _sq_max(box[3]) + 2.0 * x


# ───────────────────────────────────────────────────────────────
# Node bounds
# ───────────────────────────────────────────────────────────────

def _point_matrix(a: float, sigma: float) -> TildeMatrix:
    return layer_matrix(a, math.cos(sigma), math.sin(sigma))


def _layer_box(a: float, arc: Interval) -> IBox:
    c, s = _cos_range(arc), _sin_range(arc)
    return c, _iscale(1.0 / a, s), _iscale(a, s), c


def _layer_derivative_box(a: float, arc: Interval) -> IBox:
    c, s = _cos_range(arc), _sin_range(arc)
    ms = (-s[1], -s[0])
    return ms, _iscale(1.0 / a, c), _iscale(a, c), ms


def _mean_value_D(indices: Sequence[float], arcs: Sequence[Interval], prefix_boxes: Sequence[IBox],
                  final_box: IBox, substrate_index: complex) -> Tuple[float, float]:
    """(D at the box centre, mean-value upper bound of D over the box); materials fixed."""
    N = len(indices)
    x, y = substrate_index.real, substrate_index.imag
    centre = [(arc[0] + arc[1]) / 2.0 for arc in arcs]
    w = TildeMatrix.identity()
    for a, s in zip(indices, centre):
        w = w @ _point_matrix(a, s)
    d_centre = denominator_D(w, substrate_index)

    suffix: List[IBox] = [_IDENTITY_BOX] * (N + 1)
    for n in range(N - 1, -1, -1):
        suffix[n] = _tilde_imul(_layer_box(indices[n], arcs[n]), suffix[n + 1])

    e1, e3 = _d_terms(final_box, substrate_index)
    x2 = x * x
    dD = (
        _iscale(2.0, e1),
        _iadd(_iscale(-2.0 * y, e1), _iscale(2.0 * x2, final_box[1])),
        _iscale(2.0, e3),
        _iadd(_iscale(2.0 * y, e3), _iscale(2.0 * x2, final_box[3])),
    )
    total = d_centre
    for n in range(N):
        half = (arcs[n][1] - arcs[n][0]) / 2.0
        if half <= 0.0:
            continue
        dw = _tilde_imul(_tilde_imul(prefix_boxes[n], _layer_derivative_box(indices[n], arcs[n])), suffix[n + 1])
        g = (0.0, 0.0)
        for e in range(4):
            g = _iadd(g, _imul(dD[e], dw[e]))
        total += half * _abs_max(g)
    return d_centre, total


@dataclass
class FilmNode:
    bound: float
    materials: Tuple[int, ...]
    arcs: Tuple[Interval, ...]
    boxes: Optional[List[IBox]] = None
    centre_value: float = -math.inf

    @property
    def material_complete(self) -> bool:
        return len(self.materials) == len(self.arcs)


def film_node_bound(lib: MaterialLibrary, materials: Sequence[int], arcs: Sequence[Interval],
                    det_cut: bool = True, symmetry_breaking: bool = True) -> Tuple[float, List[IBox], float]:
    """(reflectance upper bound, state boxes, reflectance at the box centre or -inf).

    Layers beyond ``len(materials)`` may use any material (except a repeat of the
    last assigned one under symmetry breaking).
    """
    N = len(arcs)
    idx = lib.indices
    gamma_sets: List[List[float]] = []
    for n in range(N):
        if n < len(materials):
            gamma_sets.append([float(idx[materials[n]])])
        elif symmetry_breaking and n == len(materials) and n > 0:
            gamma_sets.append([float(a) for m, a in enumerate(idx) if m != materials[n - 1]])
        else:
            gamma_sets.append([float(a) for a in idx])
    boxes = propagate_film_bounds(gamma_sets, arcs)
    final = boxes[-1]
    if det_cut:
        contracted = contract_det(final)
        if contracted is None:
            return -math.inf, boxes, -math.inf
        final = contracted
    s = lib.substrate_index
    d_ub = d_upper_bound(final, s)
    centre = -math.inf
    if len(materials) == N:
        indices = [gs[0] for gs in gamma_sets]
        d_centre, d_mv = _mean_value_D(indices, arcs, boxes, final, s)
        d_ub = min(d_ub, d_mv)
        centre = 1.0 - 4.0 * s.real / d_centre
    return 1.0 - 4.0 * s.real / d_ub, boxes, centre


# ───────────────────────────────────────────────────────────────
# Local refinement
# ───────────────────────────────────────────────────────────────

def _golden_max(f, lo: float, hi: float, tol: float = 1e-10) -> Tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _design_from_sigmas(lib: MaterialLibrary, materials: Sequence[int], sigmas: Sequence[float],
                        provenance: str) -> StackDesign:
    names = lib.materials
    layers = [TransferLayer.from_sigma(names[m], lib.index_of(m), s, lib.wavelength)
              for m, s in zip(materials, sigmas)]
    return StackDesign.evaluate(layers, lib, provenance)


def local_refine(design: StackDesign, lib: MaterialLibrary, sweeps: int = 8, scan_points: int = 24) -> StackDesign:
    """Cyclic coordinate ascent over the layer angles, materials fixed."""
    N = design.n_layers
    if N == 0:
        return design
    s = lib.substrate_index
    indices = [layer.index for layer in design.layers]
    sigmas = [layer.sigma for layer in design.layers]
    mats = [layer.matrix for layer in design.layers]
    current = reflectance_of(design.cumulative(), s)
    start_value = current
    grid = np.linspace(0.0, PI, scan_points + 1)

    for _ in range(sweeps):
        before = current
        for n in range(N):
            prefix = TildeMatrix.identity()
            for m in mats[:n]:
                prefix = prefix @ m
            suffix = TildeMatrix.identity()
            for m in mats[n + 1:]:
                suffix = suffix @ m
            a = indices[n]

            def f(sigma: float) -> float:
                return reflectance_of(prefix @ _point_matrix(a, sigma) @ suffix, s)

            values = [f(g) for g in grid]
            i = int(np.argmax(values))
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, scan_points)]
            sigma, value = _golden_max(f, lo, hi)
            if values[i] > value:
                sigma, value = float(grid[i]), values[i]
            if value > current:
                sigmas[n] = sigma
                mats[n] = _point_matrix(a, sigma)
                current = value
        if current - before < 1e-13:
            break

    if current <= start_value:
        return design
    names = [layer.material for layer in design.layers]
    layers = [TransferLayer.from_sigma(name, a, sg, lib.wavelength) for name, a, sg in zip(names, indices, sigmas)]
    refined = StackDesign.evaluate(layers, lib, "incumbent")
    return refined if refined.reflectance >= design.reflectance else design


# ───────────────────────────────────────────────────────────────
# Spatial branch-and-bound
# ───────────────────────────────────────────────────────────────

def _children_materials(lib: MaterialLibrary, node: FilmNode, symmetry_breaking: bool) -> List[Tuple[int, ...]]:
    last = node.materials[-1] if node.materials else None
    return [node.materials + (m,) for m in range(len(lib))
            if not (symmetry_breaking and m == last)]


def _split_layer(node: FilmNode) -> int:
    best, best_score = -1, 0.0
    for n, arc in enumerate(node.arcs):
        width = arc[1] - arc[0]
        mag = max(_abs_max(e) for e in node.boxes[n]) if node.boxes else 1.0
        score = width * max(1.0, mag)
        if score > best_score:
            best, best_score = n, score
    return best


def root_bound(lib: MaterialLibrary, N: int, options: Optional[ThinFilmOptions] = None) -> float:
    opts = options or ThinFilmOptions()
    return film_node_bound(lib, (), (FULL_ARC,) * N, opts.det_cut, opts.symmetry_breaking)[0]


def solve_thinfilm(lib: MaterialLibrary, N: int,
                   options: Optional[ThinFilmOptions] = None) -> Tuple[SolveReport, StackDesign]:
    """Globally maximize the reflectance of an N-layer stack over ``lib``."""
    if N < 1:
        raise ValueError(f"number of layers must be at least 1, got {N}")
    if len(lib) < 1:
        raise ValueError("material library has no coatings")
    opts = options or ThinFilmOptions()
    start = time.perf_counter()
    telemetry_on = emitter.active
    K = len(lib)
    if opts.symmetry_breaking and K < 2 and N > 1:
        raise ValueError("symmetry breaking with a single material admits only one layer")

    # incumbent: refined quarter-wave stack when two materials exist, else mid-angle single material
    if K >= 2:
        seed = quarter_wave_heuristic(lib, N)
    else:
        seed = _design_from_sigmas(lib, [0] * N, [PI / 2] * N, "heuristic")
    incumbent = local_refine(seed, lib, opts.refine_sweeps)

    def threshold() -> float:
        return incumbent.reflectance + opts.gap * max(abs(incumbent.reflectance), 1e-12)

    def offer(design: StackDesign) -> None:
        nonlocal incumbent
        if design.reflectance > incumbent.reflectance + 1e-15:
            incumbent = design
            logger.debug("[ThinFilm] incumbent R=%.9f %s", design.reflectance, design.materials)
            if telemetry_on:
                emit_telemetry("ThinFilm", "incumbent", {"reflectance": design.reflectance,
                                                         "materials": design.materials})

    def bound_child(spec: Tuple[Tuple[int, ...], Tuple[Interval, ...]]) -> FilmNode:
        materials, arcs = spec
        bound, boxes, centre = film_node_bound(lib, materials, arcs, opts.det_cut, opts.symmetry_breaking)
        return FilmNode(bound, materials, arcs, boxes, centre)

    counter = itertools.count()
    root = bound_child(((), (FULL_ARC,) * N))
    heap: List[Tuple[float, int, FilmNode]] = [(-root.bound, next(counter), root)]
    nodes = 0
    best_pruned = -math.inf
    status = "optimal"
    pool = ThreadPoolExecutor(max_workers=opts.threads) if opts.threads > 1 else None

    try:
        while heap:
            if opts.target is not None and incumbent.reflectance >= opts.target:
                status = "target_reached"
                break
            if opts.time_limit is not None and time.perf_counter() - start > opts.time_limit:
                status = "time_limit"
                break
            top = -heap[0][0]
            if top <= threshold():
                break
            if opts.node_limit is not None and nodes >= opts.node_limit:
                status = "node_limit"
                break
            _, _, node = heapq.heappop(heap)
            nodes += 1
            if telemetry_on:
                emit_telemetry("ThinFilm", "node", {
                    "materials": [lib.materials[m] for m in node.materials],
                    "arcs": [list(a) for a in node.arcs], "bound": node.bound,
                    "depth": len(node.materials),
                })

            if not node.material_complete:
                specs = [(mats, node.arcs) for mats in _children_materials(lib, node, opts.symmetry_breaking)]
            else:
                n = _split_layer(node)
                arc = node.arcs[n]
                if n < 0 or arc[1] - arc[0] < opts.min_width:
                    best_pruned = max(best_pruned, node.bound)
                    continue
                mid = (arc[0] + arc[1]) / 2.0
                specs = [
                    (node.materials, node.arcs[:n] + ((arc[0], mid),) + node.arcs[n + 1:]),
                    (node.materials, node.arcs[:n] + ((mid, arc[1]),) + node.arcs[n + 1:]),
                ]

            children = list(pool.map(bound_child, specs)) if pool is not None else [bound_child(s) for s in specs]
            for child in children:
                if child.material_complete and not node.material_complete:
                    centre = [(a[0] + a[1]) / 2.0 for a in child.arcs]
                    offer(local_refine(_design_from_sigmas(lib, child.materials, centre, "incumbent"),
                                       lib, opts.refine_sweeps))
                elif child.centre_value > incumbent.reflectance + 1e-15:
                    centre = [(a[0] + a[1]) / 2.0 for a in child.arcs]
                    offer(_design_from_sigmas(lib, child.materials, centre, "incumbent"))
            for child in children:
                if child.bound <= threshold():
                    best_pruned = max(best_pruned, child.bound)
                    continue
                heapq.heappush(heap, (-child.bound, next(counter), child))
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    open_bound = -heap[0][0] if heap else -math.inf
    upper = min(1.0, max(incumbent.reflectance, best_pruned, open_bound))
    value = incumbent.reflectance
    gap = max(0.0, upper - value) / max(abs(value), 1e-12)
    if status == "optimal" and gap > opts.gap + 1e-12:
        status = "gap_limit"
    design = StackDesign(list(incumbent.layers), value, "optimal" if status == "optimal" else "incumbent",
                         lib.wavelength, lib.substrate_index, lib.substrate_name)
    wall = time.perf_counter() - start
    report = SolveReport(
        optimal_value=value,
        optimal_sequence=design.materials,
        node_count=nodes,
        lp_count=0,
        wall_time=wall,
        gap=gap,
        status=status,
        upper_bound=upper,
        gap_type="relative",
        method="spatial_branch_and_bound",
    )
    logger.info("[ThinFilm] %s N=%d R=%.9f ub=%.9f nodes=%d (%.2fs)", status, N, value, upper, nodes, wall)
    if telemetry_on:
        emit_telemetry("ThinFilm", "done", report.to_dict())
    return report, design


# ───────────────────────────────────────────────────────────────
# Tables and export
# ───────────────────────────────────────────────────────────────

def heuristic_table(lib: MaterialLibrary, n_max: int = 6) -> List[float]:
    """Quarter-wave reflectance for N = 0..n_max."""
    return [quarter_wave_heuristic(lib, n).reflectance for n in range(n_max + 1)]


def reflectance_table(libraries: Mapping[float, MaterialLibrary], n_max: int = 6) -> List[Dict[str, float]]:
    """Rows of {wavelength_nm, N0..N<n_max>} quarter-wave reflectances, one per wavelength."""
    rows = []
    for wl in sorted(libraries):
        row: Dict[str, float] = {"wavelength_nm": wl}
        row.update({f"N{n}": r for n, r in enumerate(heuristic_table(libraries[wl], n_max))})
        rows.append(row)
    return rows


def build_thinfilm_formulation(lib: MaterialLibrary, N: int, det_cut: bool = True,
                               symmetry_breaking: bool = True) -> FormulationModel:
    """Bilinear formulation of the N-layer problem (maximize D; R = 1 − 4·Re(â_s)/D)."""
    if N < 1:
        raise ValueError(f"number of layers must be at least 1, got {N}")
    names = lib.materials
    idx = lib.indices
    a_min, a_max = float(idx.min()), float(idx.max())
    x, y = lib.substrate_index.real, lib.substrate_index.imag
    model = FormulationModel(kind="miqcqp", metadata={
        "source": "thinfilm", "layers": N, "materials": names,
        "substrate": lib.substrate_name, "substrate_index": [x, y],
        "wavelength_nm": lib.wavelength, "objective": "D; reflectance = 1 - 4*x/D",
        "det_cut": det_cut, "symmetry_breaking": symmetry_breaking,
    })

    boxes = propagate_film_bounds([list(map(float, idx))] * N, [FULL_ARC] * N)
    entries = ("11", "12", "21", "22")
    u = []
    for n in range(N + 1):
        u.append([model.add_variable(f"u[{n},{e}]", "continuous", boxes[n][i][0], boxes[n][i][1])
                  for i, e in enumerate(entries)])

    x_vars: List[List[int]] = []
    for n in range(1, N + 1):
        C = model.add_variable(f"C[{n}]", "continuous", -1.0, 1.0)
        S = model.add_variable(f"S[{n}]", "continuous", 0.0, 1.0)
        T11 = model.add_variable(f"T[{n},11]", "continuous", -1.0, 1.0)
        T12 = model.add_variable(f"T[{n},12]", "continuous", 0.0, 1.0 / a_min)
        T21 = model.add_variable(f"T[{n},21]", "continuous", 0.0, a_max)
        T22 = model.add_variable(f"T[{n},22]", "continuous", -1.0, 1.0)
        v = [model.add_variable(f"v[{n},{m}]", "continuous", 0.0, 1.0) for m in names]
        xs = [model.add_variable(f"x[{n},{m}]", "binary", 0.0, 1.0) for m in names]
        x_vars.append(xs)

        model.add_quadratic({}, [(C, C, 1.0), (S, S, 1.0)], "=", 1.0, group="trig")
        model.add_linear({T11: 1.0, C: -1.0}, "=", 0.0, group="material")
        model.add_linear({T22: 1.0, C: -1.0}, "=", 0.0, group="material")
        row = {vi: 1.0 for vi in v}
        row[S] = -1.0
        model.add_linear(row, "=", 0.0, group="material")
        row = {vi: 1.0 / float(a) for vi, a in zip(v, idx)}
        row[T12] = -1.0
        model.add_linear(row, "=", 0.0, group="material")
        row = {vi: float(a) for vi, a in zip(v, idx)}
        row[T21] = -1.0
        model.add_linear(row, "=", 0.0, group="material")
        for vi, xi in zip(v, xs):
            model.add_linear({vi: 1.0, xi: -1.0}, "<=", 0.0, group="indicator")
        model.add_linear({xi: 1.0 for xi in xs}, "=", 1.0, group="choice")

        p11, p12, p21, p22 = u[n - 1]
        c11, c12, c21, c22 = u[n]
        model.add_quadratic({c11: 1.0}, [(p11, T11, -1.0), (p12, T21, 1.0)], "=", 0.0, group="recursion")
        model.add_quadratic({c12: 1.0}, [(p11, T12, -1.0), (p12, T22, -1.0)], "=", 0.0, group="recursion")
        model.add_quadratic({c21: 1.0}, [(p21, T11, -1.0), (p22, T21, -1.0)], "=", 0.0, group="recursion")
        model.add_quadratic({c22: 1.0}, [(p22, T22, -1.0), (p21, T12, 1.0)], "=", 0.0, group="recursion")

    # ũ_0 = I
    for i, val in enumerate((1.0, 0.0, 0.0, 1.0)):
        model.add_linear({u[0][i]: 1.0}, "=", val, group="initial")

    if symmetry_breaking:
        for n in range(N - 1):
            for m in range(len(names)):
                model.add_linear({x_vars[n][m]: 1.0, x_vars[n + 1][m]: 1.0}, "<=", 1.0, group="symmetry")

    w11, w12, w21, w22 = u[N]
    if det_cut:
        model.add_quadratic({}, [(w11, w22, 1.0), (w12, w21, 1.0)], "=", 1.0, group="det")

    s2 = x * x + y * y
    model.set_objective("max", {}, [
        (w11, w11, 1.0), (w11, w12, -2.0 * y), (w12, w12, s2),
        (w21, w21, 1.0), (w21, w22, 2.0 * y), (w22, w22, s2),
    ], constant=2.0 * x)
    logger.debug("[ThinFilm] built %r", model)
    return model


def evaluate_formulation_point(model: FormulationModel, lib: MaterialLibrary, design: StackDesign) -> np.ndarray:
    """Variable vector of ``model`` realising ``design`` (for checking exported rows)."""
    vec = np.zeros(model.n_vars)
    names = lib.materials
    w = TildeMatrix.identity()
    for i, val in enumerate((1.0, 0.0, 0.0, 1.0)):
        vec[model.index(f"u[0,{('11', '12', '21', '22')[i]}]")] = val
    for n, layer in enumerate(design.layers, start=1):
        t = layer.matrix
        w = w @ t
        vec[model.index(f"C[{n}]")] = layer.C
        vec[model.index(f"S[{n}]")] = layer.S
        vec[model.index(f"T[{n},11]")] = t.w11
        vec[model.index(f"T[{n},12]")] = t.w12
        vec[model.index(f"T[{n},21]")] = t.w21
        vec[model.index(f"T[{n},22]")] = t.w22
        for m in names:
            chosen = m == layer.material
            vec[model.index(f"v[{n},{m}]")] = layer.S if chosen else 0.0
            vec[model.index(f"x[{n},{m}]")] = 1.0 if chosen else 0.0
        for key, val in zip(("11", "12", "21", "22"), (w.w11, w.w12, w.w21, w.w22)):
            vec[model.index(f"u[{n},{key}]")] = val
    return vec
