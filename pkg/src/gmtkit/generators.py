"""Deterministic test measures with known density profiles."""
from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import InvalidArgument
from .measure import PointMeasure, default_floor
from .sampling import sphere_points


def segment(N, length=1.0, mass=1.0, d=2, start=0.0):
    """N equal atoms at the midpoints of N equal pieces of [start, start+length] x {0}."""
    if N < 1:
        raise InvalidArgument("N must be >= 1")
    x = start + (np.arange(N) + 0.5) * (length / N)
    pts = np.zeros((N, d))
    pts[:, 0] = x
    return PointMeasure(pts, np.full(N, mass / N), h=0.5 * length / N)


def centered_segment(N, length, density, d=2, center=None):
    """Segment of the given length and linear density, centered at ``center``."""
    c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    mu = segment(N, length, density * length, d, start=-0.5 * length)
    return PointMeasure(mu.points + c, mu.weights, mu.h)


def lipschitz_graph(N, amplitude=0.1, frequency=1.0, length=1.0, density=1.0, start=0.0, center_y=0.0):
    """Graph of y = amplitude * sin(2 pi frequency x) with arc-length weights."""
    dx = length / N
    x = start + (np.arange(N) + 0.5) * dx
    y = center_y + amplitude * np.sin(2 * np.pi * frequency * x)
    slope = 2 * np.pi * frequency * amplitude * np.cos(2 * np.pi * frequency * x)
    w = density * dx * np.sqrt(1.0 + slope ** 2)
    pts = np.column_stack([x, y])
    return PointMeasure(pts, w, h=0.5 * dx)


def circle(N, radius=1.0, center=(0.0, 0.0), mass=1.0):
    pts = sphere_points(np.asarray(center, dtype=float), radius, N)
    return PointMeasure(pts, np.full(N, mass / N), h=radius * np.sin(np.pi / N))


def sphere(M, radius=1.0, center=(0.0, 0.0, 0.0), mass=1.0):
    pts = sphere_points(np.asarray(center, dtype=float), radius, M)
    return PointMeasure(pts, np.full(M, mass / M))


def _corner_centers(sides):
    o = np.zeros((1, 2))
    s = 1.0
    corners = np.array(list(itertools.product([0.0, 1.0], repeat=2)))
    for t in sides:
        o = (o[:, None, :] + corners[None] * (s - t)).reshape(-1, 2)
        s = t
    return o + s / 2.0


def corner_cantor(g):
    """Generation-g four-corner Cantor measure in the unit square, mass 1.

    Each square of side s keeps its four corner squares of side s/4; the 4^g
    atoms sit at the centers of the generation-g squares.  With h = 4^-g,
    Theta(center, 4^-j) = 1 for 0 <= j <= g.
    """
    if g < 0:
        raise InvalidArgument("generation must be >= 0")
    sides = [4.0 ** -(k + 1) for k in range(g)]
    pts = _corner_centers(sides)
    return PointMeasure(pts, np.full(len(pts), 4.0 ** -g), h=4.0 ** -g)


def cantor_density(g, density_seq):
    """Corner Cantor set with generation-dependent contraction.

    density_seq[j] is the target ratio mass/side of generation-j squares
    (index 0 is the unit square); the side ratio is s_j = d_j / (4 d_{j+1}).
    """
    dens = np.asarray(density_seq, dtype=float)
    if len(dens) != g + 1:
        raise InvalidArgument("density_seq needs g + 1 entries")
    sides, s = [], 1.0
    for j in range(g):
        ratio = dens[j] / (4.0 * dens[j + 1])
        if not 0 < ratio <= 0.45:
            raise InvalidArgument("density ratios must give side ratios in (0, 0.45]")
        s *= ratio
        sides.append(s)
    pts = _corner_centers(sides)
    return PointMeasure(pts, np.full(len(pts), 4.0 ** -g), h=sides[-1] if sides else 1.0)


def plane_patch_3d(M, size=1.0, center=(0.0, 0.0, 0.0), density=1.0):
    """M x M grid of cell centers on a square of the plane z = const in R^3, area weights."""
    c = np.asarray(center, dtype=float)
    s = size / M
    ax = -0.5 * size + (np.arange(M) + 0.5) * s
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(M * M)]) + c
    return PointMeasure(pts, np.full(M * M, density * s * s), h=0.5 * s)


def atom_cloud(N, seed=0, d=2, mass=1.0):
    """N uniform random atoms in the unit cube with random weights (normalized to ``mass``)."""
    rng = np.random.default_rng(seed)
    pts = rng.random((N, d))
    w = rng.uniform(0.5, 1.5, N)
    return PointMeasure(pts, mass * w / w.sum())


def dyadic_bands(bands=44, per_band=6, seed=0, contrast=3.0):
    """Line measure on [-1, 1] x {0} whose density is constant on each dyadic band
    2^-(j+1) <= |x| <= 2^-j, drawn log-uniformly from [1/contrast, contrast]."""
    rng = np.random.default_rng(seed)
    xs, ws = [], []
    for j in range(bands):
        lo, hi = 2.0 ** -(j + 1), 2.0 ** -j
        rho = np.exp(rng.uniform(-np.log(contrast), np.log(contrast)))
        dx = (hi - lo) / per_band
        x = lo + (np.arange(per_band) + 0.5) * dx
        for sgn in (-1.0, 1.0):
            xs.append(sgn * x)
            ws.append(np.full(per_band, rho * dx))
    core = 2.0 ** -bands
    xs.append(np.array([0.0]))
    ws.append(np.array([2.0 * core]))
    x = np.concatenate(xs)
    order = np.argsort(x, kind="stable")
    pts = np.column_stack([x[order], np.zeros(len(x))])
    w = np.concatenate(ws)[order]
    return PointMeasure(pts, w, h=0.5 * core / per_band)


def refined_square(focus=(1.0 / 3.0, 1.0 / 3.0), K=4.0, min_size=1e-9):
    """Area measure on the unit square sampled at quadtree cell centers.

    A cell is split while its side exceeds dist(cell center, focus)/K, so the
    sampling resolves balls about the focus down to ``min_size``.
    """
    f = np.asarray(focus, dtype=float)
    pts, ws = [], []
    stack = [(np.zeros(2), 1.0)]
    while stack:
        lo, s = stack.pop()
        c = lo + 0.5 * s
        dist = float(np.linalg.norm(c - f))
        if s > max(dist / K, min_size):
            half = 0.5 * s
            for off in itertools.product([0.0, 1.0], repeat=2):
                stack.append((lo + half * np.array(off), half))
        else:
            pts.append(c)
            ws.append(s * s)
    pts = np.array(pts)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    return PointMeasure(pts[order], np.array(ws)[order], h=min_size)


KINDS = {
    "segment": segment,
    "centered_segment": centered_segment,
    "lipschitz_graph": lipschitz_graph,
    "circle": circle,
    "sphere": sphere,
    "corner_cantor": corner_cantor,
    "cantor_density": cantor_density,
    "plane_patch_3d": plane_patch_3d,
    "atom_cloud": atom_cloud,
    "dyadic_bands": dyadic_bands,
    "refined_square": refined_square,
}


@dataclass
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "params": dict(self.params)}


def generate(spec):
    if isinstance(spec, dict):
        spec = GeneratorSpec(spec["kind"], dict(spec.get("params", {})))
    if spec.kind not in KINDS:
        raise InvalidArgument(f"unknown generator kind {spec.kind!r}")
    try:
        return KINDS[spec.kind](**spec.params)
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from exc
