"""Deterministic point sets on spheres and inside balls (no random numbers)."""
from math import fsum

import numpy as np

from .errors import InvalidArgument

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


def sphere_points(center, radius, m):
    """m points on the sphere of the given radius: equal angles (d=2) or a Fibonacci lattice (d=3)."""
    center = np.asarray(center, dtype=float)
    d = len(center)
    i = np.arange(m) + 0.5
    if d == 2:
        ang = 2.0 * np.pi * np.arange(m) / m
        u = np.column_stack([np.cos(ang), np.sin(ang)])
    elif d == 3:
        z = 1.0 - 2.0 * i / m
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = GOLDEN_ANGLE * np.arange(m)
        u = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        raise InvalidArgument("sphere sampling supports d = 2 and d = 3")
    return center + radius * u


def ball_points(center, radius, m):
    """About m points filling the closed ball: sunflower disk (d=2), cubic grid (d=3)."""
    center = np.asarray(center, dtype=float)
    d = len(center)
    if d == 2:
        i = np.arange(m) + 0.5
        rad = radius * np.sqrt(i / m)
        phi = GOLDEN_ANGLE * np.arange(m)
        return center + np.column_stack([rad * np.cos(phi), rad * np.sin(phi)])
    if d == 3:
        # grid spacing chosen so the ball holds roughly m nodes
        s = radius * (4.0 * np.pi / (3.0 * m)) ** (1.0 / 3.0)
        k = int(np.ceil(radius / s)) + 1
        ax = (np.arange(-k, k) + 0.5) * s
        g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
        g = g[np.sqrt(np.sum(g * g, axis=1)) <= radius * (1 - 1e-12)]
        if len(g) == 0:
            g = np.zeros((1, 3))
        return center + g
    raise InvalidArgument("ball sampling supports d = 2 and d = 3")


def exact_split(mass, count):
    """count weights summing to ``mass``: equal shares with the rounding put in the last one."""
    w = np.full(count, mass / count)
    if count > 1:
        w[-1] = mass - fsum(w[:-1])
    return w
