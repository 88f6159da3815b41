"""Reading and writing measures (JSON and headerless CSV)."""
import json

import numpy as np

from .errors import InvalidArgument
from .measure import PointMeasure


def measure_to_dict(mu):
    return {
        "ambient_dim": mu.d,
        "codim_target": mu.n,
        "resolution_floor": mu.h,
        "points": mu.points.tolist(),
        "weights": mu.weights.tolist(),
    }


def measure_from_dict(data):
    pts = np.asarray(data["points"], dtype=float)
    d = int(data.get("ambient_dim", pts.shape[1]))
    if pts.ndim != 2 or pts.shape[1] != d:
        raise InvalidArgument("points do not match ambient_dim")
    n = int(data.get("codim_target", d - 1))
    if n != d - 1:
        raise InvalidArgument("codim_target must equal ambient_dim - 1")
    return PointMeasure(pts, data["weights"], data.get("resolution_floor"))


def save_json(mu, path):
    with open(path, "w") as fh:
        json.dump(measure_to_dict(mu), fh, sort_keys=True)


def load_json(path):
    with open(path) as fh:
        return measure_from_dict(json.load(fh))


def save_csv(mu, path):
    np.savetxt(path, np.column_stack([mu.points, mu.weights]), delimiter=",", fmt="%.17g")


def load_csv(path, h=None):
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    return PointMeasure(data[:, :-1], data[:, -1], h)


def load_measure(path, h=None):
    if str(path).endswith(".csv"):
        return load_csv(path, h)
    return load_json(path)
