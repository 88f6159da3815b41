import csv
import io
import json
import math

import numpy as np
import pytest

from gmtkit.errors import InvalidArgument
from gmtkit.experiments import (EXPERIMENTS, FORMULAS, ExperimentReport, approximation, capacity,
                                dimscan, doubling_scales, run_experiment, thm_local, thm_lower)
from gmtkit.generators import centered_segment, circle, corner_cantor, dyadic_bands, lipschitz_graph, segment
from gmtkit.measure import Ball
from gmtkit.report import CSV_COLUMNS, canonical_json, emit_report, report_csv

CANTOR_B0 = Ball([0.5, 0.5], math.sqrt(0.5))


def test_thm_local_segment():
    rep = thm_local(segment(2000), Ball([0.5, 0.0], 0.25))
    assert rep.checks["finite"]
    assert rep.value("ratio") <= 1.0
    assert rep.value("lhs") == pytest.approx(rep.value("maximal_sq") + rep.value("square_fn"))
    assert rep.value("rhs") == pytest.approx(rep.value("osc") + rep.value("p_term") + rep.value("theta_star"))


def test_thm_local_dilation_invariance():
    mu = lipschitz_graph(1500, amplitude=0.1)
    b0 = Ball([0.5, 0.0], 0.25)
    lam = 2.5
    big = mu.transformed(scale=lam, mass_scale=lam ** mu.n)
    r1 = thm_local(mu, b0).value("ratio")
    r2 = thm_local(big, Ball(b0.center * lam, b0.radius * lam)).value("ratio")
    assert r2 == pytest.approx(r1, rel=1e-9)


def test_thm_local_cantor_band():
    ratios = [thm_local(corner_cantor(g), CANTOR_B0).value("ratio") for g in (3, 4, 5)]
    assert max(ratios) <= 4 * min(ratios)


def test_thm_lower_cantor_generations():
    b1 = Ball([0.5, 0.5], 1.0)
    vals = []
    for g in (4, 5, 6):
        mu = corner_cantor(g)
        # B1: the ball of radius 4^-3 about a generation-3 cell center
        c = 0.5 * (mu.points[:4 ** (g - 3)].min(axis=0) + mu.points[:4 ** (g - 3)].max(axis=0))
        b1 = Ball(c, 4.0 ** -3)
        rep = thm_lower(mu, CANTOR_B0, b1, delta1=1 / 16)
        assert rep.checks["hypotheses_hold"], rep.checks
        vals.append(rep.value("ratio"))
    assert min(vals) > 0
    assert all(abs(v / vals[0] - 1) <= 0.5 for v in vals)


def test_thm_lower_flat_line_separates_terms():
    mu = centered_segment(40000, 40.0, 1.0)
    rep = thm_lower(mu, Ball([0.0, 0.0], 1.0), Ball([0.01, 0.0], 1 / 16))
    assert rep.checks["b1_dense"] and rep.checks["hypotheses_hold"]
    assert rep.value("ratio_osc_only") < 0.02
    assert rep.value("ratio") > 10 * rep.value("ratio_osc_only")


def test_approximation_lipschitz():
    rep = approximation(lipschitz_graph(8000, amplitude=0.05), Ball([0.5, 0.0], 0.2), [2, 3, 4, 5])
    assert rep.checks["finite"] and rep.checks["mass_conserved"]
    assert rep.checks["implied_C_spread_top3"] <= 0.4
    # the disc surrogate carries twice the circle's self-interaction in the continuum limit
    tilde = np.array(rep.sequences["tilde_ratio"])
    assert np.all((tilde >= 0.5) & (tilde <= 2.0 * 1.05))
    with pytest.raises(InvalidArgument):
        approximation(segment(100), Ball([0.5, 0.0], 0.2), [40])


def test_doubling_scales_count():
    mu = dyadic_bands(44, 6, seed=3, contrast=2.0)
    rep = doubling_scales(mu, Ball([0.0, 0.0], 1.0), Ball([0.0, 0.0], 2.0 ** -42), alpha=0.25)
    assert rep.value("N") == 42 and rep.value("required") == 11
    assert rep.checks["hypotheses_hold"] and rep.checks["count_ok"]


def test_capacity_and_dimscan_reports():
    rep = capacity(circle(1000, radius=0.5, center=(0, 0), mass=1.0), radius=0.5)
    assert rep.oracle["rel_err"] < 0.02
    rep = dimscan(segment(2000), Ball([0.5, 0.0], 0.2), m=5)
    assert rep.checks["witness"]


def test_report_formula_ids():
    rep = ExperimentReport("x")
    rep.add("osc", 1.0, "osc")
    with pytest.raises(InvalidArgument):
        rep.add("bad", 1.0, "not_a_formula")
    d = rep.to_dict()
    assert d["formulas"] == {"osc": FORMULAS["osc"]}
    assert "timings" not in d


def test_report_round_trips(tmp_path):
    cfg = {"experiment": "thm_local", "measure": {"kind": "corner_cantor", "params": {"g": 3}},
           "b0": {"center": [0.5, 0.5], "radius": 0.7}}
    rep = run_experiment(cfg)
    path = emit_report(rep, "json", tmp_path / "r.json")
    back = json.loads(path.read_text())
    assert back == json.loads(canonical_json(rep.to_dict()))
    assert back["inputs"]["measure"]["spec"] == cfg["measure"]
    assert (tmp_path / "r.timings.json").exists()
    again = emit_report(run_experiment(cfg), "json", tmp_path / "r2.json")
    assert again.read_bytes() == path.read_bytes()
    rows = list(csv.reader(io.StringIO(report_csv(rep))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert all(len(r) == len(CSV_COLUMNS) for r in rows)
    with pytest.raises(ValueError):
        emit_report(rep, "xml", tmp_path / "r.xml")


def test_canonical_json_non_finite():
    text = canonical_json({"b": float("nan"), "a": [np.float64(1.5), float("inf")]})
    assert json.loads(text) == {"a": [1.5, "inf"], "b": "nan"}
    assert text.index('"a"') < text.index('"b"')


def test_run_experiment_errors():
    with pytest.raises(InvalidArgument):
        run_experiment({"experiment": "nope", "measure": {"kind": "segment", "params": {"N": 4}}})
    with pytest.raises(InvalidArgument):
        run_experiment({"experiment": "thm_local"})
    assert "cantor_contrast" in EXPERIMENTS
