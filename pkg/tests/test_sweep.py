import math

import pytest

from f4tele.configfile import ConfigFileError, EXAMPLE, load_config_text
from f4tele.model import Mode
from f4tele.scheduler import stability_check
from f4tele.sweep import (ExperimentPlan, analyze_point, analyze_rows,
                          load_plan_text, plan_points, point_config,
                          rows_to_csv, run_sweep)


def test_analyze_point_canonical_config():
    cfg = load_config_text(EXAMPLE)
    row = analyze_point(cfg)
    assert row.k_low == 5 and row.k_hot == 1
    assert row.pr_hot == pytest.approx(0.5)
    assert row.pr_low == pytest.approx(0.1)     # five low sets
    assert row.stable
    assert row.w_hot_seconds == pytest.approx(0.01, rel=1e-9)


def test_analyze_load_scaling_preserves_beta_and_flags_instability():
    cfg = load_config_text(EXAMPLE)
    rows = analyze_rows(cfg, [0.2, 0.5, 1.0])
    assert [r.stable for r in rows] == [True, True, False]
    assert rows[0].load == pytest.approx(0.2)
    csv_text = rows_to_csv(rows)
    assert csv_text.splitlines()[0].startswith("load,k_low,k_hot")
    assert len(csv_text.splitlines()) == 4


def test_point_config_hits_target_effective_load():
    for load in (0.2, 0.6, 1.0):
        cfg = point_config(k_hot=1, k_low=5, d=0.01, service_mean=2e-4,
                           load=load)
        rep = stability_check(cfg.schedule, cfg.traffic, cfg.service,
                              cfg.partition)
        for row in rep.per_set:
            assert row.rho_eff == pytest.approx(load, rel=1e-9)


def test_plan_parsing_defaults_and_errors():
    plan = load_plan_text("[plan]\nseeds = 1,2\nloads = 0.1,0.5\n"
                          "k_values = 1,3\nd_values = 0.01\n"
                          "speed_factors = 1,0.5\nengine = analytic\n")
    assert plan.seeds == (1, 2)
    assert plan.engine == "analytic"
    with pytest.raises(ConfigFileError):
        load_plan_text("[notplan]\nx = 1\n")
    with pytest.raises(ValueError):
        load_plan_text("[plan]\nloads = \n").validate()
    with pytest.raises(ValueError):
        load_plan_text("[plan]\nseeds = 3,3\n")


def test_plan_points_order_and_families():
    plan = ExperimentPlan(seeds=(1,), loads=(0.1, 0.2), k_values=(1, 2),
                          d_values=(0.01, 0.1), speed_factors=(1.0, 0.5),
                          engine="analytic")
    pts = plan_points(plan)
    fams = [p[0] for p in pts]
    assert fams[0] == "wh10" and "wl100" in fams
    assert fams[-1] == "speed_degradation"
    # families x k x load: (4 * 2*2) + speed (2 * 2*2)
    assert len(pts) == 16 + 8


def test_analytic_sweep_longer_slots_dominate_pointwise():
    # non-hotspot waiting-time surface at d = 100 ms sits above the
    # d = 10 ms surface at every (load, k) point
    plan = ExperimentPlan(seeds=(1,), loads=(0.1, 0.4, 0.8),
                          k_values=(1, 3, 6), d_values=(0.01, 0.1),
                          speed_factors=(1.0,), engine="analytic")
    out = run_sweep(plan)
    assert set(out) == {"wh10", "wh100", "wl10", "wl100",
                        "speed_degradation"}

    def grid(name):
        rows = out[name].strip().splitlines()[1:]
        table = {}
        for line in rows:
            load, k, d, mult, w = line.split(",")
            table[(float(load), int(k))] = float(w)
        return table

    lo, hi = grid("wl10"), grid("wl100")
    assert set(lo) == set(hi)
    for key in lo:
        assert hi[key] >= lo[key]
    wh_lo, wh_hi = grid("wh10"), grid("wh100")
    for key in wh_lo:
        assert wh_hi[key] >= wh_lo[key]


def test_sim_sweep_smoke_with_workers():
    plan = ExperimentPlan(seeds=(1,), loads=(0.3,), k_values=(2,),
                          d_values=(0.01,), speed_factors=(1.0, 0.5),
                          engine="sim", sim_cycles=40, workers=2,
                          mode=Mode.F4TELE)
    out = run_sweep(plan)
    speed = out["speed_degradation"].strip().splitlines()[1:]
    w = {float(l.split(",")[3]): float(l.split(",")[4]) for l in speed}
    assert w[0.5] > w[1.0] > 0.0
