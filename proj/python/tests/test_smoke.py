import csv
import json
import os
import random
import subprocess

import pytest

import robinf

CLI = os.environ.get("ROBINF_CLI")


def two_groups(seed=3):
    rng = random.Random(seed)
    d = [1] * 12 + [0] * 30
    y = [rng.gauss(1.0, 3.0) if t else rng.gauss(0.0, 0.5) for t in d]
    return {"y": y, "d": d}


def write_csv(path, table):
    cols = list(table)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def run_cli(tmp_path, config):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(config))
    out = subprocess.run([CLI, "analyze", "--config", str(cfg)], capture_output=True, text=True)
    return out.returncode, out.stdout


def test_unequal_variances_matches_cli(tmp_path):
    table = two_groups()
    write_csv(tmp_path / "data.csv", table)
    config = {"input": str(tmp_path / "data.csv"), "outcome": "y", "treatment": "d", "vcov": "bm"}
    from_table = robinf.analyze(config, table)
    from_file = robinf.analyze(config)
    assert from_table == from_file
    coef = from_table["analyses"][0]["coefficients"][1]
    assert coef["name"] == "d"
    assert 11.0 < coef["dof"] < 41.0
    if CLI:
        code, text = run_cli(tmp_path, config)
        assert code == 0
        assert json.loads(text) == from_table


def test_seeded_ri_is_reproducible(tmp_path):
    table = two_groups(5)
    write_csv(tmp_path / "data.csv", table)
    config = {
        "input": str(tmp_path / "data.csv"),
        "outcome": "y",
        "treatment": "d",
        "resample": {"scheme": "ri", "replications": 2000, "seed": 17},
    }
    a = robinf.analyze(config, table)
    b = robinf.ri(table, "y", "d", replications=2000, seed=17, workers=2)
    assert a["analyses"][0]["resampling"] == b["analyses"][0]["resampling"]
    assert 0.0 < a["analyses"][0]["resampling"]["ri_p_value"] <= 1.0
    if CLI:
        code, text = run_cli(tmp_path, config)
        assert code == 0
        assert json.loads(text) == a


def test_empty_table_is_a_data_error():
    with pytest.raises(robinf.RobinfError) as err:
        robinf.fit({"y": [], "x": []}, "y", ["x"])
    assert err.value.exit_code == 3
    assert err.value.code == "EmptyAfterFiltering"


def test_missing_seed_is_a_config_error():
    with pytest.raises(robinf.RobinfError) as err:
        robinf.bootstrap(two_groups(), "y", treatment="d")
    assert err.value.exit_code == 2


def test_direct_adjustment():
    res = robinf.adjust([0.01, 0.02, 0.04, 0.30], method="bh")
    assert [r["rejected"] for r in res] == [True, True, False, False]
    assert res[0]["adjusted_p"] == pytest.approx(0.04)
    holm = robinf.adjust([0.01, 0.04], method="holm")
    assert [r["adjusted_p"] for r in holm] == pytest.approx([0.02, 0.04])


def test_missing_values_become_blank():
    table = two_groups()
    table["y"][0] = None
    table["y"][1] = float("nan")
    report = robinf.fit(table, "y", treatment="d")
    assert report["analyses"][0]["dropped_rows"] == 2
