import csv
import json
from pathlib import Path

import pytest

from episim.cli import build_parser, main

TINY_ENV = str(Path(__file__).parent / "data" / "tiny_env.yaml")


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", str(root / "s"), "--per-profile", "2", "--days", "7", "--seed", "1"]) == 0
    assert main(["mobility", str(root / "s" / "traces.csv"), str(root / "s" / "gazetteer.yaml"),
                 "-o", str(root / "records.csv")]) == 0
    assert main(["cluster", str(root / "records.csv"), "-o", str(root / "cl"),
                 "--participants", str(root / "s" / "participants.csv")]) == 0
    assert main(["fit", str(root / "records.csv"), "-o", str(root / "m"),
                 "--participants", str(root / "s" / "participants.csv"),
                 "--assignments", str(root / "cl" / "assignments.csv")]) == 0
    return root


def test_synth_outputs(pipeline):
    with open(pipeline / "s" / "participants.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {"participant_id", "occupation", "subclass"} <= set(rows[0])


def test_records_cover_every_minute(pipeline):
    with open(pipeline / "records.csv") as fh:
        rows = list(csv.DictReader(fh))
    per_day = {}
    for r in rows:
        key = (r["participant_id"], r["day"])
        per_day[key] = per_day.get(key, 0) + 1
    assert set(per_day.values()) == {1440}


def test_cluster_report(pipeline):
    report = json.loads((pipeline / "cl" / "report.json").read_text())
    assert "doctor" in report
    with open(pipeline / "cl" / "assignments.csv") as fh:
        assert {r["subclass"] for r in csv.DictReader(fh)} >= {"c0"}


def test_simulate_with_fitted_matrices(pipeline, tmp_path):
    with open(pipeline / "cl" / "assignments.csv") as fh:
        doctor_subs = sorted({r["subclass"] for r in csv.DictReader(fh) if r["occupation"] == "doctor"})
    sc = {
        "name": "fitted", "seed": 2, "days": 2, "environment": TINY_ENV,
        "matrices": str(pipeline / "m"),
        "population": {"classes": {"doctor": {"count": 12, "subclasses": {s: 1.0 for s in doctor_subs}},
                                   "homemaker": {"count": 8, "subclasses": {"c0": 1.0}}}},
        "seeding": {"infectious": 2},
    }
    path = tmp_path / "fitted.yaml"
    path.write_text(json.dumps(sc))
    assert main(["simulate", str(path), "-o", str(tmp_path / "out")]) == 0
    with open(tmp_path / "out" / "states.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if r["class"] == "all"]
    assert len(rows) == 2
    assert sum(int(v) for k, v in rows[-1].items() if k not in ("day", "class")) == 20


def test_simulate_missing_subclass_matrix_is_config_error(pipeline, tmp_path):
    sc = {"days": 1, "environment": TINY_ENV, "matrices": str(pipeline / "m"),
          "population": {"classes": {"doctor": {"count": 3, "subclasses": {"night_owl": 1.0}}}}}
    path = tmp_path / "bad.yaml"
    path.write_text(json.dumps(sc))
    assert main(["simulate", str(path), "-o", str(tmp_path / "out")]) == 2


def test_simulate_list(capsys):
    assert main(["simulate", "--list"]) == 0
    names = capsys.readouterr().out.split()
    assert "covid_uncontrolled" in names and "dengue_controlled" in names
    assert not any(n.startswith("_") for n in names)


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
