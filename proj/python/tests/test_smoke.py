import json
from pathlib import Path

import pytest

putback = pytest.importorskip("putback")

DATA = Path(__file__).resolve().parents[2] / "data"


def load(name, variant="a"):
    return putback.Program.load(DATA / "programs" / f"{name}.ust"), putback.Database.load(DATA / "db" / name / variant)


def test_get_joins_area():
    prog, db = load("peer1")
    cols, rows = putback.get(prog, db)
    assert cols == prog.view_columns(db)
    assert {r[cols.index("vehicle_id")]: r[cols.index("current_area")] for r in rows}["v1"] == "Tokyo"


def test_put_booking_and_tamper():
    prog, db = load("peer1", "b")
    booked = putback.put(prog, db, [{"vehicle_id": "v1", "current_area": "Tokyo", "request_id": "r9"}])
    assert booked
    assert booked.sources.rows("vehicles") == [("v1", "Kanda", "r9")]
    assert booked.sources.rows("area_map") == db.rows("area_map")

    tampered = putback.put(prog, db, [{"vehicle_id": "v1", "current_area": "Kyoto", "request_id": "r0"}])
    assert not tampered
    assert tampered.reason == "CheckFailed"
    assert tampered.sources is None


def test_get_put_round_trip():
    prog, db = load("peer2")
    cols, rows = putback.get(prog, db)
    result = putback.put(prog, db, rows)
    assert result.accepted and result.sources == db


def test_derived_sql_and_parse():
    prog, db = load("integrator")
    assert prog.derive_sql(db) == (DATA / "golden" / "integrator.sql").read_text()
    again = putback.Program.parse(prog.pretty())
    assert again.pretty() == prog.pretty()
    assert prog.view_name == "all_vehicles"


def test_errors_carry_codes():
    with pytest.raises(putback.PutbackError) as e:
        putback.Program.parse("UPDATE a, b IN SOURCE t WITH x IN VIEW v")
    assert e.value.code == "ArityMismatch"
    prog, db = load("peer1")
    with pytest.raises(putback.PutbackError):
        putback.put(prog, db, [("v1", "Tokyo")])
    with pytest.raises(TypeError):
        putback.put(prog, db, [("v1", 1.5, None)])


def test_checkers():
    prog, db = load("peer1")
    report = putback.check_roundtrip(prog, db, trials=50, seed=3)
    assert report["ok"] and report["accepted"] == 50

    kf, kdb = load("keyfree")
    assert kf.validate(kdb)[0][0] == "KeyNotCovered"
    bad = putback.check_roundtrip(kf, kdb, trials=50, seed=1, skip_validation=True)
    assert not bad["ok"] and bad["failures"][0]["law"] == "PutGet"
    validity = putback.check_validity(kf, kdb, DATA / "domains" / "keyfree.json", skip_validation=True)
    assert not validity["view_determination"]


def test_payments():
    db = putback.Database.load(DATA / "lineage" / "db")
    owners = json.loads((DATA / "lineage" / "owners.json").read_text())
    query = DATA / "lineage" / "query.json"
    assert putback.distribute_payment(query, db, 3000, "tuple", owners) == {"u1": 2100, "u2": 900}
    assert putback.distribute_payment(query, db, 3000, "lineage", owners) == {"u1": 2000, "u2": 1000}


def test_scenario_modes_agree():
    inc = putback.run_scenario(DATA / "scenarios" / "advanced.json")
    full = putback.run_scenario(DATA / "scenarios" / "advanced.json", full_recompute=True)
    assert inc == full
    assert inc["retried_bookings"] >= 1
    assert json.loads(inc["trace"][-1])["event"] == "final"
