"""End-to-end checks of the putback command-line tool.

Usage: cli_test.py <putback binary> <data dir>
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

BIN, DATA = sys.argv[1], Path(sys.argv[2])
failures = []


def run(*args):
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)


def check(name, cond, proc=None):
    if cond:
        print(f"ok   {name}")
        return
    print(f"FAIL {name}")
    if proc is not None:
        print(f"  exit {proc.returncode}\n  stdout: {proc.stdout[:500]}\n  stderr: {proc.stderr[:500]}")
    failures.append(name)


for p in ("peer1", "peer2", "integrator"):
    r = run("derive", DATA / "programs" / f"{p}.ust", "--db", DATA / "db" / p / "a")
    check(f"derive {p} matches golden", r.returncode == 0 and r.stdout == (DATA / "golden" / f"{p}.sql").read_text(), r)

r = run("derive", DATA / "programs" / "peer2.ust")
check("derive without a database", r.returncode == 0 and "UNION" in r.stdout, r)

r = run("get", "--db", DATA / "db" / "peer1" / "a", "--program", DATA / "programs" / "peer1.ust")
lines = r.stdout.strip().splitlines()
check("get prints the view as csv", r.returncode == 0 and lines[0].split(",")[0] == "vehicle_id" and len(lines) > 1, r)

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "out"
    args = ["--db", DATA / "db" / "peer1" / "b", "--program", DATA / "programs" / "peer1.ust", "--out", out]
    r = run("put", *args, "--view", DATA / "views" / "peer1_booked.csv")
    check("put writes updated sources", r.returncode == 0 and "v1,Kanda,r9" in (out / "vehicles.csv").read_text(), r)

    r = run("put", *args, "--view", DATA / "views" / "peer1_tampered.csv")
    check("tampered put is rejected", r.returncode == 1 and "CheckFailed" in r.stderr, r)
    r = run("--json", "put", *args, "--view", DATA / "views" / "peer1_tampered.csv")
    err = json.loads(r.stdout or r.stderr)
    check("json rejection names the branch", r.returncode == 1 and err["error"] == "CheckFailed" and len(err["path"]) == 3, r)

    r = run("put", "--db", DATA / "db" / "peer1" / "b", "--program", DATA / "programs" / "peer1.ust",
            "--view", DATA / "views" / "peer1_booked.csv", "--out", DATA / "db" / "peer1" / "b")
    check("put refuses to overwrite its input", r.returncode == 2, r)

lineage = ["lineage", "--query", DATA / "lineage" / "query.json", "--db", DATA / "lineage" / "db",
           "--total", "30", "--owners", DATA / "lineage" / "owners.json"]
r = run(*lineage, "--policy", "tuple")
check("per-tuple payment", r.returncode == 0 and json.loads(r.stdout) == {"u1": 21, "u2": 9}, r)
r = run(*lineage, "--policy", "lineage")
check("per-lineage payment", r.returncode == 0 and json.loads(r.stdout) == {"u1": 20, "u2": 10}, r)

r = run("check", "roundtrip", "--program", DATA / "programs" / "peer2.ust", "--db", DATA / "db" / "peer2" / "a",
        "--seed", "4", "--trials", "50")
check("roundtrip holds for peer2", r.returncode == 0, r)
keyfree = ["--program", DATA / "programs" / "keyfree.ust", "--db", DATA / "db" / "keyfree" / "a"]
r = run("check", "roundtrip", *keyfree, "--seed", "1")
check("validator refuses the key-free program", r.returncode == 1 and "KeyNotCovered" in r.stderr, r)
r = run("check", "roundtrip", *keyfree, "--seed", "1", "--skip-validation")
check("key-free program breaks PutGet", r.returncode == 1 and "PutGet" in r.stdout, r)
r = run("check", "validity", *keyfree, "--domain", DATA / "domains" / "keyfree.json", "--skip-validation")
check("key-free program breaks ViewDetermination", r.returncode == 1 and "ViewDetermination" in r.stdout + r.stderr, r)
r = run("check", "validity", "--program", DATA / "programs" / "peer1.ust", "--db", DATA / "db" / "peer1" / "a",
        "--domain", DATA / "domains" / "peer1.json")
check("peer1 is valid", r.returncode == 0 and "ViewDetermination: holds" in r.stdout, r)

with tempfile.TemporaryDirectory() as tmp:
    inc, full = Path(tmp) / "inc.jsonl", Path(tmp) / "full.jsonl"
    r = run("sim", "--scenario", DATA / "scenarios" / "advanced.json", "--trace", inc)
    check("advanced scenario runs", r.returncode == 0 and inc.exists(), r)
    r = run("sim", "--scenario", DATA / "scenarios" / "advanced.json", "--trace", full, "--full-recompute")
    check("full recompute gives the same trace", r.returncode == 0 and inc.read_text() == full.read_text(), r)
    events = [json.loads(line) for line in inc.read_text().splitlines()]
    check("trace starts and ends with digests", events[0]["event"] == "initial" and events[-1]["event"] == "final")

r = run("sim", "--scenario", DATA / "scenarios" / "missing.json")
check("missing scenario is an error", r.returncode == 1, r)
r = run("frobnicate")
check("unknown subcommand is a usage error", r.returncode == 2, r)
r = run("put", "--db", DATA / "db" / "peer1" / "a")
check("missing options are a usage error", r.returncode == 2, r)

print(f"{len(failures)} failed")
sys.exit(1 if failures else 0)
