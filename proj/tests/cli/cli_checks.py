"""End-to-end checks of the heun executable: schema conformance, thread
determinism, lossless round trip of numbers, config files, cache and exit
codes."""

import json
import math
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

HEUN = sys.argv[1]
SCHEMA = json.loads(Path(sys.argv[2]).read_text())
CHECK = sys.argv[3]

SMALL_SCAN = ["scan-torus", "--tau", "0,1", "--alpha", "0.9,0.9,0.9,0.9", "--grid", "8",
              "--region", "-0.5,0.5,-0.5,0.5"]


def run(args, expect=0):
    proc = subprocess.run([HEUN, *args], capture_output=True, text=True)
    if proc.returncode != expect:
        sys.exit(f"{args}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return proc


def record(args):
    return json.loads(run(args).stdout)


def validate(rec):
    jsonschema.validate(rec, SCHEMA, cls=jsonschema.Draft202012Validator)


def check_schema():
    records = [
        record(SMALL_SCAN),
        record(["scan-torus", "--tau", "0,1", "--k", "0,0,0,0", "--region", "-30,30,-30,30",
                "--grid", "32"]),
        record(["real-scan", "--t", "-1", "--alpha", "0.9,0.9,0.9,0.9", "--q-range", "-5,5",
                "--samples", "32"]),
        record(["hill", "--tau", "0,1", "--k", "0,0,0,0", "--lambda", "4,0", "--format", "json"]),
        record(["wp", "--tau", "0,1", "--z", "0.3,0.2", "--format", "json"]),
        record(["sphere-monodromy", "--alpha", "0.6,0.7,0.8,0.9", "--q", "0.1,0"]),
    ]
    for rec in records:
        validate(rec)
    assert records[0]["solutions"], "small scan should find lambda = 0"
    assert records[1]["solutions"] == [], "k = 0 admits no unitarizable lambda"
    assert records[2]["roots"], "real scan should find the root near q = 0"
    # A broken record must be rejected.
    bad = json.loads(json.dumps(records[0]))
    bad["solutions"][0]["lambda"] = "0+0i"
    try:
        validate(bad)
    except jsonschema.ValidationError:
        pass
    else:
        sys.exit("schema accepted a string-encoded complex number")


def strip_runtime(text):
    rec = json.loads(text)
    rec.pop("runtime")
    return json.dumps(rec, sort_keys=True)


def check_determinism():
    args = ["scan-torus", "--tau", "0,1", "--alpha", "0.9,0.9,0.9,0.9", "--grid", "16",
            "--region", "-3,3,-1,1"]
    one = run(args + ["--threads", "1"]).stdout
    eight = run(args + ["--threads", "8"]).stdout
    assert strip_runtime(one) == strip_runtime(eight), "thread count changed the record"
    # Apart from the runtime block the two outputs are byte-identical.
    drop = lambda t: "\n".join(l for l in t.splitlines() if "wall_time_s" not in l and '"threads"' not in l)
    assert drop(one) == drop(eight)


def check_roundtrip():
    text = run(SMALL_SCAN).stdout
    rec = json.loads(text)
    assert json.dumps(rec, indent=2, sort_keys=True) + "\n" == text, "re-serialization differs"
    csv = run(SMALL_SCAN + ["--format", "csv"]).stdout.splitlines()
    assert csv[0].startswith("lambda_re,lambda_im,defect")
    sol = rec["solutions"][0]
    fields = csv[1].split(",")
    from_json = [*sol["lambda"], sol["defect"], *sol["traces"][0], *sol["traces"][1],
                 *sol["certificate"]["H"]]
    for a, b in zip(from_json, fields[:11]):
        assert float(b) == a, f"{b} does not round-trip to {a!r}"
    hill = run(["hill", "--tau", "0,1", "--k", "0,0,0,0", "--lambda", "4,0"]).stdout.split()
    assert hill[0] == "tr_T1" and abs(float(hill[1]) - 2 * math.cosh(2)) < 1e-8
    assert len(hill[1].replace("-", "").replace(".", "").lstrip("0")) == 17


def check_config_and_cache():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "scan.ini"
        cfg.write_text("tau = 0,1\nalpha = 0.9,0.9,0.9,0.9\ngrid = 12\nregion = -0.5,0.5,-0.5,0.5\n")
        via_file = record(["scan-torus", "--config", str(cfg), "--grid", "8"])
        direct = record(SMALL_SCAN)
        for rec in (via_file, direct):
            rec.pop("runtime")
        assert via_file == direct, "config file plus explicit flag differs from flags alone"
        cache = Path(tmp) / "cache"
        first = run(SMALL_SCAN + ["--cache", str(cache)])
        second = run(SMALL_SCAN + ["--cache", str(cache)])
        assert "cache store" in first.stderr and "cache hit" in second.stderr
        assert first.stdout == second.stdout


def check_exit_codes():
    proc = run(["scan-torus", "--tau", "0,1", "--region", "-1,1,-1,1"], expect=2)
    assert "exactly one of --alpha/--k" in proc.stderr
    run(["scan-torus", "--tau", "0,1", "--alpha", "0.9,0.9,0.9,0.9", "--k", "1,1,1,1"], expect=2)
    run(["scan-torus", "--tau", "0,1", "--k", "0,0,0,0", "--region", "1,0,0,1"], expect=2)
    run(["hill", "--tau", "0,1", "--k", "0,0,0,0", "--lambda", "abc"], expect=2)
    run(["hill", "--tau", "0,1", "--k", "0,0,0,0", "--bogus"], expect=2)
    run(["hill", "--tau", "0,1", "--k", "0,0,0,0", "--lambda", "1e7,0"], expect=3)


{
    "schema": check_schema,
    "determinism": check_determinism,
    "roundtrip": check_roundtrip,
    "config": check_config_and_cache,
    "exit-codes": check_exit_codes,
}[CHECK]()
print(f"{CHECK}: ok")
