"""Run the cmeta binary in JSON mode and validate each payload against its schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

TWO = "label,n11,n10,n01,n00\ns1,10,10,5,15\ns2,30,70,40,60\n"
ONE = "label,n11,n10,n01,n00\nonly,0,10,5,5\n"


def run(binary, *args):
    done = subprocess.run([binary, *args], capture_output=True, text=True)
    if done.returncode != 0:
        raise SystemExit(f"{' '.join(args)} exited {done.returncode}: {done.stderr}")
    return json.loads(done.stdout)


def main():
    binary, schema_dir = sys.argv[1], Path(sys.argv[2])
    schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    failures = 0
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        data = tmp / "data"
        data.mkdir()
        (data / "two.csv").write_text(TWO)
        (data / "one.csv").write_text(ONE)
        out = str(tmp / "out")
        cases = []
        for measure in ("rd", "rr", "or"):
            for path in ("two.csv", "one.csv"):
                cases.append(("analyze", ["analyze", str(data / path), "--measure", measure, "--output", "json"]))
        cases.append(("analyze", ["analyze", str(data / "two.csv"), "--model", "causal", "--weights", "uniform",
                                  "--output", "json"]))
        cases.append(("compare", ["compare", str(data), "--output", "json"]))
        cases.append(("mismatch", ["simulate", "--replications", "10", "--out-dir", out, "--output", "json"]))
        cases.append(("calibration", ["simulate", "--experiment", "calibrate", "--replications", "1000",
                                      "--out-dir", out, "--output", "json"]))
        cases.append(("dataset", ["simulate", "--experiment", "draw", "--out-dir", out, "--output", "json"]))
        for schema, args in cases:
            payload = run(binary, *args)
            try:
                jsonschema.validate(payload, schemas[schema])
                print(f"ok   {schema}: {' '.join(args[:1] + args[2:])}")
            except jsonschema.ValidationError as err:
                failures += 1
                print(f"FAIL {schema}: {' '.join(args)}: {err.message}")
        report = json.loads((tmp / "out" / "mismatch_report.json").read_text())
        jsonschema.validate(report, schemas["mismatch"])
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
