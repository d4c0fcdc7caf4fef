#!/usr/bin/env python3
"""End-to-end checks of the skem command-line tool.

Usage: check_cli.py /path/to/skem

Builds a small separable dataset, walks it through train / eval / cv /
sweep, and checks exit codes, outputs and the documented CLI contract
(config echo, machine-parseable errors, deterministic reruns).
"""

import json
import random
import subprocess
import sys
import tempfile
from pathlib import Path

failures = []


def check(condition, message):
    if not condition:
        failures.append(message)
        print(f"FAIL: {message}")
    else:
        print(f"  ok: {message}")


def run(binary, *args, expect_ok=True):
    result = subprocess.run([str(binary), *args], capture_output=True, text=True)
    if expect_ok and result.returncode != 0:
        failures.append(f"{' '.join(args)} exited {result.returncode}: {result.stderr}")
        print(f"FAIL: {' '.join(args)}\n{result.stdout}\n{result.stderr}")
    return result


def write_dataset(path, n, seed):
    rng = random.Random(seed)
    with open(path, "w") as f:
        for i in range(n):
            label = i % 2
            center = 2.0 if label else -2.0
            row = [f"{rng.gauss(center, 1.0):.6f}" for _ in range(4)]
            f.write(",".join(row + ["pos" if label else "neg"]) + "\n")


def main():
    binary = Path(sys.argv[1])
    work = Path(tempfile.mkdtemp(prefix="skem_cli_"))
    train_csv = work / "train.csv"
    test_csv = work / "test.csv"
    write_dataset(train_csv, 240, 11)
    write_dataset(test_csv, 60, 12)

    # train: table, config echo, bundle on disk
    model = work / "model.json"
    r = run(binary, "train", "--data", str(train_csv), "--test", str(test_csv),
            "--k", "3", "--passes", "6", "--seed", "7", "--standardize",
            "--out", str(model))
    check("# resolved configuration" in r.stdout, "train echoes its resolved config")
    check("log_likelihood" in r.stdout, "train prints the per-pass table")
    check(model.exists(), "train writes the model bundle")

    # deterministic rerun: byte-identical bundle
    model2 = work / "model2.json"
    run(binary, "train", "--data", str(train_csv), "--test", str(test_csv),
        "--k", "3", "--passes", "6", "--seed", "7", "--standardize",
        "--out", str(model2))
    check(model.read_bytes() == model2.read_bytes(),
          "re-running the same config reproduces the bundle byte for byte")

    # an explicit --blocks 1 changes nothing
    model3 = work / "model3.json"
    run(binary, "train", "--data", str(train_csv), "--test", str(test_csv),
        "--k", "3", "--passes", "6", "--seed", "7", "--standardize",
        "--blocks", "1", "--out", str(model3))
    check(model.read_bytes() == model3.read_bytes(),
          "--blocks 1 output is identical to the unpartitioned default")

    # eval: confusion matrix + JSON report, labels mapped through the bundle
    report = work / "report.json"
    r = run(binary, "eval", "--model", str(model), "--data", str(test_csv),
            "--out", str(report))
    check("accuracy" in r.stdout, "eval prints the accuracy")
    parsed = json.loads(report.read_text())
    check(parsed["accuracy"] > 0.9, "eval report carries a sensible accuracy")

    # partitioned train + eval round trip
    pmodel = work / "pmodel.json"
    run(binary, "train", "--data", str(train_csv), "--test", str(test_csv),
        "--k", "2", "--passes", "5", "--seed", "9", "--standardize",
        "--blocks", "2", "--scheme", "inter", "--out", str(pmodel))
    r = run(binary, "eval", "--model", str(pmodel), "--data", str(test_csv))
    check("accuracy" in r.stdout, "partitioned bundles evaluate")

    # cv: one row per (trial, fold) and a JSON report
    cv_json = work / "cv.json"
    r = run(binary, "cv", "--data", str(train_csv), "--k", "2", "--passes", "5",
            "--folds", "4", "--trials", "2", "--seed", "3", "--standardize",
            "--out", str(cv_json))
    check("mean accuracy" in r.stdout, "cv prints the summary line")
    parsed = json.loads(cv_json.read_text())
    check(len(parsed["folds"]) == 8, "cv report has folds x trials entries")

    # sweep: grid table with one row per arrangement, CSV output
    sweep_csv = work / "sweep.csv"
    r = run(binary, "sweep", "--data", str(train_csv), "--test", str(test_csv),
            "--k", "2", "--arrangement", "2x2", "--arrangement", "4x1",
            "--passes", "4", "--trials", "2", "--seed", "5", "--standardize",
            "--out", str(sweep_csv))
    lines = sweep_csv.read_text().strip().splitlines()
    check(len(lines) == 3 and lines[0].startswith("k,blocks"),
          "sweep CSV has a header and one row per arrangement")
    check("ops_total" in lines[0], "sweep table includes the op-count estimate")

    # failures: nonzero exit and a one-line machine-parseable reason
    r = run(binary, "train", "--data", str(work / "missing.csv"), expect_ok=False)
    check(r.returncode != 0, "missing dataset exits nonzero")
    check(r.stderr.startswith("error: "), "missing dataset reports 'error: ...'")

    bad_test = work / "bad_test.csv"
    bad_test.write_text("1.0,2.0,pos\n0.5,0.25,neg\n")
    r = run(binary, "eval", "--model", str(model), "--data", str(bad_test),
            expect_ok=False)
    check(r.returncode != 0 and "error: " in r.stderr,
          "dimension-mismatched test data is rejected with a clear error")

    empty = work / "empty.csv"
    empty.write_text("")
    r = run(binary, "eval", "--model", str(model), "--data", str(empty),
            expect_ok=False)
    check(r.returncode != 0, "empty test file is rejected")

    if failures:
        print(f"\n{len(failures)} CLI check(s) failed")
        return 1
    print("\nall CLI checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
