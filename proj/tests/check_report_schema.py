"""Runs urie pretrain, train and eval on a small config and validates both
reports against the committed schema."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema

SMALL = ["--classes", "3", "--n_per_class", "4", "--test_per_class", "4",
         "--pretrain_epochs", "2", "--epochs", "1", "--batch_size", "4"]


def run(cmd):
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.exit(f"{' '.join(cmd)} exited {proc.returncode}: {proc.stderr}")
    return proc.stdout


def main():
    urie, schema_path = sys.argv[1], sys.argv[2]
    schema = json.loads(Path(schema_path).read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        run([urie, "pretrain", *SMALL, "--out", str(tmp / "clf.ckpt")])
        run([urie, "train", *SMALL, "--clf", str(tmp / "clf.ckpt"), "--out", str(tmp / "urie.ckpt")])
        reports = {
            "identity": json.loads(run([urie, "eval", *SMALL, "--clf", str(tmp / "clf.ckpt")])),
        }
        run([urie, "eval", *SMALL, "--clf", str(tmp / "clf.ckpt"), "--model", str(tmp / "urie.ckpt"),
             "--report", str(tmp / "report.json")])
        reports["model"] = json.loads((tmp / "report.json").read_text())
    failed = False
    for name, report in reports.items():
        errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
        for e in errors:
            print(f"{name}: {'/'.join(map(str, e.path))}: {e.message}")
        failed = failed or bool(errors)
        splits = report["splits"]
        for split in splits.values():
            if split["delta"] != split["accuracy_with"] - split["accuracy_without"]:
                print(f"{name}: delta is not with - without")
                failed = True
    if reports["model"]["mac_count"] <= 0:
        print("model report lacks a mac count")
        failed = True
    print("FAIL" if failed else "schema ok")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
