"""Runs a small pipeline with the CLI and validates its JSON reports against schemas/."""
import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema

cli, schema_dir = str(pathlib.Path(sys.argv[1]).resolve()), pathlib.Path(sys.argv[2])

with tempfile.TemporaryDirectory() as tmp:
    work = pathlib.Path(tmp)
    (work / "small.conf").write_text(
        "seed = 3\nsynth.patients = 60\ntrain.hidden_sizes = 16\ntrain.max_iterations = 200\n"
        "train.validation_eval_period = 50\ntrain.minibatch_size = 32\neval.importance_repeats = 1\n"
    )
    subprocess.run([cli, "run", "-q", "-c", "small.conf"], cwd=work, check=True)
    for report, schema in [("eval_report.json", "eval_report.schema.json"),
                           ("train_report.json", "train_report.schema.json")]:
        doc = json.loads((work / "reports" / report).read_text())
        jsonschema.validate(doc, json.loads((schema_dir / schema).read_text()),
                            cls=jsonschema.Draft202012Validator)
        print(f"{report}: valid")
