"""When do hard labels help?  The correction-projection sign tells you.

An imperfect teacher mislabels part of the input space.  Mixing a small
share of ground-truth hard labels into the loss shifts each converged
student logit by a correction, and projecting those corrections onto the
part of the ground-truth direction the teacher misses gives a single
scalar: positive means hard labels rotate the student toward the oracle,
negative means the teacher is already better than what the labels add.
Sweeping the teacher's stopping epoch moves the projection from positive
(crude teacher) to negative (teacher sharper than hard labels can convey).
"""

import json

from ntkdistill.experiments import parse_config, run

config = {
    "experiment": "hard-label-effect",
    "seed": 29,
    "net": {"input_dim": 2, "hidden_layers": 2, "width": 128},
    "teacher_net": {"input_dim": 2, "hidden_layers": 2, "width": 64},
    "tasks": [{"kind": "mixture", "dim": 2, "modes": 6, "amplitude": 2.0, "seed": 11}],
    "teacher": {
        "epochs": 16384,
        "learning_rate": 0.01,
        "batch_size": 256,
        "seed": 5,
        "stop_epochs": [16, 256, 4096, 16384, 32768],
        "temperature": 2.0,
        "reduction": 0.3,
    },
    "oracle": {"epochs": 2000, "learning_rate": 0.01, "batch_size": 128,
               "final_learning_rate": 1e-4},
    "n_grid": [256],
    "repeats": 3,
    "out": "results",
}

path = "/tmp/hard_label_demo.json"
with open(path, "w") as fh:
    json.dump(config, fh)

print("Running the hard-label-effect experiment (a couple of minutes)...")
status, paths = run(path, out_dir="results")
print(f"exit status {status}; wrote {paths[0]}")

import csv

with open(paths[0]) as fh:
    rows = [r for r in csv.DictReader(fh) if r["value_name"] == "projection"]

epochs = sorted({int(r["epoch"]) for r in rows})
seeds = sorted({r["seed"] for r in rows})
print("\nCorrection projection by teacher stopping epoch (rows: student seed):")
print("  seed  " + "".join(f"{e:>10d}" for e in epochs))
for seed in seeds:
    vals = {int(r["epoch"]): float(r["value"]) for r in rows if r["seed"] == seed}
    print(f"  {seed:>4s}  " + "".join(f"{vals[e]:+10.1f}" for e in epochs))
print("\nEarly-stopped teachers leave room for hard labels (large positive")
print("values); as the teacher sharpens, the projection collapses by orders")
print("of magnitude and crosses into negative territory once the teacher")
print("outperforms what hard labels alone can teach (the acceptance suite")
print("asserts the crossing over five student seeds).")
