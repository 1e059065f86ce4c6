"""The on-disk story: binary embeddings, a diff-able mean, a guard.

Embedding matrices go to a small binary format (float32 rows plus a
JSONL id sidecar), mean estimates to readable JSON with 9-digit
floats.  Readers reject anything malformed instead of repairing it,
and evaluation refuses a mean whose corpus fingerprint matches the
evaluation data.
"""

import json
import tempfile
from pathlib import Path

import numpy as np

from embrenorm import (
    RenormMethod,
    SynthConfig,
    estimate_bias,
    generate,
    matrix_fingerprint,
    run_task,
)
from embrenorm.errors import LeakageDetected, NormMismatch
from embrenorm.store import (
    read_bias,
    read_embeddings,
    write_bias,
    write_embeddings,
)

workdir = Path(tempfile.mkdtemp(prefix="formats-demo-"))
bundle = generate(SynthConfig(dim=32, num_clusters=2, items_per_cluster=8, bias_norm=0.5, seed=2))
matrix = bundle.biased_items

emb = workdir / "items.emb"
write_embeddings(matrix, str(emb))
back = read_embeddings(str(emb))
print(f"wrote {emb.stat().st_size} bytes + id sidecar; round-trip bitwise:",
      np.array_equal(back.rows, matrix.rows))

bias = estimate_bias(matrix, matrix_fingerprint(matrix), model_id="demo")
mu_path = workdir / "mu.json"
write_bias(bias, str(mu_path))
print("\nmean estimate on disk:")
doc = json.loads(mu_path.read_text())
print(json.dumps({k: doc[k] for k in ("modelId", "dim", "count", "norm")}, indent=2))

# Readers validate before trusting anything.
doc["norm"] = 0.123
(workdir / "tampered.json").write_text(json.dumps(doc))
try:
    read_bias(str(workdir / "tampered.json"))
except NormMismatch as err:
    print(f"\ntampered norm field rejected: {err}")

# And the evaluation layer checks provenance, not just shape: this
# mean was estimated from the very matrix the task evaluates.
try:
    run_task(bundle.biased_dataset, bias, RenormMethod.R2)
except LeakageDetected as err:
    print(f"leakage guard fired: {err}")
