"""A first look at mean-bias removal.

Embedding models leave a shared offset in every vector they produce:
average enough of them and the mean does not shrink toward zero.  Both
removal rules start from an estimate mu of that offset; R1 subtracts
the whole vector, R2 removes only the component along mu's direction.
"""

import numpy as np

from embrenorm import (
    BiasEstimate,
    EmbeddingMatrix,
    MeanAccumulator,
    RenormMethod,
    apply_matrix,
    renormalize_r1,
    renormalize_r2,
)

# The 2D worked example: one embedding, a small horizontal offset.
e = np.array([0.6, 0.8])
mu = np.array([0.2, 0.0])
bias = BiasEstimate(mu=mu, sample_count=1000, corpus_fingerprint="0" * 64, model_id="toy")

r1 = renormalize_r1(e, bias)
r2 = renormalize_r2(e, bias)
print("e          ", e)
print("R1(e)      ", np.round(r1, 6), "  subtract mu, rescale")
print("R2(e)      ", np.round(r2, 6), "  drop the mu-direction component")
print("R2 . mu_hat", float(r2 @ (mu / np.linalg.norm(mu))), " (orthogonal by construction)")
print()

# Now at realistic scale: 2,000 unit vectors pushed toward a common
# direction, the way real models do it.
rng = np.random.default_rng(7)
dim = 256
offset = 0.35 * (lambda v: v / np.linalg.norm(v))(rng.normal(size=dim))
signals = rng.normal(size=(2000, dim))
signals /= np.linalg.norm(signals, axis=1, keepdims=True)
rows = signals + offset
rows /= np.linalg.norm(rows, axis=1, keepdims=True)
matrix = EmbeddingMatrix(rows.astype(np.float32), tuple(f"s{i:04d}" for i in range(2000)))

acc = MeanAccumulator(dim)
acc.absorb_matrix(matrix)
est = acc.finalize(corpus_fingerprint="1" * 64, model_id="sim")
print(f"injected offset norm  {np.linalg.norm(offset):.4f}")
print(f"estimated mean norm   {est.norm:.4f}   (normalization shrinks it a little)")

fixed, dropped = apply_matrix(matrix, est, RenormMethod.R2)
projections = fixed.rows.astype(np.float64) @ (est.mu / np.linalg.norm(est.mu))
print(f"after R2: max |projection on mu_hat| = {np.abs(projections).max():.2e}")
print(f"dropped rows: {len(dropped)}")

# Mean cosine between random pairs, before and after: the shared
# offset inflates similarity; removing it restores contrast.
idx = rng.integers(0, 2000, size=(4000, 2))
before = (matrix.rows[idx[:, 0]] * matrix.rows[idx[:, 1]]).sum(axis=1).mean()
after = (fixed.rows[idx[:, 0]] * fixed.rows[idx[:, 1]]).sum(axis=1).mean()
print(f"mean pairwise cosine  {before:.4f} -> {after:.4f}")
