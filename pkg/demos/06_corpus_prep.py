"""Preparing a sentence sample worth estimating a mean from.

The mean only deserves trust when it comes from a broad, deduplicated
sample.  This pipeline segments raw text, filters by length in code
points, drops repeats, and reservoir-samples a fixed-size subset that
is reproducible from the seed alone.
"""

from embrenorm import sample, segment, text_fingerprint

raw = """
Machine translation quality has improved steadily. The same sentence
appears twice in this corpus. The same sentence appears twice in this
corpus. Short one. Numbers like 3.14 should not split a sentence!
Does segmentation handle questions? It should. A sentence needs some
length before the filter keeps it around for estimation purposes.
"""

sentences = segment(raw)
print(f"{len(sentences)} sentences after segmentation:")
for s in sentences:
    print(f"  [{len(s):3d} chars] {s[:60]}{'...' if len(s) > 60 else ''}")
print()

result = sample(sentences, size=3, min_len=20, max_len=200, seed=4, source="inline-demo")
print(f"kept {result.raw_count} raw -> {len(result.sentences)} sampled (size cap 3):")
for s in result.sentences:
    print(f"  - {s}")
print()
print(f"fingerprint {result.fingerprint[:16]}...  (order-independent over the sample)")

again = sample(sentences, size=3, min_len=20, max_len=200, seed=4, source="inline-demo")
print("same seed, same sample:", result.sentences == again.sentences)

fp_direct = text_fingerprint(result.sentences)
print("fingerprint matches direct computation:", fp_direct == result.fingerprint)
