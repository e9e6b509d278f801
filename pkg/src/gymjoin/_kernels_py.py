"""Pure-Python relational kernels.

Reference implementation of the hot loops. ``_ckernels.pyx`` mirrors every
function here with identical results; ``gymjoin.kernels`` picks one at import.
"""

MASK64 = 0xFFFFFFFFFFFFFFFF


def _mix(z):
    # splitmix64 finalizer
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def row_hash(row, seed):
    h = _mix(seed & MASK64)
    for v in row:
        h = _mix(h ^ (v & MASK64))
    return _mix(h ^ len(row))


def bucket_rows(rows, seed, nbuckets):
    return [row_hash(r, seed) % nbuckets for r in rows]


def project(rows, idx):
    return [tuple([r[i] for i in idx]) for r in rows]


def hash_join(left, right, lkey, rkey, rrest):
    """Join two row lists on positional keys; output is ``left + right[rrest]``."""
    table = {}
    for r in right:
        k = tuple([r[i] for i in rkey])
        ext = tuple([r[i] for i in rrest])
        bucket = table.get(k)
        if bucket is None:
            table[k] = [ext]
        else:
            bucket.append(ext)
    out = []
    for row in left:
        bucket = table.get(tuple([row[i] for i in lkey]))
        if bucket is not None:
            for ext in bucket:
                out.append(row + ext)
    return out


def semijoin(left, lkey, right, rkey):
    keys = {tuple([r[i] for i in rkey]) for r in right}
    return [row for row in left if tuple([row[i] for i in lkey]) in keys]
