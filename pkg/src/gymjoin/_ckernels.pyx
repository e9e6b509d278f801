# cython: language_level=3
"""Compiled twins of the functions in ``_kernels_py``."""

ctypedef unsigned long long u64

cdef u64 MASK = 0xFFFFFFFFFFFFFFFF


cdef inline u64 _mix(u64 z):
    z = z + <u64>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline u64 _row_hash(tuple row, u64 seed):
    cdef u64 h = _mix(seed)
    cdef Py_ssize_t i, n = len(row)
    for i in range(n):
        h = _mix(h ^ <u64>(row[i] & MASK))
    return _mix(h ^ <u64>n)


def row_hash(tuple row, seed):
    return _row_hash(row, <u64>(seed & MASK))


def bucket_rows(list rows, seed, nbuckets):
    cdef u64 s = <u64>(seed & MASK)
    cdef u64 nb = <u64>nbuckets
    cdef list out = []
    cdef tuple r
    for r in rows:
        out.append(_row_hash(r, s) % nb)
    return out


cdef inline tuple _pick(tuple row, tuple idx):
    cdef Py_ssize_t i, n = len(idx)
    cdef list vals = [None] * n
    for i in range(n):
        vals[i] = row[<Py_ssize_t>idx[i]]
    return tuple(vals)


def project(list rows, idx):
    cdef tuple ix = tuple(idx)
    cdef tuple r
    return [_pick(r, ix) for r in rows]


def hash_join(list left, list right, lkey, rkey, rrest):
    cdef tuple lk = tuple(lkey), rk = tuple(rkey), rr = tuple(rrest)
    cdef dict table = {}
    cdef tuple r, k, ext
    cdef list bucket, out = []
    for r in right:
        k = _pick(r, rk)
        ext = _pick(r, rr)
        bucket = table.get(k)
        if bucket is None:
            table[k] = [ext]
        else:
            bucket.append(ext)
    for r in left:
        bucket = table.get(_pick(r, lk))
        if bucket is not None:
            for ext in bucket:
                out.append(r + ext)
    return out


def semijoin(list left, lkey, list right, rkey):
    cdef tuple lk = tuple(lkey), rk = tuple(rkey)
    cdef set keys = set()
    cdef tuple r
    for r in right:
        keys.add(_pick(r, rk))
    return [r for r in left if _pick(r, lk) in keys]
