"""Shared straight-line math for the reference scripts.

These scripts are the source of the golden literals embedded in the C++
tests. They implement each formula directly on Python lists, mirroring the
engine's summation order so values agree to near machine precision.
"""

import math


def patt(rows, cols, a, b, c, m, s):
    """Deterministic dyadic-rational fill; exact in binary floating point."""
    return [[((a * i + b * j + c) % m - m // 2) / s for j in range(cols)] for i in range(rows)]


def patt1(n, a, c, m, s):
    return [((a * i + c) % m - m // 2) / s for i in range(n)]


def zeros(r, c):
    return [[0.0] * c for _ in range(r)]


def matmul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    out = zeros(n, m)
    for i in range(n):
        for p in range(k):
            a = A[i][p]
            if a == 0.0:
                continue
            for j in range(m):
                out[i][j] += a * B[p][j]
    return out


def transpose(A):
    return [[A[i][j] for i in range(len(A))] for j in range(len(A[0]))]


def add(A, B):
    return [[A[i][j] + B[i][j] for j in range(len(A[0]))] for i in range(len(A))]


def emap(A, f):
    return [[f(v) for v in row] for row in A]


def norm_row(row):
    s = 0.0
    for v in row:
        s += v * v
    return math.sqrt(s)


def squash_rows(A):
    out = []
    for row in A:
        n = norm_row(row)
        factor = n / (n * n + 1.0)
        out.append([v * factor for v in row])
    return out


def softmax_rows(A):
    out = []
    for row in A:
        mx = max(row)
        es = [math.exp(v - mx) for v in row]
        denom = 0.0
        for e in es:
            denom += e
        out.append([e / denom for e in es])
    return out


def normalize_adjacency(A):
    n = len(A)
    deg = []
    for i in range(n):
        d = 0.0
        for j in range(n):
            d += A[i][j]
        deg.append(d + 1.0)
    dinv = [1.0 / math.sqrt(d) for d in deg]
    out = zeros(n, n)
    for i in range(n):
        for j in range(n):
            out[i][j] = ((A[i][j] + (1.0 if i == j else 0.0)) * dinv[i]) * dinv[j]
    return out


def col_mean(A):
    n = len(A)
    inv = 1.0 / n
    out = [0.0] * len(A[0])
    for row in A:
        for j, v in enumerate(row):
            out[j] += v
    return [v * inv for v in out]


def route(votes, R):
    """votes[j] is the (N x d) vote block for whole j. Returns (u, c, b, trace)."""
    J = len(votes)
    N = len(votes[0])
    d = len(votes[0][0])
    b = zeros(N, J)
    trace = []
    c = u = None
    for _ in range(R):
        c = softmax_rows(b)
        u = []
        for j in range(J):
            s = [0.0] * d
            for i in range(N):
                for q in range(d):
                    s[q] += c[i][j] * votes[j][i][q]
            u.append(squash_rows([s])[0])
        for j in range(J):
            for i in range(N):
                dot = 0.0
                for q in range(d):
                    dot += votes[j][i][q] * u[j][q]
                b[i][j] += dot
        trace.append(([r[:] for r in c], [r[:] for r in u], [r[:] for r in b]))
    return u, c, b, trace


def margin_loss(class_caps, label, m_plus=0.9, m_minus=0.1, lam=0.5):
    total = 0.0
    for o, row in enumerate(class_caps):
        length = norm_row(row)
        present = max(0.0, (-length) + m_plus) ** 2
        absent = max(0.0, length + (-m_minus)) ** 2
        t = 1.0 if o == label else 0.0
        total += t * present + lam * ((1.0 - t) * absent)
    return total


def masked_embed(primary, class_caps, label, W_r, b_r):
    O, d = len(class_caps), len(class_caps[0])
    flat = [[class_caps[o][q] if o == label else 0.0 for o in range(O) for q in range(d)]]
    corr = matmul(flat, W_r)[0]
    corr = [corr[j] + b_r[j] for j in range(len(b_r))]
    return [[row[j] + corr[j] for j in range(len(corr))] for row in primary]


def recon_loss(A, Z):
    n = len(A)
    logits = matmul(Z, transpose(Z))
    total = 0.0
    for i in range(n):
        for j in range(n):
            p = 1.0 / (1.0 + math.exp(-logits[i][j]))
            p = min(max(p, 1e-7), 1.0 - 1e-7)
            total += A[i][j] * math.log(p) + (1.0 - A[i][j]) * math.log((-p) + 1.0)
    return total * (-1.0 / (n * n))


def dump(name, value):
    if isinstance(value, float):
        print(f"{name} = {value!r}")
    elif isinstance(value[0], float):
        print(f"{name} = {{{', '.join(repr(v) for v in value)}}}")
    else:
        rows = ",\n    ".join("{" + ", ".join(repr(v) for v in row) + "}" for row in value)
        print(f"{name} = {{\n    {rows}}}")
