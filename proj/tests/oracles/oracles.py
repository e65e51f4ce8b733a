"""Independent reference values for the unit tests.

Geometry and nu1 in 50-digit arithmetic (mpmath), Green functions and
hitting probabilities from a sparse LU solve on a large box (scipy).
"""
import sys

import mpmath as mp
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl

mp.mp.dps = 50


def load(path):
    model, cur = {}, None
    for line in open(path):
        line = line.split("#")[0].strip()
        if not line:
            continue
        if line.startswith("["):
            cur = line.strip("[]")
            model[cur] = {}
            continue
        a, b, w = line.split()
        model[cur][(int(a), int(b))] = mp.mpf(w)
    return model


def gf(meas, x, y):
    return sum(w * mp.mpf(x) ** a * mp.mpf(y) ** b for (a, b), w in meas.items())


def y_roots(m, x):
    # P(x, y) = 1 as a quadratic in y for jumps with dy in {-1, 0, 1}
    c = [mp.mpf(0)] * 3
    for (a, b), w in m["mu"].items():
        c[b + 1] += w * mp.mpf(x) ** a
    c[1] -= 1
    d = c[1] ** 2 - 4 * c[2] * c[0]
    r = [(-c[1] - mp.sqrt(d)) / (2 * c[2]), (-c[1] + mp.sqrt(d)) / (2 * c[2])]
    return sorted(r)


def disc(m, x):
    c = [mp.mpf(0)] * 3
    for (a, b), w in m["mu"].items():
        c[b + 1] += w * mp.mpf(x) ** a
    c[1] -= 1
    return c[1] ** 2 - 4 * c[2] * c[0]


def bisect(f, lo, hi):
    flo = f(lo)
    for _ in range(170):
        mid = (lo + hi) / 2
        if (f(mid) > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return lo


def geometry(m):
    xP2 = bisect(lambda x: disc(m, x), mp.mpf("1.15"), mp.mpf("1.3"))
    xs2 = bisect(lambda x: gf(m["mu1"], x, y_roots(m, x)[0]) - 1, mp.mpf("1.05"), xP2)
    return xP2, xs2


def green(m, j, N):
    """g(j, .) on [0, N]^2, chain killed at the origin and on leaving the box."""
    idx = lambda k1, k2: k2 * (N + 1) + k1
    n = (N + 1) ** 2
    rows, cols, vals = [], [], []
    for k2 in range(N + 1):
        for k1 in range(N + 1):
            if k1 == 0 and k2 == 0:
                meas = m["mu0"]
            elif k2 == 0:
                meas = m["mu1"]
            elif k1 == 0:
                meas = m["mu2"]
            else:
                meas = m["mu"]
            for (a, b), w in meas.items():
                t1, t2 = k1 + a, k2 + b
                if 0 <= t1 <= N and 0 <= t2 <= N and not (t1 == 0 and t2 == 0):
                    rows.append(idx(k1, k2))
                    cols.append(idx(t1, t2))
                    vals.append(float(w))
    Pm = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A = (sp.identity(n, format="csc") - Pm.T).tocsc()
    e = np.zeros(n)
    e[idx(*j)] = 1.0
    g = spl.spsolve(A, e).reshape(N + 1, N + 1)  # g[k2, k1], visits before absorption
    # the start counts as a visit except at the origin
    if j == (0, 0):
        g[0, 0] = 0.0
    return g


def hit(m, g, N):
    """P_j(return to 0) = sum_k g(j,k) P(k -> 0)."""
    s = 0.0
    for (k1, k2) in [(1, 0), (0, 1), (1, 1)]:
        if k1 == 0 and k2 == 0:
            continue
        meas = m["mu1"] if k2 == 0 else m["mu2"] if k1 == 0 else m["mu"]
        s += g[k2, k1] * float(meas.get((-k1, -k2), 0))
    return s


def main(data):
    m0 = load(f"{data}/m_r0.model")
    xP2, xs2 = geometry(m0)
    print("m_r0 x**_P", mp.nstr(xP2, 17), "x**", mp.nstr(xs2, 17))
    print("m_r0 Y1(1.1)", mp.nstr(y_roots(m0, 1.1)[0], 17), "Y2(1.1)", mp.nstr(y_roots(m0, 1.1)[1], 17))
    # W0 edges of the symmetric model: u of the log-gradient at (x_d, Y2(x_d)) and its mirror
    y2 = y_roots(m0, xs2)[1]
    gx = sum(w * a * xs2 ** a * y2 ** b for (a, b), w in m0["mu"].items())
    gy = sum(w * b * xs2 ** a * y2 ** b for (a, b), w in m0["mu"].items())
    print("m_r0 u_high", mp.nstr(gx / mp.hypot(gx, gy), 17), "u_low", mp.nstr(gy / mp.hypot(gx, gy), 17))
    b0 = load(f"{data}/b0.model")
    print("b0 x**", mp.nstr(geometry(b0)[1], 17))

    # nu1 by series division in 50 digits: nu1(n) = [y^(n-1)] x (phi1(x,y) - 1) / Q(x,y)
    x = xs2
    num = [mp.mpf(0)] * 3  # x (phi1 - 1), polynomial in y of degree <= 1 times y^0..
    q = [mp.mpf(0)] * 3    # Q = x y (1 - P)
    for (a, b), w in m0["mu1"].items():
        num[b] += x * w * x ** a
    num[0] -= x
    for (a, b), w in m0["mu"].items():
        q[b + 1] -= x * w * x ** a
    q[1] += x
    # deflate the common root Y1(x) of numerator and Q
    y1 = y_roots(m0, x)[0]
    nq = [q[1] + q[2] * y1, q[2]]  # Q / (y - y1)
    nn = [num[1]]                  # numerator / (y - y1), numerator linear in y
    nn0 = num[0] + num[1] * y1
    assert abs(nn0) < mp.mpf(10) ** -30, nn0
    N = 31
    ser = [mp.mpf(0)] * N
    for i in range(N):
        s = nn[0] if i == 0 else mp.mpf(0)
        if i >= 1:
            s -= nq[1] * ser[i - 1]
        ser[i] = s / nq[0]
    nu = [mp.mpf(1)] + ser[:30]
    print("m_r0 nu1", [mp.nstr(v, 17) for v in nu[:6]], "nu1(30)", mp.nstr(nu[30], 17))

    for N in (150, 250):
        g = green(m0, (1, 1), N)
        print(f"m_r0 N={N} g((1,1),(1,1))", repr(g[1, 1]), "g((1,1),(5,3))", repr(g[3, 5]), "hit", repr(hit(m0, g, N)))
    g0 = green(m0, (0, 0), 250)
    Y1 = float(y_roots(m0, xs2)[0])
    H0y = sum(g0[k2, 0] * Y1 ** k2 for k2 in range(1, 251))
    L0 = float(gf(m0["mu0"], xs2, Y1)) - hit(m0, g0, 250)
    k1 = L0 + (float(gf(m0["mu2"], xs2, Y1)) - 1) * H0y
    print("m_r0 kappa1(0)", repr(k1), "Y1(x**)", repr(Y1))

    b4 = load(f"{data}/b4.model")
    for N in (150, 250, 350):
        g = green(b4, (0, 0), N)
        print(f"b4 N={N} P_0(return)", repr(hit(b4, g, N)))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data")
