"""High-precision reference values for the core integration tests.

Run with `python3 oracle.py`; the printed constants are pasted into
`tests/oracles.rs`. Independent of the Rust code: the default table is
re-described analytically (walls z = ±s³/3 on [0, 0.5], circular wall of
radius 1 centred at (1.8, 0)) and everything is solved at 50 digits.
"""
import math
from mpmath import mp, mpf, quad, sqrt, findroot, polyroots, atan, tan, cos, sin, pi

mp.dps = 50
BETA = mpf(3)
EPS0 = mpf("0.5")
CX, R = mpf("1.8"), mpf(1)


def arclength(s):
    return quad(lambda u: sqrt(1 + u ** (2 * BETA - 2)), [0, s])


def hit_wall_cubic(p, d, sigma):
    # sigma*(y0 + t dy) = (x0 + t dx)^3 / 3, 0 <= x <= eps0
    x0, y0 = p
    dx, dy = d
    coeffs = [dx ** 3 / 3, x0 * dx ** 2, x0 ** 2 * dx - sigma * dy, x0 ** 3 / 3 - sigma * y0]
    out = []
    for t in polyroots(coeffs, maxsteps=200, extraprec=200):
        if abs(mp.im(t)) > mpf(10) ** -30:
            continue
        t = mp.re(t)
        x = x0 + t * dx
        if t > mpf(10) ** -20 and 0 <= x <= EPS0:
            out.append(t)
    return out


def hit_circle(p, d):
    x0, y0 = p
    dx, dy = d
    a = dx * dx + dy * dy
    b = 2 * ((x0 - CX) * dx + y0 * dy)
    c = (x0 - CX) ** 2 + y0 ** 2 - R * R
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    out = []
    for t in ((-b - sqrt(disc)) / (2 * a), (-b + sqrt(disc)) / (2 * a)):
        if t > mpf(10) ** -20 and (x0 + t * dx) < CX:
            out.append(t)
    return out


def first_hit(p, d, skip):
    cands = []
    if skip != "lower":
        cands += [(t, "lower") for t in hit_wall_cubic(p, d, -1)]
    if skip != "upper":
        cands += [(t, "upper") for t in hit_wall_cubic(p, d, 1)]
    if skip != "wall":
        cands += [(t, "wall") for t in hit_circle(p, d)]
    return min(cands)


def rays():
    out = []
    # From the wall towards the cusp.
    for k in range(10):
        psi = math.pi + (k - 4.5) * 0.012
        x0 = 1.8 + math.cos(psi)
        y0 = math.sin(psi)
        sa = 0.12 + 0.035 * k
        ya = (0.9 - 0.2 * k) * sa ** 3 / 3
        dx, dy = sa - x0, ya - y0
        n = math.hypot(dx, dy)
        out.append(((x0, y0), (dx / n, dy / n), "wall"))
    # From the upper cusp wall towards the wall.
    for k in range(10):
        s0 = 0.05 + 0.045 * k
        x0, y0 = s0, s0 ** 3 / 3
        psi = math.pi + 0.004 + 0.01 * k
        tx, ty = 1.8 + math.cos(psi), math.sin(psi)
        dx, dy = tx - x0, ty - y0
        n = math.hypot(dx, dy)
        out.append(((x0, y0), (dx / n, dy / n), "upper"))
    return out


def reduced_step(s, v):
    f = lambda u: u - s + (u ** BETA + s ** BETA) / (BETA * tan(v))
    s1 = findroot(f, s)
    return s1, v + 2 * atan(s1 ** (BETA - 1))


def main():
    print("ARCLENGTH_HALF =", mp.nstr(arclength(mpf("0.5")), 30))
    print("RAYS = [")
    for (p, d, skip) in rays():
        pm = (mpf(p[0]), mpf(p[1]))
        dm = (mpf(d[0]), mpf(d[1]))
        t, which = first_hit(pm, dm, skip)
        hx, hy = pm[0] + t * dm[0], pm[1] + t * dm[1]
        print(f"    Ray {{ pos: [{p[0]!r}, {p[1]!r}], dir: [{d[0]!r}, {d[1]!r}], skip: \"{skip}\", hit: \"{which}\", t: {mp.nstr(t, 25)}, at: [{mp.nstr(hx, 25)}, {mp.nstr(hy, 25)}] }},")
    print("]")
    s1, v1 = reduced_step(mpf("0.1"), mpf("0.3"))
    print("REDUCED_S1 =", mp.nstr(s1, 30))
    print("REDUCED_V1 =", mp.nstr(v1, 30))


if __name__ == "__main__":
    main()
