#!/usr/bin/env python3
"""Regenerates the point-list scenarios (shapes-43, butterfly-66).

Each shape is a hex lattice clipped to a planar region, grown until it holds
at least the wanted number of points, then reduced to exactly that many by
farthest-point sampling. Points lie in the x-z plane.
"""
import json
import math
from pathlib import Path

SPACING = 2.25
PITCH = 2.3  # lattice pitch, a little above the required spacing


def lattice(inside, scale, extent):
    pts = []
    rows = int(extent * scale / (PITCH * math.sqrt(3) / 2)) + 2
    cols = int(extent * scale / PITCH) + 2
    for r in range(-rows, rows + 1):
        for c in range(-cols, cols + 1):
            x = (c + 0.5 * (r % 2)) * PITCH
            z = r * PITCH * math.sqrt(3) / 2
            if inside(x / scale, z / scale):
                pts.append((x, z))
    return pts


def farthest_points(pts, k):
    chosen = [0]
    d = [math.dist(p, pts[0]) for p in pts]
    while len(chosen) < k:
        i = max(range(len(pts)), key=lambda j: d[j])
        chosen.append(i)
        d = [min(d[j], math.dist(pts[j], pts[i])) for j in range(len(pts))]
    return [pts[i] for i in sorted(chosen)]


def shape(inside, count, extent):
    scale = 1.0
    while True:
        pts = lattice(inside, scale, extent)
        if len(pts) >= count:
            return farthest_points(pts, count)
        scale *= 1.05


def crescent(x, z):
    return x * x + z * z <= 1.0 and (x - 0.45) ** 2 + z * z > 0.75**2


STAR = [
    ((1.0 if k % 2 == 0 else 0.45) * math.cos(math.pi / 2 + k * math.pi / 5),
     (1.0 if k % 2 == 0 else 0.45) * math.sin(math.pi / 2 + k * math.pi / 5))
    for k in range(10)
]


def star(x, z):
    # Even-odd ray casting against the five-pointed outline.
    inside = False
    for (x1, z1), (x2, z2) in zip(STAR, STAR[1:] + STAR[:1]):
        if (z1 > z) != (z2 > z) and x < x1 + (z - z1) * (x2 - x1) / (z2 - z1):
            inside = not inside
    return inside


def butterfly(x, z):
    r = math.hypot(x, z)
    t = math.atan2(z, x)
    rho = math.exp(math.sin(t)) - 2 * math.cos(4 * t) + math.sin((2 * t - math.pi) / 24) ** 5
    return r <= max(rho, 0.0) / 4.5


def place(pts, centre_x, centre_y, base_z):
    xs = [p[0] for p in pts]
    zs = [p[1] for p in pts]
    cx = (min(xs) + max(xs)) / 2
    z0 = min(zs)
    return [[round(x - cx + centre_x, 6), centre_y, round(z - z0 + base_z, 6)] for x, z in pts]


def check(points):
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            assert math.dist(points[i], points[j]) >= SPACING, (i, j)


def grid_centre(n):
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    return (cols - 1) * SPACING / 2, (rows - 1) * SPACING / 2


def document(n, stages):
    return {
        "schema_version": 1,
        "n_drones": n,
        "initial_layout": {"grid": {"spacing": SPACING, "origin": [0.0, 0.0, 0.0]}},
        "hover_default": 2.0,
        "takeoff_altitude": 5.0,
        "landing": True,
        "stages": stages,
    }


def main():
    here = Path(__file__).parent
    cx, cy = grid_centre(43)
    stages = []
    for label, inside in [("crescent", crescent), ("star", star)]:
        pts = place(shape(inside, 43, 1.2), cx, cy, 12.0)
        check(pts)
        stages.append({"label": label, "goals": {"points": pts}})
    (here / "shapes-43.json").write_text(json.dumps(document(43, stages), indent=2) + "\n")

    cx, cy = grid_centre(66)
    pts = place(shape(butterfly, 66, 1.2), cx, cy, 12.0)
    check(pts)
    doc = document(66, [{"label": "butterfly", "goals": {"points": pts}}])
    (here / "butterfly-66.json").write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
