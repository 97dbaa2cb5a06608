"""Scalar brute-force ray-intersection oracle for depth verification.

Walks every pixel and tests every primitive with straight-line algebra
(no acceleration structures, no vectorization).  Surface definitions match
the documented geometry contract: boxes are closed slabs, cylinders have a
lateral wall plus top cap only, domes are upper hemispheres, frusta are
open double-sided shells.
"""

import math

INF = float("inf")


def _ray_grid(position, look, up, fov_deg, image_px):
    lx, ly, lz = look
    ux, uy, uz = up
    rx = ly * uz - lz * uy
    ry = lz * ux - lx * uz
    rz = lx * uy - ly * ux
    rn = math.sqrt(rx * rx + ry * ry + rz * rz)
    rx, ry, rz = rx / rn, ry / rn, rz / rn
    cux = ry * lz - rz * ly
    cuy = rz * lx - rx * lz
    cuz = rx * ly - ry * lx
    t = math.tan(math.radians(fov_deg) / 2.0)
    dirs = []
    for i in range(image_px):
        v = 1.0 - (i + 0.5) / image_px * 2.0
        row = []
        for j in range(image_px):
            u = (j + 0.5) / image_px * 2.0 - 1.0
            dx = lx + t * (u * rx + v * cux)
            dy = ly + t * (u * ry + v * cuy)
            dz = lz + t * (u * rz + v * cuz)
            n = math.sqrt(dx * dx + dy * dy + dz * dz)
            row.append((dx / n, dy / n, dz / n))
        dirs.append(row)
    return dirs


def _box_t(o, d, p):
    ch = math.cos(-p["heading"])
    sh = math.sin(-p["heading"])
    ox = o[0] - p["cx"]
    oy = o[1] - p["cy"]
    lox = ox * ch - oy * sh
    loy = ox * sh + oy * ch
    ldx = d[0] * ch - d[1] * sh
    ldy = d[0] * sh + d[1] * ch
    tmin, tmax = -INF, INF
    for lo, ld, mn, mx in (
        (lox, ldx, -p["hx"], p["hx"]),
        (loy, ldy, -p["hy"], p["hy"]),
        (o[2], d[2], p["z0"], p["z1"]),
    ):
        if ld == 0.0:
            if lo < mn or lo > mx:
                return INF
            continue
        t1 = (mn - lo) / ld
        t2 = (mx - lo) / ld
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
        if tmax < tmin:
            return INF
    if tmax >= tmin and tmin > 1e-9:
        return tmin
    return INF


def _cylinder_t(o, d, p):
    ox = o[0] - p["cx"]
    oy = o[1] - p["cy"]
    a = d[0] * d[0] + d[1] * d[1]
    b = 2.0 * (ox * d[0] + oy * d[1])
    c = ox * ox + oy * oy - p["radius"] ** 2
    best = INF
    if a > 0.0:
        disc = b * b - 4.0 * a * c
        if disc >= 0.0:
            sq = math.sqrt(disc)
            for tc in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
                if tc > 1e-9:
                    z = o[2] + tc * d[2]
                    if p["z0"] <= z <= p["z1"] and tc < best:
                        best = tc
    if d[2] != 0.0:
        tc = (p["z1"] - o[2]) / d[2]
        if tc > 1e-9:
            hx = ox + tc * d[0]
            hy = oy + tc * d[1]
            if hx * hx + hy * hy <= p["radius"] ** 2 and tc < best:
                best = tc
    return best


def _dome_t(o, d, p):
    ox = o[0] - p["cx"]
    oy = o[1] - p["cy"]
    oz = o[2] - p["cz"]
    b = 2.0 * (ox * d[0] + oy * d[1] + oz * d[2])
    c = ox * ox + oy * oy + oz * oz - p["radius"] ** 2
    disc = b * b - 4.0 * c
    if disc < 0.0:
        return INF
    sq = math.sqrt(disc)
    best = INF
    for tc in ((-b - sq) / 2.0, (-b + sq) / 2.0):
        if tc > 1e-9:
            z = oz + tc * d[2]
            if z >= 0.0 and tc < best:
                best = tc
    return best


def _frustum_t(o, d, p):
    k = (p["r1"] - p["r0"]) / (p["z1"] - p["z0"])
    ox = o[0] - p["cx"]
    oy = o[1] - p["cy"]
    e = p["r0"] + k * (o[2] - p["z0"])
    f = k * d[2]
    a = d[0] * d[0] + d[1] * d[1] - f * f
    b = 2.0 * (ox * d[0] + oy * d[1] - e * f)
    c = ox * ox + oy * oy - e * e
    best = INF
    if abs(a) < 1e-12:
        if b != 0.0:
            tc = -c / b
            if tc > 1e-9:
                z = o[2] + tc * d[2]
                if p["z0"] <= z <= p["z1"]:
                    best = tc
        return best
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return INF
    sq = math.sqrt(disc)
    for tc in ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)):
        if tc > 1e-9:
            z = o[2] + tc * d[2]
            if p["z0"] <= z <= p["z1"] and tc < best:
                best = tc
    return best


_DISPATCH = {
    "box": _box_t,
    "cylinder": _cylinder_t,
    "dome": _dome_t,
    "frustum": _frustum_t,
}


def trace_depth(prims, position, look, up, fov_deg, image_px):
    """Per-pixel nearest-hit distance; ground plane z=0 always present."""
    dirs = _ray_grid(position, look, up, fov_deg, image_px)
    testers = [(_DISPATCH[p["type"]], p) for p in prims]
    out = []
    for row in dirs:
        orow = []
        for d in row:
            if d[2] < 0.0:
                best = -position[2] / d[2]
                if best <= 0.0:
                    best = INF
            else:
                best = INF
            for fn, p in testers:
                t = fn(position, d, p)
                if t < best:
                    best = t
            orow.append(best)
        out.append(orow)
    return out
