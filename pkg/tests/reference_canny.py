"""Scalar reference canny pipeline used as the bit-exactness oracle.

Deliberately written with plain Python loops and its own literal constants;
shares only the documented algorithm with the vectorized implementation.
"""

import math
from collections import deque


def _gaussian_kernel():
    k = [[0.0] * 5 for _ in range(5)]
    total = 0.0
    for i in range(5):
        for j in range(5):
            v = math.exp(-((i - 2) ** 2 + (j - 2) ** 2) / (2.0 * 1.4 * 1.4))
            k[i][j] = v
            total += v
    for i in range(5):
        for j in range(5):
            k[i][j] /= total
    return k


def _reflect(i, n):
    if i < 0:
        i = -i
    if i >= n:
        i = 2 * (n - 1) - i
    return i


def _convolve(img, kernel):
    h = len(img)
    w = len(img[0])
    kh = len(kernel)
    kw = len(kernel[0])
    ph, pw = kh // 2, kw // 2
    out = [[0.0] * w for _ in range(h)]
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in range(kh):
                for dj in range(kw):
                    acc += kernel[di][dj] * img[_reflect(i + di - ph, h)][_reflect(j + dj - pw, w)]
            out[i][j] = acc
    return out


def reference_canny(gray_rows, low, high):
    """gray_rows: list of list of float. Returns list of list of 0/255 ints."""
    h = len(gray_rows)
    w = len(gray_rows[0])
    img = [[float(v) for v in row] for row in gray_rows]
    blurred = _convolve(img, _gaussian_kernel())
    sx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]
    sy = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]]
    gx = _convolve(blurred, sx)
    gy = _convolve(blurred, sy)

    mag = [[math.sqrt(gx[i][j] * gx[i][j] + gy[i][j] * gy[i][j]) for j in range(w)] for i in range(h)]
    mmax = 0.0
    for i in range(h):
        for j in range(w):
            if mag[i][j] > mmax:
                mmax = mag[i][j]
    if mmax > 0:
        scale = 255.0 / mmax
        scaled = [[mag[i][j] * scale for j in range(w)] for i in range(h)]
    else:
        scaled = [[0.0] * w for _ in range(h)]

    tan225 = math.tan(math.radians(22.5))
    tan675 = math.tan(math.radians(67.5))
    kept = [[False] * w for _ in range(h)]
    nms = [[0.0] * w for _ in range(h)]
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            m = scaled[i][j]
            ax = abs(gx[i][j])
            ay = abs(gy[i][j])
            if ay <= ax * tan225:
                back = scaled[i][j - 1]
                fwd = scaled[i][j + 1]
            elif ay >= ax * tan675:
                back = scaled[i - 1][j]
                fwd = scaled[i + 1][j]
            elif gx[i][j] * gy[i][j] > 0:
                back = scaled[i - 1][j - 1]
                fwd = scaled[i + 1][j + 1]
            else:
                back = scaled[i - 1][j + 1]
                fwd = scaled[i + 1][j - 1]
            if m > back and m >= fwd:
                kept[i][j] = True
                nms[i][j] = m

    strong = [(i, j) for i in range(h) for j in range(w) if nms[i][j] >= high]
    candidate = [[kept[i][j] and nms[i][j] >= low for j in range(w)] for i in range(h)]
    result = [[False] * w for _ in range(h)]
    queue = deque()
    for i, j in strong:
        result[i][j] = True
        queue.append((i, j))
    while queue:
        i, j = queue.popleft()
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                ni, nj = i + di, j + dj
                if 0 <= ni < h and 0 <= nj < w and candidate[ni][nj] and not result[ni][nj]:
                    result[ni][nj] = True
                    queue.append((ni, nj))
    return [[255 if result[i][j] else 0 for j in range(w)] for i in range(h)]
