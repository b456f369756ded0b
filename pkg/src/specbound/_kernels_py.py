"""Pure-numpy reference versions of the compiled mesh kernels."""

import numpy as np


def triangle_areas(lengths):
    """Areas from edge lengths by Kahan's ordering of Heron's formula.

    Degenerate or invalid triangles get area ``-1``.
    """
    s = -np.sort(-np.asarray(lengths, dtype=float), axis=1)
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    ok = (prod > 0) & (c > 0)
    area = np.full(len(a), -1.0)
    area[ok] = 0.25 * np.sqrt(prod[ok])
    return area


def cotan_assemble(faces, lengths):
    """COO triplets of the cotangent stiffness and the lumped mass diagonal.

    ``lengths[f, j]`` is the length of the edge of face ``f`` opposite its
    ``j``-th vertex.  Per face the twelve triplets are, for each corner ``j``
    with opposite edge ``(a, b)``: ``(a, b, -w)``, ``(b, a, -w)``, ``(a, a, w)``,
    ``(b, b, w)`` with ``w = cot(angle_j) / 2``.
    """
    faces = np.asarray(faces, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=float)
    nf = len(faces)
    area = triangle_areas(lengths)
    if np.any(area <= 0):
        raise ValueError("degenerate triangle in assembly")
    l2 = lengths * lengths
    rows = np.empty((nf, 12), dtype=np.int64)
    cols = np.empty((nf, 12), dtype=np.int64)
    vals = np.empty((nf, 12))
    for j in range(3):
        a, b = (j + 1) % 3, (j + 2) % 3
        w = (l2[:, a] + l2[:, b] - l2[:, j]) / (4.0 * area) / 2.0
        va, vb = faces[:, a], faces[:, b]
        k = 4 * j
        rows[:, k], cols[:, k], vals[:, k] = va, vb, -w
        rows[:, k + 1], cols[:, k + 1], vals[:, k + 1] = vb, va, -w
        rows[:, k + 2], cols[:, k + 2], vals[:, k + 2] = va, va, w
        rows[:, k + 3], cols[:, k + 3], vals[:, k + 3] = vb, vb, w
    nv = int(faces.max()) + 1 if nf else 0
    mass = np.zeros(nv)
    third = area / 3.0
    for j in range(3):
        np.add.at(mass, faces[:, j], third)
    return rows.ravel(), cols.ravel(), vals.ravel(), mass, area
