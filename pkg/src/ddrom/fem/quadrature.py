"""Quadrature rules on the reference triangle and on segments.

Triangle rules are given in barycentric coordinates with weights summing to
one (multiply by the element area).
"""
import numpy as np


def _orbit(a, w):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)], [w, w, w]


def triangle_degree4():
    """Six-point rule exact for degree 4."""
    p1, w1 = _orbit(0.445948490915965, 0.223381589678011)
    p2, w2 = _orbit(0.091576213509771, 0.109951743655322)
    return np.array(p1 + p2), np.array(w1 + w2)


def triangle_degree5():
    """Seven-point rule exact for degree 5 (closed form)."""
    r = np.sqrt(15.0)
    p1, w1 = _orbit((6.0 - r) / 21.0, (155.0 - r) / 1200.0)
    p2, w2 = _orbit((6.0 + r) / 21.0, (155.0 + r) / 1200.0)
    pts = np.array([(1.0 / 3.0,) * 3] + p1 + p2)
    wts = np.array([0.225] + w1 + w2)
    return pts, wts


def gauss_segment(n=3):
    """Gauss-Legendre points on [0, 1] with weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
