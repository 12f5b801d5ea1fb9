"""Small utilities shared across test modules (not fixtures)."""

import numpy as np

import koopfreq as kf
from koopfreq import bode, reference


def draw_cascade(rng, omega=None):
    """Random valid QuadraticCascade; redraw on degenerate or invalid combos."""
    while True:
        a1, a2 = -rng.uniform(0.2, 3.0, size=2)
        w = omega if omega is not None else rng.uniform(0.3, 3.0)
        try:
            return kf.QuadraticCascade(float(a1), float(a2), float(w))
        except (kf.DegenerateParameters, ValueError):
            continue


def closed_form_tables(params=(-1.0, -2.0), points=17):
    """Bode tables for the cascade built from the closed forms, no integration.

    The golden SVG fixture is rendered from these tables, so the plot bytes
    depend only on the closed-form arithmetic and the SVG writer.
    """
    a1, a2 = params
    grid = bode.GridSpec(0.1, 10.0, points)
    h2 = bode.BodeTable("cascade", "x1", kf.OrderTag.harmonic(2))
    h1 = bode.BodeTable("cascade", "x2", kf.OrderTag.harmonic(1))
    for w in grid.omegas():
        sysp = kf.QuadraticCascade(a1, a2, w)
        v2 = reference.closed_form_response(sysp, "x1", kf.OrderTag.harmonic(2))
        v1 = reference.closed_form_response(sysp, "x2", kf.OrderTag.harmonic(1))
        h2.rows.append(bode.BodeRow.ok(w, v2, "closed_form", 0.0))
        h1.rows.append(bode.BodeRow.ok(w, v1, "closed_form", 0.0))
    h2.finish()
    h1.finish()
    return [h2, h1]


def fit_slope_db_per_decade(table):
    g = np.array([r.gain_db for r in table.rows])
    lw = np.log10([r.omega for r in table.rows])
    return float(np.polyfit(lw, g, 1)[0])
