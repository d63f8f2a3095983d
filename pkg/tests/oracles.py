"""Independent reference implementations used only by the tests."""

import numpy as np


def hull_verbatim(x):
    """Closed-form convex hull written term by term, sqrt(a^2) kept as is."""
    x = np.asarray(x, dtype=float)
    return (
        2 / 100 * x
        + (-x + np.sqrt((1 / 4 - x) ** 2) + 1 / 4) ** 2 / 4
        + (x + np.sqrt((x - 3 / 4) ** 2) - 3 / 4) ** 2 / 4
        + 5 / 1000
    )


def double_well_verbatim(x):
    """Closed-form double well written term by term; singular at 1/4 and 3/4."""
    x = np.asarray(x, dtype=float)
    r1 = np.sqrt((x - 1 / 4) ** 2)
    r3 = np.sqrt((x - 3 / 4) ** 2)
    p = -16 * (x - 1 / 4) ** 3 + 12 * (x - 1 / 4) ** 2
    inner = (1 / 4 - x) / (2 * r1) - (3 / 4 - x) / (2 * r3) - (2 * x - 3 / 2) / (2 * r3) + (2 * x - 1 / 2) / (2 * r1)
    a = -(3 / 4 - x) / (2 * r3) - (2 * x - 3 / 2) / (2 * r3) - p * inner + 1 / 2
    b = (3 / 4 - x) / (2 * r3) + (2 * x - 3 / 2) / (2 * r3) + p * inner + 1 / 2
    return (
        2 / 100 * x
        + (-x + np.sqrt((1 / 4 - x) ** 2) + 1 / 4) ** 2 / 4
        + (x + np.sqrt((x - 3 / 4) ** 2) - 3 / 4) ** 2 / 4
        + a * b / 30
        + 5 / 1000
    )


def away_from(samples, points, gap):
    samples = np.asarray(samples, dtype=float)
    keep = np.ones(samples.shape, dtype=bool)
    for p in points:
        keep &= np.abs(samples - p) > gap
    return samples[keep]
