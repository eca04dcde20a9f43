"""Small exactly-solvable chains used across the test and demo suites.

Each factory returns a UserDiscrete process meant to be paired with the
identity reward.  They are tiny on purpose: the enumeration oracle solves
them instantly, and their stopping values are simple enough to check by
hand, which is what makes them trustworthy anchors for end-to-end
unbiasedness tests.
"""

from __future__ import annotations

from .processes import ProcessSpec, user_discrete

__all__ = [
    "two_point_two_stage",
    "skewed_three_stage",
    "mixing_three_stage",
    "deterministic_chain",
]


def two_point_two_stage() -> ProcessSpec:
    """X1 uniform on {0, 2}; X2 uniform on {X1 - 1, X1 + 1}.  Value: exactly 1.

    Continuing from x1 is worth E[X2 | x1] = x1, so stopping and continuing
    tie at every state and U = E[X1] = 1.
    """
    support = (-1.0, 0.0, 1.0, 2.0, 3.0)
    initial = (0.0, 0.5, 0.0, 0.5, 0.0)
    step = (
        (1.0, 0.0, 0.0, 0.0, 0.0),   # -1: unreachable at stage 1, self-loop
        (0.5, 0.0, 0.5, 0.0, 0.0),   # 0 -> {-1, 1}
        (0.0, 0.0, 1.0, 0.0, 0.0),   # 1: unreachable, self-loop
        (0.0, 0.0, 0.5, 0.0, 0.5),   # 2 -> {1, 3}
        (0.0, 0.0, 0.0, 0.0, 1.0),   # 3: unreachable, self-loop
    )
    return user_discrete(support, (initial, step))


def skewed_three_stage() -> ProcessSpec:
    """Three stages on {0, 1, 3} with asymmetric mixing.  Value: 81/40."""
    support = (0.0, 1.0, 3.0)
    initial = (0.3, 0.5, 0.2)
    first = (
        (0.5, 0.25, 0.25),
        (0.1, 0.6, 0.3),
        (0.4, 0.4, 0.2),
    )
    second = (
        (0.25, 0.5, 0.25),
        (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
        (0.1, 0.1, 0.8),
    )
    return user_discrete(support, (initial, first, second))


def mixing_three_stage() -> ProcessSpec:
    """Three stages on {-2, -1, 1, 2}, uniform start.  Value: 15/16."""
    support = (-2.0, -1.0, 1.0, 2.0)
    initial = (0.25, 0.25, 0.25, 0.25)
    first = (
        (0.5, 0.5, 0.0, 0.0),
        (0.25, 0.25, 0.25, 0.25),
        (0.0, 0.5, 0.5, 0.0),
        (0.125, 0.125, 0.25, 0.5),
    )
    second = (
        (0.25, 0.25, 0.25, 0.25),
        (0.5, 0.0, 0.0, 0.5),
        (0.125, 0.375, 0.375, 0.125),
        (0.0, 0.0, 0.5, 0.5),
    )
    return user_discrete(support, (initial, first, second))


def deterministic_chain(values) -> ProcessSpec:
    """A chain that visits ``values`` in order with probability one.

    Useful for pinning down stage conventions: the stopping value is just
    the running maximum seen from the front, e.g. (5, 1) -> 5 and (1, 5) -> 5.
    """
    values = tuple(float(v) for v in values)
    if len(values) < 1:
        raise ValueError("need at least one stage value")
    support = tuple(sorted(set(values)))
    index = {v: j for j, v in enumerate(support)}
    m = len(support)

    def point_mass(v):
        row = [0.0] * m
        row[index[v]] = 1.0
        return tuple(row)

    transitions = [point_mass(values[0])]
    for prev, nxt in zip(values, values[1:]):
        mat = []
        for v in support:
            mat.append(point_mass(nxt) if v == prev else point_mass(v))
        transitions.append(tuple(mat))
    return user_discrete(support, transitions)
