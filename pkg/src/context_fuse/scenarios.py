"""Built-in missile-defense toy scenario: three warhead classes, three kingdoms."""
from __future__ import annotations

import numpy as np

from .scene import ContextModel, Scene, make_context, make_scene

WARHEADS = ("ACME", "GLOBEX", "TRIOZAP")

MU_IOWA = (0.45, 0.45, 0.1)
MU_OHIO_UTAH = (0.1, 0.4, 0.5)

SIGMA_IOWA_UTAH = np.array([
    [1.0, 0.0, -0.9],
    [0.0, 1.0, 0.3],
    [-0.9, 0.3, 1.0],
])

# Ohio's matrix as printed. Read in ACME, GLOBEX, TRIOZAP order it makes
# TRIOZAP anti-correlated with ACME, contradicting the scenario summary
# ("Ohio: correlated with ACME"). Its rows are read as ACME, TRIOZAP, GLOBEX.
SIGMA_OHIO_PRINTED = np.array([
    [1.0, 0.9, -0.65],
    [0.9, 1.0, -0.9],
    [-0.65, -0.9, 1.0],
])
_OHIO_ROWS = ("ACME", "TRIOZAP", "GLOBEX")
_perm = [_OHIO_ROWS.index(name) for name in WARHEADS]
SIGMA_OHIO = SIGMA_OHIO_PRINTED[np.ix_(_perm, _perm)]

TOY_SUBCASES = ("sensor-alone", "utah-identity", "utah-full", "iowa-full", "ohio-full")

# reported values of P(TRIOZAP) for the blurry object
REPORTED_P_TRIOZAP = {
    "sensor-alone": 0.334,
    "utah-identity": 0.423,
    "utah-full": 0.314,
    "iowa-full": 0.155,
    "ohio-full": 0.667,
}


def toy_contexts() -> dict[str, ContextModel]:
    return {
        "Iowa": make_context("Iowa", WARHEADS, MU_IOWA, SIGMA_IOWA_UTAH),
        "Ohio": make_context("Ohio", WARHEADS, MU_OHIO_UTAH, SIGMA_OHIO),
        "Utah": make_context("Utah", WARHEADS, MU_OHIO_UTAH, SIGMA_IOWA_UTAH),
    }


def toy_context(subcase: str) -> ContextModel | None:
    """Context for a toy subcase; ``None`` for the sensor alone."""
    contexts = toy_contexts()
    if subcase == "sensor-alone":
        return None
    if subcase == "utah-identity":
        return contexts["Utah"].with_sigma(np.eye(3), name="Utah (identity sigma)")
    if subcase == "utah-full":
        return contexts["Utah"]
    if subcase == "iowa-full":
        return contexts["Iowa"]
    if subcase == "ohio-full":
        return contexts["Ohio"]
    raise ValueError(f"unknown subcase {subcase!r}; choose from {', '.join(TOY_SUBCASES)}")


def toy_scene() -> Scene:
    """A resolved ACME warhead (99% +- 1%) and a blurry object (1/3 each +- 30%)."""
    return make_scene(
        WARHEADS,
        [[0.99, 0.005, 0.005], [1 / 3, 1 / 3, 1 / 3]],
        [0.01, 0.30],
    )


def hyperprior_scene() -> Scene:
    """Three ACME and three GLOBEX warheads at 99% +- 1%, plus the blurry object."""
    acme = [0.99, 0.005, 0.005]
    globex = [0.005, 0.99, 0.005]
    return make_scene(
        WARHEADS,
        [acme] * 3 + [globex] * 3 + [[1 / 3, 1 / 3, 1 / 3]],
        [0.01] * 6 + [0.30],
    )


BLURRY = 1
TRIOZAP = WARHEADS.index("TRIOZAP")
