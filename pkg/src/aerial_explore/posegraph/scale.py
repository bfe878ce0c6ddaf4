import logging
from typing import Optional, Sequence

import numpy as np

from ..errors import DegenerateMotion

logger = logging.getLogger(__name__)

MOTION_FLOOR = 1e-12


def consecutive_deltas(positions: Sequence) -> np.ndarray:
    """Displacements between consecutive positions"""

    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    return np.diff(positions, axis=0)


def estimate_scale(
    pred_deltas: Sequence,
    gps_deltas: Sequence,
    previous: Optional[float] = None,
    blend: float = 0.3,
    floor: float = MOTION_FLOOR,
) -> float:
    """Least-squares fit of |dg| ~ s |dp|, blended into a running estimate.

    With ``previous`` unset the raw fit is returned; otherwise the result is
    ``(1 - blend) * previous + blend * s``.
    """

    dp = np.linalg.norm(np.asarray(pred_deltas, dtype=float).reshape(-1, 3), axis=1)
    dg = np.linalg.norm(np.asarray(gps_deltas, dtype=float).reshape(-1, 3), axis=1)
    if len(dp) != len(dg):
        raise ValueError(
            f"got {len(dp)} predicted and {len(dg)} GPS displacements"
        )
    if len(dp) == 0:
        raise DegenerateMotion("no displacements to estimate a scale from")

    denom = float(np.sum(dp**2))
    if denom < floor:
        raise DegenerateMotion(
            f"predicted motion too small to fix the scale (sum |dp|^2 = {denom:.3g})"
        )
    s = float(np.sum(dg * dp)) / denom
    if s <= 0:
        raise DegenerateMotion("GPS displacements are all zero")

    if previous is None:
        return s
    if not 0 < blend <= 1:
        raise ValueError("blend must lie in (0, 1]")
    blended = (1.0 - blend) * previous + blend * s
    logger.debug("scale estimate %.5f, running scale %.5f", s, blended)
    return blended
