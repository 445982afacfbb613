"""Contact-quality and success metrics."""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel
from scipy.optimize import bisect
from scipy.special import betainc
from scipy.stats import wasserstein_distance

from pressbench.errors import DomainError

logger = logging.getLogger(__name__)

QUANTILE_TOLERANCE = 1e-8


def peak_fz(trace) -> float:
    """Maximum vertical-force magnitude over a force trace.

    Args:
        trace: (N, 3) force vectors, or (N,) vertical components (N)

    Returns:
        Peak |F_z| in N
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size == 0:
        raise DomainError("peak_fz of an empty trace")
    vertical = trace[..., 2] if trace.ndim == 2 else trace
    return float(np.max(np.abs(vertical)))


def wasserstein1(a: Sequence[float], b: Sequence[float]) -> float:
    """W1 distance between two empirical distributions (unequal sizes allowed)."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise DomainError("wasserstein1 needs two nonempty sample sets")
    try:
        return float(wasserstein_distance(a, b))
    except Exception as e:
        logger.error(f"Error computing W1 distance: {e}")
        raise


class CredibleInterval(BaseModel):
    """Equal-tailed interval of the Beta posterior of a success probability."""

    lo: float
    hi: float
    level: float
    alpha: float
    beta: float

    @property
    def posterior(self) -> str:
        return f"Beta({self.alpha:g}, {self.beta:g})"


def beta_cdf(x: float, a: float, b: float) -> float:
    return float(betainc(a, b, x))


def beta_quantile(q: float, a: float, b: float) -> float:
    """Inverse regularized incomplete beta by bisection."""
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    return float(bisect(lambda x: betainc(a, b, x) - q, 0.0, 1.0, xtol=QUANTILE_TOLERANCE, maxiter=200))


def beta_credible_interval(successes: int, trials: int, level: float = 0.95) -> CredibleInterval:
    """Equal-tailed credible interval under a uniform Beta(1, 1) prior.

    Args:
        successes: Number of successes
        trials: Number of trials (>= successes)
        level: Posterior mass of the interval

    Returns:
        CredibleInterval of Beta(1 + successes, 1 + failures)
    """
    if int(successes) != successes or int(trials) != trials:
        raise DomainError(f"counts must be integers (got {successes}, {trials})")
    if not 0 <= successes <= trials:
        raise DomainError(f"need 0 <= successes <= trials (got {successes}, {trials})")
    if not 0.0 < level < 1.0:
        raise DomainError(f"credible level must lie in (0, 1) (got {level})")
    a = 1.0 + successes
    b = 1.0 + (trials - successes)
    tail = (1.0 - level) / 2.0
    return CredibleInterval(
        lo=beta_quantile(tail, a, b),
        hi=beta_quantile(1.0 - tail, a, b),
        level=level,
        alpha=a,
        beta=b,
    )


def rank_by_distance(distances: Dict[str, Optional[float]]) -> List[str]:
    """Names sorted by ascending distance; undefined distances go last."""
    return sorted(
        distances,
        key=lambda name: (distances[name] is None, distances[name] if distances[name] is not None else 0.0, name),
    )
