from __future__ import annotations
import logging

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.mixture import GaussianMixture

from oditids.baselines.cusum import MixtureParams
from oditids.utils.errors import ConvergenceError, DataValidationError, DimensionMismatchError

logger = logging.getLogger(__name__)

MAX_ITER = 100
# half a packet, the resolution of rounded counts
SIGMA_FLOOR = 0.5


def _single_component(column: NDArray[np.float64]) -> MixtureParams:
    mean = float(column.mean())
    return MixtureParams(
        active_prob=1.0,
        active_mean=mean,
        idle_mean=mean,
        sigma=max(float(column.std()), SIGMA_FLOOR),
    )


def fit_mixture(column: ArrayLike, seed: int = 0, device: int | None = None) -> MixtureParams:
    """Two-component, shared-variance mixture fit of one device's counts.

    The fit collapses into a single component with ``active_prob = 1`` when a
    one-component model has the lower BIC, or when the components lie within
    two shared standard deviations of each other.
    """
    column = np.asarray(column, dtype=np.float64).ravel()
    if column.size < 2:
        raise DataValidationError("A mixture fit needs at least two samples", details={"device": device})
    if np.ptp(column) == 0:
        return _single_component(column)

    gmm = GaussianMixture(
        n_components=2,
        covariance_type="tied",
        max_iter=MAX_ITER,
        init_params="kmeans",
        random_state=seed,
    )
    samples = column[:, None]
    gmm.fit(samples)
    if not gmm.converged_:
        raise ConvergenceError(
            f"Mixture fit did not converge within {MAX_ITER} iterations",
            details={"device": device, "n_iter": int(gmm.n_iter_), "lower_bound": float(gmm.lower_bound_)},
        )

    means = gmm.means_.ravel()
    weights = gmm.weights_.ravel()
    sigma = max(float(np.sqrt(gmm.covariances_.ravel()[0])), SIGMA_FLOOR)
    single_bic = GaussianMixture(n_components=1, random_state=seed).fit(samples).bic(samples)
    if gmm.bic(samples) >= single_bic or abs(means[0] - means[1]) <= 2.0 * sigma or weights.min() < 0.01:
        logger.warning(f"Device {device}: mixture components coincide, collapsing to a single component")
        return _single_component(column)

    hi = int(np.argmax(means))
    return MixtureParams(
        active_prob=float(weights[hi]),
        active_mean=float(means[hi]),
        idle_mean=float(means[1 - hi]),
        sigma=sigma,
    )


def mixture_mean(params: MixtureParams) -> float:
    return params.active_prob * params.active_mean + (1.0 - params.active_prob) * params.idle_mean


def fit_gcusum(nominal: ArrayLike, attack: ArrayLike, seed: int = 0) -> list[MixtureParams]:
    """Per-device nominal mixtures, with the attack scale from the attack-trace fit."""
    nominal = np.asarray(nominal, dtype=np.float64)
    attack = np.asarray(attack, dtype=np.float64)
    if nominal.ndim == 1:
        nominal = nominal[:, None]
    if attack.ndim == 1:
        attack = attack[:, None]
    if nominal.shape[0] == 0 or attack.shape[0] == 0:
        raise DataValidationError("G-CUSUM needs nonempty nominal and attack traces")
    if nominal.shape[1] != attack.shape[1]:
        raise DimensionMismatchError(
            "Nominal and attack traces cover different devices", expected=nominal.shape[1], actual=attack.shape[1]
        )

    fitted = []
    for j in range(nominal.shape[1]):
        base = fit_mixture(nominal[:, j], seed=seed, device=j)
        attacked = fit_mixture(attack[:, j], seed=seed, device=j)
        base_mean = mixture_mean(base)
        scale = mixture_mean(attacked) / base_mean if base_mean > 0 else 1.0
        fitted.append(
            MixtureParams(
                active_prob=base.active_prob,
                active_mean=base.active_mean,
                idle_mean=base.idle_mean,
                sigma=base.sigma,
                scale=max(scale, 0.0),
            )
        )
    logger.debug(f"Fitted G-CUSUM mixtures for {len(fitted)} devices")
    return fitted
