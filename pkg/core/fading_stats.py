# GrateWave/core/fading_stats.py

"""
Local fading statistics: ring-shaped envelope ensembles, histogram PDFs and
maximum-likelihood Rician / Hoyt fits.

Fits run on samples divided by their own RMS, so the search space does not
depend on the field level. Each model uses two coordinates:

    Rician: kappa = ln(1 + K) in [0, ln(1 + 1e6)] and w = Omega / E[r^2] in [0.2, 5]
    Hoyt:   q in [1e-4, 1] and w = Omega / E[r^2] in [0.2, 5]

and is refined by a cyclic coordinate search whose line searches are bounded
scalar minimizations.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from core.exceptions import (ConfigurationError, EmptyEnsembleError, FitConvergenceError,
                             SpecialFunctionDomainError)
from core.field_maps import FieldGrid
from core.specfun import log_bessel_i0
from utils.logger import get_logger

logger = get_logger("core.fading_stats")

MIN_FIT_SAMPLES = 100
MAX_SWEEPS = 500
RELATIVE_TOLERANCE = 1e-8
LINE_SEARCH_XATOL = 1e-10

K_FACTOR_MAX = 1e6
KAPPA_BOUNDS = (0.0, math.log1p(K_FACTOR_MAX))
OMEGA_RATIO_BOUNDS = (0.2, 5.0)
Q_BOUNDS = (1e-4, 1.0)

RICIAN = "rician"
HOYT = "hoyt"


@dataclass
class EnvelopeEnsemble:
    """RMS-normalized envelope samples with a record of where they came from."""
    samples: np.ndarray
    source_meta: Dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return int(len(self.samples))

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples ** 2))) if len(self.samples) else 0.0


@dataclass
class EmpiricalPdf:
    bin_edges: np.ndarray
    densities: np.ndarray
    n_samples: int
    bin_count: int

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def integral(self) -> float:
        return float(np.sum(self.densities * self.widths))


@dataclass
class FadingFit:
    """
    Fitted envelope model.

    params holds (s, sigma, omega) for Rician or (q, omega) for Hoyt; derived
    is the Rician K-factor or the Hoyt q.
    """
    model: str
    params: Dict[str, float]
    derived: float
    log_likelihood: float
    at_bound: bool = False
    metadata: Dict = field(default_factory=dict)

    @property
    def k_factor(self) -> Optional[float]:
        return self.derived if self.model == RICIAN else None

    @property
    def q(self) -> Optional[float]:
        return self.derived if self.model == HOYT else None

    def to_dict(self) -> Dict:
        return {
            "model": self.model,
            "params": {key: float(value) for key, value in self.params.items()},
            "K_or_q": float(self.derived),
            "log_likelihood": float(self.log_likelihood),
            "at_bound": bool(self.at_bound),
        }


# --- Ensembles -----------------------------------------------------------------

def ring_ensemble(field_grid: FieldGrid, center: Sequence[float], r_min: float, r_max: float) -> np.ndarray:
    """
    |E_z| at every unmasked grid point with r_min <= |p - center| <= r_max.

    Raises:
        ConfigurationError: radii not ordered as r_max > r_min > 0.
        EmptyEnsembleError: no unmasked point falls in the annulus.
    """
    if not r_max > r_min > 0:
        raise ConfigurationError(f"ring radii must satisfy r_max > r_min > 0, got {r_min}, {r_max}")
    points = field_grid.grid.points()
    radius = np.hypot(points[..., 0] - center[0], points[..., 1] - center[1])
    inside = (radius >= r_min) & (radius <= r_max) & ~field_grid.masked
    if not np.any(inside):
        raise EmptyEnsembleError(f"no unmasked samples in the ring [{r_min:.4g}, {r_max:.4g}] m")
    return np.abs(field_grid.values[inside])


def rms_normalize(samples: Sequence[float], source_meta: Optional[Dict] = None) -> EnvelopeEnsemble:
    """Divides samples by their root-mean-square so the result has unit RMS."""
    values = np.asarray(samples, dtype=float).ravel()
    if values.size == 0:
        raise EmptyEnsembleError("cannot normalize an empty ensemble")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ConfigurationError("envelope samples must be finite and non-negative")
    rms = math.sqrt(float(np.mean(values * values)))
    if rms == 0.0:
        raise EmptyEnsembleError("all envelope samples are zero")
    return EnvelopeEnsemble(samples=values / rms, source_meta=dict(source_meta or {}))


def pool_ensembles(ensembles: Sequence[EnvelopeEnsemble]) -> EnvelopeEnsemble:
    """Concatenates individually normalized ensembles, e.g. rings from several room sizes."""
    if not ensembles:
        raise EmptyEnsembleError("nothing to pool")
    samples = np.concatenate([ens.samples for ens in ensembles])
    return EnvelopeEnsemble(samples=samples, source_meta={"pooled": [ens.source_meta for ens in ensembles]})


def empirical_pdf(ens: EnvelopeEnsemble, bins: int = 50,
                  value_range: Optional[Tuple[float, float]] = None) -> EmpiricalPdf:
    """
    Histogram density n_j / (N * dr) over uniform bins.

    Args:
        ens: Envelope ensemble.
        bins: Number of bins (at least 2).
        value_range: Histogram span; defaults to [min, max] of the samples.

    Returns:
        EmpiricalPdf integrating to 1.
    """
    if bins < 2:
        raise ConfigurationError("need at least 2 bins")
    samples = ens.samples
    if samples.size == 0:
        raise EmptyEnsembleError("empty ensemble")
    low, high = value_range if value_range is not None else (float(samples.min()), float(samples.max()))
    if not high > low:
        raise ConfigurationError(f"degenerate histogram range [{low}, {high}]")
    if np.any(samples < low) or np.any(samples > high):
        raise ConfigurationError("samples fall outside the histogram range")

    counts, edges = np.histogram(samples, bins=bins, range=(low, high))
    width = (high - low) / bins
    densities = counts / (samples.size * width)
    return EmpiricalPdf(bin_edges=edges, densities=densities, n_samples=int(samples.size), bin_count=bins)


def freedman_diaconis_bins(ens: EnvelopeEnsemble) -> int:
    """Freedman-Diaconis bin count: width 2 IQR N^(-1/3)."""
    samples = ens.samples
    if samples.size < 2:
        return 1
    q75, q25 = np.percentile(samples, [75.0, 25.0])
    width = 2.0 * (q75 - q25) / samples.size ** (1.0 / 3.0)
    span = float(samples.max() - samples.min())
    if width <= 0 or span <= 0:
        return 1
    return max(1, int(math.ceil(span / width)))


# --- Densities -----------------------------------------------------------------

def _envelope(r) -> np.ndarray:
    values = np.asarray(r, dtype=float)
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise SpecialFunctionDomainError("envelope values must be finite and non-negative")
    return values


def _log_r(r: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(r)


def log_rician_pdf(r, s: float, sigma: float):
    """Log of the Rice density (r / sigma^2) exp(-(r^2 + s^2) / 2 sigma^2) I0(r s / sigma^2)."""
    if not (s >= 0 and sigma > 0):
        raise SpecialFunctionDomainError(f"rician parameters need s >= 0 and sigma > 0, got s={s}, sigma={sigma}")
    values = _envelope(r)
    var = sigma * sigma
    out = (_log_r(values) - math.log(var) - (values * values + s * s) / (2.0 * var)
           + log_bessel_i0(values * s / var))
    return out if np.ndim(r) else float(out)


def rician_pdf(r, s: float, sigma: float):
    out = np.exp(log_rician_pdf(r, s, sigma))
    return out if np.ndim(r) else float(out)


def log_hoyt_pdf(r, q: float, omega: float):
    """
    Log of the Hoyt (Nakagami-q) density with Omega = E[r^2]:

        (1 + q^2) r / (q Omega) exp(-(1 + q^2)^2 r^2 / (4 q^2 Omega)) I0((1 - q^4) r^2 / (4 q^2 Omega))
    """
    if not (0 < q <= 1 and omega > 0):
        raise SpecialFunctionDomainError(f"hoyt parameters need 0 < q <= 1 and omega > 0, got q={q}, omega={omega}")
    values = _envelope(r)
    r2 = values * values
    scale = 4.0 * q * q * omega
    out = (math.log1p(q * q) + _log_r(values) - math.log(q * omega)
           - (1.0 + q * q) ** 2 * r2 / scale + log_bessel_i0((1.0 - q ** 4) * r2 / scale))
    return out if np.ndim(r) else float(out)


def hoyt_pdf(r, q: float, omega: float):
    out = np.exp(log_hoyt_pdf(r, q, omega))
    return out if np.ndim(r) else float(out)


# --- Synthetic samples -----------------------------------------------------------

def sample_rician(n: int, k_factor: float, omega: float = 1.0,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """|s + W| with W circular Gaussian; K = s^2 / (2 sigma^2), Omega = s^2 + 2 sigma^2."""
    if not (k_factor >= 0 and omega > 0):
        raise ConfigurationError("need K >= 0 and omega > 0")
    rng = rng or np.random.default_rng(0)
    s = math.sqrt(k_factor * omega / (k_factor + 1.0))
    sigma = math.sqrt(omega / (2.0 * (k_factor + 1.0)))
    in_phase = s + sigma * rng.standard_normal(n)
    quadrature = sigma * rng.standard_normal(n)
    return np.hypot(in_phase, quadrature)


def sample_hoyt(n: int, q: float, omega: float = 1.0,
                rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """|X + jY| with zero-mean X, Y and sigma_Y / sigma_X = q."""
    if not (0 < q <= 1 and omega > 0):
        raise ConfigurationError("need 0 < q <= 1 and omega > 0")
    rng = rng or np.random.default_rng(0)
    sigma_x = math.sqrt(omega / (1.0 + q * q))
    in_phase = sigma_x * rng.standard_normal(n)
    quadrature = q * sigma_x * rng.standard_normal(n)
    return np.hypot(in_phase, quadrature)


# --- Maximum likelihood ----------------------------------------------------------

def _rician_shape(kappa: float, w: float) -> Tuple[float, float]:
    k = math.expm1(kappa)
    s = math.sqrt(k * w / (k + 1.0))
    sigma = math.sqrt(w / (2.0 * (k + 1.0)))
    return s, sigma


def _rician_start(u: np.ndarray) -> Tuple[float, float]:
    ratio = float(np.mean(u ** 4))
    if ratio >= 2.0:
        k = 0.0
    elif ratio <= 1.0:
        k = K_FACTOR_MAX
    else:
        root = math.sqrt(2.0 - ratio)
        k = root / (1.0 - root)
    return float(np.clip(math.log1p(k), *KAPPA_BOUNDS)), 1.0


def _hoyt_start(u: np.ndarray) -> Tuple[float, float]:
    ratio = float(np.mean(u ** 4))
    if ratio <= 2.0:
        q = 1.0
    elif ratio >= 3.0:
        q = Q_BOUNDS[0]
    else:
        c = (2.0 * ratio - 2.0) / (ratio - 3.0)
        q = math.sqrt((-c - math.sqrt(c * c - 4.0)) / 2.0)
    return float(np.clip(q, *Q_BOUNDS)), 1.0


def _coordinate_search(objective, start: Sequence[float], bounds: Sequence[Tuple[float, float]],
                       model: str) -> Tuple[np.ndarray, float, int]:
    """Cyclic bounded line searches; a coordinate moves only when the objective improves."""
    x = np.array(start, dtype=float)
    best = objective(x)
    for sweep in range(1, MAX_SWEEPS + 1):
        previous = best
        for index, (low, high) in enumerate(bounds):
            def along(value, index=index):
                trial = x.copy()
                trial[index] = value
                return objective(trial)

            result = minimize_scalar(along, bounds=(low, high), method="bounded",
                                     options={"xatol": LINE_SEARCH_XATOL, "maxiter": MAX_SWEEPS})
            if result.fun < best:
                x[index] = result.x
                best = float(result.fun)
        if previous - best <= RELATIVE_TOLERANCE * max(1.0, abs(best)):
            return x, best, sweep
    raise FitConvergenceError(
        f"{model} fit did not converge in {MAX_SWEEPS} sweeps",
        diagnostics={"model": model, "sweeps": MAX_SWEEPS, "params": x.tolist(), "objective": best},
    )


def _near_bound(value: float, bounds: Tuple[float, float]) -> bool:
    tolerance = 1e-6 * (bounds[1] - bounds[0])
    return value - bounds[0] <= tolerance or bounds[1] - value <= tolerance


def _unit_rms(ens: EnvelopeEnsemble) -> Tuple[np.ndarray, float]:
    samples = np.asarray(ens.samples, dtype=float)
    if samples.size < MIN_FIT_SAMPLES:
        raise EmptyEnsembleError(f"need at least {MIN_FIT_SAMPLES} samples to fit, got {samples.size}")
    rms = math.sqrt(float(np.mean(samples * samples)))
    if rms == 0.0:
        raise EmptyEnsembleError("all envelope samples are zero")
    return samples / rms, rms


def fit_rician(ens: EnvelopeEnsemble) -> FadingFit:
    """
    Maximum-likelihood Rician fit.

    Returns:
        FadingFit with params s, sigma, omega and derived K = s^2 / (2 sigma^2).
        at_bound is set when K reaches its cap or Omega leaves the search box.

    Raises:
        EmptyEnsembleError: fewer than 100 samples.
        FitConvergenceError: coordinate search exhausted its sweep cap.
    """
    u, rms = _unit_rms(ens)

    def negative_loglik(x: np.ndarray) -> float:
        s, sigma = _rician_shape(x[0], x[1])
        return -float(np.sum(log_rician_pdf(u, s, sigma)))

    bounds = (KAPPA_BOUNDS, OMEGA_RATIO_BOUNDS)
    x, best, sweeps = _coordinate_search(negative_loglik, _rician_start(u), bounds, RICIAN)
    s, sigma = _rician_shape(x[0], x[1])
    k_factor = math.expm1(x[0])
    at_bound = x[0] >= KAPPA_BOUNDS[1] - 1e-6 * KAPPA_BOUNDS[1] or _near_bound(x[1], OMEGA_RATIO_BOUNDS)
    if at_bound:
        logger.warning(f"⚠️ Rician fit stopped at a parameter bound (K={k_factor:.4g})")
    return FadingFit(
        model=RICIAN,
        params={"s": s * rms, "sigma": sigma * rms, "omega": x[1] * rms * rms},
        derived=k_factor,
        log_likelihood=-best - u.size * math.log(rms),
        at_bound=bool(at_bound),
        metadata={"sweeps": sweeps, "n_samples": int(u.size)},
    )


def fit_hoyt(ens: EnvelopeEnsemble) -> FadingFit:
    """Maximum-likelihood Hoyt fit; params q and omega, derived q."""
    u, rms = _unit_rms(ens)

    def negative_loglik(x: np.ndarray) -> float:
        return -float(np.sum(log_hoyt_pdf(u, x[0], x[1])))

    bounds = (Q_BOUNDS, OMEGA_RATIO_BOUNDS)
    x, best, sweeps = _coordinate_search(negative_loglik, _hoyt_start(u), bounds, HOYT)
    q = float(x[0])
    at_bound = q <= Q_BOUNDS[0] * (1.0 + 1e-6) or _near_bound(x[1], OMEGA_RATIO_BOUNDS)
    if at_bound:
        logger.warning(f"⚠️ Hoyt fit stopped at a parameter bound (q={q:.4g})")
    return FadingFit(
        model=HOYT,
        params={"q": q, "omega": x[1] * rms * rms},
        derived=q,
        log_likelihood=-best - u.size * math.log(rms),
        at_bound=bool(at_bound),
        metadata={"sweeps": sweeps, "n_samples": int(u.size)},
    )


def select_model(ens: EnvelopeEnsemble) -> FadingFit:
    """Fits both families and returns the one with the higher log-likelihood (Rician on ties)."""
    rician = fit_rician(ens)
    hoyt = fit_hoyt(ens)
    chosen = hoyt if hoyt.log_likelihood > rician.log_likelihood else rician
    chosen.metadata["candidates"] = {RICIAN: rician.to_dict(), HOYT: hoyt.to_dict()}
    chosen.metadata["loglik_rician"] = rician.log_likelihood
    chosen.metadata["loglik_hoyt"] = hoyt.log_likelihood
    logger.info(f"📊 Selected {chosen.model}: K_or_q={chosen.derived:.4g} "
                f"(LL rician={rician.log_likelihood:.2f}, hoyt={hoyt.log_likelihood:.2f})")
    return chosen


def fit_report(ens: EnvelopeEnsemble, fit: FadingFit, wall: str, bins: int) -> Dict:
    """Report record: wall, model, params, K_or_q, both log-likelihoods, sample and bin counts."""
    return {
        "wall": wall,
        "model": fit.model,
        "params": {key: float(value) for key, value in fit.params.items()},
        "K_or_q": float(fit.derived),
        "at_bound": bool(fit.at_bound),
        "loglik_rician": float(fit.metadata.get("loglik_rician", float("nan"))),
        "loglik_hoyt": float(fit.metadata.get("loglik_hoyt", float("nan"))),
        "n_samples": ens.n_samples,
        "bins": int(bins),
        "freedman_diaconis_bins": freedman_diaconis_bins(ens),
    }
