"""Sub-band room equalization.

The workflow: measure each RIR's gain in seven octave-spaced bands
relative to 1 kHz, model the gain vectors of a real-RIR corpus with a
Gaussian mixture, draw fresh target vectors from the mixture, and match
each synthetic RIR to its target with a linear-phase FIR correction
filter designed by the window method.
"""

import json
import logging

import numpy as np
from dataclasses import dataclass, field
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_triangular
from scipy.signal import fftconvolve, firwin2, minimum_phase
from sklearn.base import BaseEstimator, TransformerMixin

from .audio import Domain, ImpulseResponse, magnitude_response
from .errors import DegenerateDataError, ZeroEnergyError
from .validation import (
    N_BANDS,
    RIR_LENGTH,
    SAMPLE_RATE,
    check_finite,
    check_gain_matrix,
    check_odd,
    check_rir_matrix,
)

log = logging.getLogger(__name__)

BAND_CENTERS_HZ = (62.5, 125.0, 250.0, 500.0, 2000.0, 4000.0, 8000.0)
REFERENCE_HZ = 1000.0
GAIN_FFT_SIZE = 32768
MAX_CORRECTION_DB = 12.0
DEFAULT_NUM_TAPS = 2047

# 1/3-octave half-width on either side of a band center
_HALF_WIDTH = 2.0 ** (1.0 / 6.0)


@dataclass
class RelativeGainVector:
    """Seven per-band gains in dB relative to the 1 kHz band."""

    gains_db: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gains_db, dtype=np.float64)
        if g.shape != (N_BANDS,):
            raise ValueError(f"expected {N_BANDS} band gains, got shape {g.shape}")
        check_finite(g, "gains_db")
        self.gains_db = g


@dataclass
class FirFilter:
    """Linear-phase Type I correction filter and the corrections it targets."""

    taps: np.ndarray
    design_grid: np.ndarray = field(default_factory=lambda: np.zeros(N_BANDS))


def _as_gains(x):
    return np.asarray(getattr(x, "gains_db", x), dtype=np.float64)


def spectrum_band_gains(db_spectrum, sample_rate=SAMPLE_RATE):
    """Average a dB spectrum over 1/3-octave windows at each band center.

    `db_spectrum` is an rfft-grid spectrum (any FFT size); returns
    (band_gains[7], reference_gain) in dB, not yet referenced.
    """
    db_spectrum = np.asarray(db_spectrum, dtype=np.float64)
    n_bins = db_spectrum.size
    freqs = np.linspace(0.0, sample_rate / 2.0, n_bins)

    def window_mean(fc):
        lo, hi = fc / _HALF_WIDTH, fc * _HALF_WIDTH
        mask = (freqs >= lo) & (freqs <= hi)
        return float(db_spectrum[mask].mean())

    gains = np.array([window_mean(fc) for fc in BAND_CENTERS_HZ])
    return gains, window_mean(REFERENCE_HZ)


def relative_gains(rir, fft_size=GAIN_FFT_SIZE):
    """7-band gains of an RIR relative to its own 1 kHz band."""
    x = np.asarray(getattr(rir, "samples", rir), dtype=np.float64)
    if not np.any(x):
        raise ZeroEnergyError("cannot measure band gains of a zero signal")
    db = magnitude_response(x, fft_size)
    gains, ref = spectrum_band_gains(db)
    return RelativeGainVector(gains - ref)


# ---------------------------------------------------------------------------
# Gaussian mixture over gain vectors

GMM_JSON_VERSION = 1


class GainMixture(BaseEstimator):
    """Full-covariance Gaussian mixture fitted by EM on 7-band gain vectors.

    Deterministic for a fixed `random_state`: k-means++ seeding picks the
    initial centers, and `log_likelihoods_` records the total data
    log-likelihood after every EM iteration.
    """

    def __init__(self, n_components=7, max_iter=500, tol=1e-6, reg_covar=1e-6, random_state=None):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.reg_covar = reg_covar
        self.random_state = random_state

    # -- fitting ------------------------------------------------------------

    def fit(self, X, y=None):
        X = check_gain_matrix(X)
        n, d = X.shape
        k = int(self.n_components)
        if k < 1:
            raise ValueError("n_components must be positive")
        if n < 10 * k:
            raise ValueError(f"need at least {10 * k} samples to fit {k} components, got {n}")
        if np.all(X.var(axis=0) == 0.0):
            raise DegenerateDataError("training vectors have zero variance in every dimension")

        rng = np.random.default_rng(self.random_state)
        means = self._kmeanspp_centers(X, k, rng)

        # hard assignment to the seed centers gives the initial parameters
        d2 = ((X[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        weights = np.zeros(k)
        covs = np.zeros((k, d, d))
        for j in range(k):
            members = X[assign == j]
            weights[j] = max(members.shape[0], 1) / n
            if members.shape[0] > 0:
                means[j] = members.mean(axis=0)
                diff = members - means[j]
                covs[j] = diff.T @ diff / members.shape[0]
            covs[j][np.diag_indices(d)] += self.reg_covar
        weights /= weights.sum()

        lls = []
        for _ in range(int(self.max_iter)):
            log_resp, ll = self._e_step(X, weights, means, covs)
            weights, means, covs = self._m_step(X, log_resp)
            lls.append(ll)
            if len(lls) > 1 and lls[-1] - lls[-2] < self.tol:
                break

        self.weights_ = weights
        self.means_ = means
        self.covariances_ = covs
        self.log_likelihoods_ = np.array(lls)
        self.n_iter_ = len(lls)
        self.fitted_on_ = n
        return self

    @staticmethod
    def _kmeanspp_centers(X, k, rng):
        n = X.shape[0]
        centers = [X[rng.integers(n)]]
        for _ in range(1, k):
            d2 = np.min(
                ((X[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2), axis=1
            )
            total = d2.sum()
            if total == 0.0:
                centers.append(X[rng.integers(n)])
                continue
            centers.append(X[rng.choice(n, p=d2 / total)])
        return np.array(centers)

    def _log_gauss(self, X, means, covs):
        n, d = X.shape
        k = means.shape[0]
        out = np.empty((n, k))
        for j in range(k):
            chol = np.linalg.cholesky(covs[j])
            diff = X - means[j]
            y = solve_triangular(chol, diff.T, lower=True)
            maha = (y**2).sum(axis=0)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            out[:, j] = -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)
        return out

    def _e_step(self, X, weights, means, covs):
        weighted = self._log_gauss(X, means, covs) + np.log(weights)[None, :]
        norm = np.logaddexp.reduce(weighted, axis=1)
        return weighted - norm[:, None], float(norm.sum())

    def _m_step(self, X, log_resp):
        resp = np.exp(log_resp)
        nk = resp.sum(axis=0) + 10.0 * np.finfo(float).eps
        weights = nk / nk.sum()
        means = resp.T @ X / nk[:, None]
        d = X.shape[1]
        covs = np.empty((means.shape[0], d, d))
        for j in range(means.shape[0]):
            diff = X - means[j]
            covs[j] = (resp[:, j, None] * diff).T @ diff / nk[j]
            covs[j][np.diag_indices(d)] += self.reg_covar
        return weights, means, covs

    # -- sampling and persistence -------------------------------------------

    def sample(self, n_samples, seed=None):
        """Draw i.i.d. gain vectors; bit-deterministic under a fixed seed."""
        self._check_fitted()
        n_samples = int(n_samples)
        if n_samples < 0:
            raise ValueError("n_samples must be non-negative")
        d = self.means_.shape[1]
        if n_samples == 0:
            return np.empty((0, d))
        rng = np.random.default_rng(self.random_state if seed is None else seed)
        ks = rng.choice(self.weights_.size, size=n_samples, p=self.weights_)
        z = rng.standard_normal((n_samples, d))
        chols = np.linalg.cholesky(self.covariances_)
        return self.means_[ks] + np.einsum("nij,nj->ni", chols[ks], z)

    def score_samples(self, X):
        """Per-sample log-likelihood under the fitted mixture."""
        self._check_fitted()
        X = check_gain_matrix(X)
        weighted = self._log_gauss(X, self.means_, self.covariances_) + np.log(self.weights_)
        return np.logaddexp.reduce(weighted, axis=1)

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise ValueError("GainMixture is not fitted")

    def to_json_dict(self):
        self._check_fitted()
        return {
            "version": GMM_JSON_VERSION,
            "band_centers_hz": list(BAND_CENTERS_HZ),
            "fitted_on": int(self.fitted_on_),
            "components": [
                {
                    "weight": float(w),
                    "mean": m.tolist(),
                    "covariance": c.tolist(),
                }
                for w, m, c in zip(self.weights_, self.means_, self.covariances_)
            ],
        }

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("version") != GMM_JSON_VERSION:
            raise ValueError(f"unsupported gain-model version {doc.get('version')!r}")
        comps = doc["components"]
        model = cls(n_components=len(comps))
        model.weights_ = np.array([c["weight"] for c in comps])
        model.means_ = np.array([c["mean"] for c in comps])
        model.covariances_ = np.array([c["covariance"] for c in comps])
        model.log_likelihoods_ = np.array([])
        model.n_iter_ = 0
        model.fitted_on_ = int(doc.get("fitted_on", 0))
        return model


def save_gmm(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_json_dict(), fh, indent=2)


def load_gmm(path):
    with open(path) as fh:
        return GainMixture.from_json_dict(json.load(fh))


def fit_gmm(vectors, n_components=7, seed=0):
    """Fit a GainMixture on a stack of relative-gain vectors."""
    return GainMixture(n_components=n_components, random_state=seed).fit(vectors)


def sample_gains(model, n, seed=0):
    return model.sample(n, seed=seed)


# ---------------------------------------------------------------------------
# FIR correction design and application


def design_fir(correction_db, num_taps=DEFAULT_NUM_TAPS):
    """Window-method FIR filter realizing per-band dB corrections.

    The target magnitude passes through the 7 band corrections plus 0 dB
    at 1 kHz, interpolated with a monotone cubic on a log-frequency axis.
    Each anchor value is held flat across its band's full 1/3-octave
    measurement window (so the measured window average equals the anchor),
    with the interpolant transitioning only in the gaps between windows;
    beyond the outermost windows the target is held constant.
    """
    num_taps = check_odd(num_taps, 127, "num_taps")
    corr = _as_gains(correction_db)
    if corr.shape != (N_BANDS,):
        raise ValueError(f"expected {N_BANDS} corrections, got shape {corr.shape}")
    check_finite(corr, "correction_db")

    anchor_hz = np.array(sorted(BAND_CENTERS_HZ + (REFERENCE_HZ,)))
    anchor_db = np.empty(anchor_hz.size)
    band_iter = iter(range(N_BANDS))
    for i, f in enumerate(anchor_hz):
        anchor_db[i] = 0.0 if f == REFERENCE_HZ else corr[next(band_iter)]

    # triple node (lower edge, center, upper edge) per anchor: equal values
    # force the monotone cubic's slope to zero at the window edges
    node_hz = np.concatenate([anchor_hz / _HALF_WIDTH, anchor_hz, anchor_hz * _HALF_WIDTH])
    node_db = np.concatenate([anchor_db, anchor_db, anchor_db])
    order = np.argsort(node_hz)
    node_hz, node_db = node_hz[order], node_db[order]

    interp = PchipInterpolator(np.log(node_hz), node_db)
    grid_hz = np.linspace(0.0, SAMPLE_RATE / 2.0, 4097)
    grid_db = np.empty_like(grid_hz)
    low = grid_hz <= node_hz[0]
    high = grid_hz >= node_hz[-1]
    mid = ~(low | high)
    grid_db[low] = node_db[0]
    grid_db[high] = node_db[-1]
    grid_db[mid] = interp(np.log(grid_hz[mid]))

    taps = firwin2(num_taps, grid_hz, 10.0 ** (grid_db / 20.0), fs=SAMPLE_RATE, window="hamming")
    return FirFilter(taps=taps, design_grid=corr.copy())


def equalize(rir, target, num_taps=DEFAULT_NUM_TAPS):
    """Filter an RIR so its band gains match a target gain vector.

    The correction is the difference between the target and the measured
    gains, clipped per band to +-12 dB (larger corrections degrade the
    window-method accuracy and are logged).  The correction filter is
    applied in its minimum-phase form: a linear-phase filter's pre-ring
    lands before the RIR onset and is lost when the output is cut back to
    the fixed length, which partially undoes narrow-band attenuation;
    the minimum-phase twin has the same magnitude response but rings only
    after the onset, where the truncation loss is negligible.
    """
    x = np.asarray(getattr(rir, "samples", rir), dtype=np.float64)
    current = relative_gains(x).gains_db
    correction = _as_gains(target) - current
    clipped = np.clip(correction, -MAX_CORRECTION_DB, MAX_CORRECTION_DB)
    if np.any(clipped != correction):
        log.warning(
            "correction clipped to +-%g dB for %s (requested %s)",
            MAX_CORRECTION_DB,
            getattr(rir, "source_id", "<array>") or "<array>",
            np.array2string(correction, precision=2),
        )
    fir = design_fir(clipped, num_taps)
    taps_mp = minimum_phase(fir.taps, method="homomorphic", n_fft=65536, half=False)

    y = fftconvolve(x, taps_mp)[:RIR_LENGTH]
    peak = np.max(np.abs(y))
    if peak == 0.0:
        raise ZeroEnergyError("equalized output is identically zero")
    y = y / peak

    in_domain = getattr(rir, "domain", Domain.SYNTHETIC)
    out_domain = (
        Domain.TRANSLATED_EQUALIZED if in_domain == Domain.TRANSLATED else Domain.EQUALIZED
    )
    return ImpulseResponse(y, SAMPLE_RATE, out_domain, getattr(rir, "source_id", ""))


# ---------------------------------------------------------------------------
# Estimator facade


class SubBandEqualizer(BaseEstimator, TransformerMixin):
    """fit() learns a gain mixture from real RIRs; transform() equalizes
    synthetic RIRs toward gains drawn from it.

    X is an array of waveforms with shape (n, 16384). transform() is
    deterministic for a fixed `random_state`: row i always receives the
    i-th sampled target.
    """

    def __init__(self, n_components=7, num_taps=DEFAULT_NUM_TAPS, random_state=None):
        self.n_components = n_components
        self.num_taps = num_taps
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_rir_matrix(X)
        gains = np.stack([relative_gains(row).gains_db for row in X])
        self.mixture_ = GainMixture(
            n_components=self.n_components, random_state=self.random_state
        ).fit(gains)
        return self

    def transform(self, X):
        if not hasattr(self, "mixture_"):
            raise ValueError("SubBandEqualizer is not fitted")
        X = check_rir_matrix(X)
        targets = self.mixture_.sample(X.shape[0], seed=self.random_state)
        out = np.empty_like(X)
        for i, (row, target) in enumerate(zip(X, targets)):
            out[i] = equalize(row, target, self.num_taps).samples
        return out
