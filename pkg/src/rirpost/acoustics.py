"""Acoustic-parameter estimation for impulse responses.

Implements the four room-acoustic quality measures used to compare RIR
corpora: reverberation time (T60, via Schroeder backward integration and
a T30 line fit), early decay time (EDT), direct-to-reverberant ratio
(DRR), and the 50 ms early-to-late energy index (CTE).

All estimators are energy-ratio or decay-slope based and therefore exact
under amplitude scaling. Onsets are taken at the global magnitude peak so
propagation delay in simulated RIRs does not bias the windows.
"""

from dataclasses import dataclass
from math import isnan

import numpy as np

from .errors import InsufficientDecayError, ZeroEnergyError
from .validation import SAMPLE_RATE

EDC_FLOOR_DB = -300.0
DIRECT_WINDOW_S = 2.5e-3
EARLY_WINDOW_S = 50e-3
RATIO_CLAMP_DB = 60.0


@dataclass
class DecayCurve:
    """Schroeder energy-decay curve in dB, normalized to 0 dB at sample 0."""

    edc_db: np.ndarray
    sample_rate: int = SAMPLE_RATE


@dataclass
class AcousticParams:
    """T60/EDT in seconds, DRR/CTE in dB. NaN marks a failed estimate."""

    t60: float
    drr: float
    edt: float
    cte: float

    def is_complete(self):
        return not any(isnan(v) for v in (self.t60, self.drr, self.edt, self.cte))


def _samples(rir):
    return np.asarray(getattr(rir, "samples", rir), dtype=np.float64)


def _sample_rate(rir):
    return int(getattr(rir, "sample_rate", SAMPLE_RATE))


def schroeder_curve(rir):
    """Backward-integrated energy decay: edc[n] = 10*log10(tail energy / total).

    The curve is non-increasing by construction; zero-tail regions are
    clamped at -300 dB rather than -Inf.
    """
    x = _samples(rir)
    energy = np.cumsum(x[::-1] ** 2)[::-1]
    total = energy[0]
    if total <= 0.0:
        raise ZeroEnergyError("impulse response has zero energy")
    ratio = energy / total
    with np.errstate(divide="ignore"):
        edc = 10.0 * np.log10(ratio)
    edc = np.maximum(edc, EDC_FLOOR_DB)
    return DecayCurve(edc, _sample_rate(rir))


def _decay_slope(curve, start_db, stop_db):
    """Least-squares slope (dB/s) of the EDC between two levels.

    The fit runs from the first sample at or below `start_db` to the first
    at or below `stop_db`.
    """
    edc = curve.edc_db
    below_stop = np.nonzero(edc <= stop_db)[0]
    if below_stop.size == 0:
        raise InsufficientDecayError(f"decay curve never reaches {stop_db} dB")
    i_start = np.nonzero(edc <= start_db)[0][0]
    i_stop = below_stop[0]
    if i_stop - i_start < 1:
        raise InsufficientDecayError(
            f"fewer than 2 samples between {start_db} dB and {stop_db} dB"
        )
    t = np.arange(i_start, i_stop + 1) / curve.sample_rate
    slope, _ = np.polyfit(t, edc[i_start : i_stop + 1], 1)
    if slope >= 0.0:
        raise InsufficientDecayError("decay curve is not decreasing over the fit range")
    return slope


def estimate_t60(curve):
    """T60 from the T30 method: fit between -5 and -35 dB, extrapolate to 60 dB."""
    slope = _decay_slope(curve, -5.0, -35.0)
    return 60.0 / -slope


def estimate_edt(curve):
    """Early decay time: 6x the fitted time to fall from 0 to -10 dB."""
    slope = _decay_slope(curve, 0.0, -10.0)
    return 60.0 / -slope


def _clamped_ratio_db(num, den):
    if num <= 0.0:
        return -RATIO_CLAMP_DB
    if den <= 0.0:
        return RATIO_CLAMP_DB
    return float(np.clip(10.0 * np.log10(num / den), -RATIO_CLAMP_DB, RATIO_CLAMP_DB))


def estimate_drr(rir):
    """Direct-to-reverberant ratio over a +-2.5 ms window around the peak."""
    x = _samples(rir)
    energy = x**2
    total = energy.sum()
    if total <= 0.0:
        raise ZeroEnergyError("impulse response has zero energy")
    fs = _sample_rate(rir)
    peak = int(np.argmax(np.abs(x)))
    half = int(round(DIRECT_WINDOW_S * fs))
    lo, hi = max(0, peak - half), min(x.size, peak + half + 1)
    direct = energy[lo:hi].sum()
    return _clamped_ratio_db(direct, total - direct)


def estimate_cte(rir):
    """Early-to-late index: energy up to 50 ms past the peak vs the rest."""
    x = _samples(rir)
    energy = x**2
    total = energy.sum()
    if total <= 0.0:
        raise ZeroEnergyError("impulse response has zero energy")
    fs = _sample_rate(rir)
    peak = int(np.argmax(np.abs(x)))
    split = min(x.size, peak + int(round(EARLY_WINDOW_S * fs)))
    early = energy[:split].sum()
    return _clamped_ratio_db(early, total - early)


def acoustic_params(rir):
    """All four estimators for one RIR.

    T60/EDT come back as NaN when the decay curve is too short for the
    fit; DRR and CTE are always finite for nonzero input.
    """
    curve = schroeder_curve(rir)
    try:
        t60 = estimate_t60(curve)
    except InsufficientDecayError:
        t60 = float("nan")
    try:
        edt = estimate_edt(curve)
    except InsufficientDecayError:
        edt = float("nan")
    return AcousticParams(t60=t60, drr=estimate_drr(rir), edt=edt, cte=estimate_cte(rir))
