"""Input validation helpers shared by the estimator classes and the
functional layer.

These mirror the role of sklearn's ``check_array`` for the domain objects
used here: fixed-length waveforms and 7-band gain vectors.
"""

import numpy as np

RIR_LENGTH = 16384
SAMPLE_RATE = 16000
N_BANDS = 7


def check_finite(x, name="array"):
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return x


def check_waveform(x, name="waveform"):
    """Validate a single 1-D waveform and return it as a float64 array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    return check_finite(x, name)


def check_rir_matrix(X, name="X"):
    """Coerce a batch of fixed-length RIR waveforms to shape (n, 16384).

    Accepts a 2-D array, a single waveform, or a sequence of waveforms /
    ImpulseResponse objects (anything exposing ``samples``).
    """
    if hasattr(X, "samples"):
        X = [X]
    if isinstance(X, (list, tuple)):
        X = np.stack([np.asarray(getattr(x, "samples", x), dtype=np.float64) for x in X])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[1] != RIR_LENGTH:
        raise ValueError(
            f"{name} must have shape (n, {RIR_LENGTH}), got {X.shape}"
        )
    return check_finite(X, name)


def check_gain_matrix(X, name="X"):
    """Coerce a batch of 7-band gain vectors to shape (n, 7)."""
    if isinstance(X, (list, tuple)):
        X = np.stack([np.asarray(getattr(x, "gains_db", x), dtype=np.float64) for x in X])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[1] != N_BANDS:
        raise ValueError(f"{name} must have shape (n, {N_BANDS}), got {X.shape}")
    return check_finite(X, name)


def check_odd(n, minimum, name="num_taps"):
    n = int(n)
    if n < minimum or n % 2 == 0:
        raise ValueError(f"{name} must be an odd integer >= {minimum}, got {n}")
    return n


def check_power_of_two(n, minimum, name="fft_size"):
    n = int(n)
    if n < minimum or n & (n - 1) != 0:
        raise ValueError(f"{name} must be a power of two >= {minimum}, got {n}")
    return n
