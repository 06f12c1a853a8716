"""Waveform I/O, resampling, length normalization, and time-frequency
analysis shared by every other module.

All processing assumes mono impulse responses at 16 kHz with a fixed
length of 16384 samples (1.024 s); `normalize_rir` is the single entry
point that coerces arbitrary audio into that shape.
"""

import enum
from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, resample_poly

from .errors import AllZeroInputError, AudioFileError
from .validation import RIR_LENGTH, SAMPLE_RATE, check_waveform

DB_FLOOR = -120.0
MAG_CLAMP = 1e-10

_INT_FULL_SCALE = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


class Domain(enum.Enum):
    """Provenance tag carried by an impulse response through the pipeline."""

    SYNTHETIC = "synthetic"
    REAL = "real"
    TRANSLATED = "translated"
    EQUALIZED = "equalized"
    TRANSLATED_EQUALIZED = "translated_equalized"


@dataclass
class ImpulseResponse:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    domain: Domain = Domain.SYNTHETIC
    source_id: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)


@dataclass
class Spectrogram:
    """STFT magnitudes in dB, laid out (frequency bins, time frames)."""

    magnitudes: np.ndarray
    window_size: int
    hop: int
    sample_rate: int = SAMPLE_RATE

    frequencies: np.ndarray = field(init=False)
    times: np.ndarray = field(init=False)

    def __post_init__(self):
        self.frequencies = np.fft.rfftfreq(self.window_size, d=1.0 / self.sample_rate)
        n_frames = self.magnitudes.shape[1]
        self.times = (np.arange(n_frames) * self.hop + self.window_size / 2) / self.sample_rate


def load_waveform(path):
    """Read a WAV file and return (samples, sample_rate).

    Multichannel files are reduced to channel 0. Integer PCM is scaled by
    its full-scale value so the output is linear amplitude in [-1, 1];
    float data is returned unchanged.
    """
    try:
        sample_rate, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise AudioFileError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise AudioFileError(f"unsupported WAV encoding in {path}: {exc}") from exc
    except Exception as exc:
        raise AudioFileError(f"cannot read {path}: {exc}") from exc
    if data.size == 0:
        raise AudioFileError(f"{path} contains no audio frames")
    if data.ndim > 1:
        data = data[:, 0]
    if data.dtype in _INT_FULL_SCALE:
        samples = data.astype(np.float64) / _INT_FULL_SCALE[data.dtype]
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AudioFileError(f"unsupported WAV sample format {data.dtype} in {path}")
    return samples, int(sample_rate)


def write_waveform(path, samples, sample_rate=SAMPLE_RATE):
    """Write mono float32 WAV."""
    samples = np.asarray(samples, dtype=np.float32)
    wavfile.write(path, int(sample_rate), samples)


def resample(x, sr_in, sr_out):
    """Windowed-sinc polyphase resampling (Kaiser beta 8.6, 64 taps per phase).

    Returns the input untouched when the rates already match, which keeps
    `normalize_rir` exactly idempotent.
    """
    if sr_in <= 0 or sr_out <= 0:
        raise ValueError("sample rates must be positive")
    g = gcd(int(sr_in), int(sr_out))
    up, down = int(sr_out) // g, int(sr_in) // g
    if up == 1 and down == 1:
        return np.asarray(x, dtype=np.float64)
    n_taps = 64 * max(up, down) + 1
    h = firwin(n_taps, 1.0 / max(up, down), window=("kaiser", 8.6))
    return resample_poly(np.asarray(x, dtype=np.float64), up, down, window=h)


def normalize_rir(samples, sample_rate, domain=Domain.SYNTHETIC, source_id=""):
    """Coerce a raw waveform into the canonical RIR shape.

    Resamples to 16 kHz, truncates or zero-pads the tail to 16384 samples,
    and peak-normalizes to unit amplitude. Raises AllZeroInputError when
    there is no signal to normalize.
    """
    x = check_waveform(samples, "samples")
    x = resample(x, sample_rate, SAMPLE_RATE)
    if x.size >= RIR_LENGTH:
        x = x[:RIR_LENGTH]
    else:
        x = np.concatenate([x, np.zeros(RIR_LENGTH - x.size)])
    peak = np.max(np.abs(x))
    if peak == 0.0:
        raise AllZeroInputError("waveform is identically zero")
    x = x / peak
    return ImpulseResponse(x, SAMPLE_RATE, domain, source_id)


def magnitude_response(rir, fft_size=32768):
    """Per-bin gain in dB for bins 0..fft_size/2.

    Magnitudes are clamped at 1e-10 before the log so silent bins map to
    -200 dB instead of -Inf.
    """
    fft_size = int(fft_size)
    if fft_size < RIR_LENGTH or fft_size & (fft_size - 1) != 0:
        raise ValueError(f"fft_size must be a power of two >= {RIR_LENGTH}, got {fft_size}")
    x = np.asarray(getattr(rir, "samples", rir), dtype=np.float64)
    mags = np.abs(np.fft.rfft(x, n=fft_size))
    return 20.0 * np.log10(np.maximum(mags, MAG_CLAMP))


def spectrogram(rir, window_size=512, hop=256):
    """Hann-windowed STFT magnitudes in dB, floor-clamped at -120 dB."""
    window_size, hop = int(window_size), int(hop)
    if not (0 < hop <= window_size <= RIR_LENGTH):
        raise ValueError(
            f"need 0 < hop <= window_size <= {RIR_LENGTH}, got hop={hop}, window={window_size}"
        )
    x = np.asarray(getattr(rir, "samples", rir), dtype=np.float64)
    if x.size != RIR_LENGTH:
        raise ValueError(f"expected a {RIR_LENGTH}-sample RIR, got {x.size}")
    n_frames = (x.size - window_size) // hop + 1
    idx = np.arange(window_size)[np.newaxis, :] + hop * np.arange(n_frames)[:, np.newaxis]
    frames = x[idx] * np.hanning(window_size)
    mags = np.abs(np.fft.rfft(frames, axis=1))
    db = 20.0 * np.log10(np.maximum(mags, MAG_CLAMP))
    db = np.maximum(db, DB_FLOOR)
    return Spectrogram(db.T, window_size, hop, SAMPLE_RATE)
