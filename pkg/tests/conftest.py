"""Shared fixtures: synthetic impulse responses with known acoustic
properties, small WAV corpora on disk, and miniature network configs
sized so gradient checks and training smoke tests stay fast.
"""

import numpy as np
import pytest

from rirpost.audio import Domain, ImpulseResponse, write_waveform
from rirpost.validation import RIR_LENGTH, SAMPLE_RATE

# decay constant: an envelope exp(-6.907755/T60 * t) falls by exactly
# 60 dB over T60 seconds, since ln(10^3) = 6.907755...
LOG_1E3 = float(np.log(1e3))


def exp_decay_rir(t60, seed=0, length=RIR_LENGTH, sample_rate=SAMPLE_RATE, direct_at=16):
    """Gaussian noise under an exponential envelope with a unit direct spike.

    The Schroeder curve of such a signal decays at almost exactly
    -60/t60 dB/s, so T60-style estimators have a closed-form truth.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(length) / sample_rate
    env = np.exp(-LOG_1E3 * t / t60)
    x = rng.standard_normal(length) * env
    x[:direct_at] = 0.0
    x[direct_at] = 1.0
    return x / np.max(np.abs(x))


def deterministic_exp_rir(t60, length=RIR_LENGTH, sample_rate=SAMPLE_RATE):
    """Pure two-sided exponential (no noise): |x[n]| = e^{-ln(1e3) n/(fs t60)}.

    Sign-alternating so the waveform has zero-ish mean; the energy decay
    is exactly exponential, which pins the T60 oracle to machine accuracy.
    """
    t = np.arange(length) / sample_rate
    x = np.exp(-LOG_1E3 * t / t60)
    x *= np.where(np.arange(length) % 2 == 0, 1.0, -1.0)
    return x


@pytest.fixture(scope="session")
def rir_pool_synthetic():
    return np.stack([exp_decay_rir(t60, seed=100 + i) for i, t60 in enumerate((0.3, 0.5, 0.8, 1.0))])


@pytest.fixture(scope="session")
def rir_pool_real():
    return np.stack([exp_decay_rir(t60, seed=200 + i) for i, t60 in enumerate((0.4, 0.6, 0.9, 1.1))])


def write_rir_corpus(directory, t60s, seed0=0, prefix="rir"):
    """Write one WAV per T60 value; returns the list of stems."""
    directory.mkdir(parents=True, exist_ok=True)
    stems = []
    for i, t60 in enumerate(t60s):
        stem = f"{prefix}{i:03d}"
        write_waveform(str(directory / f"{stem}.wav"), exp_decay_rir(t60, seed=seed0 + i))
        stems.append(stem)
    return stems


@pytest.fixture()
def tiny_gan():
    """Small networks on short waveforms: cheap enough for per-test training."""
    from rirpost.tsrirgan import DiscriminatorConfig, GeneratorConfig, TsRirGan

    gen = GeneratorConfig(base_channels=2, encoder_downsamples=2, n_residual_blocks=1)
    disc = DiscriminatorConfig(base_channels=2, n_layers=2)
    return TsRirGan(gen, disc, seed=0, input_length=64)


def tiny_pools(n_s=3, n_r=3, length=64, seed=0):
    rng = np.random.default_rng(seed)
    return (
        0.5 * rng.standard_normal((n_s, length)),
        0.5 * rng.standard_normal((n_r, length)),
    )


def as_rir(samples, domain=Domain.SYNTHETIC, source_id="fixture"):
    return ImpulseResponse(np.asarray(samples, dtype=np.float64), SAMPLE_RATE, domain, source_id)


# --- overfit micro-test configuration --------------------------------------
# Shared by the trainer-example tests and the acceptance gate so both verify
# the identical run. Short-input variant with an overcomplete bottleneck:
# full-length pencil-thin models collapse to near-zero output (their cycle
# loss floors at the pools' own mean |amplitude|), and matched learning rates
# saturate the discriminators, which drags the cycle loss upward; a slow
# discriminator lets the generators genuinely overfit reconstruction.
OVERFIT_LENGTH = 512
OVERFIT_STEPS = 500


def overfit_fixture(t60, seed, length=OVERFIT_LENGTH):
    rng = np.random.default_rng(seed)
    t = np.arange(length) / SAMPLE_RATE
    x = rng.standard_normal(length) * np.exp(-LOG_1E3 * t / t60)
    return x / np.max(np.abs(x))


def overfit_pools():
    pool_s = np.stack([overfit_fixture(t, 100 + i) for i, t in enumerate((0.05, 0.1, 0.2, 0.3))])
    pool_r = np.stack([overfit_fixture(t, 200 + i) for i, t in enumerate((0.07, 0.15, 0.25, 0.35))])
    return pool_s, pool_r


def run_overfit_micro():
    """500-step 4+4-fixture training run; returns (models, trainer)."""
    from rirpost.tsrirgan import (
        DiscriminatorConfig,
        GeneratorConfig,
        Trainer,
        TrainingConfig,
        TsRirGan,
    )

    pool_s, pool_r = overfit_pools()
    models = TsRirGan(
        GeneratorConfig(base_channels=8, encoder_downsamples=2, n_residual_blocks=1),
        DiscriminatorConfig(base_channels=8, n_layers=3),
        seed=11,
        input_length=OVERFIT_LENGTH,
    )
    cfg = TrainingConfig(
        lambda_cyc=10.0,
        lambda_id=5.0,
        batch_size=4,
        total_steps=OVERFIT_STEPS,
        seed=11,
        learning_rate=1e-3,
        d_learning_rate=1e-4,
    )
    trainer = Trainer(models, cfg, pool_s, pool_r)
    trainer.run()
    return models, trainer
