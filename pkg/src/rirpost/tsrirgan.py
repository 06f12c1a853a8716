"""Raw-waveform translation between synthetic and measured impulse responses.

Two generators map each domain onto the other (``g_sr``: synthetic to real,
``g_rs``: the reverse) and two discriminators score domain membership. The
generators are encoder / residual-transformer / decoder stacks of kernel-25
convolutions over the full 16384-sample waveform; channel width doubles at
each stride-2 downsample and halves back up through the transposed-conv
decoder, ending in a single-channel refinement conv with tanh output. The
discriminators are six stride-4 kernel-25 convolutions with leaky-relu,
flattened into a dense logit passed through a clamped sigmoid.

Training alternates a discriminator ascent phase on detached generator
outputs with a generator descent phase combining adversarial, cycle and
identity terms. By default the generator phase uses the non-saturating
adversarial form (maximize log D(fake)); the literal saturating form is
available via TrainingConfig. Logged loss components always report the
log-likelihood adversarial value regardless of which form produced the
gradients.

Checkpoints are a versioned binary container (magic, version, JSON header
with configs and RNG/sampler state, then named little-endian float32 arrays
for parameters and optimizer moments) and restore training bit-exactly.
"""

import csv
import io
import json
import struct
from dataclasses import dataclass, asdict, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import neural as nn
from .audio import Domain, ImpulseResponse
from .errors import CheckpointCorruptError, CheckpointVersionError, NaNLossError
from .validation import RIR_LENGTH, check_rir_matrix

KERNEL_LENGTH = 25
LOGIT_CLAMP = 30.0
CHECKPOINT_MAGIC = b"RIRGANCK"
CHECKPOINT_VERSION = 1


@dataclass
class GeneratorConfig:
    """Encoder / transformer / decoder layout knobs."""

    base_channels: int = 64
    encoder_downsamples: int = 4
    n_residual_blocks: int = 4
    kernel_length: int = KERNEL_LENGTH

    def __post_init__(self):
        if self.kernel_length != KERNEL_LENGTH:
            raise ValueError(f"kernel_length is fixed at {KERNEL_LENGTH}")
        if self.base_channels < 1 or self.encoder_downsamples < 1 or self.n_residual_blocks < 0:
            raise ValueError("invalid generator configuration")
        if RIR_LENGTH % (2**self.encoder_downsamples) != 0:
            raise ValueError(f"{RIR_LENGTH} must be divisible by 2^encoder_downsamples")


@dataclass
class DiscriminatorConfig:
    base_channels: int = 64
    n_layers: int = 6
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.base_channels < 1 or self.n_layers < 1:
            raise ValueError("invalid discriminator configuration")


@dataclass
class TrainingConfig:
    lambda_cyc: float = 10.0
    lambda_id: float = 5.0
    batch_size: int = 4
    total_steps: int = 500
    seed: int = 0
    learning_rate: float = 1e-4
    d_learning_rate: float = None  # None: same as learning_rate
    beta1: float = 0.5
    beta2: float = 0.9
    adam_eps: float = 1e-8
    saturating_generator_loss: bool = False

    def __post_init__(self):
        if self.lambda_cyc < 0 or self.lambda_id < 0:
            raise ValueError("loss weights must be non-negative")
        if self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("invalid training configuration")
        if self.d_learning_rate is None:
            self.d_learning_rate = self.learning_rate


class ResidualBlock(nn.Module):
    def __init__(self, channels, kernel, rng, dtype):
        pad = (kernel - 1) // 2
        self.conv1 = nn.Conv1d(channels, channels, kernel, 1, pad, rng=rng, dtype=dtype)
        self.conv2 = nn.Conv1d(channels, channels, kernel, 1, pad, rng=rng, dtype=dtype)

    def forward(self, x):
        return nn.add(self.conv2(nn.relu(self.conv1(x))), x)


class Generator(nn.Module):
    """Waveform-to-waveform map; output length equals input length."""

    def __init__(self, config, rng, dtype=np.float32, input_length=RIR_LENGTH):
        if input_length % (2**config.encoder_downsamples) != 0:
            raise ValueError("input length must be divisible by 2^encoder_downsamples")
        self.input_length = input_length
        k = config.kernel_length
        pad = (k - 1) // 2
        c = config.base_channels
        channels = [1] + [c * 2**i for i in range(config.encoder_downsamples)]
        self.encoder = [
            nn.Conv1d(channels[i], channels[i + 1], k, 2, pad, rng=rng, dtype=dtype)
            for i in range(config.encoder_downsamples)
        ]
        deep = channels[-1]
        self.transformer = [ResidualBlock(deep, k, rng, dtype) for _ in range(config.n_residual_blocks)]
        dec_channels = channels[:0:-1]  # [8c, 4c, 2c, c]
        dec_out = dec_channels[1:] + [c]
        self.decoder = [
            nn.ConvTranspose1d(dec_channels[i], dec_out[i], k, 2, pad, 1, rng=rng, dtype=dtype)
            for i in range(config.encoder_downsamples)
        ]
        self.head = nn.Conv1d(c, 1, k, 1, pad, rng=rng, dtype=dtype)

    def forward(self, x):
        if x.shape[1] != 1 or x.shape[2] != self.input_length:
            raise ValueError(f"expected input [B,1,{self.input_length}], got {x.shape}")
        h = x
        for layer in self.encoder:
            h = nn.relu(layer(h))
        for block in self.transformer:
            h = block(h)
        for layer in self.decoder:
            h = nn.relu(layer(h))
        return nn.tanh(self.head(h))


class Discriminator(nn.Module):
    """Waveform to domain-membership probability in (0, 1)."""

    def __init__(self, config, rng, dtype=np.float32, input_length=RIR_LENGTH):
        self.input_length = input_length
        self.leaky_slope = config.leaky_slope
        k = KERNEL_LENGTH
        pad = (k - 1) // 2
        c = config.base_channels
        channels = [1] + [c * 2**i for i in range(config.n_layers)]
        self.layers = [
            nn.Conv1d(channels[i], channels[i + 1], k, 4, pad, rng=rng, dtype=dtype)
            for i in range(config.n_layers)
        ]
        length = input_length
        for _ in range(config.n_layers):
            length = (length + 2 * pad - k) // 4 + 1
            if length < 1:
                raise ValueError("discriminator stack reduces input below one sample")
        self.feature_size = channels[-1] * length
        self.head = nn.Dense(self.feature_size, 1, rng=rng, dtype=dtype)

    def forward(self, x):
        if x.shape[1] != 1 or x.shape[2] != self.input_length:
            raise ValueError(f"expected input [B,1,{self.input_length}], got {x.shape}")
        h = x
        for layer in self.layers:
            h = nn.leaky_relu(layer(h), self.leaky_slope)
        h = nn.reshape(h, (h.shape[0], self.feature_size))
        logits = nn.clip(self.head(h), -LOGIT_CLAMP, LOGIT_CLAMP)
        return nn.sigmoid(logits)


class TsRirGan:
    """The four networks plus their configs, built from one seed."""

    def __init__(self, gen_config=None, disc_config=None, seed=0, dtype=np.float32, input_length=RIR_LENGTH):
        self.gen_config = gen_config or GeneratorConfig()
        self.disc_config = disc_config or DiscriminatorConfig()
        self.seed = seed
        self.dtype = np.dtype(dtype)
        self.input_length = input_length
        rng = np.random.default_rng(seed)
        self.g_sr = Generator(self.gen_config, rng, dtype, input_length)
        self.g_rs = Generator(self.gen_config, rng, dtype, input_length)
        self.d_r = Discriminator(self.disc_config, rng, dtype, input_length)
        self.d_s = Discriminator(self.disc_config, rng, dtype, input_length)

    def named_parameters(self):
        for tag, module in (("g_sr", self.g_sr), ("g_rs", self.g_rs), ("d_r", self.d_r), ("d_s", self.d_s)):
            yield from module.named_parameters(tag)

    def generator_parameters(self):
        # always traverse with the model-level prefixes so parameter
        # names stay stable for optimizer-state (de)serialization
        return [p for name, p in self.named_parameters() if name.startswith(("g_sr.", "g_rs."))]

    def discriminator_parameters(self):
        return [p for name, p in self.named_parameters() if name.startswith(("d_r.", "d_s."))]


def _to_batch(x, dtype, input_length):
    """(n, L) float array to a [n, 1, L] constant Tensor in model dtype."""
    arr = np.asarray(x)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != input_length:
        raise ValueError(f"expected batch of length-{input_length} waveforms, got {arr.shape}")
    return nn.Tensor(np.ascontiguousarray(arr[:, None, :], dtype=dtype))


def adversarial_loss(d_out_real, d_out_fake, clamp=nn.LOG_CLAMP):
    """Log-likelihood of the discriminator: mean log d_real + mean log(1 - d_fake).

    The discriminator ascends this value, the generator descends it. With
    clamp=None, probabilities at exactly 0 or 1 raise instead of saturating.
    """
    if not isinstance(d_out_real, nn.Tensor):
        d_out_real = nn.Tensor(np.asarray(d_out_real, dtype=np.float64))
    if not isinstance(d_out_fake, nn.Tensor):
        d_out_fake = nn.Tensor(np.asarray(d_out_fake, dtype=np.float64))
    return nn.add(nn.mean(nn.log(d_out_real, clamp)), nn.mean(nn.log(1.0 - d_out_fake, clamp)))


def cycle_loss(batch_s, batch_r, g_sr, g_rs):
    """Round-trip reconstruction error through both generator compositions."""
    return nn.add(
        nn.l1_norm(g_rs(g_sr(batch_s)) - batch_s),
        nn.l1_norm(g_sr(g_rs(batch_r)) - batch_r),
    )


def identity_loss(batch_s, batch_r, g_sr, g_rs):
    """Cross-domain fixed-point error: each generator fed the other domain."""
    return nn.add(
        nn.l1_norm(g_rs(batch_s) - batch_s),
        nn.l1_norm(g_sr(batch_r) - batch_r),
    )


def full_objective(batch_s, batch_r, models, config=None):
    """Evaluate every loss component plus their weighted total, as floats.

    Purely for reporting; training builds its own phase-specific graphs.
    """
    config = config or TrainingConfig()
    if not isinstance(batch_s, nn.Tensor):
        batch_s = _to_batch(batch_s, models.dtype, models.input_length)
    if not isinstance(batch_r, nn.Tensor):
        batch_r = _to_batch(batch_r, models.dtype, models.input_length)
    fake_r = models.g_sr(batch_s)
    fake_s = models.g_rs(batch_r)
    l_adv_sr = float(adversarial_loss(models.d_r(batch_r), models.d_r(fake_r)).data)
    l_adv_rs = float(adversarial_loss(models.d_s(batch_s), models.d_s(fake_s)).data)
    l_cyc = float(
        nn.add(nn.l1_norm(models.g_rs(fake_r) - batch_s), nn.l1_norm(models.g_sr(fake_s) - batch_r)).data
    )
    l_id = float(identity_loss(batch_s, batch_r, models.g_sr, models.g_rs).data)
    total = l_adv_sr + l_adv_rs + config.lambda_cyc * l_cyc + config.lambda_id * l_id
    return {
        "L_total": total,
        "L_adv_SR": l_adv_sr,
        "L_adv_RS": l_adv_rs,
        "L_cyc": l_cyc,
        "L_id": l_id,
    }


class Trainer:
    """Alternating-phase optimizer over unpaired synthetic and real pools."""

    def __init__(self, models, config, pool_s, pool_r, log_path=None):
        self.models = models
        self.config = config
        self.pool_s = self._check_pool(pool_s)
        self.pool_r = self._check_pool(pool_r)
        self.log_path = log_path
        self.step = 0
        self.rng = np.random.default_rng(config.seed)
        self.opt_g = nn.Adam(
            models.generator_parameters(), config.learning_rate, config.beta1, config.beta2, config.adam_eps
        )
        self.opt_d = nn.Adam(
            models.discriminator_parameters(), config.d_learning_rate, config.beta1, config.beta2, config.adam_eps
        )
        self._order_s = []
        self._order_r = []
        self._pos_s = 0
        self._pos_r = 0
        self.history = []

    def _check_pool(self, pool):
        if pool is None:
            return None
        if self.models.input_length == RIR_LENGTH:
            return check_rir_matrix(pool)
        arr = np.asarray(pool, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.models.input_length:
            raise ValueError(f"expected pool of length-{self.models.input_length} waveforms, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("pool contains non-finite values")
        return arr

    def _draw(self, pool, order, pos):
        """Take batch_size indices from an epoch shuffle, reshuffling as needed."""
        n = pool.shape[0]
        picked = []
        while len(picked) < self.config.batch_size:
            if pos >= len(order):
                order = list(self.rng.permutation(n))
                pos = 0
            picked.append(order[pos])
            pos += 1
        return picked, order, pos

    def next_batches(self):
        idx_s, self._order_s, self._pos_s = self._draw(self.pool_s, self._order_s, self._pos_s)
        idx_r, self._order_r, self._pos_r = self._draw(self.pool_r, self._order_r, self._pos_r)
        return self.pool_s[idx_s], self.pool_r[idx_r]

    def train_step(self, batch_s, batch_r):
        """One discriminator phase then one generator phase; returns metrics.

        Reported adversarial components are the log-likelihood values
        evaluated with post-update discriminators on this step's fakes.
        """
        m = self.models
        cfg = self.config
        s = _to_batch(batch_s, m.dtype, m.input_length)
        r = _to_batch(batch_r, m.dtype, m.input_length)

        # discriminator phase: ascend on real vs detached fakes
        fake_r = m.g_sr(s).detach()
        fake_s = m.g_rs(r).detach()
        self.opt_d.zero_grad()
        d_value = nn.add(
            adversarial_loss(m.d_r(r), m.d_r(fake_r)),
            adversarial_loss(m.d_s(s), m.d_s(fake_s)),
        )
        (-d_value).backward()
        self.opt_d.step()

        # generator phase: descend the full objective with discriminators frozen
        self.opt_g.zero_grad()
        fake_r = m.g_sr(s)
        fake_s = m.g_rs(r)
        p_fake_r = m.d_r(fake_r)
        p_fake_s = m.d_s(fake_s)
        if cfg.saturating_generator_loss:
            g_adv = nn.add(nn.mean(nn.log(1.0 - p_fake_r)), nn.mean(nn.log(1.0 - p_fake_s)))
        else:
            g_adv = -nn.add(nn.mean(nn.log(p_fake_r)), nn.mean(nn.log(p_fake_s)))
        l_cyc = nn.add(nn.l1_norm(m.g_rs(fake_r) - s), nn.l1_norm(m.g_sr(fake_s) - r))
        g_loss = g_adv + cfg.lambda_cyc * l_cyc
        if cfg.lambda_id > 0:
            l_id = identity_loss(s, r, m.g_sr, m.g_rs)
            g_loss = g_loss + cfg.lambda_id * l_id
            l_id_v = float(l_id.data)
        else:
            # identity forwards skipped entirely; the component logs as 0
            l_id_v = 0.0
        g_loss.backward()
        self.opt_g.step()

        # bookkeeping in the literal log-likelihood form
        l_adv_sr = float(adversarial_loss(m.d_r(r).detach(), p_fake_r.detach()).data)
        l_adv_rs = float(adversarial_loss(m.d_s(s).detach(), p_fake_s.detach()).data)
        l_cyc_v = float(l_cyc.data)
        metrics = {
            "step": self.step + 1,
            "L_total": l_adv_sr + l_adv_rs + cfg.lambda_cyc * l_cyc_v + cfg.lambda_id * l_id_v,
            "L_adv_SR": l_adv_sr,
            "L_adv_RS": l_adv_rs,
            "L_cyc": l_cyc_v,
            "L_id": l_id_v,
        }
        bad = {k: v for k, v in metrics.items() if k != "step" and not np.isfinite(v)}
        if bad:
            raise NaNLossError(
                f"non-finite loss at step {self.step + 1}",
                components={k: metrics[k] for k in ("L_total", "L_adv_SR", "L_adv_RS", "L_cyc", "L_id")},
            )
        self.step += 1
        self.history.append(metrics)
        return metrics

    def run(self, n_steps=None, progress=None):
        """Run n_steps (default: remaining budget), appending to the CSV log."""
        if n_steps is None:
            n_steps = self.config.total_steps - self.step
        writer = None
        fh = None
        if self.log_path is not None:
            new_file = self.step == 0
            fh = open(self.log_path, "a" if not new_file else "w", newline="")
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(["step", "L_total", "L_adv_SR", "L_adv_RS", "L_cyc", "L_id"])
        try:
            for _ in range(n_steps):
                batch_s, batch_r = self.next_batches()
                metrics = self.train_step(batch_s, batch_r)
                if writer is not None:
                    writer.writerow(
                        [metrics["step"]]
                        + [f"{metrics[k]:.8f}" for k in ("L_total", "L_adv_SR", "L_adv_RS", "L_cyc", "L_id")]
                    )
                if progress is not None:
                    progress(metrics)
        finally:
            if fh is not None:
                fh.close()
        return self.history

    def sampler_state(self):
        return {
            "order_s": [int(i) for i in self._order_s],
            "order_r": [int(i) for i in self._order_r],
            "pos_s": self._pos_s,
            "pos_r": self._pos_r,
        }

    def restore_sampler_state(self, state):
        self._order_s = list(state["order_s"])
        self._order_r = list(state["order_r"])
        self._pos_s = state["pos_s"]
        self._pos_r = state["pos_r"]


def translate(rir, models):
    """Map one synthetic impulse response into the measured-RIR domain."""
    samples = np.asarray(rir.samples if isinstance(rir, ImpulseResponse) else rir, dtype=np.float64)
    if samples.shape != (models.input_length,):
        raise ValueError(f"expected a length-{models.input_length} impulse response")
    out = models.g_sr(_to_batch(samples[None, :], models.dtype, models.input_length))
    y = np.asarray(out.data[0, 0], dtype=np.float64)
    peak = np.max(np.abs(y))
    if peak > 0:
        y = y / peak
    source_id = rir.source_id if isinstance(rir, ImpulseResponse) else ""
    sr = rir.sample_rate if isinstance(rir, ImpulseResponse) else 16000
    return ImpulseResponse(samples=y, sample_rate=sr, domain=Domain.TRANSLATED, source_id=source_id)


# ---------------------------------------------------------------------------
# checkpoint container


@dataclass
class Checkpoint:
    version: int
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    train_config: TrainingConfig
    step: int
    rng_state: dict
    sampler_state: dict
    parameters: dict = field(default_factory=dict)
    opt_g_state: dict = field(default_factory=dict)
    opt_d_state: dict = field(default_factory=dict)
    opt_g_steps: int = 0
    opt_d_steps: int = 0
    input_length: int = RIR_LENGTH
    model_seed: int = 0


def _write_records(buf, arrays):
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype="<f4")
        name_b = name.encode("utf-8")
        buf.write(struct.pack("<H", len(name_b)))
        buf.write(name_b)
        buf.write(struct.pack("<B", data.ndim))
        for d in data.shape:
            buf.write(struct.pack("<I", d))
        buf.write(data.tobytes())


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointCorruptError(f"checkpoint truncated while reading {what}")
    return data


def _read_records(fh):
    (count,) = struct.unpack("<I", _read_exact(fh, 4, "record count"))
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "record name length"))
        name = _read_exact(fh, name_len, "record name").decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(fh, 1, "record rank"))
        shape = tuple(struct.unpack("<I", _read_exact(fh, 4, "record shape"))[0] for _ in range(ndim))
        n_items = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = _read_exact(fh, 4 * n_items, f"record data for {name}")
        out[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return out


def save_checkpoint(path, models, trainer=None):
    """Serialize networks (and optionally full trainer state) to one file."""
    header = {
        "generator": asdict(models.gen_config),
        "discriminator": asdict(models.disc_config),
        "training": asdict(trainer.config) if trainer else asdict(TrainingConfig()),
        "step": trainer.step if trainer else 0,
        "input_length": models.input_length,
        "model_seed": models.seed,
        "rng_state": _encode_rng(trainer.rng) if trainer else None,
        "sampler": trainer.sampler_state() if trainer else None,
        "opt_g_steps": trainer.opt_g.step_count if trainer else 0,
        "opt_d_steps": trainer.opt_d.step_count if trainer else 0,
    }
    header_b = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    buf.write(struct.pack("<Q", len(header_b)))
    buf.write(header_b)
    _write_records(buf, {name: p.data for name, p in models.named_parameters()})
    _write_records(buf, trainer.opt_g.state_arrays() if trainer else {})
    _write_records(buf, trainer.opt_d.state_arrays() if trainer else {})
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(CHECKPOINT_MAGIC), "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointCorruptError("not a checkpoint file (bad magic bytes)")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointVersionError(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8, "header length"))
        try:
            header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointCorruptError(f"unreadable checkpoint header: {exc}") from exc
        params = _read_records(fh)
        opt_g = _read_records(fh)
        opt_d = _read_records(fh)
        trailing = fh.read(1)
        if trailing:
            raise CheckpointCorruptError("trailing bytes after checkpoint payload")
    try:
        return Checkpoint(
            version=version,
            gen_config=GeneratorConfig(**header["generator"]),
            disc_config=DiscriminatorConfig(**header["discriminator"]),
            train_config=TrainingConfig(**header["training"]),
            step=header["step"],
            rng_state=header.get("rng_state"),
            sampler_state=header.get("sampler"),
            parameters=params,
            opt_g_state=opt_g,
            opt_d_state=opt_d,
            opt_g_steps=header.get("opt_g_steps", 0),
            opt_d_steps=header.get("opt_d_steps", 0),
            input_length=header.get("input_length", RIR_LENGTH),
            model_seed=header.get("model_seed", 0),
        )
    except (KeyError, TypeError) as exc:
        raise CheckpointCorruptError(f"incomplete checkpoint header: {exc}") from exc


def _encode_rng(rng):
    # PCG64 state is a nest of strings and (big) ints, directly JSON-safe
    return rng.bit_generator.state


def _decode_rng(state):
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def models_from_checkpoint(ckpt):
    """Rebuild the four networks and load their saved parameters."""
    models = TsRirGan(
        ckpt.gen_config, ckpt.disc_config, seed=ckpt.model_seed, dtype=np.float32, input_length=ckpt.input_length
    )
    named = dict(models.named_parameters())
    if set(named) != set(ckpt.parameters):
        raise CheckpointCorruptError("checkpoint parameter names do not match the configured architecture")
    for name, param in named.items():
        saved = ckpt.parameters[name]
        if saved.shape != param.data.shape:
            raise CheckpointCorruptError(f"shape mismatch for {name}: {saved.shape} vs {param.data.shape}")
        param.data = saved.astype(param.dtype, copy=True)
    return models


def trainer_from_checkpoint(ckpt, pool_s, pool_r, log_path=None):
    """Resume training bit-exactly from a saved checkpoint."""
    models = models_from_checkpoint(ckpt)
    trainer = Trainer(models, ckpt.train_config, pool_s, pool_r, log_path=log_path)
    trainer.step = ckpt.step
    if ckpt.rng_state is not None:
        trainer.rng = _decode_rng(ckpt.rng_state)
    if ckpt.sampler_state is not None:
        trainer.restore_sampler_state(ckpt.sampler_state)
    if ckpt.opt_g_state:
        trainer.opt_g.load_state_arrays(ckpt.opt_g_state)
        trainer.opt_g.step_count = ckpt.opt_g_steps
    if ckpt.opt_d_state:
        trainer.opt_d.load_state_arrays(ckpt.opt_d_state)
        trainer.opt_d.step_count = ckpt.opt_d_steps
    return trainer


class RirTranslator(BaseEstimator, TransformerMixin):
    """Learn a synthetic-to-measured waveform map and apply it row-wise.

    fit(X, y) treats X as the synthetic pool and y as the measured pool,
    both shaped (n, 16384); the pools do not need equal sizes.
    """

    def __init__(
        self,
        total_steps=500,
        batch_size=4,
        base_channels=64,
        n_residual_blocks=4,
        disc_base_channels=64,
        learning_rate=1e-4,
        lambda_cyc=10.0,
        lambda_id=5.0,
        random_state=0,
        log_path=None,
    ):
        self.total_steps = total_steps
        self.batch_size = batch_size
        self.base_channels = base_channels
        self.n_residual_blocks = n_residual_blocks
        self.disc_base_channels = disc_base_channels
        self.learning_rate = learning_rate
        self.lambda_cyc = lambda_cyc
        self.lambda_id = lambda_id
        self.random_state = random_state
        self.log_path = log_path

    def fit(self, X, y):
        X = check_rir_matrix(X)
        y = check_rir_matrix(y)
        gen_cfg = GeneratorConfig(base_channels=self.base_channels, n_residual_blocks=self.n_residual_blocks)
        disc_cfg = DiscriminatorConfig(base_channels=self.disc_base_channels)
        train_cfg = TrainingConfig(
            lambda_cyc=self.lambda_cyc,
            lambda_id=self.lambda_id,
            batch_size=self.batch_size,
            total_steps=self.total_steps,
            seed=self.random_state,
            learning_rate=self.learning_rate,
        )
        self.models_ = TsRirGan(gen_cfg, disc_cfg, seed=self.random_state)
        self.trainer_ = Trainer(self.models_, train_cfg, X, y, log_path=self.log_path)
        self.trainer_.run()
        self.history_ = self.trainer_.history
        return self

    def transform(self, X):
        if not hasattr(self, "models_"):
            raise ValueError("RirTranslator must be fitted before transform")
        X = check_rir_matrix(X)
        out = np.empty_like(X)
        for i in range(X.shape[0]):
            out[i] = translate(X[i], self.models_).samples
        return out
