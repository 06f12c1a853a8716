"""Command-line interface.

Subcommands: manifest, params, eq-fit, eq-apply, train, translate, augment,
pipeline, spectrogram. Global flags --seed, --threads and --config (TOML or
JSON) apply before the subcommand's own options; config file keys use the
subcommand's long option names with dashes or underscores.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import equalization
from .audio import Domain, load_waveform, normalize_rir, write_waveform
from .augment import DEFAULT_SNR_RANGE_DB, generate_corpus
from .datasets import DEFAULT_SPLIT_RATIOS, build_manifest, load_manifest, save_manifest
from .errors import NaNLossError, RirPostError
from .pipeline import Combination, PipelinePlan, export_spectrograms, report_params, run_pipeline
from .tsrirgan import (
    DiscriminatorConfig,
    GeneratorConfig,
    TrainingConfig,
    Trainer,
    TsRirGan,
    load_checkpoint,
    models_from_checkpoint,
    save_checkpoint,
    trainer_from_checkpoint,
    translate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _load_config_file(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        return json.loads(raw.decode("utf-8"))
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(raw.decode("utf-8"))
    # fall back to sniffing: JSON first, then TOML
    try:
        return json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError:
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        return tomllib.loads(raw.decode("utf-8"))


class UsageError(Exception):
    pass


def _set_thread_limit(threads):
    if threads is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)


def _load_rir_matrix(directory):
    names = sorted(f for f in os.listdir(directory) if f.lower().endswith(".wav"))
    if not names:
        raise RirPostError(f"no WAV files in {directory}")
    rows = []
    ids = []
    for name in names:
        samples, rate = load_waveform(os.path.join(directory, name))
        rir = normalize_rir(samples, rate)
        rows.append(rir.samples)
        ids.append(os.path.splitext(name)[0])
    return np.stack(rows), ids


def _cmd_manifest(args):
    manifest = build_manifest(args.wav_dir, Domain(args.domain), split_seed=args.seed, ratios=tuple(args.ratios))
    save_manifest(manifest, args.out)
    sizes = manifest.split_sizes()
    print(f"wrote {args.out}: {len(manifest.entries)} entries, splits {sizes}")
    return EXIT_OK


def _cmd_params(args):
    manifest = load_manifest(args.manifest)
    reference = load_manifest(args.reference) if args.reference else None
    stats = report_params(manifest, args.out, reference=reference)
    print(json.dumps(stats, indent=1, sort_keys=True))
    return EXIT_OK


def _cmd_eq_fit(args):
    matrix, _ = _load_rir_matrix(args.rir_dir)
    gains = np.stack([equalization.relative_gains(row).gains_db for row in matrix])
    model = equalization.fit_gmm(gains, n_components=args.components, seed=args.seed)
    equalization.save_gmm(model, args.out)
    print(f"fit {args.components}-component gain model on {matrix.shape[0]} RIRs -> {args.out}")
    return EXIT_OK


def _cmd_eq_apply(args):
    model = equalization.load_gmm(args.gmm)
    os.makedirs(args.out_dir, exist_ok=True)
    matrix, ids = _load_rir_matrix(args.rir_dir)
    targets = model.sample(matrix.shape[0], seed=args.seed)
    for i, entry_id in enumerate(ids):
        rir = normalize_rir(matrix[i], 16000, source_id=entry_id)
        out = equalization.equalize(rir, targets[i], num_taps=args.num_taps)
        write_waveform(os.path.join(args.out_dir, f"{entry_id}.EQ_ONLY.wav"), out.samples)
    print(f"equalized {len(ids)} RIRs -> {args.out_dir}")
    return EXIT_OK


def _cmd_train(args):
    synth, _ = _load_rir_matrix(args.synthetic_dir)
    real, _ = _load_rir_matrix(args.real_dir)
    if args.resume:
        ckpt = load_checkpoint(args.resume)
        trainer = trainer_from_checkpoint(ckpt, synth, real, log_path=args.log)
        models = trainer.models
    else:
        gen_cfg = GeneratorConfig(base_channels=args.base_channels, n_residual_blocks=args.residual_blocks)
        disc_cfg = DiscriminatorConfig(base_channels=args.disc_base_channels)
        train_cfg = TrainingConfig(
            lambda_cyc=args.lambda_cyc,
            lambda_id=args.lambda_id,
            batch_size=args.batch_size,
            total_steps=args.steps,
            seed=args.seed,
            learning_rate=args.learning_rate,
            d_learning_rate=args.d_learning_rate,
            saturating_generator_loss=args.saturating,
        )
        models = TsRirGan(gen_cfg, disc_cfg, seed=args.seed)
        trainer = Trainer(models, train_cfg, synth, real, log_path=args.log)
    remaining = trainer.config.total_steps - trainer.step
    trainer.run(remaining)
    save_checkpoint(args.out, models, trainer)
    last = trainer.history[-1] if trainer.history else {}
    print(f"trained {remaining} steps -> {args.out}" + (f" (L_cyc {last.get('L_cyc'):.5f})" if last else ""))
    return EXIT_OK


def _cmd_translate(args):
    models = models_from_checkpoint(load_checkpoint(args.checkpoint))
    os.makedirs(args.out_dir, exist_ok=True)
    matrix, ids = _load_rir_matrix(args.rir_dir)
    for i, entry_id in enumerate(ids):
        rir = normalize_rir(matrix[i], 16000, source_id=entry_id)
        out = translate(rir, models)
        write_waveform(os.path.join(args.out_dir, f"{entry_id}.TRANSLATE_ONLY.wav"), out.samples)
    print(f"translated {len(ids)} RIRs -> {args.out_dir}")
    return EXIT_OK


def _cmd_augment(args):
    clean_paths = sorted(
        os.path.join(args.clean_dir, f) for f in os.listdir(args.clean_dir) if f.lower().endswith(".wav")
    )
    rir_matrix, rir_ids = _load_rir_matrix(args.rir_dir)
    rirs = [normalize_rir(rir_matrix[i], 16000, source_id=rir_ids[i]) for i in range(len(rir_ids))]
    noises = []
    for name in sorted(f for f in os.listdir(args.noise_dir) if f.lower().endswith(".wav")):
        samples, rate = load_waveform(os.path.join(args.noise_dir, name))
        if rate != 16000:
            from .audio import resample

            samples = resample(samples, rate, 16000)
        noises.append((os.path.splitext(name)[0], samples))
    rows = generate_corpus(
        clean_paths,
        rirs,
        noises,
        args.out_dir,
        snr_range=(args.snr_min, args.snr_max),
        seed=args.seed,
    )
    print(f"augmented {len(rows)} utterances -> {args.out_dir}")
    return EXIT_OK


def _cmd_pipeline(args):
    try:
        plan = PipelinePlan(
            combination=Combination(args.combination),
            checkpoint_path=args.checkpoint,
            gmm_path=args.gmm,
            seed=args.seed,
            num_taps=args.num_taps,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    manifest = load_manifest(args.manifest)
    report = run_pipeline(plan, manifest, args.out_dir)
    print(
        f"{plan.combination.value}: processed {report['n_processed']} entries, "
        f"{report['n_failed']} failures -> {args.out_dir}"
    )
    return EXIT_OK


def _cmd_spectrogram(args):
    manifest = load_manifest(args.manifest)
    result = export_spectrograms(manifest, args.out_dir, window_size=args.window, hop=args.hop)
    print(f"exported {len(result['written'])} spectrograms, {len(result['failures'])} failures -> {args.out_dir}")
    return EXIT_OK


# options that must be present (via flag or config file) per subcommand
_REQUIRED = {
    "manifest": ("wav_dir", "out"),
    "params": ("manifest", "out"),
    "eq-fit": ("rir_dir", "out"),
    "eq-apply": ("rir_dir", "gmm", "out_dir"),
    "train": ("synthetic_dir", "real_dir", "out"),
    "translate": ("rir_dir", "checkpoint", "out_dir"),
    "augment": ("clean_dir", "rir_dir", "noise_dir", "out_dir"),
    "pipeline": ("manifest", "combination", "out_dir"),
    "spectrogram": ("manifest", "out_dir"),
}


def build_parser():
    """Returns (parser, {command: subparser}) so config files can set defaults."""
    parser = argparse.ArgumentParser(prog="rirpost", description="Synthetic impulse-response improvement toolkit")
    parser.add_argument("--seed", type=int, default=0, help="global random seed")
    parser.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread cap")
    parser.add_argument("--config", default=None, help="TOML or JSON file providing option defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    p = commands["manifest"] = sub.add_parser("manifest", help="scan WAVs into a split manifest")
    p.add_argument("--wav-dir")
    p.add_argument("--domain", choices=[d.value for d in Domain], default=Domain.SYNTHETIC.value)
    p.add_argument("--ratios", type=float, nargs=3, default=list(DEFAULT_SPLIT_RATIOS), metavar=("TRAIN", "DEV", "TEST"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_manifest)

    p = commands["params"] = sub.add_parser("params", help="acoustic-parameter report for a manifest")
    p.add_argument("--manifest")
    p.add_argument("--reference", default=None, help="manifest whose means fill the Difference column")
    p.add_argument("--out", help="per-entry CSV output path")
    p.set_defaults(func=_cmd_params)

    p = commands["eq-fit"] = sub.add_parser("eq-fit", help="fit the band-gain mixture model on real RIRs")
    p.add_argument("--rir-dir")
    p.add_argument("--components", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eq_fit)

    p = commands["eq-apply"] = sub.add_parser("eq-apply", help="equalize RIRs toward sampled target gains")
    p.add_argument("--rir-dir")
    p.add_argument("--gmm")
    p.add_argument("--num-taps", type=int, default=equalization.DEFAULT_NUM_TAPS)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_eq_apply)

    p = commands["train"] = sub.add_parser("train", help="train the translation networks")
    p.add_argument("--synthetic-dir")
    p.add_argument("--real-dir")
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--base-channels", type=int, default=64)
    p.add_argument("--residual-blocks", type=int, default=4)
    p.add_argument("--disc-base-channels", type=int, default=64)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--d-learning-rate", type=float, default=None, help="discriminator learning rate (defaults to --learning-rate)")
    p.add_argument("--lambda-cyc", type=float, default=10.0)
    p.add_argument("--lambda-id", type=float, default=5.0)
    p.add_argument("--saturating", action="store_true", help="use the literal saturating generator loss")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--log", default=None, help="training-log CSV path")
    p.add_argument("--out", help="checkpoint output path")
    p.set_defaults(func=_cmd_train)

    p = commands["translate"] = sub.add_parser("translate", help="translate synthetic RIRs with a checkpoint")
    p.add_argument("--rir-dir")
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_translate)

    p = commands["augment"] = sub.add_parser("augment", help="build far-field speech from clean speech, RIRs, noise")
    p.add_argument("--clean-dir")
    p.add_argument("--rir-dir")
    p.add_argument("--noise-dir")
    p.add_argument("--snr-min", type=float, default=DEFAULT_SNR_RANGE_DB[0])
    p.add_argument("--snr-max", type=float, default=DEFAULT_SNR_RANGE_DB[1])
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_augment)

    p = commands["pipeline"] = sub.add_parser("pipeline", help="run a stage combination over a manifest")
    p.add_argument("--manifest")
    p.add_argument("--combination", choices=[c.value for c in Combination])
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--gmm", default=None)
    p.add_argument("--num-taps", type=int, default=equalization.DEFAULT_NUM_TAPS)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_pipeline)

    p = commands["spectrogram"] = sub.add_parser("spectrogram", help="export spectrogram matrices and images")
    p.add_argument("--manifest")
    p.add_argument("--window", type=int, default=512)
    p.add_argument("--hop", type=int, default=256)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_spectrogram)

    return parser, commands


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        if args.config:
            config = _load_config_file(args.config)
            if not isinstance(config, dict):
                raise UsageError(f"config file {args.config} must contain a table/object")
            # a section named after the subcommand wins; other top-level
            # scalars act as global defaults (e.g. seed, threads)
            section = config.get(args.command, {})
            merged = {k: v for k, v in config.items() if not isinstance(v, dict)}
            if isinstance(section, dict):
                merged.update(section)
            known = set(vars(args))
            defaults = {k.replace("-", "_"): v for k, v in merged.items() if k.replace("-", "_") in known}
            parser.set_defaults(**{k: v for k, v in defaults.items() if k in ("seed", "threads")})
            commands[args.command].set_defaults(**defaults)
            try:
                args = parser.parse_args(argv)
            except SystemExit as exc:
                return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
        missing = [name for name in _REQUIRED[args.command] if getattr(args, name) in (None, "")]
        if missing:
            flags = ", ".join("--" + name.replace("_", "-") for name in missing)
            raise UsageError(f"{args.command}: missing required option(s) {flags}")
        _set_thread_limit(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NaNLossError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.components:
            print(f"loss components: {exc.components}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (RirPostError, FileNotFoundError, NotADirectoryError, PermissionError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
