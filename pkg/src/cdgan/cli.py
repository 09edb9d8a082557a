"""Command-line entry point: synth-data, train, translate, ablate, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage error. The output root
defaults to $CDGAN_OUT (or ./runs). Training configs are flat key=value
files with [train] and [arch] sections; --set overrides win over the file.
"""

import argparse
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
import torch

from . import data as data_mod
from . import evaluation as eval_mod
from .checkpoint import load_checkpoint, restore_bundle
from .engine import ablate_generate, translate_forward
from .errors import ConfigError, DataError, InputError, TrainingError, UsageError
from .networks import ArchConfig, MODES, build_bundle
from .trainer import VARIANTS, TrainConfig, train

CONFIG_SECTIONS = {
    "train": {f.name for f in fields(TrainConfig)},
    "arch": {f.name for f in fields(ArchConfig)},
}


# ---------------------------------------------------------------------------
# Flat config files


def _coerce(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip("\"'")


def parse_config_text(text: str) -> dict:
    """Parse `[section]` + `key = value` lines into a dotted-key dict."""
    out = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        dotted = f"{section}.{key}" if section else key
        out[dotted] = _coerce(value)
    return out


def validate_keys(config: dict):
    for dotted in config:
        if "." not in dotted:
            raise UsageError(f"config key {dotted!r} must be section.key (e.g. train.seed)")
        section, key = dotted.split(".", 1)
        known = CONFIG_SECTIONS.get(section)
        if known is None:
            raise UsageError(
                f"unknown config section {section!r}; valid: {sorted(CONFIG_SECTIONS)}"
            )
        if key not in known:
            raise UsageError(f"unknown config key {dotted!r}; valid {section} keys: "
                             f"{sorted(known)}")


def write_config_file(path: Path, config: dict):
    sections = {}
    for dotted, value in config.items():
        section, key = dotted.split(".", 1)
        sections.setdefault(section, {})[key] = value
    lines = []
    for section in sorted(sections):
        lines.append(f"[{section}]")
        for key in sorted(sections[section]):
            value = sections[section][key]
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        lines.append("")
    path.write_text("\n".join(lines))


def effective_train_config(args) -> dict:
    """Defaults, then config file, then --set pairs, then explicit flags."""
    config = {}
    for f in fields(TrainConfig):
        config[f"train.{f.name}"] = getattr(TrainConfig(), f.name)
    base_arch = ArchConfig()
    for f in fields(ArchConfig):
        config[f"arch.{f.name}"] = getattr(base_arch, f.name)
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file {path} does not exist")
        file_cfg = parse_config_text(path.read_text())
        validate_keys(file_cfg)
        config.update(file_cfg)
    overrides = {}
    for pair in args.set or []:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = _coerce(value)
    validate_keys(overrides)
    config.update(overrides)
    for flag, dotted in (
        ("variant", "train.variant"),
        ("mode", "train.mode"),
        ("total_steps", "train.total_steps"),
        ("batch_size", "train.batch_size"),
        ("seed", "train.seed"),
        ("learning_rate", "train.learning_rate"),
        ("checkpoint_every", "train.checkpoint_every"),
        ("image_size", "arch.image_size"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            config[dotted] = value
    return config


def split_train_config(config: dict):
    train_kwargs = {k.split(".", 1)[1]: v for k, v in config.items() if k.startswith("train.")}
    arch_kwargs = {k.split(".", 1)[1]: v for k, v in config.items() if k.startswith("arch.")}
    return TrainConfig(**train_kwargs), ArchConfig(**arch_kwargs)


# ---------------------------------------------------------------------------
# Helpers


def out_root() -> Path:
    return Path(os.environ.get("CDGAN_OUT", "runs"))


def _resolve_out(args, default_name: str) -> Path:
    out = Path(args.out) if args.out else out_root() / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_color(text: str) -> tuple:
    text = text.strip().lstrip("#")
    if len(text) != 6:
        raise UsageError(f"colors must be RRGGBB hex, got {text!r}")
    try:
        rgb = tuple(int(text[i:i + 2], 16) for i in (0, 2, 4))
    except ValueError as exc:
        raise UsageError(f"colors must be RRGGBB hex, got {text!r}") from exc
    return tuple(v / 127.5 - 1.0 for v in rgb)


def _parse_palette(text: str) -> tuple:
    return tuple(_parse_color(part) for part in text.split(",") if part.strip())


def _load_images(paths, image_size: int) -> torch.Tensor:
    tensors = []
    for p in paths:
        t = data_mod.load_image_file(p)
        if t.shape[1] != image_size or t.shape[2] != image_size:
            raise InputError(
                f"{p}: image is {t.shape[2]}x{t.shape[1]} but the checkpoint "
                f"expects {image_size}x{image_size}"
            )
        tensors.append(t)
    return torch.stack(tensors)


def _save_grid(rows, path: Path):
    """rows: list of lists of (C,H,W) tensors; cells are concatenated 1:1."""
    row_arrays = [
        np.concatenate([data_mod.tensor_to_uint8(cell) for cell in row], axis=1)
        for row in rows
    ]
    grid = np.concatenate(row_arrays, axis=0)
    from PIL import Image

    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid).save(path)


def _pair_inputs(inputs, conditionals):
    if len(conditionals) == 0:
        raise UsageError("at least one conditional image is required")
    if len(inputs) == 1 and len(conditionals) > 1:
        return [inputs[0]] * len(conditionals), list(conditionals)
    if len(conditionals) == 1 and len(inputs) > 1:
        return list(inputs), [conditionals[0]] * len(inputs)
    if len(inputs) != len(conditionals):
        raise UsageError(
            f"cannot pair {len(inputs)} inputs with {len(conditionals)} conditionals; "
            "use equal counts or a single input/conditional"
        )
    return list(inputs), list(conditionals)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth_data(args) -> int:
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    out = _resolve_out(args, "synth")
    shapes = tuple(s.strip() for s in args.shapes.split(",") if s.strip())
    try:
        spec = data_mod.SyntheticSpec(
            shapes=shapes,
            palette_A=_parse_palette(args.palette_a),
            palette_B=_parse_palette(args.palette_b),
            image_size=args.image_size,
            count=args.count,
            seed=args.seed,
            background=_parse_color(args.background),
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    ds_a, ds_b, _ = data_mod.generate_synthetic(spec, out)
    print(f"wrote {len(ds_a)}+{len(ds_b)} images, truth.jsonl and masks to {out}")
    return 0


def cmd_train(args) -> int:
    out = _resolve_out(args, "train")
    config = effective_train_config(args)
    try:
        train_cfg, arch = split_train_config(config)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    write_config_file(out / "config.cfg", config)

    data_root = Path(args.data)
    ds_a = data_mod.load_folder_dataset(data_root, "A", arch.image_size)
    ds_b = data_mod.load_folder_dataset(data_root, "B", arch.image_size)

    if args.resume:
        ckpt = load_checkpoint(args.resume)
        bundle = restore_bundle(ckpt)
    else:
        bundle = build_bundle(arch, seed=train_cfg.seed, mode=train_cfg.mode)

    def progress(step, report, _bundle):
        if args.log_every and step % args.log_every == 0:
            print(
                f"step {step:6d}  gan {report.gan:+.4f}  im {report.dual_im:.4f}  "
                f"di {report.dual_di:.4f}  ds {report.dual_ds:.4f}",
                flush=True,
            )
        return False

    train(bundle, (ds_a, ds_b), train_cfg, out_dir=out, callbacks=[progress],
          resume_from=args.resume)
    print(f"finished at step {train_cfg.total_steps}; artifacts in {out}")
    return 0


def cmd_translate(args) -> int:
    bundle = restore_bundle(load_checkpoint(args.checkpoint))
    inputs, conds = _pair_inputs(args.inputs, args.conditionals)
    x_a = _load_images(inputs, bundle.arch.image_size)
    x_b = _load_images(conds, bundle.arch.image_size)
    bundle.eval()
    with torch.no_grad():
        x_ab, _, _, _ = translate_forward(bundle, x_a, x_b)
    rows = [[x_a[i], x_b[i], x_ab[i]] for i in range(x_a.shape[0])]
    out = Path(args.out) if args.out else out_root() / "translate" / "grid.png"
    _save_grid(rows, out)
    print(f"wrote {len(rows)}x3 grid to {out}")
    return 0


def cmd_ablate(args) -> int:
    bundle = restore_bundle(load_checkpoint(args.checkpoint))
    inputs, conds = _pair_inputs(args.inputs, args.conditionals)
    x_a = _load_images(inputs, bundle.arch.image_size)
    x_b = _load_images(conds, bundle.arch.image_size)
    bundle.eval()
    with torch.no_grad():
        x_ab, _, _, _ = translate_forward(bundle, x_a, x_b)
        x_di0 = ablate_generate(bundle, x_a, x_b, zero="di")
        x_ds0 = ablate_generate(bundle, x_a, x_b, zero="ds")
    rows = [
        [x_a[i], x_b[i], x_ab[i], x_di0[i], x_ds0[i]] for i in range(x_a.shape[0])
    ]
    out = Path(args.out) if args.out else out_root() / "ablate" / "grid.png"
    _save_grid(rows, out)
    print(f"wrote {len(rows)}x5 grid to {out}")
    return 0


def cmd_eval(args) -> int:
    bundle = restore_bundle(load_checkpoint(args.checkpoint))
    root = Path(args.data)
    truth = data_mod.load_truth(root)
    ds_a = data_mod.load_folder_dataset(root, "A", bundle.arch.image_size)
    ds_b = data_mod.load_folder_dataset(root, "B", bundle.arch.image_size)
    eval_cfg = eval_mod.EvalConfig(
        background=truth.background, n_conditionals=args.n_conditionals
    )
    cases = eval_mod.build_cases(ds_a, ds_b, truth, args.n_conditionals)
    out = Path(args.json) if args.json else _resolve_out(args, "eval") / "eval_report.json"
    report = eval_mod.evaluate(
        bundle, cases, eval_cfg, report_path=out, checkpoint_id=str(args.checkpoint)
    )
    print(f"shape_iou_mean: {report.shape_iou_mean:.4f}")
    print(f"color_adoption_rate: {report.color_adoption_rate:.4f}")
    print(f"diversity_score: {report.diversity_score:.4f}")
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdgan",
        description="Conditional two-domain image translation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", help="generate the synthetic two-domain benchmark")
    p.add_argument("--out", default=None)
    p.add_argument("--count", type=int, default=512, help="images per domain")
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shapes", default="circle,square",
                   help=f"comma list from {', '.join(data_mod.SHAPE_NAMES)}")
    p.add_argument("--palette-a", default="ff0000,0000ff", help="domain A colors (hex)")
    p.add_argument("--palette-b", default="00ff00,ff00ff", help="domain B colors (hex)")
    p.add_argument("--background", default="ffffff")
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("train", help="train a model on an unpaired two-domain dataset")
    p.add_argument("--data", required=True, help="dataset root with domainA/ and domainB/")
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    p.add_argument("--variant", choices=sorted(VARIANTS), default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--total-steps", dest="total_steps", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=None)
    p.add_argument("--image-size", dest="image_size", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--log-every", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="translate images under conditionals")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inputs", nargs="+", required=True, help="source-domain images")
    p.add_argument("--conditionals", nargs="+", required=True, help="target-domain images")
    p.add_argument("--out", default=None, help="grid PNG path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("ablate", help="translations with each feature kind zeroed")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--conditionals", nargs="+", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("eval", help="score a checkpoint on a synthetic dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="synthetic dataset root")
    p.add_argument("--out", default=None)
    p.add_argument("--json", default=None, help="write the report to this path")
    p.add_argument("--n-conditionals", type=int, default=5)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, InputError, TrainingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
