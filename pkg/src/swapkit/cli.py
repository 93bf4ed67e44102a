"""Command-line driver for the full pipeline.

Five subcommands move data through a filesystem workspace:

    synth     render a synthetic shot into one side (src or dst)
    extract   align faces: frames+landmarks -> aligned crops + transforms
    train     fit the autoencoder on both aligned sets
    convert   swap the destination footage and paste results back
    evaluate  score two frame directories against each other

The workspace root holds src/ and dst/ subtrees (frames/, landmarks/,
masks/, and after extraction aligned/, aligned_masks/, meta/), a model/
directory, and an output/ directory. Phases communicate only through
these files, so each can be rerun in isolation. Exit codes: 0 success,
1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import shutil
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from swapkit import geometry, imgcore, metrics
from swapkit.conversion import ConvertConfig, FrameJob, convert_sequence
from swapkit.datasim import make_dataset, random_identity
from swapkit.models import FaceSwapModel, ModelConfig
from swapkit.training.config import TrainConfig
from swapkit.training.loop import FaceDataset, train

LOCK_NAME = ".workspace.lock"
SIDES = ("src", "dst")
EXTRACT_MANIFEST = "extract_manifest.json"

# configuration-file keys that belong to the model topology rather than
# to TrainConfig; accepted by the train command only
MODEL_KEYS = ("structure", "hd", "resolution", "base_channels", "ae_dims",
              "mask_head")


class CliError(RuntimeError):
    pass


# -- workspace plumbing -------------------------------------------------------

@contextmanager
def workspace_lock(root: Path):
    """Advisory lock: one pipeline command per workspace at a time."""
    root.mkdir(parents=True, exist_ok=True)
    path = root / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CliError(
            f"workspace is locked ({path}); if no other command is running, "
            f"remove the file") from None
    with os.fdopen(fd, "w") as f:
        f.write(f"pid {os.getpid()}\n")
    try:
        yield
    finally:
        path.unlink(missing_ok=True)


def _claim_dir(path: Path, force: bool, what: str) -> Path:
    """Create an output directory, wiping an existing one only under --force."""
    if path.exists() and any(path.iterdir()):
        if not force:
            raise CliError(f"{what} already exists at {path}; pass --force to redo")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _side_dir(workspace: Path, side: str) -> Path:
    if side not in SIDES:
        raise CliError(f"side must be one of {SIDES}, got {side!r}")
    return workspace / side


def _png_stems(directory: Path) -> list:
    return sorted(p.stem for p in directory.glob("*.png"))


# -- configuration files ------------------------------------------------------

def read_config_file(path) -> dict:
    """Parse line-oriented `key = value` text; '#' starts a comment."""
    values = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, _, text = line.partition("=")
        values[key.strip()] = text.strip()
    return values


def _coerce(key: str, text: str, typ):
    if typ is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise CliError(f"config key {key}: expected a boolean, got {text!r}")
    try:
        if typ is int:
            return int(text)
        if typ is float:
            return float(text)
    except ValueError:
        raise CliError(f"config key {key}: expected {typ.__name__}, got {text!r}") from None
    return text


_OPTIONAL_INT = {"cg_max_iter": int}  # typing.Optional fields lose their type at runtime


def split_config(values: dict) -> tuple[dict, dict, dict]:
    """Sort raw file values into (TrainConfig, ConvertConfig, model) buckets."""
    train_fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    convert_fields = {f.name: f.type for f in dataclasses.fields(ConvertConfig)}
    model_fields = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    type_of = {"str": str, "int": int, "float": float, "bool": bool}
    out_t, out_c, out_m = {}, {}, {}
    for key, text in values.items():
        if key in train_fields:
            out_t[key] = _coerce(key, text, type_of.get(train_fields[key], str))
        elif key in _OPTIONAL_INT:
            out_c[key] = _coerce(key, text, _OPTIONAL_INT[key])
        elif key in convert_fields:
            out_c[key] = _coerce(key, text, type_of.get(convert_fields[key], str))
        elif key in model_fields:
            out_m[key] = _coerce(key, text, type_of.get(model_fields[key], str))
        else:
            known = sorted(set(train_fields) | set(convert_fields) | set(model_fields))
            raise CliError(f"unknown config key {key!r}; known keys: {', '.join(known)}")
    return out_t, out_c, out_m


def _load_config_arg(args) -> tuple[dict, dict, dict]:
    if getattr(args, "config", None):
        return split_config(read_config_file(args.config))
    return {}, {}, {}


# -- synth --------------------------------------------------------------------

def cmd_synth(args) -> int:
    workspace = Path(args.out)
    with workspace_lock(workspace):
        side = _side_dir(workspace, args.side)
        _claim_dir(side, args.force, f"{args.side} footage")
        identity = random_identity(args.identity_seed)
        make_dataset(identity, args.frames, seed=args.walk_seed, out_dir=side,
                     size=args.frame_size)
    print(f"synthesized {args.frames} frames into {side} "
          f"(identity seed {args.identity_seed}, walk seed {args.walk_seed})")
    return 0


# -- extract ------------------------------------------------------------------

def cmd_extract(args) -> int:
    workspace = Path(args.workspace)
    side = _side_dir(workspace, args.side)
    frames_dir = side / "frames"
    if not frames_dir.is_dir() or not any(frames_dir.glob("*.png")):
        raise CliError(f"no frames at {frames_dir}; run synth or add footage first")
    with workspace_lock(workspace):
        stems = _png_stems(frames_dir)
        present = [s for s in stems if (side / "landmarks" / f"{s}.json").is_file()]
        skipped = [s for s in stems if s not in set(present)]
        if not present:
            raise CliError(f"no frames in {frames_dir} have landmark files")

        aligned_dir = _claim_dir(side / "aligned", args.force, "aligned faces")
        masks_dir = _claim_dir(side / "aligned_masks", True, "aligned masks")
        meta_dir = _claim_dir(side / "meta", True, "alignment metadata")

        sequence = [geometry.read_landmarks(side / "landmarks" / f"{s}.json")
                    for s in present]
        smoothed = geometry.smooth_landmarks(sequence, window=args.smooth_window)

        manifest_frames = []
        for stem, lms in zip(present, smoothed):
            image = imgcore.read_png(frames_dir / f"{stem}.png")
            aligned, t = geometry.align_face(image, lms, mode=args.mode,
                                             out_size=args.size)
            imgcore.write_png(aligned_dir / f"{stem}.png", aligned)
            mask_path = side / "masks" / f"{stem}.png"
            if mask_path.is_file():
                mask = imgcore.read_png(mask_path)
                warped = imgcore.warp_affine(mask, t.inverse().matrix(),
                                             args.size, args.size)
                imgcore.write_png(masks_dir / f"{stem}.png", warped)
            angles = geometry.euler_from_landmarks(lms)
            euler = {"yaw": angles.yaw, "pitch": angles.pitch, "roll": angles.roll}
            meta = {
                "transform": t.to_json_dict(args.mode, args.size),
                "aligned_points": [[float(x), float(y)] for x, y in t.apply(lms)],
                "euler": euler,
            }
            (meta_dir / f"{stem}.json").write_text(json.dumps(meta, indent=1))
            manifest_frames.append({"name": stem, "euler": euler})

        manifest = {
            "mode": args.mode,
            "size": args.size,
            "smooth_window": args.smooth_window,
            "frames": manifest_frames,
            "skipped": skipped,
        }
        (side / EXTRACT_MANIFEST).write_text(json.dumps(manifest, indent=1))
    msg = f"aligned {len(present)} faces into {aligned_dir}"
    if skipped:
        msg += f"; skipped {len(skipped)} without landmarks: {', '.join(skipped)}"
    print(msg)
    return 0


# -- train --------------------------------------------------------------------

def load_face_dataset(side: Path, resolution: int) -> FaceDataset:
    """Assemble a training set from one side's extraction outputs."""
    aligned_dir = side / "aligned"
    stems = _png_stems(aligned_dir)
    if not stems:
        raise CliError(f"no aligned faces in {aligned_dir}; run extract first")
    images, masks, points = [], [], []
    for stem in stems:
        img = imgcore.read_png(aligned_dir / f"{stem}.png")
        if img.shape[0] != resolution or img.shape[1] != resolution:
            raise CliError(
                f"aligned face {stem} is {img.shape[1]}x{img.shape[0]} but the "
                f"model resolution is {resolution}; re-run extract with "
                f"--size {resolution}")
        meta_path = side / "meta" / f"{stem}.json"
        if not meta_path.is_file():
            raise CliError(f"aligned face {stem} has no metadata at {meta_path}")
        meta = json.loads(meta_path.read_text())
        mask_path = side / "aligned_masks" / f"{stem}.png"
        if mask_path.is_file():
            mask = imgcore.read_png(mask_path)[:, :, 0]
        else:
            mask = np.ones((resolution, resolution))
        images.append(img)
        masks.append(mask)
        points.append(np.asarray(meta["aligned_points"], dtype=np.float64))
    return FaceDataset(np.stack(images), np.stack(masks), np.stack(points))


def cmd_train(args) -> int:
    workspace = Path(args.workspace)
    file_train, _, file_model = _load_config_arg(args)
    with workspace_lock(workspace):
        model_dir = workspace / "model"

        if args.resume:
            model = FaceSwapModel.load(model_dir)
            for flag in ("structure", "resolution", "hd",
                         "base_channels", "ae_dims"):
                asked = getattr(args, flag)
                have = getattr(model.config, flag)
                if asked is not None and asked != have:
                    raise CliError(
                        f"--{flag} {asked} conflicts with the checkpoint's "
                        f"{flag} {have}; drop the flag or start fresh")
        else:
            file_model.setdefault("structure", "df")
            file_model.setdefault("resolution", 96)
            file_model.setdefault("hd", False)
            for flag in ("structure", "resolution", "hd", "base_channels", "ae_dims"):
                value = getattr(args, flag)
                if value is not None:
                    file_model[flag] = value
            model_cfg = ModelConfig(**file_model)
            if model_dir.exists() and any(model_dir.iterdir()):
                if not args.force:
                    raise CliError(
                        f"model already exists at {model_dir}; pass --force to "
                        f"restart or --resume to continue")
                shutil.rmtree(model_dir)

        for flag in ("iterations", "seed", "batch_size"):
            value = getattr(args, flag)
            if value is not None:
                file_train[flag] = value
        config_path = model_dir / "train_config.json"
        if args.resume:
            # stored settings come first so a bare --resume continues with
            # the exact configuration (and RNG seed) of the original run
            stored = json.loads(config_path.read_text()) if config_path.is_file() else {}
            cfg = TrainConfig(**{**stored, **file_train})
            if model.iteration >= cfg.iterations:
                raise CliError(
                    f"checkpoint is already at iteration {model.iteration}; "
                    f"raise --iterations past it to continue")
        else:
            cfg = TrainConfig(**file_train)
            model = FaceSwapModel(model_cfg, seed=cfg.seed, cai=cfg.cai_init)
            model_dir.mkdir(parents=True, exist_ok=True)
        config_path.write_text(json.dumps(cfg.to_dict(), indent=1))

        src_data = load_face_dataset(_side_dir(workspace, "src"),
                                     model.config.resolution)
        dst_data = load_face_dataset(_side_dir(workspace, "dst"),
                                     model.config.resolution)
        reports = train(model, src_data, dst_data, cfg,
                        checkpoint_dir=model_dir,
                        log_path=model_dir / "loss.jsonl")
    if reports:
        last = reports[-1]
        print(f"trained to iteration {last.iteration}; "
              f"src total {last.src['total']:.4f}, dst total {last.dst['total']:.4f}")
    else:
        print("nothing to do")
    return 0


# -- convert ------------------------------------------------------------------

def cmd_convert(args) -> int:
    workspace = Path(args.workspace)
    _, file_convert, _ = _load_config_arg(args)
    with workspace_lock(workspace):
        model = FaceSwapModel.load(workspace / "model")

        for flag, key in (("direction", "direction"), ("color", "color_mode"),
                          ("blend", "blend_mode"), ("sharpen", "sharpen_amount"),
                          ("feather", "feather_sigma"), ("erode", "mask_erode")):
            value = getattr(args, flag)
            if value is not None:
                file_convert[key] = value
        cfg = ConvertConfig(**file_convert)

        side = _side_dir(workspace, "dst" if cfg.direction == "src2dst" else "src")
        frames_dir = side / "frames"
        if not frames_dir.is_dir() or not any(frames_dir.glob("*.png")):
            raise CliError(f"no frames at {frames_dir}")
        if not (side / "meta").is_dir():
            raise CliError(f"no alignment metadata at {side / 'meta'}; "
                           f"run extract on the {side.name} side first")

        out_root = _claim_dir(workspace / "output", args.force, "converted output")
        out_frames = out_root / "frames"
        out_masks = out_root / "masks"
        out_lms = out_root / "landmarks"
        for d in (out_frames, out_masks, out_lms):
            d.mkdir()

        stems = _png_stems(frames_dir)
        jobs = []
        for i, stem in enumerate(stems):
            frame = imgcore.read_png(frames_dir / f"{stem}.png")
            meta_path = side / "meta" / f"{stem}.json"
            if not meta_path.is_file():
                jobs.append(FrameJob(i, frame, None, None, None))
                continue
            meta = json.loads(meta_path.read_text())
            t = geometry.transform_from_json_dict(meta["transform"])
            lms = geometry.read_landmarks(side / "landmarks" / f"{stem}.json")
            mask_path = side / "masks" / f"{stem}.png"
            mask = imgcore.read_png(mask_path)[:, :, 0] if mask_path.is_file() else None
            jobs.append(FrameJob(i, frame, lms, mask, t))

        results = convert_sequence(model, jobs, cfg, workers=args.workers)

        with open(out_root / "diagnostics.jsonl", "w") as diag:
            for stem, result in zip(stems, results):
                imgcore.write_png(out_frames / f"{stem}.png", result.output)
                imgcore.write_png(out_masks / f"{stem}.png",
                                  imgcore.clamp01(result.mask))
                lm_path = side / "landmarks" / f"{stem}.json"
                if lm_path.is_file():
                    shutil.copyfile(lm_path, out_lms / f"{stem}.json")
                diag.write(json.dumps({"frame": stem, **result.diagnostics}) + "\n")
    swapped = sum(1 for r in results if "skipped" not in r.diagnostics)
    print(f"converted {len(results)} frames ({swapped} swapped) into {out_frames}")
    return 0


# -- evaluate -----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    report = metrics.evaluate(args.dir_a, args.dir_b, sampling=args.sample)
    if args.report:
        report.save_json(args.report)
    print(report.table())
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swapkit", description="face swap pipeline at desk scale")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="render synthetic footage into a workspace side")
    p.add_argument("--out", required=True, help="workspace root directory")
    p.add_argument("--side", required=True, choices=SIDES)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--identity-seed", type=int, default=0)
    p.add_argument("--walk-seed", type=int, default=0,
                   help="seed for the pose/expression random walk")
    p.add_argument("--frame-size", type=int, default=256)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="align faces from frames and landmarks")
    p.add_argument("--workspace", required=True)
    p.add_argument("--side", required=True, choices=SIDES)
    p.add_argument("--mode", default="full_face",
                   choices=sorted(geometry.COVERAGE))
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--smooth-window", type=int, default=1,
                   help="temporal smoothing window; 1 disables")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit the swap model on both aligned sets")
    p.add_argument("--workspace", required=True)
    p.add_argument("--structure", choices=("df", "liae"), default=None)
    p.add_argument("--hd", action="store_const", const=True, default=None)
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--base-channels", type=int, default=None, dest="base_channels")
    p.add_argument("--ae-dims", type=int, default=None, dest="ae_dims")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="key = value file")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", help="swap faces over the destination footage")
    p.add_argument("--workspace", required=True)
    p.add_argument("--direction", choices=("src2dst", "dst2src"), default=None)
    p.add_argument("--color", choices=("none", "rct", "idt"), default=None)
    p.add_argument("--blend", choices=("alpha", "poisson"), default=None)
    p.add_argument("--sharpen", type=float, default=None)
    p.add_argument("--feather", type=float, default=None)
    p.add_argument("--erode", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", help="score two frame directories")
    p.add_argument("--dir-a", required=True)
    p.add_argument("--dir-b", required=True)
    p.add_argument("--sample", type=int, default=100)
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
