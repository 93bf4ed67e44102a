"""Synthetic shot generation: a seeded random walk over per-frame state.

make_dataset fills one side of a workspace (frames/, landmarks/, masks/)
and drops the ground truth next to it: identity.json with the rendered
identity and states.json with every frame's state, so tests and the
identity oracle can replay any frame exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from swapkit.geometry import write_landmarks
from swapkit.imgcore import write_png
from .render import (IDENTITY_RANGES, STATE_RANGES, DatasimError,
                     IdentityParams, StateParams, render)

FRAME_SIZE = 256
WALK_STEPS = {"yaw": 4.0, "pitch": 2.5, "roll": 2.0,
              "mouth_open": 0.08, "eye_open": 0.06, "illumination": 0.05}
# fresh walks start away from the range edges
START_SPANS = {"yaw": 15.0, "pitch": 10.0, "roll": 8.0}

IDENTITY_FILE = "identity.json"
STATES_FILE = "states.json"


def frame_name(index: int) -> str:
    return f"frame_{index:05d}"


def random_identity(seed: int) -> IdentityParams:
    """Uniform draw over the middle 80% of every identity range."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(4,)))

    def draw(name):
        lo, hi = IDENTITY_RANGES[name]
        margin = 0.1 * (hi - lo)
        return float(rng.uniform(lo + margin, hi - margin))

    return IdentityParams(
        axes_ratio=draw("axes_ratio"), eye_spacing=draw("eye_spacing"),
        eye_size=draw("eye_size"), nose_length=draw("nose_length"),
        mouth_width=draw("mouth_width"),
        skin=tuple(draw("skin") for _ in range(3)),
        feature=tuple(draw("feature") for _ in range(3)))


def _reflect(x: float, lo: float, hi: float) -> float:
    span = hi - lo
    while x < lo or x > hi:
        if x < lo:
            x = lo + (lo - x)
        else:
            x = hi - (x - hi)
    if span == 0:
        return lo
    return x


def walk_states(n_frames: int, seed: int) -> list[StateParams]:
    """The deterministic state sequence for a shot.

    Pose/expression/lighting follow independent reflected Gaussian walks
    (step sizes in WALK_STEPS); each frame's background seed is its own
    spawn of the master seed. Exposed separately from make_dataset so
    tests can recompute the exact sequence.
    """
    if n_frames < 1:
        raise DatasimError(f"n_frames must be >= 1, got {n_frames}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    values = {
        "yaw": rng.uniform(-START_SPANS["yaw"], START_SPANS["yaw"]),
        "pitch": rng.uniform(-START_SPANS["pitch"], START_SPANS["pitch"]),
        "roll": rng.uniform(-START_SPANS["roll"], START_SPANS["roll"]),
        "mouth_open": rng.uniform(0.0, 0.5),
        "eye_open": rng.uniform(0.7, 1.0),
        "illumination": rng.uniform(0.9, 1.1),
    }
    states = []
    for i in range(n_frames):
        bg = int(np.random.SeedSequence(
            entropy=seed, spawn_key=(3, i)).generate_state(1)[0])
        states.append(StateParams(background_seed=bg, **{
            k: float(v) for k, v in values.items()}))
        for key, step in WALK_STEPS.items():
            lo, hi = STATE_RANGES[key]
            values[key] = _reflect(values[key] + step * rng.standard_normal(), lo, hi)
    return states


def make_dataset(identity: IdentityParams, n_frames: int, seed: int,
                 out_dir, size: int = FRAME_SIZE) -> Path:
    """Render a shot into out_dir/{frames,landmarks,masks} plus ground truth."""
    out = Path(out_dir)
    states = walk_states(n_frames, seed)
    for sub in ("frames", "landmarks", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    recorded = {}
    for i, state in enumerate(states):
        name = frame_name(i)
        img, lm, mask = render(identity, state, size)
        write_png(out / "frames" / f"{name}.png", img)
        write_landmarks(out / "landmarks" / f"{name}.json", lm)
        write_png(out / "masks" / f"{name}.png", mask)
        recorded[name] = state.to_dict()
    (out / IDENTITY_FILE).write_text(
        json.dumps(identity.to_dict(), indent=1, sort_keys=True) + "\n")
    (out / STATES_FILE).write_text(json.dumps(
        {"seed": seed, "size": size, "frames": recorded},
        indent=1, sort_keys=True) + "\n")
    return out


def load_identity(side_dir) -> IdentityParams:
    return IdentityParams.from_dict(
        json.loads((Path(side_dir) / IDENTITY_FILE).read_text()))


def load_states(side_dir) -> dict:
    """Frame name -> StateParams for a generated side directory."""
    raw = json.loads((Path(side_dir) / STATES_FILE).read_text())
    return {name: StateParams.from_dict(d) for name, d in raw["frames"].items()}
