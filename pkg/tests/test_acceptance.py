"""Checklist run over the package's numbered acceptance checks.

One test per check, each printing a single PASS/FAIL line that bypasses
pytest's capture, so a full run reads as a checklist. Checks 6 through 8
share one session-scoped workspace: four toy trainings (df, a df rerun
for determinism, df without the latent pull, liae) plus two conversions.
Building it takes roughly twenty minutes on one CPU core; every other
check finishes in seconds.
"""

import filecmp
import json
import math
import shutil
import time
from types import SimpleNamespace

import numpy as np
import pytest

from swapkit import imgcore, metrics
from swapkit.autograd import Tensor, ops
from swapkit.autograd.gradcheck import GradcheckFailure, gradcheck
from swapkit.cli import load_face_dataset
from swapkit.cli import main as cli_main
from swapkit.conversion import idt_transfer, poisson_blend, rct_transfer
from swapkit.datasim.dataset import load_identity, load_states
from swapkit.datasim.fit import fit_identity, identity_distance
from swapkit.geometry import (EulerAngles, alignment_template, read_landmarks,
                              umeyama, write_landmarks)
from swapkit.models import FaceSwapModel, ModelConfig
from swapkit.training import losses
from swapkit.training.config import TrainConfig
from swapkit.training.weights import batch_weight_maps

# Shared-workspace settings. The seeds are part of the contract: the toy
# runs must converge, stay bit-reproducible, and leave enough identity
# contrast between the two synthetic subjects for the conversion checks.
FRAMES = 16
FRAME_SIZE = 128
ALIGN_SIZE = 64
SRC_IDENTITY, SRC_WALK = 11, 11
DST_IDENTITY, DST_WALK = 22, 22
TRAIN_SEED = 7
ITERATIONS = 2000
# Flip/scale jitter is great for generalization but works against a
# 2000-iteration budget: late augmented batches keep reconstruction
# gradients large, which drowns the latent pull and slows memorization.
# The checks below pin it off.
CFG_LINES = ("augment = false",)


def _verdict(capfd, num: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} [{num}] {detail}"
    with capfd.disabled():
        print(line, flush=True)
    assert ok, line


def _run_cli(*argv):
    argv = [str(a) for a in argv]
    rc = cli_main(argv)
    assert rc == 0, f"command {' '.join(argv)} exited {rc}"


# ---------------------------------------------------------------------------
# [1] similarity-transform recovery


def test_01_similarity_recovery(capfd):
    rng = np.random.default_rng(20)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        scale = rng.uniform(0.5, 2.0)
        theta = rng.uniform(-np.pi, np.pi)
        shift = rng.uniform(-50.0, 50.0, 2)
        pts = rng.uniform(-100.0, 100.0, (68, 2))
        rot = np.array([[np.cos(theta), -np.sin(theta)],
                        [np.sin(theta), np.cos(theta)]])
        est = umeyama(pts, scale * pts @ rot.T + shift)
        est_theta = math.atan2(est.rotation[1, 0], est.rotation[0, 0])
        dtheta = (est_theta - theta + np.pi) % (2.0 * np.pi) - np.pi
        worst = max(worst,
                    abs(est.scale - scale) / scale,
                    abs(dtheta) / np.pi,
                    float(np.linalg.norm(est.translation - shift))
                    / max(float(np.linalg.norm(shift)), 1.0))
    took = time.perf_counter() - t0
    _verdict(capfd, 1, worst < 1e-9 and took < 5.0,
             f"similarity recovery on 1000 random transforms: worst rel "
             f"error {worst:.2e} (< 1e-9) in {took:.2f}s (< 5s)")


# ---------------------------------------------------------------------------
# [2] full-model gradient check


def test_02_gradient_check(capfd):
    res = 16
    cfg = TrainConfig()
    tpl = alignment_template("full_face").crop_points(res)
    rng = np.random.default_rng(123)
    n = 2
    xs = Tensor(rng.random((n, 3, res, res)))
    xd = Tensor(rng.random((n, 3, res, res)))
    ms = Tensor(rng.random((n, 1, res, res)))
    md = Tensor(rng.random((n, 1, res, res)))
    lms = np.stack([tpl + rng.normal(0, 0.3, tpl.shape) for _ in range(2 * n)])
    w_src = batch_weight_maps(lms[:n], res, cfg.eye_weight).astype(np.float64)
    w_dst = batch_weight_maps(lms[n:], res, cfg.eye_weight).astype(np.float64)

    t0 = time.perf_counter()
    worst = 0.0
    failures = []
    for structure in ("df", "liae"):
        for hd in (False, True):
            mc = ModelConfig(structure=structure, hd=hd, resolution=res,
                             base_channels=3, ae_dims=4)
            model = FaceSwapModel(mc, seed=5, dtype=np.float64)
            pull_key = "src" if structure == "df" else "src_ab"
            tgt_key = "dst" if structure == "df" else "dst_ab"
            # The latent pull stops gradients at the dst-side statistics,
            # so the finite-difference reference must treat them as a
            # constant too: freeze the target once, outside the closure.
            z_tgt = Tensor(model.forward_train(xs, xd).latents[tgt_key].data.copy())

            def build_loss():
                fwd = model.forward_train(xs, xd)
                l_s, _ = losses.mixed_loss(fwd.pred_src, xs, fwd.pred_src_mask,
                                           ms, w_src, cfg)
                l_d, _ = losses.mixed_loss(fwd.pred_dst, xd, fwd.pred_dst_mask,
                                           md, w_dst, cfg)
                tf = losses.trueface_loss(fwd.latents[pull_key], z_tgt, structure)
                return ops.add(ops.add(l_s, l_d),
                               ops.mul_scalar(tf, cfg.trueface_weight))

            tag = structure + ("+hd" if hd else "")
            try:
                worst = max(worst, gradcheck(
                    build_loss, model.parameters(), eps=1e-6, rtol=1e-5,
                    atol=5e-9, entries_per_tensor=8, seed=7))
            except GradcheckFailure as exc:
                failures.append(f"{tag}: {str(exc).splitlines()[0]}")
    took = time.perf_counter() - t0
    detail = (f"central-difference gradcheck, df/liae x plain/hd, mixed loss "
              f"+ latent pull at 16x16 f64: all probed entries within rtol "
              f"1e-5 / atol 5e-9, worst |analytic - numeric| / max(|grad|, "
              f"atol) = {worst:.1e}, {took:.1f}s (< 120s)")
    if failures:
        detail += "; failed " + "; ".join(failures)
    _verdict(capfd, 2, not failures and took < 120.0, detail)


# ---------------------------------------------------------------------------
# [3] seamless blend vs dense oracle


def _dense_poisson(target, source, omega):
    """Assemble the interior system explicitly and solve directly."""
    idx = {p: i for i, p in enumerate(zip(*np.nonzero(omega)))}
    out = target.copy()
    for c in range(target.shape[2]):
        a = np.zeros((len(idx), len(idx)))
        b = np.zeros(len(idx))
        for (r, cc), i in idx.items():
            a[i, i] = 4.0
            b[i] = (4 * source[r, cc, c] - source[r - 1, cc, c]
                    - source[r + 1, cc, c] - source[r, cc - 1, c]
                    - source[r, cc + 1, c])
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                q = (r + dr, cc + dc)
                if q in idx:
                    a[i, idx[q]] = -1.0
                else:
                    b[i] += target[q[0], q[1], c]
        x = np.linalg.solve(a, b)
        for (r, cc), i in idx.items():
            out[r, cc, c] = x[i]
    return out


def test_03_seamless_blend_oracle(capfd):
    rng = np.random.default_rng(33)
    worst_dense = 0.0
    worst_self = 0.0
    for h in range(1, 13):
        for w in range(1, 13):
            tgt = rng.random((h + 2, w + 2, 3))
            src = rng.random((h + 2, w + 2, 3))
            omega = np.zeros((h + 2, w + 2), bool)
            omega[1:h + 1, 1:w + 1] = True
            out, _ = poisson_blend(tgt, src, omega, cg_tol=1e-10)
            ref = _dense_poisson(tgt, src, omega)
            worst_dense = max(worst_dense, float(np.abs(out - ref).max()))
            same, _ = poisson_blend(tgt, tgt, omega, cg_tol=1e-10)
            worst_self = max(worst_self, float(np.abs(same - tgt).max()))

    # zero-gradient sources make the solution harmonic, so its interior
    # extremes may never leave the range of the boundary values
    worst_over = 0.0
    for _ in range(500):
        h = int(rng.integers(1, 13))
        w = int(rng.integers(1, 13))
        yy, xx = np.mgrid[0:h + 2, 0:w + 2].astype(np.float64)
        src = np.stack([rng.uniform(-0.03, 0.03) * yy
                        + rng.uniform(-0.03, 0.03) * xx
                        + rng.uniform(0.2, 0.8) for _ in range(3)], axis=2)
        tgt = rng.random((h + 2, w + 2, 3))
        omega = np.zeros((h + 2, w + 2), bool)
        omega[1:h + 1, 1:w + 1] = True
        out, _ = poisson_blend(tgt, src, omega, cg_tol=1e-10)
        ring = np.zeros_like(omega)
        ring[:-1] |= omega[1:]
        ring[1:] |= omega[:-1]
        ring[:, :-1] |= omega[:, 1:]
        ring[:, 1:] |= omega[:, :-1]
        ring &= ~omega
        for c in range(3):
            vals = out[omega, c]
            worst_over = max(worst_over,
                             float(tgt[ring, c].min() - vals.min()),
                             float(vals.max() - tgt[ring, c].max()))
    ok = worst_dense < 1e-6 and worst_self < 1e-6 and worst_over <= 1e-6
    _verdict(capfd, 3, ok,
             f"seamless blend: CG vs dense solve on all 144 interiors up to "
             f"12x12, max gap {worst_dense:.2e} (< 1e-6); source=target "
             f"drift {worst_self:.2e} (< 1e-6); boundary-range overshoot "
             f"{worst_over:.2e} on 500 harmonic instances (<= 1e-6)")


# ---------------------------------------------------------------------------
# [4] color transfer


def test_04_color_transfer(capfd):
    rng = np.random.default_rng(44)
    src = rng.random((24, 24, 3))
    ref = imgcore.clamp01(rng.random((24, 24, 3)) * 0.6 + 0.2)
    yy, xx = np.mgrid[0:24, 0:24]
    mask = (((yy - 12.0) ** 2 + (xx - 11.0) ** 2) <= 64).astype(np.float64)
    sel = mask > 0.5

    out = rct_transfer(src, ref, mask)
    lab_out = imgcore.rgb_to_lab(out)[sel]
    lab_ref = imgcore.rgb_to_lab(ref)[sel]
    rct_gap = max(float(np.abs(lab_out.mean(axis=0) - lab_ref.mean(axis=0)).max()),
                  float(np.abs(lab_out.std(axis=0) - lab_ref.std(axis=0)).max()))

    moved = idt_transfer(src, ref, mask, iterations=30, seed=0)
    mu_o, mu_r = moved[sel].mean(axis=0), ref[sel].mean(axis=0)
    sd_o, sd_r = moved[sel].std(axis=0), ref[sel].std(axis=0)
    idt_gap = max(float((np.abs(mu_o - mu_r) / np.abs(mu_r)).max()),
                  float((np.abs(sd_o - sd_r) / sd_r).max()))

    still_rct = float(np.abs(rct_transfer(src, src, mask) - src).max())
    still_idt = float(np.abs(idt_transfer(src, src, mask, iterations=30,
                                          seed=0) - src).max())
    ok = (rct_gap < 1e-6 and idt_gap < 0.02
          and still_rct < 1e-3 and still_idt < 1e-3)
    _verdict(capfd, 4, ok,
             f"color transfer: RCT masked Lab mean/std gap {rct_gap:.2e} "
             f"(< 1e-6); IDT 30-iteration RGB mean/std rel gap "
             f"{idt_gap * 100:.2f}% (< 2%); self-reference drift RCT "
             f"{still_rct:.2e} IDT {still_idt:.2e} (< 1e-3)")


# ---------------------------------------------------------------------------
# [5] SSIM properties


def test_05_ssim_properties(capfd):
    rng = np.random.default_rng(55)
    self_worst = 0.0
    for _ in range(100):
        img = rng.random((24, 24, 3))
        self_worst = max(self_worst, abs(metrics.ssim_score(img, img) - 1.0))

    sym_worst = 0.0
    for _ in range(20):
        a = rng.random((24, 24, 3))
        b = rng.random((24, 24, 3))
        sym_worst = max(sym_worst,
                        abs(metrics.ssim_score(a, b) - metrics.ssim_score(b, a)))

    img = rng.random((24, 24, 3))
    t = Tensor(img.transpose(2, 0, 1)[None].copy())
    zero = float(losses.dssim(t, t, np.ones((1, 24, 24))).data)

    const_worst = 0.0
    for _ in range(20):
        c1, c2 = rng.uniform(0.05, 0.95, 2)
        got = metrics.ssim_score(np.full((24, 24, 3), c1),
                                 np.full((24, 24, 3), c2))
        want = (2.0 * c1 * c2 + losses.C1) / (c1 * c1 + c2 * c2 + losses.C1)
        const_worst = max(const_worst, abs(got - want))

    ok = (self_worst < 1e-9 and sym_worst == 0.0 and zero == 0.0
          and const_worst < 1e-9)
    _verdict(capfd, 5, ok,
             f"ssim: self-comparison off by {self_worst:.1e} max over 100 "
             f"images (< 1e-9); symmetry gap {sym_worst:.1e} (= 0); "
             f"dssim(x,x) = {zero:.1e} (= 0); constant pair vs closed form "
             f"off by {const_worst:.1e} (< 1e-9)")


# ---------------------------------------------------------------------------
# shared toy-pipeline workspace for [6], [7], [8]


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    base = root / "base"
    base.mkdir()
    for side, ident, walk in (("src", SRC_IDENTITY, SRC_WALK),
                              ("dst", DST_IDENTITY, DST_WALK)):
        _run_cli("synth", "--out", base, "--side", side, "--frames", FRAMES,
                 "--identity-seed", ident, "--walk-seed", walk,
                 "--frame-size", FRAME_SIZE)
        _run_cli("extract", "--workspace", base, "--side", side,
                 "--size", ALIGN_SIZE)

    def train_ws(name, structure, extra_cfg=()):
        ws = root / name
        ws.mkdir()
        for side in ("src", "dst"):
            shutil.copytree(base / side, ws / side)
        cfg = ws / "train.cfg"
        cfg.write_text("".join(line + "\n" for line in (*CFG_LINES, *extra_cfg)))
        t0 = time.perf_counter()
        _run_cli("train", "--workspace", ws, "--structure", structure,
                 "--resolution", 64, "--base-channels", 16, "--ae-dims", 64,
                 "--iterations", ITERATIONS, "--batch-size", 4,
                 "--seed", TRAIN_SEED, "--config", cfg)
        return ws, time.perf_counter() - t0

    ws_df, df_seconds = train_ws("df", "df")
    ws_rerun, _ = train_ws("df_rerun", "df")
    ws_nopull, _ = train_ws("df_nopull", "df", ("trueface_weight = 0",))
    ws_liae, _ = train_ws("liae", "liae")
    _run_cli("convert", "--workspace", ws_df, "--force")
    _run_cli("convert", "--workspace", ws_liae, "--force")
    return SimpleNamespace(df=ws_df, rerun=ws_rerun, nopull=ws_nopull,
                           liae=ws_liae, df_seconds=df_seconds)


# ---------------------------------------------------------------------------
# [6] toy training convergence


def test_06_toy_training(capfd, pipeline):
    log = [json.loads(line) for line in
           (pipeline.df / "model" / "loss.jsonl").read_text().splitlines()]
    by_iter = {entry["iteration"]: entry for entry in log}

    def total(entry):
        return entry["src"]["total"] + entry["dst"]["total"]

    ratio = total(log[-1]) / total(by_iter[10])

    tcfg = json.loads((pipeline.df / "model" / "train_config.json").read_text())
    adam_ok = (tcfg["lr"], tcfg["beta1"], tcfg["beta2"]) == (5e-5, 0.5, 0.999)

    names = sorted(p.name for p in (pipeline.df / "model").iterdir())
    rerun_names = sorted(p.name for p in (pipeline.rerun / "model").iterdir())
    identical = names == rerun_names and all(
        filecmp.cmp(pipeline.df / "model" / n, pipeline.rerun / "model" / n,
                    shallow=False) for n in names)

    ok = (ratio < 0.25 and adam_ok and identical
          and pipeline.df_seconds < 1800.0)
    _verdict(capfd, 6, ok,
             f"toy df training, 2000 iterations batch 4: final/iteration-10 "
             f"loss ratio {ratio:.3f} (< 0.25); Adam lr/betas "
             f"{'as pinned' if adam_ok else 'WRONG'}; rerun with same seed "
             f"{'byte-identical' if identical else 'DIVERGED'} across "
             f"{len(names)} checkpoint files; {pipeline.df_seconds:.0f}s "
             f"(< 1800s)")


# ---------------------------------------------------------------------------
# [7] latent pull effect


def _latent_gap(ws):
    model = FaceSwapModel.load(ws / "model")
    src = load_face_dataset(ws / "src", 64)
    dst = load_face_dataset(ws / "dst", 64)
    fwd = model.forward_train(
        Tensor(src.images.transpose(0, 3, 1, 2).astype(model.dtype)),
        Tensor(dst.images.transpose(0, 3, 1, 2).astype(model.dtype)))
    ks, kd = (("src", "dst") if model.config.structure == "df"
              else ("src_ab", "dst_ab"))
    mu_s = fwd.latents[ks].data.mean(axis=(0, 2, 3))
    mu_d = fwd.latents[kd].data.mean(axis=(0, 2, 3))
    return float(np.linalg.norm(mu_s - mu_d))


def test_07_latent_pull(capfd, pipeline):
    gap_on = _latent_gap(pipeline.df)
    gap_off = _latent_gap(pipeline.nopull)
    reduction = 1.0 - gap_on / gap_off
    _verdict(capfd, 7, reduction >= 0.5,
             f"latent pull at weight 0.01 vs 0, same seed: mean-code gap "
             f"{gap_on:.4f} vs {gap_off:.4f}, reduced {reduction * 100:.1f}% "
             f"(>= 50%)")


# ---------------------------------------------------------------------------
# [8] end-to-end swap


def _untouched_outside_bbox(ws):
    diags = {d["frame"]: d for d in map(
        json.loads,
        (ws / "output" / "diagnostics.jsonl").read_text().splitlines())}
    for fp in sorted((ws / "output" / "frames").glob("*.png")):
        out = imgcore.read_png(fp)
        ref = imgcore.read_png(ws / "dst" / "frames" / fp.name)
        box = diags[fp.stem].get("bbox")
        if box is None:
            if not np.array_equal(out, ref):
                return False
            continue
        r0, r1, c0, c1 = box
        probe = out.copy()
        probe[r0:r1, c0:c1] = ref[r0:r1, c0:c1]
        if not np.array_equal(probe, ref):
            return False
    return True


def _halve(img):
    h, w = img.shape[:2]
    out = img.reshape(h // 2, 2, w // 2, 2, -1).mean(axis=(1, 3))
    return out[:, :, 0] if img.ndim == 2 else out


def _identity_wins(ws):
    # fitting at half resolution keeps 16 frames under a couple of minutes
    src_id = load_identity(ws / "src")
    dst_id = load_identity(ws / "dst")
    states = load_states(ws / "dst")
    wins = total = 0
    for fp in sorted((ws / "output" / "frames").glob("*.png")):
        frame = _halve(imgcore.read_png(fp))
        mask = _halve(imgcore.read_png(ws / "output" / "masks" / fp.name)[:, :, 0])
        fitted = fit_identity(frame, states[fp.stem], mask=mask)
        wins += identity_distance(fitted, src_id) < identity_distance(fitted, dst_id)
        total += 1
    return wins, total


def _mask_iou(ws):
    vals = []
    for fp in sorted((ws / "output" / "masks").glob("*.png")):
        pred = imgcore.read_png(fp)[:, :, 0] > 0.5
        true = imgcore.read_png(ws / "dst" / "masks" / fp.name)[:, :, 0] > 0.5
        vals.append(np.logical_and(pred, true).sum()
                    / np.logical_or(pred, true).sum())
    return float(np.mean(vals))


def test_08_end_to_end_swap(capfd, pipeline):
    clean = (_untouched_outside_bbox(pipeline.df)
             and _untouched_outside_bbox(pipeline.liae))
    df_wins, df_total = _identity_wins(pipeline.df)
    liae_wins, liae_total = _identity_wins(pipeline.liae)
    wins_ok = df_wins >= 0.8 * df_total and liae_wins >= 0.8 * liae_total
    iou_df = _mask_iou(pipeline.df)
    iou_liae = _mask_iou(pipeline.liae)
    iou_ok = iou_liae > iou_df or iou_liae >= 0.98 * iou_df
    _verdict(capfd, 8, clean and wins_ok and iou_ok,
             f"end-to-end swap: outside-bbox pixels "
             f"{'untouched' if clean else 'MODIFIED'}; fitted identity "
             f"closer to source on df {df_wins}/{df_total} and liae "
             f"{liae_wins}/{liae_total} frames (>= 80%); mask IoU liae "
             f"{iou_liae:.4f} vs df {iou_df:.4f} (higher, or equal "
             f"within 2%)")


# ---------------------------------------------------------------------------
# [9] metrics protocol


def test_09_metrics_protocol(capfd, tmp_path):
    ws = tmp_path / "mini"
    ws.mkdir()
    _run_cli("synth", "--out", ws, "--side", "src", "--frames", 4,
             "--identity-seed", 3, "--walk-seed", 3, "--frame-size", 64)
    seq = ws / "src"
    rep = metrics.evaluate(seq, seq)
    level = rep.frame_level
    self_ok = (level["ssim"] == {"mean": 1.0, "std": 0.0}
               and level["landmark_dist"] == {"mean": 0.0, "std": 0.0}
               and level["pose_dist"] == {"mean": 0.0, "std": 0.0})

    # quantize coordinates to multiples of 1/1024 so that adding (3, 4)
    # stays exact in binary floating point and every distance is exactly 5
    quant = tmp_path / "quant"
    shifted = tmp_path / "shifted"
    for d in (quant, shifted):
        (d / "frames").mkdir(parents=True)
        (d / "landmarks").mkdir()
    for fp in (seq / "frames").glob("*.png"):
        shutil.copy(fp, quant / "frames" / fp.name)
        shutil.copy(fp, shifted / "frames" / fp.name)
    for lp in (seq / "landmarks").glob("*.json"):
        pts = np.round(read_landmarks(lp) * 1024.0) / 1024.0
        write_landmarks(quant / "landmarks" / lp.name, pts)
        write_landmarks(shifted / "landmarks" / lp.name, pts + [3.0, 4.0])
    shift = metrics.evaluate(quant, shifted).frame_level["landmark_dist"]
    shift_ok = shift == {"mean": 5.0, "std": 0.0}

    wrap = metrics.pose_distance(EulerAngles(yaw=179.0, pitch=4.0, roll=-7.0),
                                 EulerAngles(yaw=-179.0, pitch=4.0, roll=-7.0))
    _verdict(capfd, 9, self_ok and shift_ok and wrap == 2.0,
             f"metrics: self-evaluation ssim mean 1 and zero distances "
             f"{'exact' if self_ok else 'OFF'}; (3,4)-shifted landmarks "
             f"mean {shift['mean']} px std {shift['std']} (= 5.0, 0); "
             f"yaw 179 vs -179 delta {wrap} deg (= 2.0)")
