"""Toy configurations and harnesses shared by unit and acceptance tests."""

import os
import time

import numpy as np

from lfsr import autodiff as ad
from lfsr.ahqrg import AhqrgConfig, ahqrg_forward, init_ahqrg
from lfsr.data import PrepareConfig, load_dataset, prepare_dataset
from lfsr.figures import emit_figure_data, pipeline_variants
from lfsr.gradcheck import check_gradients
from lfsr.lfrefine import LfrefineConfig, init_lfrefine, lfrefine_forward
from lfsr.lightfield import LightField, save_lf
from lfsr.losses import epi_gradient_loss, gradient_l1, l1_loss, mean_view_psnr, psnr
from lfsr.pipeline import Model, infer_pipeline
from lfsr.train import TrainConfig, network_config, train_ahqrg, train_lfrefine, train_ttsr
from lfsr.ttsr import TtsrConfig, init_ttsr, ttsr_forward


def random_lf(shape, seed=0):
    return LightField(np.random.default_rng(seed).uniform(0.05, 0.95, size=shape))


def _with_head(params, seed):
    # a random (non-zero) output head so every parameter receives gradient
    rng = np.random.default_rng(seed + 100)
    for key in ("out.w", "out.b"):
        params[key].data = rng.uniform(-0.2, 0.2, size=params[key].shape)
    return params


def ahqrg_gradcheck(seed=0):
    config = AhqrgConfig(angular=(3, 3), channels=4, stages=1, dtype="float64")
    params = _with_head(init_ahqrg(config, seed=seed), seed)
    lf = random_lf((3, 3, 8, 8), seed)
    target = np.random.default_rng(seed + 1).uniform(size=(32, 32))

    def loss():
        out = ahqrg_forward(lf, params, config)
        return ad.add(l1_loss(out, target), gradient_l1(out, target))

    return check_gradients(loss, params)


def ttsr_gradcheck(seed=0):
    config = TtsrConfig(channels=4, dtype="float64")
    params = _with_head(init_ttsr(config, seed=seed), seed)
    rng = np.random.default_rng(seed + 2)
    lr_view, ref = rng.uniform(size=(8, 8)), rng.uniform(size=(32, 32))
    target = rng.uniform(size=(32, 32))

    def loss():
        out, _ = ttsr_forward(lr_view, ref, params, config)
        return ad.add(l1_loss(out, target), gradient_l1(out, target))

    return check_gradients(loss, params)


def lfrefine_gradcheck(seed=0):
    config = LfrefineConfig(angular=(3, 3), channels=4, stages=1, dtype="float64")
    params = _with_head(init_lfrefine(config, seed=seed), seed)
    lf = random_lf((3, 3, 8, 8), seed + 3)
    gt = np.random.default_rng(seed + 4).uniform(size=(3, 3, 8, 8))

    def loss():
        out = lfrefine_forward(lf, params, config)
        total = ad.add(l1_loss(out, gt), gradient_l1(out, gt))
        return ad.add(total, epi_gradient_loss(out, gt))

    return check_gradients(loss, params)


# Desk-scale end-to-end configuration: 32x32 HR patches (8x8 LR), two
# interleaved stages, 500 Adam steps per module.
E2E_PATCH = 32
E2E_TRAIN = dict(max_steps=500, learning_rate=1e-3, channels=16, stages=2, seed=0)


def run_toy_e2e(workdir):
    """Prepare data, train the three modules, evaluate on held-out LFs.

    Returns a dict of held-out metrics, the report table and timing.
    """
    start = time.perf_counter()
    prep = dict(patch=E2E_PATCH, source_size=E2E_PATCH + 16)
    prepare_dataset(os.path.join(workdir, "train"), PrepareConfig(count=20, seed=1, **prep))
    prepare_dataset(os.path.join(workdir, "test"), PrepareConfig(count=5, seed=2, **prep))
    train = load_dataset(os.path.join(workdir, "train"))
    test = load_dataset(os.path.join(workdir, "test"))
    ck = os.path.join(workdir, "checkpoints")

    models = {}
    for module, trainer in (("ahqrg", train_ahqrg), ("ttsr", train_ttsr)):
        cfg = TrainConfig(module=module, **E2E_TRAIN)
        params, _ = trainer(train, cfg, ck)
        models[module] = Model(module, network_config(module, cfg, (7, 7)), params)
    cfg = TrainConfig(module="lfrefine", **E2E_TRAIN)
    params, _ = train_lfrefine(train, cfg, ck, models["ahqrg"], models["ttsr"])
    models["lfrefine"] = Model("lfrefine", network_config("lfrefine", cfg, (7, 7)), params)

    rows = []
    table = None
    for i, (hr, lr) in enumerate(test):
        r = infer_pipeline(lr, models["ahqrg"], models["ttsr"], models["lfrefine"])
        rows.append(dict(
            central_bicubic=psnr(r.bicubic.central_view, hr.central_view),
            central_ahqrg=psnr(r.reference, hr.central_view),
            bicubic=mean_view_psnr(r.bicubic, hr),
            ttsr=mean_view_psnr(r.ttsr, hr),
            lfrefine=mean_view_psnr(r.refined, hr),
        ))
        if i == 0:
            save_lf(r.refined, os.path.join(workdir, "heldout_0", "lfrefine"))
            table, _ = emit_figure_data(os.path.join(workdir, "heldout_0", "figures"), hr,
                                        pipeline_variants(r), r.reference)
    metrics = {k: float(np.mean([row[k] for row in rows])) for k in rows[0]}
    return dict(metrics=metrics, per_lf=rows, table=table, seconds=time.perf_counter() - start)


def artifact_bytes(workdir):
    """Relative path -> bytes for every checkpoint, CSV and PNG under ``workdir``."""
    out = {}
    for root, _, files in os.walk(workdir):
        for f in files:
            if f.endswith((".ckpt", ".csv", ".png")):
                p = os.path.join(root, f)
                with open(p, "rb") as fh:
                    out[os.path.relpath(p, workdir)] = fh.read()
    return out
