"""Shared fixtures: a fast tiny trained model and the desk-scale bundle.

The desk bundle trains both full architectures once per session (the
acceptance suite asserts on the recorded wall times), so expect the first
dependent test to take several minutes.
"""

from __future__ import annotations

import time
from dataclasses import replace
from types import SimpleNamespace

import pytest

from nudge3d.models import TrainConfig, train_model
from nudge3d.pointcloud import synth_dataset

DESK_TRAIN_SEED = 11
DESK_EVAL_SEED = 77


@pytest.fixture(scope="session")
def tiny_bundle():
    """Small, quickly trained mini-PointNet plus its data (seconds, not minutes)."""
    train = synth_dataset(8, 64, seed=5, jitter=0.02, split="train")
    test = synth_dataset(3, 64, seed=5, jitter=0.02, split="test")
    cfg = TrainConfig(epochs=30, learning_rate=0.02, batch_size=8, seed=0)
    model, log = train_model("mini-pointnet", train, cfg, test_set=test,
                             hidden=(16, 16, 32, 16))
    return SimpleNamespace(model=model, log=log, train=train, test=test, config=cfg)


@pytest.fixture(scope="session")
def desk_bundle():
    """Desk-scale datasets and trained models shared by trend/acceptance tests."""
    train = synth_dataset(40, 256, seed=DESK_TRAIN_SEED, jitter=0.02, split="train")
    test = synth_dataset(10, 256, seed=DESK_TRAIN_SEED, jitter=0.02, split="test")
    evalset = synth_dataset(20, 256, seed=DESK_EVAL_SEED, jitter=0.02, split="test")
    cfg = TrainConfig(epochs=60, learning_rate=0.01, batch_size=16, seed=0)

    t0 = time.perf_counter()
    pointnet, pn_log = train_model("mini-pointnet", train, cfg, test_set=test)
    pn_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    dgcnn, dg_log = train_model("mini-dgcnn", train, cfg, test_set=test, k=8)
    dg_seconds = time.perf_counter() - t0

    pointnet_alt, _ = train_model("mini-pointnet", train, replace(cfg, seed=1),
                                  test_set=test)
    return SimpleNamespace(
        train=train, test=test, evalset=evalset, config=cfg,
        pointnet=pointnet, pointnet_log=pn_log, pointnet_seconds=pn_seconds,
        dgcnn=dgcnn, dgcnn_log=dg_log, dgcnn_seconds=dg_seconds,
        pointnet_alt=pointnet_alt,
    )
