"""Mini dynamic-graph edge-convolution classifier.

Two edge-convolution blocks. The edge feature of edge (i, j) is
``[f_i, f_j - f_i]``; a shared linear+ReLU maps it up, then a max over the k
neighbors produces the per-point feature. The second block recomputes the
kNN graph in feature space (the "dynamic" graph). A global max-pool and a
dense head finish the classifier.

The edge weight splits into a center half and a difference half, so the
center contribution is one small (P, F) matmul instead of being repeated
across all k edges; the function computed is unchanged.

Gradients treat both kNN graphs as fixed: no gradient flows through neighbor
selection. Neighbor-max ties go to the earliest neighbor slot and global
max-pool ties to the lowest point index.
"""

from __future__ import annotations

import numpy as np

from ..pointcloud import knn_rows
from .common import cross_entropy, cross_entropy_dlogits, relu

DEFAULT_HIDDEN = (64, 128, 64)


def layer_sizes(n_classes: int, hidden=DEFAULT_HIDDEN) -> dict[str, tuple[int, int]]:
    e1, e2, hh = hidden
    return {
        "edge1": (6, e1),
        "edge2": (2 * e1, e2),
        "head1": (e2, hh),
        "head2": (hh, n_classes),
    }


def _edge_preact(params, name, feats, k):
    """Pre-activations z[i, j] = [f_i, f_idx[i,j] - f_i] @ W + b."""
    p, f = feats.shape
    idx = knn_rows(feats, k)
    w = params[f"{name}.w"]
    diff = feats[idx] - feats[:, None, :]
    z = (diff.reshape(p * k, f) @ w[f:]).reshape(p, k, w.shape[1])
    z += (feats @ w[:f] + params[f"{name}.b"])[:, None, :]
    return idx, diff, z


def _neighbor_max(z: np.ndarray):
    """Max over the k neighbor slots plus the winning slot per channel.

    Strict comparison keeps the first maximal slot on ties.
    """
    p, k, h = z.shape
    zpool = z[:, 0, :].copy()
    slots = np.zeros((p, h), dtype=np.int64)
    for j in range(1, k):
        better = z[:, j, :] > zpool
        np.copyto(zpool, z[:, j, :], where=better)
        slots[better] = j
    return slots, zpool


def _scatter_add_rows(out: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> None:
    """out[idx[i, j]] += vals[i, j] via a sorted segment sum."""
    flat = idx.ravel()
    order = np.argsort(flat, kind="stable")
    si = flat[order]
    sv = vals.reshape(-1, vals.shape[-1])[order]
    starts = np.concatenate(([0], np.flatnonzero(si[1:] != si[:-1]) + 1))
    out[si[starts]] += np.add.reduceat(sv, starts, axis=0)


def _edge_block(params, name, feats, k):
    idx, diff, z = _edge_preact(params, name, feats, k)
    slots, zpool = _neighbor_max(z)
    # relu commutes with the neighbor max; non-positive pools gate to zero
    return idx, diff, z, slots, zpool, np.maximum(zpool, 0.0)


def forward(params: dict[str, np.ndarray], pts: np.ndarray, k: int) -> np.ndarray:
    h = pts
    for name in ("edge1", "edge2"):
        _, _, z = _edge_preact(params, name, h, k)
        h = np.maximum(z.max(axis=1), 0.0)
    pooled = h.max(axis=0)
    ah = relu(pooled @ params["head1.w"] + params["head1.b"])
    return ah @ params["head2.w"] + params["head2.b"]


def _edge_block_backward(params, name, grads, dh, feats, idx, diff, z, slots, zpool):
    """Push a per-point gradient back through one edge block.

    Returns the gradient with respect to the block's input features.
    """
    p, f = feats.shape
    w = params[f"{name}.w"]
    dzpool = dh * (zpool > 0)
    dz = np.zeros_like(z)
    np.put_along_axis(dz, slots[:, None, :], dzpool[:, None, :], axis=1)
    flat_dz = dz.reshape(-1, z.shape[2])
    dw = np.empty_like(w)
    dw[:f] = feats.T @ dzpool  # center rows collapse over the k edges
    dw[f:] = diff.reshape(-1, f).T @ flat_dz
    grads[f"{name}.w"] = dw
    grads[f"{name}.b"] = dzpool.sum(axis=0)
    ddiff = (flat_dz @ w[f:].T).reshape(p, -1, f)
    dfeats = dzpool @ w[:f].T
    dfeats -= ddiff.sum(axis=1)
    _scatter_add_rows(dfeats, idx, ddiff)
    return dfeats


def loss_and_grads(params: dict[str, np.ndarray], pts: np.ndarray, label: int, k: int):
    idx1, diff1, z1, m1, zp1, h1 = _edge_block(params, "edge1", pts, k)
    idx2, diff2, z2, m2, zp2, h2 = _edge_block(params, "edge2", h1, k)
    cols = np.arange(h2.shape[1])
    rows = np.argmax(h2, axis=0)
    pooled = h2[rows, cols]
    zh = pooled @ params["head1.w"] + params["head1.b"]
    ah = relu(zh)
    logits = ah @ params["head2.w"] + params["head2.b"]

    loss = cross_entropy(logits, label)
    d = cross_entropy_dlogits(logits, label)

    grads = {"head2.w": np.outer(ah, d), "head2.b": d}
    dah = params["head2.w"] @ d
    dzh = dah * (zh > 0)
    grads["head1.w"] = np.outer(pooled, dzh)
    grads["head1.b"] = dzh
    dpooled = params["head1.w"] @ dzh

    dh2 = np.zeros_like(h2)
    dh2[rows, cols] = dpooled
    dh1 = _edge_block_backward(params, "edge2", grads, dh2, h1, idx2, diff2, z2, m2, zp2)
    dx = _edge_block_backward(params, "edge1", grads, dh1, pts, idx1, diff1, z1, m1, zp1)
    return loss, dx, grads
