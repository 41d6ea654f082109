"""Batched tanh-MLP evaluation with input-derivative channels and
hand-derived parameter gradients.

The network value u and the requested input derivatives (u_x, u_t, u_xx,
u_tt) are propagated together through the layers for a whole batch of
points; the reverse pass backpropagates adjoints of any subset of those
channels to the weights.  All arithmetic runs in the precision's storage
dtype with round-after-op applied for emulated formats, which is what makes
this path interchangeable with the scalar tape (tests pin the agreement).

Notation inside: for each hidden layer, z = a_prev @ W.T + b, a = tanh(z);
first-derivative channels obey d = sig1 * (d_prev @ W.T) with
sig1 = 1 - a^2, and second-derivative channels
s = sig2 * dz^2 + sig1 * (s_prev @ W.T) with sig2 = -2 a sig1.
"""

from __future__ import annotations

import numpy as np

from .precision import PrecisionSpec, matmul

CHANNELS = ("u", "ux", "ut", "uxx", "utt")


def unpack_flat(flat: np.ndarray, shapes):
    """Split a flat parameter vector into weight/bias views (no copies)."""
    Ws, bs = [], []
    pos = 0
    for o, i in shapes:
        Ws.append(flat[pos:pos + o * i].reshape(o, i))
        pos += o * i
        bs.append(flat[pos:pos + o])
        pos += o
    if pos != flat.size:
        raise ValueError("flat vector length does not match shapes")
    return Ws, bs


def pack_flat(Ws, bs) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b])
                           for w, b in zip(Ws, bs)])


def forward_channels(Ws, bs, X, need, spec: PrecisionSpec):
    """Evaluate the requested channels for a batch of points.

    X is (N, 2) with columns (x, t).  Returns ({channel: (N,) array}, cache)
    where the cache feeds backward_channels.
    """
    need = set(need)
    bad = need.difference(CHANNELS)
    if bad:
        raise ValueError(f"unknown channels {sorted(bad)}")
    r = spec.round_array
    dt = spec.dtype
    coords = []
    if "ux" in need or "uxx" in need:
        coords.append(0)
    if "ut" in need or "utt" in need:
        coords.append(1)
    second = set()
    if "uxx" in need:
        second.add(0)
    if "utt" in need:
        second.add(1)

    N = X.shape[0]
    a = np.ascontiguousarray(X, dtype=dt)
    d = {c: np.repeat(np.eye(2, dtype=dt)[None, c], N, axis=0) for c in coords}
    s = {c: np.zeros((N, 2), dtype=dt) for c in second}

    layers = []
    for W, b in zip(Ws[:-1], bs[:-1]):
        Wt = W.T
        z = r(r(matmul(spec, a, Wt)) + b)
        anew = r(np.tanh(z))
        sig1 = r(1.0 - r(anew * anew))
        rec = {"a_prev": a, "a": anew, "sig1": sig1,
               "d_prev": d, "s_prev": s, "dz": {}, "sz": {}, "sig2": None}
        dnew, snew = {}, {}
        if second:
            rec["sig2"] = r(dt(-2.0) * r(anew * sig1))
        for c in coords:
            dz = r(matmul(spec, d[c], Wt))
            rec["dz"][c] = dz
            dnew[c] = r(sig1 * dz)
            if c in second:
                sz = r(matmul(spec, s[c], Wt))
                rec["sz"][c] = sz
                snew[c] = r(r(rec["sig2"] * r(dz * dz)) + r(sig1 * sz))
        a, d, s = anew, dnew, snew
        layers.append(rec)

    WL, bL = Ws[-1], bs[-1]
    out = {}
    if "u" in need:
        out["u"] = r(r(matmul(spec, a, WL.T)) + bL)[:, 0]
    if "ux" in need:
        out["ux"] = r(matmul(spec, d[0], WL.T))[:, 0]
    if "ut" in need:
        out["ut"] = r(matmul(spec, d[1], WL.T))[:, 0]
    if "uxx" in need:
        out["uxx"] = r(matmul(spec, s[0], WL.T))[:, 0]
    if "utt" in need:
        out["utt"] = r(matmul(spec, s[1], WL.T))[:, 0]

    cache = {"layers": layers, "last": {"a_prev": a, "d_prev": d, "s_prev": s},
             "Ws": Ws, "spec": spec}
    return out, cache


_ADJ_KEYS = {"u": ("val", None), "ux": ("d", 0), "ut": ("d", 1),
             "uxx": ("s", 0), "utt": ("s", 1)}


def backward_channels(cache, adjoints, spec: PrecisionSpec):
    """Backpropagate channel adjoints to parameter gradients.

    adjoints maps channel name to an (N,) array (in spec.dtype); missing
    channels contribute nothing.  Returns (gWs, gbs) matching the shapes of
    the forward weights.
    """
    r = spec.round_array
    dt = spec.dtype
    Ws = cache["Ws"]
    WL = Ws[-1]
    last = cache["last"]

    abar = None
    dbar = {}
    sbar = {}
    gWL = np.zeros_like(WL)
    gbL = np.zeros(WL.shape[0], dtype=dt)
    for name, arr in adjoints.items():
        kind, c = _ADJ_KEYS[name]
        col = np.ascontiguousarray(arr, dtype=dt)[:, None]
        if kind == "val":
            gWL = r(gWL + r(matmul(spec, col.T, last["a_prev"])))
            gbL = r(gbL + _colsum(spec, col))
            abar = r(matmul(spec, col, WL))
        elif kind == "d":
            gWL = r(gWL + r(matmul(spec, col.T, last["d_prev"][c])))
            dbar[c] = r(matmul(spec, col, WL))
        else:
            gWL = r(gWL + r(matmul(spec, col.T, last["s_prev"][c])))
            sbar[c] = r(matmul(spec, col, WL))

    gWs = [gWL]
    gbs = [gbL]
    for rec in reversed(cache["layers"]):
        a, sig1, sig2 = rec["a"], rec["sig1"], rec["sig2"]
        if abar is None:
            abar = np.zeros_like(a)
        dzbar, szbar = {}, {}
        for c, db in dbar.items():
            dz = rec["dz"][c]
            abar = r(abar + r(r(db * dz) * r(dt(-2.0) * a)))
            dzbar[c] = r(db * sig1)
        for c, sb in sbar.items():
            dz, sz = rec["dz"][c], rec["sz"][c]
            dsig2 = r(dt(-2.0) + r(dt(6.0) * r(a * a)))
            abar = r(abar + r(sb * r(r(r(dz * dz) * dsig2)
                                     + r(sz * r(dt(-2.0) * a)))))
            dzbar[c] = r(dzbar.get(c, dt(0.0)) + r(r(sb * dt(2.0)) * r(dz * sig2)))
            szbar[c] = r(sb * sig1)
        zbar = r(abar * sig1)

        W = Ws[len(cache["layers"]) - len(gWs)]
        gW = r(matmul(spec, zbar.T, rec["a_prev"]))
        gb = _colsum(spec, zbar)
        abar_prev = r(matmul(spec, zbar, W))
        dbar_prev, sbar_prev = {}, {}
        for c, v in dzbar.items():
            gW = r(gW + r(matmul(spec, v.T, rec["d_prev"][c])))
            dbar_prev[c] = r(matmul(spec, v, W))
        for c, v in szbar.items():
            gW = r(gW + r(matmul(spec, v.T, rec["s_prev"][c])))
            sbar_prev[c] = r(matmul(spec, v, W))
        gWs.append(gW)
        gbs.append(gb)
        abar, dbar, sbar = abar_prev, dbar_prev, sbar_prev

    gWs.reverse()
    gbs.reverse()
    return gWs, gbs


def _colsum(spec: PrecisionSpec, arr: np.ndarray) -> np.ndarray:
    if not spec.is_emulated:
        return np.sum(arr, axis=0)
    from .precision import pairwise_sum
    return pairwise_sum(spec, arr, axis=0)
