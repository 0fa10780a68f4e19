"""The temporal multi-task network with hand-written backpropagation.

Everything runs in float64 numpy.  ``forward`` returns a cache that
``backward`` consumes; gradients are checked against central finite
differences in the test-suite.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import DataError, DimensionError
from ..rules import HEAD_SIZES, HEADS, N_INTENTS, N_SEGMENTS

_LN_EPS = 1e-5


@dataclass
class ModelConfig:
    f_features: int
    s_features: int
    k_months: int = 6
    d_proj: int = 32
    d_hidden: int = 32
    d_attn: int = 32
    d_embed: int = 8
    d_trunk: int = 64
    head_sizes: dict = field(default_factory=lambda: dict(HEAD_SIZES))
    dropout: float = 0.1
    use_intent: bool = True
    use_segment: bool = True
    use_temporal: bool = True
    seed: int = 0

    def __post_init__(self):
        dims = (self.f_features, self.s_features, self.k_months, self.d_proj, self.d_hidden,
                self.d_attn, self.d_embed, self.d_trunk)
        if min(dims) < 1:
            raise DimensionError("all model dimensions must be >= 1")
        if set(self.head_sizes) != set(HEADS):
            raise DimensionError(f"head_sizes must name exactly {HEADS}")
        if not 0.0 <= self.dropout < 1.0:
            raise DimensionError("dropout must lie in [0, 1)")

    @property
    def fused_width(self):
        w = (2 * self.d_hidden if self.use_temporal else self.d_proj) + self.s_features
        if self.use_segment:
            w += self.d_embed
        if self.use_intent:
            w += self.d_embed
        return w

    def to_dict(self):
        return asdict(self)


def _uniform(rng, shape, bound):
    return rng.uniform(-bound, bound, size=shape)


def init_params(cfg):
    """Seeded initial weights, keyed by tensor name."""
    rng = np.random.default_rng(cfg.seed)
    P, H, A, E, T = cfg.d_proj, cfg.d_hidden, cfg.d_attn, cfg.d_embed, cfg.d_trunk
    p = {
        "proj_W": _uniform(rng, (cfg.f_features, P), np.sqrt(6.0 / (cfg.f_features + P))),
        "proj_b": np.zeros(P),
        "ln_gamma": np.ones(P),
        "ln_beta": np.zeros(P),
    }
    for d in ("fwd", "bwd"):
        bound = 1.0 / np.sqrt(H)
        p[f"gru_{d}_Wx"] = _uniform(rng, (P, 3 * H), bound)
        p[f"gru_{d}_Wh"] = _uniform(rng, (H, 3 * H), bound)
        p[f"gru_{d}_bx"] = _uniform(rng, (3 * H,), bound)
        p[f"gru_{d}_bh"] = _uniform(rng, (3 * H,), bound)
    p["attn_W"] = _uniform(rng, (2 * H, A), np.sqrt(6.0 / (2 * H + A)))
    p["attn_b"] = np.zeros(A)
    p["attn_q"] = _uniform(rng, (A,), 1.0 / np.sqrt(A))
    p["seg_emb"] = rng.normal(0.0, 0.5, size=(N_SEGMENTS, E))
    p["intent_emb"] = rng.normal(0.0, 0.5, size=(N_INTENTS, E))
    D = cfg.fused_width
    p["trunk_W"] = _uniform(rng, (D, T), np.sqrt(6.0 / (D + T)))
    p["trunk_b"] = np.zeros(T)
    for h in HEADS:
        C = cfg.head_sizes[h]
        p[f"head_{h}_W"] = _uniform(rng, (T, C), np.sqrt(6.0 / (T + C)))
        p[f"head_{h}_b"] = np.zeros(C)
    return p


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(scores, axis=-1):
    """Softmax that treats +inf scores as a hard (uniform) selection."""
    s = np.asarray(scores, dtype=np.float64)
    inf = np.isposinf(s)
    has_inf = inf.any(axis=axis, keepdims=True)
    finite = np.where(has_inf, 0.0, s)
    e = np.exp(finite - finite.max(axis=axis, keepdims=True))
    e = np.where(has_inf, inf.astype(np.float64), e)
    return e / e.sum(axis=axis, keepdims=True)


def attention_pool(H, scores):
    """Softmax-weighted sum of hidden states over the time axis."""
    alpha = softmax(scores, axis=1)
    return np.einsum("nt,nth->nh", alpha, H), alpha


def _layer_norm(u, gamma, beta):
    mu = u.mean(axis=-1, keepdims=True)
    var = u.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (u - mu) * inv
    return gamma * xhat + beta, (xhat, inv)


def _gru_run(x, Wx, Wh, bx, bh, reverse):
    """Run one GRU direction over x (N, K, P); returns hidden states and caches."""
    N, K, _ = x.shape
    H = Wh.shape[0]
    hs = np.zeros((N, K, H))
    caches = [None] * K
    h = np.zeros((N, H))
    steps = range(K - 1, -1, -1) if reverse else range(K)
    gx_all = x @ Wx + bx
    for t in steps:
        gx = gx_all[:, t]
        gh = h @ Wh + bh
        r = _sigmoid(gx[:, :H] + gh[:, :H])
        z = _sigmoid(gx[:, H : 2 * H] + gh[:, H : 2 * H])
        hn = gh[:, 2 * H :]
        n = np.tanh(gx[:, 2 * H :] + r * hn)
        h_new = (1.0 - z) * n + z * h
        caches[t] = (h, r, z, n, hn)
        hs[:, t] = h_new
        h = h_new
    return hs, caches


def _gru_backward(dhs, x, Wx, Wh, caches, reverse):
    N, K, _ = x.shape
    H = Wh.shape[0]
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    dbx = np.zeros(3 * H)
    dbh = np.zeros(3 * H)
    dx = np.zeros_like(x)
    dh_next = np.zeros((N, H))
    steps = range(K) if reverse else range(K - 1, -1, -1)
    for t in steps:
        h, r, z, n, hn = caches[t]
        dh = dhs[:, t] + dh_next
        dn = dh * (1.0 - z)
        dz = dh * (h - n)
        dh_prev = dh * z
        dan = dn * (1.0 - n * n)
        dr = dan * hn
        dar = dr * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        gx = np.concatenate([dar, daz, dan], axis=1)
        gh = np.concatenate([dar, daz, dan * r], axis=1)
        dWx += x[:, t].T @ gx
        dbx += gx.sum(axis=0)
        dx[:, t] = gx @ Wx.T
        dWh += h.T @ gh
        dbh += gh.sum(axis=0)
        dh_prev += gh @ Wh.T
        dh_next = dh_prev
    return dx, dWx, dWh, dbx, dbh


def _check_batch(cfg, batch):
    X = np.asarray(batch["temporal"], dtype=np.float64)
    S = np.asarray(batch["static"], dtype=np.float64)
    seg = np.asarray(batch["segment"])
    intent = np.asarray(batch["intent"])
    if X.ndim != 3 or X.shape[1:] != (cfg.k_months, cfg.f_features):
        raise DimensionError(
            f"temporal must have shape (n, {cfg.k_months}, {cfg.f_features}), got {X.shape}"
        )
    n = X.shape[0]
    if S.shape != (n, cfg.s_features):
        raise DimensionError(f"static must have shape ({n}, {cfg.s_features}), got {S.shape}")
    if seg.shape != (n,) or intent.shape != (n,):
        raise DimensionError("segment and intent must be 1-D with one id per item")
    for name, ids, hi in (("segment", seg, N_SEGMENTS), ("intent", intent, N_INTENTS)):
        if ids.size and (ids.min() < 0 or ids.max() >= hi):
            raise DataError(f"{name} ids must lie in 0..{hi - 1}")
    return X, S, seg.astype(np.int64), intent.astype(np.int64)


def forward(params, cfg, batch, train=False, rng=None):
    """Logits per head and attention weights.

    Parameters
    ----------
    batch : mapping
        ``temporal`` (N, K, F), ``static`` (N, S), ``segment`` (N,),
        ``intent`` (N,).
    train : bool
        Enables dropout (needs ``rng``).

    Returns
    -------
    out : dict
        ``logits`` (dict of (N, C) arrays), ``attention`` (N, K).
    cache : dict
        Intermediate values for :func:`backward`.
    """
    X, S, seg, intent = _check_batch(cfg, batch)
    N, K, _ = X.shape
    u = X @ params["proj_W"] + params["proj_b"]
    xn, ln_cache = _layer_norm(u, params["ln_gamma"], params["ln_beta"])
    cache = {"X": X, "xn": xn, "ln": ln_cache, "seg": seg, "intent": intent}
    if cfg.use_temporal:
        hf, cf = _gru_run(xn, params["gru_fwd_Wx"], params["gru_fwd_Wh"],
                          params["gru_fwd_bx"], params["gru_fwd_bh"], reverse=False)
        hb, cb = _gru_run(xn, params["gru_bwd_Wx"], params["gru_bwd_Wh"],
                          params["gru_bwd_bx"], params["gru_bwd_bh"], reverse=True)
        Hs = np.concatenate([hf, hb], axis=2)
        keys = np.tanh(Hs @ params["attn_W"] + params["attn_b"])
        scores = keys @ params["attn_q"]
        pooled, alpha = attention_pool(Hs, scores)
        cache.update(cf=cf, cb=cb, Hs=Hs, keys=keys, alpha=alpha)
    else:
        pooled = xn[:, -1]
        alpha = np.zeros((N, K))
        alpha[:, -1] = 1.0
    parts = [pooled, S]
    if cfg.use_segment:
        parts.append(params["seg_emb"][seg])
    if cfg.use_intent:
        parts.append(params["intent_emb"][intent])
    fused = np.concatenate(parts, axis=1)
    a1 = fused @ params["trunk_W"] + params["trunk_b"]
    t1 = np.maximum(a1, 0.0)
    mask = None
    if train and cfg.dropout > 0.0:
        keep = 1.0 - cfg.dropout
        mask = (rng.random(t1.shape) < keep) / keep
        t1 = t1 * mask
    logits = {h: t1 @ params[f"head_{h}_W"] + params[f"head_{h}_b"] for h in HEADS}
    cache.update(fused=fused, a1=a1, t1=t1, mask=mask)
    return {"logits": logits, "attention": alpha}, cache


def backward(params, cfg, cache, dlogits):
    """Gradients of every parameter given upstream logit gradients."""
    g = {name: np.zeros_like(v) for name, v in params.items()}
    t1 = cache["t1"]
    dt1 = np.zeros_like(t1)
    for h in HEADS:
        d = dlogits[h]
        g[f"head_{h}_W"] = t1.T @ d
        g[f"head_{h}_b"] = d.sum(axis=0)
        dt1 += d @ params[f"head_{h}_W"].T
    if cache["mask"] is not None:
        dt1 = dt1 * cache["mask"]
    da1 = dt1 * (cache["a1"] > 0.0)
    g["trunk_W"] = cache["fused"].T @ da1
    g["trunk_b"] = da1.sum(axis=0)
    dfused = da1 @ params["trunk_W"].T

    X, xn = cache["X"], cache["xn"]
    N, K, _ = X.shape
    off = 2 * cfg.d_hidden if cfg.use_temporal else cfg.d_proj
    dpooled = dfused[:, :off]
    off += cfg.s_features
    if cfg.use_segment:
        np.add.at(g["seg_emb"], cache["seg"], dfused[:, off : off + cfg.d_embed])
        off += cfg.d_embed
    if cfg.use_intent:
        np.add.at(g["intent_emb"], cache["intent"], dfused[:, off : off + cfg.d_embed])

    dxn = np.zeros_like(xn)
    if cfg.use_temporal:
        Hs, keys, alpha = cache["Hs"], cache["keys"], cache["alpha"]
        dHs = alpha[:, :, None] * dpooled[:, None, :]
        dalpha = np.einsum("nth,nh->nt", Hs, dpooled)
        dscores = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        g["attn_q"] = np.einsum("nt,nta->a", dscores, keys)
        dpre = dscores[:, :, None] * params["attn_q"] * (1.0 - keys * keys)
        g["attn_W"] = np.einsum("nth,nta->ha", Hs, dpre)
        g["attn_b"] = dpre.sum(axis=(0, 1))
        dHs += dpre @ params["attn_W"].T
        H = cfg.d_hidden
        for d, sl, rev, cname in (("fwd", slice(0, H), False, "cf"), ("bwd", slice(H, 2 * H), True, "cb")):
            dx, dWx, dWh, dbx, dbh = _gru_backward(
                dHs[:, :, sl], xn, params[f"gru_{d}_Wx"], params[f"gru_{d}_Wh"], cache[cname], rev
            )
            dxn += dx
            g[f"gru_{d}_Wx"] = dWx
            g[f"gru_{d}_Wh"] = dWh
            g[f"gru_{d}_bx"] = dbx
            g[f"gru_{d}_bh"] = dbh
    else:
        dxn[:, -1] = dpooled

    xhat, inv = cache["ln"]
    g["ln_gamma"] = np.einsum("ntp,ntp->p", dxn, xhat)
    g["ln_beta"] = dxn.sum(axis=(0, 1))
    dxhat = dxn * params["ln_gamma"]
    du = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    g["proj_W"] = np.einsum("ntf,ntp->fp", X, du)
    g["proj_b"] = du.sum(axis=(0, 1))
    return g


def log_softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def multitask_loss(logits, labels, with_grad=False):
    """Sum over heads of the batch-mean cross-entropy.

    ``labels`` maps head name to integer class arrays.  With ``with_grad``
    also returns d(loss)/d(logits) per head.
    """
    total = 0.0
    grads = {}
    for h in HEADS:
        z = np.asarray(logits[h], dtype=np.float64)
        y = np.asarray(labels[h])
        C = z.shape[1]
        if y.shape != (z.shape[0],):
            raise DimensionError(f"labels for {h} must have shape ({z.shape[0]},)")
        if y.size and (y.min() < 0 or y.max() >= C):
            raise DataError(f"{h} labels outside 0..{C - 1}")
        y = y.astype(np.int64)
        ls = log_softmax(z)
        n = z.shape[0]
        total += float(-ls[np.arange(n), y].mean())
        if with_grad:
            p = np.exp(ls)
            p[np.arange(n), y] -= 1.0
            grads[h] = p / n
    return (total, grads) if with_grad else total


def loss_and_grads(params, cfg, batch, labels, train=False, rng=None):
    out, cache = forward(params, cfg, batch, train=train, rng=rng)
    loss, dlogits = multitask_loss(out["logits"], labels, with_grad=True)
    return loss, backward(params, cfg, cache, dlogits)
