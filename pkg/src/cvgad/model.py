"""Dual-scale contrastive encoder, discriminators, losses and optimisation.

Node-subgraph (NS) and node-node (NN) contrast each own one weight stack
that is shared between the subgraph GCN and the target-node perceptron.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from cvgad.config import Hyperparams
from cvgad.errors import DivergenceError
from cvgad.graph import AttributedGraph
from cvgad.sampler import Batch, make_batch, split_batches

SNAPSHOT_VERSION = 1


# --- functional building blocks -------------------------------------------

def gcn_forward(masked_features, norm_adj, W):
    """relu(norm_adj @ masked_features @ W); works batched over leading dims."""
    masked_features = torch.as_tensor(masked_features)
    norm_adj = torch.as_tensor(norm_adj, dtype=masked_features.dtype)
    if masked_features.shape[-1] != W.shape[0] or norm_adj.shape[-1] != masked_features.shape[-2]:
        raise ValueError(
            f"shape mismatch: adj {tuple(norm_adj.shape)}, x {tuple(masked_features.shape)}, W {tuple(W.shape)}"
        )
    return torch.relu(norm_adj @ (masked_features @ W))


def mlp_forward(x, W):
    x = torch.as_tensor(x)
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"shape mismatch: x {tuple(x.shape)}, W {tuple(W.shape)}")
    return torch.relu(x @ W)


def readout(subgraph_embedding):
    return subgraph_embedding.mean(dim=-2)


def target_row(subgraph_embedding):
    return subgraph_embedding[..., 0, :]


def discriminate(h, n, B, bias=0.0):
    """logistic(h^T B n + bias), batched over leading dimensions."""
    logit = ((h @ B) * n).sum(dim=-1) + bias
    if not torch.isfinite(logit).all():
        raise FloatingPointError("non-finite bilinear logit")
    return torch.sigmoid(logit)


def bce_loss(pos, neg, eps: float = 1e-7):
    """Summed binary cross-entropy with positives labelled 1, negatives 0."""
    pos = pos.clamp(eps, 1.0 - eps)
    neg = neg.clamp(eps, 1.0 - eps)
    return -(torch.log(pos) + torch.log(1.0 - neg)).sum()


def total_loss(l_ns_ano, l_ns_cla, l_nn_ano, l_nn_cla, alpha: float, beta: float):
    return beta * (alpha * l_ns_ano + (1 - alpha) * l_ns_cla) + (1 - beta) * (
        alpha * l_nn_ano + (1 - alpha) * l_nn_cla
    )


# --- model ----------------------------------------------------------------

@dataclass
class PairScores:
    """Discriminator outputs for one view; each field is a (B,) tensor."""

    pos_ns: torch.Tensor
    neg_ns: torch.Tensor
    pos_nn: torch.Tensor
    neg_nn: torch.Tensor


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


class ContrastModel(nn.Module):
    """Weights for both contrast scales.

    ``w_ns[l]`` / ``w_nn[l]`` are the per-layer weights (layer 0 is o x d, the
    rest d x d); ``bil_ns`` / ``bil_nn`` the bilinear matrices.
    """

    def __init__(self, o: int, d: int = 64, num_layers: int = 1, bias: bool = True, dtype=torch.float32):
        super().__init__()
        dims = [o] + [d] * num_layers
        self.o, self.d, self.num_layers, self.use_bias = o, d, num_layers, bias
        self.w_ns = nn.ParameterList(
            [nn.Parameter(torch.empty(a, b, dtype=dtype)) for a, b in zip(dims[:-1], dims[1:])]
        )
        self.w_nn = nn.ParameterList(
            [nn.Parameter(torch.empty(a, b, dtype=dtype)) for a, b in zip(dims[:-1], dims[1:])]
        )
        self.bil_ns = nn.Parameter(torch.empty(d, d, dtype=dtype))
        self.bil_nn = nn.Parameter(torch.empty(d, d, dtype=dtype))
        if bias:
            self.bias_ns = nn.Parameter(torch.zeros((), dtype=dtype))
            self.bias_nn = nn.Parameter(torch.zeros((), dtype=dtype))
        else:
            self.register_parameter("bias_ns", None)
            self.register_parameter("bias_nn", None)

    def reset(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for w in list(self.w_ns) + list(self.w_nn) + [self.bil_ns, self.bil_nn]:
                a = xavier_bound(*w.shape)
                w.copy_(torch.rand(w.shape, generator=gen, dtype=torch.float64).mul_(2 * a).sub_(a))
            if self.use_bias:
                self.bias_ns.zero_()
                self.bias_nn.zero_()

    def _bias(self, which):
        b = self.bias_ns if which == "ns" else self.bias_nn
        return 0.0 if b is None else b

    def project(self, X, nodes: torch.Tensor) -> torch.Tensor:
        """First-layer products X[nodes] @ [W_NS | W_NN] (rows follow ``nodes``)."""
        W = torch.cat([self.w_ns[0], self.w_nn[0]], dim=1)
        if X.layout != torch.strided:
            return (X @ W)[nodes]
        return X[nodes] @ W

    def view_scores(self, proj, inv, targets_pos, members, adj, negatives) -> PairScores:
        """Scores for one view.

        ``proj`` holds first-layer products for a set of unique nodes, ``inv``
        maps every member slot into ``proj`` and ``targets_pos`` the batch
        targets into ``proj``.
        """
        d = self.d
        P = proj[inv]  # (B, N, 2d)
        P = P * (members != members[:, :1]).unsqueeze(-1).to(P.dtype)  # mask target and its padding
        H = torch.relu(adj @ P)
        node = torch.relu(proj[targets_pos])
        H_ns, H_nn = H[..., :d], H[..., d:]
        n_ns, n_nn = node[..., :d], node[..., d:]
        for layer in range(1, self.num_layers):
            H_ns = gcn_forward(H_ns, adj, self.w_ns[layer])
            H_nn = gcn_forward(H_nn, adj, self.w_nn[layer])
            n_ns = mlp_forward(n_ns, self.w_ns[layer])
            n_nn = mlp_forward(n_nn, self.w_nn[layer])
        h = readout(H_ns)
        hh = target_row(H_nn)
        return PairScores(
            pos_ns=discriminate(h, n_ns, self.bil_ns, self._bias("ns")),
            neg_ns=discriminate(h[negatives], n_ns, self.bil_ns, self._bias("ns")),
            pos_nn=discriminate(hh, n_nn, self.bil_nn, self._bias("nn")),
            neg_nn=discriminate(hh[negatives], n_nn, self.bil_nn, self._bias("nn")),
        )

    def batch_scores(self, X, batch: Batch, views=("a", "c"), proj_all=None) -> dict[str, PairScores]:
        """Scores for the requested views of ``batch``.

        ``proj_all``, when given, is a precomputed projection of every node
        (used for frozen-model scoring).
        """
        dtype = self.bil_ns.dtype
        mems = {"a": batch.members_a, "c": batch.members_c}
        adjs = {"a": batch.adj_a, "c": batch.adj_c}
        targets = torch.as_tensor(batch.node_ids)
        neg = torch.as_tensor(batch.negatives)
        if proj_all is not None:
            proj = proj_all
            lookup = lambda m: torch.as_tensor(m)  # noqa: E731
            tpos = targets
        else:
            allm = np.concatenate([batch.node_ids] + [mems[v].ravel() for v in views])
            uniq, inv = np.unique(allm, return_inverse=True)
            proj = self.project(X, torch.as_tensor(uniq))
            B = batch.node_ids.size
            tpos = torch.as_tensor(inv[:B])
            slots, off = {}, B
            for v in views:
                k = mems[v].size
                slots[v] = torch.as_tensor(inv[off : off + k].reshape(mems[v].shape))
                off += k
            lookup = None
        out = {}
        for v in views:
            inv_v = lookup(mems[v]) if lookup else slots[v]
            out[v] = self.view_scores(
                proj, inv_v, tpos, torch.as_tensor(mems[v]),
                torch.as_tensor(adjs[v], dtype=dtype), neg,
            )
        return out


def init_params(o: int, d: int = 64, seed: int = 0, num_layers: int = 1, bias: bool = True, dtype=torch.float32):
    model = ContrastModel(o, d, num_layers=num_layers, bias=bias, dtype=dtype)
    model.reset(seed)
    return model


def batch_loss(model: ContrastModel, X, batch: Batch, alpha: float, beta: float, eps: float = 1e-7, share_views=False):
    if share_views:
        # one sampled view feeds both loss terms (single-view training)
        sc = model.batch_scores(X, batch, views=("c",))["c"]
        l_ns, l_nn = bce_loss(sc.pos_ns, sc.neg_ns, eps), bce_loss(sc.pos_nn, sc.neg_nn, eps)
        return total_loss(l_ns, l_ns, l_nn, l_nn, alpha, beta)
    sc = model.batch_scores(X, batch)
    a, c = sc["a"], sc["c"]
    return total_loss(
        bce_loss(a.pos_ns, a.neg_ns, eps),
        bce_loss(c.pos_ns, c.neg_ns, eps),
        bce_loss(a.pos_nn, a.neg_nn, eps),
        bce_loss(c.pos_nn, c.neg_nn, eps),
        alpha,
        beta,
    )


# --- features -------------------------------------------------------------

def prepare_features(features: np.ndarray, norm: str = "row", dtype=torch.float32):
    """Model-input feature tensor; stored sparse when under 10% dense."""
    x = np.asarray(features, dtype=np.float64)
    if norm == "row":
        s = np.abs(x).sum(axis=1, keepdims=True)
        x = np.divide(x, s, out=np.zeros_like(x), where=s > 0)
    t = torch.as_tensor(x, dtype=dtype)
    if x.size and np.count_nonzero(x) < 0.1 * x.size:
        return t.to_sparse_csr()
    return t


# --- training -------------------------------------------------------------

class Trainer:
    """Owns a model, its Adam state and the epoch counter.

    ``reset`` reinitialises both weights and optimiser state.
    """

    def __init__(self, o: int, hyper: Hyperparams, seed: int, dtype=torch.float32):
        self.hyper = hyper
        self.dtype = dtype
        self.model = ContrastModel(o, hyper.d, hyper.num_layers, hyper.bias, dtype=dtype)
        self.reset(seed)

    def reset(self, seed: int) -> None:
        self.seed = int(seed)
        self.model.reset(self.seed)
        self.opt = torch.optim.Adam(self.model.parameters(), lr=self.hyper.lr)
        self.epoch = 0

    def train_epoch(
        self, X, graph_a: AttributedGraph, graph_c: AttributedGraph, single_view=False, sample_seed: int | None = None
    ) -> float:
        """One shuffled pass over all nodes; returns the mean batch loss.

        ``sample_seed`` pins the shuffle and subgraph samples instead of
        deriving them from the epoch counter.
        """
        h = self.hyper
        stream = self.epoch if sample_seed is None else int(sample_seed)
        rng = np.random.default_rng([self.seed, stream, 0x7A11])
        order = rng.permutation(graph_a.n)
        losses = []
        self.model.train()
        for bi, ids in enumerate(split_batches(order, h.batch_size)):
            batch = make_batch(graph_a, graph_c, ids, h.N, h.restart_p, rng=rng)
            self.opt.zero_grad(set_to_none=True)
            loss = batch_loss(self.model, X, batch, h.alpha, h.beta, h.eps, share_views=single_view)
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {self.epoch}, batch {bi} (seed {self.seed})")
            loss.backward()
            self.opt.step()
            losses.append(float(loss.detach()))
        self.epoch += 1
        return float(np.mean(losses))


def train_epoch(trainer: Trainer, X, graph_a, graph_c, **kw) -> float:
    return trainer.train_epoch(X, graph_a, graph_c, **kw)


@torch.no_grad()
def contrast_pass(model: ContrastModel, X, graph: AttributedGraph, hyper: Hyperparams, rng: np.random.Generator, proj_all=None):
    """One sampling round on ``graph``; returns per-node (s+, s-, s^+, s^-) arrays."""
    model.eval()
    n = graph.n
    if proj_all is None:
        proj_all = model.project(X, torch.arange(n))
    out = np.zeros((4, n), dtype=np.float64)
    order = rng.permutation(n)
    for ids in split_batches(order, hyper.batch_size):
        batch = make_batch(graph, graph, ids, hyper.N, hyper.restart_p, rng=rng)
        # the clean slot is unused here; reuse anomalous samples
        sc = model.batch_scores(X, batch, views=("a",), proj_all=proj_all)["a"]
        for k, t in enumerate((sc.pos_ns, sc.neg_ns, sc.pos_nn, sc.neg_nn)):
            out[k, ids] = t.double().numpy()
    return out


# --- gradient verification ------------------------------------------------

def _params(model):
    return [(name, p) for name, p in model.named_parameters()]


def autograd_grads(model, loss_fn):
    model.zero_grad(set_to_none=True)
    loss = loss_fn()
    loss.backward()
    return {name: p.grad.detach().clone() for name, p in _params(model)}


def finite_difference_check(model: ContrastModel, X, batch: Batch, alpha=0.8, beta=0.6, step=1e-5, grad_fn=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs in float64 on a copy of ``model``. ``grad_fn(model, loss_fn)`` may
    replace the analytic gradient (used to test the check itself). Entries
    whose magnitudes are both below 1e-8 are compared by absolute error.
    """
    m = copy.deepcopy(model).double()
    if isinstance(X, torch.Tensor) and X.layout != torch.strided:
        X = X.to_dense()
    X = torch.as_tensor(X, dtype=torch.float64)
    loss_fn = lambda: batch_loss(m, X, batch, alpha, beta)  # noqa: E731
    grads = (grad_fn or autograd_grads)(m, loss_fn)
    worst = 0.0
    with torch.no_grad():
        for name, p in _params(m):
            flat = p.view(-1)
            g = grads[name].reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                up = loss_fn().item()
                flat[i] = orig - step
                down = loss_fn().item()
                flat[i] = orig
                fd = (up - down) / (2 * step)
                an = g[i].item()
                scale = max(abs(fd), abs(an))
                err = abs(fd - an) if scale < 1e-8 else abs(fd - an) / scale
                worst = max(worst, err)
    return worst


# --- snapshots ------------------------------------------------------------

def save_params(model: ContrastModel, path) -> None:
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    meta = np.array([SNAPSHOT_VERSION, model.o, model.d, model.num_layers, int(model.use_bias)], dtype=np.int64)
    with open(path, "wb") as fh:
        np.savez(fh, meta=meta, **arrays)


def load_params(path) -> ContrastModel:
    with np.load(path) as z:
        version, o, d, layers, bias = (int(v) for v in z["meta"])
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        state = {k[len("param/"):]: torch.from_numpy(z[k].copy()) for k in z.files if k.startswith("param/")}
    dtype = state["bil_ns"].dtype
    model = ContrastModel(o, d, num_layers=layers, bias=bool(bias), dtype=dtype)
    model.load_state_dict(state)
    return model
