"""Small tanh MLP classifier with hand-written backpropagation."""
import numpy as np

from twinboot.core import ParamGrouping, group_by_layers, group_whole
from twinboot.data import Dataset
from twinboot.rng import RngStream


def two_spirals(rng, n, noise=0.3, turns=1.5):
    """Two interleaved 2-D spirals, balanced classes. Returns (x, labels)."""
    labels = np.arange(n) % 2
    t = np.sqrt(rng.uniform(0.0, 1.0, size=n)) * turns * 2.0 * np.pi
    r = t / (turns * 2.0 * np.pi) * 3.0
    sign = np.where(labels == 0, 1.0, -1.0)
    x = np.stack([sign * r * np.cos(t), sign * r * np.sin(t)], axis=1)
    x += noise * rng.standard_normal((n, 2))
    return x, labels


def one_hot(labels, n_classes):
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class MlpProblem:
    """Fully connected tanh network, softmax output, cross-entropy loss.

    Parameters are stored layer by layer as ``W`` (out x in, row-major)
    followed by ``b``. Targets are one-hot rows. ``weight_decay`` adds
    ``0.5 * weight_decay * ||w||^2`` to the batch loss (off by default).
    """

    name = "mlp"

    def __init__(self, layer_sizes=(2, 32, 32, 2), n_train=500, n_val=1000, noise=0.3,
                 turns=1.5, weight_decay=0.0, seed=0):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("need at least input and output layer sizes, all positive")
        self.shapes = [(o, i) for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:])]
        self.layer_param_counts = [o * i + o for o, i in self.shapes]
        self.n_params = sum(self.layer_param_counts)
        self.n_classes = self.layer_sizes[-1]
        if weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        self.weight_decay = float(weight_decay)
        rng = RngStream(seed, "data-noise")
        x, lab = two_spirals(rng, n_train, noise, turns)
        self.dataset = Dataset(x, one_hot(lab, self.n_classes))
        xv, labv = two_spirals(rng, n_val, noise, turns)
        self.val_inputs = xv
        self.val_labels = labv
        self.train_labels = lab

    def unpack(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {w.shape}")
        layers, pos = [], 0
        for o, i in self.shapes:
            W = w[pos:pos + o * i].reshape(o, i)
            pos += o * i
            b = w[pos:pos + o]
            pos += o
            layers.append((W, b))
        return layers

    def initial_params(self, seed):
        rng = RngStream(seed, "init")
        parts = []
        for o, i in self.shapes:
            parts.append(rng.standard_normal(o * i) * np.sqrt(1.0 / i))
            parts.append(np.zeros(o))
        return np.concatenate(parts)

    def _forward(self, w, x):
        acts = [x]
        layers = self.unpack(w)
        for W, b in layers[:-1]:
            acts.append(np.tanh(acts[-1] @ W.T + b))
        W, b = layers[-1]
        return layers, acts, acts[-1] @ W.T + b

    def logits(self, w, x):
        return self._forward(w, np.asarray(x, dtype=np.float64))[2]

    def predict(self, w, inputs):
        """Class probabilities, shape (n, C)."""
        return softmax(self.logits(w, inputs))

    def loss_and_grad(self, w, inputs, targets):
        x = np.asarray(inputs, dtype=np.float64)
        t = np.asarray(targets, dtype=np.float64)
        if x.shape[1] != self.layer_sizes[0] or t.shape[1] != self.n_classes:
            raise ValueError("batch shape does not match the architecture")
        layers, acts, z = self._forward(w, x)
        n = x.shape[0]
        zmax = z.max(axis=1, keepdims=True)
        logsumexp = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
        loss = float(np.sum(logsumexp - np.sum(t * z, axis=1)) / n)
        delta = (softmax(z) - t) / n
        grads = []
        for k in range(len(layers) - 1, -1, -1):
            W, _ = layers[k]
            a = acts[k]
            grads.append((delta.T @ a, delta.sum(axis=0)))
            if k > 0:
                delta = (delta @ W) * (1.0 - a * a)
        flat = []
        for gW, gb in reversed(grads):
            flat.append(gW.ravel())
            flat.append(gb)
        grad = np.concatenate(flat)
        if self.weight_decay:
            w = np.asarray(w, dtype=np.float64)
            loss += 0.5 * self.weight_decay * float(w @ w)
            grad += self.weight_decay * w
        return loss, grad

    def accuracy(self, w, x, labels):
        return float(np.mean(np.argmax(self.logits(w, x), axis=1) == labels))

    def grouping(self, kind=None):
        if kind in (None, "layer"):
            return group_by_layers(self.layer_param_counts,
                                   labels=tuple(f"layer{k}" for k in range(len(self.shapes))))
        if kind == "whole":
            return group_whole(self.n_params)
        if kind == "unit":
            ids, labels, g = [], [], 0
            for k, (o, i) in enumerate(self.shapes):
                ids.append(np.repeat(np.arange(g, g + o), i))
                ids.append(np.arange(g, g + o))
                labels.extend(f"layer{k}_u{u}" for u in range(o))
                g += o
            return ParamGrouping.from_group_ids(np.concatenate(ids), tuple(labels))
        raise ValueError(f"unknown grouping {kind!r} for mlp problem")
