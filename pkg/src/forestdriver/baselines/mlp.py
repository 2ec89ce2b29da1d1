"""Fully connected ReLU network trained with mini-batch gradient descent."""
import numpy as np

from ..rng import make_rng


class MLPClassifier:
    def __init__(self, n_hidden_layers=1, neurons=32, learning_rate=1e-2, epochs=200,
                 batch_size=32, n_classes=4, seed=0):
        self.n_hidden_layers = int(n_hidden_layers)
        self.neurons = int(neurons)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.n_classes = n_classes
        self.seed = seed
        self.weights = []
        self.biases = []

    def _init(self, d, rng):
        sizes = [d] + [self.neurons] * self.n_hidden_layers + [self.n_classes]
        self.weights, self.biases = [], []
        for a, b in zip(sizes[:-1], sizes[1:]):
            self.weights.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            self.biases.append(np.zeros(b))

    def _forward(self, X):
        acts = [X]
        h = X
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if i == len(self.weights) - 1 else np.maximum(z, 0.0)
            acts.append(h)
        return acts

    def loss_and_grads(self, X, y):
        """Mean softmax cross-entropy and its gradients for every layer."""
        acts = self._forward(X)
        z = acts[-1]
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        n = len(y)
        loss = -logp[np.arange(n), y].sum() / n
        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        gW, gb = [None] * len(self.weights), [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            gW[i] = acts[i].T @ delta
            gb[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (acts[i] > 0)
        return loss, gW, gb

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        rng = make_rng(self.seed, "mlp")
        self._init(X.shape[1], rng)
        n = len(y)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for s in range(0, n, self.batch_size):
                idx = order[s:s + self.batch_size]
                _, gW, gb = self.loss_and_grads(X[idx], y[idx])
                for i in range(len(self.weights)):
                    self.weights[i] -= self.learning_rate * gW[i]
                    self.biases[i] -= self.learning_rate * gb[i]
        return self

    def decision_function(self, X):
        return self._forward(np.asarray(X, dtype=np.float64))[-1]

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def to_arrays(self):
        out = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = W
            out[f"b{i}"] = b
        return out

    @classmethod
    def from_arrays(cls, arrays, **params):
        m = cls(**params)
        n = m.n_hidden_layers + 1
        m.weights = [arrays[f"W{i}"] for i in range(n)]
        m.biases = [arrays[f"b{i}"] for i in range(n)]
        return m
