"""k-nearest-neighbour classifier with Euclidean distance."""
import numpy as np

from ..errors import ValidationError


class KNearestNeighbors:
    """Majority vote over the ``k`` closest stored rows.

    Distance ties keep the earlier training row; vote ties go to the lowest
    class index.
    """

    def __init__(self, k=5, n_classes=4, chunk=512):
        if int(k) < 1:
            raise ValidationError("k must be >= 1")
        self.k = int(k)
        self.n_classes = n_classes
        self.chunk = chunk
        self.X = self.y = None

    def fit(self, X, y):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        return self

    def neighbors(self, X):
        X = np.asarray(X, dtype=np.float64)
        k = min(self.k, len(self.X))
        out = np.empty((len(X), k), dtype=np.int64)
        for s in range(0, len(X), self.chunk):
            diff = X[s:s + self.chunk, None, :] - self.X[None, :, :]
            dist = (diff * diff).sum(axis=2)
            out[s:s + self.chunk] = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return out

    def predict(self, X):
        nb = self.y[self.neighbors(X)]
        votes = np.zeros((len(nb), self.n_classes), dtype=np.int64)
        for j in range(nb.shape[1]):
            np.add.at(votes, (np.arange(len(nb)), nb[:, j]), 1)
        return np.argmax(votes, axis=1)

    def to_arrays(self):
        return {"X": self.X, "y": self.y}

    @classmethod
    def from_arrays(cls, arrays, **params):
        m = cls(**params)
        m.X, m.y = arrays["X"], arrays["y"]
        return m
