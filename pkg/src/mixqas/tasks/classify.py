"""Binary image classification with an 8-qubit searched circuit.

Images are flattened to [0, 1]-valued vectors, compressed by PCA fitted on
the union of the train and test sets (the original split is retained), and
loaded into product states by angle encoding (8 components, one Ry per
qubit) or dense-angle encoding (16 components, Rx then Ry per qubit).  The
circuit's prediction for an input is the probability of measuring qubit 0
as 1, i.e. the total probability mass on odd basis indices.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..densmat import PureState, rx, ry

BCE_EPS = 1e-12

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


# ---------------------------------------------------------------------------
# IDX ingestion
# ---------------------------------------------------------------------------


def _open_idx(path):
    path = Path(path)
    if path.exists():
        return open(path, "rb")
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gzip.open(gz, "rb")
    raise FileNotFoundError(f"no IDX file at {path} (or {gz.name})")


def read_idx_images(path) -> np.ndarray:
    """(count, rows*cols) float64 array with pixel values scaled to [0, 1]."""
    with _open_idx(path) as fh:
        magic, count, rows, cols = struct.unpack(">IIII", fh.read(16))
        if magic != 0x00000803:
            raise ValueError(f"bad image-file magic 0x{magic:08x}")
        raw = np.frombuffer(fh.read(count * rows * cols), dtype=np.uint8)
    return raw.reshape(count, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    with _open_idx(path) as fh:
        magic, count = struct.unpack(">II", fh.read(8))
        if magic != 0x00000801:
            raise ValueError(f"bad label-file magic 0x{magic:08x}")
        raw = np.frombuffer(fh.read(count), dtype=np.uint8)
    return raw.astype(np.int64)


def load_mnist_binary(data_dir, digits=(0, 1)):
    """MNIST restricted to two digits; labels remapped to {0, 1}."""
    d = Path(data_dir)
    xs, ys = {}, {}
    for split, img_key, lab_key in (("train", "train_images", "train_labels"),
                                    ("test", "test_images", "test_labels")):
        x = read_idx_images(d / MNIST_FILES[img_key])
        y = read_idx_labels(d / MNIST_FILES[lab_key])
        keep = (y == digits[0]) | (y == digits[1])
        xs[split] = x[keep]
        ys[split] = (y[keep] == digits[1]).astype(np.float64)
    return xs["train"], ys["train"], xs["test"], ys["test"]


def synthetic_two_gaussians(n_train=2048, n_test=512, dim=784, seed=7):
    """Deterministic offline stand-in: two separable Gaussian clusters with
    the same dimensionality and value range as the image data."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=dim)
    direction /= np.linalg.norm(direction)
    base = rng.uniform(0.35, 0.65, size=dim)
    mu = [base - 0.18 * direction, base + 0.18 * direction]

    def draw(count):
        y = (np.arange(count) % 2).astype(np.float64)
        x = np.empty((count, dim))
        for i in range(count):
            x[i] = mu[int(y[i])] + 0.05 * rng.normal(size=dim)
        return np.clip(x, 0.0, 1.0), y

    xtr, ytr = draw(n_train)
    xte, yte = draw(n_test)
    return xtr, ytr, xte, yte


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray  # (out_dim, in_dim), rows by descending variance
    explained_variance: np.ndarray

    def transform(self, vectors):
        return (np.asarray(vectors) - self.mean) @ self.components.T


def pca_fit_transform(vectors, out_dim):
    """PCA via the covariance eigendecomposition.

    Components are ordered by descending eigenvalue (ties broken by the
    stable sort, i.e. original component index) and signed so that each
    component's largest-magnitude loading is positive.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if out_dim > x.shape[1]:
        raise ValueError("out_dim exceeds the input dimension")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = (xc.T @ xc) / max(1, x.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(-evals, kind="stable")[:out_dim]
    comps = evecs[:, order].T
    for r in range(comps.shape[0]):
        lead = np.argmax(np.abs(comps[r]))
        if comps[r, lead] < 0:
            comps[r] = -comps[r]
    basis = PcaBasis(mean=mean, components=comps, explained_variance=evals[order])
    return basis.transform(x), basis


# ---------------------------------------------------------------------------
# qubit encodings
# ---------------------------------------------------------------------------


def _product_state(qubit_vecs):
    """Tensor product with qubit 0 first (little-endian index order)."""
    amp = np.array([1.0], dtype=np.complex128)
    for v in qubit_vecs:
        amp = np.kron(v, amp)
    return amp


def encode_angle(x) -> PureState:
    """|psi> = prod_i Ry(x_i / 2) |0>, one qubit per component."""
    x = np.asarray(x, dtype=np.float64)
    zero = np.array([1.0, 0.0], dtype=np.complex128)
    vecs = [ry(xi / 2.0) @ zero for xi in x]
    return PureState(len(x), _product_state(vecs))


def encode_dense(x) -> PureState:
    """|psi> = prod_i Ry(x_{i+n}/2) Rx(x_i/2) |0> for a 2n-vector."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) % 2:
        raise ValueError("dense-angle encoding needs an even-length vector")
    n = len(x) // 2
    zero = np.array([1.0, 0.0], dtype=np.complex128)
    vecs = [ry(x[i + n] / 2.0) @ (rx(x[i] / 2.0) @ zero) for i in range(n)]
    return PureState(n, _product_state(vecs))


# ---------------------------------------------------------------------------
# loss and predictions
# ---------------------------------------------------------------------------


def bce_loss(predictions, labels) -> float:
    p = np.clip(np.asarray(predictions, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_grad(predictions, labels) -> np.ndarray:
    """dL/dp per example, for the mean-reduced loss."""
    p = np.clip(np.asarray(predictions, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(labels, dtype=np.float64)
    return (-(y / p) + (1.0 - y) / (1.0 - p)) / len(p)


def prediction_from_mat(rho_mat) -> float:
    """Probability of measuring qubit 0 as 1: mass on odd basis indices."""
    return float(np.clip(np.real(np.diagonal(rho_mat)[1::2]).sum(), 0.0, 1.0))


def prediction_from_vec(psi) -> float:
    return float(np.clip(np.sum(np.abs(psi[1::2]) ** 2), 0.0, 1.0))


def prediction_adjoint_mat(n_qubits, dldp) -> np.ndarray:
    """Seed dL/drho for a prediction read off the odd diagonal entries."""
    diag = np.zeros(1 << n_qubits, dtype=np.complex128)
    diag[1::2] = dldp
    return np.diag(diag)


# ---------------------------------------------------------------------------
# task container
# ---------------------------------------------------------------------------


@dataclass
class ClassifyTask:
    encoding: str  # 'angle' or 'dense'
    train_states: list
    train_labels: np.ndarray
    test_states: list
    test_labels: np.ndarray
    batch_size: int = 128
    pca: PcaBasis | None = None
    n_qubits: int = field(init=False)

    def __post_init__(self):
        self.n_qubits = self.train_states[0].n_qubits

    @property
    def pca_dims(self):
        return self.n_qubits if self.encoding == "angle" else 2 * self.n_qubits

    @classmethod
    def from_vectors(cls, xtr, ytr, xte, yte, encoding="angle", batch_size=128):
        """PCA (fit on train+test combined) then per-example state encoding."""
        out_dim = 8 if encoding == "angle" else 16
        reduced, basis = pca_fit_transform(np.vstack([xtr, xte]), out_dim)
        rtr, rte = reduced[: len(xtr)], reduced[len(xtr):]
        enc = encode_angle if encoding == "angle" else encode_dense
        return cls(
            encoding=encoding,
            train_states=[enc(v) for v in rtr],
            train_labels=np.asarray(ytr, dtype=np.float64),
            test_states=[enc(v) for v in rte],
            test_labels=np.asarray(yte, dtype=np.float64),
            batch_size=batch_size,
            pca=basis,
        )

    @classmethod
    def mnist(cls, data_dir, encoding="angle", batch_size=128):
        return cls.from_vectors(*load_mnist_binary(data_dir),
                                encoding=encoding, batch_size=batch_size)

    @classmethod
    def synthetic(cls, encoding="angle", batch_size=128, seed=7,
                  n_train=2048, n_test=512):
        return cls.from_vectors(*synthetic_two_gaussians(n_train, n_test, seed=seed),
                                encoding=encoding, batch_size=batch_size)

    def epoch_batches(self, rng):
        """Full minibatches of one shuffled pass over the training set.

        The trailing remainder (when the set size is not a multiple of the
        batch size) is dropped, so every update sees a full batch.
        """
        order = rng.permutation(len(self.train_states))
        for start in range(0, len(order) - self.batch_size + 1, self.batch_size):
            yield order[start: start + self.batch_size]

    def encoded_matrix(self, indices) -> np.ndarray:
        """Stacked amplitudes of the selected training states, (B, 2^n)."""
        return np.stack([self.train_states[i].amplitudes for i in indices])

    def test_accuracy(self, predict) -> float:
        """Accuracy of ``predict(PureState) -> p`` on the test set."""
        hits = 0
        for state, y in zip(self.test_states, self.test_labels):
            hits += int((predict(state) > 0.5) == bool(y))
        return hits / len(self.test_states)
