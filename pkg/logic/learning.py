"""
learning.py - Dense-network channel estimator trained with ADAM on an NMSE loss

Network: [2MN] -> dense(L_NN) -> ReLU -> dropout -> dense(L_NN) -> ReLU ->
dropout -> dense(2M). Inputs are vectorized quantized measurements, targets
are channels as [Re; Im] divided by the training set's largest absolute
component. Gradients are computed by hand-written backpropagation in numpy.
"""
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from logic.channel_model import ChannelVector
from logic.errors import ConfigurationError, DomainError, ModelStateError, TrainingDivergedError
from logic.quantized_frontend import vectorize_measurement, vectorize_measurements
from logic.seeding import STREAM_BATCHES, STREAM_DROPOUT, STREAM_INIT, STREAM_SHUFFLE, derive_rng

logger = logging.getLogger(__name__)

PRECISIONS = {"f32": np.float32, "f64": np.float64}
DEFAULT_HIDDEN_WIDTH = 512
TRAIN_FRACTION = 0.7


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 100
    batch_size: int = 128
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    dropout_rate: float = 0.3
    hidden_width: int = DEFAULT_HIDDEN_WIDTH
    seed: int = 0
    precision: str = "f32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.hidden_width < 1:
            raise ConfigurationError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if self.precision not in PRECISIONS:
            raise ConfigurationError(f"precision must be one of {sorted(PRECISIONS)}, got {self.precision!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown training keys: {sorted(unknown)}")
        return cls(**{k: v for k, v in data.items() if v is not None})


def channels_to_real(channels):
    """[Re; Im] rows, shape (users, 2M)"""
    matrix = getattr(channels, "matrix", None)
    if matrix is None:
        matrix = np.atleast_2d(np.array([getattr(c, "entries", c) for c in channels], dtype=np.complex128))
    return np.concatenate([matrix.real, matrix.imag], axis=1)


def real_to_channels(vectors):
    vectors = np.atleast_2d(vectors)
    m = vectors.shape[1] // 2
    return vectors[:, :m] + 1j * vectors[:, m:]


def preprocess_fit(channels):
    """Largest |Re| or |Im| over the training channels"""
    real = channels_to_real(channels)
    if real.size == 0:
        raise DomainError("Cannot fit the channel normalization on an empty training split")
    scale = float(np.max(np.abs(real)))
    if scale == 0.0:
        raise DomainError("Cannot fit the channel normalization on all-zero channels")
    return scale


def nmse_loss(predicted, target):
    """||t - p||^2 / ||t||^2; for 2-D input the mean over rows"""
    predicted = np.asarray(predicted)
    target = np.asarray(target)
    if predicted.shape != target.shape:
        raise DomainError(f"Prediction shape {predicted.shape} does not match target shape {target.shape}")
    axis = -1
    energy = np.sum(target * target, axis=axis)
    if np.any(energy == 0):
        raise DomainError("NMSE is undefined for an all-zero target")
    err = np.sum((target - predicted) ** 2, axis=axis) / energy
    return float(np.mean(err))


class MlpEstimator:
    """Two wide ReLU+dropout hidden stacks and a linear 2M-wide output"""

    def __init__(self, num_antennas, pilot_length, hidden_width=DEFAULT_HIDDEN_WIDTH, dropout_rate=0.3,
                 precision="f32", seed=0, weights=None, biases=None, norm_scale=None):
        if precision not in PRECISIONS:
            raise ConfigurationError(f"precision must be one of {sorted(PRECISIONS)}, got {precision!r}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")
        self.num_antennas = int(num_antennas)
        self.pilot_length = int(pilot_length)
        self.hidden_width = int(hidden_width)
        self.dropout_rate = float(dropout_rate)
        self.precision = precision
        self.norm_scale = norm_scale
        dtype = PRECISIONS[precision]

        sizes = self.layer_sizes
        if weights is None:
            rng = derive_rng(seed, STREAM_INIT)
            weights = []
            for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
        self.weights = [np.asarray(w, dtype=dtype) for w in weights]
        self.biases = [np.asarray(b, dtype=dtype) for b in biases]
        for idx, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[idx], sizes[idx + 1]) or b.shape != (sizes[idx + 1],):
                raise DomainError(f"Layer {idx} parameters do not match layer sizes {sizes}")

    @classmethod
    def from_config(cls, num_antennas, pilot_length, config):
        return cls(num_antennas, pilot_length, config.hidden_width, config.dropout_rate,
                   config.precision, config.seed)

    @property
    def layer_sizes(self):
        return [2 * self.num_antennas * self.pilot_length, self.hidden_width, self.hidden_width,
                2 * self.num_antennas]

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    @property
    def is_fitted(self):
        return self.norm_scale is not None and self.norm_scale > 0

    def parameters(self):
        """Parameters in update order: W1, b1, W2, b2, W3, b3"""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def _check_inputs(self, inputs):
        inputs = np.asarray(inputs, dtype=self.dtype)
        if inputs.shape[-1] != self.layer_sizes[0]:
            raise DomainError(f"Input width {inputs.shape[-1]} does not match the network's {self.layer_sizes[0]}")
        return inputs

    def _dropout_masks(self, batch, rng):
        keep = 1.0 - self.dropout_rate
        masks = []
        for width in self.layer_sizes[1:3]:
            if self.dropout_rate == 0.0:
                masks.append(None)
            else:
                masks.append((rng.random((batch, width)) < keep).astype(self.dtype) / self.dtype(keep))
        return masks

    def _forward_pass(self, inputs, masks):
        activations = [inputs]
        pre_activations = []
        a = inputs
        for layer in range(2):
            z = a @ self.weights[layer] + self.biases[layer]
            pre_activations.append(z)
            a = np.maximum(z, 0)
            if masks[layer] is not None:
                a = a * masks[layer]
            activations.append(a)
        output = a @ self.weights[2] + self.biases[2]
        return output, activations, pre_activations

    def forward(self, inputs, mode="eval", seed=None, rng=None):
        """Network output; train mode applies inverted dropout drawn from `rng` or `seed`"""
        if mode not in ("train", "eval"):
            raise DomainError(f"mode must be 'train' or 'eval', got {mode!r}")
        inputs = self._check_inputs(inputs)
        single = inputs.ndim == 1
        batch = np.atleast_2d(inputs)
        if mode == "train":
            if rng is None:
                rng = np.random.default_rng(seed)
            masks = self._dropout_masks(batch.shape[0], rng)
        else:
            masks = [None, None]
        output, _, _ = self._forward_pass(batch, masks)
        return output[0] if single else output

    def loss_and_gradients(self, inputs, targets, rng=None):
        """Batch NMSE and its gradient w.r.t. every parameter (dropout active iff rng is given)"""
        inputs = np.atleast_2d(self._check_inputs(inputs))
        targets = np.atleast_2d(np.asarray(targets, dtype=self.dtype))
        batch = inputs.shape[0]
        masks = self._dropout_masks(batch, rng) if rng is not None else [None, None]
        output, activations, pre_activations = self._forward_pass(inputs, masks)

        energy = np.sum(targets * targets, axis=1, keepdims=True)
        if np.any(energy == 0):
            raise DomainError("NMSE is undefined for an all-zero target")
        residual = output - targets
        loss = float(np.mean(np.sum(residual * residual, axis=1, keepdims=True) / energy))

        delta = (2.0 / batch) * residual / energy
        grads_w = [None] * 3
        grads_b = [None] * 3
        for layer in (2, 1, 0):
            grads_w[layer] = activations[layer].T @ delta
            grads_b[layer] = np.sum(delta, axis=0)
            if layer == 0:
                break
            delta = delta @ self.weights[layer].T
            if masks[layer - 1] is not None:
                delta = delta * masks[layer - 1]
            delta = delta * (pre_activations[layer - 1] > 0)

        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend([gw.astype(self.dtype, copy=False), gb.astype(self.dtype, copy=False)])
        return loss, grads

    def copy(self):
        return MlpEstimator(self.num_antennas, self.pilot_length, self.hidden_width, self.dropout_rate,
                            self.precision, weights=[w.copy() for w in self.weights],
                            biases=[b.copy() for b in self.biases], norm_scale=self.norm_scale)


def forward(model, inputs, mode="eval", seed=None):
    return model.forward(inputs, mode=mode, seed=seed)


class AdamOptimizer:
    """ADAM with bias correction, updating parameter arrays in place"""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self._m = None
        self._v = None

    @classmethod
    def from_config(cls, config):
        return cls(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon)

    def step(self, params, grads):
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        t = self.step_count
        correction1 = 1.0 - self.beta1 ** t
        correction2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p -= (self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)).astype(p.dtype, copy=False)


@dataclass
class SupervisedDataset:
    """(y, h) samples with a seeded 70/30 train/test split

    `inputs` are vectorized measurements (users, 2MN); `targets` are raw
    channels as [Re; Im] (users, 2M).
    """
    inputs: np.ndarray
    targets: np.ndarray
    train_indices: np.ndarray
    test_indices: np.ndarray
    shuffle_seed: int = 0
    num_antennas: int = None
    pilot_length: int = None

    @property
    def train_inputs(self):
        return self.inputs[self.train_indices]

    @property
    def train_targets(self):
        return self.targets[self.train_indices]

    @property
    def test_inputs(self):
        return self.inputs[self.test_indices]

    @property
    def test_targets(self):
        return self.targets[self.test_indices]


def split_indices(num_samples, shuffle_seed, train_fraction=TRAIN_FRACTION):
    if num_samples < 1:
        raise DomainError("Cannot split an empty dataset")
    if not 0.0 < train_fraction <= 1.0:
        raise ConfigurationError(f"train_fraction must lie in (0, 1], got {train_fraction}")
    order = derive_rng(shuffle_seed, STREAM_SHUFFLE).permutation(num_samples)
    n_train = min(num_samples, max(1, int(round(train_fraction * num_samples))))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def build_supervised_dataset(measurements, shuffle_seed=0, train_fraction=TRAIN_FRACTION):
    """Pair every measurement of a MeasurementSet with its channel and split"""
    inputs = measurements.vectors
    targets = channels_to_real(measurements.channels)
    train_idx, test_idx = split_indices(inputs.shape[0], shuffle_seed, train_fraction)
    return SupervisedDataset(inputs, targets, train_idx, test_idx, shuffle_seed,
                             measurements.signs.shape[1], measurements.signs.shape[2])


@dataclass
class EpochRecord:
    epoch: int
    train_nmse: float
    test_nmse: float = None


@dataclass
class TrainingResult:
    model: MlpEstimator
    history: list = field(default_factory=list)

    @property
    def final_train_nmse(self):
        return self.history[-1].train_nmse if self.history else None


def _evaluate_nmse(model, inputs, targets):
    if inputs.shape[0] == 0:
        return None
    predictions = model.forward(inputs, mode="eval")
    return nmse_loss(predictions.astype(np.float64), targets.astype(np.float64))


def train(model, dataset, config, progress=None):
    """Fit `model` in place on the dataset's train split

    Mini-batches come from a fresh seeded permutation each epoch and dropout
    masks from a stream keyed by (epoch, batch), so a run is reproducible
    from the config seed alone.
    """
    train_inputs = dataset.train_inputs
    if train_inputs.shape[0] == 0:
        raise DomainError("The training split is empty")
    if not model.is_fitted:
        model.norm_scale = preprocess_fit(dataset.train_targets)
    dtype = model.dtype
    x_train = train_inputs.astype(dtype)
    y_train = (dataset.train_targets / model.norm_scale).astype(dtype)
    x_test = dataset.test_inputs.astype(dtype)
    y_test = (dataset.test_targets / model.norm_scale).astype(dtype)

    optimizer = AdamOptimizer.from_config(config)
    params = model.parameters()
    n = x_train.shape[0]
    history = []
    initial = _evaluate_nmse(model, x_train, y_train)
    logger.info("Training %s on %d samples, initial train NMSE %.4g", model.layer_sizes, n, initial)

    for epoch in range(1, config.epochs + 1):
        order = derive_rng(config.seed, STREAM_BATCHES, epoch).permutation(n)
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            rows = order[start:start + config.batch_size]
            rng = derive_rng(config.seed, STREAM_DROPOUT, epoch, batch_index) if model.dropout_rate > 0 else None
            loss, grads = model.loss_and_gradients(x_train[rows], y_train[rows], rng=rng)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, batch_index, loss)
            optimizer.step(params, grads)
            logger.debug("epoch %d batch %d loss %.6g", epoch, batch_index, loss)

        record = EpochRecord(epoch, _evaluate_nmse(model, x_train, y_train), _evaluate_nmse(model, x_test, y_test))
        if not math.isfinite(record.train_nmse):
            raise TrainingDivergedError(epoch, -1, record.train_nmse)
        history.append(record)
        if progress is not None:
            progress(epoch, record)

    if history and history[-1].train_nmse > initial:
        logger.warning("Final train NMSE %.4g is above the initial %.4g", history[-1].train_nmse, initial)
    logger.info("Training done: train NMSE %.4g, test NMSE %s", history[-1].train_nmse, history[-1].test_nmse)
    return TrainingResult(model, history)


def predict_channels(model, inputs):
    """Denormalized complex channel estimates for a batch of vectorized measurements"""
    if not model.is_fitted:
        raise ModelStateError("The estimator has no fitted normalization; train or load it first")
    outputs = model.forward(np.atleast_2d(inputs), mode="eval").astype(np.float64)
    return real_to_channels(outputs * model.norm_scale)


def predict_channel(model, y):
    return ChannelVector(predict_channels(model, vectorize_measurement(y))[0])


class NearestNeighborEstimator:
    """Returns the stored channel whose signature is closest in Hamming distance"""

    def __init__(self, signatures, channels):
        signatures = np.asarray(signatures, dtype=np.float64)
        if signatures.ndim != 2 or signatures.shape[0] == 0:
            raise DomainError("The nearest-neighbour estimator needs at least one stored pair")
        self.signatures = signatures
        self.channels = np.atleast_2d(np.asarray(channels, dtype=np.complex128))

    @classmethod
    def from_pairs(cls, train_pairs):
        pairs = list(train_pairs)
        if not pairs:
            raise DomainError("The nearest-neighbour estimator needs at least one stored pair")
        signatures = vectorize_measurements(np.stack([y.entries for y, _ in pairs]))
        channels = np.stack([np.asarray(getattr(h, "entries", h)) for _, h in pairs])
        return cls(signatures, channels)

    def hamming_distances(self, queries):
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        width = self.signatures.shape[1]
        # +-1 vectors: differing components = (width - <q, s>) / 2, exact in float64
        return (width - queries @ self.signatures.T) / 2.0

    def estimate(self, queries):
        """Nearest stored channel per query; ties go to the lowest stored index"""
        distances = self.hamming_distances(queries)
        return self.channels[np.argmin(distances, axis=1)]


def nearest_neighbor_estimate(train_pairs, y):
    estimator = NearestNeighborEstimator.from_pairs(train_pairs)
    return ChannelVector(estimator.estimate(vectorize_measurement(y))[0])


def numerical_gradient_check(model, inputs, targets, step=1e-5, floor=1e-6):
    """Largest relative error between backprop and central-difference gradients

    Dropout is not applied. Intended for small f64 networks.
    """
    _, analytic = model.loss_and_gradients(inputs, targets)
    worst = 0.0
    for param, grad in zip(model.parameters(), analytic):
        flat = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for k in range(flat.size):
            saved = flat[k]
            flat[k] = saved + step
            plus, _ = model.loss_and_gradients(inputs, targets)
            flat[k] = saved - step
            minus, _ = model.loss_and_gradients(inputs, targets)
            flat[k] = saved
            numeric = (plus - minus) / (2.0 * step)
            scale = max(abs(numeric), abs(float(flat_grad[k])), floor)
            worst = max(worst, abs(numeric - float(flat_grad[k])) / scale)
    return worst
