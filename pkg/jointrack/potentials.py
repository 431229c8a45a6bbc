"""
Unary and pairwise costs of the spatio-temporal graph.

Every cost is the log-odds ``log((1 - p) / p)`` of a probability: the
detector confidence for nodes, the same-person probability for spatial
edges and the same-joint probability for temporal edges. Costs are
negative exactly when the probability exceeds one half.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, fields
from itertools import combinations

import numpy as np
from scipy.special import expit

from .config.context import Context
from .errors import (
    ConfigurationError,
    DimensionMismatchError,
    MissingCorrespondenceError,
    ValidationError,
)
from .graph import SpatioTemporalGraph, build_graph, derive_bbox, iou, nms
from .log import Logger
from .model import (
    DEFAULT_JOINT_COUNT,
    EPSILON,
    BoundingBox,
    Correspondence,
    Detection,
    clamp_probability,
)

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

TEMPORAL_BASE_DIM = 5
TEMPORAL_FEATURE_DIM = 2 * TEMPORAL_BASE_DIM
SPATIAL_BASE_DIM = 4
# Floor on the spread of learned joint offsets, in box sides.
MIN_OFFSET_STD = 0.05
# Deviation assigned to joint pairs never seen in training.
UNSEEN_DEVIATION = 1.0e3


def unary_cost(p: float) -> float:
    """
    Cost ``log((1 - p) / p)`` of a probability in (0, 1).

    :param p: The probability.
    :type p: float
    :return: The log-odds cost, negative iff p > 0.5.
    :rtype: float
    """
    return math.log((1.0 - p) / p)


edge_cost = unary_cost


@dataclass(frozen=True)
class LogisticModel:
    """Logistic regression ``sigmoid(w . f + bias)``."""

    weights: tuple[float, ...]
    bias: float = 0.0
    feature_dim: int = None

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))
        if self.feature_dim is None:
            object.__setattr__(self, "feature_dim", len(weights))
        if len(weights) != self.feature_dim:
            raise DimensionMismatchError(
                f"Model has {len(weights)} weights but feature_dim {self.feature_dim}."
            )
        if not all(math.isfinite(w) for w in weights) or not math.isfinite(self.bias):
            raise ValidationError("Logistic model parameters must be finite.")

    @property
    def weight_vector(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def _check(self, width):
        if width != self.feature_dim:
            raise DimensionMismatchError(
                f"Feature vector of length {width} does not match model dimension {self.feature_dim}."
            )

    def logit(self, features) -> float:
        x = np.asarray(features, dtype=float).ravel()
        self._check(x.shape[0])
        return float(np.dot(self.weight_vector, x) + self.bias)

    def predict(self, features) -> float:
        """Return the clamped probability of one feature vector."""
        return clamp_probability(float(expit(self.logit(features))))

    def predict_many(self, matrix) -> np.ndarray:
        """Return clamped probabilities of the rows of a feature matrix."""
        x = np.asarray(matrix, dtype=float)
        if x.size == 0:
            return np.zeros(0)
        x = x.reshape(x.shape[0], -1)
        self._check(x.shape[1])
        return np.clip(expit(x @ self.weight_vector + self.bias), EPSILON, 1.0 - EPSILON)

    def to_dict(self) -> dict:
        return {"weights": list(self.weights), "bias": self.bias}

    @classmethod
    def from_dict(cls, data: dict) -> "LogisticModel":
        if "weights" not in data or "bias" not in data:
            raise ValidationError('Model file needs "weights" and "bias".')
        return cls(tuple(data["weights"]), data["bias"])


@dataclass(frozen=True)
class TemporalFeatures:
    """
    Features of a temporal edge.

    ``match_ratio`` is the intersection over union of the matched key
    points of the two boxes; offsets are in units of the mean box side.
    """

    match_ratio: float
    min_score: float
    dx: float
    dy: float
    dist: float

    def base(self) -> np.ndarray:
        return np.array([self.match_ratio, self.min_score, self.dx, self.dy, self.dist])

    def as_vector(self) -> np.ndarray:
        """Base features followed by their element-wise squares."""
        base = self.base()
        return np.concatenate([base, base * base])


class CorrespondenceIndex:
    """
    Correspondence records keyed by frame pair, in either orientation.
    """

    def __init__(self, correspondences=()):
        self._records = {}
        for corr in correspondences:
            self._records[(corr.frame_a, corr.frame_b)] = corr

    def __len__(self):
        return len(self._records)

    def get(self, frame_a: int, frame_b: int) -> Correspondence:
        """
        Return the record mapping ``frame_a`` onto ``frame_b``.

        :raises MissingCorrespondenceError: If neither orientation is present.
        """
        if (frame_a, frame_b) in self._records:
            return self._records[(frame_a, frame_b)]
        if (frame_b, frame_a) in self._records:
            return self._records[(frame_b, frame_a)].reversed()
        raise MissingCorrespondenceError(frame_a, frame_b)


def _as_index(corr) -> CorrespondenceIndex:
    if isinstance(corr, CorrespondenceIndex):
        return corr
    if isinstance(corr, Correspondence):
        return CorrespondenceIndex([corr])
    return CorrespondenceIndex(corr)


def temporal_features(
    a: Detection,
    b: Detection,
    corr,
    box_a: BoundingBox = None,
    box_b: BoundingBox = None,
) -> TemporalFeatures:
    """
    Compute the features of a temporal edge.

    A matched pair counts towards the intersection when its source point
    lies in the box of ``a`` and its target in the box of ``b``, and towards
    the union when either holds.

    :param a: Detection in one frame.
    :param b: Same-type detection in another frame.
    :param corr: A Correspondence, a list of them or a CorrespondenceIndex.
    :return: The edge features.
    :rtype: TemporalFeatures
    :raises MissingCorrespondenceError: If no record covers the two frames.
    """
    record = _as_index(corr).get(a.frame, b.frame)
    box_a = box_a or derive_bbox(a)
    box_b = box_b or derive_bbox(b)
    inside_a = box_a.contains(record.array_a)
    inside_b = box_b.contains(record.array_b)
    union = int(np.count_nonzero(inside_a | inside_b))
    intersection = int(np.count_nonzero(inside_a & inside_b))
    ratio = intersection / union if union > 0 else 0.0
    side = (box_a.side + box_b.side) / 2.0
    dx = (a.x - b.x) / side
    dy = (a.y - b.y) / side
    return TemporalFeatures(
        match_ratio=ratio,
        min_score=min(a.score, b.score),
        dx=dx,
        dy=dy,
        dist=math.hypot(dx, dy),
    )


def temporal_probability(f, m: LogisticModel) -> float:
    """
    Probability that a temporal edge joins the same joint of one person.

    :param f: TemporalFeatures or an expanded feature vector.
    :param m: The temporal model.
    :return: ``sigmoid(w . f + bias)`` clamped into (0, 1).
    :raises DimensionMismatchError: If the vector does not fit the model.
    """
    vector = f.as_vector() if isinstance(f, TemporalFeatures) else f
    return m.predict(vector)


def log_loss(model: LogisticModel, matrix, labels, l2: float = 0.0) -> float:
    """Mean log-loss of a model plus ``l2 * |w|^2 / 2``."""
    x = np.asarray(matrix, dtype=float)
    y = np.asarray(labels, dtype=float)
    z = x @ model.weight_vector + model.bias
    w = model.weight_vector
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(w @ w))


@dataclass(frozen=True)
class TrainingConfig:
    """Gradient descent settings shared by both model trainers."""

    l2: float = 1e-4
    lr: float = 0.05
    epochs: int = 2000

    def __post_init__(self):
        if self.l2 < 0:
            raise ConfigurationError(f"l2 must be non-negative, got {self.l2}.")
        if not self.lr > 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}.")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be non-negative, got {self.epochs}.")

    @classmethod
    def from_mapping(cls, data: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown training settings {unknown}.")
        return cls(**data)

    def as_kwargs(self) -> dict:
        return {"l2": float(self.l2), "lr": float(self.lr), "epochs": int(self.epochs)}


def train_logistic(samples, l2: float = 1e-4, epochs: int = 2000, lr: float = 0.05, history=None) -> LogisticModel:
    """
    Fit a logistic model by full-batch gradient descent from zero.

    The objective is the mean log-loss plus ``l2 * |w|^2 / 2``; the bias is
    not regularised. The ridge term is applied as a proximal shrink, so a
    large ``l2`` drives the weights to zero instead of diverging. Samples
    are put in a canonical order first, so any permutation of the same
    samples gives a bit-identical model.

    :param samples: (features, label) pairs with labels in {0, 1}; features are vectors or TemporalFeatures.
    :type samples: list
    :param l2: Ridge weight.
    :param epochs: Number of gradient steps.
    :param lr: Step size.
    :param history: Optional list receiving the objective before each step and after the last.
    :return: The fitted model.
    :rtype: LogisticModel
    :raises ValidationError: If only one class is present.
    """
    rows = []
    labels = []
    for features, label in samples:
        vector = features.as_vector() if isinstance(features, TemporalFeatures) else features
        rows.append(np.asarray(vector, dtype=float).ravel())
        if label not in (0, 1, True, False):
            raise ValidationError(f"Label {label} is not 0 or 1.")
        labels.append(float(label))
    if not rows:
        raise ValidationError("No training samples given.")
    x = np.vstack(rows)
    y = np.asarray(labels)
    if y.min() == y.max():
        errmsg = "Training samples contain a single class; need both labels."
        log.error(errmsg)
        raise ValidationError(errmsg)

    keys = [x[:, col] for col in reversed(range(x.shape[1]))]
    order = np.lexsort([y] + keys)
    x = x[order]
    y = y[order]

    n, dim = x.shape
    w = np.zeros(dim)
    b = 0.0
    for _ in range(int(epochs)):
        z = x @ w + b
        if history is not None:
            history.append(float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * float(w @ w)))
        residual = expit(z) - y
        grad_w = x.T @ residual / n
        grad_b = float(np.mean(residual))
        w = (w - lr * grad_w) / (1.0 + lr * l2)
        b = b - lr * grad_b
    model = LogisticModel(tuple(w.tolist()), b)
    if history is not None:
        history.append(log_loss(model, x, y, l2))
    log.info(f"Trained logistic model on {n} samples ({int(y.sum())} positive), {dim} features.")
    return model


def pair_index(j: int, k: int, joint_count: int) -> int:
    """Index of the unordered joint type pair j < k among J(J-1)/2 pairs."""
    return j * joint_count - j * (j + 1) // 2 + (k - j - 1)


@dataclass(frozen=True)
class SpatialModel:
    """
    Same-person probability of detections of different joint types.

    Offsets between two joints of one person are learned per joint type
    pair (mean and spread, in box sides); a logistic model maps the
    squashed offset, distance and deviation from the learned offset plus a
    pair indicator to a probability.
    """

    joint_count: int
    offsets: dict = field(compare=False)
    logistic: LogisticModel = None

    @property
    def feature_dim(self) -> int:
        return SPATIAL_BASE_DIM + self.joint_count * (self.joint_count - 1) // 2

    def _offset_arrays(self):
        count = self.joint_count * (self.joint_count - 1) // 2
        mean = np.zeros((count, 2))
        std = np.ones((count, 2))
        seen = np.zeros(count, dtype=bool)
        for (j, k), (mx, my, sx, sy) in self.offsets.items():
            idx = pair_index(j, k, self.joint_count)
            mean[idx] = (mx, my)
            std[idx] = (sx, sy)
            seen[idx] = True
        return mean, std, seen

    def feature_matrix(self, first, second) -> np.ndarray:
        """
        Features of the detection pairs ``(first[i], second[i])`` of different joint types.
        """
        if not first:
            return np.zeros((0, self.feature_dim))
        ja = np.array([d.joint for d in first])
        jb = np.array([d.joint for d in second])
        if np.any(ja == jb):
            raise ValidationError("Spatial model features need different joint types.")
        if np.any(np.maximum(ja, jb) >= self.joint_count):
            raise DimensionMismatchError(f"Joint type outside the model's {self.joint_count} types.")
        pa = np.array([d.pos for d in first], dtype=float)
        pb = np.array([d.pos for d in second], dtype=float)
        sides = (np.array([derive_bbox(d).side for d in first]) + np.array([derive_bbox(d).side for d in second])) / 2.0
        # orient every pair from the lower to the higher joint type
        swap = ja > jb
        low = np.where(swap[:, None], pb, pa)
        high = np.where(swap[:, None], pa, pb)
        jlow = np.minimum(ja, jb)
        jhigh = np.maximum(ja, jb)
        delta = (high - low) / sides[:, None]
        dist = np.hypot(delta[:, 0], delta[:, 1])
        pairs = jlow * self.joint_count - jlow * (jlow + 1) // 2 + (jhigh - jlow - 1)
        mean, std, seen = self._offset_arrays()
        dev = np.hypot((delta[:, 0] - mean[pairs, 0]) / std[pairs, 0], (delta[:, 1] - mean[pairs, 1]) / std[pairs, 1])
        dev = np.where(seen[pairs], dev, UNSEEN_DEVIATION)
        matrix = np.zeros((len(first), self.feature_dim))
        matrix[:, 0] = np.tanh(delta[:, 0] / 4.0)
        matrix[:, 1] = np.tanh(delta[:, 1] / 4.0)
        matrix[:, 2] = np.tanh(dist / 4.0)
        matrix[:, 3] = np.tanh(dev / 3.0)
        matrix[np.arange(len(first)), SPATIAL_BASE_DIM + pairs] = 1.0
        return matrix

    def probabilities(self, first, second) -> np.ndarray:
        if self.logistic is None:
            raise ConfigurationError("Spatial model has no trained logistic part.")
        return self.logistic.predict_many(self.feature_matrix(first, second))

    def probability(self, a: Detection, b: Detection) -> float:
        return float(self.probabilities([a], [b])[0])

    def to_dict(self) -> dict:
        data = {
            "kind": "spatial",
            "joint_count": self.joint_count,
            "offsets": [
                {"pair": [j, k], "mean": [mx, my], "std": [sx, sy]}
                for (j, k), (mx, my, sx, sy) in sorted(self.offsets.items())
            ],
        }
        if self.logistic is not None:
            data.update(self.logistic.to_dict())
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SpatialModel":
        offsets = {}
        for entry in data.get("offsets", []):
            j, k = entry["pair"]
            offsets[(int(j), int(k))] = tuple(float(v) for v in entry["mean"] + entry["std"])
        logistic = None
        if "weights" in data:
            logistic = LogisticModel.from_dict(data)
        model = cls(int(data.get("joint_count", DEFAULT_JOINT_COUNT)), offsets, logistic)
        if logistic is not None and logistic.feature_dim != model.feature_dim:
            raise DimensionMismatchError(
                f"Spatial model has {logistic.feature_dim} weights, expected {model.feature_dim}."
            )
        return model


@dataclass(frozen=True)
class EdgeProbabilities:
    """Cross-type spatial probabilities given per detection pair."""

    table: dict = field(compare=False)

    def probability(self, a: Detection, b: Detection) -> float:
        key = (min(a.id, b.id), max(a.id, b.id))
        if key not in self.table:
            errmsg = f"No spatial probability given for detections {key}."
            log.error(errmsg)
            raise ConfigurationError(errmsg)
        return clamp_probability(self.table[key])


def spatial_probability(a: Detection, b: Detection, model=None) -> float:
    """
    Probability that two detections of one frame belong to the same person.

    Same-type pairs use the IoU of their boxes; other pairs use the given
    SpatialModel or EdgeProbabilities.

    :raises ConfigurationError: For a cross-type pair without a model.
    """
    if a.frame != b.frame:
        raise ValidationError(f"Detections {a.id} and {b.id} are in different frames.")
    if a.joint == b.joint:
        return clamp_probability(iou(derive_bbox(a), derive_bbox(b)))
    if model is None:
        errmsg = "Cross-type spatial probability needs a spatial model or an edge probability file."
        log.error(errmsg)
        raise ConfigurationError(errmsg)
    return clamp_probability(model.probability(a, b))


@dataclass(frozen=True)
class PotentialTable:
    """Costs of every node and edge of a graph."""

    node_cost: dict
    spatial_cost: dict
    temporal_cost: dict

    def missing(self, g: SpatioTemporalGraph) -> list[str]:
        """Describe graph elements without a cost and costs of unknown elements."""
        problems = []
        node_ids = {d.id for d in g.nodes}
        problems += [f"node {i}" for i in sorted(node_ids - set(self.node_cost))]
        problems += [f"extra node {i}" for i in sorted(set(self.node_cost) - node_ids)]
        problems += [f"spatial edge {e}" for e in sorted(g.spatial_set - set(self.spatial_cost))]
        problems += [f"extra spatial edge {e}" for e in sorted(set(self.spatial_cost) - g.spatial_set)]
        problems += [f"temporal edge {e}" for e in sorted(g.temporal_set - set(self.temporal_cost))]
        problems += [f"extra temporal edge {e}" for e in sorted(set(self.temporal_cost) - g.temporal_set)]
        return problems


def _spatial_costs(g, spatial_model):
    costs = {}
    cross = []
    for edge in g.spatial_edges:
        a = g.by_id[edge.a]
        b = g.by_id[edge.b]
        if a.joint == b.joint:
            costs[(edge.a, edge.b)] = edge_cost(clamp_probability(iou(g.box(edge.a), g.box(edge.b))))
        else:
            cross.append((a, b))
    if cross:
        if spatial_model is None:
            errmsg = "Cross-type spatial edges need a spatial model or an edge probability file."
            log.error(errmsg)
            raise ConfigurationError(errmsg)
        if isinstance(spatial_model, SpatialModel):
            probs = spatial_model.probabilities([a for a, _ in cross], [b for _, b in cross])
        else:
            probs = [spatial_model.probability(a, b) for a, b in cross]
        for (a, b), p in zip(cross, probs):
            costs[(a.id, b.id)] = edge_cost(clamp_probability(p))
    return costs


def temporal_feature_matrix(g: SpatioTemporalGraph, corr) -> np.ndarray:
    """Expanded features of all temporal edges of a graph, in edge order."""
    index = _as_index(corr)
    matrix = np.zeros((len(g.temporal_edges), TEMPORAL_FEATURE_DIM))
    for row, edge in enumerate(g.temporal_edges):
        a = g.by_id[edge.a]
        b = g.by_id[edge.b]
        matrix[row] = temporal_features(a, b, index, g.box(edge.a), g.box(edge.b)).as_vector()
    return matrix


def build_potentials(g: SpatioTemporalGraph, corr, temporal_model: LogisticModel, spatial_model) -> PotentialTable:
    """
    Compute the cost of every node and edge of a graph.

    :param g: The graph.
    :param corr: Correspondences covering the frame pairs of temporal edges.
    :param temporal_model: Logistic model of temporal edges.
    :param spatial_model: SpatialModel or EdgeProbabilities for cross-type spatial edges.
    :return: The potentials.
    :rtype: PotentialTable
    """
    node_cost = {det.id: unary_cost(det.score) for det in g.nodes}
    spatial_cost = _spatial_costs(g, spatial_model)
    temporal_cost = {}
    if g.temporal_edges:
        if temporal_model is None:
            errmsg = "Temporal edges need a temporal model."
            log.error(errmsg)
            raise ConfigurationError(errmsg)
        probs = temporal_model.predict_many(temporal_feature_matrix(g, corr))
        for edge, p in zip(g.temporal_edges, probs):
            temporal_cost[(edge.a, edge.b)] = edge_cost(float(p))
    log.debug(
        f"Computed potentials for {len(node_cost)} nodes, {len(spatial_cost)} spatial "
        f"and {len(temporal_cost)} temporal edges."
    )
    return PotentialTable(node_cost, spatial_cost, temporal_cost)


def label_detections(dets, annotations, ratio: float = 0.2) -> dict:
    """
    Assign each detection to the ground truth person whose same-type joint it hits.

    A detection hits a joint when it lies within ``ratio`` times the head box
    diagonal of that person; the closest hit (relative to the threshold)
    wins, ties going to the smaller person id.

    :return: Detection id to person id, or None when nothing is hit.
    :rtype: dict
    """
    by_frame = defaultdict(list)
    for pose in annotations:
        by_frame[pose.frame].append(pose)
    labels = {}
    for det in dets:
        best = None
        for pose in by_frame.get(det.frame, ()):
            joint = pose.by_type.get(det.joint)
            if joint is None:
                continue
            threshold = ratio * pose.head_diagonal
            distance = math.hypot(det.x - joint.x, det.y - joint.y)
            if distance <= threshold:
                key = (distance / threshold, pose.person_id)
                if best is None or key < best:
                    best = key
        labels[det.id] = None if best is None else best[1]
    return labels


def _same_person(labels, a, b):
    return labels.get(a) is not None and labels.get(a) == labels.get(b)


def temporal_training_samples(g: SpatioTemporalGraph, corr, labels: dict) -> list:
    """(TemporalFeatures, label) for every temporal edge of a graph."""
    index = _as_index(corr)
    samples = []
    for edge in g.temporal_edges:
        features = temporal_features(g.by_id[edge.a], g.by_id[edge.b], index, g.box(edge.a), g.box(edge.b))
        samples.append((features, int(_same_person(labels, edge.a, edge.b))))
    return samples


def fit_offsets(pairs) -> dict:
    """
    Mean and spread of the normalised offsets of same-person joint pairs.

    :param pairs: (detection, detection) pairs of different types of one person.
    :return: (j, k) -> (mean dx, mean dy, std dx, std dy), with j < k.
    """
    grouped = defaultdict(list)
    for a, b in pairs:
        if a.joint > b.joint:
            a, b = b, a
        side = (derive_bbox(a).side + derive_bbox(b).side) / 2.0
        grouped[(a.joint, b.joint)].append(((b.x - a.x) / side, (b.y - a.y) / side))
    offsets = {}
    for key in sorted(grouped):
        values = np.asarray(grouped[key])
        mean = values.mean(axis=0)
        std = np.maximum(values.std(axis=0), MIN_OFFSET_STD)
        offsets[key] = (float(mean[0]), float(mean[1]), float(std[0]), float(std[1]))
    return offsets


def spatial_training_samples(dets, labels: dict):
    """
    Cross-type same-frame detection pairs with same-person labels.
    """
    by_frame = defaultdict(list)
    for det in sorted(dets, key=lambda d: (d.frame, d.id)):
        by_frame[det.frame].append(det)
    pairs = []
    for frame in sorted(by_frame):
        for a, b in combinations(by_frame[frame], 2):
            if a.joint != b.joint:
                pairs.append((a, b, int(_same_person(labels, a.id, b.id))))
    return pairs


def train_spatial_model(
    dets,
    annotations,
    joint_count: int = DEFAULT_JOINT_COUNT,
    ratio: float = 0.2,
    l2: float = 1e-4,
    lr: float = 0.05,
    epochs: int = 2000,
    nms_iou: float = 0.7,
) -> SpatialModel:
    """
    Learn the cross-type spatial model from detections and ground truth.
    """
    dets = nms(dets, nms_iou)
    labels = label_detections(dets, annotations, ratio)
    pairs = spatial_training_samples(dets, labels)
    offsets = fit_offsets([(a, b) for a, b, label in pairs if label])
    shell = SpatialModel(joint_count, offsets)
    matrix = shell.feature_matrix([a for a, _, _ in pairs], [b for _, b, _ in pairs])
    samples = [(row, label) for row, (_, _, label) in zip(matrix, pairs)]
    logistic = train_logistic(samples, l2=l2, epochs=epochs, lr=lr)
    return SpatialModel(joint_count, offsets, logistic)


def train_temporal_model(
    dets,
    annotations,
    correspondences,
    tau: int = 3,
    temporal_joints=None,
    ratio: float = 0.2,
    l2: float = 1e-4,
    lr: float = 0.05,
    epochs: int = 2000,
    nms_iou: float = 0.7,
) -> LogisticModel:
    """
    Learn the temporal model from the temporal edges of a labelled video.
    """
    dets = nms(dets, nms_iou)
    labels = label_detections(dets, annotations, ratio)
    g = build_graph(dets, tau, temporal_joints)
    samples = temporal_training_samples(g, correspondences, labels)
    return train_logistic(samples, l2=l2, epochs=epochs, lr=lr)
