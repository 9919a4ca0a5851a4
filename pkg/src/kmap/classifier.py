"""Linear discriminant analysis over complexity features."""

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import (DegenerateFeatures, EmptyInput, InsufficientSamples, KmapError,
                     ModelMismatch)
from .estimators import parse_estimator_id
from .semantic import parse_type

MODEL_FORMAT = "kmap.lda-model"
MODEL_VERSION = 1
RIDGE_LAMBDA = 1e-6
MAX_CONDITION = 1e10
DEFAULT_MERGE_THRESHOLD = 1.0


@dataclass(frozen=True)
class FeatureVector:
    """Mean per-estimator complexity over a sample's windows plus its length."""

    estimators: tuple
    window_k: tuple
    length: int

    def __post_init__(self):
        if len(self.estimators) != len(self.window_k):
            raise ValueError("one window_k value per estimator is required")
        if not all(np.isfinite(self.window_k)):
            raise ValueError("feature values must be finite")

    def select(self, estimators, include_length):
        """Feature array in the order given by a model's schema."""
        index = {e: i for i, e in enumerate(self.estimators)}
        missing = [e for e in estimators if e not in index]
        if missing:
            raise ModelMismatch(f"feature vector lacks estimators {missing}")
        values = [self.window_k[index[e]] for e in estimators]
        if include_length:
            values.append(float(self.length))
        return np.array(values, dtype=np.float64)

    @classmethod
    def from_estimates(cls, estimates, length):
        """Build from ComplexityEstimates (or records' estimate lists)."""
        return cls(tuple(e.estimator for e in estimates), tuple(e.value for e in estimates),
                   int(length))


@dataclass(frozen=True, eq=False)
class DiscriminantFunctions:
    """One linear score function per group: ``constant + weights . x``."""

    groups: tuple
    estimators: tuple
    include_length: bool
    constants: np.ndarray
    weights: np.ndarray

    @property
    def dim(self):
        return len(self.estimators) + int(self.include_length)

    def vector(self, x):
        if isinstance(x, FeatureVector):
            return x.select(self.estimators, self.include_length)
        arr = np.asarray(x, dtype=np.float64).reshape(-1)
        if arr.shape[0] != self.dim:
            raise ModelMismatch(f"expected {self.dim} features, got {arr.shape[0]}")
        return arr


@dataclass(frozen=True, eq=False)
class DiscriminantModel(DiscriminantFunctions):
    means: np.ndarray = field(default=None)
    pooled_cov: np.ndarray = field(default=None)
    priors: np.ndarray = field(default=None)
    ridge: float = 0.0

    @property
    def feature_schema(self):
        return {"estimators": list(self.estimators), "include_length": self.include_length}


def _coefficients(means, cov, priors):
    inv = np.linalg.inv(cov)
    weights = means @ inv  # row g is cov^-1 mu_g (cov symmetric)
    constants = -0.5 * np.einsum("gi,gi->g", weights, means) + np.log(priors)
    return constants, weights


def _regularize(cov, X):
    """Scale-aware ridge applied only to ill-conditioned covariances.

    Each feature gets ``RIDGE_LAMBDA`` times its own pooled variance; a
    feature with no within-group variance falls back to its mean square
    over all samples (or 1 if it is identically zero), so the result does
    not depend on the units of any feature.
    """
    diag = np.diag(cov).copy()
    ok = diag > 0
    if ok.all():
        s = 1.0 / np.sqrt(diag)
        cond = np.linalg.cond(cov * np.outer(s, s))
        if np.isfinite(cond) and cond <= MAX_CONDITION:
            return cov, 0.0
    if not ok.any():
        raise DegenerateFeatures("every feature is constant within every group")
    scale = np.where(ok, diag, np.mean(X * X, axis=0))
    scale = np.where(scale > 0, scale, 1.0)
    reg = cov + np.diag(RIDGE_LAMBDA * scale)
    try:
        np.linalg.cholesky(reg)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFeatures("pooled covariance is singular even after regularization") from exc
    return reg, RIDGE_LAMBDA


def train(samples, priors=None, include_length=True, estimators=None):
    """Fit an LDA model to ``(FeatureVector, label)`` pairs.

    ``estimators`` selects (and orders) the complexity features; default is
    the estimator list of the first sample. ``priors`` maps label -> prior;
    default is the empirical group frequency.
    """
    samples = list(samples)
    if not samples:
        raise InsufficientSamples("no training samples")
    if estimators is None:
        estimators = samples[0][0].estimators
    estimators = tuple(parse_estimator_id(e) for e in estimators)
    X = np.array([fv.select(estimators, include_length) for fv, _ in samples])
    labels = [parse_type(lbl, extra=(lbl,)) for _, lbl in samples]
    groups = tuple(dict.fromkeys(labels))
    if len(groups) < 2:
        raise InsufficientSamples("at least two groups are required")
    y = np.array([groups.index(lbl) for lbl in labels])
    counts = np.bincount(y, minlength=len(groups))
    if counts.min() < 2:
        small = [g for g, c in zip(groups, counts) if c < 2]
        raise InsufficientSamples(f"groups with fewer than 2 samples: {small}")

    means = np.array([X[y == g].mean(axis=0) for g in range(len(groups))])
    centered = X - means[y]
    cov = centered.T @ centered / (len(X) - len(groups))
    cov = (cov + cov.T) / 2
    cov, ridge = _regularize(cov, X)

    if priors is None:
        prior_arr = counts / counts.sum()
    else:
        lookup = {parse_type(k, extra=(k,)): float(v) for k, v in priors.items()}
        try:
            prior_arr = np.array([lookup[g] for g in groups])
        except KeyError as exc:
            raise ValueError(f"no prior given for group {exc.args[0]}") from None
        if (prior_arr <= 0).any():
            raise ValueError("priors must be positive")
        prior_arr = prior_arr / prior_arr.sum()

    constants, weights = _coefficients(means, cov, prior_arr)
    return DiscriminantModel(groups=groups, estimators=estimators, include_length=include_length,
                             constants=constants, weights=weights, means=means, pooled_cov=cov,
                             priors=prior_arr, ridge=ridge)


def score(model, x):
    """Per-group discriminant scores in model group order."""
    return model.constants + model.weights @ model.vector(x)


def classify(model, x):
    s = score(model, x)
    return model.groups[int(np.argmax(s))]  # argmax returns the first maximum


def classify_file(model, cmap):
    """One type for a whole map, from the mean of its per-window features."""
    if not cmap.records:
        raise EmptyInput("complexity map has no records")
    estimators = cmap.records[0].estimators()
    missing = [e for e in model.estimators if e not in estimators]
    if missing:
        raise ModelMismatch(f"map lacks estimators required by the model: {missing}")
    values = np.array([[e.value for e in r.estimates] for r in cmap.records])
    fv = FeatureVector(estimators, tuple(values.mean(axis=0)),
                       sum(r.length for r in cmap.records))
    return classify(model, fv)


@dataclass(frozen=True, eq=False)
class SquaredDistanceMatrix:
    groups: tuple
    d2: np.ndarray

    def get(self, a, b):
        return float(self.d2[self.groups.index(a), self.groups.index(b)])


def squared_distance_matrix(model):
    """Mahalanobis squared distances between group means."""
    inv = np.linalg.inv(model.pooled_cov)
    diff = model.means[:, None, :] - model.means[None, :, :]
    d2 = np.einsum("ijk,kl,ijl->ij", diff, inv, diff)
    d2 = np.maximum((d2 + d2.T) / 2, 0.0)
    np.fill_diagonal(d2, 0.0)
    return SquaredDistanceMatrix(model.groups, d2)


def suggest_merges(matrix, threshold=DEFAULT_MERGE_THRESHOLD):
    """Group pairs closer than ``threshold``, nearest first, as ``(a, b, d2)``."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    pairs = [(float(matrix.d2[i, j]), i, j)
             for i, j in itertools.combinations(range(len(matrix.groups)), 2)
             if matrix.d2[i, j] < threshold]
    pairs.sort()
    return [(matrix.groups[i], matrix.groups[j], d) for d, i, j in pairs]


def merge_mapping(merge_list):
    """Label -> combined label, with transitive closure over the pairs."""
    parent = {}
    order = []

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for pair in merge_list:
        a, b = pair[0], pair[1]
        for t in (a, b):
            if t not in parent:
                parent[t] = t
                order.append(t)
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra
    members = {}
    for t in order:
        members.setdefault(find(t), []).append(t)
    return {t: "+".join(members[find(t)]) for t in order}


def merge_types(samples, merge_list):
    """Relabel ``(x, label)`` pairs so each merged set shares one label."""
    mapping = merge_mapping(merge_list)
    return [(x, mapping.get(label, label)) for x, label in samples]


@dataclass(frozen=True, eq=False)
class Evaluation:
    labels: tuple
    confusion: np.ndarray  # [actual, predicted]
    accuracy: float
    per_group: dict

    @property
    def percent_correct(self):
        return 100.0 * self.accuracy


def evaluate_predictions(actual, predicted, labels=()):
    actual = list(actual)
    predicted = list(predicted)
    if not actual:
        raise EmptyInput("empty test set")
    labels = tuple(dict.fromkeys(list(labels) + actual + predicted))
    index = {lbl: i for i, lbl in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for a, p in zip(actual, predicted):
        confusion[index[a], index[p]] += 1
    rows = confusion.sum(axis=1)
    per_group = {lbl: (confusion[i, i] / rows[i] if rows[i] else None)
                 for i, lbl in enumerate(labels)}
    return Evaluation(labels, confusion, float(np.trace(confusion) / confusion.sum()), per_group)


def evaluate(model, test_set):
    """Confusion matrix and accuracy of ``model`` on ``(x, label)`` pairs."""
    test_set = list(test_set)
    actual = [label for _, label in test_set]
    predicted = [classify(model, x) for x, _ in test_set]
    return evaluate_predictions(actual, predicted, labels=model.groups)


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "groups": list(model.groups),
        "feature_schema": model.feature_schema,
        "means": model.means.tolist(),
        "pooled_cov": model.pooled_cov.tolist(),
        "coefficients": {"constants": model.constants.tolist(),
                         "weights": model.weights.tolist()},
        "priors": model.priors.tolist(),
        "ridge": model.ridge,
    }


def model_from_dict(doc, rtol=1e-6):
    """Rebuild a model, checking stored coefficients against recomputation."""
    if doc.get("format") != MODEL_FORMAT:
        raise ModelMismatch("not a kmap discriminant model file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelMismatch(f"unsupported model version {doc.get('version')}")
    schema = doc["feature_schema"]
    means = np.array(doc["means"], dtype=np.float64)
    cov = np.array(doc["pooled_cov"], dtype=np.float64)
    priors = np.array(doc["priors"], dtype=np.float64)
    constants = np.array(doc["coefficients"]["constants"], dtype=np.float64)
    weights = np.array(doc["coefficients"]["weights"], dtype=np.float64)
    c2, w2 = _coefficients(means, cov, priors)
    for stored, fresh in ((constants, c2), (weights, w2)):
        tol = rtol * max(1.0, float(np.abs(stored).max()))
        if stored.shape != fresh.shape or not np.allclose(stored, fresh, rtol=rtol, atol=tol):
            raise ModelMismatch("stored coefficients do not match means/covariance/priors")
    return DiscriminantModel(groups=tuple(doc["groups"]),
                             estimators=tuple(parse_estimator_id(e) for e in schema["estimators"]),
                             include_length=bool(schema["include_length"]), constants=constants,
                             weights=weights, means=means, pooled_cov=cov, priors=priors,
                             ridge=float(doc.get("ridge", 0.0)))


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise KmapError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(doc)


def _reference_doc():
    return json.loads(resources.files("kmap.data").joinpath("reference_lda.json").read_text())


def reference_distances():
    """The shipped six-type squared-distance table."""
    doc = _reference_doc()
    return SquaredDistanceMatrix(tuple(doc["groups"]), np.array(doc["squared_distances"]))


def reference_functions():
    """The shipped six-type linear discriminant functions (ZIP, length)."""
    doc = _reference_doc()
    schema = doc["feature_schema"]
    return DiscriminantFunctions(groups=tuple(doc["groups"]),
                                 estimators=tuple(schema["estimators"]),
                                 include_length=schema["include_length"],
                                 constants=np.array(doc["constants"]),
                                 weights=np.array(doc["weights"]))
