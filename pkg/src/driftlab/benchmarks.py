"""Synthetic domain-incremental benchmark streams.

A stream is an ordered sequence of domains over one fixed label space and
feature dimension. Each domain draws features from per-class Gaussians with
diagonal covariance, so the per-domain Bayes rule is known in closed form
and every downstream claim can be checked against a nearest-mean oracle.

Three kinds of shift are supported:

* ``covariate_shift`` -- class means translate per domain, labeling rule
  follows along (classes keep their clusters).
* ``conditional_flip`` -- the feature mixture is reproduced but cluster
  labels are permuted (swap for two classes, cyclic shift otherwise):
  the same feature region carries different labels in different domains.
* ``rotation`` -- class means rotate in the first two coordinates.

All sampling is hierarchically seeded: stream seed -> per-domain seed ->
per-split seed, so streams are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataAccessError, ShapeError, ValidationError
from .rng import derive, make_rng

RECIPE_KINDS = ("covariate_shift", "conditional_flip", "rotation")
SPLIT_NAMES = ("train", "val", "test")


@dataclass
class LabeledSet:
    """Feature matrix (n, d) with integer class labels (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ShapeError(f"inconsistent set: X {self.X.shape}, y {self.y.shape}")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledSet":
        return LabeledSet(self.X[idx], self.y[idx])


@dataclass
class DomainRecipe:
    """Generative description of one domain."""

    kind: str
    class_means: np.ndarray        # (C, d)
    variances: np.ndarray          # (d,) strictly positive
    rotation_angle: float = 0.0    # radians, applied to means in coords (0, 1)
    flip_labels: bool = False
    n_train: int = 500
    n_val: int = 100
    n_test: int = 200

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise ConfigError(f"unknown recipe kind {self.kind!r}; expected one of {RECIPE_KINDS}")
        self.class_means = np.asarray(self.class_means, dtype=float)
        self.variances = np.asarray(self.variances, dtype=float)
        if self.class_means.ndim != 2:
            raise ConfigError(f"class_means must be (C, d), got shape {self.class_means.shape}")
        if self.variances.shape != (self.class_means.shape[1],):
            raise ConfigError("variances must have one entry per feature dimension")
        if (self.variances <= 0).any():
            raise ConfigError("variances must be strictly positive")
        if self.rotation_angle != 0.0 and self.class_means.shape[1] < 2:
            raise ConfigError("rotation requires feature dimension >= 2")

    @property
    def n_classes(self) -> int:
        return self.class_means.shape[0]

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]

    def effective_means(self) -> np.ndarray:
        """Class means after rotating coords (0, 1) by rotation_angle."""
        means = self.class_means.copy()
        if self.rotation_angle != 0.0:
            c, s = np.cos(self.rotation_angle), np.sin(self.rotation_angle)
            xy = means[:, :2] @ np.array([[c, s], [-s, c]])
            means[:, :2] = xy
        return means

    def label_permutation(self) -> np.ndarray:
        """Cluster index -> label. Identity unless the domain is flipped."""
        c = self.n_classes
        if not self.flip_labels:
            return np.arange(c)
        if c == 2:
            return np.array([1, 0])
        return (np.arange(c) + 1) % c  # cyclic shift for C > 2


@dataclass
class DomainDataset:
    domain_id: int
    train: LabeledSet
    val: LabeledSet
    test: LabeledSet

    def split(self, name: str) -> LabeledSet:
        if name not in SPLIT_NAMES:
            raise ValidationError(f"unknown split {name!r}")
        return getattr(self, name)


@dataclass
class DomainStream:
    domains: list
    dim: int
    n_classes: int
    recipes: list = field(default_factory=list)

    @property
    def n_domains(self) -> int:
        return len(self.domains)


def _balanced_labels(n: int, n_classes: int) -> np.ndarray:
    """Class counts within +/-1 of an even split; lower classes get the remainder."""
    counts = np.full(n_classes, n // n_classes)
    counts[: n % n_classes] += 1
    return np.repeat(np.arange(n_classes), counts)


def _sample_split(recipe: DomainRecipe, n: int, rng: np.random.Generator) -> LabeledSet:
    clusters = _balanced_labels(n, recipe.n_classes)
    means = recipe.effective_means()
    sigma = np.sqrt(recipe.variances)
    X = means[clusters] + rng.normal(size=(n, recipe.dim)) * sigma
    y = recipe.label_permutation()[clusters]
    order = rng.permutation(n)
    return LabeledSet(X[order], y[order])


def build_stream(recipes, seed: int) -> DomainStream:
    """Materialize a stream: one dataset per recipe, deterministic in seed."""
    if not recipes:
        raise ConfigError("need at least one recipe")
    dim, n_classes = recipes[0].dim, recipes[0].n_classes
    problems = []
    for t, recipe in enumerate(recipes):
        if recipe.dim != dim or recipe.n_classes != n_classes:
            problems.append(
                f"recipe {t}: dims/classes ({recipe.dim}, {recipe.n_classes}) "
                f"differ from recipe 0 ({dim}, {n_classes})"
            )
        if recipe.n_train < 5 * n_classes:
            problems.append(f"recipe {t}: n_train={recipe.n_train} below 5 per class")
    if problems:
        raise ConfigError(problems)

    domains = []
    for t, recipe in enumerate(recipes):
        dseed = derive(seed, "domain", t)
        sizes = (recipe.n_train, recipe.n_val, recipe.n_test)
        splits = [
            _sample_split(recipe, n, make_rng(dseed, name))
            for name, n in zip(SPLIT_NAMES, sizes)
        ]
        domains.append(DomainDataset(t, *splits))
    return DomainStream(domains, dim, n_classes, list(recipes))


def split_dataset(samples: LabeledSet, ratios, seed: int):
    """Partition one labeled set into (train, val, test).

    Val/test sizes are floored; the remainder goes to train. The permutation
    is drawn from the seed, so the same inputs always split identically.
    """
    r = np.asarray(ratios, dtype=float)
    if r.shape != (3,) or (r <= 0).any():
        raise ValidationError(f"ratios must be three positive numbers, got {ratios}")
    if abs(r.sum() - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got {r.sum()!r}")
    n = len(samples)
    if n < 3:
        raise ValidationError(f"need at least 3 samples to split, got {n}")
    n_val = int(np.floor(r[1] * n))
    n_test = int(np.floor(r[2] * n))
    n_train = n - n_val - n_test
    perm = make_rng(seed, "split").permutation(n)
    return (
        samples.subset(perm[:n_train]),
        samples.subset(perm[n_train:n_train + n_val]),
        samples.subset(perm[n_train + n_val:]),
    )


# ---------------------------------------------------------------------------
# Recipe builders
# ---------------------------------------------------------------------------


def _per_domain_shifts(shifts, dim: int, n_domains: int) -> np.ndarray:
    arr = np.asarray(shifts, dtype=float)
    if arr.ndim == 1:
        # one direction, applied cumulatively: domain t is shifted by t * arr
        if arr.shape != (dim,):
            raise ConfigError(f"shift vector must have length {dim}, got {arr.shape}")
        return np.outer(np.arange(n_domains), arr)
    if arr.shape != (n_domains, dim):
        raise ConfigError(f"expected {n_domains} shift vectors of length {dim}, got {arr.shape}")
    return arr


def recipe_covariate_shift(base_means, shifts, variance, *, n_domains=None,
                           n_train=500, n_val=100, n_test=200):
    """Domains whose class means translate while the labeling rule follows.

    ``shifts`` is either a per-domain (T, d) array or a single direction
    applied cumulatively (domain t shifted by t * shifts).
    """
    base = np.asarray(base_means, dtype=float)
    var = _as_variances(variance, base.shape[1])
    shift_arr = np.asarray(shifts, dtype=float)
    if n_domains is None:
        if shift_arr.ndim != 2:
            raise ConfigError("n_domains is required when a single shift direction is given")
        n_domains = shift_arr.shape[0]
    per_domain = _per_domain_shifts(shifts, base.shape[1], n_domains)
    return [
        DomainRecipe("covariate_shift", base + per_domain[t], var,
                     n_train=n_train, n_val=n_val, n_test=n_test)
        for t in range(n_domains)
    ]


def recipe_conditional_flip(base_means, variance, flip_domains, n_domains, *,
                            shifts=None, n_train=500, n_val=100, n_test=200):
    """Domains sharing a feature mixture, with labels permuted in flip_domains.

    With ``shifts=None`` the feature distribution is identical across
    domains (maximal interference); an optional shift separates domains in
    feature space while keeping the flip.
    """
    base = np.asarray(base_means, dtype=float)
    var = _as_variances(variance, base.shape[1])
    flips = set(int(t) for t in flip_domains)
    bad = [t for t in flips if t >= n_domains or t < 0]
    if bad:
        raise ConfigError(f"flip domain indices {sorted(bad)} outside [0, {n_domains})")
    if shifts is None:
        per_domain = np.zeros((n_domains, base.shape[1]))
    else:
        per_domain = _per_domain_shifts(shifts, base.shape[1], n_domains)
    return [
        DomainRecipe("conditional_flip", base + per_domain[t], var,
                     flip_labels=(t in flips),
                     n_train=n_train, n_val=n_val, n_test=n_test)
        for t in range(n_domains)
    ]


def recipe_rotation(base_means, variance, angles, *, n_train=500, n_val=100, n_test=200):
    """Domains whose class means rotate in the first two coordinates."""
    base = np.asarray(base_means, dtype=float)
    var = _as_variances(variance, base.shape[1])
    return [
        DomainRecipe("rotation", base.copy(), var, rotation_angle=float(a),
                     n_train=n_train, n_val=n_val, n_test=n_test)
        for a in angles
    ]


def _as_variances(variance, dim: int) -> np.ndarray:
    arr = np.asarray(variance, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ConfigError(f"variance must be scalar or length {dim}, got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Access control
# ---------------------------------------------------------------------------


class StreamGuard:
    """Hands strategies their training data while enforcing the no-back-access rule.

    A plain guard exposes only the current domain's train/val splits;
    reading any other domain raises DataAccessError. A privileged guard
    (oracle baselines) may read any domain up to the current one, never
    beyond. Test splits are not reachable through the guard at all.
    """

    def __init__(self, stream: DomainStream, privileged: bool = False):
        self._stream = stream
        self.privileged = privileged
        self._current = -1

    @property
    def current(self) -> int:
        return self._current

    @property
    def dim(self) -> int:
        return self._stream.dim

    @property
    def n_classes(self) -> int:
        return self._stream.n_classes

    def advance(self, t: int):
        if t != self._current + 1:
            raise DataAccessError(f"domains arrive in order; expected {self._current + 1}, got {t}")
        self._current = t

    def _check(self, t: int):
        if t > self._current:
            raise DataAccessError(f"domain {t} has not arrived yet (current is {self._current})")
        if t < self._current and not self.privileged:
            raise DataAccessError(
                f"real data of past domain {t} is not accessible at step {self._current}"
            )

    def train(self, t: int) -> LabeledSet:
        self._check(t)
        return self._stream.domains[t].train

    def val(self, t: int) -> LabeledSet:
        self._check(t)
        return self._stream.domains[t].val

    def train_size(self, t: int) -> int:
        # sizes are metadata (used for proportional quotas), not sample access
        if t > self._current:
            raise DataAccessError(f"domain {t} has not arrived yet")
        return len(self._stream.domains[t].train)


# ---------------------------------------------------------------------------
# Columnar text serialization: one sample per line,
# domain_id,split,label,feature_0,...,feature_{d-1}
# ---------------------------------------------------------------------------


def write_stream(stream: DomainStream, path):
    with open(path, "w") as fh:
        for dom in stream.domains:
            for split_name in SPLIT_NAMES:
                split = dom.split(split_name)
                for x, label in zip(split.X, split.y):
                    feats = ",".join(repr(float(v)) for v in x)
                    fh.write(f"{dom.domain_id},{split_name},{int(label)},{feats}\n")


def read_stream(path) -> DomainStream:
    rows = {}
    dim = None
    max_label = -1
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 4:
                raise ValidationError(f"line {line_no}: expected domain_id,split,label,features...")
            t, split_name, label = int(parts[0]), parts[1], int(parts[2])
            if split_name not in SPLIT_NAMES:
                raise ValidationError(f"line {line_no}: unknown split {split_name!r}")
            feats = [float(v) for v in parts[3:]]
            if dim is None:
                dim = len(feats)
            elif len(feats) != dim:
                raise ValidationError(f"line {line_no}: feature count {len(feats)} != {dim}")
            rows.setdefault((t, split_name), ([], []))
            rows[(t, split_name)][0].append(feats)
            rows[(t, split_name)][1].append(label)
            max_label = max(max_label, label)
    if not rows:
        raise ValidationError("empty stream file")
    n_domains = max(t for t, _ in rows) + 1
    domains = []
    for t in range(n_domains):
        splits = []
        for split_name in SPLIT_NAMES:
            feats, labels = rows.get((t, split_name), ([], []))
            X = np.asarray(feats, dtype=float).reshape(len(feats), dim)
            splits.append(LabeledSet(X, np.asarray(labels, dtype=int)))
        domains.append(DomainDataset(t, *splits))
    return DomainStream(domains, dim, max_label + 1)
