"""Class catalogs, task-sequence composition, and stream iteration.

Catalogs come from two sources: directory datasets laid out as
``<root>/train/<class_name>/*`` plus a ``test`` twin, and built-in synthetic
Gaussian-blob datasets named ``blobs-<C>c-<N>n-<D>d`` (vectors) or
``blobsimg-<C>c-<N>n-<H>x<W>x<Ch>`` (image-shaped). Task sequences are built
under three semantic-structure settings (traditional, cross-domain,
category-randomized) and iterated either as offline epochs or as a strict
single-pass online stream.
"""

from __future__ import annotations

import hashlib
import json
import re
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .config import ExperimentConfig
from .errors import DataError

# rng stream tags so different random decisions never share a stream
_TAG_CLASS_ORDER = 17
_TAG_POOL_SHUFFLE = 29
_TAG_STREAM = 41


@dataclass(frozen=True)
class SampleRef:
    """Locator for one stored sample."""

    dataset: str
    split: str  # "train" | "test"
    class_name: str
    index: int


@dataclass(frozen=True)
class CatalogEntry:
    global_class_id: int
    source_dataset: str
    class_name: str
    train_refs: tuple[SampleRef, ...]
    test_refs: tuple[SampleRef, ...]


class ClassCatalog:
    """Classes of one or more datasets mapped to a contiguous global id space.

    ``fetch`` resolves sample refs to arrays, applying shape harmonization
    (zero-pad for vectors, bilinear resize + channel replication for images)
    when the catalog pools datasets of different shapes.
    """

    def __init__(
        self,
        entries: Sequence[CatalogEntry],
        loader: Callable[[SampleRef], np.ndarray],
        class_order: Sequence[int] | None = None,
    ):
        self.entries = list(entries)
        ids = [e.global_class_id for e in self.entries]
        if sorted(ids) != list(range(len(ids))):
            raise DataError("global class ids must be unique and contiguous from 0")
        for e in self.entries:
            if not e.train_refs or not e.test_refs:
                raise DataError(f"class {e.class_name} needs at least 1 train and 1 test sample")
        self.class_order = list(class_order) if class_order is not None else list(range(len(ids)))
        if sorted(self.class_order) != list(range(len(ids))):
            raise DataError("class_order must be a permutation of the global ids")
        self._loader = loader
        self._by_id = {e.global_class_id: e for e in self.entries}
        self._label_of = {}
        for e in self.entries:
            for ref in e.train_refs + e.test_refs:
                self._label_of[ref] = e.global_class_id
        self._target_shape = self._common_shape()

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, global_id: int) -> CatalogEntry:
        return self._by_id[global_id]

    def input_shape(self) -> tuple[int, ...]:
        return self._target_shape

    def _common_shape(self) -> tuple[int, ...]:
        probe = {}
        for e in self.entries:
            if e.source_dataset not in probe:
                probe[e.source_dataset] = self._loader(e.train_refs[0]).shape
        shapes = list(probe.values())
        ndims = {len(s) for s in shapes}
        if len(ndims) > 1:
            raise DataError(f"cannot mix vector and image datasets: shapes {shapes}")
        return tuple(max(s[i] for s in shapes) for i in range(ndims.pop()))

    def fetch(self, refs: Sequence[SampleRef]) -> tuple[np.ndarray, np.ndarray]:
        """Load refs into a stacked float32 array plus global-id labels."""
        xs = [_conform(self._loader(r), self._target_shape) for r in refs]
        ys = [self._label_of[r] for r in refs]
        return np.stack(xs).astype(np.float32), np.asarray(ys, dtype=np.int64)


def _conform(x: np.ndarray, target: tuple[int, ...]) -> np.ndarray:
    if x.shape == target:
        return x
    if x.ndim == 1:
        out = np.zeros(target, dtype=np.float32)
        out[: x.shape[0]] = x
        return out
    if x.ndim == 3:
        h, w, c = x.shape
        th, tw, tc = target
        if c < tc:
            x = np.repeat(x, tc // c + (tc % c > 0), axis=2)[:, :, :tc]
        if (h, w) != (th, tw):
            x = _resize_bilinear(x, th, tw)
        return x.astype(np.float32)
    raise DataError(f"unsupported sample rank {x.ndim}")


def _resize_bilinear(x: np.ndarray, th: int, tw: int) -> np.ndarray:
    h, w, c = x.shape
    ys = (np.arange(th) + 0.5) * h / th - 0.5
    xs = (np.arange(tw) + 0.5) * w / tw - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    fx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    top = x[y0][:, x0] * (1 - fx) + x[y0][:, x1] * fx
    bot = x[y1][:, x0] * (1 - fx) + x[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


@dataclass(frozen=True)
class TaskSpec:
    task_index: int
    class_ids: tuple[int, ...]
    train_refs: tuple[SampleRef, ...]
    test_refs: tuple[SampleRef, ...]


@dataclass(frozen=True)
class StreamMode:
    kind: str  # "online" | "offline"
    epochs: int = 1

    def __post_init__(self):
        if self.kind not in ("online", "offline"):
            raise DataError(f"unknown stream mode '{self.kind}'")
        if self.kind == "online" and self.epochs != 1:
            raise DataError("online mode is a strict single pass (epochs=1)")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")


@dataclass(frozen=True)
class TaskSequence:
    tasks: tuple[TaskSpec, ...]
    scenario: str
    stream_mode: StreamMode
    seed: int

    def to_json(self) -> str:
        payload = {
            "scenario": self.scenario,
            "stream_mode": {"kind": self.stream_mode.kind, "epochs": self.stream_mode.epochs},
            "seed": self.seed,
            "tasks": [
                {"task_index": t.task_index, "class_ids": sorted(t.class_ids)} for t in self.tasks
            ],
        }
        return json.dumps(payload, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass(frozen=True)
class StreamBatch:
    inputs: np.ndarray
    labels: np.ndarray
    task_index: int
    batch_index: int
    refs: tuple[SampleRef, ...]


def _stream_mode_of(cfg: ExperimentConfig) -> StreamMode:
    if cfg.online:
        return StreamMode("online", 1)
    return StreamMode("offline", cfg.epochs)


def _make_task(index: int, class_ids: Sequence[int], catalog: ClassCatalog) -> TaskSpec:
    train: list[SampleRef] = []
    test: list[SampleRef] = []
    for cid in class_ids:
        e = catalog.entry(cid)
        train.extend(e.train_refs)
        test.extend(e.test_refs)
    return TaskSpec(index, tuple(sorted(class_ids)), tuple(train), tuple(test))


def _block_sizes(cfg: ExperimentConfig) -> list[int]:
    if cfg.init_cls_num > 0:
        return [cfg.init_cls_num] + [cfg.inc_cls_num] * (cfg.task_num - 1)
    return [cfg.inc_cls_num] * cfg.task_num


def partition_traditional(catalog: ClassCatalog, cfg: ExperimentConfig) -> TaskSequence:
    """Slice a single dataset's classes into init/inc blocks under a seeded order."""
    sources = {e.source_dataset for e in catalog.entries}
    if len(sources) != 1:
        raise DataError(f"traditional setting expects one dataset, catalog has {sorted(sources)}")
    sizes = _block_sizes(cfg)
    if sum(sizes) > len(catalog):
        raise DataError(f"partition needs {sum(sizes)} classes, catalog has {len(catalog)}")
    rng = np.random.default_rng([cfg.seed, _TAG_CLASS_ORDER])
    perm = rng.permutation(len(catalog))
    order = [catalog.class_order[i] for i in perm]
    tasks, cursor = [], 0
    for t, size in enumerate(sizes):
        tasks.append(_make_task(t, order[cursor : cursor + size], catalog))
        cursor += size
    return TaskSequence(tuple(tasks), cfg.scenario, _stream_mode_of(cfg), cfg.seed)


def pool_catalogs(catalogs: Sequence[ClassCatalog]) -> ClassCatalog:
    """Relabel several catalogs into one disjoint global id space, in order."""
    entries: list[CatalogEntry] = []
    loaders = [c._loader for c in catalogs]
    spans: list[tuple[int, int]] = []
    gid = 0
    for c in catalogs:
        start = gid
        for e in sorted(c.entries, key=lambda e: e.global_class_id):
            entries.append(
                CatalogEntry(gid, e.source_dataset, e.class_name, e.train_refs, e.test_refs)
            )
            gid += 1
        spans.append((start, gid))
    datasets = [e.source_dataset for e in entries]
    if len(set((e.source_dataset, e.class_name) for e in entries)) != len(entries):
        raise DataError("overlapping (dataset, class) pairs across catalogs")
    by_dataset = {}
    for c, loader in zip(catalogs, loaders):
        for e in c.entries:
            by_dataset[e.source_dataset] = loader

    def loader(ref: SampleRef) -> np.ndarray:
        return by_dataset[ref.dataset](ref)

    pooled = ClassCatalog(entries, loader)
    pooled._spans = spans  # type: ignore[attr-defined]
    pooled._dataset_order = list(dict.fromkeys(datasets))  # type: ignore[attr-defined]
    return pooled


def compose_cross_domain(catalogs: Sequence[ClassCatalog], cfg: ExperimentConfig) -> TaskSequence:
    """One task per dataset, in the given dataset order."""
    if len(catalogs) < 1:
        raise DataError("cross-domain composition needs at least one catalog")
    if len(catalogs) == 1:
        import warnings

        warnings.warn("cross-domain with a single dataset degenerates to one task")
    pooled = pool_catalogs(catalogs)
    spans = pooled._spans  # type: ignore[attr-defined]
    tasks = [
        _make_task(t, list(range(start, stop)), pooled) for t, (start, stop) in enumerate(spans)
    ]
    return TaskSequence(tuple(tasks), cfg.scenario, _stream_mode_of(cfg), cfg.seed)


def compose_category_randomized(
    catalogs: Sequence[ClassCatalog], cfg: ExperimentConfig, seed: int | None = None
) -> TaskSequence:
    """Pool all classes across datasets, shuffle by seed, slice equal blocks.

    Tasks may mix source datasets. The pooled class count must divide evenly
    by ``task_num``; unbalanced partitions are rejected rather than guessed.
    """
    seed = cfg.seed if seed is None else seed
    pooled = pool_catalogs(catalogs)
    n = len(pooled)
    if cfg.task_num > n:
        raise DataError(f"partition overflow: {cfg.task_num} tasks but only {n} pooled classes")
    if n % cfg.task_num != 0:
        raise DataError(f"pooled class count {n} not divisible by task_num {cfg.task_num}")
    block = n // cfg.task_num
    rng = np.random.default_rng([seed, _TAG_POOL_SHUFFLE])
    order = rng.permutation(n)
    tasks = [
        _make_task(t, order[t * block : (t + 1) * block].tolist(), pooled)
        for t in range(cfg.task_num)
    ]
    return TaskSequence(tuple(tasks), cfg.scenario, _stream_mode_of(cfg), cfg.seed)


def build_task_sequence(
    cfg: ExperimentConfig, catalogs: dict[str, ClassCatalog]
) -> tuple[TaskSequence, ClassCatalog]:
    """Dispatch on the semantic setting; returns the sequence and its catalog."""
    ordered = [catalogs[name] for name in cfg.dataset_names]
    if cfg.semantic_setting == "traditional":
        if len(ordered) != 1:
            raise DataError("traditional setting takes exactly one dataset")
        return partition_traditional(ordered[0], cfg), ordered[0]
    if cfg.semantic_setting == "cross_domain":
        pooled = pool_catalogs(ordered)
        return compose_cross_domain(ordered, cfg), pooled
    pooled = pool_catalogs(ordered)
    return compose_category_randomized(ordered, cfg), pooled


def iterate_stream(
    task: TaskSpec,
    mode: StreamMode,
    batch_size: int,
    seed: int,
    catalog: ClassCatalog,
) -> Iterator[StreamBatch]:
    """Yield shuffled mini-batches over a task's training refs.

    Online mode is one pass with every sample emitted exactly once
    (ceil(n/batch_size) batches, last one possibly short). Offline mode
    repeats for ``mode.epochs`` full passes, reshuffling each epoch.
    """
    if batch_size <= 0:
        raise DataError("batch_size must be positive")
    if not task.train_refs:
        raise DataError(f"task {task.task_index} has no training samples")
    refs = list(task.train_refs)
    k = 0
    for epoch in range(mode.epochs):
        rng = np.random.default_rng([seed, _TAG_STREAM, task.task_index, epoch])
        order = rng.permutation(len(refs))
        for start in range(0, len(refs), batch_size):
            chunk = [refs[i] for i in order[start : start + batch_size]]
            x, y = catalog.fetch(chunk)
            yield StreamBatch(x, y, task.task_index, k, tuple(chunk))
            k += 1


# ---------------------------------------------------------------------------
# catalog builders

_BLOB_RE = re.compile(r"^blobs-(\d+)c-(\d+)n-(\d+)d$")
_BLOBIMG_RE = re.compile(r"^blobsimg-(\d+)c-(\d+)n-(\d+)x(\d+)x(\d+)$")


def _dataset_seed(name: str, seed: int) -> list[int]:
    return [zlib.crc32(name.encode()), seed]


def build_blob_catalog(name: str, seed: int) -> ClassCatalog:
    """Synthetic Gaussian-blob dataset; content is a pure function of (name, seed)."""
    m = _BLOB_RE.match(name)
    mi = _BLOBIMG_RE.match(name)
    if m:
        n_classes, n_train, dim = (int(g) for g in m.groups())
        shape: tuple[int, ...] = (dim,)
    elif mi:
        n_classes, n_train = int(mi.group(1)), int(mi.group(2))
        shape = (int(mi.group(3)), int(mi.group(4)), int(mi.group(5)))
    else:
        raise DataError(f"'{name}' is not a synthetic dataset spec")
    n_test = max(n_train // 4, 2)
    dim = int(np.prod(shape))
    rng = np.random.default_rng(_dataset_seed(name, seed))
    means = rng.normal(0.0, 1.0, size=(n_classes, dim)) * 3.0
    data: dict[SampleRef, np.ndarray] = {}
    entries = []
    for c in range(n_classes):
        cname = f"class{c:03d}"
        train = means[c] + rng.normal(0.0, 1.0, size=(n_train, dim)) * 0.7
        test = means[c] + rng.normal(0.0, 1.0, size=(n_test, dim)) * 0.7
        train_refs, test_refs = [], []
        for i in range(n_train):
            ref = SampleRef(name, "train", cname, i)
            data[ref] = train[i].reshape(shape).astype(np.float32)
            train_refs.append(ref)
        for i in range(n_test):
            ref = SampleRef(name, "test", cname, i)
            data[ref] = test[i].reshape(shape).astype(np.float32)
            test_refs.append(ref)
        entries.append(CatalogEntry(c, name, cname, tuple(train_refs), tuple(test_refs)))
    return ClassCatalog(entries, data.__getitem__)


def build_directory_catalog(root: str | Path, name: str | None = None) -> ClassCatalog:
    """Catalog a dataset stored as <root>/{train,test}/<class_name>/<files>."""
    from PIL import Image

    root = Path(root)
    name = name or root.name
    train_dir, test_dir = root / "train", root / "test"
    if not train_dir.is_dir() or not test_dir.is_dir():
        raise DataError(f"dataset root {root} must contain 'train' and 'test' folders")
    classes = sorted(p.name for p in train_dir.iterdir() if p.is_dir())
    if not classes:
        raise DataError(f"no class folders under {train_dir}")
    files: dict[SampleRef, Path] = {}
    entries = []
    for gid, cname in enumerate(classes):
        refs = {}
        for split, base in (("train", train_dir), ("test", test_dir)):
            sub = base / cname
            found = sorted(p for p in sub.iterdir() if p.is_file()) if sub.is_dir() else []
            refs[split] = []
            for i, p in enumerate(found):
                ref = SampleRef(name, split, cname, i)
                files[ref] = p
                refs[split].append(ref)
        entries.append(CatalogEntry(gid, name, cname, tuple(refs["train"]), tuple(refs["test"])))
    cache: dict[SampleRef, np.ndarray] = {}

    def loader(ref: SampleRef) -> np.ndarray:
        if ref not in cache:
            with Image.open(files[ref]) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
            cache[ref] = arr
        return cache[ref]

    return ClassCatalog(entries, loader)


def build_catalogs(cfg: ExperimentConfig, data_root: str | Path | None = None) -> dict[str, ClassCatalog]:
    """Resolve every configured dataset name to a catalog."""
    out = {}
    for dsname in cfg.dataset_names:
        if data_root is not None and (Path(data_root) / dsname / "train").is_dir():
            out[dsname] = build_directory_catalog(Path(data_root) / dsname, dsname)
        elif _BLOB_RE.match(dsname) or _BLOBIMG_RE.match(dsname):
            out[dsname] = build_blob_catalog(dsname, cfg.seed)
        else:
            raise DataError(f"dataset '{dsname}' not found under data root and not synthetic")
    return out


def catalog_summary(catalogs: dict[str, ClassCatalog]) -> dict[str, int]:
    return {name: len(cat) for name, cat in catalogs.items()}
