"""Seeded synthetic grounding data.

Scenes are collections of colored shapes placed with bounded overlap in
a small image; the query is a template phrase ("the red ball", "the red
ball left of the blue cube") that identifies exactly one object, and
the generator verifies that uniqueness. Proposals around the objects are
emitted with tunable quality knobs (misses, box jitter, background
distractors, feature noise, redundancy) so datasets can emulate weak or
strong proposal generators. Visual features are class/color prototype
vectors plus gaussian noise; there is no pixel rendering.

Per-sample rng streams are derived from (seed, split, sample id), so
generation order never affects content and identical configs produce
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .boxes import BBox, ImageSize, clip_box, iou
from .head import GroundingSample, Proposal
from .metrics import EvalSample

SCHEMA = "groundbox-dataset-v1"

SHAPE_WORDS = ("ball", "cube", "cone", "disc", "ring", "star", "block",
               "spike", "slab", "wedge")
COLOR_WORDS = ("red", "blue", "green", "yellow", "purple", "orange",
               "white", "black")

RELATIONS = ("left", "right", "above", "below")
_REL_TOKENS = {"left": ["left", "of"], "right": ["right", "of"],
               "above": ["above"], "below": ["below"]}


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    image_w: int = 100
    image_h: int = 100
    min_objects: int = 2
    max_objects: int = 6
    num_shapes: int = 8
    num_colors: int = 6
    min_size: float = 18.0
    max_size: float = 42.0
    max_overlap: float = 0.3
    relation_margin: float = 10.0

    def __post_init__(self):
        if self.num_shapes > len(SHAPE_WORDS) or self.num_colors > len(COLOR_WORDS):
            raise ValueError("scene config: more classes than builtin words")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ValueError("scene config: bad object count range")

    @property
    def image(self) -> ImageSize:
        return ImageSize(self.image_w, self.image_h)


@dataclass(frozen=True)
class ProposalQualityConfig:
    miss_prob: float
    jitter: float
    distractor_frac: float
    feat_noise: float
    redundancy: int
    # Systematic looseness: proposal corners grow outward by this
    # fraction of the box size on average (weak generators emit loose
    # boxes). This is what makes box refinement learnable.
    oversize: float = 0.0

    def __post_init__(self):
        for name in ("miss_prob", "distractor_frac"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"quality config: {name}={v} outside [0,1]")
        if self.jitter < 0 or self.feat_noise < 0 or self.oversize < 0:
            raise ValueError("quality config: negative noise scale")
        if self.redundancy < 1:
            raise ValueError("quality config: redundancy < 1")


# Emulations of weak-to-strong proposal generators; calibrated once so
# the measured discrimination scores come out well separated and
# increasing (see tests), then frozen.
QUALITY_PRESETS = {
    "low": ProposalQualityConfig(miss_prob=0.45, jitter=0.20, distractor_frac=0.50,
                                 feat_noise=0.60, redundancy=2, oversize=0.30),
    "mid": ProposalQualityConfig(miss_prob=0.18, jitter=0.13, distractor_frac=0.25,
                                 feat_noise=0.35, redundancy=2, oversize=0.24),
    "high": ProposalQualityConfig(miss_prob=0.03, jitter=0.08, distractor_frac=0.125,
                                  feat_noise=0.15, redundancy=3, oversize=0.18),
}


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: str
    box: BBox


@dataclass(frozen=True)
class Scene:
    image: ImageSize
    objects: list[SceneObject]
    target_index: int
    relation: str | None
    anchor_index: int | None


@dataclass(frozen=True)
class DatasetRecord:
    sample_id: int
    image: ImageSize
    query: list[str]
    gt_box: BBox
    boxes: list[BBox]
    features: np.ndarray  # (N, d_v)

    def grounding_sample(self) -> GroundingSample:
        proposals = [Proposal(b, self.features[i])
                     for i, b in enumerate(self.boxes)]
        return GroundingSample(self.image, proposals, list(self.query), self.gt_box)

    def eval_sample(self) -> EvalSample:
        return EvalSample(list(self.boxes), self.gt_box, self.image)


class PrototypeTable:
    """Fixed per-dataset appearance vectors: one half-vector per shape
    class, one per color, and a full-length background vector."""

    def __init__(self, d_v: int, rng: np.random.Generator,
                 num_shapes: int, num_colors: int):
        if d_v < 2:
            raise ValueError(f"prototype table: d_v {d_v} too small")
        self.d_v = d_v
        half = d_v // 2
        self.shape_protos = rng.uniform(-1.0, 1.0, size=(num_shapes, half))
        self.color_protos = rng.uniform(-1.0, 1.0, size=(num_colors, d_v - half))
        self.background = rng.uniform(-1.0, 1.0, size=d_v)

    def object_vector(self, shape_idx: int, color_idx: int) -> np.ndarray:
        return np.concatenate([self.shape_protos[shape_idx],
                               self.color_protos[color_idx]])


def _rel_satisfied(a: BBox, rel: str, anchor: BBox, margin: float) -> bool:
    acx, acy = a.center
    bcx, bcy = anchor.center
    if rel == "left":
        return acx <= bcx - margin
    if rel == "right":
        return acx >= bcx + margin
    if rel == "above":
        return acy <= bcy - margin
    if rel == "below":
        return acy >= bcy + margin
    raise ValueError(f"unknown relation {rel!r}")


def matching_objects(scene: Scene, cfg: SceneConfig) -> list[int]:
    """Indices of objects the scene's query could refer to (uniqueness
    check; must come back as exactly the target)."""
    tgt = scene.objects[scene.target_index]
    candidates = [i for i, o in enumerate(scene.objects)
                  if o.shape == tgt.shape and o.color == tgt.color]
    if scene.relation is None:
        return candidates
    anchor = scene.objects[scene.anchor_index]
    return [i for i in candidates
            if _rel_satisfied(scene.objects[i].box, scene.relation, anchor.box,
                              cfg.relation_margin)]


def _place_boxes(rng: np.random.Generator, cfg: SceneConfig, n: int) -> list[BBox] | None:
    boxes: list[BBox] = []
    for _ in range(n):
        for _ in range(60):
            w = rng.uniform(cfg.min_size, cfg.max_size)
            h = rng.uniform(cfg.min_size, cfg.max_size)
            x = rng.uniform(0.0, cfg.image_w - w)
            y = rng.uniform(0.0, cfg.image_h - h)
            cand = BBox(x, y, x + w, y + h)
            if all(iou(cand, b) <= cfg.max_overlap for b in boxes):
                boxes.append(cand)
                break
        else:
            return None
    return boxes


def generate_scene(rng: np.random.Generator, cfg: SceneConfig) -> Scene:
    """Place objects and pick a target with a provably unique description.

    Raises GenerationError when no unambiguous scene can be built within
    the retry budget (does not happen with the default config).
    """
    shapes = SHAPE_WORDS[:cfg.num_shapes]
    colors = COLOR_WORDS[:cfg.num_colors]
    for _ in range(50):
        n = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
        boxes = _place_boxes(rng, cfg, n)
        if boxes is None:
            continue
        objects = [SceneObject(shapes[rng.integers(len(shapes))],
                               colors[rng.integers(len(colors))], b)
                   for b in boxes]
        scene = _pick_target(rng, cfg, objects)
        if scene is not None:
            matched = matching_objects(scene, cfg)
            if matched != [scene.target_index]:
                raise GenerationError(
                    f"generator bug: query matches objects {matched}, "
                    f"target {scene.target_index}")
            return scene
    raise GenerationError(
        f"no unambiguous scene found in 50 attempts (config {cfg})")


def _pick_target(rng: np.random.Generator, cfg: SceneConfig,
                 objects: list[SceneObject]) -> Scene | None:
    n = len(objects)
    combo_counts: dict[tuple[str, str], int] = {}
    for o in objects:
        combo_counts[(o.shape, o.color)] = combo_counts.get((o.shape, o.color), 0) + 1

    for ti in rng.permutation(n):
        ti = int(ti)
        tgt = objects[ti]
        class_unique = all(o.shape != tgt.shape
                           for i, o in enumerate(objects) if i != ti)
        if class_unique:
            return Scene(cfg.image, objects, ti, None, None)
        # Same shape class elsewhere: disambiguate through a relation to
        # an anchor whose own (shape, color) description is unique.
        anchors = [j for j in range(n)
                   if j != ti and combo_counts[(objects[j].shape, objects[j].color)] == 1]
        for j in rng.permutation(len(anchors)):
            aj = anchors[int(j)]
            for ri in rng.permutation(len(RELATIONS)):
                rel = RELATIONS[int(ri)]
                matches = [k for k, o in enumerate(objects)
                           if o.shape == tgt.shape and o.color == tgt.color
                           and _rel_satisfied(o.box, rel, objects[aj].box,
                                              cfg.relation_margin)]
                if matches == [ti]:
                    return Scene(cfg.image, objects, ti, rel, aj)
    return None


def generate_query(scene: Scene) -> list[str]:
    """Render the scene's target description as lowercase tokens."""
    tgt = scene.objects[scene.target_index]
    tokens = ["the", tgt.color, tgt.shape]
    if scene.relation is not None:
        anchor = scene.objects[scene.anchor_index]
        tokens += _REL_TOKENS[scene.relation] + ["the", anchor.color, anchor.shape]
    return tokens


def synthesize_feature(obj: SceneObject | None, protos: PrototypeTable,
                       rng: np.random.Generator, feat_noise: float,
                       cfg: SceneConfig) -> np.ndarray:
    """Prototype vector for the object (or background) plus noise."""
    if obj is None:
        base = protos.background
    else:
        base = protos.object_vector(SHAPE_WORDS.index(obj.shape),
                                    COLOR_WORDS.index(obj.color))
    return base + rng.normal(0.0, feat_noise, size=protos.d_v)


def _sanitize_box(x0, y0, x1, y1, img: ImageSize, min_size: float = 1.0) -> BBox:
    if x1 < x0:
        x0, x1 = x1, x0
    if y1 < y0:
        y0, y1 = y1, y0
    box = clip_box(BBox(x0, y0, x1, y1), img)
    x0, y0, x1, y1 = box.as_tuple()
    if x1 - x0 < min_size:
        x1 = min(img.w, x0 + min_size)
        x0 = x1 - min_size
    if y1 - y0 < min_size:
        y1 = min(img.h, y0 + min_size)
        y0 = y1 - min_size
    return BBox(max(0.0, x0), max(0.0, y0), x1, y1)


def _jitter_box(b: BBox, sigma: float, oversize: float,
                rng: np.random.Generator, img: ImageSize) -> BBox:
    """Noisy, systematically loose copy of a box.

    Corners move outward by ``oversize`` times the box size plus
    zero-mean noise of relative scale ``sigma``.
    """
    if sigma == 0.0 and oversize == 0.0:
        return clip_box(b, img)
    gw, gh = oversize * b.width, oversize * b.height
    noise = np.zeros(4)
    if sigma > 0.0:
        sw, sh = sigma * b.width, sigma * b.height
        noise = rng.normal(0.0, [sw, sh, sw, sh])
    return _sanitize_box(b.x_tl - gw + noise[0], b.y_tl - gh + noise[1],
                         b.x_br + gw + noise[2], b.y_br + gh + noise[3], img)


def _background_box(rng: np.random.Generator, cfg: SceneConfig) -> BBox:
    w = rng.uniform(cfg.min_size * 0.5, cfg.max_size)
    h = rng.uniform(cfg.min_size * 0.5, cfg.max_size)
    x = rng.uniform(0.0, cfg.image_w - w)
    y = rng.uniform(0.0, cfg.image_h - h)
    return BBox(x, y, x + w, y + h)


def generate_proposals(scene: Scene, quality: ProposalQualityConfig,
                       rng: np.random.Generator, n_proposals: int,
                       protos: PrototypeTable,
                       cfg: SceneConfig) -> tuple[list[BBox], np.ndarray]:
    """Jittered object copies plus background distractors, exactly N.

    Each surviving object contributes ``redundancy`` jittered copies of
    its box with its own (noisy) feature; a quality-dependent share of
    slots is reserved for background boxes, and overflow is cut after a
    shuffle so no object is systematically favored.
    """
    if n_proposals < 1:
        raise ValueError(f"generate_proposals: N={n_proposals} < 1")
    from_objects: list[tuple[BBox, SceneObject]] = []
    for obj in scene.objects:
        if rng.random() < quality.miss_prob:
            continue
        for _ in range(quality.redundancy):
            from_objects.append((_jitter_box(obj.box, quality.jitter,
                                             quality.oversize, rng,
                                             scene.image), obj))
    order = rng.permutation(len(from_objects))
    n_bg_reserved = int(round(quality.distractor_frac * n_proposals))
    keep = min(len(from_objects), max(0, n_proposals - n_bg_reserved))
    pool: list[tuple[BBox, SceneObject | None]] = \
        [from_objects[int(i)] for i in order[:keep]]
    while len(pool) < n_proposals:
        pool.append((_background_box(rng, cfg), None))
    final = rng.permutation(len(pool))
    boxes = [pool[int(i)][0] for i in final]
    feats = np.stack([synthesize_feature(pool[int(i)][1], protos, rng,
                                         quality.feat_noise, cfg)
                      for i in final])
    return boxes, feats


def prototype_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 0]))


def sample_rng(seed: int, split_id: int, sample_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, split_id + 1,
                                                         sample_id]))


def generate_record(sample_id: int, rng: np.random.Generator, cfg: SceneConfig,
                    quality: ProposalQualityConfig, protos: PrototypeTable,
                    n_proposals: int) -> DatasetRecord:
    scene = generate_scene(rng, cfg)
    query = generate_query(scene)
    boxes, feats = generate_proposals(scene, quality, rng, n_proposals,
                                      protos, cfg)
    return DatasetRecord(sample_id, scene.image, query,
                         scene.objects[scene.target_index].box, boxes, feats)


def generate_split(seed: int, split_id: int, count: int, cfg: SceneConfig,
                   quality: ProposalQualityConfig, protos: PrototypeTable,
                   n_proposals: int) -> list[DatasetRecord]:
    return [generate_record(sid, sample_rng(seed, split_id, sid), cfg,
                            quality, protos, n_proposals)
            for sid in range(count)]


# ---------------------------------------------------------------------------
# serialization


def write_dataset(records: list[DatasetRecord], path, meta: dict) -> None:
    """Line-delimited records behind a header line carrying the schema
    version, seed, and config fingerprint."""
    header = {"schema": SCHEMA, **meta}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in records:
            row = {
                "id": r.sample_id,
                "w": int(r.image.w),
                "h": int(r.image.h),
                "query": r.query,
                "gt": list(r.gt_box.as_tuple()),
                "proposals": [{"box": list(b.as_tuple()),
                               "feat": r.features[i].tolist()}
                              for i, b in enumerate(r.boxes)],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def read_dataset(path) -> tuple[list[DatasetRecord], dict]:
    records: list[DatasetRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ValueError(f"{path}: empty dataset file")
        try:
            header = json.loads(first)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: line 1: malformed header ({e})") from e
        if header.get("schema") != SCHEMA:
            raise ValueError(f"{path}: schema {header.get('schema')!r} "
                             f"!= expected {SCHEMA!r}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                img = ImageSize(row["w"], row["h"])
                record = DatasetRecord(
                    sample_id=int(row["id"]),
                    image=img,
                    query=[str(t) for t in row["query"]],
                    gt_box=BBox(*row["gt"]),
                    boxes=[BBox(*p["box"]) for p in row["proposals"]],
                    features=np.array([p["feat"] for p in row["proposals"]],
                                      dtype=np.float64),
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
                raise ValueError(f"{path}: line {lineno}: bad record ({e})") from e
            records.append(record)
    return records, header


def quality_fingerprint(q: ProposalQualityConfig) -> dict:
    return asdict(q)
