"""Detection metrics: IoU at 0.5, greedy matching, per-class AP, mAP, PR curves.

Matching discipline: detections are processed per class in descending score
(ties broken by stable input order). A detection is a true positive iff some
same-class, same-image, not-yet-matched ground-truth box overlaps it with
IoU >= threshold; it consumes the highest-IoU such box (ties by lowest
ground-truth index). Everything else is a false positive.

AP uses all-point interpolation by default (area under the interpolated
precision envelope); the legacy 11-point average is available as a mode.
Precision/recall ratios are exact rationals internally and rounded to float
once, so results are reproducible to the last bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .annotate import BBox
from .errors import ImageIdMismatch, ParseError, UnknownClass
from .scene import ShapeClass

AP_MODES = ("allpoint", "11point")
DEFAULT_IOU_THRESHOLD = 0.5
CLASS_ORDER = (ShapeClass.BOX, ShapeClass.CYLINDER, ShapeClass.SPHERE)


@dataclass(frozen=True)
class Detection:
    image: str
    shape: ShapeClass
    bbox: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruthBox:
    image: str
    shape: ShapeClass
    bbox: BBox


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; 0 when disjoint."""
    ix = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    iy = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass
class ClassMatches:
    """Per-class matching outcome, in descending-score processing order."""

    scores: list[float] = field(default_factory=list)
    tp_flags: list[bool] = field(default_factory=list)
    gt_count: int = 0

    @property
    def tp(self) -> int:
        return sum(self.tp_flags)

    @property
    def fp(self) -> int:
        return len(self.tp_flags) - self.tp


def match_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruthBox],
    threshold: float = DEFAULT_IOU_THRESHOLD,
) -> dict[ShapeClass, ClassMatches]:
    """Label every detection TP or FP under one-to-one greedy matching."""
    for det in detections:
        if not isinstance(det.shape, ShapeClass):
            raise UnknownClass(f"detection class {det.shape!r}")
    for gt in ground_truths:
        if not isinstance(gt.shape, ShapeClass):
            raise UnknownClass(f"ground-truth class {gt.shape!r}")

    gt_by_key: dict[tuple[str, ShapeClass], list[GroundTruthBox]] = {}
    for gt in ground_truths:
        gt_by_key.setdefault((gt.image, gt.shape), []).append(gt)
    matched: dict[tuple[str, ShapeClass], list[bool]] = {
        key: [False] * len(boxes) for key, boxes in gt_by_key.items()
    }

    result = {cls: ClassMatches() for cls in CLASS_ORDER}
    for gt in ground_truths:
        result[gt.shape].gt_count += 1

    for cls in CLASS_ORDER:
        ranked = sorted(
            ((det, idx) for idx, det in enumerate(detections) if det.shape is cls),
            key=lambda pair: (-pair[0].score, pair[1]),
        )
        for det, _ in ranked:
            key = (det.image, cls)
            best_iou = 0.0
            best_idx = -1
            for gi, gt in enumerate(gt_by_key.get(key, ())):
                if matched[key][gi]:
                    continue
                overlap = iou(det.bbox, gt.bbox)
                if overlap > best_iou:
                    best_iou = overlap
                    best_idx = gi
            is_tp = best_iou >= threshold and best_idx >= 0
            if is_tp:
                matched[key][best_idx] = True
            result[cls].scores.append(det.score)
            result[cls].tp_flags.append(is_tp)
    return result


def pr_curve(tp_flags: Sequence[bool], gt_count: int) -> list[tuple[float, float]]:
    """Cumulative (recall, precision) samples in descending-score order."""
    samples = []
    tp = 0
    for i, flag in enumerate(tp_flags):
        tp += bool(flag)
        recall = tp / gt_count if gt_count else 0.0
        samples.append((recall, (tp) / (i + 1)))
    return samples


def average_precision(
    tp_flags: Sequence[bool], gt_count: int, mode: str = "allpoint"
) -> float | None:
    """AP for one class from TP/FP flags ordered by descending score.

    Returns None when the class has no ground truth and no detections
    (the class is then skipped from mAP); 0.0 when detections exist without
    ground truth. Internally exact rational arithmetic, rounded once.
    """
    if mode not in AP_MODES:
        raise ValueError(f"mode must be one of {AP_MODES}, got {mode!r}")
    if gt_count < 0:
        raise ValueError("gt_count must be >= 0")
    if gt_count == 0:
        return 0.0 if tp_flags else None
    if not tp_flags:
        return 0.0

    recalls: list[Fraction] = []
    precisions: list[Fraction] = []
    tp = 0
    for i, flag in enumerate(tp_flags):
        tp += bool(flag)
        recalls.append(Fraction(tp, gt_count))
        precisions.append(Fraction(tp, i + 1))

    # precision envelope: max precision at recall >= r, built right to left
    envelope = list(precisions)
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])

    if mode == "11point":
        total = Fraction(0)
        for k in range(11):
            r = Fraction(k, 10)
            best = Fraction(0)
            for rec, env in zip(recalls, envelope):
                if rec >= r:
                    best = env
                    break
            total += best
        return float(total / 11)

    ap = Fraction(0)
    prev_recall = Fraction(0)
    for rec, env in zip(recalls, envelope):
        if rec > prev_recall:
            ap += (rec - prev_recall) * env
            prev_recall = rec
    return float(ap)


@dataclass(frozen=True)
class ClassReport:
    ap: float | None
    gt_count: int
    tp: int
    fp: int
    pr: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class EvalReport:
    per_class: Mapping[str, ClassReport]
    map: float
    ap_mode: str
    iou_threshold: float

    def to_dict(self) -> dict:
        return {
            "ap_mode": self.ap_mode,
            "iou_threshold": self.iou_threshold,
            "map": self.map,
            "classes": {
                name: {
                    "ap": rep.ap,
                    "gt_count": rep.gt_count,
                    "tp": rep.tp,
                    "fp": rep.fp,
                    "pr": [[r, p] for r, p in rep.pr],
                }
                for name, rep in self.per_class.items()
            },
        }

    def table(self) -> str:
        header = f"{'':14s} mAP      " + "".join(f"AP {c.label:<10s}" for c in CLASS_ORDER)
        aps = []
        for c in CLASS_ORDER:
            rep = self.per_class[c.label]
            aps.append("   -     " if rep.ap is None else f"{rep.ap:8.4f} ")
        row = f"{'(' + self.ap_mode + ')':14s} {self.map:8.4f} " + " ".join(f"{a:<12s}" for a in aps)
        return header + "\n" + row


def build_report(
    matches: Mapping[ShapeClass, ClassMatches],
    ap_mode: str = "allpoint",
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> EvalReport:
    per_class = {}
    aps = []
    for cls in CLASS_ORDER:
        m = matches[cls]
        ap = average_precision(m.tp_flags, m.gt_count, mode=ap_mode)
        per_class[cls.label] = ClassReport(
            ap=ap,
            gt_count=m.gt_count,
            tp=m.tp,
            fp=m.fp,
            pr=tuple(pr_curve(m.tp_flags, m.gt_count)),
        )
        if ap is not None:
            aps.append(ap)
    mean_ap = sum(aps) / len(aps) if aps else 0.0
    return EvalReport(per_class=per_class, map=mean_ap, ap_mode=ap_mode, iou_threshold=iou_threshold)


# ---------------------------------------------------------------------------
# file-level evaluation

def _parse_bbox(raw, where: str) -> BBox:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise ParseError(f"{where}: bbox must be [xmin, ymin, xmax, ymax]")
    try:
        x0, y0, x1, y1 = (float(v) for v in raw)
    except (TypeError, ValueError):
        raise ParseError(f"{where}: bbox values must be numbers") from None
    try:
        return BBox(x0, y0, x1, y1)
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None


def _parse_class(raw, where: str) -> ShapeClass:
    try:
        return ShapeClass.from_label(str(raw))
    except ValueError:
        raise UnknownClass(f"{where}: unknown class {raw!r}") from None


def load_detections(path) -> list[Detection]:
    """Parse a detections JSON file, with per-record error context."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(doc, dict) or "detections" not in doc:
        raise ParseError(f"{path}: expected an object with a 'detections' array")
    records = doc["detections"]
    if not isinstance(records, list):
        raise ParseError(f"{path}: 'detections' must be an array")
    out = []
    for i, rec in enumerate(records):
        where = f"{path}: detections[{i}]"
        if not isinstance(rec, dict):
            raise ParseError(f"{where}: expected an object")
        for fieldname in ("image", "class", "bbox", "score"):
            if fieldname not in rec:
                raise ParseError(f"{where}: missing field {fieldname!r}")
        try:
            score = float(rec["score"])
        except (TypeError, ValueError):
            raise ParseError(f"{where}: score must be a number") from None
        if not 0.0 <= score <= 1.0:
            raise ParseError(f"{where}: score must lie in [0, 1], got {score}")
        out.append(
            Detection(
                image=str(rec["image"]),
                shape=_parse_class(rec["class"], where),
                bbox=_parse_bbox(rec["bbox"], where),
                score=score,
            )
        )
    return out


def load_ground_truth(annotations_dir) -> tuple[list[GroundTruthBox], set[str]]:
    """Read all per-scene annotation JSONs from a dataset annotations directory."""
    annotations_dir = Path(annotations_dir)
    files = sorted(annotations_dir.glob("*.json"))
    if not files:
        raise ParseError(f"no annotation JSONs found in {annotations_dir}")
    boxes = []
    images = set()
    for f in files:
        try:
            doc = json.loads(f.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{f}: {exc}") from None
        if "image" not in doc or "objects" not in doc:
            raise ParseError(f"{f}: missing 'image' or 'objects'")
        image = str(doc["image"])
        images.add(image)
        for i, rec in enumerate(doc["objects"]):
            where = f"{f}: objects[{i}]"
            boxes.append(
                GroundTruthBox(
                    image=image,
                    shape=_parse_class(rec.get("class"), where),
                    bbox=_parse_bbox(rec.get("bbox"), where),
                )
            )
    return boxes, images


def evaluate(
    detections: Sequence[Detection] | str | Path,
    ground_truth: Sequence[GroundTruthBox] | str | Path,
    *,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    ap_mode: str = "allpoint",
    known_images: set[str] | None = None,
) -> EvalReport:
    """Full evaluation of a detections source against a ground-truth source.

    Path arguments are loaded from disk (detections JSON file, annotations
    directory); in-memory sequences are used as-is.
    """
    if isinstance(ground_truth, (str, Path)):
        gts, images = load_ground_truth(ground_truth)
    else:
        gts = list(ground_truth)
        images = known_images if known_images is not None else {g.image for g in gts}
    if isinstance(detections, (str, Path)):
        dets = load_detections(detections)
    else:
        dets = list(detections)
    for det in dets:
        if det.image not in images:
            raise ImageIdMismatch(f"detection references unknown image {det.image!r}")
    matches = match_detections(dets, gts, threshold=iou_threshold)
    return build_report(matches, ap_mode=ap_mode, iou_threshold=iou_threshold)


# ---------------------------------------------------------------------------
# report output

def write_report(report: EvalReport, path) -> list[Path]:
    """Write the report JSON plus one PR-curve CSV per class.

    CSVs land next to the report as ``<stem>_pr_<class>.csv`` with header
    ``recall,precision`` and rows in descending score-threshold order.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    written = [path]
    for name, rep in report.per_class.items():
        csv_path = path.with_name(f"{path.stem}_pr_{name}.csv")
        lines = ["recall,precision"]
        lines += [f"{r!r},{p!r}" for r, p in rep.pr]
        csv_path.write_text("\n".join(lines) + "\n")
        written.append(csv_path)
    return written


def pr_curve_svg(points: Iterable[tuple[float, float]], title: str) -> str:
    """Minimal static SVG line plot of a PR curve."""
    size, m = 420, 45
    span = size - 2 * m

    def sx(r):
        return m + r * span

    def sy(p):
        return size - m - p * span

    pts = list(points)
    poly = " ".join(f"{sx(r):.2f},{sy(p):.2f}" for r, p in pts)
    ticks = []
    for k in range(6):
        v = k / 5.0
        ticks.append(
            f'<line x1="{sx(v):.1f}" y1="{size - m}" x2="{sx(v):.1f}" y2="{size - m + 5}" stroke="#333"/>'
            f'<text x="{sx(v):.1f}" y="{size - m + 18}" font-size="10" text-anchor="middle">{v:.1f}</text>'
            f'<line x1="{m - 5}" y1="{sy(v):.1f}" x2="{m}" y2="{sy(v):.1f}" stroke="#333"/>'
            f'<text x="{m - 8}" y="{sy(v) + 3:.1f}" font-size="10" text-anchor="end">{v:.1f}</text>'
        )
    polyline = f'<polyline points="{poly}" fill="none" stroke="#1f6fb2" stroke-width="1.5"/>' if pts else ""
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">\n'
        f'<rect width="{size}" height="{size}" fill="white"/>\n'
        f'<rect x="{m}" y="{m}" width="{span}" height="{span}" fill="none" stroke="#333"/>\n'
        f'{"".join(ticks)}\n'
        f'<text x="{size / 2}" y="{size - 8}" font-size="12" text-anchor="middle">recall</text>\n'
        f'<text x="12" y="{size / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 12 {size / 2})">precision</text>\n'
        f'<text x="{size / 2}" y="{m - 10}" font-size="13" text-anchor="middle">{title}</text>\n'
        f"{polyline}\n</svg>\n"
    )


def write_pr_svgs(report: EvalReport, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rep in report.per_class.items():
        ap_txt = "n/a" if rep.ap is None else f"{rep.ap:.4f}"
        svg = pr_curve_svg(rep.pr, f"{name} (AP {ap_txt})")
        p = out_dir / f"pr_{name}.svg"
        p.write_text(svg)
        written.append(p)
    return written
