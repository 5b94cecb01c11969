"""Per-image post-processing: NMS, pod-level class probabilities, treatment lookup.

Class probabilities come from renormalizing the per-class score mass inside a
class-agnostic NMS cluster. That rule is a declared convention of this
toolkit: box scores are evidence weights, a probability head is not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import docio
from .annotations import ClassRegistry, DetectionItem
from .errors import SchemaError, UnknownClassError
from .formats import box_to_doc
from .geometry import BoundingBox, iou
from .metrics import ConfusionCounts

HEALTHY_CLASS_NAME = "healthy"


@dataclass(frozen=True)
class DiagnosisConfig:
    nms_iou_threshold: float = 0.5
    score_floor: float = 0.25

    def __post_init__(self) -> None:
        if not 0.0 <= self.nms_iou_threshold <= 1.0:
            raise ValueError("nms_iou_threshold must be in [0, 1]")
        if not 0.0 <= self.score_floor <= 1.0:
            raise ValueError("score_floor must be in [0, 1]")


@dataclass(frozen=True)
class DiseaseInfo:
    class_id: int
    display_name: str
    symptoms: tuple[str, ...]
    treatments: tuple[str, ...]
    reference_images: tuple[str, ...] = ()


@dataclass(frozen=True)
class PodAssessment:
    """One detected pod: its box, a probability per class, and the arg-max class."""

    box: BoundingBox
    probabilities: Mapping[int, float]
    top_class: int


@dataclass(frozen=True)
class Diagnosis:
    image_id: str
    pods: tuple[PodAssessment, ...]
    knowledge: Mapping[int, DiseaseInfo]


def _suppression_order(det: DetectionItem):
    box = det.box
    return (-det.score, box.x_min, box.y_min, box.x_max, box.y_max)


def nms(
    dets: Sequence[DetectionItem],
    iou_threshold: float,
    class_agnostic: bool = False,
) -> list[DetectionItem]:
    """Greedy non-maximum suppression over a single image's detections.

    A detection is removed when its IoU with an already-kept detection (of
    the same class, unless class_agnostic) exceeds the threshold. Ties follow
    the matching order: score descending, then ascending box corners.
    """
    kept: list[DetectionItem] = []
    for det in sorted(dets, key=_suppression_order):
        suppressed = any(
            (class_agnostic or keeper.class_id == det.class_id)
            and iou(keeper.box, det.box) > iou_threshold
            for keeper in kept
        )
        if not suppressed:
            kept.append(det)
    return kept


def nms_clusters(
    dets: Sequence[DetectionItem], iou_threshold: float
) -> list[tuple[DetectionItem, list[DetectionItem]]]:
    """Class-agnostic NMS that keeps the suppressed members with their keeper.

    Every detection lands in exactly one cluster: the first kept detection
    that suppresses it, or its own cluster if kept.
    """
    clusters: list[tuple[DetectionItem, list[DetectionItem]]] = []
    for det in sorted(dets, key=_suppression_order):
        owner = None
        for keeper, members in clusters:
            if iou(keeper.box, det.box) > iou_threshold:
                owner = members
                break
        if owner is None:
            clusters.append((det, [det]))
        else:
            owner.append(det)
    return clusters


def diagnose(
    dets: Sequence[DetectionItem],
    registry: ClassRegistry,
    knowledge_base: Mapping[int, DiseaseInfo],
    config: DiagnosisConfig = DiagnosisConfig(),
    *,
    image_id: str | None = None,
) -> Diagnosis:
    """Turn one image's detections into per-pod class probabilities.

    Detections below the score floor are dropped, the rest are clustered by
    class-agnostic NMS, and each cluster's per-class score mass is
    renormalized to a probability vector over the full registry. An empty
    detection list is a valid zero-pod diagnosis, not an error.
    """
    if image_id is None:
        image_id = dets[0].image_id if dets else ""
    surviving = [d for d in dets if d.score >= config.score_floor]
    pods: list[PodAssessment] = []
    used_classes: set[int] = set()
    for keeper, members in nms_clusters(surviving, config.nms_iou_threshold):
        mass: dict[int, float] = {class_id: 0.0 for class_id in registry.ids()}
        for member in members:
            if member.class_id not in registry:
                raise UnknownClassError(
                    f"detection carries unknown class id {member.class_id}"
                )
            mass[member.class_id] += member.score
        total = sum(mass.values())
        if total > 0:
            probabilities = {cid: v / total for cid, v in mass.items()}
        else:
            # all-zero scores carry no evidence; fall back to a uniform vector
            probabilities = {cid: 1.0 / len(registry) for cid in registry.ids()}
        top_class = min(
            probabilities, key=lambda cid: (-probabilities[cid], cid)
        )
        used_classes.add(top_class)
        pods.append(
            PodAssessment(box=keeper.box, probabilities=probabilities, top_class=top_class)
        )

    knowledge: dict[int, DiseaseInfo] = {}
    for class_id in sorted(used_classes):
        if class_id not in knowledge_base:
            raise UnknownClassError(
                f"knowledge base has no entry for class "
                f"{registry.name_of(class_id)!r} (id {class_id})"
            )
        knowledge[class_id] = knowledge_base[class_id]
    return Diagnosis(image_id=image_id, pods=tuple(pods), knowledge=knowledge)


def image_top_class(diagnosis: Diagnosis) -> int | None:
    """Image-level predicted class: top class of the most confident pod.

    None when the diagnosis has no pods (the detector saw nothing).
    """
    if not diagnosis.pods:
        return None
    best = max(
        enumerate(diagnosis.pods),
        key=lambda pair: (pair[1].probabilities[pair[1].top_class], -pair[0]),
    )
    return best[1].top_class


def image_level_counts(
    diagnoses: Sequence[Diagnosis],
    truth_labels: Sequence[int],
    registry: ClassRegistry,
) -> dict[int, ConfusionCounts]:
    """One-vs-rest confusion counts per class over whole images.

    At image level a true negative is well-defined, so these counts may feed
    the accuracy formula.
    """
    if len(diagnoses) != len(truth_labels):
        raise ValueError(
            f"got {len(diagnoses)} diagnoses but {len(truth_labels)} truth labels"
        )
    tallies = {cid: {"tp": 0, "tn": 0, "fp": 0, "fn": 0} for cid in registry.ids()}
    for diagnosis, truth in zip(diagnoses, truth_labels):
        if truth not in registry:
            raise UnknownClassError(f"truth label {truth} not in registry")
        predicted = image_top_class(diagnosis)
        for class_id in registry.ids():
            if predicted == class_id and truth == class_id:
                tallies[class_id]["tp"] += 1
            elif predicted == class_id:
                tallies[class_id]["fp"] += 1
            elif truth == class_id:
                tallies[class_id]["fn"] += 1
            else:
                tallies[class_id]["tn"] += 1
    return {cid: ConfusionCounts(**vals) for cid, vals in tallies.items()}


# --- Knowledge base -----------------------------------------------------------


def default_knowledge_base(registry: ClassRegistry) -> dict[int, DiseaseInfo]:
    """Built-in symptom and treatment entries for the three cocoa pod classes."""
    entries = {
        "black_pod": DiseaseInfo(
            class_id=registry.resolve("black_pod"),
            display_name="Black pod (Phytophthora palmivora)",
            symptoms=(
                "Dark brown to black lesion spreading across the pod surface",
                "Rotting of the pod tissue, advancing from the infection point",
                "Whitish sporulation on the lesion under humid conditions",
            ),
            treatments=(
                "Remove and destroy infected pods away from the plantation",
                "Improve drainage and prune for airflow to reduce humidity",
                "Apply a copper-based fungicide during prolonged wet periods",
            ),
        ),
        "monilia": DiseaseInfo(
            class_id=registry.resolve("monilia"),
            display_name="Monilia (Moniliophthora roreri)",
            symptoms=(
                "Wilting and deformities of young pods",
                "Hydrosis and oily spots on the husk",
                "Irregular maturity and necrotic patches",
                "Cream-colored spore dust on mature lesions",
            ),
            treatments=(
                "Remove infected pods weekly and bury or compost them off-site",
                "Harvest ripe pods promptly to shorten the infection window",
                "Avoid moving spore-covered tools or sacks between lots",
            ),
        ),
        "healthy": DiseaseInfo(
            class_id=registry.resolve("healthy"),
            display_name="Healthy pod",
            symptoms=("Uniform husk color without lesions or spore layers",),
            treatments=("No intervention needed; continue routine monitoring",),
        ),
    }
    return {info.class_id: info for info in entries.values()}


def knowledge_base_to_document(
    knowledge: Mapping[int, DiseaseInfo], registry: ClassRegistry
) -> dict:
    return {
        "schema": docio.KB_SCHEMA,
        "entries": [
            {
                "class": registry.name_of(class_id),
                "display_name": info.display_name,
                "symptoms": list(info.symptoms),
                "treatments": list(info.treatments),
                "images": list(info.reference_images),
            }
            for class_id, info in sorted(knowledge.items())
        ],
    }


def knowledge_base_from_document(
    doc: dict, registry: ClassRegistry, *, source: str | None = None
) -> dict[int, DiseaseInfo]:
    docio.check_schema(doc, docio.KB_SCHEMA, source=source)
    entries: dict[int, DiseaseInfo] = {}
    for index, raw in enumerate(doc.get("entries", [])):
        where = f"entries[{index}]"
        try:
            class_id = registry.resolve(str(raw["class"]))
            info = DiseaseInfo(
                class_id=class_id,
                display_name=str(raw["display_name"]),
                symptoms=tuple(str(s) for s in raw.get("symptoms", ())),
                treatments=tuple(str(t) for t in raw.get("treatments", ())),
                reference_images=tuple(str(p) for p in raw.get("images", ())),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed entry: {exc!r}", location=where, source=source) from exc
        if registry.name_of(class_id) != HEALTHY_CLASS_NAME and (
            not info.symptoms or not info.treatments
        ):
            raise SchemaError(
                "disease classes need non-empty symptoms and treatments",
                location=where,
                source=source,
            )
        entries[class_id] = info
    return entries


def load_knowledge_base(path, registry: ClassRegistry) -> dict[int, DiseaseInfo]:
    doc = docio.load_document(path, docio.KB_SCHEMA)
    return knowledge_base_from_document(doc, registry, source=str(path))


def diagnosis_to_document(diagnosis: Diagnosis, registry: ClassRegistry) -> dict:
    return {
        "schema": docio.DIAGNOSIS_SCHEMA,
        "image_id": diagnosis.image_id,
        "pods": [
            {
                "box": box_to_doc(pod.box),
                "probs": {
                    registry.name_of(cid): prob
                    for cid, prob in sorted(pod.probabilities.items())
                },
                "top": registry.name_of(pod.top_class),
            }
            for pod in diagnosis.pods
        ],
        "kb_refs": [
            {
                "class": registry.name_of(class_id),
                "display_name": info.display_name,
                "symptoms": list(info.symptoms),
                "treatments": list(info.treatments),
                "images": list(info.reference_images),
            }
            for class_id, info in sorted(diagnosis.knowledge.items())
        ],
    }
