"""
Micro and class-wise AUPRC.

A clip/class element is predicted positive when its score is >= the
threshold. Thresholds are every distinct score plus -inf and +inf, so the
curve depends only on score order. At each threshold TP, FP and FN are
tallied across all classes jointly; precision with no predictions is 1.0.
Points are sorted by recall (equal recalls keep the highest precision) and
integrated with the trapezoidal rule.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
import torch

from audio.manifest import HEADER, read_label_manifest, read_table
from audio.serializers import PredictionRowSerializer, first_error
from audio.types import CLASS_NAMES
from core.exceptions import (
    InvalidInputError,
    ManifestParseError,
    UndefinedRecallError,
)

logger = logging.getLogger(__name__)


@dataclass
class PredictionSet:
    scores: np.ndarray
    labels: np.ndarray
    clip_ids: list

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.ndim != 2 or self.scores.shape != self.labels.shape:
            raise InvalidInputError(
                f'scores {self.scores.shape} and labels '
                f'{self.labels.shape} must be matching n x K matrices')
        if len(self.clip_ids) != self.scores.shape[0]:
            raise InvalidInputError('one clip id per prediction row needed')
        if not np.isfinite(self.scores).all():
            raise InvalidInputError('scores must be finite')
        if not np.isin(self.labels, (0, 1)).all():
            raise InvalidInputError('labels must be 0 or 1')

    def __len__(self):
        return self.scores.shape[0]

    def only_class(self, k):
        return PredictionSet(self.scores[:, [k]], self.labels[:, [k]],
                             self.clip_ids)


@dataclass
class PRCurve:
    """(precision, recall) points ordered by rising threshold"""
    points: list
    auprc: float


def _tallies(scores, labels):
    """TP and FP at +inf followed by every distinct score, descending"""
    order = np.argsort(-scores, kind='stable')
    s, l = scores[order], labels[order]
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp = np.cumsum(l)[ends]
    fp = ends + 1 - tp
    return np.r_[0, tp], np.r_[0, fp]


def _area(precision, recall):
    order = np.lexsort((-precision, recall))
    r, p = recall[order], precision[order]
    keep = np.r_[True, np.diff(r) != 0]
    return float(np.trapezoid(p[keep], r[keep]))


def pr_curve(scores, labels):
    """PR curve of flattened scores against flattened binary labels"""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.int64).ravel()
    positives = int(labels.sum())
    if positives == 0:
        raise UndefinedRecallError('recall is undefined: no positive labels')

    tp, fp = _tallies(scores, labels)
    # -inf sentinel predicts everything, same tally as the lowest score
    tp, fp = np.r_[tp, positives], np.r_[fp, labels.size - positives]
    predicted = tp + fp
    precision = np.where(predicted == 0, 1.0,
                         tp / np.maximum(predicted, 1))
    recall = tp / positives
    points = list(zip(precision[::-1].tolist(), recall[::-1].tolist()))
    return PRCurve(points, _area(precision, recall))


def micro_pr_curve(p):
    """global TP/FP/FN tally over every class at each threshold"""
    if len(p) < 1:
        raise InvalidInputError('micro_pr_curve needs at least one clip')
    return pr_curve(p.scores, p.labels)


def classwise_auprc(p):
    """per-class AUPRC; classes without positives are NaN"""
    values = np.full(p.scores.shape[1], np.nan)
    for k in range(p.scores.shape[1]):
        if p.labels[:, k].sum() == 0:
            name = CLASS_NAMES[k] if p.scores.shape[1] == len(CLASS_NAMES) \
                else k
            logger.warning('class %s has no positives; AUPRC undefined', name)
            continue
        values[k] = pr_curve(p.scores[:, k], p.labels[:, k]).auprc
    return values


@dataclass
class EvalResult:
    micro: PRCurve
    classwise: np.ndarray

    @property
    def micro_auprc(self):
        return self.micro.auprc

    def to_frame(self):
        rows = [('micro', self.micro.auprc)]
        rows += list(zip(CLASS_NAMES, self.classwise.tolist()))
        return pd.DataFrame(rows, columns=['scope', 'auprc'])


def evaluate(p):
    return EvalResult(micro_pr_curve(p), classwise_auprc(p))


def evaluate_model(model, features, batch_size=16):
    """score a FeatureSet with a student or teacher model"""
    inputs = features.teacher_inputs if model.architecture == 'teacher' \
        else features.student_inputs
    dtype = next(model.parameters()).dtype
    was_training = model.training
    model.eval()
    scores = []
    with torch.no_grad():
        for start in range(0, len(features), batch_size):
            batch = torch.as_tensor(inputs[start:start + batch_size],
                                    dtype=dtype)
            scores.append(model(batch).double().numpy())
    model.train(was_training)
    return PredictionSet(np.concatenate(scores), features.labels,
                         list(features.clip_ids))


def write_predictions(p, path):
    frame = pd.DataFrame(p.scores, columns=list(CLASS_NAMES))
    frame.insert(0, 'clip_id', p.clip_ids)
    frame.to_csv(path, index=False, lineterminator='\n', float_format='%.9g')
    return path


def load_predictions(pred_csv, labels_csv):
    """pair a prediction CSV with a label manifest by clip_id"""
    frame = read_table(pred_csv, header=HEADER)
    labels_by_id = read_label_manifest(labels_csv)

    clip_ids, scores, labels = [], [], []
    for index, record in enumerate(frame.to_dict(orient='records')):
        serializer = PredictionRowSerializer(data=record)
        if not serializer.is_valid():
            raise ManifestParseError(first_error(serializer.errors),
                                     line=index + 2)
        data = serializer.validated_data
        if data['clip_id'] not in labels_by_id:
            raise InvalidInputError(
                f'no labels for predicted clip {data["clip_id"]}')
        clip_ids.append(data['clip_id'])
        scores.append([data[name] for name in CLASS_NAMES])
        labels.append(labels_by_id[data['clip_id']])
    if not clip_ids:
        raise InvalidInputError(f'{pred_csv}: no predictions')
    return PredictionSet(np.array(scores), np.array(labels), clip_ids)
