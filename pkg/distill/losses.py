"""
Distillation losses: BCE on labels, temperature-scaled sigmoid KD on
logits, batch-level similarity preserving (SP) and intra-utterance
similarity preserving (IUSP) losses, and their weighted total.

Teacher-derived quantities are detached; gradients only reach the student.
"""
import enum
from dataclasses import dataclass, field, replace

import torch
import torch.nn.functional as F

from core.exceptions import ConfigurationError, InvalidInputError
from distill.kernels import (
    SquashParams,
    bilinear_resize,
    channel_normalize,
    frame_grams,
    sigmoid_squash,
    sp_gram,
)

PROB_CLAMP = 1e-7
COMPONENTS = ('bce', 'kd', 'sp', 'iusp')


class Setup(str, enum.Enum):
    """the five training objectives compared by the suite"""
    BCE = 'BCE'
    BCE_KD = 'BCE+KD'
    BCE_KD_SP = 'BCE+KD+SP'
    BCE_KD_IUSP = 'BCE+KD+IUSP'
    BCE_KD_SP_IUSP = 'BCE+KD+SP+IUSP'

    @property
    def terms(self):
        return set(self.value.lower().split('+'))

    @property
    def uses_teacher(self):
        return self is not Setup.BCE


@dataclass(frozen=True)
class LossWeights:
    alpha_bce: float = 1.0
    alpha_kd: float = 10.0
    alpha_sp: float = 10.0
    alpha_iusp: float = 1.0
    kd_temperature: float = 1.0
    squash: SquashParams = field(default_factory=SquashParams)

    def __post_init__(self):
        for name in COMPONENTS:
            if self.alpha(name) < 0:
                raise ConfigurationError(f'alpha_{name} must be >= 0')
        if self.kd_temperature <= 0:
            raise ConfigurationError('kd_temperature must be > 0')

    def alpha(self, component):
        return getattr(self, f'alpha_{component}')

    def for_setup(self, setup):
        """zero the alphas of every term the setup leaves out"""
        terms = Setup(setup).terms
        return replace(self, **{f'alpha_{name}': 0.0 for name in COMPONENTS
                                if name not in terms})

    def needs_teacher(self):
        return any(self.alpha(name) > 0 for name in ('kd', 'sp', 'iusp'))


@dataclass
class LossValue:
    """weighted total plus the unweighted components for logging"""
    total: object
    components: dict

    def __getitem__(self, name):
        return self.components[name]


def _check_same_shape(a, b, what):
    if a.shape != b.shape:
        raise InvalidInputError(
            f'{what}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}')


def _values(a):
    return getattr(a, 'values', a)


def bce_loss(pred_probs, targets):
    """mean binary cross entropy over every (clip, class) element"""
    _check_same_shape(pred_probs, targets, 'bce_loss')
    probs = pred_probs.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
    return F.binary_cross_entropy(probs, targets.to(probs.dtype))


def kd_logit_loss(student_logits, teacher_logits, temperature=1.0):
    """BCE of sigmoid(student / T) against sigmoid(teacher / T) targets"""
    _check_same_shape(student_logits, teacher_logits, 'kd_logit_loss')
    if temperature <= 0:
        raise InvalidInputError(f'temperature must be > 0, got {temperature}')
    soft_targets = torch.sigmoid(teacher_logits.detach() / temperature)
    return F.binary_cross_entropy_with_logits(student_logits / temperature,
                                              soft_targets)


def sp_loss(teacher_maps, student_maps, pairs):
    """(1/b^2) sum over hint pairs of ||G_teacher - G_student||_F^2"""
    total = None
    for teacher_layer, student_layer in pairs:
        teacher = _values(teacher_maps[teacher_layer]).detach()
        student = _values(student_maps[student_layer])
        b = student.shape[0]
        if teacher.shape[0] != b:
            raise InvalidInputError(
                f'sp_loss: batch {teacher.shape[0]} ({teacher_layer}) vs '
                f'{b} ({student_layer})')
        diff = sp_gram(teacher).values - sp_gram(student).values
        term = diff.pow(2).sum() / b ** 2
        total = term if total is None else total + term
    if total is None:
        raise InvalidInputError('sp_loss needs at least one hint pair')
    return total


def squashed_frame_grams(a, p, size=None):
    """sigmoid-squashed frame grams, resizing to ``size=(h, w)`` first"""
    x = _values(a)
    if size is not None:
        x = bilinear_resize(x, *size)
    return sigmoid_squash(frame_grams(channel_normalize(x)), p)


def iusp_loss(teacher_map, student_map, p=SquashParams()):
    """(1/b) sum over utterances of ||G~_teacher - G~_student||_F^2

    The teacher map is bilinearly resized to the student's (h, w) before
    channel normalization.
    """
    teacher = _values(teacher_map).detach()
    student = _values(student_map)
    b = student.shape[0]
    if teacher.shape[0] != b:
        raise InvalidInputError(
            f'iusp_loss: batch {teacher.shape[0]} vs {b}')
    g_teacher = squashed_frame_grams(teacher, p, size=student.shape[2:])
    g_student = squashed_frame_grams(student, p)
    return (g_teacher - g_student).pow(2).sum() / b


def total_loss(components, weights):
    """alpha-weighted sum; absent components count as zero

    The total is always a tensor, zero when every alpha is zero.
    """
    tensors = [value for value in components.values()
               if torch.is_tensor(value)]
    total = tensors[0].new_zeros(()) if tensors \
        else torch.zeros((), dtype=torch.float64)
    recorded = {}
    for name in COMPONENTS:
        value = components.get(name, 0.0)
        recorded[name] = float(value.detach()) if torch.is_tensor(value) \
            else float(value)
        alpha = weights.alpha(name)
        if alpha:
            total = total + alpha * value
    return LossValue(total, recorded)
