"""
Student CNN-LSTM family and the max-pooling CNN teacher stand-in.

Both models expose their hint activations as rank-4 feature maps:

* student ``cnn``: post-ReLU convolution output ``(b, 32, 10, 499)``;
  ``lstm``: hidden-state sequence as ``(b, 1, hidden, 499)``.
* teacher ``pool1`` .. ``pool4``: outputs of the four max-pooling layers.

Parameter counts (closed forms, checked by the tests):

* student: ``F*k*k + F`` (conv) ``+ 4*H*(F*ceil(M/s) + H + 2)`` (LSTM with
  input and recurrent biases) ``+ K*(H + 1)`` (FC), with F filters, k kernel,
  s stride, M mel bins, H hidden units, K classes.
* teacher: ``sum_i (c_{i-1}*c_i*k*k + c_i) + 2*sum_i c_i`` (conv + batch norm
  affine) ``+ K*(c_last + 1)``, with ``c_0 = 1``.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from audio.container import read_container, write_container
from audio.features import STUDENT_MEL_BINS, TEACHER_MEL_BINS
from audio.types import NUM_CLASSES, LogMelSpectrogram
from core.exceptions import ConfigurationError, InvalidInputError
from distill.kernels import FeatureMap

logger = logging.getLogger(__name__)

LSTM_SIZES = (128, 64, 32, 16)


@dataclass(frozen=True)
class StudentConfig:
    lstm_hidden: int = 128
    conv_filters: int = 32
    conv_kernel: int = 5
    conv_stride: int = 2
    num_classes: int = NUM_CLASSES
    input_mel_bins: int = STUDENT_MEL_BINS

    def __post_init__(self):
        for name in ('lstm_hidden', 'conv_filters', 'conv_kernel',
                     'conv_stride', 'num_classes', 'input_mel_bins'):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigurationError(
                    f'{name} must be a positive integer, got {value!r}')

    @property
    def conv_height(self):
        return math.ceil(self.input_mel_bins / self.conv_stride)


@dataclass(frozen=True)
class TeacherConfig:
    channels: tuple = (32, 64, 128, 128)
    conv_kernel: int = 5
    num_classes: int = NUM_CLASSES
    input_mel_bins: int = TEACHER_MEL_BINS

    def __post_init__(self):
        object.__setattr__(self, 'channels', tuple(self.channels))
        if len(self.channels) < 2:
            raise ConfigurationError(
                'teacher needs at least two conv blocks (hint points)')
        if any(c <= 0 for c in self.channels) or self.conv_kernel <= 0:
            raise ConfigurationError('channels and kernel must be positive')

    @property
    def num_conv_blocks(self):
        return len(self.channels)


class HintPair(NamedTuple):
    """(teacher layer id, student layer id) compared by SP or IUSP"""
    teacher: str
    student: str

    def __str__(self):
        return f'{self.teacher}:{self.student}'

    @classmethod
    def parse(cls, text):
        teacher, sep, student = str(text).partition(':')
        if not sep or not teacher or not student:
            raise ConfigurationError(
                f'hint pair must look like "pool2:cnn", got {text!r}')
        return cls(teacher.strip(), student.strip())


@dataclass(frozen=True)
class HintGrid:
    teacher_hints: tuple
    student_hints: tuple

    def candidates(self):
        """every pair, ordered by (teacher index, student index)"""
        return [HintPair(t, s) for t in self.teacher_hints
                for s in self.student_hints]

    def rank(self, pair):
        return (self.teacher_hints.index(pair.teacher),
                self.student_hints.index(pair.student))

    @classmethod
    def between(cls, teacher, student):
        return cls(tuple(teacher.hint_layers), tuple(student.hint_layers))


@dataclass(frozen=True)
class ModelCost:
    flops: int
    params: int


class ForwardPass(NamedTuple):
    probs: torch.Tensor
    hints: dict
    logits: torch.Tensor


def _as_batch(x, mel_bins):
    """accept a LogMelSpectrogram, (b, mel, t) or (b, 1, mel, t) input"""
    if isinstance(x, LogMelSpectrogram):
        x = torch.as_tensor(np.asarray(x.values))[None]
    if x.dim() == 3:
        x = x.unsqueeze(1)
    if x.dim() != 4 or x.shape[1] != 1 or x.shape[2] != mel_bins:
        raise InvalidInputError(
            f'expected input (b, 1, {mel_bins}, frames), '
            f'got {tuple(x.shape)}')
    return x


class _HintedModel(nn.Module):
    architecture = None
    hint_layers = ()

    def forward(self, x):
        return self.forward_with_hints(x).probs

    def _wrap(self, logits, hints):
        return ForwardPass(torch.sigmoid(logits),
                           {name: FeatureMap(value, name)
                            for name, value in hints.items()},
                           logits)


class StudentNet(_HintedModel):
    """one conv layer, one unidirectional LSTM, one FC layer"""
    architecture = 'student'
    hint_layers = ('cnn', 'lstm')

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        self.conv = nn.Conv2d(1, cfg.conv_filters, cfg.conv_kernel,
                              stride=cfg.conv_stride,
                              padding=cfg.conv_kernel // 2)
        self.lstm = nn.LSTM(cfg.conv_filters * cfg.conv_height,
                            cfg.lstm_hidden, batch_first=True)
        self.fc = nn.Linear(cfg.lstm_hidden, cfg.num_classes)

    def forward_with_hints(self, x):
        x = _as_batch(x, self.cfg.input_mel_bins).to(self.conv.weight.dtype)
        cnn = F.relu(self.conv(x))
        steps = cnn.permute(0, 3, 1, 2).flatten(start_dim=2)
        sequence, _ = self.lstm(steps)
        logits = self.fc(sequence[:, -1])
        lstm = sequence.transpose(1, 2).unsqueeze(1)
        return self._wrap(logits, {'cnn': cnn, 'lstm': lstm})


class TeacherNet(_HintedModel):
    """conv + batch norm + 2x2 max-pool blocks, global-average-pool head"""
    architecture = 'teacher'

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        blocks, in_channels = [], 1
        for out_channels in cfg.channels:
            blocks.append(nn.Sequential(
                nn.Conv2d(in_channels, out_channels, cfg.conv_kernel,
                          padding=cfg.conv_kernel // 2),
                nn.BatchNorm2d(out_channels),
                nn.ReLU(),
                nn.MaxPool2d(2),
            ))
            in_channels = out_channels
        self.blocks = nn.ModuleList(blocks)
        self.fc = nn.Linear(in_channels, cfg.num_classes)
        self.hint_layers = tuple(f'pool{i + 1}' for i in range(len(blocks)))

    def forward_with_hints(self, x):
        x = _as_batch(x, self.cfg.input_mel_bins)
        x = x.to(self.fc.weight.dtype)
        hints = {}
        for name, block in zip(self.hint_layers, self.blocks):
            x = block(x)
            hints[name] = x
        logits = self.fc(x.mean(dim=(2, 3)))
        return self._wrap(logits, hints)


def _init_uniform_fan_in(model, seed):
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias"""
    generator = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, (nn.Conv2d, nn.Linear)):
                bound = 1.0 / math.sqrt(module.weight[0].numel())
                module.weight.uniform_(-bound, bound, generator=generator)
                module.bias.uniform_(-bound, bound, generator=generator)
            elif isinstance(module, nn.LSTM):
                bound = 1.0 / math.sqrt(module.hidden_size)
                for param in module.parameters():
                    param.uniform_(-bound, bound, generator=generator)
            elif isinstance(module, nn.BatchNorm2d):
                module.reset_parameters()


def _finish(model, seed, dtype):
    _init_uniform_fan_in(model, seed)
    model.seed = int(seed)
    return model.to(dtype)


def build_student(cfg, seed, dtype=torch.float32):
    if not isinstance(cfg, StudentConfig):
        raise ConfigurationError('build_student needs a StudentConfig')
    return _finish(StudentNet(cfg), seed, dtype)


def build_teacher(cfg, seed, dtype=torch.float32):
    if not isinstance(cfg, TeacherConfig):
        raise ConfigurationError('build_teacher needs a TeacherConfig')
    return _finish(TeacherNet(cfg), seed, dtype)


def forward_with_hints(m, x):
    """``(probs, hints, logits)`` for a batch or a single spectrogram"""
    return m.forward_with_hints(x)


def count_params(m):
    """exact number of learnable scalars"""
    return sum(p.numel() for p in m.parameters() if p.requires_grad)


def count_flops(m, input_shape):
    """2 x multiply-accumulates of conv, LSTM and linear layers for one input

    ``input_shape`` is ``(mel_bins, frames)``.
    """
    macs = []

    def conv_hook(module, inputs, output):
        per_output = module.in_channels // module.groups \
            * module.kernel_size[0] * module.kernel_size[1]
        macs.append(output.numel() * per_output)

    def linear_hook(module, inputs, output):
        macs.append(output.numel() * module.in_features)

    def lstm_hook(module, inputs, output):
        steps = inputs[0].shape[1]
        hidden = module.hidden_size
        macs.append(steps * 4 * hidden * (module.input_size + hidden))

    hooks = []
    for module in m.modules():
        if isinstance(module, nn.Conv2d):
            hooks.append(module.register_forward_hook(conv_hook))
        elif isinstance(module, nn.Linear):
            hooks.append(module.register_forward_hook(linear_hook))
        elif isinstance(module, nn.LSTM):
            hooks.append(module.register_forward_hook(lstm_hook))

    dtype = next(m.parameters()).dtype
    was_training = m.training
    m.eval()
    try:
        with torch.no_grad():
            m(torch.zeros((1, 1, *input_shape), dtype=dtype))
    finally:
        for hook in hooks:
            hook.remove()
        m.train(was_training)
    return 2 * sum(macs)


def model_cost(m, input_shape):
    return ModelCost(count_flops(m, input_shape), count_params(m))


def student_param_formula(cfg):
    conv = cfg.conv_filters * cfg.conv_kernel ** 2 + cfg.conv_filters
    lstm_input = cfg.conv_filters * cfg.conv_height
    h = cfg.lstm_hidden
    return conv + 4 * h * (lstm_input + h + 2) + cfg.num_classes * (h + 1)


def teacher_param_formula(cfg):
    total, previous = 0, 1
    for channels in cfg.channels:
        total += previous * channels * cfg.conv_kernel ** 2 + channels
        total += 2 * channels
        previous = channels
    return total + cfg.num_classes * (previous + 1)


def save_checkpoint(model, path, **extra):
    """state dict in the tensor container, architecture in the header

    Entries are little-endian float32, or ``<f8`` for float64 models.
    """
    dtype = next(model.parameters()).dtype
    header = {
        'architecture': model.architecture,
        'config': {key: list(value) if isinstance(value, tuple) else value
                   for key, value in asdict(model.cfg).items()},
        'seed': getattr(model, 'seed', None),
        'dtype': str(dtype).replace('torch.', ''),
        **extra,
    }
    entries = {name: tensor.detach().cpu().double().numpy()
               for name, tensor in model.state_dict().items()}
    write_container(path, entries, header=header,
                    dtype='<f8' if dtype == torch.float64 else '<f4')
    logger.info('saved %s checkpoint to %s', model.architecture, path)
    return path


def load_checkpoint(path):
    """rebuild a model from a checkpoint written by ``save_checkpoint``"""
    entries, header = read_container(path)
    architecture = header.get('architecture')
    if architecture == 'student':
        model = StudentNet(StudentConfig(**header['config']))
    elif architecture == 'teacher':
        model = TeacherNet(TeacherConfig(**header['config']))
    else:
        raise InvalidInputError(f'{path}: unknown architecture '
                                f'{architecture!r}')
    model = model.to(getattr(torch, header.get('dtype', 'float32')))
    state = {}
    for name, target in model.state_dict().items():
        if name not in entries:
            raise InvalidInputError(f'{path}: missing tensor {name}')
        state[name] = torch.from_numpy(entries[name]).to(target.dtype)
    model.load_state_dict(state)
    model.seed = header.get('seed')
    return model, header
