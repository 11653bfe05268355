"""
Training harness: one distillation run with early stopping on validation
micro AUPRC, the setup x size x seed suite, and the hint-layer grid search.

Runs are bit-stable for a fixed config in float64: weights come from a
seeded generator, the per-epoch shuffle from a second seed-derived stream,
and losses are reduced in a fixed order (bce, kd, sp, iusp).
"""
import copy
import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
import torch
import yaml
from tqdm import tqdm

from audio.features import FeatureSet
from audio.manifest import load_manifest
from core.exceptions import ConfigurationError, DivergenceError
from distill.evaluation import evaluate, evaluate_model, write_predictions
from distill.losses import (
    COMPONENTS,
    LossWeights,
    Setup,
    bce_loss,
    iusp_loss,
    kd_logit_loss,
    sp_loss,
    total_loss,
)
from distill.networks import (
    HintGrid,
    HintPair,
    StudentConfig,
    StudentNet,
    TeacherConfig,
    build_student,
    build_teacher,
    save_checkpoint,
)

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 16
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
TEACHER_GATE = 0.85

DEFAULT_HINTS = {
    Setup.BCE_KD_SP: {'sp': HintPair('pool2', 'cnn')},
    Setup.BCE_KD_IUSP: {'iusp': HintPair('pool1', 'cnn')},
    Setup.BCE_KD_SP_IUSP: {'sp': HintPair('pool2', 'cnn'),
                           'iusp': HintPair('pool2', 'cnn')},
}


def derive_seed(seed, tag):
    digest = hashlib.sha256(f'{seed}:{tag}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') >> 1


@dataclass(frozen=True)
class TrainConfig:
    """one run; ``weights`` holds the base alphas, the setup masks them"""
    setup: Setup = Setup.BCE
    lstm_hidden: int = 32
    lr: float = 1e-4
    max_epochs: int = 300
    patience: int = 20
    batch_size: int = DEFAULT_BATCH_SIZE
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    hint_sp: HintPair | None = None
    hint_iusp: HintPair | None = None
    precision: str = 'float32'

    def __post_init__(self):
        object.__setattr__(self, 'setup', Setup(self.setup))
        if self.max_epochs < 0 or self.patience < 0:
            raise ConfigurationError('max_epochs and patience must be >= 0')
        if self.max_epochs and self.patience >= self.max_epochs:
            raise ConfigurationError('patience must be below max_epochs')
        if self.batch_size < 1:
            raise ConfigurationError('batch_size must be >= 1')
        if self.lr < 0:
            raise ConfigurationError('lr must be >= 0')
        if self.precision not in ('float32', 'float64'):
            raise ConfigurationError(
                f'precision must be float32 or float64, got {self.precision}')
        if not any(self.effective_weights.alpha(name) for name in COMPONENTS):
            raise ConfigurationError(
                f'setup {self.setup.value} has every alpha at zero')
        StudentConfig(lstm_hidden=self.lstm_hidden)

    @property
    def dtype(self):
        return getattr(torch, self.precision)

    @property
    def effective_weights(self):
        return self.weights.for_setup(self.setup)

    def hint_for(self, loss):
        """configured hint pair for 'sp' or 'iusp', else the default pair"""
        configured = self.hint_sp if loss == 'sp' else self.hint_iusp
        if configured is not None:
            return configured
        defaults = DEFAULT_HINTS.get(self.setup, {})
        return defaults.get(loss) or DEFAULT_HINTS[Setup.BCE_KD_SP_IUSP][loss]

    def to_dict(self):
        weights = self.weights
        return {
            'setup': self.setup.value,
            'lstm_hidden': self.lstm_hidden,
            'seed': self.seed,
            'batch_size': self.batch_size,
            'lr': self.lr,
            'max_epochs': self.max_epochs,
            'patience': self.patience,
            'alphas': {name: weights.alpha(name) for name in COMPONENTS},
            'kd_temperature': weights.kd_temperature,
            'gamma': weights.squash.gamma,
            'delta': weights.squash.delta,
            'hint_sp': str(self.hint_for('sp')),
            'hint_iusp': str(self.hint_for('iusp')),
            'precision': self.precision,
        }


@dataclass
class Splits:
    train: object
    val: object
    test: object


@dataclass
class RunResult:
    best_val_micro_auprc: float
    best_epoch: int
    test_micro_auprc: float
    classwise: np.ndarray
    loss_history: list
    stopped_epoch: int
    model: object = field(default=None, compare=False, repr=False)
    test_predictions: object = field(default=None, compare=False, repr=False)

    def summary(self):
        row = {
            'best_val_micro_auprc': self.best_val_micro_auprc,
            'best_epoch': self.best_epoch,
            'stopped_epoch': self.stopped_epoch,
            'test_micro_auprc': self.test_micro_auprc,
        }
        row.update({f'auprc_{i}': value
                    for i, value in enumerate(self.classwise.tolist())})
        return row


class RunRecorder:
    """writes a run directory: run.yaml, steps.tsv, epochs.csv, result.csv,
    test_predictions.csv and best.ckpt"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._steps = None

    def start(self, cfg, **extra):
        manifest = {
            **cfg.to_dict(),
            'optimizer': {'name': 'adam', 'betas': list(ADAM_BETAS),
                          'eps': ADAM_EPS},
            'torch': str(torch.__version__),
            **extra,
        }
        with open(self.out_dir / 'run.yaml', 'w', encoding='utf-8') as fh:
            yaml.safe_dump(manifest, fh, sort_keys=False)
        self._steps = open(self.out_dir / 'steps.tsv', 'w', encoding='utf-8')
        self._steps.write('\t'.join(('step', *COMPONENTS, 'total')) + '\n')

    def step(self, step, components, total):
        if self._steps is None:
            return
        values = [repr(float(components[name])) for name in COMPONENTS]
        self._steps.write('\t'.join((str(step), *values,
                                     repr(float(total)))) + '\n')

    def finish(self, result):
        if self._steps is not None:
            self._steps.close()
            self._steps = None
        pd.DataFrame(result.loss_history).to_csv(
            self.out_dir / 'epochs.csv', index=False, lineterminator='\n',
            float_format='%.17g')
        pd.DataFrame([result.summary()]).to_csv(
            self.out_dir / 'result.csv', index=False, lineterminator='\n',
            float_format='%.17g')
        if result.test_predictions is not None:
            write_predictions(result.test_predictions,
                              self.out_dir / 'test_predictions.csv')
        if result.model is not None:
            save_checkpoint(result.model, self.out_dir / 'best.ckpt')

    def abort(self):
        if self._steps is not None:
            self._steps.close()
            self._steps = None


def _inputs(model, features, dtype):
    values = features.teacher_inputs if model.architecture == 'teacher' \
        else features.student_inputs
    return torch.as_tensor(values, dtype=dtype)


def _distillation_terms(out, teacher_out, weights, cfg, dtype):
    terms = {}
    if weights.alpha_kd:
        terms['kd'] = kd_logit_loss(out.logits, teacher_out.logits.to(dtype),
                                    weights.kd_temperature)
    teacher_hints = {name: hint.values.to(dtype)
                     for name, hint in teacher_out.hints.items()}
    if weights.alpha_sp:
        terms['sp'] = sp_loss(teacher_hints, out.hints, [cfg.hint_for('sp')])
    if weights.alpha_iusp:
        pair = cfg.hint_for('iusp')
        terms['iusp'] = iusp_loss(teacher_hints[pair.teacher],
                                  out.hints[pair.student],
                                  weights.squash)
    return terms


def _val_auprc(model, features, batch_size):
    return evaluate(evaluate_model(model, features, batch_size)).micro_auprc


def _fit(model, cfg, data, teacher=None, recorder=None):
    """Adam on the setup's total loss with patience-based early stopping"""
    dtype = cfg.dtype
    weights = cfg.effective_weights
    use_teacher = weights.needs_teacher()
    if use_teacher:
        if teacher is None:
            raise ConfigurationError(
                f'setup {cfg.setup.value} needs a teacher')
        teacher.eval()

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr,
                                 betas=ADAM_BETAS, eps=ADAM_EPS)
    shuffle = torch.Generator().manual_seed(derive_seed(cfg.seed, 'shuffle'))
    x_train = _inputs(model, data.train, dtype)
    x_teacher = torch.as_tensor(data.train.teacher_inputs) \
        if use_teacher else None
    y_train = torch.as_tensor(data.train.labels, dtype=dtype)

    best_val = _val_auprc(model, data.val, cfg.batch_size)
    best_epoch, stale, epoch = 0, 0, 0
    best_state = copy.deepcopy(model.state_dict())
    history = [{'epoch': 0, 'val_micro_auprc': best_val,
                **{name: math.nan for name in (*COMPONENTS, 'total')}}]
    logger.info('%s hidden=%d seed=%d: initial val micro AUPRC %.4f',
                cfg.setup.value, cfg.lstm_hidden, cfg.seed, best_val)

    step = 0
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        sums = dict.fromkeys((*COMPONENTS, 'total'), 0.0)
        batches = 0
        order = torch.randperm(len(data.train), generator=shuffle)
        for batch in torch.split(order, cfg.batch_size):
            step += 1
            out = model.forward_with_hints(x_train[batch])
            components = {'bce': bce_loss(out.probs, y_train[batch])}
            if use_teacher:
                with torch.no_grad():
                    teacher_out = teacher.forward_with_hints(
                        x_teacher[batch].to(next(teacher.parameters()).dtype))
                components.update(_distillation_terms(out, teacher_out,
                                                      weights, cfg, dtype))
            loss = total_loss(components, weights)

            if not torch.isfinite(loss.total):
                record = {'epoch': epoch, 'step': step, **loss.components}
                if recorder:
                    recorder.abort()
                raise DivergenceError(
                    f'non-finite loss at epoch {epoch} step {step}: '
                    f'{loss.components}', record=record)

            optimizer.zero_grad()
            loss.total.backward()
            optimizer.step()

            if recorder:
                recorder.step(step, loss.components, loss.total)
            for name, value in loss.components.items():
                sums[name] += value
            sums['total'] += float(loss.total)
            batches += 1
            logger.debug('step %d: %s', step, loss.components)

        val = _val_auprc(model, data.val, cfg.batch_size)
        history.append({'epoch': epoch, 'val_micro_auprc': val,
                        **{k: v / max(batches, 1) for k, v in sums.items()}})
        if val > best_val:
            best_val, best_epoch, stale = val, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
        logger.info('epoch %d: val micro AUPRC %.4f (best %.4f @ %d)',
                    epoch, val, best_val, best_epoch)
        if stale > cfg.patience:
            logger.info('early stop at epoch %d: no improvement for %d '
                        'epochs', epoch, stale)
            break

    model.load_state_dict(best_state)
    model.eval()
    predictions = evaluate_model(model, data.test, cfg.batch_size)
    test = evaluate(predictions)
    result = RunResult(best_val, best_epoch, test.micro_auprc,
                       test.classwise, history, epoch, model, predictions)
    if recorder:
        recorder.finish(result)
    return result


def train_once(cfg, data, teacher=None, recorder=None):
    """train one student; the teacher stays frozen and is only used when
    a distillation term has a nonzero alpha"""
    student = build_student(StudentConfig(lstm_hidden=cfg.lstm_hidden),
                            cfg.seed, cfg.dtype)
    if recorder:
        recorder.start(cfg, student=asdict(student.cfg))
    return _fit(student, cfg, data, teacher, recorder)


def fit_teacher(cfg, data, teacher_cfg=None, recorder=None):
    """train the teacher stand-in on BCE alone; returns (model, result)"""
    teacher = build_teacher(teacher_cfg or TeacherConfig(), cfg.seed,
                            cfg.dtype)
    cfg = replace(cfg, setup=Setup.BCE)
    if recorder:
        recorder.start(cfg, architecture='teacher')
    result = _fit(teacher, cfg, data, recorder=recorder)
    if result.test_micro_auprc < TEACHER_GATE:
        logger.warning('teacher test micro AUPRC %.4f is below the %.2f '
                       'gate', result.test_micro_auprc, TEACHER_GATE)
    return result.model, result


@dataclass
class SuiteCell:
    setup: Setup
    lstm_hidden: int
    seed: int
    result: RunResult | None = None
    error: str | None = None
    run_dir: str = ''


def _run_cells(cells, base_cfg, data, teacher, jobs, out_dir, train,
               overrides=None):
    """train every cell; failures are recorded and the rest continue"""
    if teacher is not None:
        teacher.eval()

    def work(cell):
        cfg = replace(base_cfg, setup=cell.setup,
                      lstm_hidden=cell.lstm_hidden, seed=cell.seed,
                      **(overrides or {}))
        recorder = None
        if out_dir is not None:
            run_dir = Path(out_dir) / (
                f'{cell.setup.value.replace("+", "_")}'
                f'-h{cell.lstm_hidden}-s{cell.seed}')
            cell.run_dir = str(run_dir)
            recorder = RunRecorder(run_dir)
        try:
            cell.result = train(cfg, data, teacher, recorder)
        except Exception as exc:
            cell.error = f'{type(exc).__name__}: {exc}'
            if recorder:
                recorder.abort()
            logger.warning('run %s h=%d seed=%d failed: %s',
                           cell.setup.value, cell.lstm_hidden, cell.seed,
                           cell.error)
        return cell

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(tqdm(pool.map(work, cells), total=len(cells),
                         desc='runs', unit='run'))


def run_setup_suite(base_cfg, setups, seeds, lstm_sizes, data, teacher=None,
                    jobs=1, out_dir=None, train=train_once):
    """the full setups x sizes x seeds cross product"""
    if not setups or not seeds or not lstm_sizes:
        raise ConfigurationError('setups, seeds and lstm sizes must be '
                                 'non-empty')
    cells = [SuiteCell(Setup(setup), int(size), int(seed))
             for setup in setups for size in lstm_sizes for seed in seeds]
    return _run_cells(cells, base_cfg, data, teacher, jobs, out_dir, train)


def summarize_suite(cells):
    """mean, SEM and improvement over BCE per (setup, lstm_hidden)"""
    rows = [{'setup': c.setup.value, 'lstm_hidden': c.lstm_hidden,
             'seed': c.seed, 'test_micro_auprc': c.result.test_micro_auprc}
            for c in cells if c.result is not None]
    return summarize_scores(pd.DataFrame(
        rows, columns=['setup', 'lstm_hidden', 'seed', 'test_micro_auprc']))


def summarize_scores(frame):
    """the same table from a frame of (setup, lstm_hidden, test_micro_auprc)
    rows; rows without a score are ignored"""
    columns = ['setup', 'lstm_hidden', 'n', 'mean', 'sem',
               'improvement_over_bce', 'percent_increase_over_sp']
    frame = frame[frame.test_micro_auprc.notna()]
    if frame.empty:
        return pd.DataFrame(columns=columns)

    table = frame.groupby(['setup', 'lstm_hidden'], sort=False) \
        .test_micro_auprc.agg(n='count', mean='mean', sem='sem') \
        .reset_index()
    baseline = table[table.setup == Setup.BCE.value] \
        .set_index('lstm_hidden')['mean']
    table['improvement_over_bce'] = table.apply(
        lambda row: row['mean'] - baseline.get(row.lstm_hidden, math.nan),
        axis=1)
    sp_gain = table[table.setup == Setup.BCE_KD_SP.value] \
        .set_index('lstm_hidden')['improvement_over_bce']

    def percent(row):
        if row.setup != Setup.BCE_KD_SP_IUSP.value:
            return math.nan
        reference = sp_gain.get(row.lstm_hidden, math.nan)
        if not reference or math.isnan(reference):
            return math.nan
        return 100.0 * (row.improvement_over_bce - reference) / reference

    table['percent_increase_over_sp'] = table.apply(percent, axis=1)
    order = {setup.value: i for i, setup in enumerate(Setup)}
    table = table.sort_values(
        ['lstm_hidden', 'setup'], key=lambda col: col.map(order)
        if col.name == 'setup' else -col).reset_index(drop=True)
    return table[columns]


DIRECTIONAL_SETUPS = (Setup.BCE, Setup.BCE_KD_SP, Setup.BCE_KD_SP_IUSP)
DIRECTIONAL_HIDDEN = 32
DIRECTIONAL_MIN_SEEDS = 8
NON_INFERIORITY_MARGIN = 0.005


@dataclass
class DirectionalCheck:
    """mean test micro AUPRC per setup and the two comparisons on it"""
    teacher_auprc: float
    means: dict
    counts: dict
    margin: float = NON_INFERIORITY_MARGIN

    def _mean(self, setup):
        return self.means.get(Setup(setup).value, math.nan)

    @property
    def beats_bce(self):
        return self._mean(Setup.BCE_KD_SP_IUSP) > self._mean(Setup.BCE)

    @property
    def not_worse_than_sp(self):
        return self._mean(Setup.BCE_KD_SP_IUSP) \
            >= self._mean(Setup.BCE_KD_SP) - self.margin

    @property
    def passed(self):
        return self.beats_bce and self.not_worse_than_sp

    def to_frame(self):
        return pd.DataFrame([
            {'check': 'teacher_test_micro_auprc',
             'value': self.teacher_auprc, 'passed': True},
            *({'check': f'mean[{setup.value}]',
               'value': self._mean(setup),
               'passed': self.counts.get(setup.value, 0) > 0}
              for setup in DIRECTIONAL_SETUPS),
            {'check': 'BCE+KD+SP+IUSP > BCE',
             'value': self._mean(Setup.BCE_KD_SP_IUSP)
             - self._mean(Setup.BCE),
             'passed': self.beats_bce},
            {'check': f'BCE+KD+SP+IUSP >= BCE+KD+SP - {self.margin:g}',
             'value': self._mean(Setup.BCE_KD_SP_IUSP)
             - self._mean(Setup.BCE_KD_SP),
             'passed': self.not_worse_than_sp},
        ])


def teacher_test_auprc(teacher, data, batch_size=DEFAULT_BATCH_SIZE):
    teacher.eval()
    return evaluate(evaluate_model(teacher, data.test, batch_size)) \
        .micro_auprc


def directional_check(cells, teacher_auprc=math.nan):
    """compare setup means over the completed cells; a setup without any
    completed run has a NaN mean and fails both comparisons"""
    scores = {}
    for cell in cells:
        if cell.result is not None:
            scores.setdefault(cell.setup.value, []) \
                .append(cell.result.test_micro_auprc)
    return DirectionalCheck(
        teacher_auprc,
        {setup: float(np.mean(values)) for setup, values in scores.items()},
        {setup: len(values) for setup, values in scores.items()})


def run_directional_check(base_cfg, seeds, data, teacher,
                          lstm_hidden=DIRECTIONAL_HIDDEN, jobs=1,
                          out_dir=None, train=train_once):
    """BCE, BCE+KD+SP and BCE+KD+SP+IUSP over every seed at one LSTM size

    Refuses to train when the teacher misses the test AUPRC gate.
    Returns ``(cells, check)``.
    """
    seeds = sorted(set(int(seed) for seed in seeds))
    if len(seeds) < DIRECTIONAL_MIN_SEEDS:
        raise ConfigurationError(
            f'the directional check needs >= {DIRECTIONAL_MIN_SEEDS} seeds, '
            f'got {len(seeds)}')
    if teacher is None:
        raise ConfigurationError('the directional check needs a teacher')
    gate = teacher_test_auprc(teacher, data, base_cfg.batch_size)
    if not gate >= TEACHER_GATE:
        raise ConfigurationError(
            f'teacher test micro AUPRC {gate:.4f} is below the '
            f'{TEACHER_GATE} gate')
    logger.info('teacher test micro AUPRC %.4f passes the gate', gate)

    cells = run_setup_suite(base_cfg, DIRECTIONAL_SETUPS, seeds,
                            [lstm_hidden], data, teacher, jobs=jobs,
                            out_dir=out_dir, train=train)
    check = directional_check(cells, gate)
    logger.info('directional check %s: beats BCE %s, within %.3f of SP %s',
                'passed' if check.passed else 'failed', check.beats_bce,
                check.margin, check.not_worse_than_sp)
    return cells, check


@dataclass
class HintTuning:
    selection: dict
    table: pd.DataFrame


def tune_hint_layers(setup, lstm_sizes, trials_per_cell, data, teacher,
                     base_cfg=None, jobs=1, out_dir=None, train=train_once):
    """pick the hint pair with the best validation micro AUPRC averaged
    over every LSTM size and trial; ties go to the lowest
    (teacher index, student index)"""
    setup = Setup(setup)
    losses = [name for name in ('sp', 'iusp') if name in setup.terms]
    if not losses:
        raise ConfigurationError(
            f'setup {setup.value} has no SP or IUSP term to tune')
    if trials_per_cell < 1 or not lstm_sizes:
        raise ConfigurationError('need >= 1 trial and >= 1 LSTM size')
    base_cfg = base_cfg or TrainConfig()
    grid = HintGrid(tuple(teacher.hint_layers), StudentNet.hint_layers)

    rows = []
    for pair in grid.candidates():
        overrides = {f'hint_{name}': pair for name in losses}
        cells = [SuiteCell(setup, int(size), base_cfg.seed + trial)
                 for size in lstm_sizes for trial in range(trials_per_cell)]
        pair_dir = None if out_dir is None \
            else Path(out_dir) / f'{pair.teacher}-{pair.student}'
        for cell in _run_cells(cells, base_cfg, data, teacher, jobs,
                               pair_dir, train, overrides):
            rows.append({
                'teacher': pair.teacher, 'student': pair.student,
                'lstm_hidden': cell.lstm_hidden, 'seed': cell.seed,
                'val_micro_auprc': math.nan if cell.result is None
                else cell.result.best_val_micro_auprc,
            })

    table = pd.DataFrame(rows)
    best, best_score = None, -math.inf
    for pair in grid.candidates():
        scores = table[(table.teacher == pair.teacher)
                       & (table.student == pair.student)]
        per_size = scores.groupby('lstm_hidden').val_micro_auprc.mean()
        score = per_size.mean()
        if not math.isnan(score) and score > best_score:
            best, best_score = pair, score
    if best is None:
        raise ConfigurationError('every hint-tuning run failed')
    logger.info('best hint pair for %s: %s (mean val AUPRC %.4f)',
                setup.value, best, best_score)
    return HintTuning({name: best for name in losses}, table)


def suite_frame(cells):
    """one row per cell, failed cells included with their error"""
    rows = []
    for cell in cells:
        row = {'setup': cell.setup.value, 'lstm_hidden': cell.lstm_hidden,
               'seed': cell.seed, 'error': cell.error or ''}
        if cell.result is not None:
            row.update(cell.result.summary())
        rows.append(row)
    return pd.DataFrame(rows)


def write_suite_results(cells, out_dir):
    """``suite_results.csv`` per cell and ``summary.csv`` per (setup, size)"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = out_dir / 'suite_results.csv'
    summary = out_dir / 'summary.csv'
    suite_frame(cells).to_csv(results, index=False, lineterminator='\n',
                              float_format='%.17g')
    summarize_suite(cells).to_csv(summary, index=False, lineterminator='\n',
                                  float_format='%.17g')
    logger.info('wrote %s and %s', results, summary)
    return results, summary


def load_splits(data_dir, features_dir=None, jobs=1):
    """train/val/test FeatureSets from a corpus directory

    Cached features are used when ``features_dir`` is given.
    """
    data_dir = Path(data_dir)
    splits = {}
    for split in ('train', 'val', 'test'):
        clips = load_manifest(data_dir / f'{split}.csv', data_dir / 'audio')
        if features_dir is not None:
            splits[split] = FeatureSet.from_cache(clips, features_dir)
        else:
            splits[split] = FeatureSet.from_clips(clips, jobs)
    return Splits(**splits)
