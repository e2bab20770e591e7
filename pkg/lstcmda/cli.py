"""
Command line interface, installed as the ``lstcmda`` console script.

.. code:: text

  lstcmda parse --input S001C002P003R002A013.skeleton --out raw.bin
  lstcmda synth --classes 4 --per-class 32 --out synth.bin
  lstcmda train --data synth.bin --config toy.cfg --out model.bin
  lstcmda eval --data synth.bin --checkpoint model.bin --out joint.scores
  lstcmda ensemble --scores joint.scores bone.scores --setting E2
  lstcmda gradcheck --config tiny.cfg
  lstcmda paramcount --variant first3_last3 --dims 64,64,64,25 --json

Exit codes:

- ``0`` success
- ``1`` a check failed or training diverged
- ``2`` bad input, configuration or flags
- ``3`` a file could not be read or written

"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

import attr
import numpy as np
from returns.io import IOResult, impure_safe
from returns.pipeline import is_successful
from returns.result import Result
from returns.unsafe import unsafe_perform_io
from typing_extensions import Final

from lstcmda.augment import AugmentConfig, apply_pipeline, resolve_partition
from lstcmda.codec import write_container
from lstcmda.config import Sections, read_config, section_of
from lstcmda.data.modality import MODALITIES, JointTopology, with_modality
from lstcmda.data.skeleton import (
    center_on_root,
    parse_ntu_skeleton,
    parse_sample_metadata,
)
from lstcmda.data.storage import (
    ScoreSet,
    read_samples,
    read_scores,
    scores_to_container,
    skeleton_to_container,
    write_samples,
)
from lstcmda.data.synthetic import synth_dataset, synth_long_range_dataset
from lstcmda.ensemble import (
    ENSEMBLES,
    accuracy,
    ensemble_scores,
    fused_scores,
    select_ensemble,
)
from lstcmda.gradcheck import GradcheckConfig, gradcheck, lstc_stack_problem
from lstcmda.lstc import VARIANTS, LongKernelSpec, param_breakdown
from lstcmda.model import (
    ToyModelConfig,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from lstcmda.primitives.exceptions import (
    ConfigurationError,
    LstcError,
    TrainingError,
    UsageError,
)
from lstcmda.train import (
    TrainConfig,
    evaluate,
    predict_scores,
    train,
    write_metrics,
)

EXIT_OK: Final = 0
EXIT_CHECK_FAILED: Final = 1
EXIT_BAD_INPUT: Final = 2
EXIT_IO: Final = 3

logger = logging.getLogger(__name__)

_ValueType = TypeVar('_ValueType')


def unwrap_or_raise(
    container: Union[Result[_ValueType, Any], IOResult[_ValueType, Any]],
) -> _ValueType:
    """
    Value of a successful container, raises the failure otherwise.

    .. code:: python

      >>> from returns.result import Failure, Success
      >>> unwrap_or_raise(Success(1))
      1
      >>> unwrap_or_raise(Failure(UsageError('no')))
      Traceback (most recent call last):
        ...
      lstcmda.primitives.exceptions.UsageError: no

    """
    if isinstance(container, IOResult):
        container = unsafe_perform_io(container)
    if is_successful(container):
        return container.unwrap()
    raise container.failure()


def exit_code(error: Exception) -> int:
    """Maps a failure to the process exit code."""
    if isinstance(error, TrainingError):
        return EXIT_CHECK_FAILED
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_BAD_INPUT


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one command and returns its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in {0, None} else EXIT_BAD_INPUT
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
    )
    try:
        return args.command(args)
    except (LstcError, ValueError, OSError) as exc:
        print('error: {0}'.format(exc), file=sys.stderr)  # noqa: WPS421
        return exit_code(exc)


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per workflow."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--out', type=Path, default=None)
    common.add_argument('--verbose', '-v', action='store_true')

    parser = argparse.ArgumentParser(
        prog='lstcmda',
        description='Long-short term temporal convolution toolkit.',
    )
    commands = parser.add_subparsers(dest='name', required=True)

    parse = commands.add_parser('parse', parents=[common])
    parse.add_argument('--input', type=Path, required=True)
    parse.add_argument('--format', choices=('binary', 'json'), default='binary')
    parse.add_argument('--center', action='store_true')
    parse.set_defaults(command=cmd_parse)

    synth = commands.add_parser('synth', parents=[common])
    synth.add_argument('--classes', type=int, default=4)
    synth.add_argument('--per-class', type=int, default=32)
    synth.add_argument('--frames', type=int, default=32)
    synth.add_argument('--joints', type=int, default=25)
    synth.add_argument('--views', type=int, default=2)
    synth.add_argument('--modality', choices=MODALITIES, default='joint')
    synth.add_argument('--long-range', action='store_true')
    synth.set_defaults(command=cmd_synth)

    augment = commands.add_parser('augment', parents=[common])
    augment.add_argument('--data', type=Path, required=True)
    augment.add_argument('--config', type=Path, default=None)
    augment.set_defaults(command=cmd_augment)

    check = commands.add_parser('gradcheck', parents=[common])
    check.add_argument('--config', type=Path, default=None)
    check.add_argument('--flip-sign', action='append', default=[])
    check.set_defaults(command=cmd_gradcheck)

    fit = commands.add_parser('train', parents=[common])
    fit.add_argument('--data', type=Path, required=True)
    fit.add_argument('--val', type=Path, default=None)
    fit.add_argument('--config', type=Path, default=None)
    fit.add_argument('--metrics', type=Path, default=None)
    fit.set_defaults(command=cmd_train)

    score = commands.add_parser('eval', parents=[common])
    score.add_argument('--data', type=Path, required=True)
    score.add_argument('--checkpoint', type=Path, required=True)
    score.add_argument('--modality', choices=MODALITIES, default='joint')
    score.set_defaults(command=cmd_eval)

    fuse = commands.add_parser('ensemble', parents=[common])
    fuse.add_argument('--scores', type=Path, nargs='+', required=True)
    fuse.add_argument('--setting', choices=sorted(ENSEMBLES), default=None)
    fuse.add_argument('--weights', type=_floats, default=None)
    fuse.set_defaults(command=cmd_ensemble)

    count = commands.add_parser('paramcount', parents=[common])
    count.add_argument('--variant', default='first3_last3')
    count.add_argument('--dims', type=_dims, default=(64, 64, 64, 25))
    count.add_argument('--json', action='store_true')
    count.set_defaults(command=cmd_paramcount)
    return parser


def cmd_parse(args: argparse.Namespace) -> int:
    """Parses one ``.skeleton`` file and stores it as a container."""
    blob = unwrap_or_raise(_read_bytes(args.input))
    metadata = parse_sample_metadata(args.input.name).value_or(None)
    if metadata is None:
        logger.warning('%s does not follow the NTU naming', args.input.name)
    sequence = unwrap_or_raise(parse_ntu_skeleton(blob, metadata=metadata))
    if args.center:
        sequence = center_on_root(sequence)
    print('{0} frames={1} bodies={2} joints={3}'.format(  # noqa: WPS421
        metadata.name if metadata else args.input.stem,
        sequence.frame_count,
        sequence.max_bodies,
        sequence.joint_count,
    ))
    if args.out is not None:
        unwrap_or_raise(write_container(
            args.out, skeleton_to_container(sequence), args.format,
        ))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    """Writes a synthetic dataset, optionally as another modality."""
    seed = 0 if args.seed is None else args.seed
    if args.long_range:
        samples = synth_long_range_dataset(
            args.per_class,
            frames=args.frames,
            joints=args.joints,
            n_views=args.views,
            seed=seed,
        )
    else:
        samples = synth_dataset(
            args.classes,
            args.per_class,
            frames=args.frames,
            joints=args.joints,
            n_views=args.views,
            seed=seed,
        )
    if args.modality != 'joint':
        samples = with_modality(
            samples, args.modality, JointTopology.chain(args.joints),
        )
    logger.info('generated %d samples', len(samples))
    unwrap_or_raise(write_samples(_required_out(args), samples))
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    """Applies one pass of the augmentation pipeline to a sample file."""
    samples = unwrap_or_raise(read_samples(args.data))
    sections = _sections(args.config)
    config = unwrap_or_raise(
        AugmentConfig.from_mapping(section_of(sections, 'augment')),
    )
    if args.seed is not None:
        config = attr.evolve(config, rng_seed=args.seed)
    partition = None
    if samples:
        first = samples[0]
        partition = resolve_partition(
            config, first.x.shape[-1] // first.bodies,
        )
    augmented = apply_pipeline(
        samples, config, np.random.default_rng(config.rng_seed), partition,
    )
    unwrap_or_raise(write_samples(_required_out(args), augmented))
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    """Checks the gradients of a tiny LSTC stack."""
    sections = _sections(args.config)
    config = unwrap_or_raise(
        GradcheckConfig.from_mapping(section_of(sections, 'gradcheck')),
    )
    if args.seed is not None:
        config = attr.evolve(config, seed=args.seed)
    loss_function, params = lstc_stack_problem(config)
    unknown = sorted(set(args.flip_sign) - set(params))
    if unknown:
        raise UsageError('no parameters named {0}'.format(', '.join(unknown)))
    report = gradcheck(
        loss_function,
        params,
        step=config.step,
        rtol=config.rtol,
        atol=config.atol,
        flip_sign=args.flip_sign,
    )
    table = report.format_table()
    print(table)  # noqa: WPS421
    if args.out is not None:
        args.out.write_text(table + '\n', encoding='utf-8')
    if report.passed:
        return EXIT_OK
    worst = report.worst
    print(  # noqa: WPS421
        'gradcheck failed, worst parameter {0} at {1}: {2:.3e}'.format(
            worst.name, worst.worst_index, worst.max_relative_error,
        ),
        file=sys.stderr,
    )
    return EXIT_CHECK_FAILED


def cmd_train(args: argparse.Namespace) -> int:
    """Trains a toy model, writes the checkpoint and the metric log."""
    out = _required_out(args)
    train_samples = unwrap_or_raise(read_samples(args.data))
    if not train_samples:
        raise UsageError('training data is empty')
    val_samples = [] if args.val is None else unwrap_or_raise(
        read_samples(args.val),
    )
    sections = _sections(args.config)
    first = train_samples[0]
    model_config = unwrap_or_raise(ToyModelConfig.from_mapping({
        'in_channels': first.x.shape[0],
        'frames': first.x.shape[1],
        'joints': first.x.shape[2],
        'n_classes': first.y.shape[0],
        **section_of(sections, 'model'),
    }))
    train_config = unwrap_or_raise(
        TrainConfig.from_mapping(section_of(sections, 'train')),
    )
    augment_config = unwrap_or_raise(
        AugmentConfig.from_mapping(section_of(sections, 'augment')),
    )
    if args.seed is not None:
        model_config = attr.evolve(model_config, seed=args.seed)
        train_config = attr.evolve(train_config, seed=args.seed)
        augment_config = attr.evolve(augment_config, rng_seed=args.seed)
    _check_shapes(model_config, first.x.shape, first.y.shape[0])

    model = build_model(model_config)
    report = unwrap_or_raise(train(
        model, train_samples, val_samples, augment_config, train_config,
    ))
    metrics = args.metrics or out.with_suffix('.csv')
    unwrap_or_raise(save_checkpoint(out, model))
    unwrap_or_raise(write_metrics(metrics, report))
    print('final train_acc={0:.4f} val_acc={1}'.format(  # noqa: WPS421
        report.final.train_acc, report.final.val_acc,
    ))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Prints the accuracy of a checkpoint, optionally saves its scores."""
    model = unwrap_or_raise(load_checkpoint(args.checkpoint))
    samples = unwrap_or_raise(read_samples(args.data))
    if not samples:
        raise UsageError('evaluation data is empty')
    print('accuracy {0:.4f}'.format(evaluate(model, samples)))  # noqa: WPS421
    if args.out is not None:
        unwrap_or_raise(write_container(
            args.out,
            scores_to_container(
                predict_scores(model, samples, args.modality),
            ),
        ))
    return EXIT_OK


def cmd_ensemble(args: argparse.Namespace) -> int:
    """Fuses score files and prints the fused accuracy."""
    score_sets: List[ScoreSet] = [
        unwrap_or_raise(read_scores(path)) for path in args.scores
    ]
    if args.setting is not None:
        score_sets = unwrap_or_raise(select_ensemble(args.setting, score_sets))
    predictions = unwrap_or_raise(ensemble_scores(score_sets, args.weights))
    labels = score_sets[0].labels
    print('fused accuracy {0:.4f}'.format(  # noqa: WPS421
        accuracy(predictions, labels),
    ))
    if args.out is not None:
        fused = fused_scores(score_sets, args.weights)
        rows = ['sample_id,prediction,label,confidence']
        rows.extend(
            '{0},{1},{2},{3!r}'.format(
                sample_id, int(predicted), int(label), float(row.max()),
            )
            for sample_id, predicted, label, row in zip(
                score_sets[0].sample_ids, predictions, labels, fused,
            )
        )
        args.out.write_text('\n'.join(rows) + '\n', encoding='utf-8')
    return EXIT_OK


def cmd_paramcount(args: argparse.Namespace) -> int:
    """Prints the learnable parameter counts of one LSTC layer."""
    if args.variant not in VARIANTS:
        raise UsageError('unknown variant {0!r}, expected one of {1}'.format(
            args.variant, ', '.join(VARIANTS),
        ))
    channels, dim, frames, joints = args.dims
    if frames < 2 or frames % 2:
        raise UsageError('T must be even, got {0}'.format(frames))
    spec = LongKernelSpec.build(args.variant, frames // 2)
    breakdown = param_breakdown(channels, channels, dim, joints, spec)
    counts: Dict[str, Any] = {
        'variant': args.variant,
        'taps': list(spec.active_indices),
        **attr.asdict(breakdown),
        'total': breakdown.total,
    }
    if args.json:
        text = json.dumps(counts, sort_keys=True)
    else:
        text = '\n'.join(
            '{0:<12} {1}'.format(key, counts[key]) for key in (
                'variant', 'short', 'long', 'projections', 'mu', 'total',
            )
        )
    print(text)  # noqa: WPS421
    if args.out is not None:
        args.out.write_text(text + '\n', encoding='utf-8')
    return EXIT_OK


def _sections(path: Optional[Path]) -> Sections:
    if path is None:
        return {}
    return unwrap_or_raise(read_config(path))


def _required_out(args: argparse.Namespace) -> Path:
    if args.out is None:
        raise UsageError('{0} needs --out'.format(args.name))
    return args.out


def _check_shapes(
    config: ToyModelConfig,
    shape: Sequence[int],
    classes: int,
) -> None:
    expected = (config.in_channels, config.frames, config.joints)
    if tuple(shape) != expected or classes != config.n_classes:
        raise ConfigurationError(
            'model expects samples {0} with {1} classes, data has {2} '
            'with {3}'.format(
                expected, config.n_classes, tuple(shape), classes,
            ),
        )


@impure_safe
def _read_bytes(path: Path) -> bytes:
    return path.read_bytes()


def _floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma separated numbers')


def _dims(text: str) -> Tuple[int, ...]:
    parts = text.split(',')
    if len(parts) != 4:
        raise argparse.ArgumentTypeError('expected C,D,T,V')
    try:
        dims = tuple(int(part) for part in parts)
    except ValueError:
        raise argparse.ArgumentTypeError('expected four integers')
    if min(dims) < 1:
        raise argparse.ArgumentTypeError('dimensions must be positive')
    return dims
