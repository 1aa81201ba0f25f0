"""
Command-line entry point: ``inpaint-fgt <command> [options]``.

Commands: gen-data, train-lafc, train-fgt, infer, eval, gradcheck.
Exit code 0 on success, 2 on failure; failures also print one line to
stderr::

    ERROR code=<code> command=<name> message="<text>"
"""
from __future__ import annotations

import argparse
import sys
from typing import Any, Dict, List, Optional

from .errors import InpaintError
from .logging import StandardLoggerFactory
from .pipeline_flows import error_code, flow_for
from .run_config import RunConfig
from .workflow import FlowContext, StandardWorkflowManager

EXIT_OK = 0
EXIT_ERROR = 2


def error_line(code: str, command: str, message: str) -> str:
    text = " ".join(str(message).split()).replace('"', '\\"')
    return f'ERROR code={code} command={command} message="{text}"'


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', default=None,
                        help='INI run configuration (default: desk.ini.local, then desk.ini)')
    common.add_argument('--seed', type=int, default=None, help='Override [run] seed')
    common.add_argument('--out', default=None, help='Override [run] out_dir')
    common.add_argument('--scale', type=float, default=None,
                        help='Set iteration counts and milestones to FACTOR x the full schedules')
    common.add_argument('--verbose', '-v', action='store_true', help='Enable debug logging')

    parser = argparse.ArgumentParser(prog='inpaint-fgt',
                                     description='Flow-guided video inpainting at desk scale')
    sub = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    gen = sub.add_parser('gen-data', parents=[common], help='Render the synthetic dataset')
    gen.add_argument('--force', action='store_true', help='Replace an existing dataset directory')

    for name, help_text in (('train-lafc', 'Train the flow-completion network'),
                            ('train-fgt', 'Train the flow-guided transformer')):
        train = sub.add_parser(name, parents=[common], help=help_text)
        train.add_argument('--no-resume', action='store_true', help='Ignore an existing checkpoint')
        train.add_argument('--max-iterations', type=int, default=None,
                           help='Stop after this many iterations in total')

    infer = sub.add_parser('infer', parents=[common], help='Inpaint held-out or external clips')
    infer.add_argument('--frames', default=None, help='External frame directory')
    infer.add_argument('--masks', default=None, help='External mask directory')
    infer.add_argument('--flows', default=None, help='External flow directory (fwd_/bwd_ .flo files)')
    infer.add_argument('--flow-source', choices=('auto', 'lafc', 'clip'), default='auto',
                       help='Complete flows with LAFC, or use the flows the clip carries')
    infer.add_argument('--split', default='heldout', help='Dataset split to inpaint')

    ev = sub.add_parser('eval', parents=[common], help='Compute metrics and report artifacts')
    ev.add_argument('--pred', default=None, help='Prediction root (default: <out>/infer)')
    ev.add_argument('--gt', default=None, help='Ground-truth split (default: <data>/heldout)')

    sub.add_parser('gradcheck', parents=[common], help='Run the finite-difference gradient suite')
    return parser


def _params(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == 'gen-data':
        return {'force': args.force}
    if args.command in ('train-lafc', 'train-fgt'):
        return {'resume': not args.no_resume, 'max_iterations': args.max_iterations}
    if args.command == 'infer':
        return {'frames_dir': args.frames, 'masks_dir': args.masks, 'flows_dir': args.flows,
                'flow_source': args.flow_source, 'split': args.split}
    if args.command == 'eval':
        return {'pred_dir': args.pred, 'gt_dir': args.gt}
    return {}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        config = RunConfig.load(args.config).with_overrides(seed=args.seed, out_dir=args.out, scale=args.scale)
    except (InpaintError, OSError, ValueError) as e:
        print(error_line(error_code(e), command, str(e)), file=sys.stderr)
        return EXIT_ERROR

    logging_config = dict(config.logging)
    logging_config.setdefault('log_file', str(config.out_path / 'run.log'))
    if args.verbose:
        logging_config['level'] = 'DEBUG'
    logger = StandardLoggerFactory().create_logger('inpaint_core', logging_config)

    context = FlowContext(command=command, config=config, params=_params(args), logger=logger)
    try:
        result = StandardWorkflowManager().run(flow_for(command), context)
    finally:
        logger.close()

    if command == 'gradcheck':
        for row in context.params.get('gradcheck', []):
            print(f"{row['check']:<28} {row['max_rel_error']:.3e} {'passed' if row['passed'] else 'FAILED'}")
    if result.get('status') != 'success':
        print(error_line(result.get('code', 'inpaint_error'), command, result.get('error', '')), file=sys.stderr)
        return EXIT_ERROR
    print(result.get('summary', ''))
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
