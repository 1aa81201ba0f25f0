#!/usr/bin/env python3
"""
Desk Benchmark Client - End-to-End Inpainting Run

Runs gen-data, train-lafc, train-fgt, infer and eval on one configuration,
then compares the trained pipeline against the Laplacian-fill baseline
(hole PSNR gain, hole EPE ratio). With --ablate it also trains a single-flow
LAFC (local_radius 0) on the same dataset and reports its hole EPE.

Usage:
    python DeskBenchmark.py --config ../../desk.ini --scale 0.01
"""
import argparse
import dataclasses
import logging
import shutil
import sys
from pathlib import Path

# Add framework to path (editable install alternative)
framework_path = Path(__file__).parent.parent.parent / 'src'
if framework_path.exists():
    sys.path.insert(0, str(framework_path))

from inpaint_core import InpaintRunner, RunConfig, read_rows_csv

PIPELINE = ('gen-data', 'train-lafc', 'train-fgt', 'infer', 'eval')
ABLATION = ('train-lafc', 'infer', 'eval')


def setup_logging(verbose: bool = False) -> logging.Logger:
    """Configure logging for the client script."""
    log_file = Path(__file__).parent / 'desk_benchmark.log'
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(log_file)
        ]
    )
    return logging.getLogger('desk_benchmark_client')


def mean_row(metrics_csv: Path) -> dict:
    rows = read_rows_csv(metrics_csv)
    return next(row for row in rows if row['clip'] == '__mean__')


def as_float(value: str):
    return float(value) if value not in ('', None) else None


def run_commands(runner: InpaintRunner, commands, config_path: Path, logger) -> bool:
    for command in commands:
        logger.info(f"[BENCH] inpaint-fgt {command}")
        argv = [command, "--config", str(config_path)]
        if command == 'gen-data':
            argv.append('--force')
        if runner.run(argv) != 0:
            logger.error(f"[BENCH] {command} failed, see run.log in the output directory")
            return False
    return True


def ablation_config(config: RunConfig, out_dir: Path) -> Path:
    """Single-flow LAFC variant reading the main run's dataset."""
    variant = dataclasses.replace(
        config,
        out_dir=str(out_dir),
        data=dataclasses.replace(config.data, external_dir=str(config.data_dir.resolve())),
        lafc=dataclasses.replace(config.lafc, local_radius=0),
    )
    return variant.save(out_dir / 'ablation.ini')


def main():
    repo_root = Path(__file__).resolve().parents[2]
    client_dir = Path(__file__).resolve().parent

    local_config = client_dir / 'desk.ini.local'
    shared_config = repo_root / 'desk.ini'
    default_config = local_config if local_config.exists() else shared_config

    parser = argparse.ArgumentParser(description='Train, inpaint and score a desk run against the baseline')
    parser.add_argument('--config', '-c',
                        default=str(default_config),
                        help='INI run configuration')
    parser.add_argument('--out', default=str(client_dir / 'runs' / 'desk'),
                        help='Run directory')
    parser.add_argument('--scale', type=float, default=None,
                        help='Schedule factor passed to both trainings')
    parser.add_argument('--ablate', action='store_true',
                        help='Also train and score the single-flow LAFC')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Enable verbose logging')

    args = parser.parse_args()
    logger = setup_logging(args.verbose)

    runner = InpaintRunner()
    logger.info("=" * 60)
    logger.info(f"Desk Benchmark Client - inpaint_core {runner.version}")
    logger.info("=" * 60)

    out_dir = Path(args.out)
    config = RunConfig.load(args.config).with_overrides(out_dir=str(out_dir), scale=args.scale)
    resolved = config.save(out_dir / 'benchmark.ini')
    logger.info(f"Resolved configuration written to: {resolved}")

    if not run_commands(runner, PIPELINE, resolved, logger):
        return 1

    model = mean_row(out_dir / 'eval' / 'metrics.csv')
    baseline = mean_row(out_dir / 'eval_baseline' / 'metrics.csv')
    gain = float(model['psnr_hole']) - float(baseline['psnr_hole'])
    epe, epe_base = as_float(model['epe_hole']), as_float(baseline['epe_hole'])

    lines = [
        f"hole PSNR  model {float(model['psnr_hole']):.2f} dB  baseline {float(baseline['psnr_hole']):.2f} dB  "
        f"gain {gain:+.2f} dB ({'ok' if gain >= 3.0 else 'below +3 dB'})",
        f"SSIM       model {float(model['ssim']):.4f}  baseline {float(baseline['ssim']):.4f}",
    ]
    if epe is not None and epe_base:
        ratio = epe / epe_base
        lines.append(f"hole EPE   model {epe:.3f}  baseline {epe_base:.3f}  ratio {ratio:.2f} "
                     f"({'ok' if ratio < 0.5 else 'above 0.5'})")

    if args.ablate:
        ablation_dir = out_dir.parent / f"{out_dir.name}_single_flow"
        ablation_ini = ablation_config(config, ablation_dir)
        # infer needs a transformer; reuse the one trained above
        checkpoints = ablation_dir / "checkpoints"
        checkpoints.mkdir(parents=True, exist_ok=True)
        shutil.copy2(config.checkpoint_dir / "fgt.ckpt", checkpoints / "fgt.ckpt")
        if not run_commands(runner, ABLATION, ablation_ini, logger):
            return 1
        single = as_float(mean_row(ablation_dir / 'eval' / 'metrics.csv')['epe_hole'])
        if epe is not None and single is not None:
            lines.append(f"single-flow LAFC hole EPE {single:.3f} vs {epe:.3f} "
                         f"({'ok' if epe <= single else 'aggregation did not help'})")

    report = out_dir / 'benchmark.txt'
    report.write_text("\n".join(lines) + "\n", encoding='utf-8')

    logger.info("=" * 60)
    logger.info("Summary:")
    for line in lines:
        logger.info(f"  {line}")
    logger.info(f"  Report: {report}")
    logger.info("=" * 60)
    return 0


if __name__ == '__main__':
    sys.exit(main())
