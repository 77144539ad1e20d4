"""
Commands for evaluating selectors on held-out and scaled-up instances.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import click

from HierarchicalCutSelector import config as cfg
from HierarchicalCutSelector.commands.context import (
    RunContext,
    build_selectors,
    parse_checkpoints,
    parse_selectors,
    pass_run,
)
from HierarchicalCutSelector.generators import generate, load_split
from HierarchicalCutSelector.models.dtos import MethodSummary, SelectorName
from HierarchicalCutSelector.solver.lp import MilpInstance
from HierarchicalCutSelector.utils.services import (
    EvaluationService,
    ReportService,
    format_table,
    write_records_csv,
    write_summary_csv,
)

logger = logging.getLogger(__name__)

DEFAULT_SELECTORS = 'nocuts,random,nv,eff'


def run_evaluation(
    run: RunContext,
    run_id: str,
    instances: Sequence[MilpInstance],
    names: Sequence[SelectorName],
    checkpoints: dict,
    seeds: Sequence[int],
    report_dir: Path,
) -> List[MethodSummary]:
    """Solve, store, and write ``records.csv``, ``summary.csv`` and ``report.txt``."""
    if SelectorName.NOCUTS not in names:
        names = [SelectorName.NOCUTS, *names]
    selectors = build_selectors(names, run.settings, checkpoints)

    service = EvaluationService(run.session)
    service.delete_run(run_id)
    records = service.evaluate(
        run_id, instances, selectors, seeds,
        cfg.solve_config(run.settings), workers=run.settings['WORKERS'],
    )
    write_records_csv(report_dir / 'records.csv', records)

    summaries = ReportService(run.session).summarize(run_id)
    write_summary_csv(report_dir / 'summary.csv', summaries)
    table = format_table(summaries)
    (report_dir / 'report.txt').write_text(table + '\n')
    click.echo(table)
    return summaries


@click.command('evaluate')
@click.option('--data', 'data_dir', required=True, type=click.Path(path_type=Path),
              help='Dataset directory holding split.json.')
@click.option('--selectors', default=DEFAULT_SELECTORS, show_default=True, help='Comma-separated selector names.')
@click.option('--checkpoint', 'checkpoints', multiple=True, help='NAME=PATH for a learned selector.')
@click.option('--seeds', default=None, help='Comma-separated solver seeds (default: EVAL_SEEDS).')
@pass_run
def evaluate_command(
    run: RunContext, data_dir: Path, selectors: str, checkpoints: Tuple[str, ...], seeds: Optional[str]
) -> None:
    """
    Evaluate selectors on the test split: mean (stdev) of Time, Nodes,
    PD gap and PD integral, plus Improvement over NoCuts.
    """
    _, _, test_pool = load_split(data_dir / 'split.json')
    seed_list = run.eval_seeds(seeds)
    report_dir = run.output('evaluate', data_dir.name)
    run_evaluation(
        run, f'eval-{data_dir.name}-{run.config_hash[:8]}', test_pool,
        parse_selectors(selectors), parse_checkpoints(checkpoints), seed_list, report_dir,
    )
    run.write_manifest('evaluate', seed_list, report_dir)


@click.command('generalize')
@click.option('--data', 'data_dir', required=True, type=click.Path(path_type=Path),
              help='Training dataset directory; its generator spec is scaled up.')
@click.option('--selectors', default='nocuts,hem', show_default=True, help='Comma-separated selector names.')
@click.option('--checkpoint', 'checkpoints', multiple=True, help='NAME=PATH for a learned selector.')
@click.option('--scales', default=None, help='Comma-separated size multipliers (default: GENERALIZE_SCALES).')
@click.option('--seeds', default=None, help='Comma-separated solver seeds (default: EVAL_SEEDS).')
@pass_run
def generalize_command(
    run: RunContext,
    data_dir: Path,
    selectors: str,
    checkpoints: Tuple[str, ...],
    scales: Optional[str],
    seeds: Optional[str],
) -> None:
    """Evaluate trained selectors on instances k times larger than the training ones."""
    manifest, _, test_pool = load_split(data_dir / 'split.json')
    names = parse_selectors(selectors)
    checkpoint_map = parse_checkpoints(checkpoints)
    build_selectors(names, run.settings, checkpoint_map)
    seed_list = run.eval_seeds(seeds)

    for scale in cfg.parse_floats(scales if scales is not None else run.settings['GENERALIZE_SCALES']):
        spec = manifest.spec.scaled(scale).model_copy(
            update={'seed': manifest.spec.seed + 1, 'count': max(len(test_pool), 1)}
        )
        instances = generate(spec)
        tag = f'{data_dir.name}_x{scale:g}'
        click.echo(f'Scale x{scale:g}: {len(instances)} instances')
        report_dir = run.output('generalize', tag)
        run_evaluation(run, f'gen-{tag}-{run.config_hash[:8]}', instances, names, checkpoint_map, seed_list, report_dir)
        run.write_manifest('generalize', seed_list, report_dir)
