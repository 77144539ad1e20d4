"""
Command for exporting 2-D PCA projections of the cuts each selector picks.
"""

from pathlib import Path
from typing import Optional, Tuple

import click
import numpy as np

from HierarchicalCutSelector.analysis import export_pca_csv, project_selections
from HierarchicalCutSelector.commands.context import (
    RunContext,
    build_selectors,
    parse_checkpoints,
    parse_selectors,
    pass_run,
)
from HierarchicalCutSelector.exceptions import DegenerateState
from HierarchicalCutSelector.features import featurize
from HierarchicalCutSelector.generators import load_split
from HierarchicalCutSelector.models.dtos import LpStatus
from HierarchicalCutSelector.solver.cuts import generate_cuts
from HierarchicalCutSelector.solver.lp import solve_lp


@click.command('pca')
@click.option('--data', 'data_dir', required=True, type=click.Path(path_type=Path),
              help='Dataset directory holding split.json.')
@click.option('--instance', 'instance_name', default=None, help='Test instance name (default: the first one).')
@click.option('--selectors', default='nv,eff,random', show_default=True, help='Comma-separated selector names.')
@click.option('--checkpoint', 'checkpoints', multiple=True, help='NAME=PATH for a learned selector.')
@pass_run
def pca_command(
    run: RunContext, data_dir: Path, instance_name: Optional[str], selectors: str, checkpoints: Tuple[str, ...]
) -> None:
    """Project the root cuts chosen by each selector onto two principal components."""
    _, _, test_pool = load_split(data_dir / 'split.json')
    if not test_pool:
        raise click.ClickException('The test split is empty')
    matches = [inst for inst in test_pool if instance_name in (None, inst.name)]
    if not matches:
        raise click.ClickException(f'No test instance named {instance_name}')
    instance = matches[0]

    lp = solve_lp(instance, run.settings['MAX_LP_ITERATIONS'])
    if lp.status != LpStatus.OPTIMAL:
        raise click.ClickException(f'Root LP of {instance.name} is {lp.status}')
    cuts = generate_cuts(instance, lp)
    state = featurize(instance, lp, cuts)

    factories = build_selectors(parse_selectors(selectors), run.settings, parse_checkpoints(checkpoints))
    selections = {}
    for name, factory in factories.items():
        order = factory().select(state, cuts, np.random.default_rng(run.seed))
        selections[name] = state.matrix[order]

    try:
        projection, labels, on_hull = project_selections(selections)
    except DegenerateState as exc:
        raise click.ClickException(str(exc)) from exc

    out_dir = run.output('pca', instance.name)
    paths = export_pca_csv(out_dir, projection, labels, on_hull)
    flag = ' (degenerate: all selected cuts identical)' if projection.degenerate else ''
    click.echo(f'{len(labels)} selected cuts from {len(cuts)} candidates -> {paths["points"]}{flag}')
    run.write_manifest('pca', [run.seed], out_dir)
