"""
Command for generating instance corpora.
"""

from typing import Optional, Tuple

import click

from HierarchicalCutSelector import config as cfg
from HierarchicalCutSelector.commands.context import RunContext, pass_run
from HierarchicalCutSelector.generators import generate, write_split
from HierarchicalCutSelector.models.dtos import Family


@click.command('generate')
@click.option('--family', 'families', multiple=True, type=click.Choice([f.value for f in Family]),
              help='Instance family; repeat for several (default: all three).')
@click.option('--count', type=int, default=None, help='Instances per family (default: INSTANCE_COUNT).')
@click.option('--scale', type=float, default=1.0, show_default=True, help='Multiply every size parameter.')
@pass_run
def generate_command(run: RunContext, families: Tuple[str, ...], count: Optional[int], scale: float) -> None:
    """
    Generate instances and an 80/20 train/test split per family.

    Examples:
        HierarchicalCutSelector --out runs generate --family set_covering --count 50
    """
    chosen = [Family(f) for f in families] or list(Family)
    for family in chosen:
        spec = cfg.gen_spec(run.settings, family, seed=run.seed, count=count)
        if scale != 1.0:
            spec = spec.scaled(scale)
        instances = generate(spec)
        manifest = write_split(instances, run.output(family.value), spec, run.preset)
        click.echo(f'{family.value}: {len(manifest.train)} train / {len(manifest.test)} test '
                   f'-> {run.out_dir / family.value}')
    run.write_manifest('generate', [run.seed])
