"""
Command for training the learned selectors.
"""

import csv
from pathlib import Path
from typing import Optional

import click
import numpy as np

from HierarchicalCutSelector import config as cfg
from HierarchicalCutSelector.commands.context import RunContext, pass_run
from HierarchicalCutSelector.generators import hold_out, load_split
from HierarchicalCutSelector.models.dtos import PolicyVariant, RewardKind, TrainConfig
from HierarchicalCutSelector.policies.hem import HemParams
from HierarchicalCutSelector.training.es import es_train_sbp, pool_fitness
from HierarchicalCutSelector.training.trainer import reward_scale, train
from HierarchicalCutSelector.utils.services import TrainingService

METHODS = [v.value for v in PolicyVariant] + ['sbp']


@click.command('train')
@click.option('--data', 'data_dir', required=True, type=click.Path(path_type=Path),
              help='Dataset directory holding split.json.')
@click.option('--method', type=click.Choice(METHODS), default='hem', show_default=True)
@click.option('--epochs', type=int, default=None, help='Override EPOCHS (or ES_GENERATIONS for sbp).')
@pass_run
def train_command(run: RunContext, data_dir: Path, method: str, epochs: Optional[int]) -> None:
    """
    Train HEM (or one of its variants) by policy gradient, or SBP by ES.

    The final and best parameters are written under OUT/train/METHOD/.
    """
    _, train_pool, _ = load_split(data_dir / 'split.json')
    solve_config = cfg.solve_config(run.settings, seed=run.seed)
    out_dir = run.output('train', method)
    run_id = f'train-{method}-{run.config_hash[:8]}-{run.seed}'

    if method == 'sbp':
        overrides = {'generations': epochs} if epochs is not None else {}
        es_config = cfg.es_config(run.settings, seed=run.seed).model_copy(update=overrides)
        kind = RewardKind(run.settings['REWARD'])
        mini_pool = train_pool[:es_config.mini_pool]
        scale = reward_scale(mini_pool, kind, solve_config) if run.settings['NORMALIZE_REWARDS'] else 1.0
        result = es_train_sbp(es_config, pool_fitness(mini_pool, solve_config, kind, scale))
        checkpoint = out_dir / 'best.json'
        result.params.save(checkpoint, {'fitness': result.best_fitness, 'run_id': run_id})
        with open(out_dir / 'es_history.csv', 'w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(['generation', 'fitness'])
            for generation, fitness in enumerate(result.history):
                writer.writerow([generation, repr(fitness)])
        click.echo(f'SBP best fitness {result.best_fitness:.6g} -> {checkpoint}')
    else:
        overrides = {'variant': method, **({'epochs': epochs} if epochs is not None else {})}
        base = cfg.train_config(run.settings, seed=run.seed)
        train_config = TrainConfig.model_validate({**base.model_dump(), **overrides})
        params = HemParams.initialize(
            np.random.default_rng(run.seed), train_config.hidden_size, train_config.variant, train_config.fixed_ratio
        )
        fit_pool, eval_pool = hold_out(train_pool, train_config.eval_size)
        service = TrainingService(run.session)
        result = train(
            params, fit_pool, train_config, solve_config,
            eval_pool=eval_pool, out_dir=out_dir,
            on_epoch=lambda r: service.record_epoch(run_id, r.epoch, r.mean_reward, r.eval_metric, r.wall_time),
        )
        click.echo(f'{method}: {len(result.metrics)} epochs, {result.theta1_updates} ratio-head updates '
                   f'-> {out_dir / "best.json"}')

    run.write_manifest('train', [run.seed], out_dir)
