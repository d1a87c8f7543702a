"""``gridstart`` command line: generate data, train, score, compare pipelines, benchmark SLP warm starts.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.
"""
from __future__ import annotations

import sys
from functools import wraps
from pathlib import Path

import click

from . import bench
from .ml.data import load_dataset, save_dataset
from .ml.models import FAMILIES, ModelFormatError, load_model, save_model, with_meta
from .ml.search import tune_and_fit
from .network import three_bus_case
from .powerflow import PowerFlowError
from .scenarios import DatasetError, SamplingSpec, build_dataset, sample_scenarios

VARIANTS = ("non_congested", "congested")
RUNTIME_ERRORS = (DatasetError, ModelFormatError, PowerFlowError, OSError, ValueError, RuntimeError)

variant_option = click.option("--variant", type=click.Choice(VARIANTS), default="non_congested", show_default=True)
seed_option = click.option("--seed", type=int, default=0, show_default=True)


def runtime_failures(fn):
    """Report expected runtime failures as one line on stderr with exit status 1."""
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except RUNTIME_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")


@click.group()
def main():
    """Learned warm starts for ACOPF on the three-bus benchmark."""


@main.command()
@variant_option
@click.option("--count", type=click.IntRange(min=1), default=300, show_default=True)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@runtime_failures
def generate(variant, count, seed, out):
    """Sample load scenarios, solve each with the ACOPF oracle and write the dataset CSV."""
    case = three_bus_case(variant)
    scenarios = sample_scenarios(SamplingSpec(count, seed=seed))
    data, dropped = build_dataset(case, scenarios)
    save_dataset(data, out)
    click.echo(f"{variant}: {data.n} feasible, {dropped} infeasible -> {out}")


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", type=click.Choice(FAMILIES), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--folds", type=int, default=5, show_default=True)
@seed_option
@click.option("--variant", type=click.Choice(VARIANTS), default=None, help="Tag the model with its training variant.")
@runtime_failures
def train(dataset, family, out, folds, seed, variant):
    """Grid-search FAMILY on DATASET per target and save the refitted model."""
    data = load_dataset(dataset)
    if folds < 2:
        raise click.UsageError("--folds must be at least 2")
    if folds > data.n:
        raise click.UsageError(f"folds exceed samples ({folds} > {data.n})")
    model, results = tune_and_fit(family, data, folds=folds, seed=seed)
    if variant:
        model = with_meta(model, variant=variant)
    save_model(model, out)
    for target, res in results.items():
        body = [[str(s.params) if s.params else "-", s.mean] for s in res.scores]
        click.echo(f"\n{target}: best {res.best_params or '-'} (CV R² {res.best_score:.4f})")
        click.echo(bench.render_table(["params", "cv_r2"], body, digits=4))
    click.echo(f"\nmodel -> {out}")


@main.command()
@click.argument("train_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("test_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--family", "families", type=click.Choice(FAMILIES), multiple=True,
              help="Repeatable; defaults to every family.")
@click.option("--folds", type=int, default=5, show_default=True)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@runtime_failures
def accuracy(train_path, test_path, families, folds, seed, out):
    """Held-out 100·R² per family and target."""
    tr, te = load_dataset(train_path), load_dataset(test_path)
    if folds < 2 or folds > tr.n:
        raise click.UsageError(f"folds exceed samples ({folds} > {tr.n})" if folds > tr.n else "--folds must be at least 2")
    shared = {tuple(x) for x in tr.X} & {tuple(x) for x in te.X}
    if shared:
        click.echo(f"warning: {len(shared)} test feature rows also appear in the training set", err=True)
    rows, _ = bench.accuracy(tr, te, families or FAMILIES, folds, seed)
    click.echo(bench.accuracy_table(rows))
    _emit(bench.rows_to_csv(rows, bench.AccuracyRow), out)


def _load_for(variant, model_path):
    model = load_model(model_path)
    tagged = model.meta.get("variant")
    if tagged and tagged != variant:
        click.echo(f"warning: model was trained on {tagged}, running on {variant}", err=True)
    return three_bus_case(variant), model


@main.command()
@variant_option
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n-test", type=click.IntRange(min=1), default=15, show_default=True)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@runtime_failures
def compare(variant, model_path, n_test, seed, out):
    """Oracle cost against the ML+PF and DCOPF+PF pipelines on fresh scenarios."""
    case, model = _load_for(variant, model_path)
    rows = bench.compare(case, model, sample_scenarios(SamplingSpec(n_test, seed=seed)))
    click.echo(bench.table_of(rows, bench.ComparisonRow))
    summary = bench.comparison_summary(rows)
    click.echo("\nmean " + "  ".join(f"{k}={v:.3f}" for k, v in summary.items()))
    _emit(bench.rows_to_csv(rows, bench.ComparisonRow), out)


@main.command()
@variant_option
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n-test", type=click.IntRange(min=1), default=15, show_default=True)
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@runtime_failures
def warmstart(variant, model_path, n_test, seed, out):
    """SLP iterations from flat, DCOPF+PF, ML+PF and oracle initializations."""
    case, model = _load_for(variant, model_path)
    rows = bench.warm_start(case, model, sample_scenarios(SamplingSpec(n_test, seed=seed)))
    click.echo(bench.table_of(rows, bench.WarmStartRow))
    med = {init: bench.median_iterations(rows, init) for init in bench.INITIALIZATIONS}
    click.echo("\nmedian iterations " + "  ".join(f"{k}={v:g}" for k, v in med.items()))
    _emit(bench.rows_to_csv(rows, bench.WarmStartRow), out)


if __name__ == "__main__":
    main()
