"""Command-line driver: generate synthetic data, train, simulate, serve."""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .data import LoadError, load_dataset, save_dataset, save_schema
from .models import FingerprintError
from .pipeline import ConfigError, RunConfig, load_bundle, train_pipeline
from .policy import (
    Policy,
    PolicyError,
    builtin_programs,
    render_mass_table,
    render_targeted_table,
    simulate_mass,
    simulate_targeted,
)
from .synth import (
    GeneratorError,
    config_provenance,
    default_turnover_scenario,
    generate_population,
)


@click.group()
def main():
    """Employee turnover risk modeling and retention-policy simulation."""


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(), help="output directory")
@click.option("--n", default=1000, show_default=True, help="population size")
@click.option("--base-rate", default=0.2, show_default=True, help="target Terminated share")
@click.option("--noise-scale", default=0.9, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--unlabeled", is_flag=True,
              help="emit a prediction set (labels written as Unknown)")
def generate(out_dir, n, base_rate, noise_scale, seed, unlabeled):
    """Generate a synthetic population from the built-in turnover scenario."""
    try:
        cfg = default_turnover_scenario(
            n=n, base_rate=base_rate, noise_scale=noise_scale, seed=seed
        )
        ds = generate_population(cfg)
    except GeneratorError as e:
        raise click.ClickException(str(e))
    if unlabeled:
        from .data import Dataset, EmployeeRecord, Label

        ds = Dataset(
            ds.schema,
            tuple(EmployeeRecord(r.id, r.values, Label.UNKNOWN, r.year) for r in ds.rows),
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "population.csv")
    save_schema(cfg.schema, out / "schema.json")
    (out / "generator_config.json").write_text(
        json.dumps(config_provenance(cfg), indent=2, sort_keys=True) + "\n"
    )
    click.echo(f"wrote {len(ds)} rows to {out / 'population.csv'}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="run configuration JSON")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="override the config output directory")
def train(config_path, seed, out_dir):
    """Run the full training pipeline and write all artifacts."""
    try:
        doc = json.loads(Path(config_path).read_text())
        cfg = RunConfig.from_dict(doc)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        if out_dir is not None:
            cfg = dataclasses.replace(cfg, out_dir=out_dir)
    except (json.JSONDecodeError, ConfigError, TypeError) as e:
        raise click.ClickException(f"bad config: {e}")
    try:
        artifacts = train_pipeline(cfg)
    except (ConfigError, LoadError, OSError) as e:
        raise click.ClickException(str(e))
    best = artifacts.test_metrics["best_config"]
    click.echo(f"best config: {best['family']} + {best['resampling']['variant']}")
    click.echo(f"test AUC: {artifacts.test_metrics['auc']:.4f}")
    click.echo(f"artifacts in {cfg.out_dir}")


@main.command()
@click.option("--model-dir", required=True, type=click.Path(exists=True),
              help="training output directory containing model.json")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True),
              help="prediction-set CSV (raw schema)")
@click.option("--policy", "policy_paths", multiple=True, type=click.Path(exists=True),
              help="policy document JSON (repeatable)")
@click.option("--builtins/--no-builtins", default=True, show_default=True,
              help="include the stock P1..P5 programs")
@click.option("--targeted/--no-targeted", default=True, show_default=True,
              help="also run the targeted simulation over the menu")
@click.option("--out", "out_dir", required=True, type=click.Path())
def simulate(model_dir, data_path, policy_paths, builtins, targeted, out_dir):
    """Mass and targeted counterfactual simulation against a trained model."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        bundle = load_bundle(Path(model_dir) / "model.json")
        raw = load_dataset(data_path, bundle.raw_schema)
        prediction = bundle.prepare(raw)
    except (LoadError, FingerprintError, json.JSONDecodeError) as e:
        raise click.ClickException(str(e))

    menu: list[Policy] = builtin_programs(bundle.model_schema) if builtins else []
    for p in policy_paths:
        try:
            menu.append(Policy.from_dict(json.loads(Path(p).read_text())))
        except (PolicyError, json.JSONDecodeError) as e:
            raise click.ClickException(f"{p}: {e}")
    if not menu:
        raise click.ClickException("no policies to simulate")

    try:
        mass_reports = [simulate_mass(bundle.model, prediction, p) for p in menu]
    except (PolicyError, FingerprintError) as e:
        raise click.ClickException(str(e))
    mass_doc = {
        "schema_version": 1,
        "reports": [r.to_dict() for r in mass_reports],
    }
    (out / "mass_report.json").write_text(json.dumps(mass_doc, indent=2, sort_keys=True) + "\n")
    (out / "mass_report.txt").write_text(render_mass_table(mass_reports))
    click.echo(render_mass_table(mass_reports))

    if targeted:
        report = simulate_targeted(bundle.model, prediction, menu)
        (out / "targeted_report.json").write_text(
            json.dumps({"schema_version": 1, **report.to_dict()}, indent=2, sort_keys=True) + "\n"
        )
        (out / "targeted_report.txt").write_text(render_targeted_table(report))
        click.echo(render_targeted_table(report))
    click.echo(f"reports in {out}")


@main.command()
@click.option("--model-dir", required=True, type=click.Path(exists=True))
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--ui-dir", type=click.Path(), default=None,
              help="static directory for the browser UI (optional)")
def serve(model_dir, data_path, host, port, ui_dir):
    """Serve the trained model and simulators over HTTP JSON."""
    from .service import create_app, load_state

    try:
        state = load_state(model_dir, data_path)
    except (LoadError, FingerprintError, json.JSONDecodeError) as e:
        raise click.ClickException(f"startup failed: {e}")
    app = create_app(state, ui_dir=ui_dir)
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    sys.exit(main())
