"""Dataset generation and ingestion commands."""

import json
from pathlib import Path

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from idg_lab.cli import app, fail, usage_error
from idg_lab.config import resolve_seed, write_manifest
from idg_lab.constants import DEFAULT_CLUSTER_STD, DEFAULT_PER_CLUSTER, DEFAULT_VAL_FRACTION
from idg_lab.data.dataset import ingest_csv
from idg_lab.data.synthetic import Overlap, SyntheticSpec, gen_synthetic
from idg_lab.utils.error_handler import IdgLabError
from idg_lab.utils.output import print_json


@app.command("gen")
def gen(
    output: Path = typer.Option(..., "--output", "-o", help="CSV file to write"),
    domains: int = typer.Option(4, "--domains", help="Number of domains"),
    labels: int = typer.Option(7, "--labels", help="Number of labels"),
    dims: int = typer.Option(8, "--dims", help="Feature width"),
    overlap: Overlap = typer.Option(Overlap.DISJOINT, "--overlap", help="Domain supports"),
    per_cluster: int = typer.Option(
        DEFAULT_PER_CLUSTER, "--per-cluster", help="Rows per (domain, label)"
    ),
    val_fraction: float = typer.Option(
        DEFAULT_VAL_FRACTION, "--val-fraction", help="Share of each cluster tagged val"
    ),
    cluster_std: float = typer.Option(DEFAULT_CLUSTER_STD, "--cluster-std", help="Cluster spread"),
    seed: int | None = typer.Option(None, "--seed", "-s", help="Random seed"),
) -> None:
    """Generate a synthetic covariate-shift dataset.

    Example:
        idg-lab gen --domains 4 --labels 7 --seed 1 -o data.csv
    """
    try:
        spec = SyntheticSpec(
            n_domains=domains,
            n_labels=labels,
            dims=dims,
            overlap=overlap,
            per_cluster=per_cluster,
            val_fraction=val_fraction,
            cluster_std=cluster_std,
        )
    except ValidationError as e:
        raise usage_error(str(e))
    master = resolve_seed(seed)
    dataset = gen_synthetic(master, spec)
    dataset.write_csv(output)
    write_manifest(output.parent, "gen", {**spec.model_dump(mode="json"), "output": output}, master)
    typer.secho(f"Wrote {len(dataset)} rows to {output}", fg=typer.colors.GREEN)


@app.command("ingest")
def ingest(
    path: Path = typer.Argument(..., help="Embedding CSV (domain,label,split,f0..fk)"),
    output: Path | None = typer.Option(None, "--output", "-o", help="Rewrite the validated CSV here"),
    table: bool = typer.Option(False, "--table", "-t", help="Output as table instead of JSON"),
) -> None:
    """Validate an embedding CSV and report rows per (domain, label, split).

    Example:
        idg-lab ingest embeddings.csv --table
    """
    try:
        dataset = ingest_csv(path)
    except IdgLabError as e:
        raise fail(e)

    counts = dataset.counts()
    if output is not None:
        dataset.write_csv(output)
        write_manifest(output.parent, "ingest", {"path": path, "output": output}, None)
    if table:
        rich_table = Table(title=f"{path.name}: {len(dataset)} rows, width {dataset.width}")
        for column in counts.columns:
            rich_table.add_column(column, style="cyan" if column != "count" else "green")
        for row in counts.itertuples(index=False):
            rich_table.add_row(*[str(v) for v in row])
        Console().print(rich_table)
    else:
        print_json(
            {
                "rows": len(dataset),
                "width": dataset.width,
                "counts": json.loads(counts.to_json(orient="records")),
            }
        )
