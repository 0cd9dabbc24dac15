"""Linear-probe evaluation and report merging commands."""

import json
from pathlib import Path
from typing import Any

import pandas as pd
import typer
from rich.console import Console
from rich.table import Table

from idg_lab.cli import app, fail, usage_error
from idg_lab.config import resolve_jobs, resolve_seed, write_manifest
from idg_lab.constants import DEFAULT_PROBE_L2, DEFAULT_WRONG_LABEL_WEIGHT, MANIFEST_NAME
from idg_lab.data.dataset import ingest_csv
from idg_lab.data.probe import ProbeMode, ProbeResult, evaluate_all_pairs
from idg_lab.learning.trainer import encode, load_result
from idg_lab.utils.error_handler import IdgLabError, MissingArtifactError
from idg_lab.utils.output import write_json, write_table

PROBE_NAME = "probe.json"
PAIRS_NAME = "pairs.csv"
METRICS = [
    "source_accuracy",
    "source_log_likelihood",
    "target_accuracy_avg",
    "target_accuracy_worst",
    "target_log_likelihood_avg",
    "target_log_likelihood_worst",
]


def _train_params(run: Path) -> dict[str, Any]:
    manifest = run / MANIFEST_NAME
    if not manifest.exists():
        return {}
    return json.loads(manifest.read_text(encoding="utf-8")).get("params", {})


@app.command("probe")
def probe(
    data: Path = typer.Option(..., "--data", help="Dataset CSV"),
    output: Path = typer.Option(..., "--output", "-o", help="Directory for probe.json and pairs.csv"),
    run: Path | None = typer.Option(
        None, "--run", help="Trained run directory (probe raw features when omitted)"
    ),
    mode: ProbeMode = typer.Option(ProbeMode.AVG, "--mode", help="avg or worst-case probe"),
    pairs: str = typer.Option("all", "--pairs", help="Pair set (only 'all')"),
    seeds: int = typer.Option(1, "--seeds", help="Probe seeds, counted up from the master seed"),
    l2: float | None = typer.Option(
        DEFAULT_PROBE_L2, "--l2", help="L2 strength; 0 or less selects it on source validation"
    ),
    sample_weight: float = typer.Option(
        DEFAULT_WRONG_LABEL_WEIGHT, "--sample-weight", help="Weight of wrongly labelled target rows"
    ),
    seed: int | None = typer.Option(None, "--seed", "-s", help="Master seed"),
    jobs: int | None = typer.Option(None, "--jobs", "-j", help="Parallel workers"),
    table: bool = typer.Option(False, "--table", "-t", help="Print the pair grid"),
) -> None:
    """Probe every (source, target) pair of a frozen representation.

    Example:
        idg-lab probe --data data.csv --run runs/cad -o runs/cad/probe --mode worst
    """
    if pairs != "all":
        raise usage_error(f"unsupported pair set {pairs!r}; only 'all' is available")
    if seeds < 1:
        raise usage_error(f"--seeds must be at least 1, got {seeds}")
    master = resolve_seed(seed)
    try:
        dataset = ingest_csv(data)
        if run is not None:
            dataset = encode(load_result(run), dataset)
        result = evaluate_all_pairs(
            dataset,
            mode=mode,
            seeds=[master + k for k in range(seeds)],
            l2=l2 if l2 is not None and l2 > 0 else None,
            sample_weight=sample_weight,
            jobs=resolve_jobs(jobs),
        )
    except IdgLabError as e:
        raise fail(e)

    train_params = _train_params(run) if run is not None else {}
    write_json(output / PROBE_NAME, {"result": result.model_dump(mode="json"), "train": train_params})
    write_table(output / PAIRS_NAME, result.to_frame())
    write_manifest(
        output,
        "probe",
        {
            "data": data,
            "run": run,
            "mode": mode.value,
            "pairs": pairs,
            "seeds": seeds,
            "l2": l2,
            "sample_weight": sample_weight,
        },
        master,
    )
    if table:
        grid = Table(title=f"{mode.value} probe")
        for column in ("source", "target", "accuracy", "log-likelihood"):
            grid.add_column(column, style="cyan")
        for p in result.pairs:
            grid.add_row(
                str(p.source),
                str(p.target),
                f"{p.accuracy_mean:.4f} ± {p.accuracy_se:.4f}",
                f"{p.log_likelihood_mean:.4f} ± {p.log_likelihood_se:.4f}",
            )
        Console().print(grid)
    typer.secho(
        f"worst target log-likelihood {result.target_log_likelihood_worst.mean:.4f}",
        fg=typer.colors.GREEN,
    )


def _report_row(probe_dir: Path) -> dict[str, Any]:
    path = probe_dir / PROBE_NAME
    if not path.exists():
        raise MissingArtifactError(f"No probe result in {probe_dir}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    result = ProbeResult.model_validate(payload["result"])
    train_params = payload.get("train", {})
    row: dict[str, Any] = {
        "run": str(probe_dir),
        "mode": result.mode.value,
        "objective": train_params.get("objective", ""),
        "bottleneck": train_params.get("bottleneck", ""),
        "regime": train_params.get("regime", ""),
        "lam": train_params.get("lam", float("nan")),
    }
    for metric in METRICS:
        aggregate = getattr(result, metric)
        row[metric] = aggregate.mean
        row[f"{metric}_se"] = aggregate.se
    return row


@app.command("report")
def report(
    probes: list[Path] = typer.Argument(..., help="Probe output directories"),
    output: Path = typer.Option(..., "--output", "-o", help="Directory for the merged tables"),
) -> None:
    """Merge probe results into per-run, lambda and regime tables.

    Example:
        idg-lab report runs/sweep/lam_*/probe -o runs/sweep/report
    """
    try:
        rows = [_report_row(p) for p in probes]
    except IdgLabError as e:
        raise fail(e)
    frame = pd.DataFrame(rows)
    write_table(output / "runs.csv", frame)
    by_lambda = frame.dropna(subset=["lam"]).groupby("lam", as_index=False)[METRICS].mean()
    by_regime = frame[frame["regime"] != ""].groupby("regime", as_index=False)[METRICS].mean()
    write_table(output / "lambda.csv", by_lambda)
    write_table(output / "regime.csv", by_regime)
    write_manifest(output, "report", {"probes": [str(p) for p in probes]}, None)
    typer.secho(f"Merged {len(rows)} probe results into {output}", fg=typer.colors.GREEN)
