"""Command-line client for the experimentation service.

Every subcommand speaks HTTP to the service layer. Without ``--server`` the
client mounts the application in-process (no socket, no setup), so the tool
still behaves like a plain batch CLI; with ``--server`` it drives a remote
instance instead.
"""
from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx

from .service import create_app


class ServiceClient:
    """One request per command: remote over HTTP, or the app in-process."""

    def __init__(self, server: str | None):
        self.server = server

    def _request(self, path: str, payload: dict) -> httpx.Response:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                return client.post(path, json=payload)

        async def _go() -> httpx.Response:
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://leanmetrics.local", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(_go())

    def post(self, path: str, payload: dict) -> dict:
        response = self._request(path, payload)
        if response.status_code != 200:
            try:
                body = response.json()
                detail = body.get("detail", response.text)
                error = body.get("error", f"HTTP {response.status_code}")
            except (ValueError, AttributeError):
                detail, error = response.text, f"HTTP {response.status_code}"
            if isinstance(detail, list):  # pydantic validation errors
                detail = "; ".join(
                    f"{'.'.join(str(p) for p in item.get('loc', []))}: {item.get('msg')}"
                    for item in detail
                )
            click.echo(f"error ({error}): {detail}", err=True)
            sys.exit(2)
        return response.json()


def _print_table(header: list[str], rows: list[list[str]]):
    widths = [len(h) for h in header]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    click.echo(fmt.format(*header))
    click.echo(fmt.format(*("-" * w for w in widths)))
    for row in rows:
        click.echo(fmt.format(*row))


server_option = click.option(
    "--server", default=None, metavar="URL",
    help="Base URL of a running service; default runs the service in-process.",
)
manifest_option = click.option(
    "--manifest", "-m", required=True, metavar="PATH",
    help="Corpus manifest (JSON listing projects, versions, CSV paths).",
)
lenient_option = click.option(
    "--lenient", is_flag=True, default=False,
    help="Ignore unknown CSV columns instead of failing.",
)


@click.group()
def main():
    """Defect-prediction experiments with simplified metric sets."""


@main.command()
@server_option
@manifest_option
@lenient_option
def summary(server, manifest, lenient):
    """Per-release instance/defect counts and defect percentage."""
    doc = ServiceClient(server).post(
        "/corpus/summary",
        {"manifest": str(Path(manifest).resolve()), "lenient": lenient},
    )
    _print_table(
        ["project", "version", "instances", "defective", "%defective"],
        [
            [r["project"], r["version"], str(r["instances"]),
             str(r["defective"]), f"{r['pct_defective']:.1f}"]
            for r in doc["rows"]
        ],
    )


@main.command()
@server_option
@manifest_option
@lenient_option
@click.option("--bins", default=10, show_default=True, help="Discretization bins.")
def select(server, manifest, lenient, bins):
    """Per-release filter subsets (greedy correlation-based selection)."""
    doc = ServiceClient(server).post(
        "/selection/filter",
        {"manifest": str(Path(manifest).resolve()), "bins": bins, "lenient": lenient},
    )
    rows = []
    for entry in doc["subsets"]:
        chosen = entry.get("error") or " ".join(entry["metrics"])
        rows.append([entry["project"], entry["version"], chosen])
    _print_table(["project", "version", "selected metrics"], rows)


@main.command()
@server_option
@manifest_option
@lenient_option
@click.option("--k", type=int, default=None, help="Fixed subset size (default: coverage peak).")
@click.option("--k-max", type=int, default=10, show_default=True,
              help="Largest size scanned for the coverage curve.")
@click.option("--bins", default=10, show_default=True)
def topk(server, manifest, lenient, k, k_max, bins):
    """Occurrence tally and the Top-k subset with its coverage curve."""
    doc = ServiceClient(server).post(
        "/selection/topk",
        {"manifest": str(Path(manifest).resolve()), "k": k,
         "k_max": k_max, "bins": bins, "lenient": lenient},
    )
    occupied = sorted(
        ((m, c) for m, c in doc["tally"].items() if c > 0),
        key=lambda mc: (-mc[1], mc[0]),
    )
    _print_table(["metric", "occurrences"], [[m, str(c)] for m, c in occupied])
    click.echo()
    _print_table(
        ["k", "coverage", "metrics"],
        [[str(p["k"]), f"{p['coverage']:.3f}", " ".join(p["metrics"])]
         for p in doc["curve"]],
    )
    click.echo(f"\nchosen k = {doc['chosen_k']}: {' '.join(doc['subset'])}")


@main.command()
@server_option
@manifest_option
@lenient_option
@click.option("--scenario", default="wpdp_nearest", show_default=True,
              help="Scenario whose training pools feed the correlation matrix.")
@click.option("--phi", type=float, default=0.6, show_default=True,
              help="Strong-correlation threshold.")
@click.option("--k", type=int, default=None, help="Top-k base size (default: coverage peak).")
@click.option("--use-abs", is_flag=True, default=False,
              help="Compare |r| against phi instead of the signed value.")
@click.option("--bins", default=10, show_default=True)
def minimize(server, manifest, lenient, scenario, phi, k, use_abs, bins):
    """Correlation matrix, strong pairs, and the ranked admissible combinations."""
    doc = ServiceClient(server).post(
        "/simplify/minimize",
        {"manifest": str(Path(manifest).resolve()),
         "scenario": {"kind": scenario}, "phi": phi, "k": k,
         "signed": not use_abs, "bins": bins, "lenient": lenient},
    )
    names = doc["matrix"]["names"]
    _print_table(
        ["r"] + names,
        [[name] + [f"{v:.3f}" for v in row]
         for name, row in zip(names, doc["matrix"]["values"])],
    )
    pairs = ", ".join("+".join(p) for p in doc["strong_pairs"]) or "none"
    click.echo(f"\nstrong pairs (r > {phi}): {pairs}")
    click.echo(f"admissible combinations: {len(doc['combinations'])}")
    _print_table(
        ["combination", "coverage"],
        [["+".join(c["metrics"]), f"{c['coverage']:.3f}"]
         for c in doc["combinations"][:10]],
    )
    click.echo(f"\nminimum metric subset: {'+'.join(doc['minimum'])}")


@main.command()
@server_option
@click.option("--config", "-c", "config_path", required=True, metavar="PATH",
              help="Experiment config (JSON).")
@click.option("--out", "-o", "out_dir", required=True, metavar="DIR",
              help="Output directory for run artifacts.")
@click.option("--workers", type=int, default=None, help="Override config worker count.")
@click.option("--seed", type=int, default=None, help="Override config seed.")
@click.option("--lenient", is_flag=True, default=None, help="Override config leniency.")
def run(server, config_path, out_dir, workers, seed, lenient):
    """Run the full pipeline: ingest, select, simplify, grid, compare."""
    path = Path(config_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        click.echo(f"error: config file not found: {path}", err=True)
        sys.exit(2)
    except json.JSONDecodeError as exc:
        click.echo(f"error: config is not valid JSON: {exc}", err=True)
        sys.exit(2)
    if workers is not None:
        doc["workers"] = workers
    if seed is not None:
        doc["seed"] = seed
    if lenient is not None:
        doc["lenient"] = lenient
    payload = {
        "config": doc,
        "out_dir": str(Path(out_dir).resolve()),
        "base_dir": str(path.parent.resolve()),
    }
    result = ServiceClient(server).post("/experiments/run", payload)
    click.echo(f"run complete: {result['row_count']} result rows")
    click.echo(f"config hash: {result['config_hash']}")
    click.echo(f"artifacts in {result['out_dir']}:")
    for name in result["artifacts"]:
        click.echo(f"  {name}")


@main.command()
@server_option
@click.option("--results", "-r", "result_dir", required=True, metavar="DIR",
              help="Directory of a finished run.")
@click.option("--quiet", is_flag=True, default=False, help="Write files, skip stdout.")
def report(server, result_dir, quiet):
    """Render markdown tables and boxplot data from a finished run."""
    doc = ServiceClient(server).post(
        "/reports/render", {"result_dir": str(Path(result_dir).resolve())}
    )
    if not quiet:
        click.echo(doc["markdown"])
    click.echo(f"report written to {doc['report_path']}", err=True)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8714, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("leanmetrics.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
