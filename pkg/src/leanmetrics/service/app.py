"""FastAPI application wrapping the core package.

Endpoints orchestrate core functions; no analysis logic lives here. Domain
errors surface as HTTP 400 with the exception class name in the body.
"""
from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import parse_config
from ..corpus import corpus_summary, load_corpus, preprocess_corpus
from ..errors import LeanMetricsError
from ..pipeline import run_experiment, select_filter_subsets
from ..reporting import render_report
from ..scenarios import ScenarioSpec
from ..simplify import (
    choose_k,
    correlation_matrix,
    enumerate_admissible,
    minimum_subset,
    strong_pairs,
    tally_occurrences,
    top_k,
)
from . import schemas


def _load_prepared(manifest: str, lenient: bool):
    return preprocess_corpus(load_corpus(manifest, lenient=lenient))


def create_app() -> FastAPI:
    app = FastAPI(
        title="leanmetrics",
        version=__version__,
        description="Defect-prediction experimentation service",
    )

    @app.exception_handler(LeanMetricsError)
    async def _domain_error(_: Request, exc: LeanMetricsError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.exception_handler(ValueError)
    async def _value_error(_: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": "ValueError", "detail": str(exc)},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(name="leanmetrics", version=__version__)

    @app.post("/corpus/summary", response_model=schemas.SummaryResponse)
    def summary(req: schemas.SummaryRequest) -> schemas.SummaryResponse:
        corpus = _load_prepared(req.manifest, req.lenient)
        rows = [
            schemas.SummaryRow(
                project=p, version=v, instances=n, defective=d, pct_defective=pct
            )
            for p, v, n, d, pct in corpus_summary(corpus)
        ]
        return schemas.SummaryResponse(rows=rows)

    @app.post("/selection/filter", response_model=schemas.SelectResponse)
    def select(req: schemas.SelectRequest) -> schemas.SelectResponse:
        corpus = _load_prepared(req.manifest, req.lenient)
        subsets, _ = select_filter_subsets(corpus, req.bins)
        return schemas.SelectResponse(
            subsets=[schemas.ReleaseSubset(**entry) for entry in subsets]
        )

    @app.post("/selection/topk", response_model=schemas.TopkResponse)
    def topk(req: schemas.TopkRequest) -> schemas.TopkResponse:
        corpus = _load_prepared(req.manifest, req.lenient)
        _, usable = select_filter_subsets(corpus, req.bins)
        if not usable:
            raise LeanMetricsError("no release produced a usable filter subset")
        tally = tally_occurrences(usable)
        chosen_k, curve = choose_k(usable, (1, req.k_max))
        if req.k is not None:
            chosen_k = req.k
        return schemas.TopkResponse(
            tally=tally.as_dict(),
            n_datasets=tally.n_datasets,
            chosen_k=chosen_k,
            subset=list(top_k(tally, chosen_k)),
            curve=[
                schemas.CoveragePointModel(
                    k=p.k, coverage=p.coverage, metrics=list(p.subset)
                )
                for p in curve
            ],
        )

    @app.post("/simplify/minimize", response_model=schemas.MinimizeResponse)
    def minimize(req: schemas.MinimizeRequest) -> schemas.MinimizeResponse:
        corpus = _load_prepared(req.manifest, req.lenient)
        _, usable = select_filter_subsets(corpus, req.bins)
        if not usable:
            raise LeanMetricsError("no release produced a usable filter subset")
        tally = tally_occurrences(usable)
        if req.k is None:
            base_k, _ = choose_k(usable, (1, 10))
            base_k = max(base_k, 2)
        else:
            base_k = req.k
        base = top_k(tally, base_k)
        scenario = ScenarioSpec(
            req.scenario.kind,
            cpdp_max_releases=req.scenario.max_releases,
            cpdp_objective=req.scenario.objective,
            name=req.scenario.name,
        )
        matrix = correlation_matrix(corpus, base, scenario)
        pairs = strong_pairs(matrix, phi=req.phi, signed=req.signed)
        admissible = enumerate_admissible(base, pairs)
        ranked = minimum_subset(admissible, usable)
        return schemas.MinimizeResponse(
            base_subset=list(base),
            matrix=schemas.MatrixModel(
                names=list(matrix.names),
                values=[list(row) for row in matrix.values],
            ),
            strong_pairs=[list(p) for p in pairs],
            combinations=[
                schemas.RankedCombination(metrics=list(c), coverage=cov)
                for c, cov in ranked
            ],
            minimum=list(ranked[0][0]),
            skipped_targets=[list(t) for t in matrix.skipped_targets],
        )

    @app.post("/experiments/run", response_model=schemas.RunResponse)
    def run(req: schemas.RunRequest) -> schemas.RunResponse:
        config = parse_config(req.config, base_dir=req.base_dir)
        result = run_experiment(config, req.out_dir)
        return schemas.RunResponse(
            out_dir=str(result.out_dir),
            row_count=result.row_count,
            artifacts=list(result.artifacts),
            config_hash=result.config_hash,
        )

    @app.post("/reports/render", response_model=schemas.ReportResponse)
    def report(req: schemas.ReportRequest) -> schemas.ReportResponse:
        rendered = render_report(req.result_dir)
        return schemas.ReportResponse(
            report_path=str(rendered.report_path),
            files=list(rendered.files),
            markdown=rendered.markdown,
        )

    return app


app = create_app()
