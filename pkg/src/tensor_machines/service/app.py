"""HTTP surface: one POST endpoint per operation, JSON bodies from schemas.

Data problems map to 400, optimization failures to 500; everything else is
left to FastAPI's validation (422 on malformed bodies).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..data import DataError
from ..solvers import SolverError
from . import handlers, schemas


def _guarded(fn, req):
    try:
        return fn(req)
    except DataError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except SolverError as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="tensor-machines", version=__version__)

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/train", response_model=schemas.TrainResponse)
    def train(req: schemas.TrainRequest) -> schemas.TrainResponse:
        return _guarded(handlers.run_train, req)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest) -> schemas.EvalResponse:
        return _guarded(handlers.run_eval, req)

    @app.post("/cv", response_model=schemas.CvResponse)
    def cross_validate(req: schemas.CvRequest) -> schemas.CvResponse:
        return _guarded(handlers.run_cv, req)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(req: schemas.BenchRequest) -> schemas.BenchResponse:
        return _guarded(handlers.run_bench_cmd, req)

    @app.post("/bounds", response_model=schemas.BoundsResponse)
    def bounds(req: schemas.BoundsRequest) -> schemas.BoundsResponse:
        return _guarded(handlers.run_bounds, req)

    return app


app = create_app()
