"""Typed request and response bodies shared by the HTTP app and the CLI.

Paths in requests are resolved on the machine the service runs on; the CLI
passes its own local paths straight through.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Format = Literal["svm", "csv"]
Task = Literal["reg", "cls"]
Solver = Literal["batch", "stochastic"]


class TrainRequest(BaseModel):
    data: str
    format: Format = "svm"
    label_col: int = 0
    task: Task = "reg"
    degree: int = Field(default=2, ge=1)
    rank: int = Field(default=1, ge=0)
    solver: Solver = "batch"
    lam: float = Field(default=1e-5, ge=0.0)
    alpha: float = Field(default=0.1, gt=0.0)
    seed: int = 0
    epochs: int = Field(default=25, ge=1)
    iters: int = Field(default=200, ge=0)
    minibatches: int | None = Field(default=None, ge=1)
    out: str


class TrainResponse(BaseModel):
    out: str
    trace: str
    iterations: int
    objective: float
    grad_norm: float
    seconds: float
    train_metric: float
    metric_kind: str


class EvalRequest(BaseModel):
    model: str
    data: str
    test: str
    format: Format = "svm"
    label_col: int = 0
    task: Task = "reg"


class EvalResponse(BaseModel):
    value: float
    kind: str
    n_test: int


class CvRequest(BaseModel):
    data: str
    format: Format = "svm"
    label_col: int = 0
    task: Task = "reg"
    degree: int = Field(default=2, ge=1)
    rank: int = Field(default=1, ge=0)
    solver: Solver = "batch"
    lam_grid: list[float] = Field(default=[1e-6, 1e-4, 1e-2], min_length=1)
    alpha_grid: list[float] = Field(default=[0.05, 0.1, 0.2], min_length=1)
    seed: int = 0
    epochs: int = Field(default=25, ge=1)
    iters: int = Field(default=200, ge=0)
    minibatches: int | None = Field(default=None, ge=1)


class CvFoldValue(BaseModel):
    lam: float
    alpha: float
    fold: int
    value: float


class CvResponse(BaseModel):
    best_lam: float
    best_alpha: float
    best_mean: float
    metric_kind: str
    folds: int
    table: list[CvFoldValue]


class BenchRequest(BaseModel):
    data: str
    test: str
    format: Format = "svm"
    label_col: int = 0
    task: Task = "reg"
    degree: int = Field(default=2, ge=1)
    rank: int = Field(default=4, ge=0)
    lam: float = Field(default=1e-5, gt=0.0)
    alpha: float = Field(default=0.1, gt=0.0)
    seed: int = 0
    trials: int = Field(default=3, ge=1)
    krr_cap: int = Field(default=40000, ge=1)
    max_sweeps: int = Field(default=8, ge=1)
    minibatches: int | None = Field(default=None, ge=1)
    methods: list[str] = Field(
        default=["tm-batch", "tm-stochastic", "kk", "craftmaps", "krr", "fm2"],
        min_length=1,
    )


class BenchRowModel(BaseModel):
    method: str
    err: float | None
    seconds: float | None
    relerr: float | None
    reltime: float | None
    major_param: int | None
    status: str
    seeds: list[int]


class BenchResponse(BaseModel):
    rows: list[BenchRowModel]


class BoundsRequest(BaseModel):
    dim: int = Field(default=3, ge=1)
    points: int = Field(default=20, ge=1)
    degree: int = Field(default=2, ge=1)
    ball: float = Field(default=1.0, gt=0.0)
    draws: int = Field(default=200, ge=1)
    seed: int = 0
    data: str | None = None
    format: Format = "svm"
    label_col: int = 0


class BoundsDraw(BaseModel):
    draw: int
    lower: float
    upper: float
    max_entry_lhs: float


class BoundsResponse(BaseModel):
    draws: list[BoundsDraw]
    rhs: float
    lower_mean: float
    upper_mean: float
    max_entry_mean: float
