"""FastAPI entry point with /paths, /run, /runs, /cache/clear, and /health endpoints."""

import asyncio
import logging
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from src.config.settings import settings
from src.diagnostics import LeakcoverError
from src.hdl.loader import load_rtl
from src.ifa.labels import load_target_config, resolve_labels
from src.ifa.paths import cached_paths
from src.pipeline.cache import clear_all_caches
from src.pipeline.runner import run
from src.pipeline.store import get_engine, list_runs, run_records
from src.schemas.report import Report
from src.schemas.run import Limits, RunConfig

logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Startup and shutdown events."""
    logger.info("Starting leakcover service...")
    if settings.persist_reports:
        get_engine()  # Initialize DB
    yield
    logger.info("leakcover service shut down.")


app = FastAPI(
    title="leakcover",
    description="Leakage-path extraction and software-constrained cover checking for RTL designs",
    version="0.1.0",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["http://localhost:5173", "http://127.0.0.1:5173", "http://localhost:8000", "http://127.0.0.1:8000"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# --- Request/Response Models ---


class PathsRequest(BaseModel):
    target: str
    limits: Optional[Limits] = None


class PathSummary(BaseModel):
    id: str
    source: str
    sink: str
    edges: int
    conditional_edges: int
    route: str


class PathsResponse(BaseModel):
    design: str
    paths: list[PathSummary]
    truncated: bool


def _fail(exc: Exception) -> HTTPException:
    if isinstance(exc, LeakcoverError):
        return HTTPException(status_code=422, detail=exc.diagnostic().model_dump())
    logger.error("Request failed: %s", exc, exc_info=True)
    return HTTPException(status_code=500, detail=str(exc))


def _list_paths(request: PathsRequest) -> PathsResponse:
    limits = request.limits or Limits()
    target = load_target_config(request.target)
    netlist, key = load_rtl(target.rtl, target.top)
    labels = resolve_labels(target, netlist)
    paths = cached_paths(netlist, key, labels, limits.max_paths, limits.max_edges)
    return PathsResponse(
        design=netlist.name,
        paths=[
            PathSummary(
                id=p.id,
                source=str(p.source),
                sink=str(p.sink),
                edges=len(p.edges),
                conditional_edges=p.conditional_edges,
                route=p.describe(),
            )
            for p in paths
        ],
        truncated=paths.limited,
    )


# --- Endpoints ---


@app.get("/health")
async def health():
    return {"status": "ok"}


@app.post("/paths", response_model=PathsResponse)
async def paths(request: PathsRequest):
    """Enumerate the leakage paths of a target."""
    try:
        return await asyncio.to_thread(_list_paths, request)
    except Exception as e:
        raise _fail(e)


@app.post("/run", response_model=Report)
async def run_pipeline(config: RunConfig):
    """Run the whole flow; checks happen off the event loop."""
    try:
        return await asyncio.to_thread(run, config)
    except Exception as e:
        raise _fail(e)


@app.get("/runs")
async def runs(limit: int = 20):
    """Stored run summaries, newest first."""
    return {"runs": await asyncio.to_thread(list_runs, limit)}


@app.get("/runs/{run_id}")
async def run_detail(run_id: int):
    records = await asyncio.to_thread(run_records, run_id)
    if not records:
        raise HTTPException(status_code=404, detail=f"run {run_id} not found")
    return {"id": run_id, "records": records}


@app.post("/cache/clear")
async def cache_clear():
    """Clear the netlist and path caches."""
    clear_all_caches()
    return {"status": "caches cleared"}
