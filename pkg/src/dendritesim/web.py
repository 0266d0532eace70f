"""FastAPI web server: upload a netlist, download the simulated trace."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import TypeVar

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import HTMLResponse, Response
from fastapi.templating import Jinja2Templates
from starlette.concurrency import run_in_threadpool
from starlette.requests import Request

from . import __version__
from .model import ModelError
from .netlist import ParseError, parse
from .transient import Method, SimConfig, SimulationDivergedError, simulate
from .utils import parse_si

MAX_UPLOAD_SIZE = 1024 * 1024
# Upper bound on solver steps per request.
MAX_STEPS = 5_000_000

T = TypeVar("T")

app = FastAPI(title="dendritesim", version=__version__)

_templates_dir = Path(__file__).parent / "templates"
templates = Jinja2Templates(directory=str(_templates_dir))


def _optional(text: str | None, convert: Callable[[str], T]) -> T | None:
    """Blank form fields fall through to the netlist and built-in defaults."""
    if text is None or not text.strip():
        return None
    return convert(text.strip())


@app.get("/", response_class=HTMLResponse)
async def index(request: Request) -> Response:
    """Serve the netlist upload page."""
    return templates.TemplateResponse(
        request,
        "index.html",
        {"version": __version__, "methods": [m.value for m in Method]},
    )


@app.get("/health")
async def health() -> dict[str, str]:
    """Health check endpoint."""
    return {"status": "ok"}


@app.post("/simulate")
async def simulate_netlist(
    file: UploadFile = File(...),  # noqa: B008
    duration: str | None = Form(default=None),
    dt: str | None = Form(default=None),
    method: str | None = Form(default=None),
    stride: str | None = Form(default=None),
) -> Response:
    """Simulate an uploaded netlist and return the listed channels as CSV."""
    if not file.filename:
        raise HTTPException(status_code=400, detail="No file provided.")

    content = await file.read()
    if len(content) > MAX_UPLOAD_SIZE:
        raise HTTPException(
            status_code=413,
            detail=f"Netlist too large. Maximum size is {MAX_UPLOAD_SIZE // 1024} KB.",
        )
    try:
        source = content.decode("utf-8")
    except UnicodeDecodeError as e:
        raise HTTPException(status_code=415, detail="Netlist must be UTF-8 text.") from e

    try:
        flags = {
            "dt": _optional(dt, parse_si),
            "duration": _optional(duration, parse_si),
            "method": method or None,
            "record_stride": _optional(stride, int),
        }
        doc = parse(source)
        cfg = SimConfig.merged(flags, doc.sim)
    except ParseError as e:
        raise HTTPException(status_code=400, detail=f"Parse error at {e}") from e
    except (ModelError, ValueError) as e:
        raise HTTPException(status_code=400, detail=str(e)) from e
    if cfg.n_steps > MAX_STEPS:
        raise HTTPException(
            status_code=400,
            detail=f"Run needs {cfg.n_steps} steps; the limit is {MAX_STEPS}.",
        )

    try:
        trace = await run_in_threadpool(simulate, doc.network, doc.stimuli, cfg)
    except SimulationDivergedError as e:
        raise HTTPException(status_code=422, detail=str(e)) from e
    if doc.probes:
        trace = trace.select(doc.probes)

    output_name = Path(file.filename).stem + ".csv"
    return Response(
        content=trace.to_csv().encode("utf-8"),
        media_type="text/csv; charset=utf-8",
        headers={"Content-Disposition": f'attachment; filename="{output_name}"'},
    )
