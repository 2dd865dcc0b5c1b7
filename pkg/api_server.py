"""HTTP front end for the cheap band-edge evaluations.

Long simulations (ensembles, oracle runs, searches) stay on the CLI;
these endpoints only serve closed forms and short tabulations.
"""

from datetime import datetime
import logging
from typing import List, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from src import __version__
from src.bandedge import lowexc, quantum
from src.bandedge.kernel import kernel_laplace, memory_kernel
from src.bandedge.models import BandEdgeModel, build_model
from src.core.config import configure_logging, get_settings
from src.core.errors import BandEdgeError, NumericError
from src.core.scenario import ModelSection

configure_logging()
logger = logging.getLogger(__name__)

MAX_POINTS = 20001

app = FastAPI(
    title="Band-Edge Superradiance Service",
    description="Memory kernels, oscillator roots, crossover times and emission spectra in collective units",
    version=__version__,
)


class KernelRequest(BaseModel):
    model: ModelSection = ModelSection()
    delta_c: float = 0.0
    lags: List[float] = Field(..., min_length=1, max_length=MAX_POINTS)
    laplace_s: Optional[List[float]] = Field(default=None, min_length=2, max_length=2, description="[Re s, Im s]")


class KernelResponse(BaseModel):
    model: str
    lags: List[float]
    real: List[float]
    imag: List[float]
    laplace: Optional[List[float]] = None


class OscillatorRequest(BaseModel):
    delta_c: float = 0.0
    tau: List[float] = Field(..., min_length=1, max_length=MAX_POINTS)
    q0: Optional[float] = Field(default=None, ge=0)
    gain: bool = False


class OscillatorResponse(BaseModel):
    delta_c: float
    roots: List[List[float]]
    localized_fraction: float
    population: List[float]
    mandel_q: Optional[List[float]] = None


class CrossoverRequest(BaseModel):
    model: ModelSection = ModelSection()
    delta_c: float = 0.0
    tau_budget: float = Field(default=10.0, gt=0, le=50)


class CrossoverResponse(BaseModel):
    model: str
    delta_c: float
    tau0: float


class SpectrumRequest(BaseModel):
    delta_c: float = 0.0
    omega_min: float = 0.0
    omega_max: float = 10.0
    points: int = Field(default=2001, ge=2, le=MAX_POINTS)


class SpectrumResponse(BaseModel):
    delta_c: float
    omega: List[float]
    density: List[float]
    fwhm: Optional[float] = None
    weight: float


class HealthResponse(BaseModel):
    status: str
    version: str
    timestamp: str


def _model(section: ModelSection) -> BandEdgeModel:
    return build_model(section.kind, **section.model_dump(exclude={"kind"}))


def _fail(e: Exception, what: str) -> HTTPException:
    if isinstance(e, NumericError):
        logger.error(f"{what} failed: {e}")
        return HTTPException(status_code=500, detail=f"{what} failed: {str(e)}")
    return HTTPException(status_code=422, detail=str(e))


@app.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check endpoint"""
    return HealthResponse(status="healthy", version=__version__, timestamp=datetime.now().isoformat())


@app.post("/kernel", response_model=KernelResponse)
async def kernel(request: KernelRequest):
    """Tabulate G(dtau) and optionally its Laplace transform at one point."""
    try:
        model = _model(request.model)
        values = np.atleast_1d(memory_kernel(model, request.delta_c, np.asarray(request.lags)))
        laplace = None
        if request.laplace_s is not None:
            g = kernel_laplace(model, request.delta_c, complex(*request.laplace_s))
            laplace = [g.real, g.imag]
    except BandEdgeError as e:
        raise _fail(e, "Kernel evaluation")
    return KernelResponse(
        model=model.kind,
        lags=request.lags,
        real=values.real.tolist(),
        imag=values.imag.tolist(),
        laplace=laplace,
    )


@app.post("/oscillator", response_model=OscillatorResponse)
async def oscillator(request: OscillatorRequest):
    """Closed-form isotropic low-excitation amplitude."""
    try:
        sol = lowexc.solve_roots(request.delta_c, gain=request.gain)
        tau = np.asarray(request.tau, dtype=float)
        population = np.abs(np.atleast_1d(lowexc.amplitude_B(sol, tau))) ** 2
        if not request.gain:
            population = np.clip(population, 0.0, 1.0)
        q = None
        if request.q0 is not None:
            q = (population * (request.q0 - 1.0) + 1.0).tolist()
    except BandEdgeError as e:
        raise _fail(e, "Oscillator evaluation")
    return OscillatorResponse(
        delta_c=request.delta_c,
        roots=[[u.real, u.imag] for u in sol.roots],
        localized_fraction=lowexc.localized_fraction(sol),
        population=population.tolist(),
        mandel_q=q,
    )


@app.post("/crossover", response_model=CrossoverResponse)
async def crossover(request: CrossoverRequest):
    """Time at which |D|^2 reaches e."""
    try:
        model = _model(request.model)
        tau0 = quantum.crossover_time(model, request.delta_c, request.tau_budget)
    except BandEdgeError as e:
        raise _fail(e, "Crossover search")
    return CrossoverResponse(model=model.kind, delta_c=request.delta_c, tau0=tau0)


@app.post("/spectrum", response_model=SpectrumResponse)
async def spectrum(request: SpectrumRequest):
    """Emission spectrum on a uniform frequency grid."""
    if request.omega_max <= request.omega_min:
        raise HTTPException(status_code=422, detail="omega_max must exceed omega_min")
    try:
        omega = np.linspace(request.omega_min, request.omega_max, request.points)
        curve = lowexc.emission_spectrum(request.delta_c, omega)
    except BandEdgeError as e:
        raise _fail(e, "Spectrum evaluation")
    return SpectrumResponse(
        delta_c=request.delta_c,
        omega=omega.tolist(),
        density=curve.density.tolist(),
        fwhm=None if np.isnan(curve.fwhm) else curve.fwhm,
        weight=curve.weight,
    )


@app.get("/")
async def root():
    """Root endpoint with API information"""
    return {
        "message": "Band-Edge Superradiance Service",
        "version": __version__,
        "endpoints": {
            "health": "/health",
            "kernel": "/kernel",
            "oscillator": "/oscillator",
            "crossover": "/crossover",
            "spectrum": "/spectrum",
            "docs": "/docs",
        },
        "timestamp": datetime.now().isoformat(),
    }


if __name__ == "__main__":
    settings = get_settings()
    uvicorn.run(
        "api_server:app",
        host=settings.api_host,
        port=settings.api_port,
        log_level=settings.log_level.lower(),
    )
