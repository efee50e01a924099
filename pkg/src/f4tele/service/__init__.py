"""FastAPI application wrapping the simulator and analytic models."""

from fastapi import FastAPI

from .routes import router


def create_app():
    app = FastAPI(title="f4tele",
                  description="Time-shared FSO telemetry network: "
                              "simulation and delay analysis service")
    app.include_router(router)
    return app
