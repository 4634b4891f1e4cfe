"""HTTP/JSON face of the workbench.

The service exposes calibration, partition previews, recommendations,
and run management over plain JSON. Simulations execute on daemon
threads off the request path; every observable fact about a run flows
through the registry (status, append-only event log, snapshot), so a
restarted service presents exactly what the store holds.
"""
from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import asdict

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .accounting import (
    AccountingError,
    CalibrationError,
    FixedSizeScheme,
    PrivacyTarget,
    calibrate_sigma,
)
from .federation import RunControl
from .launch import (
    LaunchPlan,
    RunEventStream,
    done_event,
    execute_plan,
    plain,
    plan_from_dict,
    scheme_from_args,
    steps_from_args,
)
from .partition import PartitionError, Policy, partition_sizes
from .practitioner import (
    FIXED_SIZE_ORDERS,
    GoalKind,
    PrivacyGoal,
    Requirements,
    recommend,
)
from .store import (
    ABORTED,
    DONE,
    PAUSED,
    RUNNING,
    InvalidTransition,
    RunRegistry,
    UnknownRun,
)

DEFAULT_ADDRESS = "127.0.0.1:8800"
_POLL_SECONDS = 0.02


# ---------------------------------------------------------------------------
# request bodies
# ---------------------------------------------------------------------------

class CalibrateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon: float = Field(gt=0)
    delta: float = Field(gt=0, lt=1)
    scheme: str = "poisson"
    rate: float | None = None
    batch_size: int | None = Field(default=None, ge=1)
    dataset_size: int | None = Field(default=None, ge=1)
    steps: int | None = Field(default=None, ge=1)
    rounds: int | None = Field(default=None, ge=1)
    local_epochs: int = Field(default=1, ge=1)
    adjacency: str | None = None
    orders: list[int] | None = None


class GoalBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: str
    epsilon: float | None = None


class RecommendRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    goal: GoalBody
    clients: int = Field(ge=1)
    dataset_size: int = Field(ge=1)
    rounds: int = Field(ge=1)
    model_units: int = Field(ge=1)
    memory_budget: float | None = None
    min_accuracy: float | None = None
    policy: str | None = None
    local_epochs: int = Field(default=1, ge=1)
    preferred_accountant: str = "poisson"


# ---------------------------------------------------------------------------
# domain glue
# ---------------------------------------------------------------------------

def _bad_request(message: str):
    return HTTPException(status_code=422, detail=message)


def _resolve_scheme(body: CalibrateRequest):
    try:
        return scheme_from_args(
            body.scheme, rate=body.rate, batch_size=body.batch_size,
            dataset_size=body.dataset_size, adjacency=body.adjacency,
        )
    except ValueError as exc:
        raise _bad_request(str(exc))


def _resolve_steps(body: CalibrateRequest) -> int:
    try:
        return steps_from_args(
            steps=body.steps, rounds=body.rounds, batch_size=body.batch_size,
            dataset_size=body.dataset_size, local_epochs=body.local_epochs,
        )
    except ValueError as exc:
        raise _bad_request(str(exc))


def _snapshot(rounds, status: str, diagnostic=None) -> dict:
    latest = rounds[-1] if rounds else None
    return {
        "status": status,
        "rounds_done": len(rounds),
        "accuracy": None if latest is None else latest.accuracy,
        "loss": None if latest is None else latest.loss,
        "max_accuracy": max((r.accuracy for r in rounds), default=None),
        "diagnostic": diagnostic,
    }


def create_app(store_path=None) -> FastAPI:
    """Build the application over a (possibly pre-existing) store."""
    root = store_path or os.environ.get("FLIP_STORE") or "flip_store"
    registry = RunRegistry(root)
    registry.recover()

    app = FastAPI(title="federated privacy workbench", version=__version__)
    # The browser console is served from its own origin, so the API must
    # answer cross-origin requests. No credentials are involved.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["content-type"],
    )
    app.state.registry = registry
    controls: dict[str, RunControl] = {}
    controls_lock = threading.Lock()

    # -- stateless math ----------------------------------------------------

    @app.post("/calibrate")
    def calibrate(body: CalibrateRequest):
        scheme = _resolve_scheme(body)
        steps = _resolve_steps(body)
        orders = body.orders
        if orders is None and isinstance(scheme, FixedSizeScheme):
            orders = FIXED_SIZE_ORDERS
        try:
            result = calibrate_sigma(
                PrivacyTarget(body.epsilon, body.delta), scheme, steps,
                orders=orders,
            )
        except AccountingError as exc:
            raise _bad_request(str(exc))
        return {
            "sigma": float(result.sigma),
            "achieved_epsilon": float(result.achieved_epsilon),
            "best_order": float(result.best_order),
            "steps": int(result.steps),
            "epsilon": body.epsilon,
            "delta": body.delta,
            "scheme": "fixed-size" if isinstance(scheme, FixedSizeScheme)
                      else "poisson",
            "adjacency": scheme.adjacency.value,
        }

    @app.get("/partitions")
    def partitions(
        n: int = Query(ge=1),
        k: int = Query(ge=1),
        policy: str = Query(default="iid"),
    ):
        try:
            sizes = partition_sizes(n, k, Policy.parse(policy))
        except (PartitionError, ValueError) as exc:
            raise _bad_request(str(exc))
        return list(sizes)

    @app.post("/recommend")
    def recommend_endpoint(body: RecommendRequest):
        try:
            goal = PrivacyGoal(GoalKind(body.goal.kind), body.goal.epsilon)
            requirements = Requirements(
                goal=goal,
                clients=body.clients,
                dataset_size=body.dataset_size,
                rounds=body.rounds,
                memory_budget=(math.inf if body.memory_budget is None
                               else body.memory_budget),
                model_units=body.model_units,
                min_accuracy=body.min_accuracy,
                policy_hint=(None if body.policy is None
                             else Policy.parse(body.policy)),
                local_epochs=body.local_epochs,
                preferred_accountant=body.preferred_accountant,
            )
            recommendation = recommend(requirements)
        except (CalibrationError, PartitionError, ValueError) as exc:
            raise _bad_request(str(exc))
        payload = plain(asdict(recommendation))
        if math.isinf(recommendation.memory_peak_estimate):
            payload["memory_peak_estimate"] = None
        return payload

    # -- run lifecycle -----------------------------------------------------

    def _terminalize(run_id: str, status: str) -> None:
        current = registry.status(run_id)
        if current == status:
            return
        if current == PAUSED and status == DONE:
            registry.set_status(run_id, RUNNING)
        try:
            registry.set_status(run_id, status)
        except InvalidTransition:
            pass

    def _execute(run_id: str, plan: LaunchPlan, control: RunControl) -> None:
        try:
            registry.set_status(run_id, RUNNING)
        except InvalidTransition:
            registry.append_event(run_id, done_event(
                registry.status(run_id), "aborted before the first round", 0,
            ))
            return
        stream = RunEventStream(
            plan, sink=lambda event: registry.append_event(run_id, event)
        )

        def on_round(record):
            stream.on_round(record)
            registry.write_snapshot(
                run_id,
                plain(_snapshot(stream.rounds, registry.status(run_id))),
            )

        try:
            record = execute_plan(plan, control=control, on_round=on_round)
            status = DONE if record.status == "done" else ABORTED
            diagnostic = record.diagnostic
        except Exception as exc:
            status, diagnostic = ABORTED, str(exc)
        finally:
            with controls_lock:
                controls.pop(run_id, None)
        _terminalize(run_id, status)
        final = registry.status(run_id)
        registry.write_snapshot(
            run_id, plain(_snapshot(stream.rounds, final, diagnostic))
        )
        stream.finish(final, diagnostic)

    @app.post("/runs", status_code=201)
    def launch_run(config: dict = Body()):
        try:
            plan = plan_from_dict(config)
        except (ValueError, TypeError) as exc:
            raise _bad_request(str(exc))
        run_id = registry.create(config)
        control = RunControl()
        with controls_lock:
            controls[run_id] = control
        thread = threading.Thread(
            target=_execute, args=(run_id, plan, control),
            name=f"run-{run_id}", daemon=True,
        )
        thread.start()
        return {"run_id": run_id, "status": registry.status(run_id)}

    @app.get("/runs")
    def list_runs():
        return registry.list_runs()

    def _must_exist(run_id: str) -> str:
        try:
            return registry.status(run_id)
        except UnknownRun:
            raise HTTPException(status_code=404,
                                detail=f"no run named {run_id!r}")

    @app.get("/runs/{run_id}")
    def run_detail(run_id: str):
        status = _must_exist(run_id)
        return {
            "run_id": run_id,
            "status": status,
            "config": registry.config(run_id),
            "snapshot": registry.read_snapshot(run_id),
        }

    @app.get("/runs/{run_id}/rounds")
    def stream_rounds(run_id: str):
        _must_exist(run_id)

        def lines():
            cursor = 0
            while True:
                events = registry.events(run_id, start=cursor)
                cursor += len(events)
                finished = False
                for event in events:
                    yield json.dumps(event, sort_keys=True) + "\n"
                    finished = finished or event.get("type") == "done"
                if finished:
                    return
                if not events:
                    time.sleep(_POLL_SECONDS)

        return StreamingResponse(lines(), media_type="application/x-ndjson")

    @app.get("/runs/{run_id}/warnings")
    def run_warnings(run_id: str):
        _must_exist(run_id)
        return [e for e in registry.events(run_id)
                if e.get("type") == "warning"]

    def _transition(run_id: str, new_status: str, action) -> dict:
        _must_exist(run_id)
        try:
            registry.set_status(run_id, new_status)
        except InvalidTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        with controls_lock:
            control = controls.get(run_id)
        if control is not None:
            action(control)
        return {"run_id": run_id, "status": registry.status(run_id)}

    @app.post("/runs/{run_id}/pause")
    def pause_run(run_id: str):
        return _transition(run_id, PAUSED, RunControl.pause)

    @app.post("/runs/{run_id}/resume")
    def resume_run(run_id: str):
        return _transition(run_id, RUNNING, RunControl.resume)

    @app.post("/runs/{run_id}/abort")
    def abort_run(run_id: str):
        return _transition(run_id, ABORTED, RunControl.abort)

    return app


def serve(address=None, store_path=None):
    """Run the service until interrupted."""
    import uvicorn

    address = address or os.environ.get("FLIP_ADDR") or DEFAULT_ADDRESS
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {address!r}")
    uvicorn.run(create_app(store_path), host=host, port=int(port))
