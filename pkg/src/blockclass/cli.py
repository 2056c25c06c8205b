"""Operator command line: seed demo data, serve the API, run deterministic
classroom simulations, ingest the reference manual, and replay event logs.

Config is a key=value file ('#' comments allowed); recognized keys:

    data_dir            where the event log and state snapshot live
    host, port          bind address for serve
    llm_mode            stub | remote
    llm_url             remote chat endpoint base URL
    llm_model           model name for remote mode
    denylist_path       moderation denylist file (one term per line)
    offline_after_s     presence: offline threshold (default 45)
    idle_after_s        presence: idle threshold (default 120)
    chunk_target_words  manual chunking target (default 300)

BLOCKCLASS_LLM_MODE / _URL / _MODEL environment variables override the
config file.

Exit codes: 0 ok, 1 generic failure, 2 config not found, 3 refusing to
reseed without --force, 4 corrupt log line, 5 replay hash mismatch.
"""

from __future__ import annotations

import json
import random
import sys
import threading
from pathlib import Path

import click

from blockclass.chat.moderation import Denylist
from blockclass.clock import VirtualClock, WallClock
from blockclass.engine import ClassroomEngine
from blockclass.errors import BlockClassError, EmptyCorpus
from blockclass.llm.config import ProviderConfig
from blockclass.llm.gateway import LlmGateway
from blockclass.persist.eventlog import CorruptLogLine, HashMismatch
from blockclass.sim.runner import (
    build_sim_engine,
    report_json,
    run_simulation,
    seed_demo_data,
)
from blockclass.sim.scenario import SimulationScenario, default_mix

DEFAULTS = {
    "data_dir": "./blockclass-data",
    "host": "127.0.0.1",
    "port": "8000",
    "llm_mode": "stub",
    "llm_url": "http://localhost:11434",
    "llm_model": "llama3.1:70b",
    "denylist_path": "",
    "offline_after_s": "45",
    "idle_after_s": "120",
    "chunk_target_words": "300",
    "frontend_dir": "",
}


def load_config(path: str | None) -> dict:
    config = dict(DEFAULTS)
    if path is None:
        return config
    p = Path(path)
    if not p.exists():
        click.echo(f"config not found: {path}", err=True)
        sys.exit(2)
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            click.echo(f"bad config line (expected key=value): {line}", err=True)
            sys.exit(2)
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _build_gateway(config: dict, stub_llm: bool) -> LlmGateway:
    provider = ProviderConfig(
        mode="stub" if stub_llm else config["llm_mode"],
        base_url=config["llm_url"],
        model_name=config["llm_model"],
    ).with_env_overrides()
    if stub_llm:
        provider.mode = "stub"
    return LlmGateway(provider)


def _build_engine(config: dict, clock_kind: str, stub_llm: bool, seed: int | None) -> ClassroomEngine:
    clock = VirtualClock(1_750_000_000_000) if clock_kind == "virtual" else WallClock()
    denylist = (
        Denylist.from_file(config["denylist_path"]) if config["denylist_path"] else Denylist()
    )
    return ClassroomEngine(
        clock=clock,
        gateway=_build_gateway(config, stub_llm),
        denylist=denylist,
        rng=random.Random(seed) if seed is not None else None,
        offline_after_ms=int(config["offline_after_s"]) * 1000,
        idle_after_ms=int(config["idle_after_s"]) * 1000,
    )


def _data_paths(config: dict) -> tuple[Path, Path, Path]:
    data_dir = Path(config["data_dir"])
    return data_dir, data_dir / "events.jsonl", data_dir / "state.json"


def _open_existing(config: dict, clock_kind: str, stub_llm: bool, seed: int | None) -> ClassroomEngine:
    engine = _build_engine(config, clock_kind, stub_llm, seed)
    _, log_path, state_path = _data_paths(config)
    applied = 0
    if state_path.exists():
        applied = engine.load_state_snapshot(state_path)
    if log_path.exists():
        engine.replay_file(log_path, skip_upto_index=applied)
    engine.attach_log(log_path)
    return engine


@click.group()
@click.option("--config", "config_path", default=None, help="key=value config file")
@click.option("--seed", type=int, default=None, help="seed for generated randomness")
@click.option("--clock", "clock_kind", type=click.Choice(["virtual", "wall"]), default="wall")
@click.option("--stub-llm", is_flag=True, default=False, help="force the deterministic stub provider")
@click.pass_context
def main(ctx, config_path, seed, clock_kind, stub_llm):
    """Classroom management service for block-based programming."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = load_config(config_path)
    ctx.obj["seed"] = seed
    ctx.obj["clock_kind"] = clock_kind
    ctx.obj["stub_llm"] = stub_llm


@main.command()
@click.option("--force", is_flag=True, default=False, help="overwrite existing data")
@click.option("--students", type=int, default=30, show_default=True)
@click.pass_context
def seed(ctx, force, students):
    """Create the demo classroom (teacher, 2 sections, students, 2 assignments)."""
    config = ctx.obj["config"]
    data_dir, log_path, state_path = _data_paths(config)
    if log_path.exists() and not force:
        click.echo(f"refusing to reseed: {log_path} exists (use --force)", err=True)
        sys.exit(3)
    if force:
        log_path.unlink(missing_ok=True)
        state_path.unlink(missing_ok=True)
    data_dir.mkdir(parents=True, exist_ok=True)

    engine = _build_engine(config, ctx.obj["clock_kind"], ctx.obj["stub_llm"], ctx.obj["seed"])
    engine.attach_log(log_path)
    try:
        seeded = seed_demo_data(engine, student_count=students)
        for assignment_id in seeded["assignments"]:
            summary = engine.assignment_status_summary(assignment_id)
            name = engine.state.assignments[assignment_id].name
            click.echo(
                f"{assignment_id} ({name}): enrolled={summary.enrolled} "
                f"submitted={summary.submitted} graded={summary.graded}"
            )
        engine.save_state_snapshot(state_path)
    finally:
        engine.close()
    click.echo(f"seeded {students} students into {data_dir}")


@main.command()
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_context
def serve(ctx, host, port):
    """Serve the REST + WebSocket API over the persisted event log."""
    import uvicorn

    from blockclass.api.app import create_app

    config = ctx.obj["config"]
    engine = _open_existing(config, ctx.obj["clock_kind"], ctx.obj["stub_llm"], ctx.obj["seed"])
    app = create_app(engine)

    frontend_dir = config.get("frontend_dir", "")
    if frontend_dir and Path(frontend_dir).exists():
        from starlette.staticfiles import StaticFiles

        app.mount("/app", StaticFiles(directory=frontend_dir, html=True), name="frontend")
        click.echo(f"serving dashboard from {frontend_dir} at /app/")

    stop = threading.Event()

    def summary_loop():
        while not stop.wait(300):
            try:
                engine.run_summary_tick()
            except BlockClassError:
                pass

    ticker = threading.Thread(target=summary_loop, name="summary-scheduler", daemon=True)
    ticker.start()
    try:
        uvicorn.run(app, host=host or config["host"], port=port or int(config["port"]))
    finally:
        stop.set()
        _, _, state_path = _data_paths(config)
        engine.save_state_snapshot(state_path)
        engine.close()


@main.command()
@click.option("--students", type=int, default=30, show_default=True)
@click.option("--duration", type=int, default=600, show_default=True, help="seconds of class time")
@click.option("--idlers", type=float, default=None, help="fraction of idle-prone students")
@click.option("--out", type=click.Path(), default=None, help="write the report here")
@click.option("--persist", is_flag=True, default=False, help="write the event log under data_dir")
@click.pass_context
def simulate(ctx, students, duration, idlers, out, persist):
    """Run a deterministic simulated classroom and print the report."""
    config = ctx.obj["config"]
    seed_value = ctx.obj["seed"] if ctx.obj["seed"] is not None else 42
    mix = default_mix()
    if idlers is not None:
        remaining = 1.0 - idlers
        base = default_mix()
        others = {k: v for k, v in base.items() if k != "idler"}
        scale = remaining / sum(others.values())
        mix = {k: v * scale for k, v in others.items()}
        mix["idler"] = idlers
    try:
        scenario = SimulationScenario(
            student_count=students, duration_s=duration, mix=mix, seed=seed_value
        )
    except ValueError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)

    log_path = None
    if persist:
        data_dir, log_path, _ = _data_paths(config)
        data_dir.mkdir(parents=True, exist_ok=True)
        if log_path.exists():
            click.echo(f"refusing to overwrite {log_path}; move it first", err=True)
            sys.exit(3)
    report = run_simulation(scenario, log_path=log_path)
    text = report_json(report)
    if out:
        Path(out).write_text(text, encoding="utf-8")
        click.echo(f"report written to {out}")
    else:
        click.echo(text, nl=False)


@main.command("ingest-manual")
@click.argument("path", type=click.Path())
@click.pass_context
def ingest_manual(ctx, path):
    """Chunk and index a reference manual for the chat assistant."""
    config = ctx.obj["config"]
    p = Path(path)
    if not p.exists():
        click.echo(f"manual not found: {path}", err=True)
        sys.exit(2)
    engine = _open_existing(config, ctx.obj["clock_kind"], ctx.obj["stub_llm"], ctx.obj["seed"])
    try:
        index = engine.ingest_manual(
            p.read_text(encoding="utf-8"), int(config["chunk_target_words"])
        )
        _, _, state_path = _data_paths(config)
        engine.save_state_snapshot(state_path)
        click.echo(f"indexed {index.chunk_count} chunks from {path}")
    except EmptyCorpus as exc:
        click.echo(f"empty corpus: {exc}", err=True)
        sys.exit(1)
    finally:
        engine.close()


@main.command()
@click.argument("log_path", type=click.Path())
@click.pass_context
def replay(ctx, log_path):
    """Re-apply a recorded event log and verify its state-hash checkpoints."""
    config = ctx.obj["config"]
    p = Path(log_path)
    if not p.exists():
        click.echo(f"log not found: {log_path}", err=True)
        sys.exit(2)
    engine = _build_engine(config, "virtual", True, ctx.obj["seed"])
    try:
        applied = engine.replay_file(p)
    except CorruptLogLine as exc:
        click.echo(f"corrupt log line {exc.line_no}: {log_path}", err=True)
        sys.exit(4)
    except HashMismatch as exc:
        click.echo(str(exc), err=True)
        sys.exit(5)
    click.echo(f"state hash match ({applied} events, final {engine.state_hash()})")


if __name__ == "__main__":
    main()
