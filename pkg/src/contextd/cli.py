"""Command-line entry points: serve, replay, export."""

import logging
import os
import sys

import click

from .backend import HttpChatBackend, MockBackend
from .errors import ContextdError
from .runtime import EngineConfig
from .store import ProjectStore
from .traces import export_traces_jsonl

logger = logging.getLogger(__name__)


def _store_dir(store: str | None) -> str:
    directory = store or os.environ.get("CTXD_STORE")
    if not directory:
        raise click.UsageError("pass --store or set CTXD_STORE")
    return directory


@click.group()
def main():
    """contextd: mixed-initiative context engine."""
    logging.basicConfig(level=os.environ.get("CTXD_LOG_LEVEL", "INFO"))


@main.command()
@click.option("--listen", default="127.0.0.1:8787", show_default=True, help="host:port")
@click.option("--store", default=None, help="project store directory (or CTXD_STORE)")
@click.option("--mock", "mock_script", default=None, help="mock backend script file")
def serve(listen, store, mock_script):
    """Serve the HTTP JSON API."""
    import uvicorn

    from .service import create_app

    if mock_script:
        backend = MockBackend.from_file(mock_script)
    else:
        try:
            backend = HttpChatBackend.from_env()
        except ContextdError as exc:
            raise click.UsageError(f"live mode needs backend config: {exc}") from exc
    app = create_app(
        ProjectStore(_store_dir(store)), backend, EngineConfig.from_env(os.environ)
    )
    host, _, port = listen.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787))


@main.command()
@click.argument("script", type=click.Path(exists=True))
@click.option("--store", default=None, help="project store directory (or CTXD_STORE)")
@click.option("--snapshot", default=None, help="write the final snapshot here")
def replay(script, store, snapshot):
    """Run a scripted scenario against the mock backend."""
    from .replay import run_replay

    code, snap = run_replay(script, _store_dir(store), snapshot_path=snapshot, env=os.environ)
    if code != 0:
        click.echo(f"replay failed at step {snap.get('failed_step')}: {snap.get('failure')}", err=True)
    sys.exit(code)


@main.command()
@click.option("--project", "project_id", required=True)
@click.option("--traces", "want_traces", is_flag=True, default=False)
@click.option("--store", default=None, help="project store directory (or CTXD_STORE)")
def export(project_id, want_traces, store):
    """Export project data (currently: the trace stream as JSONL)."""
    if not want_traces:
        raise click.UsageError("nothing to export; pass --traces")
    project = ProjectStore(_store_dir(store)).load(project_id)
    click.echo(export_traces_jsonl(project.traces), nl=False)


if __name__ == "__main__":
    main()
