"""Command-line client for the curriculum service.

Every subcommand builds a request, sends it to the service (in-process by
default, or a remote `--server` URL), and renders the response. Exit codes:
0 success, 2 validation, 3 I/O, 4 backend, 5 parse failure.
"""
from __future__ import annotations

import json
import sys

import click
import httpx

EXIT_CODES = {"validation": 2, "io": 3, "backend": 4, "parse": 5}
_STATUS_FALLBACK = {404: "io", 422: "validation", 502: "backend"}


def _make_client(server):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # test-client import warns on some stacks
        from fastapi.testclient import TestClient

    from currigen.service import create_app

    return TestClient(create_app(), raise_server_exceptions=False)


def _fail(code: str, message: str):
    click.echo(f"error ({code}): {message}", err=True)
    sys.exit(EXIT_CODES.get(code, 1))


def _check(response) -> dict:
    try:
        body = response.json()
    except ValueError:
        body = {}
    if response.status_code >= 400:
        if isinstance(body, dict) and "code" in body:
            _fail(body["code"], body.get("message", ""))
        fallback = _STATUS_FALLBACK.get(response.status_code, "validation")
        _fail(fallback, json.dumps(body) if body else response.text[:500])
    return body


def _request(server, method, path, payload=None, params=None) -> dict:
    client = _make_client(server)
    try:
        with client:
            if method == "GET":
                response = client.get(path, params=params)
            else:
                response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        _fail("backend", f"cannot reach service: {exc}")
    return _check(response)


def _payload(config_path, run_dir, rng_seed, **extra) -> dict:
    payload = {}
    if config_path is not None:
        payload["config_path"] = config_path
    if run_dir is not None:
        payload["run_dir"] = run_dir
    if rng_seed is not None:
        payload["rng_seed"] = rng_seed
    for key, value in extra.items():
        if value is not None:
            payload[key] = value
    return payload


def _echo_json(data: dict):
    click.echo(json.dumps(data, indent=2, sort_keys=True))


_common = [
    click.option("--config", "config_path", default=None,
                 help="YAML run configuration."),
    click.option("--run-dir", "run_dir", default=None,
                 help="Run directory (overrides the config)."),
    click.option("--seed", "rng_seed", type=int, default=None,
                 help="Master RNG seed (overrides the config)."),
    click.option("--server", default=None, envvar="CURRIGEN_SERVER",
                 help="Remote service URL; default runs in-process."),
]


def common_options(fn):
    for option in reversed(_common):
        fn = option(fn)
    return fn


@click.group()
@click.version_option(package_name="currigen", prog_name="currigen")
def main():
    """Closed-loop curriculum generation and pacing simulation."""


@main.command()
@common_options
@click.option("--corpus", "corpus_path", default=None,
              help="Raw problem pool (JSONL); defaults to the config's corpus_path.")
def seed(config_path, run_dir, rng_seed, server, corpus_path):
    """Tag a raw pool, stratify-sample the quota, write round 0."""
    payload = _payload(config_path, run_dir, rng_seed, corpus_path=corpus_path)
    data = _request(server, "POST", "/runs/seed", payload)
    _echo_json(data)


@main.command()
@common_options
@click.argument("pool_path")
@click.argument("out_path")
def tag(config_path, run_dir, rng_seed, server, pool_path, out_path):
    """Fill in missing difficulty/subject tags on a pool file."""
    payload = _payload(config_path, run_dir, rng_seed,
                       pool_path=pool_path, out_path=out_path)
    data = _request(server, "POST", "/runs/tag", payload)
    _echo_json(data)


@main.command(name="eval")
@common_options
def eval_(config_path, run_dir, rng_seed, server):
    """Diagnose the student on the current validation pool (no state change)."""
    payload = _payload(config_path, run_dir, rng_seed)
    data = _request(server, "POST", "/runs/eval", payload)
    _echo_json(data)


@main.command()
@common_options
def generate(config_path, run_dir, rng_seed, server):
    """Diagnose then synthesize one candidate batch, without evolving."""
    payload = _payload(config_path, run_dir, rng_seed)
    data = _request(server, "POST", "/runs/generate", payload)
    _echo_json(data)


@main.command()
@common_options
def evolve(config_path, run_dir, rng_seed, server):
    """Execute exactly one full round and checkpoint it."""
    payload = _payload(config_path, run_dir, rng_seed)
    data = _request(server, "POST", "/runs/evolve", payload)
    _echo_json(data)


@main.command()
@common_options
@click.option("--rounds", type=int, default=None,
              help="Total rounds to reach (overrides the config).")
@click.option("--resume", is_flag=True, default=False,
              help="Continue a run that already holds completed rounds.")
def run(config_path, run_dir, rng_seed, server, rounds, resume):
    """Run the loop from the latest checkpoint up to the round budget."""
    payload = _payload(config_path, run_dir, rng_seed, rounds=rounds)
    payload["resume"] = resume
    data = _request(server, "POST", "/runs/run", payload)
    _echo_round_table(data.get("reports", []))
    summary = {k: v for k, v in data.items() if k != "reports"}
    _echo_json(summary)


def _echo_round_table(reports):
    if not reports:
        click.echo("no rounds executed")
        return
    click.echo("round  hard  easy  remedy  advanced  rejected  train  cum_train  val")
    for r in reports:
        click.echo(
            f"{r['round_index']:>5}  {r['hard_size']:>4}  {r['easy_size']:>4}  "
            f"{r['remedy_size']:>6}  {r['advanced_size']:>8}  {r['rejected_size']:>8}  "
            f"{r['train_size']:>5}  {r['cumulative_train_size']:>9}  {r['val_size']:>3}"
        )


@main.command()
@common_options
@click.option("--trials", type=int, default=None,
              help="Monte Carlo trials per policy (overrides the config).")
def simulate(config_path, run_dir, rng_seed, server, trials):
    """Compare pacing policies; write per-round CSVs and a summary."""
    payload = _payload(config_path, run_dir, rng_seed, trials=trials)
    data = _request(server, "POST", "/simulate", payload)
    summary = data.get("summary", {})
    click.echo("policy                      mean_rounds  median_rounds  reached")
    for row in summary.get("policies", []):
        click.echo(
            f"{row['name']:<26}  {row['mean_rounds']:>11.2f}  "
            f"{row['median_rounds']:>13.2f}  {row['reached_target']:>7}"
        )
    click.echo(f"summary: {data.get('summary_path', '')}")
    for name, path in sorted(data.get("csv_paths", {}).items()):
        click.echo(f"rounds ({name}): {path}")


@main.command()
@common_options
def report(config_path, run_dir, rng_seed, server):
    """Aggregate a run's history into tables and histograms."""
    params = {}
    if run_dir is not None:
        params["run_dir"] = run_dir
    if config_path is not None:
        params["config_path"] = config_path
    data = _request(server, "GET", "/runs/report", params=params)
    click.echo(data.get("text", ""), nl=False)
    click.echo(f"report files: {data.get('report_dir', '')}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8765, type=int, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from currigen.service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
