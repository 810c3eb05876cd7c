"""Command-line client for the analysis service.

The pipeline verbs post to the HTTP API. By default the app is mounted
in-process (no socket); --server sends the same request to a running
instance instead, so batch scripts and a shared server see identical
behavior. Exit codes: 0 success, 2 config error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys

import httpx

VERBS = ("generate", "run", "impute", "tree", "validate")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _load_toml(path: str) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _post_in_process(verb: str, payload: dict) -> httpx.Response:
    from .service import create_app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://mobtrial.internal", timeout=None) as client:
            return await client.post(f"/{verb}", json=payload)

    return asyncio.run(go())


def _post_remote(server: str, verb: str, payload: dict) -> httpx.Response:
    with httpx.Client(base_url=server, timeout=None) as client:
        return client.post(f"/{verb}", json=payload)


def _print_result(body: dict) -> None:
    artifacts = body.get("artifacts", [])
    for artifact in artifacts:
        print(f"{artifact['sha256'][:12]}  {artifact['stage']:>10}  {artifact['path']}")
    print(f"{len(artifacts)} artifacts in {body.get('output_dir', '?')}")


def _run_verb(args: argparse.Namespace) -> int:
    try:
        raw = _load_toml(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:  # TOMLDecodeError lives in two modules
        print(f"error: cannot parse {args.config}: {err}", file=sys.stderr)
        return EXIT_CONFIG

    payload: dict = {"config": raw}
    if args.seed is not None:
        payload["seed"] = args.seed
    if args.out is not None:
        payload["out"] = args.out

    try:
        if args.server:
            response = _post_remote(args.server, args.verb, payload)
        else:
            response = _post_in_process(args.verb, payload)
    except httpx.HTTPError as err:
        print(f"error: request failed: {err}", file=sys.stderr)
        return EXIT_STAGE

    if response.status_code == 200:
        _print_result(response.json())
        return EXIT_OK
    try:
        detail = response.json().get("detail")
    except json.JSONDecodeError:
        detail = response.text
    if not isinstance(detail, str):
        detail = json.dumps(detail)
    print(f"error: {detail}", file=sys.stderr)
    if response.status_code in (400, 422):
        return EXIT_CONFIG
    return EXIT_STAGE


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobtrial", description="Treatment-moderator tree analysis pipeline")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, help_text in (
        ("generate", "generate a synthetic trial table"),
        ("run", "run every configured stage"),
        ("impute", "stop after imputation"),
        ("tree", "stop after tree growing and pruning"),
        ("validate", "run everything including bootstrap validation"),
    ):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--server", default=None, help="base URL of a running server (default: in-process)")
        p.set_defaults(func=_run_verb)
    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8321)
    serve.set_defaults(func=_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
