"""Command-line front end: a thin client over the service layer.

Every verb builds the same request model the HTTP API accepts, executes it
either in-process (default) or against a running server (``--server``), and
prints the response document.  Data goes to stdout / the output file only;
diagnostics go to stderr.

Exit codes: 0 success (and adequate, for check/allocate); 1 inadequate;
2 invalid input; 3 internal or solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from . import service
from .errors import (
    NonIntegerInput,
    NotCanonical,
    ParseError,
    SolverFailure,
    TensorSizeError,
    ValidationError,
)

EXIT_OK = 0
EXIT_INADEQUATE = 1
EXIT_INVALID_INPUT = 2
EXIT_INTERNAL = 3

_INVALID_INPUT = (ParseError, ValidationError, NotCanonical, NonIntegerInput, TensorSizeError)


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "1", "yes", "on"):
        return True
    if value in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError("expected a boolean, got %r" % text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flexmarket",
        description="Adequacy, allocation, market clearing, and GNR simulation "
                    "for window-flexible energy services.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_common(p, needs_input: bool):
        if needs_input:
            p.add_argument("-i", "--input", default="-",
                           help="instance document path ('-' for stdin)")
        p.add_argument("-o", "--output", default="-",
                       help="output path ('-' for stdout)")
        p.add_argument("--server", default=None,
                       help="base URL of a running flexmarket service; "
                            "default is in-process execution")

    check = sub.add_parser("check", help="test supply adequacy")
    add_common(check, needs_input=True)
    check.add_argument("--tolerance", type=float, default=None,
                       help="adequacy tolerance for real-weighted instances")
    check.add_argument("--canonicalize", type=_parse_bool, default=True,
                       metavar="BOOL", help="sort supply within segments first (default true)")

    allocate = sub.add_parser("allocate", help="construct a feasible schedule or a cut")
    add_common(allocate, needs_input=True)

    market = sub.add_parser("market", help="clear the market and verify equilibrium")
    add_common(market, needs_input=True)

    simulate = sub.add_parser("simulate", help="run the GNR benchmark experiment")
    simulate.add_argument("-i", "--input", default=None,
                          help="optional instance document; its partition is used")
    add_common(simulate, needs_input=False)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--trials", type=int, default=1)
    simulate.add_argument("--loads-per-pair", type=int, default=200)
    simulate.add_argument("--pairs", default="all",
                          help="all | smallest9 | largest9 | explicit list 'a-d,a-d,...'")
    simulate.add_argument("--duration-law", default="short_uniform",
                          choices=("short_uniform", "uniform"))
    simulate.add_argument("--workers", type=int, default=1)
    simulate.add_argument("--summary-out", default=None,
                          help="also write the JSON summary document here")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _write_text(path: str, text: str) -> None:
    if path == "-" or path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _instance_doc(path: str) -> service.InstanceDoc:
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError("invalid JSON: %s" % exc) from None
    # semantic validation happens in the handler; here only the shape
    try:
        return service.InstanceDoc.model_validate(doc)
    except Exception as exc:
        raise ParseError("bad instance document: %s" % exc) from None


def _parse_pairs_flag(text: str):
    tag = text.strip().lower()
    if tag in ("all", "smallest9", "largest9"):
        return tag
    pairs = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split("-")
        if len(parts) != 2:
            raise ParseError("bad pair %r, expected 'a-d'" % token)
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ParseError("bad pair %r, expected integers" % token) from None
    if not pairs:
        raise ParseError("no pairs given")
    return pairs


class _RemoteCaller:
    """Sends a request model to a running service and rebuilds the response
    model, so remote and in-process output are identical."""

    def __init__(self, client: httpx.Client):
        self.client = client

    def call(self, verb: str, request, response_type):
        reply = self.client.post("/" + verb, json=request.model_dump(mode="json"))
        if reply.status_code == 422:
            detail = reply.json().get("detail", reply.text)
            raise ParseError(str(detail))
        if reply.status_code >= 400:
            raise SolverFailure("server error %d: %s" % (reply.status_code, reply.text))
        return response_type.model_validate(reply.json())


def _dispatch(args, verb: str, request, response_type, handler, client_factory):
    if args.server:
        factory = client_factory or (lambda url: httpx.Client(base_url=url, timeout=600.0))
        client = factory(args.server)
        try:
            return _RemoteCaller(client).call(verb, request, response_type)
        finally:
            client.close()
    return handler(request)


def _render_json(model_obj) -> str:
    return model_obj.model_dump_json(indent=2) + "\n"


def _run_check(args, client_factory) -> int:
    request = service.CheckRequest(
        instance=_instance_doc(args.input),
        canonicalize=args.canonicalize,
        tolerance=args.tolerance,
    )
    response = _dispatch(args, "check", request, service.CheckResponse,
                         service.handle_check, client_factory)
    _write_text(args.output, _render_json(response))
    return EXIT_OK if response.adequate else EXIT_INADEQUATE


def _run_allocate(args, client_factory) -> int:
    request = service.AllocateRequest(instance=_instance_doc(args.input))
    response = _dispatch(args, "allocate", request, service.AllocateResponse,
                         service.handle_allocate, client_factory)
    _write_text(args.output, _render_json(response))
    return EXIT_OK if response.adequate else EXIT_INADEQUATE


def _run_market(args, client_factory) -> int:
    request = service.MarketRequest(instance=_instance_doc(args.input))
    response = _dispatch(args, "market", request, service.MarketResponse,
                         service.handle_market, client_factory)
    _write_text(args.output, _render_json(response))
    checks = response.checks
    ok = checks.consumer_optimal and checks.supplier_optimal and checks.market_clear
    return EXIT_OK if ok else EXIT_INTERNAL


def _run_simulate(args, client_factory) -> int:
    partition = None
    if args.input is not None:
        instance = _instance_doc(args.input).to_instance()
        partition = list(instance.partition.breakpoints)
    request = service.SimulateRequest(
        partition=partition,
        pairs=_parse_pairs_flag(args.pairs),
        loads_per_pair=args.loads_per_pair,
        trials=args.trials,
        seed=args.seed,
        duration_law=args.duration_law,
        workers=args.workers,
    )
    response = _dispatch(args, "simulate", request, service.SimulateResponse,
                         service.handle_simulate, client_factory)
    _write_text(args.output, response.csv)
    if args.summary_out:
        _write_text(args.summary_out, response.summary.model_dump_json(indent=2) + "\n")
    return EXIT_OK


def main(argv=None, client_factory=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    runners = {
        "check": _run_check,
        "allocate": _run_allocate,
        "market": _run_market,
        "simulate": _run_simulate,
    }
    if args.verb == "serve":
        import uvicorn

        uvicorn.run(service.app, host=args.host, port=args.port)
        return EXIT_OK
    try:
        return runners[args.verb](args, client_factory)
    except _INVALID_INPUT as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID_INPUT
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INVALID_INPUT
    except SolverFailure as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INTERNAL
    except httpx.HTTPError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - defensive
        print("internal error: %s" % exc, file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
