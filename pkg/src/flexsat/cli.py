"""Batch front end: a thin client over the compute service.

Every subcommand validates a run-config JSON, posts the request to the
service (an in-process application by default, a remote base URL with
``--server``), and persists the returned artifacts plus a reproducibility
manifest under the output directory. Volatile fields (wall times) are
kept out of the written artifacts so reruns are byte-identical.

Exit codes: 0 success, 2 configuration/validation error, 3 infeasible
optimization result.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import httpx
from pydantic import ValidationError

from . import __version__
from .runconfig import RunConfig, load_run_config, manifest

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _make_client(server: str | None):
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    import warnings

    with warnings.catch_warnings():
        # the sync ASGI wrapper flags its httpx bridge as deprecated; it
        # is the supported in-process path for this stack
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

        from .service.app import create_app

        return TestClient(create_app(), base_url="http://flexsat.internal")


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code == 422:
        raise CliError(f"request rejected: {resp.text}", EXIT_CONFIG)
    if resp.status_code != 200:
        raise CliError(f"server error {resp.status_code}: {resp.text}",
                       EXIT_CONFIG)
    return resp.json()


def _strip_volatile(obj):
    if isinstance(obj, dict):
        return {k: _strip_volatile(v) for k, v in obj.items()
                if k != "wall_time_s"}
    if isinstance(obj, list):
        return [_strip_volatile(v) for v in obj]
    return obj


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> RunConfig:
    if not args.config:
        raise CliError("--config is required for this command")
    try:
        config = load_run_config(args.config)
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {exc.filename}")
    except (ValidationError, json.JSONDecodeError, ValueError) as exc:
        raise CliError(f"invalid run config: {exc}")
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.workers is not None:
        updates["workers"] = args.workers
    if getattr(args, "budget", None) is not None:
        updates["solver"] = config.solver.model_copy(
            update={"budget": args.budget})
    if updates:
        config = config.model_copy(update=updates)
    return config


def _prepare_out(args, config: RunConfig) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", manifest(config))
    return out


def _write_pareto_csv(path: Path, result: dict) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["mass_kg", "jc_max", "iteration", "particle"])
        for mass, jc_max, it, pi in result.get("pareto", []):
            w.writerow([repr(float(mass)), repr(float(jc_max)), it, pi])


def cmd_build(args, client) -> int:
    config = _load_config(args)
    out = _prepare_out(args, config)
    data = _post(client, "/v1/build", {"config": config.model_dump(mode="json")})
    _write_json(out / "build_result.json", _strip_volatile(data))
    print(f"mass {data['mass_kg']:.3f} kg, {data['n_states']} states, "
          f"{data['rigid_modes']} rigid modes, launch "
          f"{'pass' if data['launch_pass'] else 'FAIL'}")
    return EXIT_OK


def cmd_tune(args, client) -> int:
    config = _load_config(args)
    out = _prepare_out(args, config)
    data = _post(client, "/v1/tune", {"config": config.model_dump(mode="json")})
    _write_json(out / "tune_result.json", _strip_volatile(data))
    idx = {k: v for k, v in data["indices"].items() if k.startswith("jc")}
    print("tuned indices:", {k: round(v, 4) for k, v in idx.items()})
    if not data["feasible"]:
        print("tuning infeasible on the model set", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_codesign(args, client, flavor: str) -> int:
    config = _load_config(args)
    out = _prepare_out(args, config)
    data = _post(client, f"/v1/codesign/{flavor}",
                 {"config": config.model_dump(mode="json")})
    result = data["result"]
    _write_json(out / f"codesign_{flavor}_result.json",
                _strip_volatile(result))
    _write_pareto_csv(out / f"pareto_{flavor}.csv", result)
    final = result.get("final", {})
    print(f"{flavor} co-design: objective {result['best_objective']:.4f}, "
          f"mass {final.get('mass', float('nan')):.3f} kg, "
          f"feasible {result['feasible']}")
    if not result["feasible"]:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_codesign_dist(args, client) -> int:
    return _cmd_codesign(args, client, "distributed")


def cmd_codesign_mono(args, client) -> int:
    return _cmd_codesign(args, client, "monolithic")


def cmd_fit_surrogate(args, client) -> int:
    config = _load_config(args)
    out = _prepare_out(args, config)
    data = _post(client, "/v1/surrogate/fit",
                 {"config": config.model_dump(mode="json")})
    _write_json(out / "surrogates.json", data)
    for body, diag in data["diagnostics"].items():
        print(body, diag["in_sample_max_rel_err"])
    return EXIT_OK


def cmd_validate(args, client) -> int:
    config = _load_config(args)
    if not args.channel:
        raise CliError("--channel is required (APE, RPE, Command, Sensitivity)")
    out = _prepare_out(args, config)
    payload = {"config": config.model_dump(mode="json"),
               "channel": args.channel}
    if args.n_theta:
        payload["n_theta"] = args.n_theta
    data = _post(client, "/v1/validate", payload)
    result = data["result"]
    _write_json(out / f"validate_{args.channel.lower()}_result.json",
                _strip_volatile(result))
    with open(out / f"worst_case_{args.channel.lower()}.csv", "w",
              newline="") as f:
        w = csv.writer(f)
        w.writerow(["theta_sa", "worst_gain"])
        for t, g in result["per_theta"]:
            w.writerow([repr(float(t)), repr(float(g))])
    print(f"{args.channel}: worst gain {result['worst_gain']:.4f} "
          f"({'pass' if result['pass'] else 'VIOLATION'})")
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        lo, hi, n = text.split(":")
        import numpy as np

        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args, client) -> int:
    config = _load_config(args)
    if not args.parameter or not args.grid:
        raise CliError("--parameter and --grid are required")
    out = _prepare_out(args, config)
    payload = {"config": config.model_dump(mode="json"),
               "parameter": args.parameter,
               "grid": _parse_grid(args.grid)}
    data = _post(client, "/v1/sweep", payload)
    result = data["result"]
    _write_json(out / f"sweep_{args.parameter}_result.json", result)
    with open(out / f"sweep_{args.parameter}.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["param_value", "omega", "sigma_max"])
        for v, row in zip(result["grid"], result["sigma_curves"]):
            for wk, sk in zip(result["omega"], row):
                w.writerow([repr(float(v)), repr(float(wk)), repr(float(sk))])
    print(f"swept {args.parameter} over {len(result['grid'])} points")
    return EXIT_OK


def cmd_report(args, client) -> int:
    config = _load_config(args)
    out = _prepare_out(args, config)
    results = []
    for path in sorted(out.glob("validate_*_result.json")):
        results.append(json.loads(path.read_text()))
    payload = {"config": config.model_dump(mode="json"), "results": results}
    data = _post(client, "/v1/report", payload)
    for name, content in data["files"].items():
        (out / name).write_text(content)
    print(f"report written: {sorted(data['files'])}")
    return EXIT_OK


def cmd_serve(args, client) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="flexsat",
        description="Flexible-spacecraft control/structure co-design toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=False,
                        help="run-config JSON path")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--workers", type=int, default=None,
                        help="override the config worker count")
        sp.add_argument("--server", default=None,
                        help="service base URL (default: in-process)")
        sp.add_argument("--budget", type=int, default=None,
                        help="override the solver evaluation budget")

    for name, fn in [
        ("build", cmd_build),
        ("tune", cmd_tune),
        ("codesign-dist", cmd_codesign_dist),
        ("codesign-mono", cmd_codesign_mono),
        ("fit-surrogate", cmd_fit_surrogate),
        ("validate", cmd_validate),
        ("sweep", cmd_sweep),
        ("report", cmd_report),
    ]:
        sp = sub.add_parser(name)
        common(sp)
        sp.set_defaults(fn=fn)
    sub.choices["validate"].add_argument(
        "--channel", choices=["APE", "RPE", "Command", "Sensitivity"])
    sub.choices["validate"].add_argument("--n-theta", type=int, default=None)
    sub.choices["sweep"].add_argument("--parameter")
    sub.choices["sweep"].add_argument(
        "--grid", help="lo:hi:n or comma-separated values")

    sp = sub.add_parser("serve")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8321)
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args, None)
        with _make_client(getattr(args, "server", None)) as client:
            return args.fn(args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
