"""meshhub command line: serve the hub, seed fixtures, run scenarios,
probe repository conformance."""

from __future__ import annotations

import argparse
import json
import sys
import time

from .errors import MeshHubError
from .hub import Hub, HubConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshhub",
                                     description="Desk-scale federated data-mesh hub")
    parser.add_argument("--config", metavar="PATH", help="hub config JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the hub HTTP API")
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--data-dir")
    p_serve.add_argument("--portal-dir", help="serve built portal assets from this directory")
    p_serve.add_argument("--mock-idp", action="store_true",
                         help="enable the harness login endpoint")

    p_sim = sub.add_parser("sim", help="simulation harness")
    sim_sub = p_sim.add_subparsers(dest="sim_command", required=True)

    p_seed = sim_sub.add_parser("seed", help="seed a fixture profile")
    p_seed.add_argument("--profile", required=True, choices=["tiny", "table1"])
    p_seed.add_argument("--data-dir", help="persist stores here (required to serve later)")
    p_seed.add_argument("--serve", action="store_true",
                        help="keep serving the seeded hub until interrupted")
    p_seed.add_argument("--port", type=int, default=0)

    p_run = sim_sub.add_parser("run", help="run a scenario script")
    p_run.add_argument("--scenario", required=True, metavar="PATH")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--data-dir", help="hub data dir (scenarios measuring disk need one)")

    p_conf = sub.add_parser("conformance", help="probe a repository")
    p_conf.add_argument("--repository", required=True, metavar="ID")
    return parser


def _config_from_args(args, **overrides) -> HubConfig:
    if getattr(args, "config", None):
        config = HubConfig.from_file(args.config)
    else:
        config = HubConfig()
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    return config


def cmd_serve(args) -> int:
    config = _config_from_args(args, host=args.host, port=args.port,
                               data_dir=args.data_dir)
    if args.mock_idp:
        config.enable_mock_idp = True
    hub = Hub(config)
    server = hub.start_server(portal_dir=args.portal_dir)
    hub.start_background_loop()
    print(f"hub listening on {server.base_url}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.stop()
        hub.close()
    return 0


def cmd_sim_seed(args) -> int:
    config = _config_from_args(args, data_dir=args.data_dir)
    config.enable_mock_idp = True
    if args.serve:
        config.port = args.port
    hub = Hub(config)
    from .harness.fixtures import seed_fixture

    started = time.monotonic()
    stats = seed_fixture(hub, args.profile)
    elapsed = time.monotonic() - started
    print(json.dumps({"profile": args.profile, "stats": stats,
                      "seed_time_s": round(elapsed, 2)}, indent=2))
    if args.serve:
        server = hub.start_server()
        print(f"hub listening on {server.base_url}", flush=True)
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
        finally:
            server.stop()
    hub.close()
    return 0


def cmd_sim_run(args) -> int:
    config = _config_from_args(args, data_dir=args.data_dir)
    config.test_mode = True
    config.enable_mock_idp = True
    hub = Hub(config)
    from .harness.scenario import ScenarioRunner, load_scenario

    script = load_scenario(args.scenario)
    runner = ScenarioRunner(hub, seed=args.seed)
    try:
        report = runner.run(script)
    finally:
        runner.close()
        hub.close()
    print(json.dumps(report.to_json(), indent=2))
    return 0 if report.passed else 1


def cmd_conformance(args) -> int:
    config = _config_from_args(args)
    hub = Hub(config)
    try:
        report = hub.gateway.probe_capabilities(args.repository)
    finally:
        hub.close()
    print(json.dumps(report.to_json(), indent=2))
    statuses = report.matrix()
    return 0 if "fail" not in statuses else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "sim" and args.sim_command == "seed":
            return cmd_sim_seed(args)
        if args.command == "sim" and args.sim_command == "run":
            return cmd_sim_run(args)
        return cmd_conformance(args)
    except MeshHubError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
