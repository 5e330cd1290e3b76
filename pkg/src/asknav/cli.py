"""Command-line entry points: batch runs, reliability evaluation, threshold
ablation, and the live session server."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .batch import run_batch
from .config import EngineConfig
from .episode import EngineBackends
from .gateway import HttpBackend, HttpConfig, StubBackend, StubScript
from .reliability import (
    METHODS,
    collect_scores,
    evaluate_method,
    load_dataset,
    make_probe_method,
    tau_sensitivity,
)
from .uncertainty import ProbeWeights


def _build_backends(args) -> EngineBackends:
    if args.backend == "stub":
        if not args.stub_script:
            raise SystemExit("--stub-script is required with --backend stub")
        script = StubScript.load(args.stub_script)
        return EngineBackends(llm=StubBackend(script), vlm=StubBackend(script))
    http_config = HttpConfig.from_file(args.http_config)
    backend = HttpBackend(http_config)
    return EngineBackends(llm=backend, vlm=backend, user_vlm=backend)


def _method(args):
    if args.method == "probe":
        if not args.probe_weights:
            raise SystemExit("--probe-weights is required with --method probe")
        return make_probe_method(ProbeWeights.load(args.probe_weights))
    return METHODS[args.method]


def _scores_for(args, items):
    embedded_scores = args._embedded_scores
    if embedded_scores is not None:
        return embedded_scores
    if args.stub_script:
        return collect_scores(items, StubBackend(StubScript.load(args.stub_script)))
    if args.http_config:
        return collect_scores(items, HttpBackend(HttpConfig.from_file(args.http_config)))
    raise SystemExit(
        "dataset has no embedded raw_scores; provide --stub-script or --http-config"
    )


def cmd_run(args) -> int:
    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    report = run_batch(args.episodes, config, _build_backends(args), args.out)
    print(json.dumps({"sr": report.sr, "spl": report.spl, "nq": report.nq, "n": report.n_episodes}))
    return 0


def cmd_eval_vqa(args) -> int:
    items, embedded = load_dataset(args.dataset)
    args._embedded_scores = embedded
    scores = _scores_for(args, items)
    report = evaluate_method(items, scores, _method(args), args.tau, args.cost)
    print(
        json.dumps(
            {
                "method": args.method,
                "tau": args.tau,
                "cost": args.cost,
                "phi": report.phi,
                "coverage": report.coverage,
                "n_items": len(items),
            }
        )
    )
    return 0


def cmd_ablate_tau(args) -> int:
    items, embedded = load_dataset(args.dataset)
    args._embedded_scores = embedded
    scores = _scores_for(args, items)
    results = tau_sensitivity(
        items,
        scores,
        _method(args),
        fractions=tuple(args.fractions),
        seeds_per_fraction=args.seeds,
        c=args.cost,
        base_seed=args.base_seed,
    )
    rows = [
        {
            "fraction": r.subset_fraction,
            "seed": r.seed,
            "tau_star": r.tau_star,
            "phi_star": r.phi_star,
            "neighborhood": list(r.neighborhood),
            "phis": list(r.phis),
            "normalized_phis": list(r.normalized_phis),
        }
        for r in results
    ]
    text = json.dumps({"method": args.method, "results": rows}, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    app = create_app(args.episodes, config, stub_script=args.stub_script)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asknav")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a directory of episodes and report SR/SPL/NQ")
    run.add_argument("--episodes", required=True)
    run.add_argument("--config", default=None)
    run.add_argument("--backend", choices=("stub", "http"), default="stub")
    run.add_argument("--stub-script", default=None)
    run.add_argument("--http-config", default=None)
    run.add_argument("--out", required=True)
    run.set_defaults(func=cmd_run)

    vqa = sub.add_parser("eval-vqa", help="effective reliability of a selection method")
    vqa.add_argument("--dataset", required=True)
    vqa.add_argument("--method", choices=("maxprob", "entropy", "energy", "probe"), required=True)
    vqa.add_argument("--tau", type=float, required=True)
    vqa.add_argument("--cost", type=float, default=1.0)
    vqa.add_argument("--probe-weights", default=None)
    vqa.add_argument("--stub-script", default=None)
    vqa.add_argument("--http-config", default=None)
    vqa.set_defaults(func=cmd_eval_vqa)

    ablate = sub.add_parser("ablate-tau", help="threshold sensitivity over subsampled datasets")
    ablate.add_argument("--dataset", required=True)
    ablate.add_argument("--method", choices=("maxprob", "entropy", "energy", "probe"), required=True)
    ablate.add_argument("--fractions", type=float, nargs="+", default=[0.5, 0.7, 1.0])
    ablate.add_argument("--seeds", type=int, default=5)
    ablate.add_argument("--cost", type=float, default=1.0)
    ablate.add_argument("--base-seed", type=int, default=0)
    ablate.add_argument("--probe-weights", default=None)
    ablate.add_argument("--stub-script", default=None)
    ablate.add_argument("--http-config", default=None)
    ablate.add_argument("--out", default=None)
    ablate.set_defaults(func=cmd_ablate_tau)

    serve = sub.add_parser("serve", help="serve live sessions over WebSocket")
    serve.add_argument("--episodes", required=True)
    serve.add_argument("--config", default=None)
    serve.add_argument("--stub-script", default=None)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
