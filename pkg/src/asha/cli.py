"""Command-line entry points: pretrain, online, ablate, report, serve."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .configs import resolve_env_config, resolve_pretrain_config
from .envs import EnvKind
from .hitl import AshaConfig, OnlineSession
from .pretrain import PretrainedModel, pretrain
from .users import UserModel, UserModelKind


def cmd_pretrain(args) -> int:
    env_cfg = resolve_env_config(args.config or f"{args.env}_pretrain")
    pcfg = resolve_pretrain_config(args.pretrain_config or f"pretrain_{args.env}")
    metrics: list = []
    model = pretrain(env_cfg, pcfg, seed=args.seed, metrics_out=metrics, progress=True)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    with open(out.with_suffix(".metrics.jsonl"), "w") as f:
        for m in metrics:
            f.write(json.dumps(m, sort_keys=True) + "\n")
    print(f"saved checkpoint to {out}")
    return 0


def cmd_online(args) -> int:
    model = PretrainedModel.load(args.checkpoint)
    kind = args.env or model.kind.value
    env_cfg = resolve_env_config(args.config or f"{kind}_online")
    calib_cfg = resolve_env_config(args.calib_config or f"{kind}_calib")
    user = UserModel(UserModelKind(args.user))
    cfg = AshaConfig.for_kind(EnvKind(kind))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def hook(session: OnlineSession, result) -> None:
        if session.encoder is not None and session.episode % 10 == 0:
            session.encoder.save(out_dir / f"encoder_ep{session.episode:04d}.asha")

    session = OnlineSession(model, env_cfg, user, cfg, seed=args.seed, episode_hook=hook)
    from .hitl import generate_calibration_rollouts

    rollouts = generate_calibration_rollouts(model, calib_cfg, user, cfg,
                                             seed=args.seed + 90_000)
    session.run_calibration(rollouts=rollouts)
    session.run(args.episodes)
    with open(out_dir / "episodes.jsonl", "w") as f:
        for r in session.records:
            f.write(json.dumps({
                "task_id": r.task_id, "attempt_index": r.attempt_index,
                "outcome": r.outcome, "feedback": r.feedback, "steps": r.steps,
                "first_attempt": r.first_attempt, "episode": r.episode,
            }, sort_keys=True) + "\n")
    if session.encoder is not None:
        session.encoder.save(out_dir / "encoder_final.asha")
    from .experiments import first_attempt_rate

    print(f"first-attempt success rate: "
          f"{sum(r.outcome == 'success' and r.first_attempt for r in session.records) / max(1, sum(r.first_attempt for r in session.records)):.3f}")
    return 0


def cmd_ablate(args) -> int:
    from .experiments import SuiteConfig, run_suite

    cfg = SuiteConfig.load(args.suite)
    _, summary, report = run_suite(cfg, out_dir=args.out, workers=args.workers,
                                   progress=True)
    from .experiments import format_table

    print(format_table(summary))
    if report["errors"]:
        print("errors:", json.dumps(report["errors"], indent=2))
    return 0


def cmd_report(args) -> int:
    from .experiments import EpisodeRecord, format_table, summarize

    records = []
    with open(Path(args.in_dir) / "records.jsonl") as f:
        for line in f:
            records.append(EpisodeRecord.from_dict(json.loads(line)))
    summary = summarize(records, cap=args.cap)
    print(format_table(summary))
    out = {"summary": summary.to_dict()}
    (Path(args.in_dir) / "report.json").write_text(json.dumps(out, sort_keys=True, indent=2))
    if args.csv:
        with open(Path(args.in_dir) / "report.csv", "w") as f:
            f.write("variant,first_attempt_rate,stderr,failed_attempts,stderr\n")
            for name, v in sorted(summary.variants.items()):
                f.write(f"{name},{v.first_attempt_rate},{v.first_attempt_stderr},"
                        f"{v.failed_attempts},{v.failed_attempts_stderr}\n")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, main_port

    app = create_app(checkpoint_dir=args.checkpoint_dir, log_dir=args.log_dir)
    uvicorn.run(app, host=args.host, port=args.port or main_port(), interface="asgi3")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="asha")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="phase 1: autonomous policy pre-training")
    p.add_argument("--env", required=True, choices=["switch", "shelf", "valve", "puck"])
    p.add_argument("--config", help="env config name or JSON path")
    p.add_argument("--pretrain-config", help="pretraining budget config name or path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("online", help="phase 2: simulated-user online session")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--env", choices=["switch", "shelf", "valve", "puck"])
    p.add_argument("--config")
    p.add_argument("--calib-config")
    p.add_argument("--user", default="noisy_goal",
                   choices=[k.value for k in UserModelKind])
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("ablate", help="run a variants x seeds suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="summarize a records directory")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--cap", type=int, default=5)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="live session service")
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--log-dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
