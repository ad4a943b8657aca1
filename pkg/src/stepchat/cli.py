"""Command-line entry points.

    stepchat simulate       batch dual-agent generation over a seed corpus
    stepchat convert        rewrite raw persona-chat records into seeds
    stepchat filter         keep seeds inside the turn/message ranges
    stepchat cluster        two-level topic clustering over seed topics
    stepchat assign         assign each seed one final topic
    stepchat report-topics  rank topics by assigned-seed count
    stepchat metrics        aggregate metrics over a transcript directory
    stepchat judge          LLM-judge scoring (experience or role id)
    stepchat serve          run the live chat service
"""

from __future__ import annotations

import json
import logging
import random
import sys
from dataclasses import replace
from pathlib import Path

import click

from .backend import make_backend
from .config import load_config
from .judging import judge_experience, judge_role_id
from .metrics import compute_report
from .pipeline import (
    FilterThresholds,
    TopicTree,
    assign_topics,
    cluster_two_level,
    convert_corpus,
    filter_with_report,
    top_topics_report,
)
from .sim import run_duet
from .transcripts import (
    read_jsonl,
    read_seeds_jsonl,
    read_transcript,
    write_seeds_jsonl,
    write_transcript,
)

logger = logging.getLogger(__name__)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML config file")
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
@click.pass_context
def main(ctx, config_path, verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = load_config(config_path)


@main.command()
@click.option("--seeds", "seeds_path", required=True, type=click.Path(exists=True))
@click.option("--system", type=click.Choice(["pd", "s1", "s2"]), default=None)
@click.option("--turns", type=int, default=None)
@click.option("--rng", "rng_seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_obj
def simulate(cfg, seeds_path, system, turns, rng_seed, out_dir):
    """Generate one transcript per seed with the dual-agent simulator."""
    sim_cfg = cfg.sim
    if system is not None:
        sim_cfg = replace(sim_cfg, system=system)
    if turns is not None:
        sim_cfg = replace(sim_cfg, max_turns=turns)
    if rng_seed is not None:
        sim_cfg = replace(sim_cfg, rng_seed=rng_seed)
    seeds = read_seeds_jsonl(seeds_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for index, seed in enumerate(seeds):
        transcript = run_duet(
            seed, sim_cfg,
            backend_a=make_backend(cfg.backend),
            backend_b=make_backend(cfg.backend),
            agent_cfg=cfg.agent,
            baseline_cfg=cfg.baseline,
        )
        write_transcript(transcript, out / f"transcript-{index:05d}.json")
    click.echo(f"wrote {len(seeds)} transcripts to {out}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--skiplog", "skip_path", type=click.Path(), default=None)
@click.pass_obj
def convert(cfg, in_path, out_path, skip_path):
    """Rewrite raw persona-chat JSONL records into step-by-step seeds."""
    records = read_jsonl(in_path)
    seeds, skips = convert_corpus(
        records,
        backend_factory=lambda: make_backend(cfg.backend),
        retry_budget=cfg.pipeline.retry_budget,
        parallelism=cfg.pipeline.parallelism,
        skip_log_path=skip_path,
    )
    write_seeds_jsonl(seeds, out_path)
    click.echo(f"converted {len(seeds)} of {len(records)} records ({len(skips)} skipped)")


def _parse_thresholds(raw: str | None) -> FilterThresholds:
    if raw is None:
        return FilterThresholds()
    parts = [int(p) for p in raw.split(",")]
    if len(parts) != 4:
        raise click.BadParameter("expected min_turns,max_turns,min_messages,max_messages")
    return FilterThresholds(*parts)


@main.command("filter")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--thresholds", default=None,
              help="min_turns,max_turns,min_messages,max_messages")
@click.pass_obj
def filter_cmd(cfg, in_path, out_path, thresholds):
    """Keep seeds inside the turn and message ranges."""
    seeds = read_seeds_jsonl(in_path)
    kept, report = filter_with_report(seeds, _parse_thresholds(thresholds))
    write_seeds_jsonl(kept, out_path)
    click.echo(
        f"total={report.total} turn_pass={report.turn_pass} both_pass={report.both_pass}"
    )


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.pass_obj
def cluster(cfg, in_path, out_path):
    """Two-level topic clustering over the seed topics."""
    seeds = read_seeds_jsonl(in_path)
    tree = cluster_two_level(
        [seed.topic for seed in seeds],
        make_backend(cfg.backend),
        batch_size=cfg.pipeline.batch_size,
        subtopics_per_batch=cfg.pipeline.subtopics_per_batch,
        final_k=cfg.pipeline.final_k,
        retry_budget=cfg.pipeline.retry_budget,
    )
    Path(out_path).write_text(json.dumps(tree.to_dict(), indent=2), encoding="utf-8")
    click.echo(f"{len(tree.merged_topics)} final topics from {len(seeds)} seeds")


@main.command()
@click.option("--seeds", "seeds_path", required=True, type=click.Path(exists=True))
@click.option("--tree", "tree_path", required=True, type=click.Path(exists=True))
@click.option("--out-seeds", required=True, type=click.Path())
@click.option("--out-tree", required=True, type=click.Path())
@click.pass_obj
def assign(cfg, seeds_path, tree_path, out_seeds, out_tree):
    """Assign every seed one final topic."""
    seeds = read_seeds_jsonl(seeds_path)
    tree = TopicTree.from_dict(json.loads(Path(tree_path).read_text(encoding="utf-8")))
    tree = assign_topics(
        seeds, tree, make_backend(cfg.backend),
        batch_size=cfg.pipeline.assign_batch_size,
        retry_budget=cfg.pipeline.retry_budget,
    )
    write_seeds_jsonl(seeds, out_seeds)
    Path(out_tree).write_text(json.dumps(tree.to_dict(), indent=2), encoding="utf-8")
    click.echo(f"assigned {len(tree.assignment)} seeds")


@main.command("report-topics")
@click.option("--tree", "tree_path", required=True, type=click.Path(exists=True))
@click.option("--top", "top_k", type=int, default=None)
def report_topics(tree_path, top_k):
    """Rank topics by assigned-seed count."""
    tree = TopicTree.from_dict(json.loads(Path(tree_path).read_text(encoding="utf-8")))
    for topic, count in top_topics_report(tree, top_k):
        click.echo(f"{count}\t{topic}")


@main.command()
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--include-seed", is_flag=True,
              help="include seed-history messages in the metrics")
def metrics(in_dir, out_path, include_seed):
    """Aggregate metrics over a directory of transcript JSON files."""
    sequences = []
    for path in sorted(Path(in_dir).glob("*.json")):
        transcript = read_transcript(path)
        sequences.append(
            transcript.messages if include_seed else transcript.new_messages
        )
    report = compute_report(sequences)
    Path(out_path).write_text(
        json.dumps(report.to_dict(), indent=2), encoding="utf-8"
    )
    click.echo(f"metrics over {len(sequences)} transcripts written to {out_path}")


@main.command()
@click.option("--mode", type=click.Choice(["experience", "roleid"]), required=True)
@click.option("--in", "in_dir", required=True, type=click.Path(exists=True),
              help="directory of transcript JSON files")
@click.option("--judges", "n_judges", type=int, default=3,
              help="number of judge backends to instantiate from config")
@click.option("--ai-role", default=None,
              help="roleid mode: the role name played by the agent")
@click.option("--rng", "rng_seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--records", "records_path", type=click.Path(), default=None)
@click.pass_obj
def judge(cfg, mode, in_dir, n_judges, ai_role, rng_seed, out_path, records_path):
    """Run an LLM-judge harness over a transcript directory."""
    transcripts = [read_transcript(p) for p in sorted(Path(in_dir).glob("*.json"))]
    judges = [make_backend(cfg.backend) for _ in range(n_judges)]
    rng = random.Random(rng_seed)
    if mode == "experience":
        report = judge_experience(
            transcripts, judges, rng,
            retry_budget=cfg.pipeline.retry_budget,
            records_path=records_path,
            parallelism=cfg.pipeline.parallelism,
        )
        payload = {
            "corpus_means": report.corpus_means,
            "average": report.average,
            "per_transcript": report.per_transcript,
            "skipped": report.skipped,
        }
    else:
        if not ai_role:
            raise click.BadParameter("--ai-role is required for roleid mode")
        tally_rows = []
        for index, transcript in enumerate(transcripts):
            result = judge_role_id(
                transcript.messages, ai_role, judges, rng,
                retry_budget=cfg.pipeline.retry_budget,
                records_path=records_path,
            )
            tally_rows.append({
                "transcript": index,
                "n_error": result.tally.n_error,
                "n_unclear": result.tally.n_unclear,
                "n_correct": result.tally.n_correct,
                "n_total": result.tally.n_total,
                "excluded": len(result.excluded),
            })
        payload = {"per_transcript": tally_rows}
    Path(out_path).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML config file (equivalent to the group-level --config)")
@click.option("--port", type=int, default=None)
@click.option("--restore/--no-restore", default=True,
              help="reload persisted sessions on startup")
@click.pass_obj
def serve(cfg, config_path, port, restore):
    """Run the live chat service."""
    import uvicorn

    from .service import SessionEngine, build_app

    if config_path is not None:
        cfg = load_config(config_path)
    engine = SessionEngine(cfg)
    if restore:
        restored = engine.restore()
        if restored:
            click.echo(f"restored {len(restored)} sessions")
    engine.start_reaper()
    app = build_app(engine)
    uvicorn.run(app, host=cfg.service.host, port=port or cfg.service.port)


if __name__ == "__main__":
    sys.exit(main())
