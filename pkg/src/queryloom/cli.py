"""Command-line entry points: offline store building, d2n vetting,
evaluation runs, and the HTTP server."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .augment import BuildOptions, SeedPair, build_offline, index_pair, sql2nl
from .catalog import Catalog
from .evalharness import (
    ablation_table,
    evaluate,
    load_dataset,
    run_ablation,
)
from .gateway import HttpProvider, ScriptedProvider
from .memory import MemoryStore
from .planner import render_schema_info
from .synthesizer import PipelineConfig


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".toml"):
        import tomllib

        return tomllib.loads(text)
    return json.loads(text)


def build_provider(config: dict):
    scripts_dir = config.get("scripts_dir")
    if scripts_dir:
        return ScriptedProvider.from_dir(scripts_dir)
    if config.get("provider_base_url"):
        return HttpProvider(base_url=config["provider_base_url"],
                            model=config.get("provider_model", "default"))
    return HttpProvider()  # credentials via environment


def load_catalog(config: dict) -> Catalog:
    path = config.get("catalog")
    if not path:
        raise click.UsageError("config must name a catalog file")
    return Catalog.load(path)


def load_memory(config: dict) -> MemoryStore:
    store = MemoryStore()
    path = config.get("memory")
    if path and Path(path).exists():
        store.load(path)
    return store


def pipeline_config(config: dict) -> PipelineConfig:
    cfg = PipelineConfig()
    if "k" in config:
        cfg.k_examples = int(config["k"])
    if "token_budget" in config:
        cfg.token_budget = int(config["token_budget"])
    if "metric_lexicon" in config:
        cfg.metric_lexicon = tuple(config["metric_lexicon"])
    if "clarification_parameters" in config:
        cfg.clarification_parameters = dict(config["clarification_parameters"])
    return cfg


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON or TOML configuration file.")
@click.pass_context
def main(ctx, config_path):
    """Closed-loop natural-language data analysis engine."""
    ctx.obj = load_config(config_path)


@main.group()
def offline():
    """Offline demonstration-store construction."""


@offline.command("build")
@click.option("--domain", required=True)
@click.option("--seeds", "seeds_path", required=True,
              type=click.Path(exists=True),
              help="JSONL file of {query, sql, domain_id} rows.")
@click.option("--augment", "augment_mode", type=click.Choice(["semantic"]),
              default=None)
@click.option("--sql2nl", "sql2nl_path", type=click.Path(exists=True),
              default=None, help="File of SQL statements, one per line.")
@click.option("--out", "out_path", default=None,
              help="Store output path (defaults to config memory path).")
@click.option("--report", "report_path", default=None)
@click.pass_obj
def offline_build(config, domain, seeds_path, augment_mode, sql2nl_path,
                  out_path, report_path):
    """Ingest seed pairs (and optional augmentations) into the memory store."""
    catalog = load_catalog(config)
    memory = load_memory(config)
    provider = build_provider(config)

    seeds = []
    for line in Path(seeds_path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            row = json.loads(line)
            seeds.append(SeedPair(query=row["query"], sql=row["sql"],
                                  domain_id=row.get("domain_id", domain)))

    if sql2nl_path:
        table_info = render_schema_info(catalog.domain_schemas(domain))
        for sql in Path(sql2nl_path).read_text(encoding="utf-8").splitlines():
            if sql.strip():
                seeds.extend(sql2nl(sql.strip(), table_info, provider, domain))

    options = BuildOptions(semantic_aug=(augment_mode == "semantic"))
    report = build_offline(domain, seeds, memory, catalog,
                           provider=provider, options=options)

    out = out_path or config.get("memory")
    if out:
        memory.save(out)
    payload = json.dumps(report.to_dict(), indent=2, ensure_ascii=False)
    click.echo(payload)
    if report_path:
        Path(report_path).write_text(payload + "\n", encoding="utf-8")


@offline.command("vet")
@click.option("--pairs", "pairs_path", required=True,
              type=click.Path(exists=True),
              help="JSONL of unvetted d2n pairs {query, sql, domain_id}.")
@click.option("--accept", "accept_spec", default="",
              help="Comma-separated row indices to vet, or 'all'.")
@click.option("--index/--no-index", "do_index", default=True,
              help="Index accepted pairs into the memory store.")
@click.pass_obj
def offline_vet(config, pairs_path, accept_spec, do_index):
    """Human vetting step for domain-generated pairs."""
    rows = [json.loads(line) for line
            in Path(pairs_path).read_text(encoding="utf-8").splitlines()
            if line.strip()]
    if accept_spec == "all":
        accepted = set(range(len(rows)))
    else:
        accepted = {int(i) for i in accept_spec.split(",") if i.strip()}

    catalog = load_catalog(config)
    memory = load_memory(config)
    vetted = 0
    for idx in sorted(accepted):
        row = rows[idx]
        pair = SeedPair(query=row["query"], sql=row["sql"],
                        domain_id=row["domain_id"], vetted=True)
        if do_index:
            index_pair(pair, "d2n", memory, catalog)
        vetted += 1
    if do_index and config.get("memory"):
        memory.save(config["memory"])
    click.echo(json.dumps({"vetted": vetted, "of": len(rows)}))


@main.group("eval")
def eval_group():
    """Evaluation harness."""


@eval_group.command("run")
@click.option("--dataset", "dataset_path", required=True,
              type=click.Path(exists=True))
@click.option("--metrics", default="em,ex",
              help="Comma-separated subset of em,ex,ha.")
@click.option("--arms", default="",
              help="Comma-separated ablation arms; empty = score pred_sql "
                   "columns directly.")
@click.option("--out", "out_path", default=None)
@click.pass_obj
def eval_run(config, dataset_path, metrics, arms, out_path):
    """Score a JSONL dataset, optionally across augmentation arms."""
    catalog = load_catalog(config)
    provider = build_provider(config)
    metric_names = tuple(m.strip() for m in metrics.split(",") if m.strip())
    samples = load_dataset(dataset_path, config.get("fixtures_dir"))

    if arms:
        arm_names = [a.strip() for a in arms.split(",") if a.strip()]
        stores = {}
        for arm in arm_names:
            store = MemoryStore()
            path = config.get("stores", {}).get(arm) or config.get("memory")
            if path and Path(path).exists():
                store.load(path)
            stores[arm] = store
        reports = run_ablation(samples, arm_names, catalog, stores, provider,
                               pipeline_config(config), metric_names)
        payload = {arm: report.to_dict() for arm, report in reports.items()}
        click.echo(ablation_table(reports))
    else:
        report = evaluate(samples, metric_names, provider)
        payload = report.to_dict()
        click.echo(json.dumps({k: payload[k] for k in ("n", "em", "ex", "ha")}))

    if out_path:
        Path(out_path).write_text(
            json.dumps(payload, indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8")


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.pass_obj
def serve(config, host, port):
    """Run the /v1 HTTP service."""
    import uvicorn

    from .service import create_app, embedded_service

    catalog = load_catalog(config)
    memory = load_memory(config)
    provider = build_provider(config)
    fixtures = {}
    for domain_id, path in (config.get("fixtures") or {}).items():
        fixtures[domain_id] = Path(path).read_text(encoding="utf-8")
    service = embedded_service(catalog, memory, provider, fixtures,
                               pipeline_config(config),
                               sessions_dir=config.get("sessions_dir"))
    uvicorn.run(create_app(service), host=host, port=port)


if __name__ == "__main__":
    main()
