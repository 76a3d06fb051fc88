"""Command line interface.

Exit codes: 0 success, 1 when a scan fetched nothing at all, 2 for
configuration/artifact problems.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__, pipeline
from .config import ENV_CONFIG, PipelineConfig, default_config, load_config
from .errors import AllSeedsFailed, OnionLensError
from .model import load_model, model_info

EXIT_OK = 0
EXIT_NO_PAGES = 1
EXIT_CONFIG = 2


def _build_config(config_path: str | None, **overrides) -> PipelineConfig:
    cfg = load_config(config_path) if config_path else default_config()
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg.validate()


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__, prog_name="onionlens")
def main() -> None:
    """Detect the activity title of dark-web pages."""


_config_option = click.option(
    "--config", "config_path", envvar=ENV_CONFIG, default=None,
    type=click.Path(), help="YAML config file (env: ONIONLENS_CONFIG).")


@main.command()
@click.option("--url", required=True, help="Seed .onion URL to scan.")
@click.option("--model", "model_path", default=None, type=click.Path(),
              help="Model file.")
@click.option("--embeddings", "embeddings_path", default=None, type=click.Path(),
              help="Word-embedding text file.")
@click.option("--prototypes", "prototypes_path", default=None, type=click.Path(),
              help="Category seed-term YAML (default: packaged).")
@click.option("--stopwords", "stopwords_path", default=None, type=click.Path(),
              help="Stopword list (default: packaged).")
@click.option("--out", "out_path", default="report.json", type=click.Path(),
              show_default=True, help="Report output file.")
@click.option("--proxy", "proxy_url", default=None, help="SOCKS proxy URL.")
@click.option("--threshold", "dedup_threshold", default=None, type=int,
              help="Dedup Hamming threshold.")
@click.option("--max-pages", default=None, type=int, help="Crawl page cap.")
@click.option("--allow-clearnet", is_flag=True, default=False,
              help="Permit non-onion hosts (test mode).")
@_config_option
def scan(url, model_path, embeddings_path, prototypes_path, stopwords_path,
         out_path, proxy_url, dedup_threshold, max_pages, allow_clearnet,
         config_path):
    """Scan one URL and write the activity report."""
    try:
        cfg = _build_config(
            config_path,
            model_path=model_path,
            embeddings_path=embeddings_path,
            prototypes_path=prototypes_path,
            stopwords_path=stopwords_path,
            proxy_url=proxy_url,
            dedup_threshold=dedup_threshold,
            max_pages=max_pages,
            allow_clearnet=allow_clearnet or None,
        )
        artifacts = pipeline.load_artifacts(cfg)
    except OnionLensError as exc:
        _fail(str(exc), EXIT_CONFIG)
    try:
        report = pipeline.scan(url, cfg, artifacts)
    except AllSeedsFailed as exc:
        _fail(str(exc), EXIT_NO_PAGES)
    except OnionLensError as exc:
        _fail(str(exc), EXIT_CONFIG)
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    click.echo(f"activity: {report.activity} "
               f"(confidence {report.fusion.confidence:.3f}, source {report.fusion.source})")
    click.echo(f"report written to {out_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Also write the metrics report as JSON.")
@_config_option
def evaluate(manifest_path, model_path, out_path, config_path):
    """Classify every manifest entry and print the metrics."""
    try:
        cfg = _build_config(config_path, model_path=model_path)
        model = load_model(model_path)
        result = pipeline.evaluate(manifest_path, model, cfg)
    except OnionLensError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except OSError as exc:
        _fail(str(exc), EXIT_CONFIG)
    if result.report.total == 0 and not result.skipped:
        _fail("manifest has no entries", EXIT_CONFIG)
    rep = result.report
    click.echo(f"{'class':<20} {'precision':>9} {'recall':>9}")
    for label in rep.precision:
        click.echo(f"{label:<20} {rep.precision[label]:>9.4f} {rep.recall[label]:>9.4f}")
    click.echo(f"accuracy: {rep.accuracy:.4f} over {rep.total} items")
    if result.skipped:
        click.echo(f"skipped {len(result.skipped)} entries:", err=True)
        for line in result.skipped:
            click.echo(f"  {line}", err=True)
    if out_path:
        payload = rep.to_dict()
        payload["confusion"] = result.matrix.counts.tolist()
        payload["skipped"] = result.skipped
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


@main.command()
@click.option("--in-dir", "in_dir", required=True, type=click.Path())
@click.option("--threshold", default=None, type=int,
              help="Dedup Hamming threshold (default from config).")
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Manifest output (default <in-dir>/manifest.jsonl).")
@_config_option
def dedupe(in_dir, threshold, out_path, config_path):
    """Curate a labeled image directory into a manifest."""
    try:
        cfg = _build_config(config_path, dedup_threshold=threshold)
        result = pipeline.dedupe_dir(in_dir, cfg.dedup_threshold, cfg.min_side)
    except OnionLensError as exc:
        _fail(str(exc), EXIT_CONFIG)
    out_path = out_path or f"{in_dir.rstrip('/')}/manifest.jsonl"
    from .curation import save_manifest
    save_manifest(result.manifest, out_path)
    click.echo(f"kept {result.kept}, dropped {result.dropped} duplicates, "
               f"{result.unusable} unusable")
    for line in result.skipped:
        click.echo(f"  skipped {line}", err=True)
    click.echo(f"manifest written to {out_path}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8650, show_default=True, type=int)
@click.option("--model", "model_path", default=None, type=click.Path())
@click.option("--embeddings", "embeddings_path", default=None, type=click.Path())
@click.option("--prototypes", "prototypes_path", default=None, type=click.Path())
@click.option("--stopwords", "stopwords_path", default=None, type=click.Path())
@click.option("--job-store", "job_store_path", default=None, type=click.Path())
@click.option("--proxy", "proxy_url", default=None)
@click.option("--allow-clearnet", is_flag=True, default=False)
@_config_option
def serve(host, port, model_path, embeddings_path, prototypes_path,
          stopwords_path, job_store_path, proxy_url, allow_clearnet, config_path):
    """Run the HTTP scan service."""
    try:
        cfg = _build_config(
            config_path,
            model_path=model_path,
            embeddings_path=embeddings_path,
            prototypes_path=prototypes_path,
            stopwords_path=stopwords_path,
            job_store_path=job_store_path,
            proxy_url=proxy_url,
            allow_clearnet=allow_clearnet or None,
        )
        if not cfg.job_store_path:
            _fail("job_store_path: required for the service", EXIT_CONFIG)
        from .service import create_app
        app = create_app(cfg)
    except OnionLensError as exc:
        _fail(str(exc), EXIT_CONFIG)
    import uvicorn
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("model-info")
@click.option("--model", "model_path", required=True, type=click.Path())
def model_info_cmd(model_path):
    """Print a structural summary of a model file."""
    try:
        info = model_info(load_model(model_path))
    except OnionLensError as exc:
        _fail(str(exc), EXIT_CONFIG)
    except OSError as exc:
        _fail(str(exc), EXIT_CONFIG)
    click.echo(json.dumps(info, indent=2))


if __name__ == "__main__":
    main()
