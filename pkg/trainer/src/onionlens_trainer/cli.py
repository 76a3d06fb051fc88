"""Command line front door for the trainer."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import augment as aug
from . import data
from . import manifest as mf
from .errors import TrainerError
from .manifest import CLASS_ORDER
from .models import build_custom_cnn, build_transfer_model
from .train import TrainConfig, train

DEFAULT_COUNTS = ("drugs=252,weapons=319,bank_cards=295,"
                  "identity_documents=229,illegal_currencies=229")


def _parse_counts(spec: str) -> dict[str, int]:
    counts = {}
    for part in spec.split(","):
        label, _, num = part.partition("=")
        label = label.strip()
        if label not in CLASS_ORDER or not num.strip().isdigit():
            raise click.BadParameter(f"bad count entry {part!r}")
        counts[label] = int(num)
    return counts


@click.group()
@click.version_option(package_name="onionlens-trainer")
def main() -> None:
    """Dataset tooling and training for the scanner's image classifier."""


@main.command("generate-data")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--counts", default=DEFAULT_COUNTS, show_default=True,
              help="comma list of label=count pairs")
@click.option("--size", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
def generate_data(out_dir: Path, counts: str, size: int, seed: int) -> None:
    """Synthesize a labeled five-class image corpus with a manifest."""
    manifest = data.generate(_parse_counts(counts), out_dir, size=size, seed=seed)
    click.echo(f"wrote {len(manifest)} images under {out_dir}")


@main.command("augment")
@click.option("--src", "src_dir", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--plan", "plan_path", type=click.Path(path_type=Path),
              help="YAML augmentation plan; defaults to the built-in targets")
@click.option("--seed", default=0, show_default=True)
def augment_cmd(src_dir: Path, out_dir: Path, plan_path: Path | None,
                seed: int) -> None:
    """Grow a corpus to per-class targets with randomized transforms."""
    try:
        plan = aug.load_plan(plan_path) if plan_path else \
            aug.AugmentationPlan(targets=dict(aug.DEFAULT_TARGETS)).validate()
        source = mf.load(str(src_dir / "manifest.jsonl"))
        combined = aug.augment(source, plan, src_dir, out_dir, seed=seed)
        mf.save(combined, str(out_dir / "manifest.jsonl"))
    except (TrainerError, OSError) as exc:
        raise click.ClickException(str(exc))
    for label in CLASS_ORDER:
        click.echo(f"{label}: {combined.counts().get(label, 0)}")


@main.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(path_type=Path))
@click.option("--arch", type=click.Choice(["custom", "transfer"]),
              default="transfer", show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--lr", default=0.001, show_default=True)
@click.option("--momentum", default=0.9, show_default=True)
@click.option("--batch-size", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--size", default=64, show_default=True,
              help="model input resolution")
@click.option("--pretrained", is_flag=True,
              help="fetch published trunk weights instead of a seeded init")
@click.option("--out", "out_dir", type=click.Path(path_type=Path),
              help="where history.csv and curves.png land")
@click.option("--export", "export_path", type=click.Path(path_type=Path),
              help="also export the trained model here")
def train_cmd(data_dir: Path, arch: str, epochs: int, lr: float,
              momentum: float, batch_size: int, seed: int, size: int,
              pretrained: bool, out_dir: Path | None,
              export_path: Path | None) -> None:
    """Fit a classifier on a manifest-described corpus."""
    if arch == "custom" and size != 224:
        raise click.BadParameter("the custom architecture is fixed at --size 224")
    try:
        if arch == "custom":
            bundle = build_custom_cnn(seed=seed, input_size=size)
        else:
            bundle = build_transfer_model(pretrained=pretrained, seed=seed,
                                          input_size=size)
        manifest = mf.load(str(data_dir / "manifest.jsonl"))
        cfg = TrainConfig(epochs=epochs, lr=lr, momentum=momentum,
                          batch_size=batch_size, seed=seed)
        result = train(bundle, manifest, data_dir, cfg, CLASS_ORDER,
                       out_dir=out_dir)
    except TrainerError as exc:
        raise click.ClickException(str(exc))
    last = result.history[-1]
    click.echo(f"epoch {last.epoch}: train_acc={last.train_acc:.4f} "
               f"val_acc={last.val_acc:.4f}")
    if export_path is not None:
        from .export import export_model
        export_model(bundle, CLASS_ORDER, export_path)
        click.echo(f"exported model to {export_path}")


@main.command("export-nlp")
@click.option("--vectors", required=True, type=click.Path(path_type=Path))
@click.option("--seeds", "seeds_path", required=True,
              type=click.Path(path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(path_type=Path))
def export_nlp(vectors: Path, seeds_path: Path, out_dir: Path) -> None:
    """Check seed coverage against a vocabulary and emit the NLP files."""
    import yaml

    from .export import export_embeddings, export_prototypes, load_vocab
    try:
        vocab = load_vocab(vectors)
        with open(seeds_path, encoding="utf-8") as fh:
            seeds = yaml.safe_load(fh)
        if not isinstance(seeds, dict):
            raise TrainerError("seed file must be a mapping")
        export_embeddings(vocab, out_dir / "vectors.txt")
        export_prototypes({str(k): [str(t) for t in v]
                           for k, v in seeds.items()}, vocab,
                          out_dir / "prototypes.yaml")
    except (TrainerError, OSError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote vectors.txt and prototypes.yaml under {out_dir}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
