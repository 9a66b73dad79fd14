"""Command line: dataset building, training, evaluation, serving, chat."""

from __future__ import annotations

import dataclasses
import json
import sys
from datetime import date
from pathlib import Path

import click
import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .client import HttpChatClient
from .config import AppConfig, load_config
from .curriculum import contrastive_pretrain, run_stage, sample_to_item
from .datagen import (
    PatientGroup,
    PatientRecord,
    build_localization,
    build_multiecg,
    build_reportgen,
    read_samples,
    split_by_record,
    subset_ecgqa,
    write_samples,
)
from .encoder import EcgEncoder, EncoderConfig
from .evalkit import (
    eval_exact_match,
    eval_judge,
    eval_localization,
    eval_report_auc,
    masking_sweep,
    write_report,
)
from .fusion import EcgChatModel, LmConfig, ToyLm, WordTokenizer, model_from_manifest
from .records import (
    CLIP_SAMPLES,
    canonicalize,
    ingest_record,
    slice_record,
    sniff_format,
)
from .service import ChatEngine, create_app, load_chat_model, run_repl

SUBSET_FILES = {
    "reportgen": "reportgen.jsonl",
    "localization": "localization.jsonl",
    "localization-long": "localization-long.jsonl",
    "multiecg": "multiecg.jsonl",
    "ecgqa": "ecgqa.jsonl",
}


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML config file.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Override the output directory.")
@click.option("--deterministic", is_flag=True, help="Single-thread deterministic mode.")
@click.pass_context
def main(ctx, config_path, seed, out, deterministic):
    """ECG chat toolkit: build datasets, train, evaluate, serve."""
    cfg = load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if out is not None:
        cfg = dataclasses.replace(cfg, out_dir=out)
    if deterministic:
        cfg = dataclasses.replace(cfg, deterministic=True)
    ctx.obj = cfg


def _scan_records(data_dir: str) -> dict:
    """Ingest every ECG file in a directory, keyed by record id."""
    store = {}
    for path in sorted(Path(data_dir).iterdir()):
        if path.suffix in {".dat", ".ann", ".json"} or path.is_dir():
            continue
        fmt = sniff_format(path)
        rec = canonicalize(ingest_record(path, fmt))
        store[rec.record_id or path.stem] = rec
    if not store:
        raise click.ClickException(f"no ECG records found in {data_dir}")
    return store


def _load_json(path: str, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read {what} from {path}: {exc}")


def _datasets_dir(cfg: AppConfig) -> Path:
    path = Path(cfg.out_dir) / "datasets"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _make_client(cfg: AppConfig) -> HttpChatClient:
    if not cfg.client.endpoint:
        raise click.ClickException(
            "this step calls a chat-completion endpoint; set client.endpoint "
            "(and client.model) in the config")
    return HttpChatClient(cfg.client.endpoint, cfg.client.model,
                          auth_env=cfg.client.auth_env)


@main.command()
@click.argument("subset", type=click.Choice(["reportgen", "localization",
                                             "multiecg", "ecgqa"]))
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              help="Directory of ECG record files.")
@click.option("--reports", "reports_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON mapping record id to report text.")
@click.option("--patients", "patients_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON of per-patient record/report/acquisition lists.")
@click.option("--mode", type=click.Choice(["short", "long"]), default="short",
              show_default=True, help="Localization clip-length regime.")
@click.option("--fraction", type=float, default=0.10, show_default=True,
              help="Training fraction kept by the ecgqa subsetter.")
@click.option("--test-fraction", type=float, default=0.2, show_default=True)
@click.pass_obj
def build(cfg: AppConfig, subset, data_dir, reports_path, patients_path, mode,
          fraction, test_fraction):
    """Construct one QA dataset and write it under OUT/datasets."""
    out_dir = _datasets_dir(cfg)

    if subset == "reportgen":
        if not data_dir or not reports_path:
            raise click.ClickException("reportgen needs --data and --reports")
        store = _scan_records(data_dir)
        reports = _load_json(reports_path, "reports")
        pairs = [(rid, reports[rid]) for rid in sorted(store) if rid in reports]
        samples, stats = build_reportgen(pairs, seed=cfg.seed)
        samples = split_by_record(samples, test_fraction, cfg.seed)
        path = out_dir / SUBSET_FILES["reportgen"]
        n = write_samples(path, samples)
        click.echo(f"wrote {n} samples to {path}")
        click.echo(f"emitted {stats.emitted}, dropped {dict(stats.dropped)}")

    elif subset == "localization":
        if not data_dir:
            raise click.ClickException("localization needs --data")
        store = _scan_records(data_dir)
        records = [store[k] for k in sorted(store)]
        samples, stats = build_localization(records, clip_mode=mode, seed=cfg.seed)
        samples = split_by_record(samples, test_fraction, cfg.seed)
        name = "localization" if mode == "short" else "localization-long"
        path = out_dir / SUBSET_FILES[name]
        n = write_samples(path, samples)
        click.echo(f"wrote {n} samples to {path}")
        click.echo(f"positives {dict(stats.positives)}, negatives {dict(stats.negatives)}, "
                   f"skipped {dict(stats.skipped)}")

    elif subset == "multiecg":
        if not patients_path:
            raise click.ClickException("multiecg needs --patients")
        raw = _load_json(patients_path, "patient groups")
        groups = []
        for pid in sorted(raw):
            entries = raw[pid]
            if not 2 <= len(entries) <= 6:
                click.echo(f"skipping patient {pid}: {len(entries)} records "
                           f"(need 2 to 6)")
                continue
            records = tuple(PatientRecord(
                record_id=e["record_id"],
                report_lines=tuple(e.get("reports") or [e["report"]]),
                acquired=date.fromisoformat(e["acquired"]),
            ) for e in entries)
            groups.append(PatientGroup(patient_id=pid, records=records))
        if not groups:
            raise click.ClickException("no usable patient groups (need 2 to 6 "
                                       "records per patient)")
        client = _make_client(cfg)
        samples, stats = build_multiecg(groups, client, seed=cfg.seed)
        samples = split_by_record(samples, test_fraction, cfg.seed)
        path = out_dir / SUBSET_FILES["multiecg"]
        n = write_samples(path, samples)
        click.echo(f"wrote {n} samples to {path}")
        click.echo(f"patients {stats.patients}, emitted {stats.emitted}, "
                   f"retries {stats.retries}, skipped lines {stats.skipped_lines}")

    else:
        source = out_dir / SUBSET_FILES["multiecg"]
        if not source.exists():
            raise click.ClickException(
                f"ecgqa thins the multiecg dataset; build it first ({source} missing)")
        samples = subset_ecgqa(read_samples(source), fraction=fraction, seed=cfg.seed)
        path = out_dir / SUBSET_FILES["ecgqa"]
        n = write_samples(path, samples)
        click.echo(f"wrote {n} samples to {path}")


def _first_clip(rec):
    """The leading 10 s of a record, zero-padded to a full clip."""
    clip = slice_record(rec, 0.0, min(10.0, rec.duration))
    if clip.n_samples < CLIP_SAMPLES:
        sig = np.zeros((12, CLIP_SAMPLES), dtype=np.float32)
        sig[:, :clip.n_samples] = clip.signal
        clip = clip.with_signal(sig, clip.lead_mask)
    return clip


@main.command()
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--reports", "reports_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--epochs", type=int, default=None)
@click.option("--batch", type=int, default=None)
@click.pass_obj
def pretrain(cfg: AppConfig, data_dir, reports_path, epochs, batch):
    """Contrastive encoder pretraining on (clip, report) pairs."""
    store = _scan_records(data_dir)
    reports = _load_json(reports_path, "reports")
    pairs = [(_first_clip(store[rid]), reports[rid])
             for rid in sorted(store) if rid in reports]
    if len(pairs) < 2:
        raise click.ClickException("need at least 2 paired records to pretrain")
    encoder = EcgEncoder(EncoderConfig(**cfg.encoder)) if cfg.encoder else None
    result = contrastive_pretrain(
        pairs, encoder=encoder,
        epochs=epochs if epochs is not None else int(cfg.contrastive.get("epochs", 10)),
        batch_size=batch if batch is not None else int(cfg.contrastive.get("batch", 8)),
        lr=float(cfg.contrastive.get("lr", 1e-3)), seed=cfg.seed)
    out_path = Path(cfg.out_dir) / "contrastive.pt"
    save_checkpoint(out_path, "contrastive", {"model": result.model.state_dict()})
    click.echo(f"saved {out_path} (final loss {result.losses[-1]:.4f})")


def _load_stage_items(cfg: AppConfig, tasks, store, split="train"):
    datasets = {}
    for task in sorted(tasks):
        path = _datasets_dir(cfg) / SUBSET_FILES[task]
        if not path.exists():
            continue
        samples = [s for s in read_samples(path) if s.split == split]
        items = [sample_to_item(s, store) for s in samples if
                 all(r.record_id in store for r in s.ecg_refs)]
        if items:
            datasets[task] = items
    return datasets


def _all_dataset_texts(cfg: AppConfig) -> list[str]:
    texts = []
    for name in SUBSET_FILES.values():
        path = _datasets_dir(cfg) / name
        if path.exists():
            for s in read_samples(path):
                texts.append(s.question)
                texts.append(s.answer)
    return texts


@main.command()
@click.option("--stage", type=click.IntRange(1, 3), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              required=True, help="Directory of ECG record files.")
@click.option("--max-steps", type=int, default=None, help="Cap steps for smoke runs.")
@click.pass_obj
def train(cfg: AppConfig, stage, data_dir, max_steps):
    """Run one curriculum stage; reads OUT/datasets, writes OUT/stage<N>.pt."""
    store = _scan_records(data_dir)
    spec = cfg.stage_spec(stage)
    datasets = _load_stage_items(cfg, spec.tasks, store)
    out_dir = Path(cfg.out_dir)

    prereq_name = "contrastive.pt" if stage == 1 else f"stage{stage - 1}.pt"
    prereq = out_dir / prereq_name
    if stage == 1:
        texts = _all_dataset_texts(cfg)
        if not texts:
            raise click.ClickException(f"no datasets under {out_dir / 'datasets'}; "
                                       "run `build` first")
        tokenizer = WordTokenizer.from_corpus(texts)
        encoder = EcgEncoder(EncoderConfig(**cfg.encoder))
        lm = ToyLm(LmConfig(vocab_size=len(tokenizer), **cfg.lm))
        model = EcgChatModel(encoder, lm, tokenizer)
    else:
        if not prereq.exists():
            raise click.ClickException(
                f"stage {stage} requires the stage {stage - 1} checkpoint at {prereq}")
        payload = load_checkpoint(prereq)
        model = model_from_manifest(payload["state"]["manifest"])

    try:
        result = run_stage(spec, datasets, model, out_dir,
                           prerequisite=prereq if prereq.exists() else None,
                           seed=cfg.seed, deterministic=cfg.deterministic,
                           max_steps=max_steps)
    except (FileNotFoundError, ValueError) as exc:
        raise click.ClickException(str(exc))
    frozen_ok = all(not report["changed"]
                    for group, report in result.freeze_report.items()
                    if group not in spec.trainable)
    click.echo(f"saved {result.checkpoint} ({len(result.losses)} steps, "
               f"final loss {result.losses[-1]:.4f})" if result.losses else
               f"saved {result.checkpoint} (no steps run)")
    click.echo(f"frozen groups unchanged: {frozen_ok}")


def _test_samples(cfg: AppConfig, task: str, store):
    path = _datasets_dir(cfg) / SUBSET_FILES[task]
    if not path.exists():
        raise click.ClickException(f"{path} missing; run `build {task}` first")
    samples = [s for s in read_samples(path) if s.split == "test" and
               all(r.record_id in store for r in s.ecg_refs)]
    if not samples:
        raise click.ClickException(f"{path} has no test rows matching --data records")
    return samples


@main.command("eval")
@click.argument("protocol", type=click.Choice(["reportgen", "localization",
                                               "ecgqa", "multiecg"]))
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--mask", "masks", multiple=True,
              type=click.Choice(["first", "second", "random"]),
              help="Add a lead-masking mode to the localization sweep.")
@click.option("--labels", "labels_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON mapping record id to its class labels (reportgen).")
@click.option("--patients", "patients_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON with per-record reports (multiecg judging).")
@click.option("--max-new", type=int, default=24, show_default=True)
@click.pass_obj
def eval_cmd(cfg: AppConfig, protocol, ckpt_path, data_dir, masks, labels_path,
             patients_path, max_new):
    """Evaluate a checkpoint; writes per-sample reports under OUT/eval."""
    model = load_chat_model(ckpt_path)
    store = _scan_records(data_dir)
    eval_dir = Path(cfg.out_dir) / "eval"

    if protocol == "localization":
        samples = _test_samples(cfg, "localization", store)
        modes = ("none", *masks)
        sweep = masking_sweep(model, samples, store, modes=modes, seed=cfg.seed,
                              max_new=max_new)
        click.echo(f"{'mode':<10} {'mean_iou':>9} {'failures':>9} {'n':>5}")
        for mode in modes:
            agg = sweep[mode].aggregates
            click.echo(f"{mode:<10} {agg['mean_iou']:>9.4f} "
                       f"{int(agg['parse_failures']):>9} {int(agg['n']):>5}")
            write_report(sweep[mode], eval_dir / f"localization-{mode}")

    elif protocol == "ecgqa":
        samples = _test_samples(cfg, "ecgqa", store)
        report = eval_exact_match(model, samples, store, max_new=max_new)
        write_report(report, eval_dir / "ecgqa")
        click.echo(f"exact-match accuracy {report.aggregates['accuracy']:.4f} "
                   f"on {int(report.aggregates['n'])} samples")

    elif protocol == "reportgen":
        if not labels_path:
            raise click.ClickException("reportgen evaluation needs --labels")
        samples = _test_samples(cfg, "reportgen", store)
        label_map = {k: set(v) for k, v in _load_json(labels_path, "labels").items()}
        class_names = sorted(set().union(*label_map.values())) if label_map else []
        labels = [label_map.get(s.ecg_refs[0].record_id, set()) for s in samples]
        report = eval_report_auc(model, samples, store, class_names, labels,
                                 max_new=max_new)
        write_report(report, eval_dir / "reportgen")
        click.echo(f"macro AUC {report.aggregates['macro_auc']:.4f} over "
                   f"{len(class_names)} classes")

    else:
        if not patients_path:
            raise click.ClickException("multiecg judging needs --patients")
        samples = _test_samples(cfg, "multiecg", store)
        raw = _load_json(patients_path, "patient groups")
        reports_by_record = {}
        for entries in raw.values():
            for e in entries:
                reports_by_record[e["record_id"]] = "\n".join(
                    e.get("reports") or [e["report"]])
        client = _make_client(cfg)
        entries = []
        for sample in samples:
            item = sample_to_item(sample, store)
            prediction = model.generate([item.messages[0]], list(item.records),
                                        max_new=max_new)
            reports = [reports_by_record.get(r.record_id, "") for r in sample.ecg_refs]
            entries.append((sample.question, reports, prediction))
        report, _ = eval_judge(entries, client)
        write_report(report, eval_dir / "multiecg")
        click.echo(f"mean judge score {report.aggregates['mean_score']:.2f} "
                   f"({int(report.aggregates['invalid'])} invalid)")


@main.command()
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--max-new", type=int, default=32, show_default=True)
@click.pass_obj
def serve(cfg: AppConfig, ckpt_path, host, port, max_new):
    """Serve the /v1 chat API over HTTP."""
    import uvicorn

    engine = ChatEngine(load_chat_model(ckpt_path), max_new=max_new, seed=cfg.seed)
    uvicorn.run(create_app(engine), host=host, port=port)


@main.command()
@click.option("--checkpoint", "ckpt_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--max-new", type=int, default=32, show_default=True)
@click.pass_obj
def chat(cfg: AppConfig, ckpt_path, max_new):
    """Interactive terminal chat against a checkpoint."""
    engine = ChatEngine(load_chat_model(ckpt_path), max_new=max_new, seed=cfg.seed)
    run_repl(engine, sys.stdin, sys.stdout)


if __name__ == "__main__":
    main()
