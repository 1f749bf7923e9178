"""Command-line entry points for every pipeline stage.

Exit codes: 0 on success, 1 on systemic failure (unexpected per-scan errors,
unreadable manifests), 2 on configuration problems. All thresholds come from
the config file plus repeatable --set overrides; the worker count can also be
set via the COLONPIPE_WORKERS environment variable.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dataprep, nifti, phantom
from .airseg import segment_air, validate_scan
from .config import ConfigError, PipelineConfig, load_config, parse_override
from .errors import ColonPipeError
from .fluid import FluidContext, fluid_postprocess, import_fluid_nifti, import_fluid_slices
from .manifest import (
    EVENT_EXPORTED_TRAINING,
    EVENT_FLUID_FUSED,
    EVENT_SLICES_EXPORTED,
    EVENT_SPLIT_ASSIGNED,
    Manifest,
    report_funnel,
)
from .metrics import evaluate as evaluate_masks
from .morphology import remove_small_components
from .pipeline import _find_fluid_source, run_pipeline
from .records import Position, ScanStatus
from .volume import AIR, FLUID, LabelMap, Mask


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Config file (flat key = value TOML).")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override one config value; repeatable.")
@click.pass_context
def main(ctx, config_path, overrides):
    """Rule-based CT colonography annotation pipeline."""
    try:
        pairs = dict(parse_override(item) for item in overrides)
        ctx.obj = load_config(config_path, pairs)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        ctx.exit(2)


def _cfg(ctx) -> PipelineConfig:
    return ctx.obj


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command()
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), required=True,
              help="Output directory for the manifest.")
@click.option("--meta", "metadata_csv", type=click.Path(exists=True), default=None,
              help="CSV with scan_id,position,gender,age columns.")
@click.pass_context
def validate(ctx, input_path, out_dir, metadata_csv):
    """Register scans and check their acquisition geometry only."""
    from .manifest import (
        EVENT_RUN_STARTED,
        EVENT_SCAN_EXCLUDED,
        EVENT_SCAN_REGISTERED,
    )
    from .pipeline import discover_scans, load_metadata_csv
    from .records import ExclusionReason

    cfg = _cfg(ctx)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out / "manifest.jsonl")
    if manifest.path.exists():
        manifest.path.unlink()
    manifest.append(EVENT_RUN_STARTED, config_hash=cfg.content_hash(),
                    config=cfg.to_dict())
    meta = load_metadata_csv(metadata_csv)
    n_bad = 0
    for scan_id, path in discover_scans(input_path):
        entry = meta.get(scan_id, {})
        manifest.append(EVENT_SCAN_REGISTERED, scan_id=scan_id,
                        paths={"image": str(path)},
                        **{k: entry[k] for k in ("position", "gender", "age")
                           if k in entry})
        try:
            volume = nifti.read_volume(path)
        except ColonPipeError as exc:
            manifest.append(EVENT_SCAN_EXCLUDED, scan_id=scan_id,
                            reason=ExclusionReason.DISRUPTED_FORMAT.value,
                            detail=str(exc))
            n_bad += 1
            continue
        reason = validate_scan(volume, cfg)
        if reason is not None:
            manifest.append(EVENT_SCAN_EXCLUDED, scan_id=scan_id,
                            reason=reason.value, detail=f"dims {volume.shape}")
            n_bad += 1
    click.echo(f"validated {len(discover_scans(input_path))} scans, "
               f"{n_bad} excluded; manifest at {manifest.path}")


@main.command("segment-air")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--fluid-dir", type=click.Path(exists=True), default=None,
              help="Directory of raw fluid predictions to fuse in the same pass.")
@click.option("--meta", "metadata_csv", type=click.Path(exists=True), default=None)
@click.option("--workers", type=int, default=1, envvar="COLONPIPE_WORKERS",
              show_default=True)
@click.pass_context
def segment_air_cmd(ctx, input_path, out_dir, fluid_dir, metadata_csv, workers):
    """Run the automatic air-colon segmentation over a scan directory."""
    cfg = _cfg(ctx)
    manifest, errors = run_pipeline(input_path, cfg, out_dir, workers=workers,
                                    fluid_dir=fluid_dir, metadata_csv=metadata_csv)
    counts = report_funnel(manifest.replay())
    click.echo(f"processed {counts['total']} scans: {counts['included']} included")
    if errors:
        _fail(f"{errors} scans failed unexpectedly (see stderr above)")


@main.command("fluid-post")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--fluid-dir", type=click.Path(exists=True), required=True)
@click.pass_context
def fluid_post(ctx, manifest_path, fluid_dir):
    """Import raw fluid predictions for included scans and fuse them."""
    cfg = _cfg(ctx)
    manifest = Manifest(manifest_path)
    state = manifest.replay()
    n_done = 0
    for rec in sorted(state.included(), key=lambda r: r.scan_id):
        source = _find_fluid_source(Path(fluid_dir), rec.scan_id)
        if source is None:
            continue
        labels_path = rec.paths.get("labels")
        if not labels_path:
            continue
        labels = nifti.read_labels(labels_path)
        air = labels.air_mask()
        if source.is_dir():
            raw = import_fluid_slices(source, rec.scan_id, air)
        else:
            raw = import_fluid_nifti(source, air)
        ctx_fluid = FluidContext(air=air, fluid_raw=raw, cfg=cfg,
                                 position=rec.position)
        fused = fluid_postprocess(ctx_fluid)
        nifti.write_labels(labels_path, fused)
        manifest.append(EVENT_FLUID_FUSED, scan_id=rec.scan_id,
                        paths={"labels": labels_path})
        n_done += 1
    click.echo(f"fused fluid for {n_done} scans")


@main.command("prep-masks")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--coarse-dir", type=click.Path(exists=True), required=True,
              help="Directory of coarse masks named <scan_id>.nii.gz.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def prep_masks(ctx, input_path, coarse_dir, out_dir):
    """Blank each volume outside its dilated coarse mask."""
    from .pipeline import discover_scans

    cfg = _cfg(ctx)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_done = 0
    for scan_id, path in discover_scans(input_path):
        coarse = _find_fluid_source(Path(coarse_dir), scan_id)
        if coarse is None or coarse.is_dir():
            click.echo(f"no coarse mask for {scan_id}, skipping", err=True)
            continue
        volume = nifti.read_volume(path)
        arr, spacing = nifti.read_array(coarse)
        masked = dataprep.prepare_masked_image(
            volume, Mask(arr != 0, volume.spacing), cfg
        )
        nifti.write_volume(out / f"{scan_id}.nii.gz", masked)
        n_done += 1
    click.echo(f"masked {n_done} volumes into {out}")


@main.command("export-slices")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def export_slices(ctx, manifest_path, out_dir, seed):
    """Export random air-bearing axial slices as annotation PNGs."""
    cfg = _cfg(ctx)
    manifest = Manifest(manifest_path)
    state = manifest.replay()
    n_files = 0
    for rec in sorted(state.included(), key=lambda r: r.scan_id):
        volume = nifti.read_volume(rec.paths["image"])
        labels = nifti.read_labels(rec.paths["labels"])
        export = dataprep.export_annotation_slices(
            volume, labels.air_mask(), cfg, seed, out_dir, rec.scan_id
        )
        if export.warning:
            click.echo(f"{rec.scan_id}: {export.warning}", err=True)
        manifest.append(EVENT_SLICES_EXPORTED, scan_id=rec.scan_id,
                        rng_seed=seed, z_indices=export.z_indices,
                        paths={"slices_dir": str(out_dir)})
        n_files += len(export.paths)
    click.echo(f"exported {n_files} slice images to {out_dir}")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Where to write the split JSON.")
@click.pass_context
def split(ctx, manifest_path, seed, out_path):
    """Assign included scans to train/test, stratified by gender and position."""
    cfg = _cfg(ctx)
    manifest = Manifest(manifest_path)
    state = manifest.replay()
    assignment = dataprep.stratified_split(list(state.records.values()), cfg, seed)
    dataprep.save_split(assignment, out_path)
    manifest.append(EVENT_SPLIT_ASSIGNED, assignment=assignment, rng_seed=seed)
    n_train = sum(1 for side in assignment.values() if side == dataprep.TRAIN)
    click.echo(f"split {len(assignment)} scans: {n_train} train, "
               f"{len(assignment) - n_train} test -> {out_path}")


@main.command("export-training")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--split", "split_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--target", type=click.Choice(["air", "full"]), default="air",
              show_default=True)
@click.option("--separate-classes", is_flag=True,
              help="Keep air and fluid as distinct label values for 'full'.")
@click.pass_context
def export_training(ctx, manifest_path, split_path, out_dir, target, separate_classes):
    """Write the external trainer's imagesTr/labelsTr/imagesTs layout."""
    manifest = Manifest(manifest_path)
    state = manifest.replay()
    assignment = dataprep.load_split(split_path)
    layout = dataprep.export_training_layout(
        list(state.records.values()), assignment, out_dir,
        target=target, separate_classes=separate_classes,
    )
    manifest.append(EVENT_EXPORTED_TRAINING, root=str(layout.root), target=target,
                    n_train=layout.n_train, n_test=layout.n_test)
    click.echo(f"exported {layout.n_train} training and {layout.n_test} test scans "
               f"to {layout.root}")


@main.command()
@click.option("--in-dir", "in_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def refine(ctx, in_dir, out_dir):
    """Drop small islands from predicted label maps, class by class."""
    from .pipeline import discover_scans

    cfg = _cfg(ctx)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_done = 0
    for scan_id, path in discover_scans(in_dir):
        labels = nifti.read_labels(path)
        fused = np.zeros(labels.shape, dtype=np.uint8)
        for value in (FLUID, AIR):
            kept = remove_small_components(
                labels.labels == value, cfg.island_min_voxels, cfg.connectivity
            )
            fused[kept] = value
        nifti.write_labels(out / f"{scan_id}.nii.gz", LabelMap(fused, labels.spacing))
        n_done += 1
    click.echo(f"refined {n_done} label maps into {out}")


@main.command()
@click.option("--pred-dir", type=click.Path(exists=True), required=True)
@click.option("--ref-dir", type=click.Path(exists=True), required=True)
@click.option("--label-class", type=click.Choice(["air", "fluid", "any"]),
              default="air", show_default=True,
              help="Which label value to score as the foreground mask.")
@click.option("--refine", "do_refine", is_flag=True,
              help="Island-filter predictions before scoring.")
@click.option("--method", default="method", show_default=True,
              help="Method tag for the report rows.")
@click.option("--out-json", type=click.Path(), default=None)
@click.option("--out-csv", type=click.Path(), default=None)
@click.pass_context
def evaluate(ctx, pred_dir, ref_dir, label_class, do_refine, method, out_json, out_csv):
    """Score predicted label maps against references."""
    from .pipeline import discover_scans

    cfg = _cfg(ctx)

    def load_masks(directory):
        masks = {}
        for scan_id, path in discover_scans(directory):
            labels = nifti.read_labels(path)
            if label_class == "air":
                bits = labels.labels == AIR
            elif label_class == "fluid":
                bits = labels.labels == FLUID
            else:
                bits = labels.labels != 0
            masks[scan_id] = Mask(bits, labels.spacing)
        return masks

    report = evaluate_masks(load_masks(pred_dir), load_masks(ref_dir),
                            do_refine, cfg, method=method)
    if out_json:
        Path(out_json).write_text(report.to_json())
    if out_csv:
        Path(out_csv).write_text(report.to_csv())
    for method_name, stats in report.aggregate().items():
        for metric, agg in stats.items():
            click.echo(f"{method_name} {metric}: median {agg['median']:.4f} "
                       f"(95% CI {agg['ci_lo']:.4f}..{agg['ci_hi']:.4f}, n={agg['n']})")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--as-json", "as_json", is_flag=True)
@click.pass_context
def report(ctx, manifest_path, as_json):
    """Print the inclusion/exclusion funnel from a manifest."""
    counts = report_funnel(Manifest(manifest_path).replay())
    if as_json:
        click.echo(json.dumps(counts, indent=2))
        return
    for key, value in counts.items():
        click.echo(f"{key}: {value}")


@main.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
@click.option("--frontend", "frontend_dir", type=click.Path(), default=None,
              help="Directory with the built review UI (mounted at /).")
@click.pass_context
def serve(ctx, manifest_path, host, port, frontend_dir):
    """Serve the review API (and UI, when built) over HTTP."""
    import uvicorn

    from .server import create_app

    if frontend_dir is None:
        # Default UI: ./frontend/dist, falling back to the build shipped
        # alongside the package checkout (covers serving from any cwd).
        repo_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        for candidate in (Path("frontend/dist"), repo_dist):
            if candidate.is_dir():
                frontend_dir = str(candidate)
                break
    app = create_app(manifest_path, _cfg(ctx), frontend_dir)
    uvicorn.run(app, host=host, port=port)


@main.command("make-phantoms")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--suite", type=click.Choice(["demo", "funnel"]), default="demo",
              show_default=True)
@click.pass_context
def make_phantoms(ctx, out_dir, suite):
    """Generate synthetic scans with known ground truth."""
    out = Path(out_dir)
    images = out / "images"
    images.mkdir(parents=True, exist_ok=True)
    if suite == "demo":
        truth_dir = out / "truth"
        fluid_dir = out / "fluid"
        truth_dir.mkdir(exist_ok=True)
        fluid_dir.mkdir(exist_ok=True)
        truth = phantom.standard_phantom()
        nifti.write_volume(images / "phantom.nii.gz", truth.volume)
        nifti.write_array(fluid_dir / "phantom.nii.gz",
                          truth.fluid_raw.bits.astype(np.uint8),
                          truth.fluid_raw.spacing)
        from .volume import compose_labels

        nifti.write_labels(truth_dir / "phantom.nii.gz",
                           compose_labels(truth.air, truth.fluid))
        click.echo(f"demo phantom written under {out}")
        return

    for name, volume in phantom.funnel_suite().items():
        nifti.write_volume(images / f"{name}.nii.gz", volume)
    intact = (images / "valid.nii.gz").read_bytes()
    (images / "disrupted.nii.gz").write_bytes(intact[:200])
    config_path = out / "config.toml"
    config_path.write_text(
        "# downscaled gates matching the funnel suite's phantom sizes\n"
        "min_axial_slices = 100\n"
        "max_axial_slices = 300\n"
        "min_inplane_px = 96\n"
    )
    click.echo(f"funnel suite written under {out}; use --config {config_path}")


if __name__ == "__main__":
    main()
