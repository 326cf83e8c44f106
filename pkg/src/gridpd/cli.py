"""Command-line interface.

Subcommands mirror the pipeline stages so each artifact can be built,
inspected, and reused independently:

    synth      generate a labeled synthetic set
    preprocess peak + chunk feature CSVs
    select     fit the MI bin selection
    cluster    fit the frequency k-means (and optionally sweep k)
    train      train the base classifier into a bundle directory
    finetune   add per-cluster fine-tuned models to a bundle
    eval       score a labeled set with a bundle
    bench      time the feature stages
    report     figure-equivalent CSV data (peak scatter, MI curve,
               band histogram, silhouette sweep)

Exit codes: 0 success, 1 usage error, 2 data/processing error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cluster import (
    FrequencyKMeans,
    cluster_report,
    load_cluster_model,
    save_cluster_model,
    sweep_k,
)
from .errors import GridPdError
from .freqfeat import (
    SpectrumBinSelector,
    load_selection,
    mi_report,
    save_selection,
    select_top_coefficients,
)
from .io import load_signal_set, save_signal_set
from .metrics import compute_metrics, write_metrics_csv
from .nn.checkpoint import load_bundle, save_bundle
from .nn.model import ModelConfig
from .nn.train import ModelBundle, TrainConfig, fine_tune_per_cluster, train
from .pipeline import benchmark_features
from .signals import SynthConfig
from .synthetic import generate_synthetic
from .timefeat import (
    ChunkStatisticsExtractor,
    DEFAULT_CHUNK_STATS,
    PeakFeatureExtractor,
    write_chunk_features_csv,
    write_peak_features_csv,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_config(path):
    if path is None:
        return {}
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text.decode())


def _cfgval(args, config, key, default):
    """CLI flag beats config file beats built-in default."""
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    return config.get(key, default)


def _build_parser():
    # --seed/--config are accepted both before and after the subcommand;
    # SUPPRESS keeps the subparser from clobbering a value parsed earlier
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="global seed (overrides config file)")
    shared.add_argument("--config", default=argparse.SUPPRESS,
                        help="TOML or JSON config file; keys mirror the "
                             "SynthConfig/TrainConfig field names")

    parser = _Parser(prog="gridpd", description=__doc__, parents=[shared],
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[shared], **kwargs)

    p = add_parser("synth", help="generate a labeled synthetic set")
    p.add_argument("--n", type=int, default=None, help="number of signals")
    p.add_argument("--pd-rate", type=float, default=None)
    p.add_argument("--t", type=int, default=None, help="samples per signal")
    p.add_argument("--rate", type=float, default=None, help="sample rate Hz")
    p.add_argument("--out", required=True, help=".gpd or .csv output path")

    p = add_parser("preprocess", help="write peak + chunk feature CSVs")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rate", type=float, default=1.0, help="rate for CSV input")
    p.add_argument("--outdir", required=True)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--neighborhood", type=int, default=None)
    p.add_argument("--threshold-factor", type=float, default=None)
    p.add_argument("--chunks", type=int, default=None)

    p = add_parser("select", help="fit MI-based spectral bin selection")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--mi-bins", type=int, default=None)
    p.add_argument("--out", required=True, help="selection JSON path")
    p.add_argument("--report", default=None, help="optional MI report CSV")

    p = add_parser("cluster", help="fit frequency k-means")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--selection", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", required=True, help="cluster model JSON path")
    p.add_argument("--report", default=None,
                   help="cluster composition CSV (labeled sets only)")
    p.add_argument("--sweep", default=None, metavar="LO:HI",
                   help="also sweep k over [LO, HI] and write CSV next "
                        "to --out")

    p = add_parser("train", help="train the base classifier")
    p.add_argument("--train", dest="train_set", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--selection", required=True)
    p.add_argument("--outdir", required=True, help="bundle directory")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--chunks", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--kernel-sizes", default=None, metavar="K1,K2")

    p = add_parser("finetune", help="add per-cluster fine-tuned models")
    p.add_argument("--train", dest="train_set", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--bundle", required=True)
    p.add_argument("--cluster-model", required=True)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--chunks", type=int, default=None)

    p = add_parser("eval", help="score a labeled set with a bundle")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--bundle", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.add_argument("--chunks", type=int, default=None)

    p = add_parser("bench", help="time the feature stages")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--chunks", type=int, default=None)
    p.add_argument("--out", required=True, help="timing CSV path")

    p = add_parser("report", help="figure-equivalent CSV data")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--rate", type=float, default=1.0)
    p.add_argument("--outdir", required=True)
    p.add_argument("--chunks", type=int, default=None)
    p.add_argument("--fraction", type=float, default=None)
    p.add_argument("--mi-bins", type=int, default=None)
    p.add_argument("--sweep", default="2:8", metavar="LO:HI")
    p.add_argument("--bands", type=int, default=20,
                   help="bands in the selected-bin histogram")
    return parser


def _seed(args, config):
    seed = getattr(args, "seed", None)
    if seed is not None:
        return seed
    return int(config.get("seed", 0))


def _features(signal_set, config, args):
    m = _cfgval(args, config, "chunks", 160)
    peaks_x = PeakFeatureExtractor(
        cutoff_hz=getattr(args, "cutoff", None),
        neighborhood=getattr(args, "neighborhood", None),
        threshold_factor=_cfgval(args, config, "threshold-factor", 0.5),
    ).transform(signal_set)
    chunks_x = ChunkStatisticsExtractor(
        m=m, cutoff_hz=getattr(args, "cutoff", None)
    ).transform(signal_set)
    return chunks_x, peaks_x


def _cmd_synth(args, config):
    seed = _seed(args, config)
    n = _cfgval(args, config, "n", None) or config.get("n_signals")
    if n is None:
        raise UsageError("synth requires --n")
    rate = float(_cfgval(args, config, "rate", 4e6))
    T = int(_cfgval(args, config, "t", config.get("T", 8000)))
    cfg = SynthConfig(
        n_signals=int(n),
        T=T,
        sample_rate_hz=rate,
        # one fundamental cycle fits the window unless configured
        fundamental_hz=float(config.get("fundamental_hz", rate / T)),
        pd_rate=float(_cfgval(args, config, "pd-rate", 0.06)),
        pd_band_hz=tuple(config.get("pd_band_hz", (0.075 * rate, 0.1 * rate))),
        seed=seed,
    )
    signal_set = generate_synthetic(cfg)
    save_signal_set(signal_set, args.out)
    print(f"wrote {len(signal_set)} signals "
          f"({int(signal_set.labels_vector().sum())} positive) to {args.out}")
    return 0


def _cmd_preprocess(args, config):
    signal_set = load_signal_set(args.inp, sample_rate_hz=args.rate)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    chunks_x, peaks_x = _features(signal_set, config, args)
    ids = signal_set.ids()
    labels = signal_set.labels_vector() if signal_set.labeled else None
    write_peak_features_csv(outdir / "peaks.csv", ids, peaks_x, labels)
    write_chunk_features_csv(outdir / "chunks.csv", ids, chunks_x,
                             DEFAULT_CHUNK_STATS, labels)
    print(f"wrote {outdir / 'peaks.csv'} and {outdir / 'chunks.csv'}")
    return 0


def _cmd_select(args, config):
    signal_set = load_signal_set(args.inp, sample_rate_hz=args.rate)
    selection = select_top_coefficients(
        signal_set,
        fraction=_cfgval(args, config, "fraction", 0.01),
        n_bins=_cfgval(args, config, "mi-bins", 10),
    )
    save_selection(selection, args.out)
    if args.report:
        mi_report(selection, args.report)
    print(f"selected {selection.n_selected} of {selection.n_bins_total} bins "
          f"-> {args.out}")
    return 0


def _cmd_cluster(args, config):
    signal_set = load_signal_set(args.inp, sample_rate_hz=args.rate)
    selection = load_selection(args.selection)
    selector = SpectrumBinSelector()
    selector.selection_ = selection
    freq_x = selector.transform(signal_set)
    seed = _seed(args, config)
    k = _cfgval(args, config, "k", 5)
    model = FrequencyKMeans(k=k, seed=seed).fit(freq_x)
    save_cluster_model(model, args.out)
    print(f"fit k={k} clusters, inertia {model.inertia_:.4g} -> {args.out}")
    if args.report:
        report = cluster_report(model, freq_x, signal_set.labels_vector())
        report.write_csv(args.report)
        print(f"wrote {args.report}")
    if args.sweep:
        lo, hi = (int(v) for v in args.sweep.split(":"))
        rows = sweep_k(freq_x, range(lo, hi + 1), seed=seed)
        sweep_path = Path(args.out).with_suffix(".sweep.csv")
        with open(sweep_path, "w") as fh:
            fh.write("k,silhouette_mean\n")
            for kk, score in rows:
                fh.write(f"{kk},{repr(score)}\n")
        print(f"wrote {sweep_path}")
    return 0


def _train_config(args, config, seed):
    return TrainConfig(
        lr=float(_cfgval(args, config, "lr", 0.001)),
        epochs=int(_cfgval(args, config, "epochs", 30)),
        batch_size=int(_cfgval(args, config, "batch-size",
                               config.get("batch_size", 32))),
        seed=seed,
        grad_clip=config.get("grad_clip"),
    )


def _cmd_train(args, config):
    signal_set = load_signal_set(args.train_set, sample_rate_hz=args.rate)
    selection = load_selection(args.selection)
    selector = SpectrumBinSelector()
    selector.selection_ = selection
    freq_x = selector.transform(signal_set)
    chunks_x, peaks_x = _features(signal_set, config, args)
    labels = signal_set.labels_vector()
    seed = _seed(args, config)
    kernel_sizes = (5, 10)
    if args.kernel_sizes:
        kernel_sizes = tuple(int(v) for v in args.kernel_sizes.split(","))
    model_config = ModelConfig(
        r=chunks_x.shape[1], m=chunks_x.shape[2], n_freq=freq_x.shape[1],
        n_peaks=peaks_x.shape[1],
        hidden=int(_cfgval(args, config, "hidden", 32)),
        kernel_sizes=kernel_sizes,
    )
    cfg = _train_config(args, config, seed)
    model, history = train(chunks_x, freq_x, peaks_x, labels, cfg,
                           model_config=model_config)
    bundle = ModelBundle(base=model, selection=selection)
    save_bundle(bundle, args.outdir)
    final = history[-1] if history else float("nan")
    print(f"trained {cfg.epochs} epochs (final loss {final:.4g}) "
          f"-> {args.outdir}")
    return 0


def _cmd_finetune(args, config):
    signal_set = load_signal_set(args.train_set, sample_rate_hz=args.rate)
    bundle = load_bundle(args.bundle)
    if bundle.selection is None:
        raise GridPdError(f"bundle {args.bundle} has no selection.json")
    cluster_model = load_cluster_model(args.cluster_model)
    selector = SpectrumBinSelector()
    selector.selection_ = bundle.selection
    freq_x = selector.transform(signal_set)
    chunks_x, peaks_x = _features(signal_set, config, args)
    labels = signal_set.labels_vector()
    seed = _seed(args, config)
    cfg = _train_config(args, config, seed)
    tuned = fine_tune_per_cluster(
        bundle.base, cluster_model, chunks_x, freq_x, peaks_x, labels, cfg
    )
    tuned.selection = bundle.selection
    save_bundle(tuned, args.bundle)
    print(f"fine-tuned clusters {sorted(tuned.per_cluster)} -> {args.bundle}")
    return 0


def _cmd_eval(args, config):
    signal_set = load_signal_set(args.inp, sample_rate_hz=args.rate)
    labels = signal_set.labels_vector()  # raises LabelMissing when absent
    bundle = load_bundle(args.bundle)
    if bundle.selection is None:
        raise GridPdError(f"bundle {args.bundle} has no selection.json")
    selector = SpectrumBinSelector()
    selector.selection_ = bundle.selection
    freq_x = selector.transform(signal_set)
    chunks_x, peaks_x = _features(signal_set, config, args)
    threshold = float(_cfgval(args, config, "threshold", 0.5))
    routed = bundle.predict_proba(chunks_x, freq_x, peaks_x)
    pooled, _ = bundle.base.forward_batch(chunks_x, freq_x, peaks_x)
    rows = [("base", compute_metrics(pooled, labels, threshold))]
    if bundle.per_cluster:
        rows.append(("multitask", compute_metrics(routed, labels, threshold)))
    write_metrics_csv(args.out, rows)
    for name, m in rows:
        print(f"{name}: f1={m.f1:.4f} mcc={m.mcc:.4f} auc={m.auc:.4f} "
              f"accuracy={m.accuracy:.4f}")
    return 0


def _cmd_bench(args, config):
    signal_set = load_signal_set(args.inp, sample_rate_hz=args.rate)
    report = benchmark_features(
        signal_set, repetitions=args.reps,
        m_chunks=_cfgval(args, config, "chunks", 160),
    )
    report.write_csv(args.out)
    for name, mean, runs in report.entries:
        print(f"{name}: {mean * 1e3:.4f} ms/signal over {runs} runs")
    return 0


def _cmd_report(args, config):
    signal_set = load_signal_set(args.inp, sample_rate_hz=args.rate)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = _seed(args, config)

    chunks_x, peaks_x = _features(signal_set, config, args)
    labels = signal_set.labels_vector() if signal_set.labeled else None
    with open(outdir / "peaks_scatter.csv", "w") as fh:
        fh.write("id,count,mean_amp,label\n")
        for i, sig_id in enumerate(signal_set.ids()):
            lab = "" if labels is None else int(labels[i])
            fh.write(f"{sig_id},{int(peaks_x[i, 0])},"
                     f"{repr(float(peaks_x[i, 1]))},{lab}\n")

    if not signal_set.labeled:
        print(f"wrote {outdir / 'peaks_scatter.csv'} (unlabeled set: "
              "skipping MI and clustering reports)")
        return 0

    selection = select_top_coefficients(
        signal_set,
        fraction=_cfgval(args, config, "fraction", 0.01),
        n_bins=_cfgval(args, config, "mi-bins", 10),
    )
    mi_report(selection, outdir / "mi_sorted.csv")

    nyquist = signal_set.sample_rate_hz / 2.0
    edges = np.linspace(0.0, nyquist, args.bands + 1)
    bin_hz = signal_set.sample_rate_hz / signal_set.T
    freqs = selection.selected_bins * bin_hz
    counts, _ = np.histogram(freqs, bins=edges)
    with open(outdir / "band_histogram.csv", "w") as fh:
        fh.write("band_low_hz,band_high_hz,selected_bins\n")
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{repr(float(lo))},{repr(float(hi))},{int(c)}\n")

    selector = SpectrumBinSelector()
    selector.selection_ = selection
    freq_x = selector.transform(signal_set)
    lo, hi = (int(v) for v in args.sweep.split(":"))
    hi = min(hi, len(freq_x))
    rows = sweep_k(freq_x, range(lo, hi + 1), seed=seed)
    with open(outdir / "silhouette_sweep.csv", "w") as fh:
        fh.write("k,silhouette_mean\n")
        for kk, score in rows:
            fh.write(f"{kk},{repr(score)}\n")
    print(f"wrote peak scatter, MI curve, band histogram and silhouette "
          f"sweep under {outdir}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "preprocess": _cmd_preprocess,
    "select": _cmd_select,
    "cluster": _cmd_cluster,
    "train": _cmd_train,
    "finetune": _cmd_finetune,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(getattr(args, "config", None))
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except GridPdError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
