"""
command_line.py - The `generate / analyze / train / eval / sweep` commands

Every command reads one WorkbenchConfig (plus command-line overrides), writes
its outputs under paths.output_dir together with run_manifest.json, and is
reproducible from the config and master_seed alone.

Exit statuses: 0 success (including a degenerate-set diagnosis), 1 invalid
input or configuration, 2 runtime failure.
"""
import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
from tqdm import tqdm

from logic import __version__
from logic.errors import ConfigurationError, DatasetParseError, DomainError, WorkbenchError
from logic.evaluation import db_to_linear, evaluate_estimates
from logic.learning import (
    MlpEstimator,
    build_supervised_dataset,
    numerical_gradient_check,
    predict_channels,
    split_indices,
    train,
)
from logic.pilot_design import (
    corollary1_length,
    corollary_applies,
    distinguishability_report,
    min_pilot_length,
    pilot_requirement_curve,
    scan_mapping_angle,
)
from logic.quantized_frontend import generate_measurements
from logic.state_manager import WorkbenchConfig
from logic.sweep_processor import SweepProcessor
from utils.checkpoint_io import load_checkpoint, save_checkpoint
from utils.csv_export import CsvExporter
from utils.dataset_io import load_channels, load_measurements, read_manifest, save_measurements
from utils.excel_export import ExcelExporter
from utils.json_export import JsonExporter
from utils.pdf_export import PdfExporter
from utils.txt_export import TxtExporter

logger = logging.getLogger(__name__)

COMMANDS = ("generate", "analyze", "train", "eval", "sweep")
LOG_FILE_NAME = "mimo_workbench.log"
GRADIENT_TOLERANCE = 1e-4
EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 1, 2


def configure_logging(output_dir, verbose=False):
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[logging.FileHandler(output_dir / LOG_FILE_NAME, encoding="utf-8"),
                  logging.StreamHandler(sys.stderr)],
        force=True,
    )


class Workbench:
    """Runs workbench commands against one configuration"""

    def __init__(self, config, jobs=None, checkpoint=None, check_gradients=False, excel=False, pdf=False,
                 echo=print):
        self.config = config
        self.jobs = max(1, int(jobs or os.cpu_count() or 1))
        self.checkpoint = checkpoint
        self.check_gradients = check_gradients
        self.excel = excel
        self.pdf = pdf
        self.echo = echo
        self.outputs = []
        self.timings = {}

        self.csv_exporter = CsvExporter()
        self.json_exporter = JsonExporter()
        self.txt_exporter = TxtExporter()
        self.excel_exporter = ExcelExporter()
        self.pdf_exporter = PdfExporter()

    @property
    def output_dir(self):
        return self.config.output_dir

    def _export(self, result, path):
        success, message = result
        if success:
            self.outputs.append(Path(path))
            logger.info(message)
        else:
            # exporters already logged the cause
            raise WorkbenchError(message)

    # data sources

    def channels(self):
        dataset = self.config.paths["dataset"]
        if dataset:
            return load_channels(dataset)
        return self.config.scenario_params().build()

    def measurements(self):
        """Stored measurements when the dataset has them, otherwise simulated from the config"""
        dataset = self.config.paths["dataset"]
        if dataset and "measurements" in read_manifest(dataset):
            return load_measurements(dataset)
        return generate_measurements(self.channels(), self.config.pilot_sequence(), self.config.noise_spec())

    # commands

    def cmd_generate(self):
        config = self.config
        channels = config.scenario_params().build()
        measurements = generate_measurements(channels, config.pilot_sequence(), config.noise_spec())
        path = self.output_dir / "dataset.json"
        save_measurements(measurements, path)
        self.outputs.extend([path, path.with_suffix(".bin"), path.with_suffix(".meas.bin")])

        scan = scan_mapping_angle(channels, self.jobs)
        summary = {
            "M": channels.geometry.num_antennas,
            "num_users": len(channels),
            "L": channels.num_paths,
            "N": measurements.pilot.length,
            "noise": measurements.noise.label,
            "alpha": scan.alpha,
            "degenerate": scan.degenerate,
            "min_pilot_length": None if scan.degenerate else min_pilot_length(scan.alpha),
            "dataset": str(path),
        }
        self._export(self.json_exporter.write(summary, self.output_dir / "dataset_summary.json",
                                              "Dataset summary"), self.output_dir / "dataset_summary.json")
        self.echo(f"Generated {summary['num_users']} users: M={summary['M']}, L={summary['L']}, "
                  f"N={summary['N']}, noise={summary['noise']}")
        self.echo(f"alpha = {scan.alpha:.6e} rad, minimum pilot length {summary['min_pilot_length']}")
        return summary

    def build_analysis(self, channels):
        config = self.config
        scan = scan_mapping_angle(channels, self.jobs)
        lengths = config.analysis["pilot_lengths"] or [config.pilot["length"]]
        corollary = None
        if corollary_applies(channels):
            corollary = corollary1_length(channels.geometry.num_antennas, channels.aoa_separation)
        reports = []
        for n in lengths:
            report = distinguishability_report(channels, config.pilot_sequence(int(n)), alpha_scan=scan,
                                               max_listed_pairs=config.analysis["max_listed_pairs"],
                                               jobs=self.jobs)
            report.corollary1_length = corollary
            reports.append(report.to_dict())

        requirements = []
        if config.analysis["antenna_counts"]:
            if config.paths["dataset"]:
                logger.warning("analysis.antenna_counts needs a synthetic scenario; skipped for file datasets")
            else:
                rows = pilot_requirement_curve(config.scenario_params(), config.analysis["antenna_counts"],
                                               self.jobs)
                requirements = [r.to_dict() for r in rows]

        return {
            "channel_set": {
                "M": channels.geometry.num_antennas,
                "num_users": len(channels),
                "L": channels.num_paths,
                "gain_model": channels.gain_model,
                "aoa_separation": channels.aoa_separation,
                "seed": channels.seed,
            },
            "alpha": scan.alpha,
            "closest_pair": list(scan.closest_pair),
            "degenerate": scan.degenerate,
            "min_pilot_length": None if scan.degenerate else min_pilot_length(scan.alpha),
            "corollary1_length": corollary,
            "reports": reports,
            "pilot_requirements": requirements,
        }

    def cmd_analyze(self):
        analysis = self.build_analysis(self.channels())
        out = self.output_dir
        self._export(self.json_exporter.export_analysis(analysis, out / "bijectivity_report.json"),
                     out / "bijectivity_report.json")
        self._export(self.txt_exporter.export_analysis_summary(analysis, out / "bijectivity_summary.txt"),
                     out / "bijectivity_summary.txt")
        if analysis["pilot_requirements"]:
            self._export(self.csv_exporter.export_pilot_requirements(analysis["pilot_requirements"],
                                                                     out / "pilot_requirements.csv"),
                         out / "pilot_requirements.csv")
        if self.excel:
            self._export(self.excel_exporter.export_analysis_workbook(analysis, out / "bijectivity_report.xlsx"),
                         out / "bijectivity_report.xlsx")
        if self.pdf:
            self._export(self.pdf_exporter.export_analysis_report(analysis, out / "bijectivity_report.pdf"),
                         out / "bijectivity_report.pdf")
        if analysis["degenerate"]:
            self.echo("Degenerate channel set: some channels cannot be told apart by any pilot")
        self.echo(f"alpha = {analysis['alpha']:.6e} rad, minimum pilot length {analysis['min_pilot_length']}"
                  + (f", closed form {analysis['corollary1_length']}" if analysis["corollary1_length"] else ""))
        for r in analysis["reports"]:
            self.echo(f"N={r['pilot_length']}: {r['distinguishable_fraction']:.6f} of pairs distinguishable")
        return analysis

    def _split(self, num_samples):
        return split_indices(num_samples, self.config.shuffle_seed, self.config.sweep["train_fraction"])

    def _gradient_check(self, dataset, num_antennas, pilot_length):
        """Backprop against finite differences on a narrow f64 copy of the architecture"""
        narrow = MlpEstimator(num_antennas, pilot_length, hidden_width=8, dropout_rate=0.0, precision="f64",
                             seed=self.config.master_seed)
        rows = dataset.train_indices[:4]
        scale = float(np.max(np.abs(dataset.targets[rows])))
        error = numerical_gradient_check(narrow, dataset.inputs[rows], dataset.targets[rows] / scale)
        logger.info("Gradient check: max relative error %.3e", error)
        if error > GRADIENT_TOLERANCE:
            raise WorkbenchError(f"Gradient check failed: relative error {error:.3e} > {GRADIENT_TOLERANCE}")
        return error

    def cmd_train(self):
        config = self.config
        trainer = config.training_config()
        measurements = self.measurements()
        dataset = build_supervised_dataset(measurements, config.shuffle_seed, config.sweep["train_fraction"])
        m, n = dataset.num_antennas, dataset.pilot_length
        gradient_error = self._gradient_check(dataset, m, n) if self.check_gradients else None

        model = MlpEstimator.from_config(m, n, trainer)
        with tqdm(total=trainer.epochs, desc="train", unit="epoch", disable=None) as bar:
            def progress(epoch, record):
                bar.update(1)
                bar.set_postfix(train=f"{record.train_nmse:.4g}",
                                test="-" if record.test_nmse is None else f"{record.test_nmse:.4g}")
            result = train(model, dataset, trainer, progress)

        out = self.output_dir
        checkpoint = Path(self.checkpoint or config.paths["checkpoint"] or out / "model.json")
        save_checkpoint(model, checkpoint)
        self.outputs.extend([checkpoint, checkpoint.with_suffix(".bin")])
        self._export(self.csv_exporter.export_loss_history(result.history, out / "loss_history.csv"),
                     out / "loss_history.csv")
        final = result.history[-1]
        metrics = {"M": m, "N": n, "epochs": trainer.epochs, "train_size": int(dataset.train_indices.size),
                   "test_size": int(dataset.test_indices.size), "train_nmse": final.train_nmse,
                   "test_nmse": final.test_nmse, "gradient_check_error": gradient_error,
                   "checkpoint": str(checkpoint)}
        self._export(self.json_exporter.write(metrics, out / "train_metrics.json", "Training metrics"),
                     out / "train_metrics.json")
        self.echo(f"Trained {model.layer_sizes}: train NMSE {final.train_nmse:.4e}, "
                  f"test NMSE {'-' if final.test_nmse is None else format(final.test_nmse, '.4e')}")
        return metrics

    def cmd_eval(self):
        config = self.config
        checkpoint = self.checkpoint or config.paths["checkpoint"] or (self.output_dir / "model.json")
        model = load_checkpoint(checkpoint)
        measurements = self.measurements()
        _, m, n = measurements.signs.shape
        if (model.num_antennas, model.pilot_length) != (m, n):
            raise ConfigurationError(
                f"Checkpoint expects M={model.num_antennas}, N={model.pilot_length}; data has M={m}, N={n}")
        _, test_idx = self._split(len(measurements))
        if test_idx.size == 0:
            raise ConfigurationError("The test split is empty; lower sweep.train_fraction or add users")

        estimates = predict_channels(model, measurements.vectors[test_idx])
        result = evaluate_estimates(measurements.channels.matrix[test_idx], estimates,
                                    db_to_linear(config.sweep["rho_db"]))
        metrics = result.to_dict()
        metrics.update({"M": m, "N": n, "checkpoint": str(checkpoint), "rho_db": config.sweep["rho_db"]})
        self._export(self.json_exporter.write(metrics, self.output_dir / "eval_metrics.json", "Evaluation metrics"),
                     self.output_dir / "eval_metrics.json")
        self.echo(f"Test NMSE {result.nmse:.4e} over {result.num_samples} users")
        self.echo(f"Per-antenna SNR {result.mean_snr_per_antenna_db:.3f} dB "
                  f"(upper bound {result.upper_bound_db:.3f} dB)")
        return result

    def cmd_sweep(self):
        plan = self.config.experiment_plan()
        with tqdm(total=len(plan.cells), desc="sweep", unit="cell", disable=None) as bar:
            def progress(done, total):
                bar.update(done - bar.n)
            report = SweepProcessor(plan, jobs=self.jobs, progress=progress).run()

        out = self.output_dir
        self._export(self.csv_exporter.export_sweep(report, out / "sweep_report.csv"), out / "sweep_report.csv")
        self._export(self.json_exporter.export_sweep(report, out / "sweep_report.json"), out / "sweep_report.json")
        self._export(self.csv_exporter.export_nmse_vs_antennas(report, out / "fig_nmse_vs_antennas.csv"),
                     out / "fig_nmse_vs_antennas.csv")
        self._export(self.csv_exporter.export_snr_vs_antennas(report, out / "fig_snr_vs_antennas.csv"),
                     out / "fig_snr_vs_antennas.csv")
        self._export(self.txt_exporter.export_sweep_summary(report, out / "sweep_summary.txt"),
                     out / "sweep_summary.txt")
        if self.excel:
            self._export(self.excel_exporter.export_sweep_workbook(report, out / "sweep_report.xlsx"),
                         out / "sweep_report.xlsx")
        if self.pdf:
            self._export(self.pdf_exporter.export_sweep_report(report, out / "sweep_report.pdf"),
                         out / "sweep_report.pdf")
        failed = report.failed_records()
        self.echo(f"Sweep: {len(report.records)} cells, {len(failed)} failed")
        for r in failed:
            self.echo(f"  failed M={r.M} N={r.N} {r.snr} {r.estimator}: {r.reason}")
        return report

    def run(self, command):
        if command not in COMMANDS:
            raise ConfigurationError(f"Unknown command {command!r}, expected one of {COMMANDS}")
        started = time.perf_counter()
        result = getattr(self, f"cmd_{command}")()
        self.timings[command] = time.perf_counter() - started
        self._export(self.json_exporter.export_run_manifest(self.output_dir, command, self.config,
                                                            self.timings, self.outputs),
                     self.output_dir / "run_manifest.json")
        return result


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mimo_workbench",
        description="1-bit massive MIMO channel estimation workbench",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Command to run")
    helps = {
        "generate": "Synthesize a channel set and its quantized measurements",
        "analyze": "Mapping angle, required pilot length and distinguishability",
        "train": "Train the dense-network estimator and save a checkpoint",
        "eval": "Evaluate a checkpoint on the test split",
        "sweep": "Run the (M, N, SNR, estimator) experiment grid",
    }
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=helps[name])
        sub.add_argument("-c", "--config", help="Workbench config (JSON); defaults apply when omitted")
        sub.add_argument("--seed", type=int, help="Override master_seed")
        sub.add_argument("-o", "--output-dir", help="Override paths.output_dir")
        sub.add_argument("-j", "--jobs", type=int, help="Worker threads for pair scans and sweep cells "
                                                        "(default: all cores)")
        sub.add_argument("--precision", choices=["f32", "f64"], help="Override training.precision")
        sub.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
        if name in ("train", "eval"):
            sub.add_argument("--checkpoint", help="Checkpoint manifest path")
        if name == "train":
            sub.add_argument("--check-gradients", action="store_true",
                             help="Compare backprop with finite differences before training")
        if name in ("analyze", "sweep"):
            sub.add_argument("--excel", action="store_true", help="Also write an Excel workbook")
            sub.add_argument("--pdf", action="store_true", help="Also write a PDF report")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_INVALID

    try:
        config = WorkbenchConfig.load(args.config) if args.config else WorkbenchConfig()
        config = config.with_overrides(seed=args.seed, output_dir=args.output_dir, precision=args.precision)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_INVALID

    configure_logging(config.output_dir, args.verbose)
    workbench = Workbench(
        config,
        jobs=args.jobs,
        checkpoint=getattr(args, "checkpoint", None),
        check_gradients=getattr(args, "check_gradients", False),
        excel=getattr(args, "excel", False),
        pdf=getattr(args, "pdf", False),
    )
    try:
        workbench.run(args.command)
    except (DomainError, ConfigurationError, DatasetParseError) as e:
        logger.error("%s failed: %s", args.command, e)
        return EXIT_INVALID
    except Exception as e:
        logger.exception("%s failed: %s", args.command, e)
        return EXIT_FAILURE
    return EXIT_OK
