"""
sweep_processor.py - Runs (M, N, SNR, estimator) experiment grids

Each cell re-synthesizes the same users at its antenna count, measures them
with a designed pilot of the cell's length, trains or fits the estimator on
the 70/30 split and records NMSE and per-antenna SNR on the test split. A
cell that fails is annotated and the sweep carries on.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from logic.channel_model import ArrayGeometry, ChannelSet, ScenarioParams
from logic.errors import ConfigurationError, WorkbenchError
from logic.evaluation import db_to_linear, evaluate_estimates
from logic.learning import (
    TRAIN_FRACTION,
    MlpEstimator,
    NearestNeighborEstimator,
    SupervisedDataset,
    TrainingConfig,
    channels_to_real,
    predict_channels,
    split_indices,
    train,
)
from logic.pilot_design import DEGENERATE_ANGLE, compute_alpha, design_pilot, min_pilot_length
from logic.quantized_frontend import generate_measurements
from utils.dataset_io import load_channels

logger = logging.getLogger(__name__)

ESTIMATORS = ("mlp", "nearest_neighbor")


@dataclass(frozen=True)
class ExperimentPlan:
    antenna_counts: tuple
    pilot_lengths: tuple
    snr_points: tuple
    scenario: ScenarioParams = None
    dataset_path: str = None
    trainer: TrainingConfig = TrainingConfig()
    estimators: tuple = ("mlp",)
    rho_db: float = 0.0
    pilot_power: float = 1.0
    train_fraction: float = TRAIN_FRACTION
    shuffle_seed: int = 0
    analyze_alpha: bool = False
    output_dir: str = "output"

    def __post_init__(self):
        for name in ("antenna_counts", "pilot_lengths", "snr_points", "estimators"):
            value = tuple(getattr(self, name))
            if not value:
                raise ConfigurationError(f"Sweep axis '{name}' is empty")
            object.__setattr__(self, name, value)
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigurationError(f"Unknown estimators {sorted(unknown)}, expected a subset of {ESTIMATORS}")
        if (self.scenario is None) == (self.dataset_path is None):
            raise ConfigurationError("A sweep needs exactly one of a scenario or a dataset path")

    @property
    def cells(self):
        """Cell coordinates in report order: (M, N, snr index, estimator)"""
        return [(m, n, s, est)
                for m in self.antenna_counts
                for n in self.pilot_lengths
                for s in range(len(self.snr_points))
                for est in self.estimators]


@dataclass
class SweepRecord:
    M: int
    N: int
    snr: str
    estimator: str
    status: str = "ok"
    reason: str = None
    test_nmse: float = None
    train_nmse: float = None
    mean_snr_per_antenna_db: float = None
    upper_bound_db: float = None
    train_size: int = 0
    test_size: int = 0
    alpha: float = None
    min_pilot_length: int = None
    wall_time: float = None

    def to_dict(self, include_timing=True):
        data = asdict(self)
        if not include_timing:
            data.pop("wall_time")
        return data


@dataclass
class SweepReport:
    records: list = field(default_factory=list)

    def ok_records(self):
        return [r for r in self.records if r.status == "ok"]

    def failed_records(self):
        return [r for r in self.records if r.status != "ok"]

    def find(self, M, N, snr, estimator):
        for record in self.records:
            if (record.M, record.N, record.snr, record.estimator) == (M, N, snr, estimator):
                return record
        return None

    def to_dict(self, include_timing=False):
        return {"records": [r.to_dict(include_timing) for r in self.records]}

    def series(self, metric, estimator=None):
        """{(estimator, N, snr): [(M, value), ...]} over successful cells, M ascending"""
        out = {}
        for r in self.ok_records():
            if estimator is not None and r.estimator != estimator:
                continue
            out.setdefault((r.estimator, r.N, r.snr), []).append((r.M, getattr(r, metric)))
        return {key: sorted(points) for key, points in out.items()}


def _load_dataset_channels(path, num_antennas):
    """Channels of an external dataset truncated to the first `num_antennas` elements"""
    full = load_channels(path)
    if full.geometry.num_antennas < num_antennas:
        raise ConfigurationError(
            f"Dataset {path} has {full.geometry.num_antennas} antennas, cell needs {num_antennas}")
    geometry = ArrayGeometry(num_antennas, full.geometry.element_spacing)
    return ChannelSet.from_matrix(full.matrix[:, :num_antennas], geometry, seed=full.seed,
                                  num_paths=full.num_paths, gain_model=full.gain_model,
                                  aoa_separation=full.aoa_separation)


class SweepProcessor:
    """Runs every cell of an ExperimentPlan, reporting progress through a callback"""

    def __init__(self, plan, jobs=1, progress=None):
        self.plan = plan
        self.jobs = max(1, int(jobs))
        self.progress = progress
        self._channel_cache = {}
        self._alpha_cache = {}

    def channels_for(self, num_antennas):
        if num_antennas not in self._channel_cache:
            if self.plan.scenario is not None:
                channels = self.plan.scenario.build(num_antennas)
            else:
                channels = _load_dataset_channels(self.plan.dataset_path, num_antennas)
            self._channel_cache[num_antennas] = channels
        return self._channel_cache[num_antennas]

    def _alpha(self, num_antennas, channels):
        if num_antennas not in self._alpha_cache:
            self._alpha_cache[num_antennas] = compute_alpha(channels)
        return self._alpha_cache[num_antennas]

    def run(self):
        plan = self.plan
        cells = plan.cells
        # channel sets are built up front so worker threads only read them
        for m in plan.antenna_counts:
            try:
                channels = self.channels_for(m)
                if plan.analyze_alpha:
                    self._alpha(m, channels)
            except WorkbenchError as exc:
                logger.warning("Channels for M=%d unavailable: %s", m, exc)

        grouped = {}
        for cell in cells:
            grouped.setdefault(cell[:3], []).append(cell[3])
        groups = list(grouped.items())

        done = 0
        records = {}
        if self.jobs == 1:
            results = map(self._run_group, groups)
            for group_records in results:
                records.update(group_records)
                done += len(group_records)
                self._report(done, len(cells))
        else:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                for group_records in pool.map(self._run_group, groups):
                    records.update(group_records)
                    done += len(group_records)
                    self._report(done, len(cells))

        report = SweepReport([records[cell] for cell in cells])
        failed = report.failed_records()
        logger.info("Sweep finished: %d cells, %d failed", len(cells), len(failed))
        return report

    def _report(self, done, total):
        if self.progress is not None:
            self.progress(done, total)

    def _run_group(self, item):
        """All estimators of one (M, N, snr) cell share channels, pilot and measurements"""
        (m, n, s), estimators = item
        plan = self.plan
        noise = plan.snr_points[s]
        out = {}
        started = time.perf_counter()
        try:
            channels = self.channels_for(m)
            pilot = design_pilot(n, plan.pilot_power)
            measurements = generate_measurements(channels, pilot, noise)
            train_idx, test_idx = split_indices(len(channels), plan.shuffle_seed, plan.train_fraction)
            shared_error = None
        except (WorkbenchError, ValueError) as exc:
            shared_error = exc
        setup_time = time.perf_counter() - started

        for est in estimators:
            record = SweepRecord(M=m, N=n, snr=noise.label, estimator=est)
            cell_started = time.perf_counter()
            if shared_error is not None:
                record.status, record.reason = "failed", str(shared_error)
                logger.warning("Cell M=%d N=%d snr=%s %s failed: %s", m, n, noise.label, est, shared_error)
            else:
                try:
                    self._run_estimator(record, est, channels, measurements, train_idx, test_idx)
                except (WorkbenchError, ValueError, FloatingPointError) as exc:
                    record.status, record.reason = "failed", str(exc)
                    logger.warning("Cell M=%d N=%d snr=%s %s failed: %s", m, n, noise.label, est, exc)
            record.wall_time = setup_time + time.perf_counter() - cell_started
            out[(m, n, s, est)] = record
        return out

    def _run_estimator(self, record, estimator, channels, measurements, train_idx, test_idx):
        plan = self.plan
        if test_idx.size == 0:
            raise ConfigurationError("The test split is empty; use more users or a smaller train fraction")
        inputs = measurements.vectors
        truth = channels.matrix
        record.train_size, record.test_size = int(train_idx.size), int(test_idx.size)

        if estimator == "mlp":
            dataset = SupervisedDataset(inputs, channels_to_real(channels), train_idx, test_idx,
                                        plan.shuffle_seed, record.M, record.N)
            model = MlpEstimator.from_config(record.M, record.N, plan.trainer)
            train(model, dataset, plan.trainer)
            train_est = predict_channels(model, inputs[train_idx])
            test_est = predict_channels(model, inputs[test_idx])
        else:
            knn = NearestNeighborEstimator(inputs[train_idx], truth[train_idx])
            train_est = knn.estimate(inputs[train_idx])
            test_est = knn.estimate(inputs[test_idx])

        rho = db_to_linear(plan.rho_db)
        train_metrics = evaluate_estimates(truth[train_idx], train_est, rho)
        test_metrics = evaluate_estimates(truth[test_idx], test_est, rho)
        record.train_nmse = train_metrics.nmse
        record.test_nmse = test_metrics.nmse
        record.mean_snr_per_antenna_db = test_metrics.mean_snr_per_antenna_db
        record.upper_bound_db = test_metrics.upper_bound_db
        if plan.analyze_alpha:
            alpha = self._alpha_cache.get(record.M)
            if alpha is not None:
                record.alpha = alpha
                record.min_pilot_length = min_pilot_length(alpha) if alpha > DEGENERATE_ANGLE else None
        logger.info("Cell M=%d N=%d snr=%s %s: test NMSE %.4g", record.M, record.N, record.snr,
                    estimator, record.test_nmse)


def run_sweep(plan, jobs=1, progress=None):
    return SweepProcessor(plan, jobs, progress).run()
