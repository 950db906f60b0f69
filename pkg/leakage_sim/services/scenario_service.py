import logging
import math
import time
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..config import RunConfig
from ..engines import DensityEngine, Experiment, RunOutput, TrajectoryEngine, outcome_string
from ..models import EngineComparison, ResultsDocument, ScenarioResult
from ..stats import sign_test_pvalue
from ..utils.io import write_results, write_shot_log
from .scenarios import Scenario, ScenarioContext, scenario_library

logger = logging.getLogger(__name__)

SIGMA_BOUND = 4.0
SIGN_TEST_SEEDS = 20


def deviation_bound(probability: float, shots: float) -> float:
    """Four-sigma binomial bound plus one count of granularity for rare outcomes."""
    p = min(max(probability, 0.0), 1.0)
    return SIGMA_BOUND * math.sqrt(p * (1.0 - p) / shots) + 1.0 / shots


def compare_outputs(sampled: RunOutput, exact: RunOutput) -> List[EngineComparison]:
    """Per-outcome deviation of sampled frequencies from exact probabilities."""
    keys = sorted(set(sampled.tally) | set(exact.tally), key=outcome_string)
    comparisons = []
    for key in keys:
        frequency = sampled.tally.get(key, 0.0) / sampled.shots
        probability = exact.tally.get(key, 0.0) / exact.shots
        deviation = frequency - probability
        bound = deviation_bound(probability, sampled.shots)
        comparisons.append(
            EngineComparison(
                experiment=sampled.label,
                outcome=outcome_string(key),
                frequency=frequency,
                probability=probability,
                deviation=deviation,
                bound=bound,
                within_bound=abs(deviation) <= bound,
            )
        )
    return comparisons


def max_deviation(comparisons: Iterable[EngineComparison]) -> Dict[str, float]:
    """Largest absolute deviation per outcome string across experiments."""
    worst: Dict[str, float] = {}
    for item in comparisons:
        worst[item.outcome] = max(worst.get(item.outcome, 0.0), abs(item.deviation))
    return worst


class ScenarioService:
    """Runs library scenarios on either engine and assembles results documents."""

    def __init__(self, config: RunConfig, progress: bool = False):
        self.config = config
        self.progress = progress
        self.library = scenario_library()

    # ------------------------------------------------------------------ #
    # Lookup
    # ------------------------------------------------------------------ #
    def scenario(self, name: Optional[str] = None) -> Scenario:
        name = name or self.config.scenario
        try:
            return self.library[name]
        except KeyError as exc:
            known = ", ".join(sorted(self.library))
            raise ValueError(f"unknown scenario {name!r}; known scenarios: {known}") from exc

    def _context(self, engine: str, seed: Optional[int] = None) -> ScenarioContext:
        return ScenarioContext(
            model=self.config.noise,
            shots=self.config.shots,
            seed=self.config.seed if seed is None else seed,
            engine=engine,
        )

    # ------------------------------------------------------------------ #
    # Execution
    # ------------------------------------------------------------------ #
    def _trajectory_outputs(
        self,
        experiments: Sequence[Experiment],
        seed: int,
        keep_records: bool,
    ) -> Dict[str, RunOutput]:
        engine = TrajectoryEngine(
            self.config.noise,
            seed,
            workers=self.config.workers,
            progress=self.progress,
            keep_records=keep_records,
            processes=self.config.parallelism == "process",
        )
        return {
            experiment.label: engine.run(experiment, self.config.shots, experiment_index=index)
            for index, experiment in enumerate(experiments)
        }

    def _density_outputs(self, experiments: Sequence[Experiment]) -> Dict[str, RunOutput]:
        engine = DensityEngine(self.config.noise)
        return {experiment.label: engine.run(experiment, shots=float(self.config.shots)) for experiment in experiments}

    def _execute(self, engine: str) -> Tuple[Scenario, Dict[str, RunOutput], ScenarioResult]:
        scenario = self.scenario()
        ctx = self._context(engine)
        experiments = scenario.experiments(ctx)
        logger.info("Running %s on the %s engine (%s experiments)", scenario.name, engine, len(experiments))
        start = time.perf_counter()
        if engine == TrajectoryEngine.name:
            outputs = self._trajectory_outputs(experiments, ctx.seed, keep_records=self.config.shot_log is not None)
        else:
            outputs = self._density_outputs(experiments)
        result = scenario.analyze(ctx, outputs)
        logger.info("Finished %s (%s) in %.2fs", scenario.name, engine, time.perf_counter() - start)
        return scenario, outputs, result

    def _document(self, results: List[ScenarioResult], start: float) -> ResultsDocument:
        return ResultsDocument(
            config=self.config.echo(),
            seed=self.config.seed,
            scenarios=results,
            wall_clock_seconds=time.perf_counter() - start,
        )

    def _persist(self, document: ResultsDocument, outputs: Optional[Dict[str, RunOutput]] = None) -> None:
        if self.config.output is not None:
            write_results(document, self.config.output)
            logger.info("Wrote results to %s", self.config.output)
        if self.config.shot_log is not None and outputs:
            records = [record for output in outputs.values() for record in output.records]
            write_shot_log(records, self.config.shot_log)
            logger.info("Wrote %s shot records to %s", len(records), self.config.shot_log)

    def run_trajectories(self) -> ResultsDocument:
        start = time.perf_counter()
        _, outputs, result = self._execute(TrajectoryEngine.name)
        document = self._document([result], start)
        self._persist(document, outputs)
        return document

    def run_density(self) -> ResultsDocument:
        start = time.perf_counter()
        _, _, result = self._execute(DensityEngine.name)
        document = self._document([result], start)
        self._persist(document)
        return document

    def run(self) -> ResultsDocument:
        """Dispatch on ``config.engine``; ``both`` also attaches the engine comparison."""
        if self.config.engine == TrajectoryEngine.name:
            return self.run_trajectories()
        if self.config.engine == DensityEngine.name:
            return self.run_density()
        start = time.perf_counter()
        scenario, sampled, sampled_result = self._execute(TrajectoryEngine.name)
        _, exact, exact_result = self._execute(DensityEngine.name)
        sampled_result.comparisons = self._compare(scenario, sampled, exact)
        document = self._document([sampled_result, exact_result], start)
        self._persist(document, sampled)
        return document

    # ------------------------------------------------------------------ #
    # Engine comparison
    # ------------------------------------------------------------------ #
    def _compare(
        self,
        scenario: Scenario,
        sampled: Dict[str, RunOutput],
        exact: Dict[str, RunOutput],
    ) -> List[EngineComparison]:
        comparisons: List[EngineComparison] = []
        for label in sampled:
            if scenario.compared(label):
                comparisons.extend(compare_outputs(sampled[label], exact[label]))
        outside = [c for c in comparisons if not c.within_bound]
        for item in outside:
            logger.warning(
                "%s outcome %s: frequency %.5f vs probability %.5f exceeds the %.5f bound",
                item.experiment,
                item.outcome,
                item.frequency,
                item.probability,
                item.bound,
            )
        return comparisons

    def compare_engines(self) -> List[EngineComparison]:
        scenario = self.scenario()
        ctx = self._context(TrajectoryEngine.name)
        experiments = [e for e in scenario.experiments(ctx) if scenario.compared(e.label)]
        sampled = self._trajectory_outputs(experiments, ctx.seed, keep_records=False)
        exact = self._density_outputs(experiments)
        return self._compare(scenario, sampled, exact)

    def sign_bias_pvalue(self, seeds: int = SIGN_TEST_SEEDS) -> float:
        """Sign test on the deviation of each compared experiment's most likely outcome over a seed sweep."""
        scenario = self.scenario()
        experiments = [e for e in scenario.experiments(self._context(TrajectoryEngine.name)) if scenario.compared(e.label)]
        exact = self._density_outputs(experiments)
        leading = {label: max(output.tally, key=output.tally.get) for label, output in exact.items()}
        deviations: List[float] = []
        for offset in range(seeds):
            sampled = self._trajectory_outputs(experiments, self.config.seed + offset, keep_records=False)
            for label, key in leading.items():
                frequency = sampled[label].tally.get(key, 0.0) / sampled[label].shots
                deviations.append(frequency - exact[label].tally[key] / exact[label].shots)
        p_value = sign_test_pvalue(deviations)
        logger.info("Sign test over %s seeds of %s: p=%.4f", seeds, scenario.name, p_value)
        return p_value


def run_trajectories(config: RunConfig) -> ResultsDocument:
    return ScenarioService(config).run_trajectories()


def run_density(config: RunConfig) -> ResultsDocument:
    return ScenarioService(config).run_density()


def compare_engines(config: RunConfig) -> List[EngineComparison]:
    return ScenarioService(config).compare_engines()


def list_scenarios() -> Dict[str, str]:
    return {name: scenario.summary for name, scenario in sorted(scenario_library().items())}
