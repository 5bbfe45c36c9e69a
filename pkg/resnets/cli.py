"""Command-line entry point: generate, cbt, embed, predict, evaluate.

Every subcommand writes its results into --out and refuses to overwrite an
existing result file unless --force is given. Exit codes: 0 success, 1 usage
error, 2 validation error, 3 training divergence, 4 I/O error.
"""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence
import functools
import logging
import sys

import click
import numpy as np
from dotenv import load_dotenv
from tqdm.auto import tqdm

from .embedding import Features, Prior, TrainConfig, train_embedding
from .errors import ConfigError, DimensionMismatchError, OverwriteRefusedError, ResnetsError
from .evaluation import CBT_ID, EvalConfig, emit_plot_data, loocv, summarize
from .networks import absolute_error_map, mad, mse
from .seeding import derive_seed
from .selection import Method, predict_trajectory, selected_subjects
from .storage import (
    load_matrix,
    load_population,
    save_array,
    save_embedding,
    save_json,
    save_matrix,
    save_report,
    write_population,
)
from .synthetic import SynthConfig, generate as generate_population
from .template import estimate_cbt

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
CONTEXT_SETTINGS = dict(show_default=True)


class Verbosity(str, Enum):
    QUIET = "quiet"
    NORMAL = "normal"
    DEBUG = "debug"

    @property
    def level(self) -> int:
        return {"quiet": logging.WARNING, "normal": logging.INFO, "debug": logging.DEBUG}[self.value]


@dataclass
class GlobalOptions:
    """Options shared by every subcommand"""
    seed: int = 42
    output_dir: Path = Path("results")
    verbosity: Verbosity = Verbosity.NORMAL
    force: bool = False

    def validate(self):
        """Validate configuration parameters"""
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def progress(self) -> bool:
        return self.verbosity is not Verbosity.QUIET

    def output(self, name: str) -> Path:
        return self.output_dir / name

    def claim(self, *names: str) -> None:
        """Fail before any work is done if a result file would be overwritten"""
        if self.force:
            return
        for name in names:
            if self.output(name).exists():
                raise OverwriteRefusedError(f"{self.output(name)} already exists (use --force to overwrite)")


def setup_logging(verbosity: Verbosity) -> None:
    logging.basicConfig(
        level=verbosity.level,
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )


def common_options(f):
    """--seed, --out, --verbosity and --force, collected into a GlobalOptions"""
    @functools.wraps(f)
    def wrapper(seed, out, verbosity, force, **kwargs):
        options = GlobalOptions(seed, Path(out), Verbosity(verbosity), force)
        options.validate()
        setup_logging(options.verbosity)
        return f(options, **kwargs)

    decorators = [
        click.option("--seed", type=int, default=42, help="Experiment seed; every random stream derives from it."),
        click.option("--out", "out", type=click.Path(file_okay=False), default="results",
                     help="Directory for result files (created if absent)."),
        click.option("--verbosity", type=click.Choice([v.value for v in Verbosity]), default="normal",
                     help="Logging level on stderr."),
        click.option("--force", is_flag=True, default=False, help="Overwrite existing result files."),
    ]
    for decorator in reversed(decorators):
        wrapper = decorator(wrapper)
    return wrapper


def train_options(f):
    """Flags mirroring TrainConfig, collected into one config seeded by --seed"""
    defaults = TrainConfig()

    @functools.wraps(f)
    def wrapper(options, learning_rate_encoder, learning_rate_discriminator, iterations,
                noise_sigma, h, adversarial_weight, prior, features, sum_reconstruction, **kwargs):
        config = TrainConfig(
            learning_rate_encoder=learning_rate_encoder,
            learning_rate_discriminator=learning_rate_discriminator,
            iterations=iterations,
            noise_sigma=noise_sigma,
            h=h,
            adversarial_weight=adversarial_weight,
            prior=prior,
            features=features,
            sum_reconstruction=sum_reconstruction,
            seed=options.seed,
        )
        config.validate()
        return f(options, config, **kwargs)

    decorators = [
        click.option("--learning-rate-encoder", type=float, default=defaults.learning_rate_encoder,
                     help="SGD learning rate of the graph-convolutional encoder."),
        click.option("--learning-rate-discriminator", type=float, default=defaults.learning_rate_discriminator,
                     help="SGD learning rate of the discriminator."),
        click.option("--iterations", type=int, default=defaults.iterations, help="Training iterations per network."),
        click.option("--noise-sigma", type=float, default=defaults.noise_sigma,
                     help="Std of the Gaussian noise added between the two graph convolutions."),
        click.option("--h", "h", type=int, default=defaults.h, help="Embedding width per ROI."),
        click.option("--adversarial-weight", type=float, default=defaults.adversarial_weight,
                     help="Weight of the generator loss in the encoder objective."),
        click.option("--prior", type=click.Choice([p.value for p in Prior]), default=defaults.prior.value,
                     help="Distribution of the discriminator's real samples."),
        click.option("--features", type=click.Choice([x.value for x in Features]), default=defaults.features.value,
                     help="Node feature matrix fed to the encoder."),
        click.option("--sum-reconstruction/--mean-reconstruction", default=defaults.sum_reconstruction,
                     help="Sum or average the edge cross-entropy in the encoder objective."),
    ]
    for decorator in reversed(decorators):
        wrapper = decorator(wrapper)
    return wrapper


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _parse_methods(ctx, param, value: str) -> List[Method]:
    methods = []
    for item in _split(value):
        try:
            methods.append(Method(item))
        except ValueError:
            choices = ", ".join(m.value for m in Method)
            raise click.BadParameter(f"unknown method '{item}' (choose from {choices})") from None
    if not methods:
        raise click.BadParameter("at least one method is required")
    return methods


def _parse_k_values(ctx, param, value: str) -> List[int]:
    try:
        k_values = [int(item) for item in _split(value)]
    except ValueError:
        raise click.BadParameter(f"expected a comma-separated list of integers, got '{value}'") from None
    if not k_values:
        raise click.BadParameter("at least one K value is required")
    return k_values


@click.group(context_settings=CONTEXT_SETTINGS)
def cli():
    """Predict follow-up brain networks from a single baseline observation."""


@cli.command(context_settings=CONTEXT_SETTINGS)
@common_options
@click.option("--subjects", type=int, default=40, help="Number of subjects.")
@click.option("--rois", type=int, default=35, help="Number of regions of interest per network.")
@click.option("--clusters", type=int, default=4, help="Number of latent subject clusters.")
@click.option("--timepoints", type=int, default=2, help="Number of timepoints, baseline included.")
@click.option("--within-cluster-noise", type=float, default=0.1,
              help="Std of each subject's thickness deviation from its cluster, kept across timepoints.")
@click.option("--timepoint-noise", type=float, default=0.0, help="Std of fresh thickness noise at every timepoint.")
@click.option("--between-cluster-separation", type=float, default=5.0,
              help="Minimum Euclidean distance between cluster prototypes.")
@click.option("--drift-scale", type=float, default=0.2, help="Std of each cluster's per-timepoint drift.")
def generate(options: GlobalOptions, subjects, rois, clusters, timepoints,
             within_cluster_noise, timepoint_noise, between_cluster_separation, drift_scale):
    """Generate a synthetic clustered longitudinal population."""
    config = SynthConfig(
        n_subjects=subjects,
        n_rois=rois,
        n_clusters=clusters,
        n_timepoints=timepoints,
        within_cluster_noise=within_cluster_noise,
        timepoint_noise=timepoint_noise,
        between_cluster_separation=between_cluster_separation,
        drift_scale=drift_scale,
        seed=options.seed,
    )
    options.claim("manifest.json", "clusters.json")
    synth = generate_population(config)
    manifest = write_population(synth.population, options.output_dir, options.force)
    save_json({"config": config.to_dict(), "clusters": synth.cluster_of},
              options.output("clusters.json"), options.force)
    logger.info(f"Population manifest written to {manifest}")


@cli.command(context_settings=CONTEXT_SETTINGS)
@common_options
@click.option("--manifest", type=click.Path(dir_okay=False), required=True, help="Population manifest JSON.")
@click.option("--timepoint", default=None, help="Timepoint label (default: the baseline).")
def cbt(options: GlobalOptions, manifest, timepoint: Optional[str]):
    """Estimate the population template network at one timepoint."""
    options.claim("cbt.csv", "cbt_chosen.json")
    population = load_population(manifest)
    timepoint = timepoint or population.baseline
    result = estimate_cbt(population, timepoint)
    save_matrix(result.template, options.output("cbt.csv"), options.force)
    payload = result.to_payload(population.subject_ids)
    payload["timepoint"] = timepoint
    save_json(payload, options.output("cbt_chosen.json"), options.force)
    logger.info(f"Template at '{timepoint}' written to {options.output('cbt.csv')}")


@cli.command(context_settings=CONTEXT_SETTINGS)
@common_options
@train_options
@click.option("--matrix", type=click.Path(dir_okay=False), required=True, help="Connectivity matrix CSV.")
def embed(options: GlobalOptions, config: TrainConfig, matrix):
    """Train an adversarial graph embedding for one network."""
    options.claim("embedding.csv", "embedding.json")
    network = load_matrix(matrix)
    subject_id = Path(matrix).stem
    embedding = train_embedding(network, config, subject_id)
    save_embedding(embedding, options.output("embedding.csv"), options.force)
    trace = embedding.trace
    save_json({
        "subject": subject_id,
        "n_rois": network.n_rois,
        "config": config.to_dict(),
        "initial_reconstruction": trace.initial_reconstruction,
        "final_reconstruction": trace.final_reconstruction,
    }, options.output("embedding.json"), options.force)
    logger.info(
        f"Embedding of length {len(embedding)} written; reconstruction loss "
        f"{trace.initial_reconstruction:.4f} -> {trace.final_reconstruction:.4f}"
    )


@cli.command(context_settings=CONTEXT_SETTINGS)
@common_options
@train_options
@click.option("--manifest", type=click.Path(dir_okay=False), required=True, help="Training population manifest.")
@click.option("--test-subject", default=None, help="Hold this manifest subject out and predict it.")
@click.option("--baseline", "baseline_path", type=click.Path(dir_okay=False), default=None,
              help="Baseline matrix CSV of a new subject to predict.")
@click.option("--method", type=click.Choice([m.value for m in Method]), default=Method.RESNETS.value,
              help="Neighbor-selection method.")
@click.option("--k", "k", type=int, default=3, help="Number of neighbors to average.")
@click.option("--cosine", "use_cosine", is_flag=True, default=False,
              help="Use cosine instead of dot product for the esnets/snets baselines.")
@click.option("--figure", is_flag=True, default=False, help="Render per-timepoint error heatmaps.")
def predict(options: GlobalOptions, config: TrainConfig, manifest, test_subject: Optional[str],
            baseline_path: Optional[str], method: str, k: int, use_cosine: bool, figure: bool):
    """Predict the follow-up networks of one subject."""
    if (test_subject is None) == (baseline_path is None):
        raise click.UsageError("give exactly one of --test-subject or --baseline")
    method = Method(method)
    population = load_population(manifest)

    truth = None
    if test_subject is not None:
        training, truth = population.without(test_subject)
        test_id, test_network = test_subject, truth.at(population.baseline)
    else:
        training = population
        test_network = load_matrix(baseline_path)
        test_id = Path(baseline_path).stem
        if test_network.n_rois != training.n_rois:
            raise DimensionMismatchError(
                f"baseline has {test_network.n_rois} ROIs, the population has {training.n_rois}"
            )

    names = [f"predicted_{t}.csv" for t in training.follow_ups] + ["prediction.json"]
    if truth is not None:
        names += [f"error_map_{t}.csv" for t in training.follow_ups]
    options.claim(*names)

    cbt_embedding = test_embedding = train_embeddings = None
    if method.needs_embeddings:
        result = estimate_cbt(training, training.baseline)
        train_embeddings = [
            train_embedding(s.at(training.baseline), config, s.subject_id)
            for s in tqdm(training.subjects, desc="Embedding subjects", disable=not options.progress)
        ]
        test_embedding = train_embedding(test_network, config, test_id)
        cbt_embedding = train_embedding(result.template, config, CBT_ID)

    rng = None
    if method is Method.RANDOM:
        rng = np.random.default_rng(derive_seed(options.seed, method.value, test_id, k))
    prediction = predict_trajectory(
        training, method, k,
        test_subject_id=test_id,
        cbt_embedding=cbt_embedding,
        test_embedding=test_embedding,
        train_embeddings=train_embeddings,
        test_network=test_network,
        use_cosine=use_cosine,
        rng=rng,
    )

    metrics = {}
    for timepoint, predicted in prediction.matrices.items():
        save_matrix(predicted, options.output(f"predicted_{timepoint}.csv"), options.force)
        if truth is None:
            continue
        actual = truth.at(timepoint)
        metrics[timepoint] = {"mad": mad(predicted, actual), "mse": mse(predicted, actual)}
        error_map = absolute_error_map(predicted, actual)
        save_array(error_map, options.output(f"error_map_{timepoint}.csv"), options.force)
        if figure:
            from .plotting import plot_error_map
            plot_error_map(error_map, options.output(f"error_map_{timepoint}.png"),
                           f"{test_id} at {timepoint} ({method.value}, K={k})", options.force)
        logger.info(f"{test_id} at '{timepoint}': MAD={metrics[timepoint]['mad']:.6f} "
                    f"MSE={metrics[timepoint]['mse']:.6f}")

    payload = {
        "config": {
            "method": method.value,
            "k": k,
            "seed": options.seed,
            "use_cosine": use_cosine,
            "train_config": config.to_dict(),
        },
        "test_subject": test_id,
        "similarity": prediction.similarity.to_payload(),
        "selected": {
            "indices": list(prediction.selection.indices),
            "subjects": selected_subjects(training, prediction.selection),
            "scores": list(prediction.selection.scores),
        },
    }
    if metrics:
        payload["metrics"] = metrics
    save_json(payload, options.output("prediction.json"), options.force)


@cli.command(context_settings=CONTEXT_SETTINGS)
@common_options
@train_options
@click.option("--manifest", type=click.Path(dir_okay=False), required=True, help="Population manifest JSON.")
@click.option("--methods", default="resnets,esnets,snets", callback=_parse_methods,
              help="Comma-separated methods to compare.")
@click.option("--k", "k_values", default="2,3,4", callback=_parse_k_values,
              help="Comma-separated numbers of neighbors.")
@click.option("--workers", type=int, default=1, help="Folds evaluated in parallel.")
@click.option("--cosine", "use_cosine", is_flag=True, default=False,
              help="Use cosine instead of dot product for the esnets/snets baselines.")
@click.option("--figure", is_flag=True, default=False, help="Render the method comparison chart.")
def evaluate(options: GlobalOptions, config: TrainConfig, manifest, methods: Sequence[Method],
             k_values: Sequence[int], workers: int, use_cosine: bool, figure: bool):
    """Leave-one-out evaluation of the selection methods."""
    eval_config = EvalConfig(
        methods=tuple(methods),
        k_values=tuple(k_values),
        train_config=config,
        seed=options.seed,
        workers=workers,
        use_cosine=use_cosine,
    )
    eval_config.validate()
    options.claim("report.json", "plot_data.csv", "timing.json", *(["comparison.png"] if figure else []))

    population = load_population(manifest)
    report = loocv(population, eval_config, progress=options.progress)
    logger.info(f"Mean errors per method:\n{summarize(report).to_string()}")

    save_report(report, options.output("report.json"), options.force)
    emit_plot_data(report, options.output("plot_data.csv"), options.force)
    save_json({"wall_clock_seconds": report.wall_clock_seconds, "workers": workers},
              options.output("timing.json"), options.force)
    if figure:
        from .plotting import plot_comparison
        plot_comparison(report, options.output("comparison.png"), options.force)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return the process exit code"""
    load_dotenv()
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="resnets",
            standalone_mode=False,
            auto_envvar_prefix="RESNETS",
        )
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except ResnetsError as e:
        click.echo(f"Error: {e}", err=True)
        return e.exit_code
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        return 4
    return result if isinstance(result, int) else 0


def main():
    sys.exit(run(sys.argv[1:]))
