import json
import sys
from typing import Optional

import click

from src.config import config
from src.models import ExperimentConfig, LdpConfig, LiftingConfig, load_experiment_config
from src.services.corpus import generate_corpus_matrix
from src.services.dictionary import info
from src.services.ldp import privatize_image
from src.services.lifting import lift_many, reparameterize, strip_ground_truth
from src.utils import LdpFeatError, counter_stream, setup_logging, get_logger
from src.di import container

# Setup logging
setup_logging(
    level=config.log_level,
    log_file=config.log_file
)
logger = get_logger(__name__)


class LdpFeatApp:
    """Command-line application wiring the CLI verbs to the services."""

    def __init__(self):
        """Initialize the application."""
        self.file_processor = container.get_file_processor()

    def load_config(self, path: Optional[str], kind: str, seed: Optional[int],
                    out: Optional[str]) -> ExperimentConfig:
        """Load an experiment config (or defaults) for a verb and apply overrides."""
        if path:
            cfg = load_experiment_config(path)
            if cfg.kind != kind:
                logger.info(f"Config kind {cfg.kind} replaced by {kind} for this command")
                cfg = cfg.model_copy(update={'kind': kind})
        else:
            cfg = ExperimentConfig(kind=kind)
        return cfg.with_overrides(seed=seed, output=out)

    def run_experiment(self, path: Optional[str], kind: str, seed: Optional[int], out: Optional[str]) -> None:
        cfg = self.load_config(path, kind, seed, out)
        report = container.get_experiment_runner().run(cfg)
        click.echo(json.dumps(report['metrics'], indent=2, sort_keys=True))
        click.echo(f"Report written to {cfg.output}")

    def dictionary_for(self, cfg: ExperimentConfig, dictionary_path: Optional[str]):
        path = dictionary_path or cfg.dictionary.path
        if not path:
            raise click.UsageError("A dictionary file is required (--dictionary or dictionary.path)")
        return self.file_processor.load_dictionary(path)

    def lift(self, path, seed, out, input_path, dictionary_path) -> None:
        cfg = self.load_config(path, 'lift-attack-db', seed, out or 'subspaces.ldps')
        database = self.dictionary_for(cfg, dictionary_path)
        descriptors = self.file_processor.load_descriptor_matrix(input_path)
        lifting = LiftingConfig(m=cfg.lifting.m, database=database, rng_seed=cfg.seed,
                                value_range=tuple(cfg.lifting.value_range),
                                partitions=cfg.lifting.partitions)
        # the raw lift's translation is d itself; only re-parameterized subspaces leave the machine
        subspaces = [
            strip_ground_truth(reparameterize(rec, counter_stream(cfg.seed, 1, i), lifting.value_range))
            for i, rec in enumerate(lift_many(descriptors, lifting))
        ]
        self.file_processor.write_subspaces(cfg.output, subspaces)
        click.echo(f"Lifted {len(subspaces)} descriptor(s) to {cfg.output}")

    def privatize(self, path, seed, out, input_path, dictionary_path) -> None:
        cfg = self.load_config(path, 'ldp-utility', seed, out or 'features.ldpz')
        dictionary = self.dictionary_for(cfg, dictionary_path)
        descriptors = self.file_processor.load_descriptor_matrix(input_path)
        ldp = LdpConfig(epsilon=cfg.ldp.epsilon_value, m=cfg.ldp.m, dictionary=dictionary)
        rng = counter_stream(seed) if seed is not None else None
        features = privatize_image(descriptors, None, ldp, rng)
        self.file_processor.write_features(cfg.output, features)
        click.echo(f"Privatized {len(features)} descriptor(s) to {cfg.output} (epsilon={ldp.epsilon} per descriptor)")


def _experiment_options(func):
    func = click.option('--out', type=click.Path(dir_okay=False), default=None, help='Output path override.')(func)
    func = click.option('--seed', type=click.IntRange(min=0), default=None, help='Master seed override.')(func)
    func = click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                        default=None, help='Experiment JSON document.')(func)
    return func


@click.group()
@click.option('--log-level', default=None, help='Logging level (DEBUG, INFO, WARNING, ...).')
@click.option('--log-file', type=click.Path(dir_okay=False), default=None, help='Also log to this file.')
@click.option('--progress/--no-progress', default=False, help='Show progress bars.')
@click.option('--evaluation', is_flag=True, default=False,
              help='Evaluation mode: allow --seed for privatization (also LDPFEAT_EVALUATION=1).')
@click.pass_context
def cli(ctx, log_level, log_file, progress, evaluation):
    """ldpfeat: lifting attacks and LDP-Feat privatization of local descriptors."""
    if log_level or log_file:
        config.log_level = (log_level or config.log_level).upper()
        config.log_file = log_file or config.log_file
        setup_logging(level=config.log_level, log_file=config.log_file)
    config.show_progress = progress
    if evaluation:
        config.evaluation_mode = True
    ctx.obj = LdpFeatApp()


@cli.group('dict')
def dict_group():
    """Build or inspect dictionaries."""


@dict_group.command('build')
@_experiment_options
@click.pass_obj
def dict_build(app, config_path, seed, out):
    """Build a dictionary from a corpus and save it as LDPD."""
    app.run_experiment(config_path, 'dict-build', seed, out)


@dict_group.command('info')
@click.argument('path', type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def dict_info(app, path):
    """Print a dictionary summary."""
    summary = info(app.file_processor.load_dictionary(path))
    click.echo(json.dumps(summary, indent=2, sort_keys=True, default=str))


@cli.command('lift')
@_experiment_options
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='LDPF descriptor file.')
@click.option('--dictionary', 'dictionary_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='LDPD lifting database.')
@click.pass_obj
def lift_command(app, config_path, seed, out, input_path, dictionary_path):
    """Lift descriptors into adversarial affine subspaces (LDPS output)."""
    app.lift(config_path, seed, out, input_path, dictionary_path)


@cli.command('privatize')
@_experiment_options
@click.option('--input', 'input_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='LDPF descriptor file.')
@click.option('--dictionary', 'dictionary_path', type=click.Path(exists=True, dir_okay=False),
              default=None, help='LDPD dictionary.')
@click.pass_obj
def privatize_command(app, config_path, seed, out, input_path, dictionary_path):
    """Privatize descriptors with LDP-Feat (LDPZ output).

    Without --seed the operating system's CSPRNG is used; --seed needs --evaluation.
    """
    app.privatize(config_path, seed, out, input_path, dictionary_path)


@cli.group('attack')
def attack_group():
    """Descriptor recovery attacks on lifted subspaces."""


@attack_group.command('db')
@_experiment_options
@click.pass_obj
def attack_db(app, config_path, seed, out):
    """Database attack experiment."""
    app.run_experiment(config_path, 'lift-attack-db', seed, out)


@attack_group.command('cluster')
@_experiment_options
@click.pass_obj
def attack_cluster(app, config_path, seed, out):
    """Clustering attack experiment."""
    app.run_experiment(config_path, 'lift-attack-cluster', seed, out)


@attack_group.command('intersections')
@_experiment_options
@click.pass_obj
def attack_intersections(app, config_path, seed, out):
    """How often lifted subspaces meet the database only at their forming points."""
    app.run_experiment(config_path, 'lift-intersections', seed, out)


@cli.command('verify-ldp')
@_experiment_options
@click.pass_obj
def verify_ldp_command(app, config_path, seed, out):
    """Empirical epsilon-LDP check on a small domain."""
    app.run_experiment(config_path, 'ldp-verify', seed, out)


@cli.command('utility')
@_experiment_options
@click.pass_obj
def utility_command(app, config_path, seed, out):
    """Matching utility of privatized features on synthetic scenes."""
    app.run_experiment(config_path, 'ldp-utility', seed, out)


@cli.command('gen-corpus')
@_experiment_options
@click.pass_obj
def gen_corpus(app, config_path, seed, out):
    """Generate a synthetic descriptor corpus (LDPF output)."""
    cfg = app.load_config(config_path, 'dict-build', seed, out)
    points = generate_corpus_matrix(cfg.corpus, cfg.seed)
    target = out or 'corpus.ldpf'
    app.file_processor.save_descriptor_file(target, points)
    click.echo(f"Wrote {points.shape[0]} descriptor(s) to {target}")


@cli.command('bench')
@_experiment_options
@click.pass_obj
def bench_command(app, config_path, seed, out):
    """Throughput of projection, nearest-neighbor scan and privatization."""
    app.run_experiment(config_path, 'bench', seed, out)


def main(argv=None) -> int:
    """Main entry point."""
    try:
        cli.main(args=argv, prog_name='ldpfeat', standalone_mode=False)
    except LdpFeatError as e:
        logger.error(f"Command failed: {str(e)}")
        click.echo(f"Error: {e}", err=True)
        return 1
    except click.exceptions.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected failure: {str(e)}")
        click.echo(f"Error: {e}", err=True)
        return 1
    finally:
        container.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
