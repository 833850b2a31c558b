try:
    import click
except ImportError as e:
    raise ImportError(
        "click is not installed.\n" "pip install whsplit[applications]"
    ) from e

import functools
import json
import logging
from datetime import datetime
from importlib import resources
from pathlib import Path

import numpy as np

import whsplit
from whsplit import config
from whsplit.errors import ConfigurationError, InstabilityError, WHSplitError
from whsplit.ga import SELECTIONS, GAConfig
from whsplit.io import (
    read_json,
    read_signal,
    write_ga_history,
    write_json,
    write_scan,
    write_signal,
    write_table,
)

log = logging.getLogger(__name__)

PRESETS = ("desk", "full")


def configure_logging(debug):
    from rich.logging import RichHandler

    logging.basicConfig(
        level=logging.DEBUG if debug else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(show_path=debug)],
        force=True,
    )


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        try:
            return fn(*args, **kw)
        except WHSplitError as e:
            click.secho(f"Error: {e}", err=True, fg="red")
            click.get_current_context().exit(e.exit_code)
        except (np.linalg.LinAlgError, FloatingPointError) as e:
            click.secho(f"Numerical failure: {e}", err=True, fg="red")
            click.get_current_context().exit(InstabilityError.exit_code)

    return wrapper


def resolve_seed(ctx):
    seed = ctx.find_root().obj.get("SEED")
    return 0 if seed is None else seed


def record_run(ctx, seed, inputs, outputs, out_dir):
    from whsplit.applications.manifest import RunManifest

    manifest = RunManifest(
        ctx.command.name, dict(ctx.params), seed, list(inputs), list(outputs)
    )
    return manifest.write(out_dir)


def process_integers(ctx, param, value):
    if value is None:
        return None

    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)

    try:
        values = tuple(int(v.strip()) for v in value.split(",") if v.strip())
    except ValueError:
        values = ()

    if not values:
        raise click.BadParameter(f'{param.name} must be of the form "1,2,3"')

    return values


@click.group()
@click.pass_context
@click.option("--debug/--no-debug", default=False)
@click.option(
    "--seed",
    type=int,
    default=None,
    help="Master seed for all randomness of the command",
)
@click.version_option(whsplit.__version__)
def main(ctx, debug, seed):
    """Wiener-Hammerstein identification by pole/zero allocation"""
    ctx.ensure_object(dict)
    ctx.obj["DEBUG"] = debug
    ctx.obj["SEED"] = seed
    configure_logging(debug)


def load_model(path):
    from whsplit.model import model_from_dict

    try:
        return model_from_dict(read_json(path))
    except WHSplitError as e:
        raise ConfigurationError(f"Invalid model file {path}: {e}") from e


@main.command()
@click.pass_context
@click.argument("model", type=click.Path(dir_okay=False))
@click.option("-n", "--nsamples", type=int, default=4096, help="Period length")
@click.option("--std", type=float, default=1.0, help="Input standard deviation")
@click.option("--sample-rate", type=float, default=1.0)
@click.option("-o", "--output", type=click.Path(file_okay=False), default="dataset")
@handle_errors
def simulate(ctx, model, nsamples, std, sample_rate, output):
    """Simulate MODEL with one period of Gaussian noise"""
    from whsplit.bla import generate_periodic_gaussian
    from whsplit.lti import zpk_from_tf, zpk_to_dict
    from whsplit.model import simulate_wh

    seed = resolve_seed(ctx)
    wh = load_model(model)
    rng = np.random.default_rng(seed)
    u = generate_periodic_gaussian(nsamples, std, rng, sample_rate)
    y = simulate_wh(wh, u)

    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    write_signal(out / "u.csv", u)
    write_signal(out / "y.csv", y)
    write_json(out / "zpk.json", zpk_to_dict(zpk_from_tf(wh.linear_dynamics())))
    outputs = [out / "u.csv", out / "y.csv", out / "zpk.json"]
    record_run(ctx, seed, [model], outputs, out)
    click.echo(f"Wrote {nsamples} samples to {out}")


@main.command("design-filter")
@click.pass_context
@click.option(
    "-t", "--type", "filter_type", type=click.Choice(["cheby1", "cheby2"]), default="cheby1"
)
@click.option("--order", type=int, required=True)
@click.option("--cutoff", type=float, required=True, help="Cutoff as a fraction of the sample rate")
@click.option("--ripple", type=float, default=3.0, help="Passband ripple in dB (cheby1)")
@click.option("--attenuation", type=float, default=50.0, help="Stopband attenuation in dB (cheby2)")
@click.option("--npoints", type=int, default=0, help="Also write the magnitude response at this many frequencies")
@click.option("-o", "--output", type=click.Path(file_okay=False), default="filter")
@handle_errors
def design_filter(ctx, filter_type, order, cutoff, ripple, attenuation, npoints, output):
    """Design a Chebyshev low-pass filter"""
    from whsplit.lti import cheby1_design, cheby2_design, freq_response, tf_to_dict, zpk_to_dict

    if filter_type == "cheby1":
        tf = cheby1_design(order, ripple, cutoff)
    else:
        tf = cheby2_design(order, attenuation, cutoff)

    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "tf.json", {**tf_to_dict(tf), "zpk": zpk_to_dict(tf.zpk)})
    outputs = [out / "tf.json"]

    if npoints > 0:
        freqs = np.linspace(0.0, 0.5, npoints)
        magnitude = np.abs(freq_response(tf, freqs))
        write_table(
            out / "response.csv",
            {"freq": freqs, "magnitude_db": 20 * np.log10(np.maximum(magnitude, 1e-300))},
        )
        outputs.append(out / "response.csv")

    record_run(ctx, None, [], outputs, out)
    click.echo(f"Wrote {filter_type} design of order {order} to {out}")


def load_dynamics(zpk_path, fit_bla, u, y):
    from whsplit.allocation import group_conjugates
    from whsplit.bla import bla_groups
    from whsplit.lti import zpk_from_dict

    if (zpk_path is None) == (fit_bla is None):
        raise click.UsageError("Exactly one of --zpk or --fit-bla is required")

    if zpk_path is not None:
        try:
            return group_conjugates(zpk_from_dict(read_json(zpk_path)))
        except WHSplitError as e:
            raise ConfigurationError(f"Invalid pole/zero file {zpk_path}: {e}") from e

    num_order, den_order = fit_bla
    groups, fit = bla_groups([u], [y], num_order, den_order)
    log.info(
        "Fitted best linear approximation in %d iterations, %d poles reflected",
        fit.iterations,
        fit.reflected_poles,
    )
    return groups


@main.command()
@click.pass_context
@click.argument("u_path", type=click.Path(dir_okay=False))
@click.argument("y_path", type=click.Path(dir_okay=False))
@click.option("--zpk", "zpk_path", type=click.Path(dir_okay=False), default=None, help="Pole/zero JSON of the overall dynamics")
@click.option("--fit-bla", type=int, nargs=2, default=None, metavar="NUM_ORDER DEN_ORDER", help="Estimate the dynamics from the data")
@click.option("-m", "--method", type=click.Choice(["brute", "ga"]), default="brute")
@click.option("-d", "--degrees", default="1,2,3", callback=process_integers, help="Monomial degrees of the nonlinearity")
@click.option("--pop-size", type=int, default=200)
@click.option("--generations", type=int, default=50)
@click.option("--stall-limit", type=int, default=5)
@click.option("--tolfun", type=float, default=1e-20)
@click.option("--crossover-fraction", type=float, default=0.8)
@click.option("--mutation-rate", type=float, default=None, help="Per-bit mutation probability, 1/length by default")
@click.option("--elite-count", type=int, default=None, help="Defaults to 5 percent of the population, at least 2")
@click.option("--selection", type=click.Choice(SELECTIONS), default="sus-rank")
@click.option("-j", "--jobs", type=int, default=1, help="Concurrent cost evaluations")
@click.option("-o", "--output", type=click.Path(file_okay=False), default="identified")
@click.option("--model-out", type=click.Path(dir_okay=False), default=None, help="Defaults to OUTPUT/model.json")
@click.option("--report-out", type=click.Path(dir_okay=False), default=None, help="Defaults to OUTPUT/report.json")
@handle_errors
def identify(
    ctx,
    u_path,
    y_path,
    zpk_path,
    fit_bla,
    method,
    degrees,
    pop_size,
    generations,
    stall_limit,
    tolfun,
    crossover_fraction,
    mutation_rate,
    elite_count,
    selection,
    jobs,
    output,
    model_out,
    report_out,
):
    """Identify a Wiener-Hammerstein model from input U_PATH and output Y_PATH"""
    from whsplit.model import model_to_dict

    seed = resolve_seed(ctx)
    u, y = read_signal(u_path), read_signal(y_path)
    groups = load_dynamics(zpk_path, fit_bla, u, y)
    ga_config = GAConfig(
        population_size=pop_size,
        max_generations=generations,
        stall_generation_limit=stall_limit,
        cost_tolerance=tolfun,
        crossover_fraction=crossover_fraction,
        mutation_rate=mutation_rate,
        elite_count=elite_count,
        selection=selection,
        rng_seed=seed,
    )
    fit, search = whsplit.identify(u, y, groups, method, degrees, ga_config, jobs)

    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    model_path = Path(model_out) if model_out else out / "model.json"
    report_path = Path(report_out) if report_out else out / "report.json"
    write_json(model_path, model_to_dict(fit.model()))

    if method == "brute":
        write_scan(out / "ranked.csv", search)
        search_path = out / "ranked.csv"
        best = str(search.best)
    else:
        write_ga_history(out / "ga_history.csv", search)
        search_path = out / "ga_history.csv"
        best = str(search.best_allocation)

    write_json(
        report_path,
        {
            "method": method,
            "groups": groups.to_dict(),
            "best_bits": best,
            "mse": fit.mse,
            "output_variance": float(np.var(y.samples)),
            "weights": fit.weights.tolist(),
            "degrees": list(fit.degrees),
            "condition_estimate": fit.condition_estimate,
            "search": search.to_dict(),
        },
    )
    outputs = [model_path, search_path, report_path]
    inputs = [p for p in (u_path, y_path, zpk_path) if p is not None]
    record_run(ctx, seed, inputs, outputs, out)
    click.echo(f"best allocation {best} mse {fit.mse!r}")


def load_benchmark_config(config_path, preset):
    from whsplit.benchmark import MonteCarloConfig

    if (config_path is None) == (preset is None):
        raise click.UsageError("Exactly one of CONFIG_PATH or --preset is required")

    if preset is not None:
        text = resources.files("whsplit.configs").joinpath(f"{preset}.json").read_text()
        return MonteCarloConfig.from_dict(json.loads(text))

    d = read_json(config_path)

    if not isinstance(d, dict):
        raise ConfigurationError(f"{config_path} must contain a JSON object")

    return MonteCarloConfig.from_dict(d)


def default_benchmark_dir():
    from appdirs import user_data_dir

    stamp = datetime.now().strftime("%Y%m%dT%H%M%S")
    return Path(user_data_dir("whsplit")) / "benchmarks" / stamp


@main.command()
@click.pass_context
@click.argument("config_path", required=False, type=click.Path(dir_okay=False))
@click.option("--preset", type=click.Choice(PRESETS), default=None, help="Bundled configuration")
@click.option("-o", "--output", type=click.Path(file_okay=False), default=None, help="Defaults to the user data directory")
@click.option("--markdown/--no-markdown", default=False, help="Also render a markdown table")
@click.option("-j", "--jobs", type=int, default=1, help="Concurrent trials")
@click.option("--sweep-order", type=int, default=None, help="Order for a population size sweep")
@click.option("--sweep-populations", default=None, callback=process_integers, help="Population sizes to sweep, e.g. 50,100,200")
@handle_errors
def benchmark(ctx, config_path, preset, output, markdown, jobs, sweep_order, sweep_populations):
    """Monte Carlo comparison of the brute force scan and the genetic algorithm"""
    from whsplit.applications.benchmark_runner import BenchmarkRunner

    mc_config = load_benchmark_config(config_path, preset)

    if (seed := ctx.find_root().obj.get("SEED")) is not None:
        mc_config = mc_config.replace(rng_seed=seed)

    if sweep_populations and sweep_order is None:
        sweep_order = mc_config.orders[0]

    out = Path(output) if output is not None else default_benchmark_dir()
    runner = BenchmarkRunner(mc_config, out, markdown, jobs, sweep_order, sweep_populations)
    _, paths = runner.run()
    inputs = [] if config_path is None else [config_path]
    record_run(ctx, mc_config.rng_seed, inputs, paths, out)
    click.echo(f"Wrote benchmark report to {out}")


@main.command()
@click.pass_context
@click.argument("manifest_path", type=click.Path(dir_okay=False))
@click.option("-o", "--output", type=click.Path(file_okay=False), default=None, help="Write to this directory instead")
@handle_errors
def replay(ctx, manifest_path, output):
    """Re-run the command recorded in MANIFEST_PATH"""
    from whsplit.applications.manifest import RunManifest

    manifest = RunManifest.read(manifest_path)

    if (command := main.commands.get(manifest.subcommand)) is None or command is replay:
        raise ConfigurationError(f"Cannot replay subcommand {manifest.subcommand!r}")

    params = dict(manifest.params)

    if output is not None:
        params["output"] = output

    ctx.find_root().obj["SEED"] = manifest.seed

    with config.set(**manifest.configuration):
        ctx.invoke(command, **params)
