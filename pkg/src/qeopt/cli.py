"""Command-line harness tying the modules into reproducible experiments.

Every command is deterministic under a fixed --seed, writes headered CSV
(or instance files) plus a JSON manifest sidecar, and re-running the same
invocation reproduces output files byte-for-byte. Exit codes: 0 success,
2 flag/validation error, 3 runtime or numeric error.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from qeopt import analysis as ana
from qeopt import optimizer as opt
from qeopt import runfiles
from qeopt.ansatz import LayerParams, extract_solution, landscape, run_ansatz
from qeopt.compiler import (
    decompose_controls,
    dumps,
    lower_phase_separator,
    to_native,
    verify_unitary,
)
from qeopt.encoding import make_scheme
from qeopt.estimator import cost_hamiltonian_terms, exact_group_stats
from qeopt.problem import example_instance_n4, generate_sk, ground_truth, pad_instance
from qeopt.rng import stream
from qeopt.simulator import init_plus


class RuntimeFailure(click.ClickException):
    exit_code = 3


def _fail_usage(problems: list[str]) -> None:
    if problems:
        raise click.UsageError("; ".join(problems))


def _resolve_out(out: str | None, default_name: str) -> Path:
    path = Path(out) if out else runfiles.default_out_dir() / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _reconstruct_argv(ctx: click.Context) -> list[str]:
    """Canonical argv for the current invocation, rebuilt from resolved params."""
    argv = [ctx.command.name]
    for param in ctx.command.params:
        value = ctx.params.get(param.name)
        if value is None:
            continue
        flag = param.opts[0]
        if isinstance(param, click.Option):
            if param.is_flag:
                if value:
                    argv.append(flag)
                elif param.secondary_opts:
                    argv.append(param.secondary_opts[0])
            elif param.multiple:
                for item in value:
                    argv += [flag, str(item)]
            else:
                argv += [flag, str(value)]
    return argv


def _emit(command: str, params: dict, seed: int | None, inputs: list[str], out_path: Path) -> None:
    ctx = click.get_current_context(silent=True)
    argv = _reconstruct_argv(ctx) if ctx else sys.argv[1:]
    manifest = runfiles.make_manifest(command, argv, params, seed, inputs, [str(out_path)])
    runfiles.write_manifest(manifest, out_path)


def _load_instance(path: str, d: int, allow_padding: bool):
    inst = runfiles.read_instance(path)
    scheme = make_scheme(inst.n_vars, d, allow_padding=allow_padding)
    if scheme.n_vars != inst.n_vars:
        inst = pad_instance(inst, scheme.n_vars)
    return inst, scheme


def _parse_params(text: str) -> list[LayerParams]:
    layers = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 3:
            raise click.UsageError(
                f"bad --params layer {chunk!r}: need 'beta,gamma,gamma_bias'"
            )
        layers.append(LayerParams(*(float(v) for v in parts)))
    return layers


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Qubit-efficient spin-glass solver: experiments as reproducible commands.

    Output CSV columns are documented per command under --help. Every output
    file gets a .manifest.json sidecar; `qeopt rerun` replays a manifest.
    The default output directory is ./results, or $QEOPT_OUT_DIR if set.
    """


# ---------------------------------------------------------------------------
@main.command()
@click.option("--n", type=int, default=64, show_default=True, help="Variable count N.")
@click.option("--kind", type=click.Choice(["pm1", "gaussian"]), default="pm1", show_default=True)
@click.option("--count", type=int, default=1, show_default=True, help="Instances to write.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fixture-n4", is_flag=True, help="Write the fixed 4-variable worked instance instead.")
@click.option("--out", type=str, default=None, help="Output directory [default: results/instances].")
def generate(n, kind, count, seed, fixture_n4, out):
    """Write SK instance files (one file per instance, derived per-instance seeds)."""
    problems = []
    if n < 2:
        problems.append("--n must be >= 2")
    if count < 1:
        problems.append("--count must be >= 1")
    _fail_usage(problems)
    out_dir = Path(out) if out else runfiles.default_out_dir() / "instances"
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if fixture_n4:
            path = out_dir / "fixture_n4.txt"
            runfiles.write_instance(example_instance_n4(), path)
            written.append(path)
        else:
            for k in range(count):
                inst_seed = int(stream(seed, "instance", k).integers(0, 2**31 - 1))
                inst = generate_sk(n, kind, seed=inst_seed)
                path = out_dir / f"sk_n{n}_{kind}_{k:03d}.txt"
                runfiles.write_instance(inst, path)
                written.append(path)
    except OSError as exc:
        raise RuntimeFailure(f"cannot write instances: {exc}")
    for path in written:
        _emit("generate", {"n": n, "kind": kind, "count": count, "fixture_n4": fixture_n4},
              seed, [], path)
        click.echo(f"wrote {path}")


# ---------------------------------------------------------------------------
@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--d", type=int, required=True, help="Group size (d=N for the product-state limit).")
@click.option("--p", type=int, default=1, show_default=True, help="Ansatz depth.")
@click.option("--mode", type=click.Choice(["exact", "shots"]), default="exact", show_default=True)
@click.option("--shots", type=int, default=None, help="Shot budget (mode=shots).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--hops", type=int, default=20, show_default=True, help="Basin hops.")
@click.option("--local-evals", type=int, default=200, show_default=True)
@click.option("--freeze-gamma-bias", is_flag=True, help="Pin gamma' = 0 during optimization.")
@click.option("--warm-start/--no-warm-start", default=True, show_default=True,
              help="Optimize p = 1..p with layerwise seeding.")
@click.option("--allow-padding", is_flag=True, help="Pad N up to the nearest d * 2^k.")
@click.option("--out", type=str, default=None, help="Result CSV [default: results/solve.csv].")
def solve(instance_path, d, p, mode, shots, seed, hops, local_evals, freeze_gamma_bias,
          warm_start, allow_padding, out):
    """Optimize the ansatz on one instance and append a result row.

    CSV columns: instance, n_vars, d, p, mode, shots, seed, cost, c_star,
    c_star_method, ratio, eval_count, rounded_cost, rounded_ratio, params
    (semicolon-joined beta,gamma,gamma_bias triples), solution (+-1 string).
    """
    problems = []
    if p < 1:
        problems.append("--p must be >= 1")
    if mode == "shots" and (shots is None or shots < 1):
        problems.append("--shots must be >= 1 when --mode shots")
    if d < 1:
        problems.append("--d must be >= 1")
    _fail_usage(problems)
    out_path = _resolve_out(out, "solve.csv")
    try:
        inst, scheme = _load_instance(instance_path, d, allow_padding)
        record = ground_truth(inst, seed=seed)
        config = opt.OptimizerConfig(
            n_hops=hops, max_local_evals=local_evals,
            freeze_gamma_bias=freeze_gamma_bias, seed=seed,
        )
        if warm_start:
            results = opt.warm_start_schedule(inst, scheme, p, config, record.best_cost)
            result = results[p]
        else:
            result = opt.optimize(inst, scheme, p, config, record.best_cost)
        trace = run_ansatz(inst, scheme, list(result.best_params), mode=mode,
                           n_shots=shots, seed=seed)
        solution, rounded_cost = extract_solution(trace, scheme, seed=seed)
        n_raw = scheme.n_vars_raw or scheme.n_vars
        solution = solution[:n_raw]
        params_text = ";".join(
            f"{lp.beta:.17g},{lp.gamma:.17g},{lp.gamma_bias:.17g}" for lp in result.best_params
        )
        row = [
            Path(instance_path).name, inst.n_vars, d, p, mode, shots or 0, seed,
            trace.final_cost, record.best_cost, record.method,
            trace.final_cost / record.best_cost,
            result.eval_count, rounded_cost, rounded_cost / record.best_cost,
            params_text, "".join("+" if v > 0 else "-" for v in solution),
        ]
        runfiles.write_csv(
            out_path,
            ["instance", "n_vars", "d", "p", "mode", "shots", "seed", "cost", "c_star",
             "c_star_method", "ratio", "eval_count", "rounded_cost", "rounded_ratio",
             "params", "solution"],
            [row],
            append=True,
        )
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("solve", {"instance": instance_path, "d": d, "p": p, "mode": mode, "shots": shots,
                    "hops": hops, "local_evals": local_evals,
                    "freeze_gamma_bias": freeze_gamma_bias, "warm_start": warm_start},
          seed, [instance_path], out_path)
    click.echo(f"cost {trace.final_cost:.6f} (r = {result.ratio:.4f}) -> {out_path}")


# ---------------------------------------------------------------------------
def _landscape_row(args):
    instance_path, d, beta, gammas, gamma_bias, mode, shots, seed, bi = args
    inst = runfiles.read_instance(instance_path)
    scheme = make_scheme(inst.n_vars, d)
    row = landscape(inst, scheme, np.array([beta]), np.asarray(gammas),
                    gamma_bias=gamma_bias, mode=mode, n_shots=shots,
                    seed=seed * 100_003 + bi)
    return row[0]


@main.command("landscape")
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--d", type=int, required=True)
@click.option("--beta-steps", type=int, default=33, show_default=True)
@click.option("--gamma-steps", type=int, default=33, show_default=True)
@click.option("--gamma-bias", type=float, default=0.0, show_default=True)
@click.option("--mode", type=click.Choice(["exact", "shots"]), default="exact", show_default=True)
@click.option("--shots", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", type=str, default=None, help="CSV [default: results/landscape.csv].")
def landscape_cmd(instance_path, d, beta_steps, gamma_steps, gamma_bias, mode, shots, seed,
                  jobs, out):
    """Single-layer cost over a (beta, gamma) grid.

    CSV columns: beta, gamma, cost. beta spans [0, pi], gamma spans [-pi, pi].
    """
    problems = []
    if beta_steps < 1 or gamma_steps < 1:
        problems.append("grid steps must be >= 1")
    if mode == "shots" and (shots is None or shots < 1):
        problems.append("--shots must be >= 1 when --mode shots")
    _fail_usage(problems)
    out_path = _resolve_out(out, "landscape.csv")
    betas = np.linspace(0.0, math.pi, beta_steps)
    gammas = np.linspace(-math.pi, math.pi, gamma_steps)
    try:
        tasks = [
            (instance_path, d, float(beta), gammas.tolist(), gamma_bias, mode, shots, seed, bi)
            for bi, beta in enumerate(betas)
        ]
        grid_rows = _pmap(_landscape_row, tasks, jobs)
        rows = []
        for beta, grid_row in zip(betas, grid_rows):
            for gamma, cost in zip(gammas, grid_row):
                rows.append([beta, gamma, cost])
        runfiles.write_csv(out_path, ["beta", "gamma", "cost"], rows)
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("landscape", {"instance": instance_path, "d": d, "beta_steps": beta_steps,
                        "gamma_steps": gamma_steps, "gamma_bias": gamma_bias, "mode": mode,
                        "shots": shots, "jobs": jobs},
          seed, [instance_path], out_path)
    click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------------------
@main.command()
@click.option("--n", type=int, default=65536, show_default=True)
@click.option("--d-list", type=str, default="1,2,4,8,16,64,256,1024", show_default=True)
@click.option("--samples", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None, help="CSV [default: results/entropy.csv].")
def entropy(n, d_list, samples, seed, out):
    """Mean data-register entanglement of encoded random strings.

    CSV columns: d, mean_entropy_bits, bound_bits (= min(d, log2(N/d))).
    """
    try:
        ds = [int(v) for v in d_list.split(",")]
    except ValueError:
        raise click.UsageError(f"--d-list must be comma-separated ints, got {d_list!r}")
    problems = [f"d={d} does not divide N={n} with a power-of-two quotient"
                for d in ds if n % d or ((n // d) & (n // d - 1))]
    if samples < 1:
        problems.append("--samples must be >= 1")
    _fail_usage(problems)
    out_path = _resolve_out(out, "entropy.csv")
    try:
        profile = ana.entropy_profile(n, ds, n_samples=samples, seed=seed)
        rows = [
            [d, s, min(d, int(math.log2(n // d)))]
            for d, s in zip(profile.group_sizes, profile.mean_entropy)
        ]
        runfiles.write_csv(out_path, ["d", "mean_entropy_bits", "bound_bits"], rows)
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("entropy", {"n": n, "d_list": d_list, "samples": samples}, seed, [], out_path)
    click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------------------
@main.command()
@click.option("--instance", "instance_paths", type=click.Path(exists=True), multiple=True,
              required=True, help="Instance file(s); repeatable.")
@click.option("--d", type=int, required=True)
@click.option("--r-star", type=str, default=None,
              help="Reference ratios as 'p:r,p:r' for the asymptotic bound column.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None, help="CSV [default: results/baseline.csv].")
def baseline(instance_paths, d, r_star, seed, out):
    """Decomposition baseline: exact intra-group optima vs the full optimum.

    CSV columns: instance, n_vars, d, baseline_cost, c_star, c_star_method,
    baseline_ratio, asymptotic_ratio_p<P> (one column per supplied r*(p)).
    """
    table = {}
    if r_star:
        try:
            for part in r_star.split(","):
                key, _, val = part.partition(":")
                table[int(key)] = float(val)
        except ValueError:
            raise click.UsageError(f"--r-star must look like '1:0.3,2:0.41', got {r_star!r}")
    out_path = _resolve_out(out, "baseline.csv")
    try:
        btable = ana.BaselineTable(table) if table else None
        header = ["instance", "n_vars", "d", "baseline_cost", "c_star", "c_star_method",
                  "baseline_ratio"] + [f"asymptotic_ratio_p{p}" for p in sorted(table)]
        rows = []
        for path in instance_paths:
            inst, scheme = _load_instance(path, d, allow_padding=False)
            dec = ana.decomposed_baseline_exact(inst, scheme)
            record = ground_truth(inst, seed=seed)
            row = [Path(path).name, inst.n_vars, d, dec, record.best_cost, record.method,
                   dec / record.best_cost]
            row += [ana.baseline_ratio(p, inst.n_vars, d, btable) for p in sorted(table)]
            rows.append(row)
        runfiles.write_csv(out_path, header, rows)
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("baseline", {"instances": list(instance_paths), "d": d, "r_star": r_star},
          seed, list(instance_paths), out_path)
    click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------------------
@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True), required=True)
@click.option("--d", type=int, required=True)
@click.option("--params", type=str, required=True,
              help="Fixed layers 'beta,gamma,gamma_bias[;...]'.")
@click.option("--shot-counts", type=str, default="100,1000,10000,100000", show_default=True)
@click.option("--replicas", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=str, default=None, help="CSV [default: results/shots.csv].")
def shots(instance_path, d, params, shot_counts, replicas, seed, out):
    """Shot-noise convergence of the estimated cost at fixed parameters.

    CSV columns: n_shots, mean_abs_error, stderr, relative_error, exact_cost.
    """
    try:
        counts = [int(v) for v in shot_counts.split(",")]
    except ValueError:
        raise click.UsageError(f"--shot-counts must be comma-separated ints, got {shot_counts!r}")
    layers = _parse_params(params)
    if replicas < 2:
        raise click.UsageError("--replicas must be >= 2")
    out_path = _resolve_out(out, "shots.csv")
    try:
        inst, scheme = _load_instance(instance_path, d, allow_padding=False)
        study = ana.shot_noise_study(inst, scheme, layers, counts, replicas=replicas, seed=seed)
        rows = [
            [n, err, se, err / abs(study.exact_cost), study.exact_cost]
            for n, err, se in zip(study.shot_counts, study.mean_abs_error, study.stderr)
        ]
        runfiles.write_csv(
            out_path, ["n_shots", "mean_abs_error", "stderr", "relative_error", "exact_cost"],
            rows,
        )
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("shots", {"instance": instance_path, "d": d, "params": params,
                    "shot_counts": shot_counts, "replicas": replicas},
          seed, [instance_path], out_path)
    click.echo(f"wrote {out_path} (loglog slope {study.loglog_slope():.3f})")


# ---------------------------------------------------------------------------
def _concentration_worker(args):
    instance_path, d, params_text, seed = args
    inst = runfiles.read_instance(instance_path)
    scheme = make_scheme(inst.n_vars, d)
    layers = _parse_params(params_text)
    record = ground_truth(inst, seed=seed)
    trace = run_ansatz(inst, scheme, layers, mode="exact")
    return trace.final_cost, record.best_cost, record.method


@main.command()
@click.option("--donor-instance", type=click.Path(exists=True), required=True,
              help="Instance whose optimized parameters are reused.")
@click.option("--target-instance", "target_paths", type=click.Path(exists=True), multiple=True,
              required=True, help="Ensemble instance file(s); repeatable.")
@click.option("--d", type=int, required=True)
@click.option("--p", type=int, default=3, show_default=True)
@click.option("--donor-params", type=str, default=None,
              help="Skip donor optimization and use these layers.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--hops", type=int, default=20, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", type=str, default=None, help="CSV [default: results/transfer.csv].")
def transfer(donor_instance, target_paths, d, p, donor_params, seed, hops, jobs, out):
    """Reuse donor-optimized parameters across an ensemble (gamma rescaled by
    (d1/d0)(N0/N1)^(3/2) when target sizes differ).

    CSV columns: instance, n_vars, d, p, cost, c_star, c_star_method, ratio,
    donor_ratio, params.
    """
    if p < 1:
        raise click.UsageError("--p must be >= 1")
    out_path = _resolve_out(out, "transfer.csv")
    try:
        donor_inst = runfiles.read_instance(donor_instance)
        donor_scheme = make_scheme(donor_inst.n_vars, d)
        if donor_params:
            layers = tuple(_parse_params(donor_params))
            donor_ratio = float("nan")
        else:
            record = ground_truth(donor_inst, seed=seed)
            sched = opt.warm_start_schedule(
                donor_inst, donor_scheme, p,
                opt.OptimizerConfig(n_hops=hops, seed=seed), record.best_cost,
            )
            layers = sched[p].best_params
            donor_ratio = sched[p].ratio

        rows = []
        tasks = []
        for path in target_paths:
            target = runfiles.read_instance(path)
            scaled = opt.transfer_params(
                layers, (donor_inst.n_vars, d), (target.n_vars, d)
            )
            text = ";".join(f"{lp.beta:.17g},{lp.gamma:.17g},{lp.gamma_bias:.17g}" for lp in scaled)
            tasks.append((path, d, text, seed))
        results = _pmap(_concentration_worker, tasks, jobs)
        for path, task, (cost, c_star, method) in zip(target_paths, tasks, results):
            target_n = runfiles.read_instance(path).n_vars
            rows.append([Path(path).name, target_n, d, p, cost, c_star, method,
                         cost / c_star, donor_ratio, task[2]])
        runfiles.write_csv(
            out_path,
            ["instance", "n_vars", "d", "p", "cost", "c_star", "c_star_method", "ratio",
             "donor_ratio", "params"],
            rows,
        )
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("transfer", {"donor": donor_instance, "targets": list(target_paths), "d": d, "p": p,
                       "donor_params": donor_params, "hops": hops, "jobs": jobs},
          seed, [donor_instance, *target_paths], out_path)
    ratios = [row[7] for row in rows]
    click.echo(f"wrote {out_path} (mean r = {np.mean(ratios):.4f})")


# ---------------------------------------------------------------------------
@main.command("compile-check")
@click.option("--n", type=int, default=4, show_default=True)
@click.option("--d", type=int, default=2, show_default=True)
@click.option("--beta", type=float, default=1.178097245096172, show_default=True)
@click.option("--gamma", type=float, default=0.39269908169872414, show_default=True)
@click.option("--gamma-bias", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fixture-n4", is_flag=True, help="Use the fixed 4-variable instance.")
@click.option("--out", type=str, default=None,
              help="Native circuit listing [default: results/compiled_layer.txt].")
def compile_check(n, d, beta, gamma, gamma_bias, seed, fixture_n4, out):
    """Compile one full layer (phase separator + bias + mixer) to native gates
    and verify it against the ideal unitary; prints the max deviation."""
    out_path = _resolve_out(out, "compiled_layer.txt")
    try:
        inst = example_instance_n4() if (fixture_n4 or n == 4) else generate_sk(n, "pm1", seed=seed)
        scheme = make_scheme(n, d)
        state = init_plus(scheme.n_qubits)
        stats = exact_group_stats(scheme, state)
        terms = cost_hamiltonian_terms(inst, scheme, stats)
        circuit = decompose_controls(lower_phase_separator(terms, gamma), scheme)
        for qubit in range(scheme.n_qubits):
            if gamma_bias:
                circuit.add("RZ", qubit, angle=-2.0 * gamma_bias)
            circuit.add("RX", qubit, angle=-2.0 * beta)
        native = to_native(circuit)

        from qeopt.ansatz import apply_layer
        from qeopt.estimator import build_cost_hamiltonian
        from qeopt.simulator import Statevector

        dim = scheme.dim
        ham = build_cost_hamiltonian(inst, scheme, stats)
        reference = np.empty((dim, dim), dtype=complex)
        for col in range(dim):
            basis = np.zeros(dim, dtype=complex)
            basis[col] = 1.0
            vec = Statevector(scheme.n_qubits, basis)
            apply_layer(vec, ham, LayerParams(beta, gamma, gamma_bias))
            reference[:, col] = vec.amps
        deviation = verify_unitary(native, reference)
        out_path.write_text(dumps(native))
    except (ValueError, OSError) as exc:
        raise RuntimeFailure(str(exc))
    _emit("compile-check", {"n": n, "d": d, "beta": beta, "gamma": gamma,
                            "gamma_bias": gamma_bias, "fixture_n4": fixture_n4},
          seed, [], out_path)
    counts = native.gate_counts()
    click.echo(
        f"max_deviation {'<' if deviation < 1e-9 else '>='} 1e-9 "
        f"(value {deviation:.3e}; iswap={counts.get('ISWAP', 0)}, depth={native.depth()})"
    )
    if deviation >= 1e-9:
        raise RuntimeFailure(f"compiled layer deviates by {deviation:.3e}")


# ---------------------------------------------------------------------------
@main.command()
@click.option("--manifest", "manifest_file", type=click.Path(exists=True), required=True)
def rerun(manifest_file):
    """Replay a recorded command from its manifest (byte-identical outputs)."""
    manifest = runfiles.read_manifest(manifest_file)
    click.echo(f"replaying: qeopt {' '.join(manifest.argv)}")
    main.main(args=manifest.argv, standalone_mode=False)


if __name__ == "__main__":
    main()
