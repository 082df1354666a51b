"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal error.
All randomness is seeded via ``--seed`` (falling back to the
``CONPREDICT_SEED`` environment variable, then 0), so every subcommand
is a pure function of its inputs and flags.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .ccfg import Ccfg, CcfgError, build_ccfg, dump_ccfg, load_ccfg
from .conmetrics import concurrency_metrics
from .executor import (
    TestCase,
    build_kill_matrix,
    dynamic_metrics,
    enumerate_observables,
    reference_set,
)
from .features import (
    ALL_FEATURES,
    CONPREDICTOR_FEATURES,
    SPM_FEATURES,
)
from .frontend.parser import ParseError, parse
from .frontend.printer import pretty_print
from .frontend.seqmetrics import sequential_metrics
from .learning.cv import cross_validate
from .learning.dataset import Dataset, DatasetError, assemble, smote
from .learning.models import (
    ClassifierSpec,
    KINDS,
    model_from_dict,
    model_to_dict,
    train,
)
from .learning.select import wrapper_select
from .mutation import (
    ALL_OPERATORS,
    generate_mutants,
    static_mutation_metrics,
    unmatched_locks,
)
from .stats import (
    auc,
    confusion,
    feature_effect,
    permutation_importance,
    pofb20,
    popt,
    prf,
    scott_knott,
)
from .synth import SynthSpec, synth


class InputError(ValueError):
    """Bad input file or inconsistent input contents (exit code 2)."""


_KEY_COLUMNS = ("program", "function")
_META_COLUMNS = _KEY_COLUMNS + ("label", "nloc")
_FEATURE_SETS = {
    "conpredictor": CONPREDICTOR_FEATURES,
    "sequential": SPM_FEATURES,
    "all": ALL_FEATURES,
}


# --------------------------------------------------------------------------
# Small IO helpers
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return f"{v:.12g}"
    return str(v)


def _write_csv(path: str, header: list, rows: list):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path == "-":
        click.echo(text, nl=False)
    else:
        Path(path).write_text(text)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e


def _read_csv_dicts(path: str) -> list:
    text = _read_text(path)
    try:
        rows = list(csv.DictReader(io.StringIO(text)))
    except csv.Error as e:
        raise InputError(f"{path}: malformed CSV: {e}") from e
    if not rows:
        raise InputError(f"{path}: empty table")
    return rows


def _to_float(path: str, column: str, value: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError) as e:
        raise InputError(
            f"{path}: non-numeric value {value!r} in column {column}"
        ) from e


def _read_feature_table(path: str) -> dict:
    rows = _read_csv_dicts(path)
    table: dict = {}
    for row in rows:
        if "program" not in row or "function" not in row:
            raise InputError(f"{path}: missing program/function columns")
        key = (row["program"], row["function"])
        table[key] = {
            c: _to_float(path, c, v)
            for c, v in row.items()
            if c not in _KEY_COLUMNS
        }
    return table


def _read_labels(path: str) -> dict:
    labels: dict = {}
    for row in _read_csv_dicts(path):
        try:
            labels[(row["program"], row["function"])] = int(row["label"])
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: labels need program,function,label rows") from e
    return labels


def _load_dataset(path: str):
    """(Dataset over all feature columns, nloc array or None)."""
    rows = _read_csv_dicts(path)
    columns = list(rows[0].keys())
    for required in ("program", "function", "label"):
        if required not in columns:
            raise InputError(f"{path}: missing column {required}")
    feature_cols = [c for c in columns if c not in _META_COLUMNS]
    keys = []
    y = []
    X = []
    nloc = [] if "nloc" in columns else None
    for row in rows:
        keys.append((row["program"], row["function"]))
        try:
            y.append(int(row["label"]))
        except (TypeError, ValueError) as e:
            raise InputError(f"{path}: non-integer label {row['label']!r}") from e
        X.append([_to_float(path, c, row[c]) for c in feature_cols])
        if nloc is not None:
            nloc.append(_to_float(path, "nloc", row["nloc"]))
    try:
        d = Dataset(
            tuple(feature_cols),
            np.asarray(X, dtype=np.float64).reshape(len(rows), len(feature_cols)),
            np.asarray(y, dtype=np.int64),
            tuple(keys),
        )
    except DatasetError as e:
        raise InputError(f"{path}: {e}") from e
    return d, (np.asarray(nloc, dtype=np.float64) if nloc is not None else None)


def _dataset_rows(d: Dataset, nloc=None):
    header = list(_KEY_COLUMNS) + ["label"] + (
        ["nloc"] if nloc is not None else []
    ) + list(d.feature_names)
    rows = []
    for i in range(d.n_rows):
        row = [d.keys[i][0], d.keys[i][1], int(d.y[i])]
        if nloc is not None:
            row.append(float(nloc[i]))
        row.extend(float(v) for v in d.X[i])
        rows.append(row)
    return header, rows


def _select_feature_set(d: Dataset, name: str) -> Dataset:
    wanted = _FEATURE_SETS[name]
    missing = [f for f in wanted if f not in d.feature_names]
    if missing:
        raise InputError(
            f"dataset lacks {name} feature columns: {', '.join(missing)}"
        )
    return d.select_features(wanted)


def _resolve_seed(seed) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("CONPREDICT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as e:
        raise InputError(f"CONPREDICT_SEED is not an integer: {env!r}") from e


def _sub_seed(seed: int, index: int) -> int:
    state = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(state.generate_state(1, np.uint64)[0] >> np.uint64(33))


def _parse_source(path: str):
    try:
        return parse(_read_text(path))
    except ParseError as e:
        raise InputError(f"{path}: {e}") from e


def _load_tests(path: str) -> list:
    tests = []
    for i, line in enumerate(_read_text(path).splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
            tests.append(
                TestCase(
                    entry=doc["entry"],
                    args=tuple(doc.get("args", ())),
                    observables=tuple(doc.get("observables", ())),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise InputError(f"{path}:{i}: bad test line: {e}") from e
    if not tests:
        raise InputError(f"{path}: no tests")
    return tests


_seed_option = click.option(
    "--seed", type=int, default=None,
    help="Random seed (default: $CONPREDICT_SEED or 0).",
)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


@click.group()
def cli():
    """Concurrency-defect prediction toolchain."""


@cli.command("parse")
@click.argument("source", type=click.Path())
@click.option("-o", "--out", default="-", help="Output path (default stdout).")
def cmd_parse(source, out):
    """Parse a source file and report its functions."""
    u = _parse_source(source)
    doc = {
        "globals": [{"name": g.name, "type": g.type} for g in u.globals],
        "functions": [
            {
                "name": f.name,
                "params": [{"name": n, "type": t} for n, t in f.params],
                "nloc": f.nloc,
                "comment_lines": f.comment_lines,
            }
            for f in u.functions
        ],
    }
    text = json.dumps(doc, indent=2) + "\n"
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


@cli.command("ccfg")
@click.argument("source", type=click.Path())
@click.option("-o", "--out", default="-", help="Output path (default stdout).")
def cmd_ccfg(source, out):
    """Build the concurrency control flow graph of a source file."""
    c = build_ccfg(_parse_source(source))
    for diag in c.diagnostics:
        click.echo(f"warning: {diag}", err=True)
    text = dump_ccfg(c)
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _metric_rows(c: Ccfg, program: str, node_weight: int, u=None):
    header = list(_KEY_COLUMNS) + ["SPC", "SVC", "CSC", "CEC", "CCC", "SVD"]
    if u is not None:
        header += ["CN", "CM", "CL", "CPA", "CTC", "CP", "CC", "ES", "MN", "nloc"]
    rows = []
    for fn in c.functions:
        rec = concurrency_metrics(c, fn, node_weight=node_weight)
        row = [program, fn] + [rec.as_dict()[k] for k in
                               ("SPC", "SVC", "CSC", "CEC", "CCC", "SVD")]
        if u is not None:
            seq = sequential_metrics(u, fn)
            row += [seq.as_dict()[k] for k in
                    ("CN", "CM", "CL", "CPA", "CTC", "CP", "CC", "ES", "MN")]
            row.append(u.function(fn).nloc)
        rows.append(row)
    return header, rows


@cli.command("metrics")
@click.argument("input_path", type=click.Path())
@click.option("--node-weight", type=int, default=1, show_default=True)
@click.option("-o", "--out", default="-", help="Output path (default stdout).")
def cmd_metrics(input_path, node_weight, out):
    """Concurrency (and, for source input, sequential) metrics table."""
    if node_weight < 1:
        raise click.UsageError("--node-weight must be positive")
    program = Path(input_path).stem
    if input_path.endswith(".ccfg"):
        try:
            c = load_ccfg(_read_text(input_path))
        except CcfgError as e:
            raise InputError(f"{input_path}: {e}") from e
        header, rows = _metric_rows(c, program, node_weight)
    else:
        u = _parse_source(input_path)
        header, rows = _metric_rows(build_ccfg(u), program, node_weight, u=u)
    _write_csv(out, header, rows)


@cli.command("mutate")
@click.argument("source", type=click.Path())
@click.option("--ops", default="all",
              help="Comma-separated operator ids or 'all'.")
@click.option("--function", "function_", default=None,
              help="Restrict to one function.")
@click.option("--out-dir", required=True, type=click.Path())
def cmd_mutate(source, ops, function_, out_dir):
    """Generate mutants and write them with a manifest."""
    u = _parse_source(source)
    op_list = _parse_ops(ops)
    if function_ is not None and all(f.name != function_ for f in u.functions):
        raise InputError(f"{source}: no function named {function_!r}")
    for fn, uid in unmatched_locks(u):
        click.echo(
            f"warning: {fn}: unmatched lock/unlock at statement {uid} skipped",
            err=True,
        )
    mutants = generate_mutants(u, op_list)
    if function_ is not None:
        mutants = [m for m in mutants if m.function == function_]
    outp = Path(out_dir)
    outp.mkdir(parents=True, exist_ok=True)
    entries = []
    for m in mutants:
        fname = f"{m.id}.mcc"
        (outp / fname).write_text(pretty_print(m.unit))
        entries.append(
            {
                "id": m.id,
                "operator": m.operator,
                "function": m.function,
                "site": list(m.site),
                "file": fname,
            }
        )
    manifest = {
        "source": str(source),
        "ops": list(op_list),
        "function": function_,
        "mutants": entries,
    }
    (outp / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    click.echo(f"wrote {len(mutants)} mutants to {out_dir}", err=True)


def _parse_ops(ops: str) -> tuple:
    if ops == "all":
        return ALL_OPERATORS
    requested = tuple(s.strip() for s in ops.split(",") if s.strip())
    unknown = [op for op in requested if op not in ALL_OPERATORS]
    if unknown:
        raise click.UsageError(f"unknown operators: {', '.join(unknown)}")
    return requested


def _mutation_feature_rows(unit, program, mutants, matrix):
    header = (
        list(_KEY_COLUMNS)
        + [f"MuS_{op}" for op in ALL_OPERATORS]
        + [f"MuDuE_{op}" for op in ALL_OPERATORS]
        + [f"MuDuK_{op}" for op in ALL_OPERATORS]
    )
    rows = []
    for f in unit.functions:
        mus = static_mutation_metrics(mutants, f.name)
        dyn = dynamic_metrics(matrix, mutants, f.name)
        row = [program, f.name]
        row += [mus.counts[op] for op in ALL_OPERATORS]
        row += [dyn.mudue[op] for op in ALL_OPERATORS]
        row += [dyn.muduk[op] for op in ALL_OPERATORS]
        rows.append(row)
    return header, rows


@cli.command("exec")
@click.argument("source", type=click.Path())
@click.option("--tests", "tests_path", required=True, type=click.Path(),
              help="JSON-lines test manifest.")
@click.option("--mutants", "mutants_path", default=None, type=click.Path(),
              help="Mutant manifest from `mutate`.")
@click.option("--seeds", type=int, default=100, show_default=True,
              help="Runs per (program, test).")
@click.option("--step-limit", type=int, default=100_000, show_default=True)
@click.option("--exhaustive", type=int, default=None,
              help="Use exhaustive enumeration (decision bound) for references.")
@click.option("--out-dir", default=None, type=click.Path(),
              help="Write killmatrix.csv and mutation_metrics.csv here.")
def cmd_exec(source, tests_path, mutants_path, seeds, step_limit, exhaustive,
             out_dir):
    """Run tests on a program (and its mutants) under the seeded scheduler."""
    if seeds < 1 or step_limit < 1:
        raise click.UsageError("--seeds and --step-limit must be positive")
    u = _parse_source(source)
    tests = _load_tests(tests_path)

    def refs(test):
        if exhaustive is not None:
            return enumerate_observables(u, test, exhaustive, step_limit)
        return reference_set(u, test, seeds, step_limit)

    if mutants_path is None:
        doc = {
            t.key: sorted(map(repr, refs(t))) for t in tests
        }
        click.echo(json.dumps(doc, indent=2))
        return

    try:
        manifest = json.loads(_read_text(mutants_path))
        op_list = tuple(manifest["ops"])
        function_ = manifest.get("function")
        expected_ids = [m["id"] for m in manifest["mutants"]]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise InputError(f"{mutants_path}: bad manifest: {e}") from e
    mutants = generate_mutants(u, op_list)
    if function_ is not None:
        mutants = [m for m in mutants if m.function == function_]
    if [m.id for m in mutants] != expected_ids:
        raise InputError(
            f"{mutants_path}: manifest does not match {source} "
            "(was it generated from a different source?)"
        )
    matrix = build_kill_matrix(u, mutants, tests, seeds, step_limit)
    kill_header = ["mutant", "test", "executed", "killed"]
    kill_rows = [
        [m.id, t.key, int(matrix.cells[(m.id, t.key)][0]),
         int(matrix.cells[(m.id, t.key)][1])]
        for m in mutants
        for t in tests
    ]
    header, rows = _mutation_feature_rows(u, Path(source).stem, mutants, matrix)
    if out_dir is None:
        _write_csv("-", kill_header, kill_rows)
        click.echo("")
        _write_csv("-", header, rows)
    else:
        outp = Path(out_dir)
        outp.mkdir(parents=True, exist_ok=True)
        _write_csv(str(outp / "killmatrix.csv"), kill_header, kill_rows)
        _write_csv(str(outp / "mutation_metrics.csv"), header, rows)


@cli.command("assemble")
@click.argument("features", nargs=-1, required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("-o", "--out", default="-", help="Output path (default stdout).")
def cmd_assemble(features, labels_path, out):
    """Join feature tables with labels into one dataset."""
    tables = [_read_feature_table(p) for p in features]
    labels = _read_labels(labels_path)
    # nloc may appear in several tables; keep the first occurrence.
    nloc_by_key: dict = {}
    cleaned = []
    for table in tables:
        new_table = {}
        for key, row in table.items():
            row = dict(row)
            if "nloc" in row:
                nloc_by_key.setdefault(key, row.pop("nloc"))
            new_table[key] = row
        cleaned.append(new_table)
    try:
        d = assemble(cleaned, labels)
    except DatasetError as e:
        raise InputError(str(e)) from e
    nloc = None
    if nloc_by_key:
        try:
            nloc = np.asarray([nloc_by_key[k] for k in d.keys], dtype=np.float64)
        except KeyError as e:
            raise InputError(f"missing nloc for function {e}") from e
    header, rows = _dataset_rows(d, nloc)
    _write_csv(out, header, rows)


def _feature_set_options(fn):
    fn = click.option(
        "--feature-set", type=click.Choice(sorted(_FEATURE_SETS)),
        default="conpredictor", show_default=True,
    )(fn)
    fn = click.option(
        "--sequential-baseline", is_flag=True,
        help="Shorthand for --feature-set sequential.",
    )(fn)
    return fn


def _resolve_feature_set(feature_set, sequential_baseline) -> str:
    if sequential_baseline:
        if feature_set not in ("conpredictor", "sequential"):
            raise click.UsageError(
                "--sequential-baseline conflicts with --feature-set"
            )
        return "sequential"
    return feature_set


@cli.command("train")
@click.argument("dataset_path", type=click.Path())
@click.option("--classifier", type=click.Choice(KINDS),
              default="random-forest", show_default=True)
@click.option("--smote-percent", type=int, default=100, show_default=True)
@click.option("--select/--no-select", default=True, show_default=True)
@_feature_set_options
@_seed_option
@click.option("-o", "--out", required=True, type=click.Path())
def cmd_train(dataset_path, classifier, smote_percent, select, feature_set,
              sequential_baseline, seed, out):
    """Fit a classifier on a full dataset and save the model."""
    if smote_percent < 0:
        raise click.UsageError("--smote-percent must be non-negative")
    seed = _resolve_seed(seed)
    d_full, _ = _load_dataset(dataset_path)
    d = _select_feature_set(d_full, _resolve_feature_set(
        feature_set, sequential_baseline))
    spec = ClassifierSpec(kind=classifier, seed=_sub_seed(seed, 0))
    try:
        n_real = d.n_rows
        train_d, bases = smote(
            d, smote_percent, 5, _sub_seed(seed, 1), return_bases=True
        )
        selected = None
        if select:
            groups = np.concatenate([np.arange(n_real), bases])
            chosen = wrapper_select(
                train_d, spec, _sub_seed(seed, 2),
                score_rows=np.arange(n_real), groups=groups,
            )
            selected = chosen if chosen else None
        model = train(train_d, spec, selected)
    except (DatasetError, ValueError) as e:
        raise InputError(str(e)) from e
    model.metadata.update(
        {
            "dataset": str(dataset_path),
            "feature_set": _resolve_feature_set(feature_set, sequential_baseline),
            "smote_percent": smote_percent,
            "seed": seed,
        }
    )
    Path(out).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
    click.echo(
        f"trained {classifier} on {d.n_rows} rows; "
        f"selected {len(model.selected)} features", err=True,
    )


@cli.command("evaluate")
@click.argument("dataset_path", type=click.Path())
@click.option("--classifier", type=click.Choice(KINDS),
              default="random-forest", show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--smote-percent", type=int, default=100, show_default=True)
@click.option("--select/--no-select", default=True, show_default=True)
@_feature_set_options
@_seed_option
@click.option("-o", "--out", default="-", help="Report path (default stdout).")
@click.option("--fold-out", default=None, type=click.Path(),
              help="Also write per-fold F1 values here.")
def cmd_evaluate(dataset_path, classifier, folds, repeats, smote_percent,
                 select, feature_set, sequential_baseline, seed, out, fold_out):
    """Cross-validated evaluation report."""
    if folds < 2 or repeats < 1 or smote_percent < 0:
        raise click.UsageError("bad --folds/--repeats/--smote-percent")
    seed = _resolve_seed(seed)
    d_full, nloc = _load_dataset(dataset_path)
    fset = _resolve_feature_set(feature_set, sequential_baseline)
    d = _select_feature_set(d_full, fset)
    spec = ClassifierSpec(kind=classifier, seed=0)
    try:
        res = cross_validate(
            d, spec, folds=folds, repeats=repeats,
            smote_percent=smote_percent, seed=seed, select=select,
        )
    except DatasetError as e:
        raise InputError(str(e)) from e
    header = [
        "feature_set", "classifier", "repeat",
        "precision", "recall", "f1", "auc", "pofb20", "popt",
    ]
    rows = []
    for r in range(repeats):
        proba = res.proba[r]
        cm = confusion(proba, d.y)
        precision, recall, f1 = prf(cm)
        row = [fset, classifier, r, precision, recall, f1, auc(proba, d.y)]
        if nloc is not None:
            row += [pofb20(proba, nloc, d.y), popt(proba, nloc, d.y)]
        else:
            row += ["", ""]
        rows.append(row)
    _write_csv(out, header, rows)
    if fold_out is not None:
        f1s = res.fold_f1(d.y)
        fold_rows = [
            [rec.repeat, rec.fold, f1s[i], len(rec.selected), rec.smote_added]
            for i, rec in enumerate(res.records)
        ]
        _write_csv(
            fold_out,
            ["repeat", "fold", "f1", "n_selected", "smote_added"],
            fold_rows,
        )


@cli.command("rank")
@click.argument("dataset_path", type=click.Path())
@click.option("--runs", type=int, default=20, show_default=True,
              help="Independent forest fits for importance sampling.")
@_feature_set_options
@_seed_option
@click.option("-o", "--out", default="-", help="Rank table path.")
@click.option("--effects", "effects_out", default=None, type=click.Path(),
              help="Also write per-feature class-difference effects.")
def cmd_rank(dataset_path, runs, feature_set, sequential_baseline, seed, out,
             effects_out):
    """Permutation-importance Scott-Knott ranking of features."""
    if runs < 2:
        raise click.UsageError("--runs must be at least 2")
    seed = _resolve_seed(seed)
    d_full, _ = _load_dataset(dataset_path)
    d = _select_feature_set(d_full, _resolve_feature_set(
        feature_set, sequential_baseline))
    samples = {f: [] for f in d.feature_names}
    try:
        for r in range(runs):
            s = _sub_seed(seed, r)
            spec = ClassifierSpec(kind="random-forest", seed=s)
            model = train(d, spec)
            imp = permutation_importance(model, d, seed=s)
            for f, v in imp.as_dict().items():
                samples[f].append(v)
        sk = scott_knott({f: np.asarray(v) for f, v in samples.items()})
    except ValueError as e:
        raise InputError(str(e)) from e
    rows = [
        [sk.rank_of[f], f, sk.rank_mean[f], sk.rank_highest[f], sk.rank_lowest[f]]
        for group in sk.groups
        for f in group
    ]
    _write_csv(out, ["group", "metric", "mean_rank", "highest_rank", "lowest_rank"], rows)
    if effects_out is not None:
        eff_rows = []
        for f in d.feature_names:
            p, eff, direction = feature_effect(d, f)
            eff_rows.append([f, direction, eff.d, eff.magnitude, p])
        _write_csv(
            effects_out,
            ["metric", "direction", "d", "magnitude", "p_value"],
            eff_rows,
        )


@cli.command("synth")
@click.option("--n", type=int, default=500, show_default=True)
@click.option("--faulty", type=float, default=0.1, show_default=True)
@click.option("--concurrency-signal", type=float, default=1.0, show_default=True)
@click.option("--sequential-signal", type=float, default=0.0, show_default=True)
@click.option("--noise", type=float, default=0.15, show_default=True)
@_seed_option
@click.option("-o", "--out", default="-", help="Dataset path (default stdout).")
@click.option("--meta", "meta_out", default=None, type=click.Path(),
              help="Write ground-truth metadata JSON here.")
def cmd_synth(n, faulty, concurrency_signal, sequential_signal, noise, seed,
              out, meta_out):
    """Generate a synthetic labeled corpus with planted signal."""
    seed = _resolve_seed(seed)
    try:
        spec = SynthSpec(
            n=n, faulty_fraction=faulty,
            concurrency_signal=concurrency_signal,
            sequential_signal=sequential_signal, noise=noise, seed=seed,
        )
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    d, nloc, meta = synth(spec)
    header, rows = _dataset_rows(d, nloc)
    _write_csv(out, header, rows)
    if meta_out is not None:
        Path(meta_out).write_text(json.dumps(meta, indent=2) + "\n")


@cli.command("pipeline")
@click.argument("corpus", type=click.Path())
@click.argument("labels_path", type=click.Path())
@click.option("--classifier", type=click.Choice(KINDS),
              default="random-forest", show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--smote-percent", type=int, default=100, show_default=True)
@click.option("--select/--no-select", default=True, show_default=True)
@click.option("--runs-per-test", type=int, default=100, show_default=True,
              help="Seeded runs per (mutant, test).")
@click.option("--step-limit", type=int, default=100_000, show_default=True)
@click.option("--node-weight", type=int, default=1, show_default=True)
@_feature_set_options
@_seed_option
@click.option("--out-dir", required=True, type=click.Path())
def cmd_pipeline(corpus, labels_path, classifier, folds, repeats,
                 smote_percent, select, runs_per_test, step_limit, node_weight,
                 feature_set, sequential_baseline, seed, out_dir):
    """Parse a corpus, extract all features, and cross-validate."""
    seed = _resolve_seed(seed)
    corpus_dir = Path(corpus)
    sources = sorted(corpus_dir.glob("*.mcc"))
    if not sources:
        raise InputError(f"{corpus}: no .mcc sources found")
    labels = _read_labels(labels_path)
    outp = Path(out_dir)
    outp.mkdir(parents=True, exist_ok=True)

    feature_header = None
    feature_rows: list = []
    for src in sources:
        program = src.stem
        u = _parse_source(str(src))
        c = build_ccfg(u)
        met_header, met_rows = _metric_rows(c, program, node_weight, u=u)
        mutants = generate_mutants(u)
        if any(f.name == "main" for f in u.functions):
            observables = tuple(name for name, _ty in c.shared_vars)
            tests = [TestCase("main", (), observables)]
            matrix = build_kill_matrix(
                u, mutants, tests, runs_per_test, step_limit
            )
        else:
            raise InputError(f"{src}: pipeline programs need a main function")
        mut_header, mut_rows = _mutation_feature_rows(u, program, mutants, matrix)
        merged_header = met_header + mut_header[2:]
        if feature_header is None:
            feature_header = merged_header
        for met_row, mut_row in zip(met_rows, mut_rows):
            feature_rows.append(met_row + mut_row[2:])
    _write_csv(str(outp / "features.csv"), feature_header, feature_rows)

    table = _read_feature_table(str(outp / "features.csv"))
    nloc_by_key = {k: row.pop("nloc") for k, row in table.items()}
    try:
        d_all = assemble([table], labels)
    except DatasetError as e:
        raise InputError(str(e)) from e
    nloc = np.asarray([nloc_by_key[k] for k in d_all.keys], dtype=np.float64)
    header, rows = _dataset_rows(d_all, nloc)
    _write_csv(str(outp / "dataset.csv"), header, rows)

    ctx = click.get_current_context()
    ctx.invoke(
        cmd_evaluate,
        dataset_path=str(outp / "dataset.csv"),
        classifier=classifier, folds=folds, repeats=repeats,
        smote_percent=smote_percent, select=select,
        feature_set=feature_set, sequential_baseline=sequential_baseline,
        seed=seed, out=str(outp / "report.csv"),
        fold_out=str(outp / "fold_f1.csv"),
    )
    click.echo(f"report written to {outp / 'report.csv'}", err=True)


@cli.command("predict")
@click.argument("model_path", type=click.Path())
@click.argument("dataset_path", type=click.Path())
@click.option("-o", "--out", default="-", help="Output path (default stdout).")
def cmd_predict(model_path, dataset_path, out):
    """Score a dataset with a saved model."""
    try:
        model = model_from_dict(json.loads(_read_text(model_path)))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"{model_path}: bad model file: {e}") from e
    d_full, _ = _load_dataset(dataset_path)
    missing = [f for f in model.feature_names if f not in d_full.feature_names]
    if missing:
        raise InputError(f"dataset lacks model columns: {', '.join(missing)}")
    d = d_full.select_features(model.feature_names)
    proba = model.predict_proba(d.X)
    rows = [
        [k[0], k[1], float(p)] for k, p in zip(d.keys, proba)
    ]
    _write_csv(out, ["program", "function", "probability"], rows)


# --------------------------------------------------------------------------
# Entry point with spec'd exit codes
# --------------------------------------------------------------------------


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return 1
    except (InputError, ParseError, CcfgError) as e:
        click.echo(f"input error: {e}", err=True)
        return 2
    except Exception as e:  # internal invariant violation
        click.echo(f"internal error: {type(e).__name__}: {e}", err=True)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
