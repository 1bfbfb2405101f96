import csv
import io
import json

import pytest

from samrule import cli

from conftest import TOY_CSV, load_schema

jsonschema = pytest.importorskip("jsonschema")
from referencing import Registry, Resource  # noqa: E402

SCHEMAS = ("model", "solver_result", "train_result", "bounds", "evaluate", "shatter")
REGISTRY = Registry().with_resources(
    (f"samrule/{n}.schema.json", Resource.from_contents(load_schema(n))) for n in SCHEMAS
)


def validate(payload, schema):
    jsonschema.Draft202012Validator(load_schema(schema), registry=REGISTRY).validate(payload)


def call(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in ("timing", "wall_time")}
    return obj


@pytest.fixture
def big_csv(tmp_path):
    from samrule.dataset import planted_dataset

    path = tmp_path / "planted.csv"
    planted_dataset(n=400, d=10, seed=3)[0].to_csv(path)
    return path


# exact ----------------------------------------------------------------------


@pytest.mark.parametrize("alpha, expected", [(0.0, 0.0), (0.01, 0.03)])
def test_exact_toy(capsys, toy_csv, alpha, expected):
    code, out, _ = call(capsys, "exact", "--dataset", toy_csv, "-k", 3, "-z", 2, "--alpha", alpha)
    assert code == cli.EXIT_OK
    payload = json.loads(out)
    validate(payload, "solver_result")
    assert payload["mistakes"] == 0
    assert payload["loss"] == pytest.approx(expected, abs=1e-12)
    assert payload["proven_optimal"]


def test_exact_k0(capsys, toy_csv):
    code, out, _ = call(capsys, "exact", "--dataset", toy_csv, "-k", 0)
    payload = json.loads(out)
    assert code == 0
    assert payload["length"] == 0
    assert payload["loss"] == pytest.approx(0.4)
    assert payload["model"]["default_prediction"] == 1


def test_exact_budget_exhausted(capsys, big_csv):
    code, out, err = call(capsys, "exact", "--dataset", big_csv, "-k", 3, "-z", 2, "--node-budget", 3)
    assert code == cli.EXIT_BUDGET
    assert json.loads(out)["proven_optimal"] is False
    assert "truncated" in err


def test_exact_catalogue_cap(capsys, big_csv):
    code, _, err = call(capsys, "exact", "--dataset", big_csv, "-k", 2, "--catalogue-cap", 3)
    assert code == cli.EXIT_RESOURCE
    assert "cap" in err


def test_missing_dataset(capsys, tmp_path):
    code, _, err = call(capsys, "exact", "--dataset", tmp_path / "none.csv")
    assert code == cli.EXIT_DATA
    assert "no such file" in err
    with pytest.raises(SystemExit) as exc:
        cli.main(["exact"])
    assert exc.value.code == cli.EXIT_USAGE


def test_malformed_dataset(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,label\n0,1\n5,0\n")
    code, _, err = call(capsys, "exact", "--dataset", path)
    assert code == cli.EXIT_DATA
    assert "line 3" in err


# train ------------------------------------------------------------------------


def test_train_toy_replicated(capsys, toy_csv):
    code, out, err = call(capsys, "train", "--dataset", toy_csv, "--replicate", 200)
    assert code == cli.EXIT_OK
    payload = json.loads(out)
    validate(payload, "train_result")
    assert payload["certificate"] is not None
    assert payload["plan"]["n"] == 1000
    assert payload["plan"]["clamped"]  # m_hat exceeds 1000 rows at the defaults
    assert payload["certificate"]["exact"]
    assert "optimal" in err


def test_train_sampled_certificate(capsys, toy_csv):
    code, out, err = call(capsys, "train", "--dataset", toy_csv, "--replicate", 200, "-z", 2,
                          "--alpha", 0, "--epsilon", 1, "--theta", 1, "--delta", 0.5)
    payload = json.loads(out)
    assert code == 0
    assert not payload["plan"]["clamped"]
    assert payload["certificate"]["sample_loss"] == 0.0
    assert "probability >= 0.5" in err


def test_train_deterministic(capsys, big_csv):
    args = ("train", "--dataset", big_csv, "--replicate", 100, "--epsilon", 1, "--theta", 0.2,
            "--seed", 5, "--evaluate-full")
    _, first, _ = call(capsys, *args)
    _, second, _ = call(capsys, *args)
    a, b = json.loads(first), json.loads(second)
    assert not a["plan"]["clamped"]
    text = lambda p: json.dumps(strip_timing(p), sort_keys=True)
    assert text(a) == text(b)
    validate(a, "train_result")


def test_train_budget_too_small(capsys, big_csv):
    code, out, err = call(capsys, "train", "--dataset", big_csv, "-z", 2, "--node-budget", 2)
    assert code == cli.EXIT_BUDGET
    assert json.loads(out)["certificate"] is None
    assert "no certificate" in err


def test_train_without_replacement(capsys, big_csv):
    code, out, _ = call(capsys, "train", "--dataset", big_csv, "--replicate", 100, "--epsilon", 1,
                        "--theta", 0.2, "--without-replacement")
    assert code == cli.EXIT_OK
    assert json.loads(out)["certificate"] is None


def test_env_override(capsys, big_csv, monkeypatch):
    monkeypatch.setenv("SAMRULE_SEED", "11")
    _, out, _ = call(capsys, "train", "--dataset", big_csv, "--replicate", 100, "--epsilon", 1,
                     "--theta", 0.2)
    assert json.loads(out)["seed"] == 11
    _, out, _ = call(capsys, "train", "--dataset", big_csv, "--replicate", 100, "--epsilon", 1,
                     "--theta", 0.2, "--seed", 2)
    assert json.loads(out)["seed"] == 2


# bounds -------------------------------------------------------------------------


def test_bounds_fixture(capsys):
    code, out, _ = call(capsys, "bounds", "-k", 4, "-z", 1, "-d", 124, "--epsilon", 1,
                        "--theta", 0.05, "--delta", 0.05)
    payload = json.loads(out)
    validate(payload, "bounds")
    assert code == 0
    assert payload["vc_upper"] == 33
    assert payload["m_hat"] == 5146
    assert payload["m_hat"] <= payload["m_hat_analytic"]


def test_bounds_vc_lower(capsys):
    _, out, _ = call(capsys, "bounds", "-k", 2, "-z", 1, "-d", 14)
    assert json.loads(out)["vc_lower"] == 6


def test_bounds_from_dataset(capsys, toy_csv):
    _, out, _ = call(capsys, "bounds", "--dataset", toy_csv)
    assert json.loads(out)["d"] == 4


@pytest.mark.parametrize("args", [("--theta", 0), ("--epsilon", 2), ("--delta", 1), ("-z", 5)])
def test_bounds_usage_errors(capsys, args):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bounds", "-d", "4", *map(str, args)])
    assert exc.value.code == cli.EXIT_USAGE


# evaluate ---------------------------------------------------------------------


def write_model(tmp_path, rules, default=0, alpha=0.01):
    path = tmp_path / "model.json"
    payload = {"rules": [{"features": f, "prediction": p} for f, p in rules],
               "default_prediction": default, "alpha": alpha}
    path.write_text(json.dumps(payload))
    return path


TOY_RULES = [(["x1", "x3"], 0), (["x2"], 1), (["x4"], 1)]


def test_evaluate_toy(capsys, toy_csv, tmp_path):
    model = write_model(tmp_path, TOY_RULES)
    code, out, _ = call(capsys, "evaluate", "--dataset", toy_csv, "--model", model)
    payload = json.loads(out)
    validate(payload, "evaluate")
    assert code == 0
    assert payload["mistakes"] == 0
    assert payload["loss"] == pytest.approx(0.03, abs=1e-12)


def test_evaluate_alpha_override(capsys, toy_csv, tmp_path):
    model = write_model(tmp_path, [(["x2"], 1)])
    _, base, _ = call(capsys, "evaluate", "--dataset", toy_csv, "--model", model)
    _, over, _ = call(capsys, "evaluate", "--dataset", toy_csv, "--model", model, "--alpha", 0.2)
    base, over = json.loads(base), json.loads(over)
    assert base["mistakes"] == over["mistakes"] == 1
    assert over["loss"] - base["loss"] == pytest.approx(0.2 - 0.01)


def test_evaluate_deviation(capsys, toy_csv, tmp_path):
    model = write_model(tmp_path, TOY_RULES)
    _, out, _ = call(capsys, "evaluate", "--dataset", toy_csv, "--model", model, "--sample-loss", 0.05)
    assert json.loads(out)["deviation"] == pytest.approx(0.02)


def test_evaluate_unknown_feature(capsys, toy_csv, tmp_path):
    model = write_model(tmp_path, [(["x9"], 1)])
    code, _, err = call(capsys, "evaluate", "--dataset", toy_csv, "--model", model)
    assert code == cli.EXIT_DATA
    assert "x9" in err


def test_evaluate_bad_json(capsys, toy_csv, tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    code, _, _ = call(capsys, "evaluate", "--dataset", toy_csv, "--model", path)
    assert code == cli.EXIT_DATA


def test_trained_model_roundtrips_through_evaluate(capsys, toy_csv, tmp_path):
    out_path = tmp_path / "exact.json"
    call(capsys, "exact", "--dataset", toy_csv, "-k", 3, "-z", 2, "--output", out_path)
    model_path = tmp_path / "model.json"
    model_path.write_text(json.dumps(json.loads(out_path.read_text())["model"]))
    _, out, _ = call(capsys, "evaluate", "--dataset", toy_csv, "--model", model_path)
    assert json.loads(out)["loss"] == pytest.approx(0.03)


# shatter-check --------------------------------------------------------------------


@pytest.mark.parametrize("a, k", [(1, 1), (2, 2)])
def test_shatter_check_passes(capsys, a, k):
    code, out, _ = call(capsys, "shatter-check", "-a", a, "-k", k)
    payload = json.loads(out)
    validate(payload, "shatter")
    assert code == 0
    assert payload["shattered"] and payload["within_upper_bound"]


def test_shatter_check_guard(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["shatter-check", "-a", "5", "-k", "5"])
    assert exc.value.code == cli.EXIT_USAGE


# binarize ------------------------------------------------------------------------


def test_binarize(capsys, tmp_path):
    src = tmp_path / "raw.csv"
    src.write_text("age,color,label\n" + "".join(
        f"{i},{'red' if i % 3 else 'blue'},{i % 2}\n" for i in range(1, 101)
    ))
    out = tmp_path / "bin.csv"
    code, _, _ = call(capsys, "binarize", "--dataset", src, "--thresholds", 4, "--output", out)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert rows[0] == ["age>=20.8", "age<20.8", "age>=40.6", "age<40.6", "age>=60.4", "age<60.4",
                       "age>=80.2", "age<80.2", "color=blue", "color=red", "label"]
    assert len(rows) == 101
    code, _, _ = call(capsys, "binarize", "--dataset", src, "--replicate", 100, "--output", out)
    assert len(out.read_text().splitlines()) == 100 * 100 + 1


def test_binarize_malformed(capsys, tmp_path):
    src = tmp_path / "raw.csv"
    src.write_text("a,label\n1,0\n2,1,7\n")
    code, _, err = call(capsys, "binarize", "--dataset", src)
    assert code == cli.EXIT_DATA
    assert "line 3" in err


# bench ----------------------------------------------------------------------------


def test_bench(capsys):
    args = ("bench", "--synthetic", 2000, "--synthetic-d", 8, "--replicate", 20, "--runs", 3,
            "--with-exact")
    code, first, _ = call(capsys, *args)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(first)))
    assert len(rows) == 3
    assert [r["seed"] for r in rows] == ["0", "1", "2"]
    assert all(r["certified"] == "True" and r["optimal_loss"] for r in rows)
    _, second, _ = call(capsys, *args)
    timing = {"sample_solve_time", "full_solve_time"}
    strip = lambda text: [{k: v for k, v in r.items() if k not in timing}
                          for r in csv.DictReader(io.StringIO(text))]
    assert strip(first) == strip(second)


def test_bench_json_and_missing(capsys, tmp_path):
    out = tmp_path / "bench.json"
    code, _, _ = call(capsys, "bench", "--synthetic", 500, "--runs", 1, "--output", out)
    assert code == 0
    assert json.loads(out.read_text())["rows"][0]["optimal_loss"] is None
    with pytest.raises(SystemExit):
        cli.main(["bench"])
